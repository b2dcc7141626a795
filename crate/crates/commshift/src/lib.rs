//! File formats, multi-threaded training and the `commshift` command-line
//! pipeline on top of `commshift-core`.

pub mod binfmt;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod parallel;
pub mod persist;
pub mod report;
pub mod stages;
pub mod tsv;
