//! Argument parsing and exit codes: 0 success, 1 usage error, 2 data
//! error, 3 internal error.

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand};

use crate::stages::{self, Context, LmEvalArgs, StageError, StageResult};

#[derive(Debug, Parser)]
#[command(
    name = "commshift",
    version,
    about = "Community-conditioned embeddings and semantic shift analysis"
)]
struct Cli {
    /// Workspace config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config (or scenario) seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Directory holding run manifests and the default report.
    #[arg(long, global = true, env = "COMMSHIFT_WORKSPACE", default_value = ".")]
    workspace: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic JSONL corpus from a scenario file.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a corpus store from JSONL records.
    Ingest {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a community-conditioned embedding space.
    Train {
        #[arg(long)]
        store: PathBuf,
        /// Restrict training to one domain's members plus the global community.
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute dsi and csi for every word of a domain.
    Shift {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lexical features per word: a community name or `domain:<name>`.
    Features {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        scope: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contrast features of the shift and no.shift words of one column.
    Contrast {
        #[arg(long)]
        shift_table: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// `dsi` or `csi_<community>`.
        #[arg(long)]
        column: String,
        /// Set size; defaults to the config's selection.k, else 10.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one community's language model.
    LmTrain {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        community: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the embedding-substitution experiment; models are `<dir>/<community>.lm`.
    LmEval {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        shift_table: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export composed vectors as text.
    Export {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize every artifact recorded in the workspace.
    Report {
        /// Defaults to `<workspace>/report.tsv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> StageResult<()> {
    let ctx = Context {
        workspace: cli.workspace,
        config: cli.config,
        seed: cli.seed,
        force: cli.force,
    };
    match cli.command {
        Command::Synth { scenario, out } => stages::synth(&ctx, &scenario, &out),
        Command::Ingest { input, out } => stages::ingest_stage(&ctx, &input, &out),
        Command::Train { store, domain, out } => stages::train(&ctx, &store, domain.as_deref(), &out),
        Command::Shift { space, domain, out } => stages::shift(&ctx, &space, &domain, &out),
        Command::Features { store, scope, out } => stages::features(&ctx, &store, &scope, &out),
        Command::Contrast {
            shift_table,
            features,
            column,
            k,
            out,
        } => stages::contrast(&ctx, &shift_table, &features, &column, k, &out),
        Command::LmTrain {
            store,
            space,
            community,
            out,
        } => stages::lm_train(&ctx, &store, &space, &community, &out),
        Command::LmEval {
            models,
            shift_table,
            space,
            store,
            domain,
            out,
        } => stages::lm_eval(
            &ctx,
            &LmEvalArgs {
                models: &models,
                shift_table: &shift_table,
                space: &space,
                store: &store,
                domain: domain.as_deref(),
                out: &out,
            },
        ),
        Command::Export { space, out } => stages::export(&ctx, &space, &out),
        Command::Report { out } => stages::report(&ctx, out.as_deref()).map(|_| ()),
    }
}

/// Parses `args` (including the program name), runs the stage and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    let result = catch_unwind(AssertUnwindSafe(|| dispatch(cli)))
        .unwrap_or_else(|_| Err(StageError::Internal("internal error (panic)".into())));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
