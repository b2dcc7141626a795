//! Skip-gram negative-sampling kernels, generic over the float type so the
//! same code runs in `f32` training and `f64` gradient checks.

use num_traits::Float;

#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`
#[inline]
pub fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[inline]
pub fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `-ln(sigmoid(x))`, stable for large |x|.
#[inline]
pub fn neg_log_sigmoid<F: Float>(x: F) -> F {
    if x > F::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Scores `h` against each `(context id, label)` target, updates the
/// context rows in place and accumulates the input-side step into
/// `grad_h`. Returns the dot product of the last target so callers can
/// check finiteness cheaply.
///
/// After the call, `grad_h` holds `-lr * dL/dh` and each context row has
/// moved by `-lr * dL/dc` for the negative-sampling loss
/// `L = -ln s(h.c_pos) - sum ln s(-h.c_neg)`.
#[inline]
pub fn score_targets<F: Float>(h: &[F], context: &mut [F], targets: &[(u32, bool)], lr: F, grad_h: &mut [F]) -> F {
    let dim = h.len();
    let mut last = F::zero();
    for &(t, label) in targets {
        let row = &mut context[t as usize * dim..(t as usize + 1) * dim];
        let f = dot(h, row);
        let y = if label { F::one() } else { F::zero() };
        let g = (y - sigmoid(f)) * lr;
        axpy(g, row, grad_h);
        axpy(g, h, row);
        last = f;
    }
    last
}

/// Applies the accumulated input step to the shared row and the
/// community deviation row. The deviation row carries the L2 penalty as an
/// implicit (proximal) step, which stays stable for any `lr * l2`.
#[inline]
pub fn apply_input_step<F: Float>(main_row: &mut [F], dev_row: &mut [F], grad_h: &[F], lr: F, l2_dev: F, l2_main: F) {
    let shrink_dev = F::one() / (F::one() + lr * l2_dev);
    let shrink_main = F::one() / (F::one() + lr * l2_main);
    for ((m, d), &g) in main_row.iter_mut().zip(dev_row.iter_mut()).zip(grad_h) {
        *m = (*m + g) * shrink_main;
        *d = (*d + g) * shrink_dev;
    }
}

/// Full per-example objective: negative-sampling loss of the composed
/// input `main + dev` plus `l2_dev/2 |dev|^2 + l2_main/2 |main|^2`.
pub fn pair_loss<F: Float>(
    main_row: &[F],
    dev_row: &[F],
    context: &[F],
    targets: &[(u32, bool)],
    l2_dev: F,
    l2_main: F,
) -> F {
    let dim = main_row.len();
    let half = F::from(0.5).unwrap();
    let mut loss = F::zero();
    for &(t, label) in targets {
        let row = &context[t as usize * dim..(t as usize + 1) * dim];
        let f = main_row
            .iter()
            .zip(dev_row)
            .zip(row)
            .fold(F::zero(), |acc, ((&m, &d), &c)| acc + (m + d) * c);
        loss = loss + if label { neg_log_sigmoid(f) } else { neg_log_sigmoid(-f) };
    }
    loss + half * l2_dev * dot(dev_row, dev_row) + half * l2_main * dot(main_row, main_row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neg_log_sigmoid_matches_naive() {
        for &x in &[-30.0f64, -3.0, -0.1, 0.0, 0.7, 5.0, 40.0] {
            let naive = -(1.0 / (1.0 + (-x).exp())).ln();
            assert!((neg_log_sigmoid(x) - naive).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn score_targets_positive_pulls_together() {
        let h = [0.5f64, -0.25];
        let mut ctx = [0.1, 0.2, 0.0, 0.0];
        let mut grad = [0.0; 2];
        let before = dot(&h, &ctx[..2]);
        score_targets(&h, &mut ctx, &[(0, true)], 0.5, &mut grad);
        assert!(dot(&h, &ctx[..2]) > before);
        assert_eq!(&ctx[2..], &[0.0, 0.0]);
    }
}
