//! Differential and gradient oracles.

use serde::{Deserialize, Serialize};

use super::numeric::NumericArray;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-2,
            atol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdMode {
    Reverse,
    Forward,
}

/// Element rule: NaN equals NaN, infinities must match exactly, otherwise
/// `|a - b| <= atol + rtol * |b|`.
pub fn elements_agree(a: f64, b: f64, tol: &Tolerances) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol.atol + tol.rtol * b.abs()
}

/// `|a - b| / |b|`, falling back to `|a - b|` when `b` is zero. Mismatched
/// specials are infinitely far apart.
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return if a.is_nan() && b.is_nan() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    if a.is_infinite() || b.is_infinite() {
        return if a == b { 0.0 } else { f64::INFINITY };
    }
    let diff = (a - b).abs();
    if b == 0.0 {
        diff
    } else {
        diff / b.abs()
    }
}

/// Maximum relative error over disagreeing elements, or `None` when all
/// elements agree. Length mismatch counts as infinite error.
fn compare_slices(a: &[f64], b: &[f64], tol: &Tolerances) -> Option<f64> {
    if a.len() != b.len() {
        return Some(f64::INFINITY);
    }
    a.iter()
        .zip(b)
        .filter(|(x, y)| !elements_agree(**x, **y, tol))
        .map(|(x, y)| relative_error(*x, *y))
        .reduce(f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffOutcome {
    Consistent,
    Inconsistent { max_rel_err: f64 },
}

/// Compares aligned outputs from two backends, anchoring the relative
/// tolerance on `b`. A differing number of outputs or a shape mismatch is
/// itself an inconsistency.
pub fn adjudicate_diff(a: &[NumericArray], b: &[NumericArray], tol: &Tolerances) -> DiffOutcome {
    if a.len() != b.len() {
        return DiffOutcome::Inconsistent {
            max_rel_err: f64::INFINITY,
        };
    }
    let mut worst: Option<f64> = None;
    for (x, y) in a.iter().zip(b) {
        let err = if x.shape != y.shape {
            Some(f64::INFINITY)
        } else {
            compare_slices(&x.data, &y.data, tol)
        };
        if let Some(e) = err {
            worst = Some(worst.map_or(e, |w| w.max(e)));
        }
    }
    match worst {
        None => DiffOutcome::Consistent,
        Some(max_rel_err) => DiffOutcome::Inconsistent { max_rel_err },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdOutcome {
    pub consistent: bool,
    pub max_rel_err: f64,
    /// The AD mode farther from the numerical gradient, when inconsistent.
    pub deviating_mode: Option<AdMode>,
    pub forward_unavailable: bool,
}

/// Largest absolute deviation between two gradient vectors.
fn distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.is_nan() && y.is_nan() || (x.is_infinite() && x == y) {
                0.0
            } else {
                let d = (x - y).abs();
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    d
                }
            }
        })
        .fold(0.0, f64::max)
}

/// Triangulates reverse-mode, forward-mode and numerical gradients. All
/// pairs must agree; otherwise the AD mode farther from the numerical
/// gradient is blamed (reverse on ties). Without a forward-mode gradient
/// only reverse vs numerical is checked.
pub fn adjudicate_ad(
    grad_rev: &[f64],
    grad_fwd: Option<&[f64]>,
    grad_nd: &[f64],
    tol: &Tolerances,
) -> AdOutcome {
    let mut errs = vec![compare_slices(grad_rev, grad_nd, tol)];
    if let Some(fwd) = grad_fwd {
        errs.push(compare_slices(fwd, grad_nd, tol));
        errs.push(compare_slices(grad_rev, fwd, tol));
    }
    let worst = errs.into_iter().flatten().reduce(f64::max);
    let Some(max_rel_err) = worst else {
        return AdOutcome {
            consistent: true,
            max_rel_err: 0.0,
            deviating_mode: None,
            forward_unavailable: grad_fwd.is_none(),
        };
    };
    let deviating = match grad_fwd {
        Some(fwd) if distance(fwd, grad_nd) > distance(grad_rev, grad_nd) => AdMode::Forward,
        _ => AdMode::Reverse,
    };
    AdOutcome {
        consistent: false,
        max_rel_err,
        deviating_mode: Some(deviating),
        forward_unavailable: grad_fwd.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> NumericArray {
        NumericArray::scalar(x)
    }

    #[test]
    fn identical_and_within_tolerance() {
        let t = Tolerances::default();
        let a = vec![NumericArray::vector(vec![
            1.0,
            2.0,
            f64::NAN,
            f64::INFINITY,
        ])];
        assert_eq!(adjudicate_diff(&a, &a, &t), DiffOutcome::Consistent);
        assert_eq!(
            adjudicate_diff(&[s(1.0)], &[s(1.0 + 1e-9)], &t),
            DiffOutcome::Consistent
        );
    }

    #[test]
    fn divergence_reports_magnitude() {
        let t = Tolerances::default();
        match adjudicate_diff(&[s(1.5)], &[s(1.0)], &t) {
            DiffOutcome::Inconsistent { max_rel_err } => assert!((max_rel_err - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            adjudicate_diff(&[s(f64::INFINITY)], &[s(f64::NEG_INFINITY)], &t),
            DiffOutcome::Inconsistent { .. }
        ));
        assert!(matches!(
            adjudicate_diff(&[s(f64::NAN)], &[s(0.0)], &t),
            DiffOutcome::Inconsistent { .. }
        ));
    }

    #[test]
    fn shape_mismatch_is_a_finding() {
        let t = Tolerances::default();
        let a = NumericArray {
            shape: vec![2, 1],
            data: vec![1.0, 2.0],
        };
        let b = NumericArray::vector(vec![1.0, 2.0]);
        assert_eq!(
            adjudicate_diff(&[a], std::slice::from_ref(&b), &t),
            DiffOutcome::Inconsistent {
                max_rel_err: f64::INFINITY
            }
        );
        assert!(matches!(
            adjudicate_diff(&[], &[b], &t),
            DiffOutcome::Inconsistent { .. }
        ));
    }

    #[test]
    fn ad_quadratic_agrees() {
        let t = Tolerances::default();
        let out = adjudicate_ad(&[6.0], Some(&[6.0]), &[6.0], &t);
        assert!(out.consistent);
        let out = adjudicate_ad(&[2.0], Some(&[2.0]), &[2.0000001], &t);
        assert!(out.consistent);
    }

    #[test]
    fn ad_blames_farther_mode() {
        let t = Tolerances::default();
        let out = adjudicate_ad(&[0.3], Some(&[-0.1]), &[-0.1], &t);
        assert!(!out.consistent);
        assert_eq!(out.deviating_mode, Some(AdMode::Reverse));
        let out = adjudicate_ad(&[1.0, 2.0], Some(&[1.0, 9.0]), &[1.0, 2.0], &t);
        assert_eq!(out.deviating_mode, Some(AdMode::Forward));
    }

    #[test]
    fn ad_without_forward_mode() {
        let t = Tolerances::default();
        let out = adjudicate_ad(&[1.0], None, &[1.0], &t);
        assert!(out.consistent && out.forward_unavailable);
        let out = adjudicate_ad(&[1.0], None, &[3.0], &t);
        assert!(!out.consistent && out.forward_unavailable);
        assert_eq!(out.deviating_mode, Some(AdMode::Reverse));
    }
}
