//! Central finite-difference gradient checking.
//!
//! The checker re-evaluates a scalar function as a pure function of a flat
//! parameter vector, so it is independent of the tape's backward path and
//! serves as the numerical oracle for every differentiable operation.

/// Default step for central differences at f64 precision.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error with a small absolute floor so near-zero pairs compare
/// sanely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite-difference gradient of `f` at `x`, restricted to `coords`
/// (all coordinates when `coords` is `None`).
pub fn central_diff(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    step: f64,
    coords: Option<&[usize]>,
) -> Vec<(usize, f64)> {
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut out = Vec::with_capacity(coords.len());
    let mut probe = x.to_vec();
    for &i in coords {
        let orig = probe[i];
        probe[i] = orig + step;
        let fp = f(&probe);
        probe[i] = orig - step;
        let fm = f(&probe);
        probe[i] = orig;
        out.push((i, (fp - fm) / (2.0 * step)));
    }
    out
}

/// Compare an analytic gradient against central differences on the given
/// coordinates. Returns the worst relative error observed.
///
/// Panics with a descriptive message when any coordinate exceeds `tol`.
pub fn assert_gradients_match(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    tol: f64,
    coords: Option<&[usize]>,
    label: &str,
) -> f64 {
    let numeric = central_diff(f, x, DEFAULT_STEP, coords);
    let mut worst = 0.0f64;
    for (i, fd) in numeric {
        let err = relative_error(analytic[i], fd);
        if err > worst {
            worst = err;
        }
        assert!(
            err < tol,
            "{label}: gradient mismatch at coord {i}: analytic {} vs finite-diff {fd} (rel err {err:.3e})",
            analytic[i]
        );
    }
    worst
}
