use crate::error::{CoreError, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(CoreError::Integration(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let whole = simpson(a, b, fa, fm, fb);
    let mut unmet = 0.0;
    let value = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut unmet);
    if !(value.is_finite() && unmet <= tol) {
        return Err(CoreError::Integration(format!(
            "no convergence on [{a}, {b}] at tolerance {tol}"
        )));
    }
    Ok(value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    unmet: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        // leaves that never met their share of the tolerance
        *unmet += delta.abs() / 15.0;
        return left + right;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, unmet)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, unmet)
}
