//! Adaptive Simpson integration for smooth integrands.

use crate::error::{Error, Result};

/// Hard cap on the number of interval subdivisions per integral.
pub const MAX_SUBDIVISIONS: usize = 1 << 20;

struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `budget` counts remaining subdivisions and is shared across calls so a
/// piecewise integral stays under one cap.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, budget: &mut usize) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numeric(format!("non-finite integration bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let mut stack = vec![Segment {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    while let Some(s) = stack.pop() {
        let m = 0.5 * (s.a + s.b);
        let lm = 0.5 * (s.a + m);
        let rm = 0.5 * (m + s.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(s.a, m, s.fa, flm, s.fm);
        let right = simpson(m, s.b, s.fm, frm, s.fb);
        let delta = left + right - s.whole;
        if delta.abs() <= 15.0 * s.tol || s.depth >= 50 {
            if s.depth >= 50 && delta.abs() > 15.0 * s.tol {
                return Err(Error::Numeric(format!(
                    "quadrature did not converge near [{}, {}] (error estimate {:.3e})",
                    s.a, s.b, delta.abs() / 15.0
                )));
            }
            total += left + right + delta / 15.0;
            continue;
        }
        if *budget == 0 {
            return Err(Error::Numeric(format!(
                "quadrature exceeded {MAX_SUBDIVISIONS} subdivisions near [{}, {}]",
                s.a, s.b
            )));
        }
        *budget -= 1;
        stack.push(Segment { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right, tol: 0.5 * s.tol, depth: s.depth + 1 });
        stack.push(Segment { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left, tol: 0.5 * s.tol, depth: s.depth + 1 });
    }
    Ok(total)
}
