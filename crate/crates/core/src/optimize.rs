//! One-dimensional maximization of unimodal (concave) functions by bracket
//! expansion followed by golden-section search.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Extremum {
    pub arg: f64,
    pub value: f64,
    pub at_lower: bool,
    pub at_upper: bool,
}

/// Maximizes `f` over `[lower, upper]` starting from `start`.
///
/// `f` may return `-inf` on a contiguous tail of the interval (outside the
/// domain of a cgf, for instance). Either bound may be infinite as long as
/// the function turns down before reaching it.
pub(crate) fn maximize_unimodal<F>(mut f: F, start: f64, lower: f64, upper: f64, tol: f64) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    debug_assert!(lower <= start && start <= upper);
    let width = upper - lower;
    let f0 = f(start)?;
    if width <= tol {
        return Ok(finish(start, f0, lower, upper, tol));
    }
    let step0 = if width.is_finite() { (width / 8.0).min(1.0) } else { 1.0 };

    let right = (start + step0).min(upper);
    let f_right = if right > start { f(right)? } else { f64::NEG_INFINITY };

    let (mut a, mut m, mut fm, dir) = if f_right > f0 {
        (start, right, f_right, 1.0)
    } else {
        let left = (start - step0).max(lower);
        let f_left = if left < start { f(left)? } else { f64::NEG_INFINITY };
        if f_left > f0 {
            (start, left, f_left, -1.0)
        } else {
            return golden(&mut f, left, right, (start, f0), lower, upper, tol);
        }
    };

    let mut step = step0;
    let (lo, hi) = loop {
        step *= 2.0;
        let next = if dir > 0.0 { (m + step).min(upper) } else { (m - step).max(lower) };
        if next == m {
            break order(a, m);
        }
        let fnext = f(next)?;
        if fnext <= fm {
            break order(a, next);
        }
        a = m;
        m = next;
        fm = fnext;
    };
    golden(&mut f, lo, hi, (m, fm), lower, upper, tol)
}

fn order(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn golden<F>(
    f: &mut F,
    mut a: f64,
    mut b: f64,
    mut best: (f64, f64),
    lower: f64,
    upper: f64,
    tol: f64,
) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    for x in [a, b] {
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while b - a > tol && iterations < 500 {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(finish(best.0, best.1, lower, upper, tol))
}

fn finish(arg: f64, value: f64, lower: f64, upper: f64, tol: f64) -> Extremum {
    Extremum { arg, value, at_lower: arg - lower <= 10.0 * tol, at_upper: upper - arg <= 10.0 * tol }
}
