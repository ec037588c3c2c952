//! Profit intervals: the discounts for which the display scenario earns more
//! margin per display user than the no-display baseline (`r_margin > 1`).
//!
//! The solver is numeric so every rule/accounting variant works without its
//! own algebra. `r_margin` is piecewise smooth with at most one kink, at the
//! clamp threshold; sign changes of `r_margin - 1` are bracketed on a fine
//! scan that also includes the kink, then refined by bisection. Local maxima
//! of the scan that stay below break-even are refined by golden-section
//! search, so intervals narrower than the scan step are not missed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{clamp_threshold, Model, Saturation};

const SCAN_STEP: f64 = 1e-3;
const BISECT_WIDTH: f64 = 1e-14;
const BISECT_MAX_ITER: u32 = 200;

/// Open interval of discounts `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// All maximal sub-intervals of `[d_lo, d_hi]` where `r_margin(d) > 1`.
///
/// Interior endpoints are roots of `r_margin - 1`; an endpoint equal to the
/// domain boundary means the interval is cut off by the domain.
pub fn breakeven(model: &Model, m: f64, pi: f64, d_lo: f64, d_hi: f64) -> Result<Vec<Interval>> {
    if !(0.0..1.0).contains(&d_lo) {
        return Err(Error::domain("d_lo", d_lo, "[0, 1)"));
    }
    if !(0.0..1.0).contains(&d_hi) || d_hi <= d_lo {
        return Err(Error::domain("d_hi", d_hi, "(d_lo, 1)"));
    }
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::domain("m", m, "(0, 1]"));
    }
    model.r_margin(pi, d_lo, m)?;

    let excess = |d: f64| model.r_margin(pi, d, m).map(|r| r - 1.0);

    let n = ((d_hi - d_lo) / SCAN_STEP).ceil().max(1.0) as usize;
    let mut points: Vec<f64> = (0..=n)
        .map(|k| d_lo + (d_hi - d_lo) * k as f64 / n as f64)
        .collect();
    if let Saturation::At(t) = clamp_threshold(model.rule, &model.law, pi, d_hi)? {
        if t > d_lo && t < d_hi {
            points.push(t);
        }
    }
    if m > d_lo && m < d_hi {
        points.push(m);
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    // A profit interval narrower than the scan step shows up as a local
    // maximum below zero; refine each such peak and keep its top as a point.
    let values = points
        .iter()
        .map(|&d| excess(d))
        .collect::<Result<Vec<_>>>()?;
    let mut peaks = Vec::new();
    for k in 1..points.len().saturating_sub(1) {
        let (l, c, r) = (values[k - 1], values[k], values[k + 1]);
        if c <= 0.0 && c >= l && c >= r {
            let top = golden_max(&excess, points[k - 1], points[k + 1])?;
            if excess(top)? > 0.0 {
                peaks.push(top);
            }
        }
    }
    if !peaks.is_empty() {
        points.extend(peaks);
        points.sort_by(f64::total_cmp);
        points.dedup();
    }

    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    let mut prev_d = points[0];
    let mut prev_pos = excess(prev_d)? > 0.0;
    if prev_pos {
        open = Some(prev_d);
    }
    for &d in &points[1..] {
        let pos = excess(d)? > 0.0;
        if pos != prev_pos {
            let root = bisect(&excess, prev_d, d, prev_pos)?;
            if pos {
                open = Some(root);
            } else if let Some(lo) = open.take() {
                intervals.push(Interval { lo, hi: root });
            }
        }
        prev_d = d;
        prev_pos = pos;
    }
    if let Some(lo) = open {
        intervals.push(Interval { lo, hi: d_hi });
    }
    Ok(intervals)
}

/// Location of the maximum of a unimodal `f` on `[a, b]`.
fn golden_max<F>(f: &F, mut a: f64, mut b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..BISECT_MAX_ITER {
        if b - a <= BISECT_WIDTH {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Root of `f` in `[a, b]` given the sign indicator at `a`.
fn bisect<F>(f: &F, mut a: f64, mut b: f64, a_pos: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    for _ in 0..BISECT_MAX_ITER {
        if b - a <= BISECT_WIDTH {
            break;
        }
        let mid = 0.5 * (a + b);
        if (f(mid)? > 0.0) == a_pos {
            a = mid;
        } else {
            b = mid;
        }
    }
    // Report the bracket end with the smaller residual.
    Ok(if f(a)?.abs() <= f(b)?.abs() { a } else { b })
}

/// Real roots of the unclamped break-even quadratic for the multiplicative
/// rule with every display buyer discounted:
/// `slope d^2 - (slope m - (1 + intercept)) d - intercept m = 0`.
///
/// Returns the roots in ascending order, or `None` when the discriminant is
/// negative. Valid only where `pi * (1 + pii(d)) <= 1`.
pub fn unclamped_quadratic_roots(model: &Model, m: f64) -> Option<(f64, f64)> {
    let a = model.law.slope;
    let b = -(model.law.slope * m - (1.0 + model.law.intercept));
    let c = -model.law.intercept * m;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}
