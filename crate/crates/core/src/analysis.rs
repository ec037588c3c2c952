//! Views over sweep rows: averaged curves, profit frontiers and run summary.

use std::collections::HashMap;

use serde::Serialize;

use crate::breakeven::{breakeven, Interval};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::report::SweepRow;

/// Margins are matched with this tolerance so `0.3` typed on a command line
/// finds rows written from `0.3` in a config.
const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RMargin,
    RCustomers,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::RMargin => "r_margin",
            Metric::RCustomers => "r_customers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Retain the discount axis, average over intentions.
    ByDiscount,
    /// Retain the intention axis, average over discounts.
    ByIntention,
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::ByDiscount => "by_discount",
            Axis::ByIntention => "by_intention",
        }
    }

    /// Column header of the retained axis.
    pub fn column(&self) -> &'static str {
        match self {
            Axis::ByDiscount => "d",
            Axis::ByIntention => "pi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    #[default]
    Analytic,
    MonteCarlo,
}

impl MetricSource {
    fn value(&self, metric: Metric, row: &SweepRow) -> Option<f64> {
        match (self, metric) {
            (MetricSource::Analytic, Metric::RMargin) => Some(row.r_margin_analytic),
            (MetricSource::Analytic, Metric::RCustomers) => Some(row.r_customers_analytic),
            (MetricSource::MonteCarlo, Metric::RMargin) => row.r_margin_mc,
            (MetricSource::MonteCarlo, Metric::RCustomers) => row.r_customers_mc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCurve {
    pub axis: Axis,
    pub margin: f64,
    pub metric: Metric,
    pub source: MetricSource,
    /// `(axis value, mean metric)`, ascending in the axis value.
    pub points: Vec<(f64, f64)>,
}

/// Rows of one margin arranged on their `(u, pi, d)` lattice.
struct MarginSlice<'a> {
    us: Vec<f64>,
    pis: Vec<f64>,
    ds: Vec<f64>,
    cells: HashMap<(u64, u64, u64), &'a SweepRow>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl<'a> MarginSlice<'a> {
    fn new(rows: &'a [SweepRow], margin: f64) -> Result<Self> {
        let selected: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| (r.cell.m - margin).abs() <= MARGIN_TOL)
            .collect();
        if selected.is_empty() {
            return Err(Error::IncompleteGrid {
                margin,
                missing: vec![format!("no cells with m={margin}")],
            });
        }
        let us = sorted_unique(selected.iter().map(|r| r.cell.u).collect());
        let pis = sorted_unique(selected.iter().map(|r| r.cell.pi).collect());
        let ds = sorted_unique(selected.iter().map(|r| r.cell.d).collect());
        let cells: HashMap<_, _> = selected
            .iter()
            .map(|r| {
                (
                    (r.cell.u.to_bits(), r.cell.pi.to_bits(), r.cell.d.to_bits()),
                    *r,
                )
            })
            .collect();

        let mut missing = Vec::new();
        for &u in &us {
            for &pi in &pis {
                for &d in &ds {
                    if !cells.contains_key(&(u.to_bits(), pi.to_bits(), d.to_bits())) {
                        missing.push(format!("u={u},pi={pi},d={d}"));
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::IncompleteGrid { margin, missing });
        }
        Ok(MarginSlice { us, pis, ds, cells })
    }

    fn row(&self, u: f64, pi: f64, d: f64) -> &'a SweepRow {
        self.cells[&(u.to_bits(), pi.to_bits(), d.to_bits())]
    }

    /// Metric at `(pi, d)`, averaged over `u` (a no-op for analytic values).
    fn mean_over_u(&self, source: MetricSource, metric: Metric, pi: f64, d: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .us
            .iter()
            .filter_map(|&u| source.value(metric, self.row(u, pi, d)))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Average a metric over one axis of a margin's grid.
///
/// Monte Carlo values skip cells where the estimate is missing; a retained
/// point with no estimate at all is an error.
pub fn aggregate(
    rows: &[SweepRow],
    metric: Metric,
    axis: Axis,
    margin: f64,
    source: MetricSource,
) -> Result<AggregateCurve> {
    let slice = MarginSlice::new(rows, margin)?;
    let (kept, averaged) = match axis {
        Axis::ByDiscount => (&slice.ds, &slice.pis),
        Axis::ByIntention => (&slice.pis, &slice.ds),
    };
    let mut points = Vec::with_capacity(kept.len());
    for &k in kept {
        let vals: Vec<f64> = averaged
            .iter()
            .filter_map(|&a| {
                let (pi, d) = match axis {
                    Axis::ByDiscount => (a, k),
                    Axis::ByIntention => (k, a),
                };
                slice.mean_over_u(source, metric, pi, d)
            })
            .collect();
        if vals.is_empty() {
            return Err(Error::IncompleteGrid {
                margin,
                missing: vec![format!(
                    "no {} estimate at {}={k}",
                    metric.as_str(),
                    axis.column()
                )],
            });
        }
        points.push((k, vals.iter().sum::<f64>() / vals.len() as f64));
    }
    Ok(AggregateCurve {
        axis,
        margin,
        metric,
        source,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakEvenMethod {
    /// Bisection on the closed-form margin ratio.
    Analytic,
    /// Linear interpolation between sweep grid points.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakEvenPoint {
    pub pi: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakEvenCurve {
    pub margin: f64,
    pub method: BreakEvenMethod,
    pub points: Vec<BreakEvenPoint>,
}

pub fn analytic_breakeven(
    model: &Model,
    margin: f64,
    pis: &[f64],
    d_lo: f64,
    d_hi: f64,
) -> Result<BreakEvenCurve> {
    let points = pis
        .iter()
        .map(|&pi| {
            Ok(BreakEvenPoint {
                pi,
                intervals: breakeven(model, margin, pi, d_lo, d_hi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BreakEvenCurve {
        margin,
        method: BreakEvenMethod::Analytic,
        points,
    })
}

/// Profit intervals read off the discount grid: runs of `r_margin > 1`,
/// with crossings placed by linear interpolation between neighbors.
/// Accurate to one grid step.
pub fn empirical_breakeven(
    rows: &[SweepRow],
    margin: f64,
    source: MetricSource,
) -> Result<BreakEvenCurve> {
    let slice = MarginSlice::new(rows, margin)?;
    let mut points = Vec::with_capacity(slice.pis.len());
    for &pi in &slice.pis {
        let series: Vec<(f64, f64)> = slice
            .ds
            .iter()
            .filter_map(|&d| {
                slice
                    .mean_over_u(source, Metric::RMargin, pi, d)
                    .map(|r| (d, r - 1.0))
            })
            .collect();
        points.push(BreakEvenPoint {
            pi,
            intervals: positive_runs(&series),
        });
    }
    Ok(BreakEvenCurve {
        margin,
        method: BreakEvenMethod::Empirical,
        points,
    })
}

fn positive_runs(series: &[(f64, f64)]) -> Vec<Interval> {
    let mut out = Vec::new();
    let Some(&(first_d, first_f)) = series.first() else {
        return out;
    };
    let mut open = (first_f > 0.0).then_some(first_d);
    for w in series.windows(2) {
        let ((d0, f0), (d1, f1)) = (w[0], w[1]);
        let (p0, p1) = (f0 > 0.0, f1 > 0.0);
        if p0 == p1 {
            continue;
        }
        let cross = d0 + (d1 - d0) * f0 / (f0 - f1);
        if p1 {
            open = Some(cross);
        } else if let Some(lo) = open.take() {
            out.push(Interval { lo, hi: cross });
        }
    }
    if let (Some(lo), Some(&(last_d, _))) = (open, series.last()) {
        out.push(Interval { lo, hi: last_d });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    pub cell_index: u64,
    pub u: f64,
    pub pi: f64,
    pub d: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Range {
    pub min: Extremum,
    pub max: Extremum,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Totals {
    pub customers: u64,
    pub display_users: u64,
    pub buyers_baseline: u64,
    pub buyers_display_scenario: u64,
    pub margin_sum_baseline: f64,
    pub margin_sum_display_scenario: f64,
    pub turnover_baseline: f64,
    pub turnover_display_scenario: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cells: usize,
    pub r_customers_analytic: Range,
    pub r_margin_analytic: Range,
    /// `None` when no cell has a Monte Carlo estimate.
    pub r_customers_mc: Option<Range>,
    pub r_margin_mc: Option<Range>,
    pub totals: Totals,
}

fn range_of<F>(rows: &[&SweepRow], value: F) -> Option<Range>
where
    F: Fn(&SweepRow) -> Option<f64>,
{
    let extremum = |r: &SweepRow, v: f64| Extremum {
        value: v,
        cell_index: r.cell_index,
        u: r.cell.u,
        pi: r.cell.pi,
        d: r.cell.d,
        m: r.cell.m,
    };
    let mut range: Option<Range> = None;
    for r in rows {
        let Some(v) = value(r) else { continue };
        match &mut range {
            None => {
                range = Some(Range {
                    min: extremum(r, v),
                    max: extremum(r, v),
                })
            }
            Some(rg) => {
                // strict comparisons keep the lowest cell_index on ties
                if v < rg.min.value {
                    rg.min = extremum(r, v);
                }
                if v > rg.max.value {
                    rg.max = extremum(r, v);
                }
            }
        }
    }
    range
}

pub fn summary(rows: &[SweepRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.cell_index);

    let mut totals = Totals::default();
    for r in &sorted {
        totals.customers += r.customers;
        totals.display_users += r.display_users;
        totals.buyers_baseline += r.buyers_baseline;
        totals.buyers_display_scenario += r.buyers_display_scenario;
        totals.margin_sum_baseline += r.margin_sum_baseline;
        totals.margin_sum_display_scenario += r.margin_sum_display_scenario;
        totals.turnover_baseline += r.turnover_baseline;
        totals.turnover_display_scenario += r.turnover_display_scenario;
    }

    Ok(Summary {
        cells: rows.len(),
        r_customers_analytic: range_of(&sorted, |r| Some(r.r_customers_analytic))
            .expect("non-empty"),
        r_margin_analytic: range_of(&sorted, |r| Some(r.r_margin_analytic)).expect("non-empty"),
        r_customers_mc: range_of(&sorted, |r| r.r_customers_mc),
        r_margin_mc: range_of(&sorted, |r| r.r_margin_mc),
        totals,
    })
}
