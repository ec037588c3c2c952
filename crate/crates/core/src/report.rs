//! CSV serialization of sweep rows, break-even curves and aggregate curves.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so parsing
//! a written field gives back the identical `f64`. Missing values are empty
//! fields. Lines end in `\n`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::analysis::{AggregateCurve, BreakEvenCurve};
use crate::engine::CellResult;
use crate::error::{Error, Result};
use crate::model::CellParams;

pub const SWEEP_COLUMNS: [&str; 23] = [
    "cell_index",
    "u",
    "pi",
    "d",
    "m",
    "customers",
    "display_users",
    "buyers_baseline",
    "buyers_display_scenario",
    "buyers_among_display_users",
    "counterfactual_buyers_among_display_users",
    "margin_sum_baseline",
    "margin_sum_display_scenario",
    "turnover_baseline",
    "turnover_display_scenario",
    "r_customers_mc",
    "r_margin_mc",
    "pii",
    "pi_eff",
    "r_customers_analytic",
    "r_margin_analytic",
    "clamp_active",
    "seed",
];

pub const BREAKEVEN_COLUMNS: [&str; 4] = ["margin", "pi", "interval_lo", "interval_hi"];

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell_index: u64,
    pub cell: CellParams,
    pub customers: u64,
    pub display_users: u64,
    pub buyers_baseline: u64,
    pub buyers_display_scenario: u64,
    pub buyers_among_display_users: u64,
    pub counterfactual_buyers_among_display_users: u64,
    pub margin_sum_baseline: f64,
    pub margin_sum_display_scenario: f64,
    pub turnover_baseline: f64,
    pub turnover_display_scenario: f64,
    pub r_customers_mc: Option<f64>,
    pub r_margin_mc: Option<f64>,
    pub pii: f64,
    pub pi_eff: f64,
    pub r_customers_analytic: f64,
    pub r_margin_analytic: f64,
    pub clamp_active: bool,
    pub seed: u64,
}

impl From<&CellResult> for SweepRow {
    fn from(r: &CellResult) -> Self {
        SweepRow {
            cell_index: r.cell_index,
            cell: r.cell,
            customers: r.customers,
            display_users: r.display_users,
            buyers_baseline: r.buyers_baseline,
            buyers_display_scenario: r.buyers_display_scenario,
            buyers_among_display_users: r.buyers_among_display_users,
            counterfactual_buyers_among_display_users: r.counterfactual_buyers_among_display_users,
            margin_sum_baseline: r.margin_sum_baseline,
            margin_sum_display_scenario: r.margin_sum_display_scenario,
            turnover_baseline: r.turnover_baseline,
            turnover_display_scenario: r.turnover_display_scenario,
            r_customers_mc: r.r_customers_mc,
            r_margin_mc: r.r_margin_mc,
            pii: r.analytic.pii,
            pi_eff: r.analytic.pi_eff,
            r_customers_analytic: r.analytic.r_customers,
            r_margin_analytic: r.analytic.r_margin,
            clamp_active: r.analytic.clamp_active,
            seed: r.seed,
        }
    }
}

impl SweepRow {
    fn fields(&self) -> [String; 23] {
        [
            self.cell_index.to_string(),
            fmt_f64(self.cell.u),
            fmt_f64(self.cell.pi),
            fmt_f64(self.cell.d),
            fmt_f64(self.cell.m),
            self.customers.to_string(),
            self.display_users.to_string(),
            self.buyers_baseline.to_string(),
            self.buyers_display_scenario.to_string(),
            self.buyers_among_display_users.to_string(),
            self.counterfactual_buyers_among_display_users.to_string(),
            fmt_f64(self.margin_sum_baseline),
            fmt_f64(self.margin_sum_display_scenario),
            fmt_f64(self.turnover_baseline),
            fmt_f64(self.turnover_display_scenario),
            fmt_opt(self.r_customers_mc),
            fmt_opt(self.r_margin_mc),
            fmt_f64(self.pii),
            fmt_f64(self.pi_eff),
            fmt_f64(self.r_customers_analytic),
            fmt_f64(self.r_margin_analytic),
            self.clamp_active.to_string(),
            self.seed.to_string(),
        ]
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Write the header and one row per result, in the order given.
pub fn write_sweep_csv<'a, W, I>(out: W, results: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a CellResult>,
{
    let mut w = writer(out);
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for r in results {
        w.write_record(SweepRow::from(r).fields())
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv_bytes(results: &[CellResult]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, results)?;
    Ok(buf)
}

/// Parse a `sweep.csv`, checking the header and every field.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => {
            return Err(Error::Schema {
                line: 1,
                column: SWEEP_COLUMNS[0].into(),
                reason: "empty input, expected a header row".into(),
            })
        }
        Some(h) => h.map_err(|e| schema_from_csv(e, 1))?,
    };
    for (i, expected) in SWEEP_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *expected => {}
            got => {
                return Err(Error::Schema {
                    line: 1,
                    column: expected.to_string(),
                    reason: format!("header field {i} is {:?}", got.unwrap_or("<missing>")),
                })
            }
        }
    }
    if header.len() != SWEEP_COLUMNS.len() {
        return Err(Error::Schema {
            line: 1,
            column: header.get(SWEEP_COLUMNS.len()).unwrap_or("").to_string(),
            reason: format!(
                "expected {} columns, found {}",
                SWEEP_COLUMNS.len(),
                header.len()
            ),
        });
    }

    let mut rows = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| schema_from_csv(e, line))?;
        if rec.len() != SWEEP_COLUMNS.len() {
            return Err(Error::Schema {
                line,
                column: String::new(),
                reason: format!(
                    "expected {} fields, found {}",
                    SWEEP_COLUMNS.len(),
                    rec.len()
                ),
            });
        }
        let p = FieldParser { rec: &rec, line };
        rows.push(SweepRow {
            cell_index: p.int(0)?,
            cell: CellParams {
                u: p.float(1)?,
                pi: p.float(2)?,
                d: p.float(3)?,
                m: p.float(4)?,
            },
            customers: p.int(5)?,
            display_users: p.int(6)?,
            buyers_baseline: p.int(7)?,
            buyers_display_scenario: p.int(8)?,
            buyers_among_display_users: p.int(9)?,
            counterfactual_buyers_among_display_users: p.int(10)?,
            margin_sum_baseline: p.float(11)?,
            margin_sum_display_scenario: p.float(12)?,
            turnover_baseline: p.float(13)?,
            turnover_display_scenario: p.float(14)?,
            r_customers_mc: p.opt_float(15)?,
            r_margin_mc: p.opt_float(16)?,
            pii: p.float(17)?,
            pi_eff: p.float(18)?,
            r_customers_analytic: p.float(19)?,
            r_margin_analytic: p.float(20)?,
            clamp_active: p.boolean(21)?,
            seed: p.int(22)?,
        });
    }
    Ok(rows)
}

fn schema_from_csv(e: csv::Error, line: u64) -> Error {
    Error::Schema {
        line: e.position().map(|p| p.line()).unwrap_or(line),
        column: String::new(),
        reason: e.to_string(),
    }
}

struct FieldParser<'a> {
    rec: &'a csv::StringRecord,
    line: u64,
}

impl FieldParser<'_> {
    fn bad(&self, i: usize, what: &str) -> Error {
        Error::Schema {
            line: self.line,
            column: SWEEP_COLUMNS[i].to_string(),
            reason: format!("{:?} is not {what}", &self.rec[i]),
        }
    }

    fn int(&self, i: usize) -> Result<u64> {
        self.rec[i]
            .parse()
            .map_err(|_| self.bad(i, "an unsigned integer"))
    }

    fn float(&self, i: usize) -> Result<f64> {
        match self.rec[i].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.bad(i, "a finite number")),
        }
    }

    fn opt_float(&self, i: usize) -> Result<Option<f64>> {
        if self.rec[i].is_empty() {
            Ok(None)
        } else {
            self.float(i).map(Some)
        }
    }

    fn boolean(&self, i: usize) -> Result<bool> {
        match &self.rec[i] {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.bad(i, "true or false")),
        }
    }
}

/// One row per profit interval; an empty set becomes a row with empty bounds.
pub fn write_breakeven_csv<W: Write>(out: W, curves: &[BreakEvenCurve]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(BREAKEVEN_COLUMNS).map_err(csv_err)?;
    for curve in curves {
        for point in &curve.points {
            let (m, pi) = (fmt_f64(curve.margin), fmt_f64(point.pi));
            if point.intervals.is_empty() {
                w.write_record([m.as_str(), pi.as_str(), "", ""])
                    .map_err(csv_err)?;
            }
            for iv in &point.intervals {
                w.write_record([m.clone(), pi.clone(), fmt_f64(iv.lo), fmt_f64(iv.hi)])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Two columns: the retained axis (`d` or `pi`) and the mean metric.
pub fn write_aggregate_csv<W: Write>(out: W, curve: &AggregateCurve) -> Result<()> {
    let mut w = writer(out);
    w.write_record([curve.axis.column(), curve.metric.as_str()])
        .map_err(csv_err)?;
    for (x, y) in &curve.points {
        w.write_record([fmt_f64(*x), fmt_f64(*y)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Deterministic file name, e.g. `r_margin_by_discount_m0.3.csv`; the
/// Monte Carlo variant gets an `_mc` suffix.
pub fn aggregate_file_name(curve: &AggregateCurve) -> String {
    let suffix = match curve.source {
        crate::analysis::MetricSource::Analytic => "",
        crate::analysis::MetricSource::MonteCarlo => "_mc",
    };
    format!(
        "{}_{}_m{}{}.csv",
        curve.metric.as_str(),
        curve.axis.as_str(),
        fmt_f64(curve.margin),
        suffix
    )
}
