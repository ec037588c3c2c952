//! Per-cell Monte Carlo and the parallel grid sweep.
//!
//! Every customer gets one uniform `q_buy` that decides the purchase in both
//! scenarios (common random numbers): they buy without the display iff
//! `q_buy < pi`, and a display user buys with the discount offer iff
//! `q_buy < pi_eff`. Category and price are drawn once and shared too, so the
//! scenarios differ only through the discount.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AnalyticMetrics, CategoryCatalog, CellParams, DiscountLaw, IntentionUpdateRule,
    MarginAccounting, Model,
};
use crate::sampling::{derive_cell_seed, RandomStream};

/// Inclusive arithmetic range `start, start + step, ...`; the last point is
/// kept if it lies within half a step of `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisRange {
    pub const fn new(start: f64, stop: f64, step: f64) -> Self {
        AxisRange { start, stop, step }
    }

    pub fn single(value: f64) -> Self {
        AxisRange::new(value, value, 1.0)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        for (name, v) in [
            ("start", self.start),
            ("stop", self.stop),
            ("step", self.step),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{field}.{name}"), "must be finite"));
            }
        }
        if self.step <= 0.0 {
            return Err(Error::config(
                format!("{field}.step"),
                format!("must be > 0, got {}", self.step),
            ));
        }
        if self.start > self.stop {
            return Err(Error::config(
                format!("{field}.start"),
                format!("start {} exceeds stop {}", self.start, self.stop),
            ));
        }
        Ok(())
    }

    /// Number of grid points; always at least one for a valid range.
    pub fn count(&self) -> usize {
        ((self.stop - self.start) / self.step + 0.5).floor() as usize + 1
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count())
            .map(|k| self.start + k as f64 * self.step)
            .collect()
    }
}

impl Default for AxisRange {
    fn default() -> Self {
        AxisRange::new(0.10, 0.70, 0.02)
    }
}

/// The full parameter grid; axes are enumerated `u`, `pi`, `d`, then margin
/// innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default)]
    pub u: AxisRange,
    #[serde(default)]
    pub pi: AxisRange,
    #[serde(default)]
    pub d: AxisRange,
    #[serde(default = "default_margins")]
    pub margins: Vec<f64>,
}

fn default_margins() -> Vec<f64> {
    vec![0.3, 0.4, 0.5]
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            u: AxisRange::default(),
            pi: AxisRange::default(),
            d: AxisRange::default(),
            margins: default_margins(),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.u.validate("grid.u")?;
        self.pi.validate("grid.pi")?;
        self.d.validate("grid.d")?;
        let check_points = |field: &str, pts: Vec<f64>, ok: fn(f64) -> bool, range: &str| match pts
            .into_iter()
            .find(|&v| !ok(v))
        {
            Some(v) => Err(Error::config(field, format!("point {v} outside {range}"))),
            None => Ok(()),
        };
        check_points(
            "grid.u",
            self.u.points(),
            |v| (0.0..=1.0).contains(&v),
            "[0, 1]",
        )?;
        check_points(
            "grid.pi",
            self.pi.points(),
            |v| v > 0.0 && v <= 1.0,
            "(0, 1]",
        )?;
        check_points(
            "grid.d",
            self.d.points(),
            |v| (0.0..1.0).contains(&v),
            "[0, 1)",
        )?;
        if self.margins.is_empty() {
            return Err(Error::config(
                "grid.margins",
                "at least one margin is required",
            ));
        }
        check_points(
            "grid.margins",
            self.margins.clone(),
            |v| v > 0.0 && v <= 1.0,
            "(0, 1]",
        )
    }

    pub fn cell_count(&self) -> usize {
        self.u.count() * self.pi.count() * self.d.count() * self.margins.len()
    }
}

/// Enumerate grid cells in pinned order (`u` outer, margin innermost).
pub fn grid_cells(grid: &SweepGrid) -> Vec<(u64, CellParams)> {
    let (us, pis, ds) = (grid.u.points(), grid.pi.points(), grid.d.points());
    let mut cells = Vec::with_capacity(grid.cell_count());
    for &u in &us {
        for &pi in &pis {
            for &d in &ds {
                for &m in &grid.margins {
                    let index = cells.len() as u64;
                    cells.push((index, CellParams { u, pi, d, m }));
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub law: DiscountLaw,
    pub rule: IntentionUpdateRule,
    pub accounting: MarginAccounting,
    pub catalog: CategoryCatalog,
    pub customers_per_cell: u64,
    pub master_seed: u64,
}

pub const DEFAULT_CUSTOMERS: u64 = 1000;
pub const DEFAULT_SEED: u64 = 42;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            law: DiscountLaw::default(),
            rule: IntentionUpdateRule::default(),
            accounting: MarginAccounting::default(),
            catalog: CategoryCatalog::default(),
            customers_per_cell: DEFAULT_CUSTOMERS,
            master_seed: DEFAULT_SEED,
        }
    }
}

impl ModelConfig {
    pub fn model(&self) -> Model {
        Model::new(self.law, self.rule, self.accounting)
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if self.customers_per_cell == 0 {
            return Err(Error::config("customers_per_cell", "must be >= 1"));
        }
        Ok(())
    }
}

/// What happened to one simulated visitor, in both scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CustomerRecord {
    pub uses_display: bool,
    pub category: usize,
    pub price: f64,
    pub q_buy: f64,
    pub bought_baseline: bool,
    pub bought_display_scenario: bool,
    /// Whether the display-scenario sale, if any, was at the discounted price.
    pub discounted: bool,
    pub margin_baseline: f64,
    pub margin_display_scenario: f64,
    pub turnover_baseline: f64,
    pub turnover_display_scenario: f64,
}

pub fn simulate_customer(
    stream: &mut RandomStream,
    cell: &CellParams,
    config: &ModelConfig,
) -> Result<CustomerRecord> {
    let pi_eff = config.model().effective_intention(cell.pi, cell.d)?;
    customer(stream, cell, pi_eff, config)
}

fn customer(
    stream: &mut RandomStream,
    cell: &CellParams,
    pi_eff: f64,
    config: &ModelConfig,
) -> Result<CustomerRecord> {
    let (uses_display, _) = stream.bernoulli(cell.u)?;
    let category = stream.sample_category(&config.catalog);
    let price = stream.sample_price(&config.catalog.categories()[category])?;
    let q_buy = stream.uniform();

    let would_buy = q_buy < cell.pi;
    let full_margin = price * cell.m;
    let (margin_baseline, turnover_baseline) = if would_buy {
        (full_margin, price)
    } else {
        (0.0, 0.0)
    };

    let (bought_display_scenario, discounted) = if uses_display {
        let buys = q_buy < pi_eff;
        let discounted = match config.accounting {
            MarginAccounting::DiscountAllDisplayBuyers => buys,
            MarginAccounting::DiscountIncrementalOnly => buys && !would_buy,
        };
        (buys, discounted)
    } else {
        (would_buy, false)
    };
    let (margin_display_scenario, turnover_display_scenario) = if discounted {
        (price * (cell.m - cell.d), price * (1.0 - cell.d))
    } else if bought_display_scenario {
        (full_margin, price)
    } else {
        (0.0, 0.0)
    };

    Ok(CustomerRecord {
        uses_display,
        category,
        price,
        q_buy,
        bought_baseline: would_buy,
        bought_display_scenario,
        discounted,
        margin_baseline,
        margin_display_scenario,
        turnover_baseline,
        turnover_display_scenario,
    })
}

/// Running sums for a ratio estimator `sum(a) / sum(b)` over display users.
#[derive(Debug, Clone, Copy, Default)]
struct RatioMoments {
    n: u64,
    a: f64,
    b: f64,
    aa: f64,
    ab: f64,
    bb: f64,
}

impl RatioMoments {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.ab += a * b;
        self.bb += b * b;
    }

    fn ratio(&self) -> Option<f64> {
        (self.b != 0.0).then(|| self.a / self.b)
    }

    /// Delta-method standard error of the ratio.
    fn std_error(&self) -> Option<f64> {
        let r = self.ratio()?;
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let resid = (self.aa - 2.0 * r * self.ab + r * r * self.bb).max(0.0);
        Some((resid * n / (n - 1.0)).sqrt() / self.b.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: CellParams,
    pub cell_index: u64,
    pub customers: u64,
    pub display_users: u64,
    pub buyers_baseline: u64,
    pub buyers_display_scenario: u64,
    pub buyers_among_display_users: u64,
    /// Display users who would have bought at intention `pi`.
    pub counterfactual_buyers_among_display_users: u64,
    pub margin_sum_baseline: f64,
    pub margin_sum_display_scenario: f64,
    pub turnover_baseline: f64,
    pub turnover_display_scenario: f64,
    /// Realized margin from display users in the display scenario.
    pub display_margin_sum: f64,
    /// Margin the same display users would have produced at full price and `pi`.
    pub counterfactual_display_margin_sum: f64,
    pub r_customers_mc: Option<f64>,
    pub r_margin_mc: Option<f64>,
    pub r_customers_se: Option<f64>,
    pub r_margin_se: Option<f64>,
    pub analytic: AnalyticMetrics,
    pub seed: u64,
}

pub fn simulate_cell(
    cell: &CellParams,
    config: &ModelConfig,
    cell_index: u64,
) -> Result<CellResult> {
    cell.validate()?;
    let analytic = config.model().metrics(cell)?;
    let seed = derive_cell_seed(config.master_seed, cell_index);
    let mut stream = RandomStream::new(seed);

    let mut res = CellResult {
        cell: *cell,
        cell_index,
        customers: config.customers_per_cell,
        display_users: 0,
        buyers_baseline: 0,
        buyers_display_scenario: 0,
        buyers_among_display_users: 0,
        counterfactual_buyers_among_display_users: 0,
        margin_sum_baseline: 0.0,
        margin_sum_display_scenario: 0.0,
        turnover_baseline: 0.0,
        turnover_display_scenario: 0.0,
        display_margin_sum: 0.0,
        counterfactual_display_margin_sum: 0.0,
        r_customers_mc: None,
        r_margin_mc: None,
        r_customers_se: None,
        r_margin_se: None,
        analytic,
        seed,
    };
    let mut buyers = RatioMoments::default();
    let mut margin = RatioMoments::default();

    for _ in 0..config.customers_per_cell {
        let c = customer(&mut stream, cell, analytic.pi_eff, config)?;
        res.buyers_baseline += c.bought_baseline as u64;
        res.buyers_display_scenario += c.bought_display_scenario as u64;
        res.margin_sum_baseline += c.margin_baseline;
        res.margin_sum_display_scenario += c.margin_display_scenario;
        res.turnover_baseline += c.turnover_baseline;
        res.turnover_display_scenario += c.turnover_display_scenario;
        if c.uses_display {
            res.display_users += 1;
            res.buyers_among_display_users += c.bought_display_scenario as u64;
            res.counterfactual_buyers_among_display_users += c.bought_baseline as u64;
            res.display_margin_sum += c.margin_display_scenario;
            res.counterfactual_display_margin_sum += c.margin_baseline;
            buyers.push(
                c.bought_display_scenario as u64 as f64,
                c.bought_baseline as u64 as f64,
            );
            margin.push(c.margin_display_scenario, c.margin_baseline);
        }
    }

    res.r_customers_mc = buyers.ratio();
    res.r_customers_se = buyers.std_error();
    res.r_margin_mc = margin.ratio();
    res.r_margin_se = margin.std_error();
    Ok(res)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell_index: u64,
    pub cell: CellParams,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    /// Successful cells, ordered by `cell_index`.
    pub results: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

/// Run every grid cell. Output depends only on `(grid, config)`; the
/// parallelism degree and scheduling only affect wall time.
///
/// `progress` is called with the number of finished cells.
pub fn run_sweep(
    grid: &SweepGrid,
    config: &ModelConfig,
    parallelism: Option<usize>,
    progress: Option<&(dyn Fn(usize) + Sync)>,
) -> Result<SweepOutcome> {
    grid.validate()?;
    config.validate()?;
    run_cells(grid_cells(grid), parallelism, progress, |index, cell| {
        simulate_cell(cell, config, index)
    })
}

fn run_cells<F>(
    cells: Vec<(u64, CellParams)>,
    parallelism: Option<usize>,
    progress: Option<&(dyn Fn(usize) + Sync)>,
    simulate: F,
) -> Result<SweepOutcome>
where
    F: Fn(u64, &CellParams) -> Result<CellResult> + Sync,
{
    let done = AtomicUsize::new(0);
    let run = || -> Vec<Result<CellResult>> {
        cells
            .par_iter()
            .map(|(index, cell)| {
                let r = simulate(*index, cell);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(report) = progress {
                    report(finished);
                }
                r
            })
            .collect()
    };

    let outputs = match parallelism {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Io(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut outcome = SweepOutcome::default();
    for ((cell_index, cell), r) in cells.into_iter().zip(outputs) {
        match r {
            Ok(res) => outcome.results.push(res),
            Err(error) => outcome.failures.push(CellFailure {
                cell_index,
                cell,
                error,
            }),
        }
    }
    Ok(outcome)
}
