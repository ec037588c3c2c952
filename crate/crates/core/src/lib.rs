//! Discount profitability model for a kiosk with an interactive display.
//!
//! Visitors may use the display (probability `u`) and are then offered a
//! discount `d`, which raises their purchase intention `pi` through a linear
//! law. The crate computes the expected effect on buyers and margin in
//! closed form, simulates it by Monte Carlo over a parameter grid, solves for
//! the discounts that keep the margin above the no-display baseline, and
//! serializes everything to CSV/JSON.

pub mod analysis;
pub mod breakeven;
pub mod config;
pub mod engine;
pub mod error;
pub mod model;
pub mod report;
pub mod sampling;

pub use analysis::{
    aggregate, analytic_breakeven, empirical_breakeven, summary, AggregateCurve, Axis,
    BreakEvenCurve, BreakEvenMethod, Metric, MetricSource, Summary,
};
pub use breakeven::{breakeven, unclamped_quadratic_roots, Interval};
pub use config::{ConfigDocument, RunConfig};
pub use engine::{
    grid_cells, run_sweep, simulate_cell, simulate_customer, AxisRange, CellResult, ModelConfig,
    SweepGrid, SweepOutcome,
};
pub use error::{Error, Result};
pub use model::{
    analytic_metrics, clamp_threshold, effective_intention, expected_price, margin_fraction, pii,
    AnalyticMetrics, Category, CategoryCatalog, CellParams, DiscountLaw, IntentionUpdateRule,
    MarginAccounting, Model, Saturation,
};
pub use report::SweepRow;
pub use sampling::{derive_cell_seed, RandomStream};
