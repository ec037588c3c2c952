//! Behavioral laws of the kiosk model and their closed-form expectations.
//!
//! All relative metrics are normalized per display user: the baseline is the
//! expected full-price margin `pi * m` per unit list price, so the display
//! usage share `u` cancels out of every analytic quantity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear purchase-intention-increase law, `pii(d) = slope * d + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscountLaw {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for DiscountLaw {
    fn default() -> Self {
        DiscountLaw {
            slope: 8.52,
            intercept: -0.57,
        }
    }
}

impl DiscountLaw {
    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        let law = DiscountLaw { slope, intercept };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(Error::config("law.slope", "must be finite and > 0"));
        }
        if !self.intercept.is_finite() {
            return Err(Error::config("law.intercept", "must be finite"));
        }
        let root = self.root();
        if !(0.0..1.0).contains(&root) {
            return Err(Error::config(
                "law.intercept",
                format!("zero of the law -intercept/slope = {root} must lie in [0, 1)"),
            ));
        }
        Ok(())
    }

    /// Discount at which the law predicts no change in intention.
    pub fn root(&self) -> f64 {
        -self.intercept / self.slope
    }
}

/// How the intention increase composes with the initial intention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionUpdateRule {
    /// `pi * (1 + pii)`
    #[default]
    Multiplicative,
    /// `pi + pii`
    Additive,
}

impl IntentionUpdateRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntentionUpdateRule::Multiplicative => "multiplicative",
            IntentionUpdateRule::Additive => "additive",
        }
    }
}

impl fmt::Display for IntentionUpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IntentionUpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicative" => Ok(IntentionUpdateRule::Multiplicative),
            "additive" => Ok(IntentionUpdateRule::Additive),
            other => Err(Error::config(
                "rule",
                format!("unknown rule `{other}` (expected multiplicative|additive)"),
            )),
        }
    }
}

/// Which display-user sales carry the discount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginAccounting {
    /// Every display user who buys pays the discounted price.
    #[default]
    DiscountAllDisplayBuyers,
    /// Display users who would have bought anyway pay full price; only the
    /// sales created by the intention increase are discounted.
    DiscountIncrementalOnly,
}

impl MarginAccounting {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarginAccounting::DiscountAllDisplayBuyers => "discount_all_display_buyers",
            MarginAccounting::DiscountIncrementalOnly => "discount_incremental_only",
        }
    }
}

impl fmt::Display for MarginAccounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MarginAccounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discount_all_display_buyers" => Ok(MarginAccounting::DiscountAllDisplayBuyers),
            "discount_incremental_only" => Ok(MarginAccounting::DiscountIncrementalOnly),
            other => Err(Error::config(
                "accounting",
                format!(
                    "unknown accounting `{other}` \
                     (expected discount_all_display_buyers|discount_incremental_only)"
                ),
            )),
        }
    }
}

/// A product category with its popularity weight and list-price distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub weight: f64,
    #[serde(rename = "mean")]
    pub price_mean: f64,
    #[serde(rename = "std")]
    pub price_std: f64,
}

impl Category {
    pub fn new(name: impl Into<String>, weight: f64, price_mean: f64, price_std: f64) -> Self {
        Category {
            name: name.into(),
            weight,
            price_mean,
            price_std,
        }
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let check = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    format!("catalog[{idx}].{field}"),
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        check("weight", self.weight)?;
        check("mean", self.price_mean)?;
        check("std", self.price_std)
    }

    /// Mean-to-std ratio below 2 makes the positive-truncation bias visible.
    pub fn truncation_warning(&self) -> Option<String> {
        let ratio = self.price_mean / self.price_std;
        (ratio < 2.0).then(|| {
            format!(
                "category `{}`: mean/std = {ratio:.3} < 2, truncated prices are biased upward",
                self.name
            )
        })
    }
}

/// Ordered set of categories; weights are normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryCatalog {
    categories: Vec<Category>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CategoryCatalog {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::config(
                "catalog",
                "at least one category is required",
            ));
        }
        for (i, c) in categories.iter().enumerate() {
            c.validate(i)?;
        }
        let total: f64 = categories.iter().map(|c| c.weight).sum();
        let probabilities: Vec<f64> = categories.iter().map(|c| c.weight / total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Pin the last edge so a uniform draw in [0, 1) always lands somewhere.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(CategoryCatalog {
            categories,
            probabilities,
            cumulative,
        })
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Normalized selection probabilities, summing to 1.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub(crate) fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn warnings(&self) -> Vec<String> {
        self.categories
            .iter()
            .filter_map(Category::truncation_warning)
            .collect()
    }
}

impl Default for CategoryCatalog {
    /// The six kiosk categories with equal popularity. The equal weights are
    /// a placeholder: category shares are an input, not a known quantity.
    fn default() -> Self {
        CategoryCatalog::new(vec![
            Category::new("cases and protectors", 1.0, 29.0, 8.0),
            Category::new("GSM accessories", 1.0, 35.0, 8.0),
            Category::new("smartphones and tablets", 1.0, 700.0, 200.0),
            Category::new("hobby & sport", 1.0, 45.0, 10.0),
            Category::new("moto accessories", 1.0, 80.0, 21.0),
            Category::new("electronics", 1.0, 50.0, 13.0),
        ])
        .expect("default catalog is valid")
    }
}

/// One grid point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Probability that a visitor uses the interactive display.
    pub u: f64,
    /// Initial purchase intention.
    pub pi: f64,
    /// Discount fraction offered to display users.
    pub d: f64,
    /// Margin (overhead) fraction of the list price.
    pub m: f64,
}

impl CellParams {
    pub fn new(u: f64, pi: f64, d: f64, m: f64) -> Result<Self> {
        let cell = CellParams { u, pi, d, m };
        cell.validate()?;
        Ok(cell)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.u) {
            return Err(Error::domain("u", self.u, "[0, 1]"));
        }
        if !(self.pi > 0.0 && self.pi <= 1.0) {
            return Err(Error::domain("pi", self.pi, "(0, 1]"));
        }
        check_discount(self.d)?;
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::domain("m", self.m, "(0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMetrics {
    pub pii: f64,
    pub pi_eff: f64,
    pub r_customers: f64,
    pub r_margin: f64,
    pub clamp_active: bool,
}

/// Where the effective intention first reaches 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Saturation {
    At(f64),
    /// The threshold lies beyond the largest discount considered; carries the
    /// value the formula produced.
    NeverInDomain(f64),
}

fn check_discount(d: f64) -> Result<()> {
    if (0.0..1.0).contains(&d) {
        Ok(())
    } else {
        Err(Error::domain("d", d, "[0, 1)"))
    }
}

fn check_intention(pi: f64) -> Result<()> {
    if pi > 0.0 && pi <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("pi", pi, "(0, 1]"))
    }
}

/// Intention increase predicted by the law. Negative below the law's root.
pub fn pii(law: &DiscountLaw, d: f64) -> Result<f64> {
    check_discount(d)?;
    Ok(law.slope * d + law.intercept)
}

/// Composition before clamping; callers have already checked the domain.
fn raw_intention(rule: IntentionUpdateRule, pi: f64, increase: f64) -> f64 {
    match rule {
        IntentionUpdateRule::Multiplicative => pi * (1.0 + increase),
        IntentionUpdateRule::Additive => pi + increase,
    }
}

pub fn effective_intention(
    rule: IntentionUpdateRule,
    law: &DiscountLaw,
    pi: f64,
    d: f64,
) -> Result<f64> {
    check_intention(pi)?;
    let increase = pii(law, d)?;
    Ok(raw_intention(rule, pi, increase).clamp(0.0, 1.0))
}

/// Smallest discount at which the effective intention saturates at 1.
pub fn clamp_threshold(
    rule: IntentionUpdateRule,
    law: &DiscountLaw,
    pi: f64,
    d_max: f64,
) -> Result<Saturation> {
    check_intention(pi)?;
    let needed = match rule {
        IntentionUpdateRule::Multiplicative => 1.0 / pi - 1.0,
        IntentionUpdateRule::Additive => 1.0 - pi,
    };
    let d = ((needed - law.intercept) / law.slope).max(0.0);
    Ok(if d > d_max {
        Saturation::NeverInDomain(d)
    } else {
        Saturation::At(d)
    })
}

/// Expected margin per display user per unit list price.
///
/// A discounted sale yields `m - d` of the list price, which is negative when
/// the discount exceeds the margin.
pub fn margin_fraction(accounting: MarginAccounting, pi: f64, pi_eff: f64, m: f64, d: f64) -> f64 {
    match accounting {
        MarginAccounting::DiscountAllDisplayBuyers => pi_eff * (m - d),
        MarginAccounting::DiscountIncrementalOnly => pi * m + (pi_eff - pi) * (m - d),
    }
}

/// The behavioral configuration shared by every cell of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Model {
    pub law: DiscountLaw,
    pub rule: IntentionUpdateRule,
    pub accounting: MarginAccounting,
}

impl Model {
    pub fn new(law: DiscountLaw, rule: IntentionUpdateRule, accounting: MarginAccounting) -> Self {
        Model {
            law,
            rule,
            accounting,
        }
    }

    pub fn effective_intention(&self, pi: f64, d: f64) -> Result<f64> {
        effective_intention(self.rule, &self.law, pi, d)
    }

    pub fn metrics(&self, cell: &CellParams) -> Result<AnalyticMetrics> {
        analytic_metrics(&self.law, self.rule, self.accounting, cell)
    }

    /// `r_margin` for an intention/margin pair, skipping the `u` check.
    pub fn r_margin(&self, pi: f64, d: f64, m: f64) -> Result<f64> {
        let pi_eff = self.effective_intention(pi, d)?;
        Ok(margin_fraction(self.accounting, pi, pi_eff, m, d) / (pi * m))
    }
}

/// Closed-form per-display-user metrics. `cell.u` is validated but unused.
pub fn analytic_metrics(
    law: &DiscountLaw,
    rule: IntentionUpdateRule,
    accounting: MarginAccounting,
    cell: &CellParams,
) -> Result<AnalyticMetrics> {
    cell.validate()?;
    let increase = pii(law, cell.d)?;
    let raw = raw_intention(rule, cell.pi, increase);
    let pi_eff = raw.clamp(0.0, 1.0);
    Ok(AnalyticMetrics {
        pii: increase,
        pi_eff,
        r_customers: pi_eff / cell.pi,
        r_margin: margin_fraction(accounting, cell.pi, pi_eff, cell.m, cell.d) / (cell.pi * cell.m),
        clamp_active: raw > 1.0,
    })
}

/// Weighted mean list price. Ignores the small upward bias from rejecting
/// non-positive draws.
pub fn expected_price(catalog: &CategoryCatalog) -> f64 {
    catalog
        .categories()
        .iter()
        .zip(catalog.probabilities())
        .map(|(c, p)| p * c.price_mean)
        .sum()
}
