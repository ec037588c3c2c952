//! JSON run configuration.
//!
//! ```json
//! {
//!   "law": {"slope": 8.52, "intercept": -0.57},
//!   "rule": "multiplicative",
//!   "accounting": "discount_all_display_buyers",
//!   "catalog": [{"name": "cases and protectors", "weight": 1, "mean": 29, "std": 8}],
//!   "grid": {
//!     "u":  {"start": 0.1, "stop": 0.7, "step": 0.02},
//!     "pi": {"start": 0.1, "stop": 0.7, "step": 0.02},
//!     "d":  {"start": 0.1, "stop": 0.7, "step": 0.02},
//!     "margins": [0.3, 0.4, 0.5]
//!   },
//!   "customers_per_cell": 1000,
//!   "master_seed": 42
//! }
//! ```
//!
//! Every key is optional; missing keys take the defaults shown above (the
//! catalog default is the six kiosk categories with equal weights).

use serde::{Deserialize, Serialize};

use crate::engine::{ModelConfig, SweepGrid, DEFAULT_CUSTOMERS, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::model::{Category, CategoryCatalog, DiscountLaw, IntentionUpdateRule, MarginAccounting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub law: DiscountLaw,
    #[serde(default)]
    pub rule: IntentionUpdateRule,
    #[serde(default)]
    pub accounting: MarginAccounting,
    #[serde(default = "default_catalog")]
    pub catalog: Vec<Category>,
    #[serde(default)]
    pub grid: SweepGrid,
    #[serde(default = "default_customers")]
    pub customers_per_cell: u64,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
}

fn default_catalog() -> Vec<Category> {
    CategoryCatalog::default().categories().to_vec()
}

fn default_customers() -> u64 {
    DEFAULT_CUSTOMERS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for ConfigDocument {
    fn default() -> Self {
        ConfigDocument {
            law: DiscountLaw::default(),
            rule: IntentionUpdateRule::default(),
            accounting: MarginAccounting::default(),
            catalog: default_catalog(),
            grid: SweepGrid::default(),
            customers_per_cell: DEFAULT_CUSTOMERS,
            master_seed: DEFAULT_SEED,
        }
    }
}

/// A validated configuration: the model plus the grid it is swept over.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: SweepGrid,
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "<document>".to_string()
            } else {
                path
            };
            Error::config(field, e.into_inner().to_string())
        })
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let model = ModelConfig {
            law: self.law,
            rule: self.rule,
            accounting: self.accounting,
            catalog: CategoryCatalog::new(self.catalog)?,
            customers_per_cell: self.customers_per_cell,
            master_seed: self.master_seed,
        };
        model.validate()?;
        self.grid.validate()?;
        Ok(RunConfig {
            model,
            grid: self.grid,
        })
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        ConfigDocument::from_json(text)?.resolve()
    }

    /// The configuration in file form; feeding it back reproduces the run.
    pub fn document(&self) -> ConfigDocument {
        ConfigDocument {
            law: self.model.law,
            rule: self.model.rule,
            accounting: self.model.accounting,
            catalog: self.model.catalog.categories().to_vec(),
            grid: self.grid.clone(),
            customers_per_cell: self.model.customers_per_cell,
            master_seed: self.model.master_seed,
        }
    }
}
