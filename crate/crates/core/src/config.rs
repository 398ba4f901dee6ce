//! Run configuration: flat JSON, environment override for the tolerance,
//! model construction.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fock::{RapidityGrid, DEFAULT_SECTOR_LIMIT};
use crate::rmatrix::{Convention, CustomSource, ModelRegistry, RMatrixModel};
use crate::tensor::MultiSiteOperator;
use crate::vertex::DEFAULT_MAX_ORDER;

pub const TOLERANCE_ENV: &str = "ZFVERTEX_TOL";
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Rmatrix,
    Braid,
    Vertex,
    Fock,
    Hierarchy,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Rmatrix,
        Suite::Braid,
        Suite::Vertex,
        Suite::Fock,
        Suite::Hierarchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Rmatrix => "rmatrix",
            Suite::Braid => "braid",
            Suite::Vertex => "vertex",
            Suite::Fock => "fock",
            Suite::Hierarchy => "hierarchy",
        }
    }

    /// Offset mixed into the seed so suites draw independent samples.
    pub(crate) fn seed_offset(self) -> u64 {
        match self {
            Suite::Rmatrix => 0x11,
            Suite::Braid => 0x22,
            Suite::Vertex => 0x33,
            Suite::Fock => 0x44,
            Suite::Hierarchy => 0x55,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    #[serde(rename = "N")]
    pub local_dim: usize,
    pub g: f64,
    pub q: f64,
    pub file: Option<PathBuf>,
    pub grid: Option<Vec<f64>>,
    pub k_inf: Option<f64>,
    /// Second spectral parameter of the RTT check.
    pub k_frt: Option<f64>,
    pub sector_cap: usize,
    pub max_order: usize,
    pub tolerance: f64,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub samples: usize,
    pub degrees: Vec<u32>,
    pub flow_times: usize,
    pub parallel: bool,
    pub timings: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "yangian".into(),
            local_dim: 2,
            g: 1.0,
            q: 0.5,
            file: None,
            grid: None,
            k_inf: None,
            k_frt: None,
            sector_cap: 2,
            max_order: DEFAULT_MAX_ORDER,
            tolerance: crate::DEFAULT_TOLERANCE,
            suites: Suite::ALL.to_vec(),
            seed: DEFAULT_SEED,
            samples: 50,
            degrees: vec![0, 1, 2, 3],
            flow_times: 5,
            parallel: false,
            timings: false,
            out: None,
        }
    }
}

impl RunConfig {
    /// Defaults, then the tolerance environment variable, then the file.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut base = Self::default();
        if let Ok(raw) = std::env::var(TOLERANCE_ENV) {
            base.tolerance = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{TOLERANCE_ENV}=`{raw}` is not a number")))?;
        }
        let cfg = match path {
            Some(p) => base.overlay(&std::fs::read_to_string(p)?)?,
            None => base,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Keys present in `json` replace the corresponding fields.
    pub fn overlay(&self, json: &str) -> Result<Self> {
        let patch: Value = serde_json::from_str(json)?;
        let Value::Object(patch) = patch else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(self)?;
        let target = merged
            .as_object_mut()
            .expect("config serialises to an object");
        for (k, v) in patch {
            if !target.contains_key(&k) {
                return Err(Error::Config(format!("unknown configuration key `{k}`")));
            }
            target.insert(k, v);
        }
        serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.local_dim < 2 {
            return Err(Error::Config(format!(
                "N must be at least 2, got {}",
                self.local_dim
            )));
        }
        if let Some(grid) = &self.grid {
            RapidityGrid::new(grid.clone())?;
        }
        if self.sector_cap > DEFAULT_SECTOR_LIMIT + 1 {
            // Well-bredness and the dressed relations look two sectors up.
            return Err(Error::Config(format!(
                "sector cap {} is above the supported {}",
                self.sector_cap,
                DEFAULT_SECTOR_LIMIT + 1
            )));
        }
        Ok(())
    }

    /// Builds the selected model, validating custom ones.
    pub fn build_model(&self, registry: &ModelRegistry) -> Result<RMatrixModel> {
        match self.model.as_str() {
            "yangian" => RMatrixModel::yangian(self.local_dim, self.g),
            "uq-gl2" => {
                if self.local_dim != 2 {
                    return Err(Error::Config("uq-gl2 is defined for N = 2 only".into()));
                }
                RMatrixModel::trigonometric(self.q)
            }
            "identity" => Ok(RMatrixModel::identity(self.local_dim)),
            "permutation" => registry.register_custom(
                "permutation",
                self.local_dim,
                Convention::Constant,
                CustomSource::Table(MultiSiteOperator::permutation(self.local_dim)),
            ),
            "constant" => {
                let path = self
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::Config("model `constant` needs `file`".into()))?;
                let table = MultiSiteOperator::from_dump(&std::fs::read_to_string(path)?)?;
                let n = table.site_dim();
                registry.register_custom(
                    "constant",
                    n,
                    Convention::Constant,
                    CustomSource::Table(table),
                )
            }
            other => registry
                .get(other)
                .ok_or_else(|| Error::Config(format!("unknown model `{other}`"))),
        }
    }

    pub fn grid_points(&self, model: &RMatrixModel) -> Vec<f64> {
        self.grid
            .clone()
            .unwrap_or_else(|| match model.convention() {
                Convention::Multiplicative => vec![0.5, 1.3, 2.1],
                _ => vec![-1.0, 0.5, 2.0],
            })
    }

    pub fn k_inf_for(&self, model: &RMatrixModel) -> f64 {
        self.k_inf.unwrap_or(match model.convention() {
            Convention::Multiplicative => 0.8,
            _ => 0.25,
        })
    }

    pub fn k_frt_for(&self, model: &RMatrixModel) -> f64 {
        self.k_frt.unwrap_or(match model.convention() {
            Convention::Multiplicative => 1.7,
            _ => -0.625,
        })
    }
}
