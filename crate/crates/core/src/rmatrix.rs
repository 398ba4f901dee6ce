//! R-matrix models: built-in families, constant tables and user plugins,
//! with Yang-Baxter and unitarity validators.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{chain_product, max_abs_distance, MultiSiteOperator, C64, ONE, ZERO};

/// Denominators below this magnitude are reported as poles.
pub const POLE_THRESHOLD: f64 = 1e-12;

/// Number of random triples a plugin must survive before registration.
pub const REGISTRATION_SAMPLES: usize = 20;

const REGISTRATION_SEED: u64 = 0x2d_5eed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Additive,
    Multiplicative,
    Constant,
}

impl Convention {
    /// Default window for sampled rapidities.
    pub fn sample_window(self) -> (f64, f64) {
        match self {
            Convention::Multiplicative => (0.3, 3.0),
            Convention::Additive | Convention::Constant => (-3.0, 3.0),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Convention::Additive => "additive",
            Convention::Multiplicative => "multiplicative",
            Convention::Constant => "constant",
        };
        f.write_str(s)
    }
}

pub type Evaluator = Arc<dyn Fn(f64, f64) -> Result<MultiSiteOperator> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Yangian { g: f64 },
    Trigonometric { q: f64 },
    Identity,
    Table(MultiSiteOperator),
    Plugin(Evaluator),
}

/// How a custom model supplies its values.
pub enum CustomSource {
    Table(MultiSiteOperator),
    Closure(Evaluator),
}

#[derive(Clone)]
pub struct RMatrixModel {
    name: String,
    local_dim: usize,
    convention: Convention,
    params: BTreeMap<String, f64>,
    kind: Kind,
}

impl fmt::Debug for RMatrixModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RMatrixModel")
            .field("name", &self.name)
            .field("local_dim", &self.local_dim)
            .field("convention", &self.convention)
            .field("params", &self.params)
            .finish()
    }
}

impl RMatrixModel {
    /// Rational gl(N) model `R(k) = (k I + i g P) / (k + i g)`, `k = k1 - k2`.
    pub fn yangian(local_dim: usize, g: f64) -> Result<Self> {
        if local_dim < 2 {
            return Err(Error::Config(format!(
                "N must be at least 2, got {local_dim}"
            )));
        }
        if !g.is_finite() || g == 0.0 {
            return Err(Error::Config(format!(
                "coupling g must be finite and nonzero, got {g}"
            )));
        }
        Ok(Self {
            name: "yangian".into(),
            local_dim,
            convention: Convention::Additive,
            params: BTreeMap::from([("N".into(), local_dim as f64), ("g".into(), g)]),
            kind: Kind::Yangian { g },
        })
    }

    /// Trigonometric six-vertex model of U_q(gl2-hat), normalised with rho = 1.
    pub fn trigonometric(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 || q == 1.0 {
            return Err(Error::Config(format!(
                "deformation q must be positive and different from 1, got {q}"
            )));
        }
        Ok(Self {
            name: "uq-gl2".into(),
            local_dim: 2,
            convention: Convention::Multiplicative,
            params: BTreeMap::from([("q".into(), q)]),
            kind: Kind::Trigonometric { q },
        })
    }

    pub fn identity(local_dim: usize) -> Self {
        Self {
            name: "identity".into(),
            local_dim,
            convention: Convention::Constant,
            params: BTreeMap::from([("N".into(), local_dim as f64)]),
            kind: Kind::Identity,
        }
    }

    /// Unvalidated constant model; use [`ModelRegistry::register_custom`]
    /// for anything that should be checked first.
    pub fn constant(name: &str, table: MultiSiteOperator) -> Result<Self> {
        if table.site_count() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "constant R-matrix must act on 2 sites, got {}",
                table.site_count()
            )));
        }
        Ok(Self {
            name: name.into(),
            local_dim: table.site_dim(),
            convention: Convention::Constant,
            params: BTreeMap::from([("N".into(), table.site_dim() as f64)]),
            kind: Kind::Table(table),
        })
    }

    /// The swap `R = P`.
    pub fn permutation(local_dim: usize) -> Self {
        Self::constant("permutation", MultiSiteOperator::permutation(local_dim))
            .expect("permutation is a two-site operator")
    }

    fn plugin(name: &str, local_dim: usize, convention: Convention, eval: Evaluator) -> Self {
        Self {
            name: name.into(),
            local_dim,
            convention,
            params: BTreeMap::from([("N".into(), local_dim as f64)]),
            kind: Kind::Plugin(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    /// Rejects values no model can take: non-finite, or zero for
    /// multiplicative models.
    pub fn check_rapidity(&self, k: f64) -> Result<()> {
        if !k.is_finite() {
            return Err(Error::Domain(format!("rapidity {k} is not finite")));
        }
        if self.convention == Convention::Multiplicative && k == 0.0 {
            return Err(Error::Domain(format!(
                "model `{}` is multiplicative and does not accept z = 0",
                self.name
            )));
        }
        Ok(())
    }

    /// `R(k1, k2)` as an `N^2 x N^2` two-site operator.
    pub fn evaluate(&self, k1: f64, k2: f64) -> Result<MultiSiteOperator> {
        self.check_rapidity(k1)?;
        self.check_rapidity(k2)?;
        let n = self.local_dim;
        match &self.kind {
            Kind::Yangian { g } => {
                let k = k1 - k2;
                let ig = C64::new(0.0, *g);
                let den = C64::new(k, 0.0) + ig;
                if den.norm() < POLE_THRESHOLD {
                    return Err(self.pole(k1, k2, den.norm()));
                }
                let diag = C64::new(k, 0.0) / den;
                let off = ig / den;
                let mut r = MultiSiteOperator::zeros(n, 2);
                let e = r.entries_mut();
                for a in 0..n {
                    for b in 0..n {
                        e[[a * n + b, a * n + b]] += diag;
                        e[[a * n + b, b * n + a]] += off;
                    }
                }
                Ok(r)
            }
            Kind::Trigonometric { q } => {
                let z = k1 / k2;
                let den = 1.0 - q * q * z * z;
                if den.abs() < POLE_THRESHOLD {
                    return Err(self.pole(k1, k2, den.abs()));
                }
                let a = C64::new(q * (1.0 - z * z) / den, 0.0);
                let b = C64::new(z * (1.0 - q * q) / den, 0.0);
                let entries = Array2::from_shape_vec(
                    (4, 4),
                    vec![
                        ONE, ZERO, ZERO, ZERO, //
                        ZERO, a, b, ZERO, //
                        ZERO, b, a, ZERO, //
                        ZERO, ZERO, ZERO, ONE,
                    ],
                )
                .expect("4x4 shape");
                MultiSiteOperator::new(2, 2, entries)
            }
            Kind::Identity => Ok(MultiSiteOperator::identity(n, 2)),
            Kind::Table(t) => Ok(t.clone()),
            Kind::Plugin(f) => {
                let r = f(k1, k2)?;
                if r.site_count() != 2 || r.site_dim() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "plugin `{}` returned N={}, m={} (expected N={n}, m=2)",
                        self.name,
                        r.site_dim(),
                        r.site_count()
                    )));
                }
                Ok(r)
            }
        }
    }

    /// `R_21(k2, k1) = P R(k2, k1) P`.
    pub fn evaluate_reversed(&self, k2: f64, k1: f64) -> Result<MultiSiteOperator> {
        self.evaluate(k2, k1)?.embed((2, 1), 2)
    }

    fn pole(&self, k1: f64, k2: f64, denominator: f64) -> Error {
        Error::Pole {
            model: self.name.clone(),
            k1,
            k2,
            denominator,
        }
    }

    /// Residual of `R12(k1,k2) R13(k1,k3) R23(k2,k3) = R23 R13 R12`.
    pub fn check_yang_baxter(&self, k1: f64, k2: f64, k3: f64) -> Result<f64> {
        let r12 = self.evaluate(k1, k2)?.embed((1, 2), 3)?;
        let r13 = self.evaluate(k1, k3)?.embed((1, 3), 3)?;
        let r23 = self.evaluate(k2, k3)?.embed((2, 3), 3)?;
        let lhs = chain_product(&[&r12, &r13, &r23])?;
        let rhs = chain_product(&[&r23, &r13, &r12])?;
        max_abs_distance(&lhs, &rhs)
    }

    /// Residual of `R12(k1,k2) R21(k2,k1) = I`.
    pub fn check_unitarity(&self, k1: f64, k2: f64) -> Result<f64> {
        let r12 = self.evaluate(k1, k2)?;
        let r21 = self.evaluate_reversed(k2, k1)?;
        max_abs_distance(
            &r12.matmul(&r21)?,
            &MultiSiteOperator::identity(self.local_dim, 2),
        )
    }

    /// Worst YBE and unitarity residuals over `samples` random triples.
    pub fn sampled_residuals(&self, samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let (lo, hi) = self.convention.sample_window();
        let (mut ybe, mut unit) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let k: [f64; 3] = std::array::from_fn(|_| rng.random_range(lo..hi));
            ybe = ybe.max(self.check_yang_baxter(k[0], k[1], k[2])?);
            unit = unit.max(self.check_unitarity(k[0], k[1])?);
        }
        Ok((ybe, unit))
    }
}

/// Parameter schema of a built-in family, for listings.
#[derive(Clone, Debug, Serialize)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub convention: Convention,
    pub params: &'static [(&'static str, &'static str)],
}

pub fn builtin_catalog() -> Vec<BuiltinInfo> {
    vec![
        BuiltinInfo {
            name: "yangian",
            convention: Convention::Additive,
            params: &[
                ("N", "local dimension, >= 2"),
                ("g", "coupling, real, nonzero"),
            ],
        },
        BuiltinInfo {
            name: "uq-gl2",
            convention: Convention::Multiplicative,
            params: &[("q", "deformation, positive, != 1")],
        },
        BuiltinInfo {
            name: "identity",
            convention: Convention::Constant,
            params: &[("N", "local dimension, >= 2")],
        },
        BuiltinInfo {
            name: "permutation",
            convention: Convention::Constant,
            params: &[("N", "local dimension, >= 2")],
        },
        BuiltinInfo {
            name: "constant",
            convention: Convention::Constant,
            params: &[("file", "two-site matrix dump")],
        },
    ]
}

/// Custom models, validated before they become visible.
#[derive(Default)]
pub struct ModelRegistry {
    models: RwLock<BTreeMap<String, RMatrixModel>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<RMatrixModel> {
        self.models
            .read()
            .expect("registry lock")
            .get(name)
            .cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.models
            .read()
            .expect("registry lock")
            .keys()
            .cloned()
            .collect()
    }

    pub fn register_custom(
        &self,
        name: &str,
        local_dim: usize,
        convention: Convention,
        source: CustomSource,
    ) -> Result<RMatrixModel> {
        let model = match source {
            CustomSource::Table(t) => {
                if convention != Convention::Constant {
                    return Err(Error::Config(
                        "a fixed table can only back a constant model".into(),
                    ));
                }
                if t.site_dim() != local_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "table has N={}, declared N={local_dim}",
                        t.site_dim()
                    )));
                }
                RMatrixModel::constant(name, t)?
            }
            CustomSource::Closure(f) => RMatrixModel::plugin(name, local_dim, convention, f),
        };
        validate(&model)?;
        self.models
            .write()
            .expect("registry lock")
            .insert(name.to_string(), model.clone());
        Ok(model)
    }
}

/// Registration gate: YBE and unitarity on seeded random samples.
pub fn validate(model: &RMatrixModel) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(REGISTRATION_SEED);
    let (ybe, unit) = model.sampled_residuals(REGISTRATION_SAMPLES, &mut rng)?;
    let tolerance = crate::DEFAULT_TOLERANCE;
    for (identity, residual) in [("unitarity", unit), ("yang-baxter", ybe)] {
        if residual.is_nan() || residual >= tolerance {
            return Err(Error::Validation {
                model: model.name.clone(),
                identity: identity.into(),
                residual,
                tolerance,
            });
        }
    }
    Ok(())
}

/// Triangular constant R-matrix of U_q(sl2); solves YBE but is not unitary.
pub fn triangular_uq_sl2(q: f64) -> MultiSiteOperator {
    let c = |x: f64| C64::new(x, 0.0);
    let e = Array2::from_shape_vec(
        (4, 4),
        vec![
            c(q),
            ZERO,
            ZERO,
            ZERO, //
            ZERO,
            ONE,
            c(q - 1.0 / q),
            ZERO, //
            ZERO,
            ZERO,
            ONE,
            ZERO, //
            ZERO,
            ZERO,
            ZERO,
            c(q),
        ],
    )
    .expect("4x4 shape");
    MultiSiteOperator::new(2, 2, e).expect("valid shape")
}
