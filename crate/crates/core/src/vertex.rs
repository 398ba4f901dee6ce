//! Coefficients of the vertex operator and of its inverse, built
//! recursively from the R-matrix, plus their consistency checks.
//!
//! A coefficient of order `n` acts on `n + 1` sites: site 1 is the
//! auxiliary space, site `j + 1` carries the oscillator with rapidity
//! `ks[j - 1]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::braid::{
    covariance_residual, ensure_distinct, lexicographic, BraidWord, ExchangeChain, LabelLayout,
};
use crate::error::{Error, Result};
use crate::rmatrix::RMatrixModel;
use crate::tensor::{chain_product, max_abs_distance, MultiSiteOperator, C64};

pub const DEFAULT_MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    /// Coefficients of `T(k_inf)`.
    Direct,
    /// Coefficients of the inverse series.
    Dual,
}

/// What the R-matrices facing the auxiliary site are replaced with. Only
/// used for structural checks; `Model` is the real construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InfinityCoupling {
    Model,
    /// `lambda * R`
    Scaled(f64),
    Identity,
}

#[derive(Clone, Debug)]
pub struct VertexCoefficient {
    pub kind: CoefficientKind,
    pub order: usize,
    pub k_infinity: f64,
    pub rapidities: Vec<f64>,
    pub op: MultiSiteOperator,
}

type CacheKey = (CoefficientKind, u64, Vec<u64>);

pub struct VertexEngine {
    model: RMatrixModel,
    max_order: usize,
    coupling: InfinityCoupling,
    cache: Mutex<HashMap<CacheKey, Arc<MultiSiteOperator>>>,
}

impl VertexEngine {
    pub fn new(model: RMatrixModel) -> Self {
        Self::with_options(model, DEFAULT_MAX_ORDER, InfinityCoupling::Model)
    }

    pub fn with_options(model: RMatrixModel, max_order: usize, coupling: InfinityCoupling) -> Self {
        Self {
            model,
            max_order,
            coupling,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &RMatrixModel {
        &self.model
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn t_coefficient(&self, k_inf: f64, ks: &[f64]) -> Result<VertexCoefficient> {
        self.coefficient(CoefficientKind::Direct, k_inf, ks)
    }

    pub fn t_bar_coefficient(&self, k_inf: f64, ks: &[f64]) -> Result<VertexCoefficient> {
        self.coefficient(CoefficientKind::Dual, k_inf, ks)
    }

    pub fn coefficient(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        ks: &[f64],
    ) -> Result<VertexCoefficient> {
        Ok(VertexCoefficient {
            kind,
            order: ks.len(),
            k_infinity: k_inf,
            rapidities: ks.to_vec(),
            op: (*self.operator(kind, k_inf, ks)?).clone(),
        })
    }

    /// Shared handle to a coefficient; cheaper than [`Self::coefficient`]
    /// for repeated lookups.
    pub fn operator(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        ks: &[f64],
    ) -> Result<Arc<MultiSiteOperator>> {
        if ks.len() > self.max_order {
            return Err(Error::OrderTooLarge {
                order: ks.len(),
                max: self.max_order,
            });
        }
        self.model.check_rapidity(k_inf)?;
        for &k in ks {
            self.model.check_rapidity(k)?;
        }
        ensure_distinct(ks)?;
        if ks.contains(&k_inf) {
            return Err(Error::DegenerateRapidities(format!(
                "auxiliary rapidity {k_inf} coincides with an oscillator rapidity"
            )));
        }
        self.lookup(kind, k_inf, ks)
    }

    fn lookup(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        ks: &[f64],
    ) -> Result<Arc<MultiSiteOperator>> {
        let key = (
            kind,
            k_inf.to_bits(),
            ks.iter().map(|k| k.to_bits()).collect(),
        );
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let value = Arc::new(self.build(kind, k_inf, ks)?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&value));
        Ok(value)
    }

    /// R-matrix between the auxiliary site and an oscillator: `R(k_inf, k)`
    /// for the direct series, `R(k, k_inf)` with reversed slots for the dual.
    fn infinity_factor(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        k: f64,
    ) -> Result<(MultiSiteOperator, bool)> {
        let n = self.model.local_dim();
        let r = match self.coupling {
            InfinityCoupling::Identity => return Ok((MultiSiteOperator::identity(n, 2), false)),
            InfinityCoupling::Model | InfinityCoupling::Scaled(_) => match kind {
                CoefficientKind::Direct => self.model.evaluate(k_inf, k)?,
                CoefficientKind::Dual => self.model.evaluate(k, k_inf)?,
            },
        };
        let r = match self.coupling {
            InfinityCoupling::Scaled(lambda) => r.scaled(C64::new(lambda, 0.0)),
            _ => r,
        };
        Ok((r, kind == CoefficientKind::Dual))
    }

    fn build(&self, kind: CoefficientKind, k_inf: f64, ks: &[f64]) -> Result<MultiSiteOperator> {
        let dim = self.model.local_dim();
        if ks.is_empty() {
            return Ok(MultiSiteOperator::identity(dim, 1));
        }
        // Labels 0..=n on sites 2..=n+2, auxiliary on site 1.
        let n = ks.len() - 1;
        let total = n + 2;
        let labels: Vec<usize> = (0..=n).collect();
        let layout = LabelLayout {
            rapidities: ks.to_vec(),
            sites: labels.iter().map(|l| l + 2).collect(),
            total_sites: total,
        };
        let lower = |word: &[usize]| -> Result<MultiSiteOperator> {
            let sub: Vec<f64> = word.iter().map(|&l| ks[l]).collect();
            let op = self.lookup(kind, k_inf, &sub)?;
            let mut sites = vec![1];
            sites.extend(word.iter().map(|l| l + 2));
            op.place(&sites, total)
        };
        let mut acc = MultiSiteOperator::zeros(dim, total);

        let first_weight = C64::new(1.0 / (n + 1) as f64, 0.0);
        for i in 0..=n {
            let mut word = vec![i];
            word.extend(labels.iter().copied().filter(|&l| l != i));
            let chain = ExchangeChain::between(&word, &labels)?;
            let term = chain.conjugate(&self.model, &layout, &lower(&word[1..])?)?;
            acc.add_scaled(first_weight, &term)?;
        }

        let factorial: f64 = (1..=n + 1).map(|x| x as f64).product();
        let second_weight = C64::new(-1.0 / factorial, 0.0);
        for sigma in lexicographic(n + 1) {
            let s = sigma.as_slice();
            let head = s[0];
            let rest = &s[1..];
            let mut word = rest.to_vec();
            word.push(head);
            let (r, reversed) = self.infinity_factor(kind, k_inf, ks[head])?;
            let sites = if reversed {
                (head + 2, 1)
            } else {
                (1, head + 2)
            };
            let low = lower(rest)?;
            let mid = match kind {
                CoefficientKind::Direct => low.left_mul_two_site(&r, sites)?,
                CoefficientKind::Dual => low.right_mul_two_site(&r, sites)?,
            };
            let chain = ExchangeChain::between(&word, &labels)?;
            let term = chain.conjugate(&self.model, &layout, &mid)?;
            acc.add_scaled(second_weight, &term)?;
        }
        Ok(acc)
    }

    /// Residual of `T_{inf sigma(1..n)} = R_sigma T R_sigma^{-1}`.
    pub fn check_covariance(&self, coeff: &VertexCoefficient, sigma: &BraidWord) -> Result<f64> {
        let rule = |ks: &[f64]| -> Result<MultiSiteOperator> {
            Ok((*self.operator(coeff.kind, coeff.k_infinity, ks)?).clone())
        };
        covariance_residual(&self.model, &rule, sigma, &coeff.rapidities, 1)
    }

    /// Residual of the relation tying order `n` to order `n + 1` when an
    /// extra oscillator with rapidity `k0` is inserted in every position.
    pub fn check_characterization(&self, k_inf: f64, k0: f64, ks: &[f64]) -> Result<f64> {
        let n = ks.len();
        if n == 0 {
            return Err(Error::Config(
                "characterization needs at least one rapidity".into(),
            ));
        }
        let mut all = vec![k0];
        all.extend_from_slice(ks);
        ensure_distinct(&all)?;
        let total = n + 2;
        let labels: Vec<usize> = (0..=n).collect();
        let layout = LabelLayout {
            rapidities: all.clone(),
            sites: labels.iter().map(|l| l + 2).collect(),
            total_sites: total,
        };
        let kind = CoefficientKind::Direct;
        let mut sites = vec![1];
        sites.extend(3..=total);
        let tn = self.operator(kind, k_inf, ks)?.place(&sites, total)?;

        let mut moved: Vec<usize> = (1..=n).collect();
        moved.push(0);
        let chain = ExchangeChain::between(&moved, &labels)?;
        let (r, _) = self.infinity_factor(kind, k_inf, k0)?;
        let inner = chain.conjugate(&self.model, &layout, &tn.left_mul_two_site(&r, (1, 2))?)?;
        let lhs = tn.sub(&inner)?.scaled(C64::new((n + 1) as f64, 0.0));

        let mut rhs = MultiSiteOperator::zeros(self.model.local_dim(), total);
        for i in 1..=n + 1 {
            let mut word: Vec<usize> = (1..i).collect();
            word.push(0);
            word.extend(i..=n);
            let sub: Vec<f64> = word.iter().map(|&l| all[l]).collect();
            let mut place_sites = vec![1];
            place_sites.extend(word.iter().map(|l| l + 2));
            let c = self
                .operator(kind, k_inf, &sub)?
                .place(&place_sites, total)?;
            let term =
                ExchangeChain::between(&word, &labels)?.conjugate(&self.model, &layout, &c)?;
            rhs.add_scaled(C64::new(1.0, 0.0), &term)?;
        }
        max_abs_distance(&lhs, &rhs)
    }
}

/// `I - R_{inf 1}` assembled directly from the R-matrix.
pub fn closed_form_first(model: &RMatrixModel, k_inf: f64, k1: f64) -> Result<MultiSiteOperator> {
    let r = model.evaluate(k_inf, k1)?;
    MultiSiteOperator::identity(model.local_dim(), 2).sub(&r)
}

/// `I - R_{inf 2} + R_{inf 2} R_{inf 1} - R_21 R_{inf 1} R_12` on three sites.
pub fn closed_form_second(
    model: &RMatrixModel,
    k_inf: f64,
    k1: f64,
    k2: f64,
) -> Result<MultiSiteOperator> {
    let r_inf1 = model.evaluate(k_inf, k1)?.embed((1, 2), 3)?;
    let r_inf2 = model.evaluate(k_inf, k2)?.embed((1, 3), 3)?;
    let r12 = model.evaluate(k1, k2)?.embed((2, 3), 3)?;
    let r21 = model.evaluate(k2, k1)?.embed((3, 2), 3)?;
    let mut out = MultiSiteOperator::identity(model.local_dim(), 3);
    let one = C64::new(1.0, 0.0);
    out.add_scaled(-one, &r_inf2)?;
    out.add_scaled(one, &chain_product(&[&r_inf2, &r_inf1])?)?;
    out.add_scaled(-one, &chain_product(&[&r21, &r_inf1, &r12])?)?;
    Ok(out)
}

/// `I - R_{1 inf}(k1, k_inf)` with the R-matrix slots reversed.
pub fn closed_form_dual_first(
    model: &RMatrixModel,
    k_inf: f64,
    k1: f64,
) -> Result<MultiSiteOperator> {
    let r = model.evaluate(k1, k_inf)?.embed((2, 1), 2)?;
    MultiSiteOperator::identity(model.local_dim(), 2).sub(&r)
}
