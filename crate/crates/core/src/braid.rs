//! Permutations, reduced words and the R-matrix products attached to them.
//!
//! Labels and positions are 0-based here. A permutation in one-line form is
//! read as a word of oscillator labels: `perm[j]` is the label sitting at
//! position `j`. The product attached to a word `w` is the operator `E_w`
//! with `a_w = E_w a_id`; an out-of-order adjacent pair `(x, y)`, `x > y`,
//! is straightened with the factor `R_yx(k_y, k_x)` on the sites of `y`
//! and `x`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::rmatrix::RMatrixModel;
use crate::tensor::{MultiSiteOperator, C64};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{images:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self(images))
    }

    /// Parses 1-based one-line notation.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::InvalidPermutation(format!(
                "{images:?}: one-based images start at 1"
            )));
        }
        Self::new(images.iter().map(|x| x - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Swap of positions `i` and `i + 1`.
    pub fn adjacent(n: usize, i: usize) -> Result<Self> {
        if i + 1 >= n {
            return Err(Error::InvalidPermutation(format!(
                "adjacent transposition {i} on {n} letters"
            )));
        }
        let mut p = Self::identity(n);
        p.0.swap(i, i + 1);
        Ok(p)
    }

    /// Word `(1, 2, ..., j, 0, j+1, ..., n)` on `n + 1` letters: label 0
    /// moved behind the first `j` labels.
    pub fn insertion_cycle(n: usize, j: usize) -> Result<Self> {
        if j > n {
            return Err(Error::InvalidPermutation(format!(
                "cannot move label 0 past {j} of {n} labels"
            )));
        }
        let mut w: Vec<usize> = (1..=j).collect();
        w.push(0);
        w.extend(j + 1..=n);
        Ok(Self(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)(j) = self(other(j))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::InvalidPermutation(format!(
                "composing permutations of {} and {} letters",
                self.len(),
                other.len()
            )));
        }
        Ok(Self(other.0.iter().map(|&j| self.0[j]).collect()))
    }

    pub fn inversions(&self) -> usize {
        self.lehmer_code().iter().sum()
    }

    pub fn lehmer_code(&self) -> Vec<usize> {
        let p = &self.0;
        (0..p.len())
            .map(|i| p[i + 1..].iter().filter(|&&y| y < p[i]).count())
            .collect()
    }

    /// Rearranges `items` by the word: entry `j` of the result is
    /// `items[self(j)]`.
    pub fn pick<T: Copy>(&self, items: &[T]) -> Vec<T> {
        self.0.iter().map(|&j| items[j]).collect()
    }

    /// Steps to the lexicographic successor; false once the last
    /// permutation has been reached.
    pub fn advance(&mut self) -> bool {
        let p = &mut self.0;
        if p.len() < 2 {
            return false;
        }
        let Some(i) = (0..p.len() - 1).rev().find(|&i| p[i] < p[i + 1]) else {
            return false;
        };
        let j = (i + 1..p.len())
            .rev()
            .find(|&j| p[j] > p[i])
            .expect("successor exists");
        p.swap(i, j);
        p[i + 1..].reverse();
        true
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_based: Vec<String> = self.0.iter().map(|x| (x + 1).to_string()).collect();
        write!(f, "[{}]", one_based.join(","))
    }
}

/// All permutations of `n` letters in lexicographic order.
pub fn lexicographic(n: usize) -> impl Iterator<Item = Permutation> {
    let mut next = Some(Permutation::identity(n));
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        if succ.advance() {
            next = Some(succ);
        }
        Some(current)
    })
}

/// A permutation together with a reduced word: applying the adjacent swaps
/// `reduced_word[0], reduced_word[1], ...` in turn to the identity word
/// produces `perm`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BraidWord {
    perm: Permutation,
    reduced_word: Vec<usize>,
}

impl BraidWord {
    /// Reduced word from bubble sort.
    pub fn new(perm: Permutation) -> Self {
        let mut w = perm.0.clone();
        let mut swaps = Vec::new();
        for pass in 0..w.len() {
            for j in 0..w.len().saturating_sub(pass + 1) {
                if w[j] > w[j + 1] {
                    w.swap(j, j + 1);
                    swaps.push(j);
                }
            }
        }
        swaps.reverse();
        Self {
            perm,
            reduced_word: swaps,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Permutation::identity(n))
    }

    /// Uses a caller-supplied word; it must be reduced and realise `perm`.
    pub fn with_reduced_word(perm: Permutation, word: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut w: Vec<usize> = (0..n).collect();
        for &i in &word {
            if i + 1 >= n {
                return Err(Error::InvalidPermutation(format!(
                    "letter s_{i} out of range for {n} sites"
                )));
            }
            w.swap(i, i + 1);
        }
        if w != perm.0 {
            return Err(Error::InvalidPermutation(format!(
                "word {word:?} realises {w:?}, not {:?}",
                perm.0
            )));
        }
        if word.len() != perm.inversions() {
            return Err(Error::InvalidPermutation(format!(
                "word {word:?} is not reduced ({} letters, {} inversions)",
                word.len(),
                perm.inversions()
            )));
        }
        Ok(Self {
            perm,
            reduced_word: word,
        })
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn reduced_word(&self) -> &[usize] {
        &self.reduced_word
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.perm.inverse())
    }

    /// Exchange factors read off the reduced word.
    pub fn chain(&self) -> ExchangeChain {
        let mut w: Vec<usize> = (0..self.len()).collect();
        let mut factors = Vec::with_capacity(self.reduced_word.len());
        for &i in &self.reduced_word {
            let (x, y) = (w[i], w[i + 1]);
            factors.push((x, y));
            w.swap(i, i + 1);
        }
        factors.reverse();
        ExchangeChain { factors }
    }
}

/// Where each oscillator label lives: its rapidity and its site in an
/// operator of `total_sites` sites (1-based).
#[derive(Clone, Debug)]
pub struct LabelLayout {
    pub rapidities: Vec<f64>,
    pub sites: Vec<usize>,
    pub total_sites: usize,
}

impl LabelLayout {
    /// Label `j` on site `offset + j + 1`.
    pub fn contiguous(rapidities: &[f64], offset: usize) -> Self {
        let n = rapidities.len();
        Self {
            rapidities: rapidities.to_vec(),
            sites: (0..n).map(|j| offset + j + 1).collect(),
            total_sites: offset + n,
        }
    }
}

/// Ordered list of exchange factors `(a, b)`, each standing for
/// `R_ab(k_a, k_b)` on the sites of labels `a` and `b`. The first entry is
/// the leftmost factor of the product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangeChain {
    factors: Vec<(usize, usize)>,
}

impl ExchangeChain {
    /// Chain `E` with `a_source = E a_target`, by bubble-sorting `source`
    /// into the order of `target`.
    pub fn between(source: &[usize], target: &[usize]) -> Result<Self> {
        let mut rank = HashMap::with_capacity(target.len());
        for (i, &l) in target.iter().enumerate() {
            rank.insert(l, i);
        }
        if source.len() != target.len() || source.iter().any(|l| !rank.contains_key(l)) {
            return Err(Error::InvalidPermutation(format!(
                "{source:?} is not a rearrangement of {target:?}"
            )));
        }
        let mut w = source.to_vec();
        let mut factors = Vec::new();
        let mut changed = true;
        while changed {
            changed = false;
            for j in 0..w.len().saturating_sub(1) {
                let (x, y) = (w[j], w[j + 1]);
                if rank[&x] > rank[&y] {
                    factors.push((y, x));
                    w.swap(j, j + 1);
                    changed = true;
                }
            }
        }
        Ok(Self { factors })
    }

    /// Chain of a word relative to the sorted labels it contains.
    pub fn of_word(word: &[usize]) -> Result<Self> {
        let mut target = word.to_vec();
        target.sort_unstable();
        Self::between(word, &target)
    }

    /// Inverse by unitarity: reversed order, each factor with its slots
    /// and arguments swapped.
    pub fn inverse(&self) -> Self {
        Self {
            factors: self.factors.iter().rev().map(|&(a, b)| (b, a)).collect(),
        }
    }

    pub fn factors(&self) -> &[(usize, usize)] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    fn factor(
        &self,
        model: &RMatrixModel,
        layout: &LabelLayout,
        (a, b): (usize, usize),
    ) -> Result<(MultiSiteOperator, (usize, usize))> {
        let r = model.evaluate(layout.rapidities[a], layout.rapidities[b])?;
        Ok((r, (layout.sites[a], layout.sites[b])))
    }

    /// The product as a dense operator.
    pub fn dense(&self, model: &RMatrixModel, layout: &LabelLayout) -> Result<MultiSiteOperator> {
        let mut acc = MultiSiteOperator::identity(model.local_dim(), layout.total_sites);
        for &f in &self.factors {
            let (r, sites) = self.factor(model, layout, f)?;
            acc = acc.right_mul_two_site(&r, sites)?;
        }
        Ok(acc)
    }

    /// `E^{-1} X E`, peeling one factor at a time.
    pub fn conjugate(
        &self,
        model: &RMatrixModel,
        layout: &LabelLayout,
        x: &MultiSiteOperator,
    ) -> Result<MultiSiteOperator> {
        let mut y = x.clone();
        for &(a, b) in &self.factors {
            let (r, sites) = self.factor(model, layout, (a, b))?;
            let (r_inv, inv_sites) = self.factor(model, layout, (b, a))?;
            y = y
                .left_mul_two_site(&r_inv, inv_sites)?
                .right_mul_two_site(&r, sites)?;
        }
        Ok(y)
    }
}

pub(crate) fn ensure_distinct(ks: &[f64]) -> Result<()> {
    for (i, a) in ks.iter().enumerate() {
        if ks[..i].contains(a) {
            return Err(Error::DegenerateRapidities(format!(
                "rapidity {a} appears more than once in {ks:?}"
            )));
        }
    }
    Ok(())
}

fn check_arity(sigma: &BraidWord, ks: &[f64]) -> Result<()> {
    if sigma.len() != ks.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of {} letters with {} rapidities",
            sigma.len(),
            ks.len()
        )));
    }
    ensure_distinct(ks)
}

/// The `n`-site product attached to `sigma`, assembled along its reduced
/// word. Label `j` carries `ks[j]` and sits on site `j + 1`.
pub fn r_sigma(model: &RMatrixModel, sigma: &BraidWord, ks: &[f64]) -> Result<MultiSiteOperator> {
    check_arity(sigma, ks)?;
    sigma.chain().dense(model, &LabelLayout::contiguous(ks, 0))
}

/// `r_sigma` for the word `b_{sigma(1..n)}` where `b_j = a_{mu(j)}`: evaluated
/// on the rapidities `ks[mu(j)]`, slot `j` placed on the site of label
/// `mu(j)`.
pub fn r_sigma_relabelled(
    model: &RMatrixModel,
    sigma: &BraidWord,
    mu: &Permutation,
    ks: &[f64],
) -> Result<MultiSiteOperator> {
    check_arity(sigma, ks)?;
    if mu.len() != ks.len() {
        return Err(Error::DimensionMismatch(
            "relabelling has the wrong length".into(),
        ));
    }
    let layout = LabelLayout {
        rapidities: mu.pick(ks),
        sites: mu.as_slice().iter().map(|j| j + 1).collect(),
        total_sites: ks.len(),
    };
    sigma.chain().dense(model, &layout)
}

/// Residual of the cocycle law `R^{mu}_sigma R_mu = R_w`, `w = mu ∘ sigma`.
pub fn check_cocycle(
    model: &RMatrixModel,
    sigma: &BraidWord,
    mu: &BraidWord,
    ks: &[f64],
) -> Result<f64> {
    let left = r_sigma_relabelled(model, sigma, mu.perm(), ks)?;
    let lhs = left.matmul(&r_sigma(model, mu, ks)?)?;
    let w = BraidWord::new(mu.perm().compose(sigma.perm())?);
    let rhs = r_sigma(model, &w, ks)?;
    crate::tensor::max_abs_distance(&lhs, &rhs)
}

/// A rapidity-dependent operator on `aux_sites` spectator sites followed by
/// one site per oscillator label.
pub type OperatorRule<'a> = dyn Fn(&[f64]) -> Result<MultiSiteOperator> + 'a;

/// The rule evaluated on the permuted rapidities `ks ∘ sigma`, slot
/// `aux + j` placed on the site of label `sigma(j)`.
pub fn permuted_instance(
    rule: &OperatorRule<'_>,
    sigma: &Permutation,
    ks: &[f64],
    aux_sites: usize,
) -> Result<MultiSiteOperator> {
    let op = rule(&sigma.pick(ks))?;
    let mut sites: Vec<usize> = (1..=aux_sites).collect();
    sites.extend(sigma.as_slice().iter().map(|j| aux_sites + j + 1));
    op.place(&sites, aux_sites + ks.len())
}

/// Residual of `M_{sigma(1..n)} = R_sigma M R_sigma^{-1}`, with `R_sigma`
/// acting on the label sites only.
pub fn covariance_residual(
    model: &RMatrixModel,
    rule: &OperatorRule<'_>,
    sigma: &BraidWord,
    ks: &[f64],
    aux_sites: usize,
) -> Result<f64> {
    check_arity(sigma, ks)?;
    let base = rule(ks)?;
    let lhs = permuted_instance(rule, sigma.perm(), ks, aux_sites)?;
    let layout = LabelLayout::contiguous(ks, aux_sites);
    // R_sigma M R_sigma^{-1} is conjugation by the inverse chain.
    let rhs = sigma.chain().inverse().conjugate(model, &layout, &base)?;
    crate::tensor::max_abs_distance(&lhs, &rhs)
}

/// Covariant average `(1/n!) sum_sigma R_sigma^{-1} M_{sigma(1..n)} R_sigma`,
/// summed in lexicographic order of `sigma`.
pub fn symmetrize(
    model: &RMatrixModel,
    rule: &OperatorRule<'_>,
    ks: &[f64],
    aux_sites: usize,
) -> Result<MultiSiteOperator> {
    let n = ks.len();
    ensure_distinct(ks)?;
    let layout = LabelLayout::contiguous(ks, aux_sites);
    let mut acc = MultiSiteOperator::zeros(model.local_dim(), aux_sites + n);
    let mut count = 0usize;
    for sigma in lexicographic(n) {
        let m_sigma = permuted_instance(rule, &sigma, ks, aux_sites)?;
        let term = BraidWord::new(sigma)
            .chain()
            .conjugate(model, &layout, &m_sigma)?;
        acc.add_scaled(C64::new(1.0, 0.0), &term)?;
        count += 1;
    }
    Ok(acc.scaled(C64::new(1.0 / count as f64, 0.0)))
}

type CacheKey = (String, Vec<usize>, Vec<u64>);

/// Memo table for `r_sigma`, keyed by model fingerprint, Lehmer code and the
/// exact bit patterns of the rapidities. Safe to share between threads.
#[derive(Default)]
pub struct RSigmaCache {
    map: Mutex<HashMap<CacheKey, Arc<MultiSiteOperator>>>,
}

impl RSigmaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        model: &RMatrixModel,
        sigma: &BraidWord,
        ks: &[f64],
    ) -> Result<Arc<MultiSiteOperator>> {
        let key = (
            model_fingerprint(model),
            sigma.perm().lehmer_code(),
            ks.iter().map(|k| k.to_bits()).collect(),
        );
        if let Some(hit) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let value = Arc::new(r_sigma(model, sigma, ks)?);
        self.map
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&value));
        Ok(value)
    }
}

pub(crate) fn model_fingerprint(model: &RMatrixModel) -> String {
    let mut s = format!("{}:{}", model.name(), model.local_dim());
    for (k, v) in model.params() {
        s.push_str(&format!(";{k}={:016x}", v.to_bits()));
    }
    s
}
