//! Fock space of the exchange algebra over a finite rapidity grid.
//!
//! A basis state is a word of creation operators `a†_{c1}(k_{g1}) ...
//! a†_{cm}(k_{gm})` on the vacuum with strictly increasing grid indices.
//! Grid indices and colors are 0-based. The vertex operator never changes
//! which grid points are occupied, so it is stored per occupied subset as
//! a [`MultiSiteOperator`] whose first site is the auxiliary space.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use ndarray::Array2;

use crate::braid::lexicographic;
use crate::error::{Error, Result};
use crate::rmatrix::RMatrixModel;
use crate::tensor::{chain_product, max_abs_distance, MultiSiteOperator, C64, ONE, ZERO};
use crate::vertex::{CoefficientKind, InfinityCoupling, VertexEngine, DEFAULT_MAX_ORDER};

pub const DEFAULT_SECTOR_LIMIT: usize = 3;

/// One creation operator: (grid index, color).
pub type Label = (usize, usize);
pub type Word = Vec<Label>;

#[derive(Clone, Debug, PartialEq)]
pub struct RapidityGrid {
    points: Vec<f64>,
}

impl RapidityGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("rapidity grid is empty".into()));
        }
        if points
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::Config(format!(
                "grid points must be strictly increasing: {points:?}"
            )));
        }
        Ok(Self { points })
    }

    /// Also checks that every ordered pair of points avoids the model's poles.
    pub fn for_model(points: Vec<f64>, model: &RMatrixModel) -> Result<Self> {
        let grid = Self::new(points)?;
        for &a in &grid.points {
            for &b in &grid.points {
                if a != b {
                    model.evaluate(a, b)?;
                }
            }
        }
        Ok(grid)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, g: usize) -> f64 {
        self.points[g]
    }
}

/// A canonical basis label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState {
    labels: Word,
}

impl FockState {
    pub fn vacuum() -> Self {
        Self { labels: Vec::new() }
    }

    pub fn new(labels: Word) -> Result<Self> {
        if labels.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::DegenerateRapidities(format!(
                "grid indices of {labels:?} are not strictly increasing"
            )));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn particle_count(&self) -> usize {
        self.labels.len()
    }

    pub fn occupied(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.0).collect()
    }
}

/// Finite linear combination of canonical basis states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FockVector {
    terms: BTreeMap<Word, C64>,
}

impl FockVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(state: &FockState) -> Self {
        let mut v = Self::zero();
        v.add_term(state.labels.clone(), ONE);
        v
    }

    pub fn vacuum() -> Self {
        Self::basis(&FockState::vacuum())
    }

    pub fn add_term(&mut self, word: Word, coeff: C64) {
        *self.terms.entry(word).or_insert(ZERO) += coeff;
    }

    pub fn add_scaled(&mut self, alpha: C64, other: &Self) {
        for (w, c) in &other.terms {
            self.add_term(w.clone(), alpha * c);
        }
    }

    pub fn coefficient(&self, word: &[Label]) -> C64 {
        self.terms.get(word).copied().unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.terms.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (w, c) in &self.terms {
            worst = worst.max((c - other.coefficient(w)).norm());
        }
        for (w, c) in &other.terms {
            if !self.terms.contains_key(w) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

/// Grid subsets of size `n` in lexicographic order.
pub fn combinations(size: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, size: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for x in start..size {
            cur.push(x);
            rec(x + 1, size, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n <= size {
        rec(0, size, n, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// All color tuples of length `n`, row-major (first entry most significant).
fn color_tuples(dim: usize, n: usize) -> Vec<Vec<usize>> {
    let count = dim.pow(n as u32);
    (0..count)
        .map(|mut x| {
            let mut t = vec![0; n];
            for slot in (0..n).rev() {
                t[slot] = x % dim;
                x /= dim;
            }
            t
        })
        .collect()
}

fn color_index(dim: usize, word: &[Label]) -> usize {
    word.iter().fold(0, |acc, &(_, c)| acc * dim + c)
}

/// Ordered basis of one particle-number sector.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub sector: usize,
    pub states: Vec<FockState>,
    index: HashMap<Word, usize>,
}

impl SectorBasis {
    pub fn new(grid_len: usize, local_dim: usize, sector: usize) -> Self {
        let mut states = Vec::new();
        for subset in combinations(grid_len, sector) {
            for colors in color_tuples(local_dim, sector) {
                let labels = subset.iter().copied().zip(colors).collect();
                states.push(FockState { labels });
            }
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.labels.clone(), i))
            .collect();
        Self {
            sector,
            states,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, word: &[Label]) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Matrix of an operator on one sector. With an auxiliary site the rows
/// are indexed by `a * dim + state`, `a` the auxiliary color.
#[derive(Clone, Debug)]
pub struct SectorOperator {
    pub sector: usize,
    pub dim: usize,
    pub aux_dim: usize,
    pub matrix: Array2<C64>,
}

impl SectorOperator {
    /// The block matrix as a one-site operator of dimension
    /// `aux_dim * dim`, e.g. for the matrix dump format.
    pub fn to_operator(&self) -> Result<MultiSiteOperator> {
        MultiSiteOperator::new(self.aux_dim * self.dim, 1, self.matrix.clone())
    }
}

type RestrictedKey = (CoefficientKind, u64, Vec<usize>);

pub struct FockSpace {
    model: RMatrixModel,
    grid: RapidityGrid,
    engine: VertexEngine,
    sector_limit: usize,
    restricted: Mutex<HashMap<RestrictedKey, Arc<MultiSiteOperator>>>,
}

impl FockSpace {
    pub fn new(model: RMatrixModel, grid: RapidityGrid) -> Self {
        Self::with_limit(model, grid, DEFAULT_SECTOR_LIMIT)
    }

    pub fn with_limit(model: RMatrixModel, grid: RapidityGrid, sector_limit: usize) -> Self {
        let engine = VertexEngine::with_options(
            model.clone(),
            sector_limit.max(DEFAULT_MAX_ORDER),
            InfinityCoupling::Model,
        );
        Self {
            model,
            grid,
            engine,
            sector_limit,
            restricted: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &RMatrixModel {
        &self.model
    }

    pub fn grid(&self) -> &RapidityGrid {
        &self.grid
    }

    pub fn sector_limit(&self) -> usize {
        self.sector_limit
    }

    pub fn engine(&self) -> &VertexEngine {
        &self.engine
    }

    fn dim(&self) -> usize {
        self.model.local_dim()
    }

    fn check_label(&self, (g, c): Label) -> Result<()> {
        if g >= self.grid.len() {
            return Err(Error::IndexOutOfRange {
                index: g,
                bound: self.grid.len(),
            });
        }
        if c >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: c,
                bound: self.dim(),
            });
        }
        Ok(())
    }

    pub fn basis(&self, sector: usize) -> SectorBasis {
        SectorBasis::new(self.grid.len(), self.dim(), sector)
    }

    /// Expands an arbitrary word over the canonical basis by repeatedly
    /// exchanging out-of-order neighbours.
    pub fn canonicalize(&self, word: &[Label]) -> Result<FockVector> {
        let mut v = FockVector::zero();
        v.add_term(word.to_vec(), ONE);
        self.canonicalize_vector(v)
    }

    fn canonicalize_vector(&self, input: FockVector) -> Result<FockVector> {
        let n = self.dim();
        let mut out = FockVector::zero();
        let mut pending = input.terms;
        while let Some((w, coef)) = pending.pop_first() {
            if coef == ZERO {
                continue;
            }
            for &l in &w {
                self.check_label(l)?;
            }
            let Some(j) = (0..w.len().saturating_sub(1)).find(|&j| w[j].0 >= w[j + 1].0) else {
                out.add_term(w, coef);
                continue;
            };
            let ((gx, c), (gy, d)) = (w[j], w[j + 1]);
            if gx == gy {
                return Err(Error::DegenerateRapidities(format!(
                    "grid point {gx} occupied twice in {w:?}"
                )));
            }
            let r = self
                .model
                .evaluate(self.grid.point(gy), self.grid.point(gx))?;
            let r = r.entries();
            for dp in 0..n {
                for cp in 0..n {
                    let x = r[[dp * n + cp, d * n + c]];
                    if x != ZERO {
                        let mut nw = w.clone();
                        nw[j] = (gy, dp);
                        nw[j + 1] = (gx, cp);
                        *pending.entry(nw).or_insert(ZERO) += coef * x;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `a_c(k_g)` on a vector of canonical words.
    pub fn apply_annihilation(&self, color: usize, g: usize, v: &FockVector) -> Result<FockVector> {
        self.check_label((g, color))?;
        let n = self.dim();
        let mut out = FockVector::zero();
        for (w, &coef) in v.iter() {
            // (already passed, carried color, amplitude)
            let mut carried: Vec<(Word, usize, C64)> = vec![(Vec::new(), color, coef)];
            for (j, &(h, d)) in w.iter().enumerate() {
                if h == g {
                    // Contraction; the exchange term would carry the
                    // annihilator past the only occupant of g and vanish.
                    for (pre, cc, amp) in &carried {
                        if *cc == d {
                            let mut nw = pre.clone();
                            nw.extend_from_slice(&w[j + 1..]);
                            out.add_term(nw, *amp);
                        }
                    }
                    carried.clear();
                    break;
                }
                let r = self
                    .model
                    .evaluate(self.grid.point(g), self.grid.point(h))?;
                let r = r.entries();
                let mut next = Vec::with_capacity(carried.len() * n * n);
                for (pre, cc, amp) in &carried {
                    for cp in 0..n {
                        for l in 0..n {
                            let x = r[[cc * n + l, cp * n + d]];
                            if x != ZERO {
                                let mut nw = pre.clone();
                                nw.push((h, l));
                                next.push((nw, cp, amp * x));
                            }
                        }
                    }
                }
                carried = next;
            }
        }
        out.terms.retain(|_, c| *c != ZERO);
        Ok(out)
    }

    /// `a†_c(k_g)` on a vector of canonical words; `g` must be unoccupied.
    pub fn apply_creation(&self, color: usize, g: usize, v: &FockVector) -> Result<FockVector> {
        self.check_label((g, color))?;
        let mut words = FockVector::zero();
        for (w, &coef) in v.iter() {
            let mut nw = Vec::with_capacity(w.len() + 1);
            nw.push((g, color));
            nw.extend_from_slice(w);
            words.add_term(nw, coef);
        }
        self.canonicalize_vector(words)
    }

    /// The vertex operator restricted to states occupying exactly `subset`
    /// (ascending grid indices): an operator on `subset.len() + 1` sites.
    pub fn restricted_operator(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        subset: &[usize],
    ) -> Result<Arc<MultiSiteOperator>> {
        if subset.len() > self.sector_limit {
            return Err(Error::SectorTooLarge {
                sector: subset.len(),
                limit: self.sector_limit,
            });
        }
        FockState::new(subset.iter().map(|&g| (g, 0)).collect())?;
        for &g in subset {
            self.check_label((g, 0))?;
        }
        let key = (kind, k_inf.to_bits(), subset.to_vec());
        if let Some(hit) = self.restricted.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let op = Arc::new(self.build_restricted(kind, k_inf, subset)?);
        self.restricted
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&op));
        Ok(op)
    }

    fn build_restricted(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        subset: &[usize],
    ) -> Result<MultiSiteOperator> {
        let n = self.dim();
        let size = subset.len();
        let block = n.pow(size as u32);
        let mut op = MultiSiteOperator::zeros(n, size + 1);
        for (col, colors) in color_tuples(n, size).into_iter().enumerate() {
            let word: Word = subset.iter().copied().zip(colors).collect();
            let images = self.series_action(kind, k_inf, &word)?;
            let e = op.entries_mut();
            for a in 0..n {
                for b in 0..n {
                    for (w, &c) in images[a * n + b].iter() {
                        let row = color_index(n, w);
                        e[[a * block + row, b * block + col]] += c;
                    }
                }
            }
        }
        Ok(op)
    }

    /// Term-by-term evaluation of the normal-ordered series on one basis
    /// word. Entry `a * N + b` of the result is `T_ab` applied to the word.
    pub fn series_action(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        word: &[Label],
    ) -> Result<Vec<FockVector>> {
        let n = self.dim();
        let state = FockVector::basis(&FockState::new(word.to_vec())?);
        let mut out = vec![FockVector::zero(); n * n];
        for a in 0..n {
            out[a * n + a].add_scaled(ONE, &state);
        }
        let points: Vec<usize> = word.iter().map(|l| l.0).collect();
        let mut factorial = 1.0;
        for p in 1..=points.len() {
            factorial *= p as f64;
            let sign = if p % 2 == 1 { -1.0 } else { 1.0 };
            let weight = C64::new(sign / factorial, 0.0);
            let tuples = color_tuples(n, p);
            for chosen in combinations(points.len(), p) {
                for order in lexicographic(p) {
                    let tup: Vec<usize> = order
                        .as_slice()
                        .iter()
                        .map(|&i| points[chosen[i]])
                        .collect();
                    let ks: Vec<f64> = tup.iter().map(|&g| self.grid.point(g)).collect();
                    let coeff = self.engine.operator(kind, k_inf, &ks)?;
                    let ce = coeff.entries();
                    for beta in &tuples {
                        let mut st = state.clone();
                        for j in (0..p).rev() {
                            st = self.apply_annihilation(beta[j], tup[j], &st)?;
                            if st.is_empty() {
                                break;
                            }
                        }
                        if st.is_empty() {
                            continue;
                        }
                        let bi = beta.iter().fold(0, |acc, &c| acc * n + c);
                        for alpha in &tuples {
                            let ai = alpha.iter().fold(0, |acc, &c| acc * n + c);
                            let block = n.pow(p as u32);
                            let any = (0..n).any(|a| {
                                (0..n).any(|b| ce[[a * block + ai, b * block + bi]] != ZERO)
                            });
                            if !any {
                                continue;
                            }
                            let mut created = st.clone();
                            for j in 0..p {
                                created = self.apply_creation(alpha[j], tup[j], &created)?;
                            }
                            for a in 0..n {
                                for b in 0..n {
                                    let x = ce[[a * block + ai, b * block + bi]];
                                    if x != ZERO {
                                        out[a * n + b].add_scaled(weight * x, &created);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        for v in &mut out {
            v.terms.retain(|_, c| *c != ZERO);
        }
        Ok(out)
    }

    /// `T_ab(k_inf)` (or its dual) applied to a vector.
    pub fn apply_vertex(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        a: usize,
        b: usize,
        v: &FockVector,
    ) -> Result<FockVector> {
        let n = self.dim();
        let mut out = FockVector::zero();
        for (w, &coef) in v.iter() {
            let subset: Vec<usize> = w.iter().map(|l| l.0).collect();
            let op = self.restricted_operator(kind, k_inf, &subset)?;
            let block = n.pow(subset.len() as u32);
            let col = color_index(n, w);
            for (row, colors) in color_tuples(n, subset.len()).into_iter().enumerate() {
                let x = op.entries()[[a * block + row, b * block + col]];
                if x != ZERO {
                    out.add_term(subset.iter().copied().zip(colors).collect(), coef * x);
                }
            }
        }
        Ok(out)
    }

    /// The vertex operator on a whole sector as an `(N dim) x (N dim)` block
    /// matrix.
    pub fn sector_operator(
        &self,
        kind: CoefficientKind,
        k_inf: f64,
        sector: usize,
    ) -> Result<SectorOperator> {
        if sector > self.sector_limit {
            return Err(Error::SectorTooLarge {
                sector,
                limit: self.sector_limit,
            });
        }
        let n = self.dim();
        let basis = self.basis(sector);
        let dim = basis.len();
        let block = n.pow(sector as u32);
        let mut matrix = Array2::zeros((n * dim, n * dim));
        for (s, subset) in combinations(self.grid.len(), sector)
            .into_iter()
            .enumerate()
        {
            let op = self.restricted_operator(kind, k_inf, &subset)?;
            let offset = s * block;
            for a in 0..n {
                for b in 0..n {
                    for r in 0..block {
                        for c in 0..block {
                            matrix[[a * dim + offset + r, b * dim + offset + c]] =
                                op.entries()[[a * block + r, b * block + c]];
                        }
                    }
                }
            }
        }
        Ok(SectorOperator {
            sector,
            dim,
            aux_dim: n,
            matrix,
        })
    }

    pub fn sector_operator_t(&self, k_inf: f64, sector: usize) -> Result<SectorOperator> {
        self.sector_operator(CoefficientKind::Direct, k_inf, sector)
    }

    pub fn sector_operator_t_bar(&self, k_inf: f64, sector: usize) -> Result<SectorOperator> {
        self.sector_operator(CoefficientKind::Dual, k_inf, sector)
    }

    fn states_up_to(&self, cap: usize) -> Vec<FockState> {
        (0..=cap.min(self.grid.len()))
            .flat_map(|n| self.basis(n).states)
            .collect()
    }

    /// `R_{inf 1} R_{inf 2} ... R_{inf n}` on the given subset: the product
    /// form of the vertex operator.
    pub fn product_form(&self, k_inf: f64, subset: &[usize]) -> Result<MultiSiteOperator> {
        let n = self.dim();
        let total = subset.len() + 1;
        let factors = subset
            .iter()
            .enumerate()
            .map(|(j, &g)| {
                self.model
                    .evaluate(k_inf, self.grid.point(g))?
                    .embed((1, j + 2), total)
            })
            .collect::<Result<Vec<_>>>()?;
        if factors.is_empty() {
            return Ok(MultiSiteOperator::identity(n, 1));
        }
        let refs: Vec<&MultiSiteOperator> = factors.iter().collect();
        chain_product(&refs)
    }

    /// Series against product form, every subset of size at most `cap`.
    pub fn check_product_form(&self, k_inf: f64, cap: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for size in 0..=cap.min(self.grid.len()) {
            for subset in combinations(self.grid.len(), size) {
                let series = self.restricted_operator(CoefficientKind::Direct, k_inf, &subset)?;
                worst = worst.max(max_abs_distance(
                    &series,
                    &self.product_form(k_inf, &subset)?,
                )?);
            }
        }
        Ok(worst)
    }

    /// Residuals of the explicit actions on the vacuum, on one-particle
    /// states and on two-particle words (both orders of the two rapidities,
    /// straightened with [`Self::canonicalize`]). Entry `n` is sector `n`.
    pub fn check_sector_closed_forms(&self, k_inf: f64) -> Result<[f64; 3]> {
        let n = self.dim();
        let direct = CoefficientKind::Direct;
        let mut res = [0.0f64; 3];
        let vac = FockVector::vacuum();
        for a in 0..n {
            for b in 0..n {
                let mut expected = FockVector::zero();
                if a == b {
                    expected = vac.clone();
                }
                res[0] = res[0].max(
                    self.apply_vertex(direct, k_inf, a, b, &vac)?
                        .distance(&expected),
                );
            }
        }
        for g in 0..self.grid.len() {
            let r = self.model.evaluate(k_inf, self.grid.point(g))?;
            let r = r.entries();
            for c in 0..n {
                let psi = self.canonicalize(&[(g, c)])?;
                for a in 0..n {
                    for b in 0..n {
                        let mut expected = FockVector::zero();
                        for l in 0..n {
                            expected.add_term(vec![(g, l)], r[[a * n + l, b * n + c]]);
                        }
                        let got = self.apply_vertex(direct, k_inf, a, b, &psi)?;
                        res[1] = res[1].max(got.distance(&expected));
                    }
                }
            }
        }
        for g2 in 0..self.grid.len() {
            for g3 in 0..self.grid.len() {
                if g2 == g3 {
                    continue;
                }
                let r2 = self.model.evaluate(k_inf, self.grid.point(g2))?;
                let r3 = self.model.evaluate(k_inf, self.grid.point(g3))?;
                let (r2, r3) = (r2.entries(), r3.entries());
                for c in 0..n {
                    for d in 0..n {
                        let psi = self.canonicalize(&[(g2, c), (g3, d)])?;
                        for a in 0..n {
                            for b in 0..n {
                                let mut words = FockVector::zero();
                                for x in 0..n {
                                    for l in 0..n {
                                        for lp in 0..n {
                                            let coef = r2[[a * n + l, x * n + c]]
                                                * r3[[x * n + lp, b * n + d]];
                                            if coef != ZERO {
                                                words.add_term(vec![(g2, l), (g3, lp)], coef);
                                            }
                                        }
                                    }
                                }
                                let expected = self.canonicalize_vector(words)?;
                                let got = self.apply_vertex(direct, k_inf, a, b, &psi)?;
                                res[2] = res[2].max(got.distance(&expected));
                            }
                        }
                    }
                }
            }
        }
        Ok(res)
    }

    /// Two-particle action against the product of one-particle actions,
    /// multiplied in the auxiliary space.
    pub fn check_coproduct(&self, k_inf: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for pair in combinations(self.grid.len(), 2) {
            let two = self.restricted_operator(CoefficientKind::Direct, k_inf, &pair)?;
            let first = self
                .restricted_operator(CoefficientKind::Direct, k_inf, &pair[..1])?
                .place(&[1, 2], 3)?;
            let second = self
                .restricted_operator(CoefficientKind::Direct, k_inf, &pair[1..])?
                .place(&[1, 3], 3)?;
            worst = worst.max(max_abs_distance(&two, &first.matmul(&second)?)?);
        }
        Ok(worst)
    }

    /// Creation and annihilation exchange relations of the vertex operator,
    /// on every basis state of sectors up to `cap`.
    pub fn check_well_bred(&self, k_inf: f64, cap: usize) -> Result<f64> {
        let n = self.dim();
        let direct = CoefficientKind::Direct;
        let mut worst = 0.0f64;
        for state in self.states_up_to(cap) {
            let psi = FockVector::basis(&state);
            let occupied = state.occupied();
            let t_psi: Vec<FockVector> = (0..n * n)
                .map(|ab| self.apply_vertex(direct, k_inf, ab / n, ab % n, &psi))
                .collect::<Result<_>>()?;
            for g in 0..self.grid.len() {
                let k = self.grid.point(g);
                let r_create = self.model.evaluate(k_inf, k)?;
                let r_annihilate = self.model.evaluate(k, k_inf)?;
                let (rc, ra) = (r_create.entries(), r_annihilate.entries());
                for c in 0..n {
                    if !occupied.contains(&g) {
                        let created = self.apply_creation(c, g, &psi)?;
                        for a in 0..n {
                            for b in 0..n {
                                let lhs = self.apply_vertex(direct, k_inf, a, b, &created)?;
                                let mut rhs = FockVector::zero();
                                for l in 0..n {
                                    for cp in 0..n {
                                        let x = rc[[a * n + l, cp * n + c]];
                                        if x != ZERO {
                                            let t =
                                                self.apply_creation(l, g, &t_psi[cp * n + b])?;
                                            rhs.add_scaled(x, &t);
                                        }
                                    }
                                }
                                worst = worst.max(lhs.distance(&rhs));
                            }
                        }
                    }
                    let removed = self.apply_annihilation(c, g, &psi)?;
                    for a in 0..n {
                        for b in 0..n {
                            let lhs = self.apply_vertex(direct, k_inf, a, b, &removed)?;
                            let mut rhs = FockVector::zero();
                            for cp in 0..n {
                                for l in 0..n {
                                    let x = ra[[c * n + a, l * n + cp]];
                                    if x != ZERO {
                                        let t =
                                            self.apply_annihilation(l, g, &t_psi[cp * n + b])?;
                                        rhs.add_scaled(x, &t);
                                    }
                                }
                            }
                            worst = worst.max(lhs.distance(&rhs));
                        }
                    }
                }
            }
        }
        Ok(worst)
    }

    /// `R12 T1 T2 = T2 T1 R12` with `T1 = T(k1)`, `T2 = T(k2)` on two
    /// auxiliary sites, per occupied subset of size at most `cap`.
    pub fn check_frt(&self, k1: f64, k2: f64, cap: usize) -> Result<f64> {
        let r = self.model.evaluate(k1, k2)?;
        let mut worst = 0.0f64;
        for size in 0..=cap.min(self.grid.len()) {
            let total = size + 2;
            let r12 = r.embed((1, 2), total)?;
            let mut sites1 = vec![1];
            let mut sites2 = vec![2];
            sites1.extend(3..=total);
            sites2.extend(3..=total);
            for subset in combinations(self.grid.len(), size) {
                let t1 = self
                    .restricted_operator(CoefficientKind::Direct, k1, &subset)?
                    .place(&sites1, total)?;
                let t2 = self
                    .restricted_operator(CoefficientKind::Direct, k2, &subset)?
                    .place(&sites2, total)?;
                let lhs = chain_product(&[&r12, &t1, &t2])?;
                let rhs = chain_product(&[&t2, &t1, &r12])?;
                worst = worst.max(max_abs_distance(&lhs, &rhs)?);
            }
        }
        Ok(worst)
    }

    /// Products of the series and the dual series in both orders against
    /// the identity, per occupied subset of size at most `cap`.
    pub fn check_inverse(&self, k_inf: f64, cap: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for size in 0..=cap.min(self.grid.len()) {
            let id = MultiSiteOperator::identity(self.dim(), size + 1);
            for subset in combinations(self.grid.len(), size) {
                let t = self.restricted_operator(CoefficientKind::Direct, k_inf, &subset)?;
                let tb = self.restricted_operator(CoefficientKind::Dual, k_inf, &subset)?;
                worst = worst.max(max_abs_distance(&t.matmul(&tb)?, &id)?);
                worst = worst.max(max_abs_distance(&tb.matmul(&t)?, &id)?);
            }
        }
        Ok(worst)
    }

    /// Dressed annihilator `â_i(k_g) = sum_j T̄(k_g)_ij a_j(k_g)`.
    pub fn dressed_annihilation(&self, i: usize, g: usize, v: &FockVector) -> Result<FockVector> {
        let k = self.grid.point(g);
        let mut out = FockVector::zero();
        for j in 0..self.dim() {
            let removed = self.apply_annihilation(j, g, v)?;
            out.add_scaled(
                ONE,
                &self.apply_vertex(CoefficientKind::Dual, k, i, j, &removed)?,
            );
        }
        Ok(out)
    }

    /// Dressed creator `â†_j(k_g) = sum_i a†_i(k_g) T(k_g)_ij`; `g` must be
    /// unoccupied in `v`.
    pub fn dressed_creation(&self, j: usize, g: usize, v: &FockVector) -> Result<FockVector> {
        let k = self.grid.point(g);
        let mut out = FockVector::zero();
        for i in 0..self.dim() {
            let t = self.apply_vertex(CoefficientKind::Direct, k, i, j, v)?;
            out.add_scaled(ONE, &self.apply_creation(i, g, &t)?);
        }
        Ok(out)
    }

    /// Exchange relations of the dressed oscillators, which follow the
    /// algebra of the inverse R-matrix, on all basis states of sectors up to
    /// `cap`. Creation at an occupied grid point is skipped.
    pub fn check_tau_isomorphism(&self, cap: usize) -> Result<f64> {
        let n = self.dim();
        let size = self.grid.len();
        let mut worst = 0.0f64;
        for state in self.states_up_to(cap) {
            let psi = FockVector::basis(&state);
            let occupied = state.occupied();
            for g1 in 0..size {
                for g2 in 0..size {
                    if g1 == g2 {
                        if occupied.contains(&g1) {
                            continue;
                        }
                        for i in 0..n {
                            for j in 0..n {
                                let lhs = self.dressed_annihilation(
                                    i,
                                    g1,
                                    &self.dressed_creation(j, g1, &psi)?,
                                )?;
                                let expected = if i == j {
                                    psi.clone()
                                } else {
                                    FockVector::zero()
                                };
                                worst = worst.max(lhs.distance(&expected));
                            }
                        }
                        continue;
                    }
                    let r12 = self
                        .model
                        .evaluate(self.grid.point(g1), self.grid.point(g2))?;
                    let r21 = self
                        .model
                        .evaluate(self.grid.point(g2), self.grid.point(g1))?;
                    let (r12, r21) = (r12.entries(), r21.entries());
                    for i in 0..n {
                        for j in 0..n {
                            let lhs = self.dressed_annihilation(
                                i,
                                g1,
                                &self.dressed_annihilation(j, g2, &psi)?,
                            )?;
                            let mut rhs = FockVector::zero();
                            for k in 0..n {
                                let inner = self.dressed_annihilation(k, g1, &psi)?;
                                for l in 0..n {
                                    let x = r12[[i * n + j, k * n + l]];
                                    if x != ZERO {
                                        rhs.add_scaled(
                                            x,
                                            &self.dressed_annihilation(l, g2, &inner)?,
                                        );
                                    }
                                }
                            }
                            worst = worst.max(lhs.distance(&rhs));

                            if occupied.contains(&g2) {
                                continue;
                            }
                            let lhs = self.dressed_annihilation(
                                i,
                                g1,
                                &self.dressed_creation(j, g2, &psi)?,
                            )?;
                            let mut rhs = FockVector::zero();
                            for k in 0..n {
                                let inner = self.dressed_annihilation(k, g1, &psi)?;
                                for l in 0..n {
                                    let x = r21[[l * n + i, j * n + k]];
                                    if x != ZERO {
                                        rhs.add_scaled(x, &self.dressed_creation(l, g2, &inner)?);
                                    }
                                }
                            }
                            worst = worst.max(lhs.distance(&rhs));

                            if occupied.contains(&g1) {
                                continue;
                            }
                            let lhs =
                                self.dressed_creation(i, g1, &self.dressed_creation(j, g2, &psi)?)?;
                            let mut rhs = FockVector::zero();
                            for k in 0..n {
                                let inner = self.dressed_creation(k, g1, &psi)?;
                                for l in 0..n {
                                    let x = r12[[k * n + l, i * n + j]];
                                    if x != ZERO {
                                        rhs.add_scaled(x, &self.dressed_creation(l, g2, &inner)?);
                                    }
                                }
                            }
                            worst = worst.max(lhs.distance(&rhs));
                        }
                    }
                }
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(model: RMatrixModel, points: &[f64]) -> FockSpace {
        let grid = RapidityGrid::for_model(points.to_vec(), &model).unwrap();
        FockSpace::with_limit(model, grid, 4)
    }

    fn yang() -> FockSpace {
        space(RMatrixModel::yangian(2, 1.0).unwrap(), &[-1.0, 0.5, 2.0])
    }

    #[test]
    fn basis_sizes() {
        let f = yang();
        assert_eq!(f.basis(0).len(), 1);
        assert_eq!(f.basis(1).len(), 6);
        assert_eq!(f.basis(2).len(), 12);
        assert_eq!(f.basis(3).len(), 8);
        assert_eq!(f.basis(4).len(), 0);
    }

    #[test]
    fn canonicalize_sorted_word_is_itself() {
        let f = yang();
        let v = f.canonicalize(&[(0, 1), (2, 0)]).unwrap();
        assert_eq!(v.coefficient(&[(0, 1), (2, 0)]), ONE);
        assert_eq!(v.iter().count(), 1);
    }

    #[test]
    fn canonicalize_swap_reads_r_entries() {
        let f = yang();
        let n = 2;
        let r = f.model().evaluate(0.5, 2.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = f.canonicalize(&[(2, i), (1, j)]).unwrap();
                for dp in 0..n {
                    for cp in 0..n {
                        let expected = r.entries()[[dp * n + cp, j * n + i]];
                        assert!((v.coefficient(&[(1, dp), (2, cp)]) - expected).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn canonicalize_with_permutation_model_swaps_colors() {
        let f = space(RMatrixModel::permutation(2), &[0.0, 1.0]);
        let v = f.canonicalize(&[(1, 0), (0, 1)]).unwrap();
        let mut expected = FockVector::zero();
        expected.add_term(vec![(0, 0), (1, 1)], ONE);
        assert_eq!(v, expected);
    }

    #[test]
    fn canonicalize_rejects_double_occupancy() {
        assert!(matches!(
            yang().canonicalize(&[(1, 0), (0, 0), (1, 1)]),
            Err(Error::DegenerateRapidities(_))
        ));
    }

    #[test]
    fn annihilation_examples() {
        let f = yang();
        let vac = FockVector::vacuum();
        assert!(f.apply_annihilation(0, 1, &vac).unwrap().is_empty());
        for i in 0..2 {
            for j in 0..2 {
                let one = FockVector::basis(&FockState::new(vec![(1, j)]).unwrap());
                let out = f.apply_annihilation(i, 1, &one).unwrap();
                let expected = if i == j {
                    vac.clone()
                } else {
                    FockVector::zero()
                };
                assert_eq!(out, expected);
                assert!(f.apply_annihilation(i, 2, &one).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn creation_then_annihilation_at_fresh_point() {
        let f = yang();
        let psi = FockVector::basis(&FockState::new(vec![(0, 1), (2, 0)]).unwrap());
        for c in 0..2 {
            let up = f.apply_creation(c, 1, &psi).unwrap();
            let down = f.apply_annihilation(c, 1, &up).unwrap();
            assert!(down.distance(&psi) < 1e-14);
        }
        assert!(f.apply_creation(0, 0, &psi).is_err());
    }

    #[test]
    fn sector_zero_is_identity() {
        let s = yang().sector_operator_t(0.25, 0).unwrap();
        assert_eq!(s.matrix, Array2::<C64>::eye(2));
    }

    #[test]
    fn series_matches_product_form() {
        let f = yang();
        assert!(f.check_product_form(0.25, 3).unwrap() < 1e-12);
        let r = f.check_sector_closed_forms(0.25).unwrap();
        assert!(r.iter().all(|x| *x < 1e-12), "{r:?}");
        assert!(f.check_coproduct(0.25).unwrap() < 1e-12);
    }

    #[test]
    fn identities_on_yangian() {
        let f = yang();
        assert!(f.check_well_bred(0.25, 2).unwrap() < 1e-12);
        assert!(f.check_frt(0.25, -0.6, 2).unwrap() < 1e-12);
        assert!(f.check_inverse(0.25, 2).unwrap() < 1e-12);
        assert!(f.check_tau_isomorphism(2).unwrap() < 1e-12);
    }

    #[test]
    fn sector_limit_enforced() {
        let f = space(
            RMatrixModel::yangian(2, 1.0).unwrap(),
            &[0.0, 1.0, 2.0, 3.0],
        );
        let f = FockSpace::with_limit(f.model().clone(), f.grid().clone(), 2);
        assert!(matches!(
            f.sector_operator_t(0.25, 3),
            Err(Error::SectorTooLarge {
                sector: 3,
                limit: 2
            })
        ));
    }
}
