//! Dense complex operators on tensor products of identical local spaces.
//!
//! An operator on `m` sites of dimension `N` is stored as an `N^m x N^m`
//! matrix whose row and column indices are row-major multi-indices over
//! the sites, site 1 being the most significant digit. Sites are numbered
//! from 1 in every public function.

use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct MultiSiteOperator {
    site_dim: usize,
    site_count: usize,
    entries: Array2<C64>,
}

impl MultiSiteOperator {
    pub fn new(site_dim: usize, site_count: usize, entries: Array2<C64>) -> Result<Self> {
        if site_dim < 2 {
            return Err(Error::DimensionMismatch(format!(
                "site dimension must be at least 2, got {site_dim}"
            )));
        }
        let dim = checked_dim(site_dim, site_count)?;
        if entries.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim}x{dim} entries for N={site_dim}, m={site_count}, got {:?}",
                entries.dim()
            )));
        }
        Ok(Self {
            site_dim,
            site_count,
            entries,
        })
    }

    pub fn identity(site_dim: usize, site_count: usize) -> Self {
        let dim = site_dim.pow(site_count as u32);
        Self {
            site_dim,
            site_count,
            entries: Array2::eye(dim),
        }
    }

    pub fn zeros(site_dim: usize, site_count: usize) -> Self {
        let dim = site_dim.pow(site_count as u32);
        Self {
            site_dim,
            site_count,
            entries: Array2::zeros((dim, dim)),
        }
    }

    /// The two-site swap `P = sum_ij E_ij (x) E_ji`.
    pub fn permutation(site_dim: usize) -> Self {
        let mut op = Self::zeros(site_dim, 2);
        for a in 0..site_dim {
            for b in 0..site_dim {
                op.entries[[a * site_dim + b, b * site_dim + a]] = ONE;
            }
        }
        op
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Array2<C64> {
        &mut self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|z| *z == ZERO)
    }

    fn stride(&self, site: usize) -> usize {
        self.site_dim.pow((self.site_count - site) as u32)
    }

    /// Places a two-site operator on sites `(i, j)` of an `total_sites`-site
    /// space: first tensor slot on site `i`, second on site `j`.
    pub fn embed(&self, sites: (usize, usize), total_sites: usize) -> Result<Self> {
        if self.site_count != 2 {
            return Err(Error::DimensionMismatch(format!(
                "embed expects a two-site operator, got {} sites",
                self.site_count
            )));
        }
        self.place(&[sites.0, sites.1], total_sites)
    }

    /// Generalised embedding: slot `t` of `self` acts on site `sites[t]`,
    /// identity on every site not listed.
    pub fn place(&self, sites: &[usize], total_sites: usize) -> Result<Self> {
        if sites.len() != self.site_count {
            return Err(Error::DimensionMismatch(format!(
                "{} target sites given for a {}-site operator",
                sites.len(),
                self.site_count
            )));
        }
        validate_sites(sites, total_sites)?;
        let n = self.site_dim;
        checked_dim(n, total_sites)?;
        let mut out = Self::zeros(n, total_sites);
        let strides: Vec<usize> = sites.iter().map(|&s| out.stride(s)).collect();
        let rest: Vec<usize> = (1..=total_sites).filter(|s| !sites.contains(s)).collect();
        let rest_strides: Vec<usize> = rest.iter().map(|&s| out.stride(s)).collect();
        let slot_offsets = digit_offsets(n, &strides);
        let rest_offsets = digit_offsets(n, &rest_strides);
        for &base in &rest_offsets {
            for (a, &ra) in slot_offsets.iter().enumerate() {
                for (b, &cb) in slot_offsets.iter().enumerate() {
                    let v = self.entries[[a, b]];
                    if v != ZERO {
                        out.entries[[base + ra, base + cb]] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            site_dim: self.site_dim,
            site_count: self.site_count,
            entries: self.entries.dot(&other.entries),
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            site_dim: self.site_dim,
            site_count: self.site_count,
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        Self {
            site_dim: self.site_dim,
            site_count: self.site_count,
            entries: self.entries.mapv(|z| z * alpha),
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: C64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        self.entries.scaled_add(alpha, &other.entries);
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            site_dim: self.site_dim,
            site_count: self.site_count,
            entries: &self.entries - &other.entries,
        })
    }

    /// `embed(two_site, sites) * self`, without materialising the embedding.
    pub fn left_mul_two_site(&self, two_site: &Self, sites: (usize, usize)) -> Result<Self> {
        let (groups, op) = self.two_site_groups(two_site, sites)?;
        let mut out = Array2::zeros(self.entries.dim());
        let p2 = groups[0].len();
        let mut buf = vec![ZERO; p2];
        for idx in &groups {
            for c in 0..self.dim() {
                for (q, &r) in idx.iter().enumerate() {
                    buf[q] = self.entries[[r, c]];
                }
                for (p, &r) in idx.iter().enumerate() {
                    let mut acc = ZERO;
                    for q in 0..p2 {
                        acc += op[[p, q]] * buf[q];
                    }
                    out[[r, c]] = acc;
                }
            }
        }
        Ok(Self {
            site_dim: self.site_dim,
            site_count: self.site_count,
            entries: out,
        })
    }

    /// `self * embed(two_site, sites)`, without materialising the embedding.
    pub fn right_mul_two_site(&self, two_site: &Self, sites: (usize, usize)) -> Result<Self> {
        let (groups, op) = self.two_site_groups(two_site, sites)?;
        let mut out = Array2::zeros(self.entries.dim());
        let p2 = groups[0].len();
        let mut buf = vec![ZERO; p2];
        for idx in &groups {
            for r in 0..self.dim() {
                for (p, &c) in idx.iter().enumerate() {
                    buf[p] = self.entries[[r, c]];
                }
                for (q, &c) in idx.iter().enumerate() {
                    let mut acc = ZERO;
                    for p in 0..p2 {
                        acc += buf[p] * op[[p, q]];
                    }
                    out[[r, c]] = acc;
                }
            }
        }
        Ok(Self {
            site_dim: self.site_dim,
            site_count: self.site_count,
            entries: out,
        })
    }

    /// Index groups touched by a two-site operator on `sites`: one group per
    /// configuration of the remaining sites, each listing the `N^2` indices in
    /// the two-site operator's own ordering.
    fn two_site_groups<'a>(
        &self,
        two_site: &'a Self,
        sites: (usize, usize),
    ) -> Result<(Vec<Vec<usize>>, &'a Array2<C64>)> {
        if two_site.site_count != 2 || two_site.site_dim != self.site_dim {
            return Err(Error::DimensionMismatch(format!(
                "expected a two-site operator with N={}, got N={}, m={}",
                self.site_dim, two_site.site_dim, two_site.site_count
            )));
        }
        validate_sites(&[sites.0, sites.1], self.site_count)?;
        let n = self.site_dim;
        let slot = digit_offsets(n, &[self.stride(sites.0), self.stride(sites.1)]);
        let rest_strides: Vec<usize> = (1..=self.site_count)
            .filter(|&s| s != sites.0 && s != sites.1)
            .map(|s| self.stride(s))
            .collect();
        let groups = digit_offsets(n, &rest_strides)
            .into_iter()
            .map(|base| slot.iter().map(|o| base + o).collect())
            .collect();
        Ok((groups, &two_site.entries))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.site_dim != other.site_dim || self.site_count != other.site_count {
            return Err(Error::DimensionMismatch(format!(
                "(N={}, m={}) vs (N={}, m={})",
                self.site_dim, self.site_count, other.site_dim, other.site_count
            )));
        }
        Ok(())
    }

    /// Text dump: header `N m`, then one `row col re im` line per entry.
    pub fn to_dump(&self) -> String {
        let mut s = String::with_capacity(64 * self.dim() * self.dim() + 16);
        let _ = writeln!(s, "{} {}", self.site_dim, self.site_count);
        for ((r, c), z) in self.entries.indexed_iter() {
            let _ = writeln!(s, "{r} {c} {:.16e} {:.16e}", z.re, z.im);
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix dump".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse(format!("bad header line `{header}`")));
        }
        let site_dim: usize = parse_field(head[0], "N")?;
        let site_count: usize = parse_field(head[1], "m")?;
        let dim = checked_dim(site_dim, site_count)?;
        let mut entries = Array2::zeros((dim, dim));
        let mut seen = vec![false; dim * dim];
        let mut count = 0usize;
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("bad entry line `{line}`")));
            }
            let r: usize = parse_field(f[0], "row")?;
            let c: usize = parse_field(f[1], "col")?;
            if r >= dim || c >= dim {
                return Err(Error::Parse(format!(
                    "entry ({r}, {c}) outside {dim}x{dim}"
                )));
            }
            if std::mem::replace(&mut seen[r * dim + c], true) {
                return Err(Error::Parse(format!("duplicate entry ({r}, {c})")));
            }
            entries[[r, c]] = C64::new(parse_field(f[2], "re")?, parse_field(f[3], "im")?);
            count += 1;
        }
        if count != dim * dim {
            return Err(Error::Parse(format!(
                "expected {} entries, found {count}",
                dim * dim
            )));
        }
        Self::new(site_dim, site_count, entries)
    }
}

/// Left-to-right product, first element leftmost.
pub fn chain_product(ops: &[&MultiSiteOperator]) -> Result<MultiSiteOperator> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::DimensionMismatch("empty operator list".into()))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, op| acc.matmul(op))
}

/// Max-abs entrywise distance.
pub fn max_abs_distance(a: &MultiSiteOperator, b: &MultiSiteOperator) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.entries
        .iter()
        .zip(b.entries.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm())))
}

fn checked_dim(site_dim: usize, site_count: usize) -> Result<usize> {
    u32::try_from(site_count)
        .ok()
        .and_then(|m| site_dim.checked_pow(m))
        .filter(|d| d.checked_mul(*d).is_some())
        .ok_or_else(|| {
            Error::DimensionMismatch(format!("N={site_dim}, m={site_count} is too large"))
        })
}

fn validate_sites(sites: &[usize], total: usize) -> Result<()> {
    for (t, &s) in sites.iter().enumerate() {
        if s == 0 || s > total {
            return Err(Error::IndexOutOfRange {
                index: s,
                bound: total,
            });
        }
        if sites[..t].contains(&s) {
            return Err(Error::DimensionMismatch(format!("site {s} listed twice")));
        }
    }
    Ok(())
}

/// All offsets `sum_t digit_t * strides[t]` in row-major digit order.
fn digit_offsets(n: usize, strides: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &s in strides {
        offsets = offsets
            .iter()
            .flat_map(|&o| (0..n).map(move |d| o + d * s))
            .collect();
    }
    offsets
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from `{s}`")))
}
