//! Commuting charges `H(n) = sum_k k^n a†(k) a(k)` on the grid, their flows
//! and their commutation with the vertex operator.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, FockState, FockVector, RapidityGrid, SectorBasis, SectorOperator};
use crate::tensor::{C64, ZERO};
use crate::vertex::CoefficientKind;

pub const DEFAULT_MAX_DEGREE: u32 = 6;

#[derive(Clone, Debug)]
pub struct HierarchyCharge {
    degree: u32,
    grid: RapidityGrid,
    local_dim: usize,
}

impl HierarchyCharge {
    pub fn new(degree: u32, grid: RapidityGrid, local_dim: usize) -> Result<Self> {
        Self::with_max_degree(degree, grid, local_dim, DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree(
        degree: u32,
        grid: RapidityGrid,
        local_dim: usize,
        max_degree: u32,
    ) -> Result<Self> {
        if degree > max_degree {
            return Err(Error::Config(format!(
                "degree {degree} exceeds the maximum {max_degree}"
            )));
        }
        Ok(Self {
            degree,
            grid,
            local_dim,
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    fn power(&self, g: usize) -> f64 {
        self.grid.point(g).powi(self.degree as i32)
    }

    /// Sum of `k^n` over the occupied grid points.
    pub fn eigenvalue(&self, state: &FockState) -> f64 {
        state.labels().iter().map(|&(g, _)| self.power(g)).sum()
    }

    fn eigenvalue_of_word(&self, word: &[(usize, usize)]) -> f64 {
        word.iter().map(|&(g, _)| self.power(g)).sum()
    }

    pub fn charge_matrix(&self, sector: usize, sector_limit: usize) -> Result<SectorOperator> {
        if sector > sector_limit {
            return Err(Error::SectorTooLarge {
                sector,
                limit: sector_limit,
            });
        }
        let basis = SectorBasis::new(self.grid.len(), self.local_dim, sector);
        let mut matrix = Array2::zeros((basis.len(), basis.len()));
        for (i, s) in basis.states.iter().enumerate() {
            matrix[[i, i]] = C64::new(self.eigenvalue(s), 0.0);
        }
        Ok(SectorOperator {
            sector,
            dim: basis.len(),
            aux_dim: 1,
            matrix,
        })
    }
}

fn phase(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

fn commutator_residual(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let c = a.dot(b) - b.dot(a);
    c.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `e^{itH} a(k) e^{-itH} = e^{-itk^n} a(k)` and the creation counterpart,
/// on every basis state of sectors up to `cap`. The exponentials are
/// diagonal, so each component just picks up a phase.
pub fn check_flow(space: &FockSpace, charge: &HierarchyCharge, cap: usize, t: f64) -> Result<f64> {
    let n = space.model().local_dim();
    let grid_len = space.grid().len();
    let mut worst = 0.0f64;
    let conjugated = |v: &FockVector, h_in: f64| -> FockVector {
        let mut out = FockVector::zero();
        for (w, c) in v.iter() {
            out.add_term(
                w.clone(),
                c * phase(t * (charge.eigenvalue_of_word(w) - h_in)),
            );
        }
        out
    };
    for sector in 0..=cap.min(grid_len) {
        for state in space.basis(sector).states {
            let psi = FockVector::basis(&state);
            let h = charge.eigenvalue(&state);
            let occupied = state.occupied();
            for g in 0..grid_len {
                let kn = charge.power(g);
                for c in 0..n {
                    let down = space.apply_annihilation(c, g, &psi)?;
                    let mut expected = FockVector::zero();
                    expected.add_scaled(phase(t * -kn), &down);
                    worst = worst.max(conjugated(&down, h).distance(&expected));
                    if occupied.contains(&g) {
                        continue;
                    }
                    let up = space.apply_creation(c, g, &psi)?;
                    let mut expected = FockVector::zero();
                    expected.add_scaled(phase(t * kn), &up);
                    worst = worst.max(conjugated(&up, h).distance(&expected));
                }
            }
        }
    }
    Ok(worst)
}

/// Matrix commutator of the vertex operator with `I ⊗ H(n)` on each sector.
pub fn check_integral_of_motion(
    space: &FockSpace,
    k_inf: f64,
    cap: usize,
    degrees: &[u32],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for sector in 0..=cap.min(space.grid().len()) {
        let t = space.sector_operator(CoefficientKind::Direct, k_inf, sector)?;
        for &d in degrees {
            let charge = HierarchyCharge::new(d, space.grid().clone(), space.model().local_dim())?;
            let h = charge.charge_matrix(sector, space.sector_limit())?;
            let mut lifted = Array2::zeros(t.matrix.dim());
            for a in 0..t.aux_dim {
                for i in 0..h.dim {
                    lifted[[a * t.dim + i, a * t.dim + i]] = h.matrix[[i, i]];
                }
            }
            worst = worst.max(commutator_residual(&t.matrix, &lifted));
        }
    }
    Ok(worst)
}

/// `[H(m), H(n)]` over all listed degree pairs and sectors up to `cap`.
pub fn check_abelian(
    grid: &RapidityGrid,
    local_dim: usize,
    cap: usize,
    degrees: &[u32],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for sector in 0..=cap.min(grid.len()) {
        let mats = degrees
            .iter()
            .map(|&d| HierarchyCharge::new(d, grid.clone(), local_dim)?.charge_matrix(sector, cap))
            .collect::<Result<Vec<_>>>()?;
        for a in &mats {
            for b in &mats {
                worst = worst.max(commutator_residual(&a.matrix, &b.matrix));
            }
        }
    }
    Ok(worst)
}

/// True when the matrix is real, diagonal and constant across colors of
/// the same occupied subset.
pub fn is_color_blind_diagonal(op: &SectorOperator, basis: &SectorBasis) -> bool {
    let m = &op.matrix;
    let off_diagonal_zero = m.indexed_iter().all(|((r, c), z)| r == c || *z == ZERO);
    let real = m.diag().iter().all(|z| z.im == 0.0);
    let blind = basis.states.iter().enumerate().all(|(i, s)| {
        basis
            .states
            .iter()
            .enumerate()
            .all(|(j, t)| s.occupied() != t.occupied() || m[[i, i]] == m[[j, j]])
    });
    off_diagonal_zero && real && blind
}
