//! Stationary state of the master equation and steady-state expectation
//! values.

use faer::Mat;

use crate::coupling::CouplingMatrices;
use crate::hilbert::{self, lowering_operator, raising_operator, ProductBasis, Superoperator};
use crate::sparse::SparseMatrix;
use crate::{linalg, Error, Result, C64};

/// Singular values of the `q = 0` block below this count towards the null
/// space.
pub const NULL_SPACE_TOL: f64 = 1e-9;

/// Bound on `‖L vec(σ)‖₂` for an accepted steady state.
pub const RESIDUAL_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-10;

/// A Hermitian, unit-trace `2^N × 2^N` density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: ProductBasis,
    data: Mat<C64>,
}

impl DensityMatrix {
    pub fn new(basis: ProductBasis, data: Mat<C64>) -> Result<Self> {
        let d = basis.dimension();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: data.nrows() });
        }
        let mut trace = C64::new(0.0, 0.0);
        for i in 0..d {
            trace += data[(i, i)];
            for j in 0..i {
                if (data[(i, j)] - data[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidConfiguration("density matrix not Hermitian".into()));
                }
            }
        }
        if (trace - 1.0).norm() > HERMITIAN_TOL {
            return Err(Error::InvalidConfiguration(format!("density matrix trace {trace}")));
        }
        Ok(Self { basis, data })
    }

    /// All atoms in the ground state.
    pub fn ground(basis: ProductBasis) -> Self {
        let d = basis.dimension();
        let mut data = Mat::<C64>::zeros(d, d);
        data[(0, 0)] = C64::new(1.0, 0.0);
        Self { basis, data }
    }

    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.data
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.data)?.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// Solves `L vec(σ) = 0`, `tr σ = 1` inside the `q = 0` sector.
///
/// One of the rows belonging to a diagonal element is replaced by the trace
/// constraint; those rows are linearly dependent because the Liouvillian
/// preserves the trace.
pub fn steady_state(superop: &Superoperator) -> Result<DensityMatrix> {
    let basis = *superop.basis();
    let d = basis.dimension();
    let block = hilbert::sector_block(superop, 0);
    let n = block.indices.len();

    let singular = linalg::singular_values(&block.matrix)?;
    let null_dim = singular.iter().filter(|&&s| s < NULL_SPACE_TOL).count();
    if null_dim > 1 {
        return Err(Error::NonUniqueSteadyState { dimension: null_dim });
    }

    let is_diagonal: Vec<bool> = block.indices.iter().map(|&k| k % d == k / d).collect();
    let replaced = is_diagonal.iter().position(|&x| x).expect("q = 0 sector holds populations");
    let mut system = block.matrix.clone();
    let mut rhs = Mat::<C64>::zeros(n, 1);
    for j in 0..n {
        system[(replaced, j)] = if is_diagonal[j] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    rhs[(replaced, 0)] = C64::new(1.0, 0.0);
    let x = linalg::solve(&system, &rhs);

    let mut full = vec![C64::new(0.0, 0.0); d * d];
    for (local, &k) in block.indices.iter().enumerate() {
        full[k] = x[(local, 0)];
    }
    let residual = linalg::vector_norm(&superop.matrix().mul_vec(&full));
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::SteadyStateResidual(residual));
    }
    let raw = hilbert::unvectorize(&full, d);
    // Symmetrize away rounding-level anti-Hermitian parts.
    let data = Mat::from_fn(d, d, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) * 0.5);
    DensityMatrix::new(basis, data)
}

/// `tr(A σ)`.
pub fn expectation(state: &DensityMatrix, op: &SparseMatrix) -> Result<C64> {
    let d = state.basis.dimension();
    if op.rows() != d || op.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: op.rows() });
    }
    Ok(op.iter().map(|(r, c, v)| v * state.data[(c, r)]).sum())
}

/// Pump absorption rate `W Γ_ca ⟨S_p⁻ S_p⁺⟩`, i.e. `W` times the ground
/// population of the pumped atom.
pub fn pump_absorption_rate(state: &DensityMatrix, pump_w: f64, pumped_index: usize) -> Result<f64> {
    let lo = lowering_operator(&state.basis, pumped_index)?;
    let ground = expectation(state, &lo.matmul(&lo.adjoint()))?;
    Ok((pump_w * ground.re).max(0.0))
}

/// Total photon emission rate `Σ_ij Γ_ij ⟨S_i⁺ S_j⁻⟩`.
pub fn emission_rate(state: &DensityMatrix, couplings: &CouplingMatrices) -> Result<f64> {
    let n = couplings.n_atoms();
    if n != state.basis.n_atoms() {
        return Err(Error::DimensionMismatch { expected: state.basis.n_atoms(), found: n });
    }
    let mut total = C64::new(0.0, 0.0);
    for i in 0..n {
        let up = raising_operator(&state.basis, i)?;
        for j in 0..n {
            let g = couplings.gamma(i, j);
            if g != 0.0 {
                total += g * expectation(state, &up.matmul(&lowering_operator(&state.basis, j)?))?;
            }
        }
    }
    Ok(total.re)
}

/// Excited-state population of atom `i`.
pub fn excited_population(state: &DensityMatrix, i: usize) -> Result<f64> {
    let lo = lowering_operator(&state.basis, i)?;
    Ok(expectation(state, &lo.adjoint().matmul(&lo))?.re)
}
