//! Product Hilbert space of `N` two-level atoms and the Liouvillian acting
//! on vectorized density matrices.
//!
//! Conventions:
//!
//! * Single-atom basis: index 0 is the ground state, index 1 the excited
//!   state.
//! * Atom `i` is the `i`-th (leftmost first) factor of the tensor product, so
//!   its occupation is bit `N − 1 − i` of a basis index.
//! * Density matrices are vectorized by stacking columns: element
//!   `σ[m, n]` sits at `m + n·2^N`. Hence `vec(AσB) = (Bᵀ ⊗ A) vec(σ)`.
//! * The coherence sector of element `(m, n)` is
//!   `q = popcount(m) − popcount(n)`. Every term of the master equation
//!   conserves `q`.

use faer::Mat;

use crate::coupling::CouplingMatrices;
use crate::sparse::SparseMatrix;
use crate::{Error, Result, C64};

/// Basis of the `2^N` dimensional product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductBasis {
    n_atoms: usize,
}

impl ProductBasis {
    pub fn new(n_atoms: usize) -> Self {
        assert!(n_atoms <= 12, "product space of {n_atoms} atoms is too large");
        Self { n_atoms }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dimension(&self) -> usize {
        1 << self.n_atoms
    }

    /// Number of excited atoms in basis state `index`.
    pub fn excitation_count(&self, index: usize) -> usize {
        index.count_ones() as usize
    }

    /// Whether atom `atom` is excited in basis state `index`.
    pub fn is_excited(&self, index: usize, atom: usize) -> bool {
        index >> (self.n_atoms - 1 - atom) & 1 == 1
    }

    pub fn identity(&self) -> SparseMatrix {
        SparseMatrix::identity(self.dimension())
    }

    fn check_atom(&self, i: usize) -> Result<()> {
        if i >= self.n_atoms {
            Err(Error::IndexOutOfRange { index: i, n_atoms: self.n_atoms })
        } else {
            Ok(())
        }
    }
}

fn embed_single(basis: &ProductBasis, i: usize, factor: &SparseMatrix) -> SparseMatrix {
    let id2 = SparseMatrix::identity(2);
    (0..basis.n_atoms()).fold(SparseMatrix::identity(1), |acc, slot| acc.kron(if slot == i { factor } else { &id2 }))
}

/// `S_i^- = 1 ⊗ … ⊗ |g⟩⟨e| ⊗ … ⊗ 1` with the lowering factor in slot `i`.
pub fn lowering_operator(basis: &ProductBasis, i: usize) -> Result<SparseMatrix> {
    basis.check_atom(i)?;
    let sigma_minus = SparseMatrix::from_triplets(2, 2, [(0, 1, C64::new(1.0, 0.0))]);
    Ok(embed_single(basis, i, &sigma_minus))
}

/// `S_i^+`, the adjoint of [`lowering_operator`].
pub fn raising_operator(basis: &ProductBasis, i: usize) -> Result<SparseMatrix> {
    Ok(lowering_operator(basis, i)?.adjoint())
}

/// Matrix of `dσ/dt = Lσ` on column-stacked density matrices, tagged with
/// the coherence sector of every vectorized index.
#[derive(Debug, Clone)]
pub struct Superoperator {
    basis: ProductBasis,
    matrix: SparseMatrix,
    sector_of: Vec<i32>,
}

impl Superoperator {
    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn sector_of(&self, index: usize) -> i32 {
        self.sector_of[index]
    }

    /// Vectorized indices belonging to sector `q`, in increasing order.
    pub fn sector_indices(&self, q: i32) -> Vec<usize> {
        (0..self.dimension()).filter(|&k| self.sector_of[k] == q).collect()
    }

    /// Applies the Liouvillian to a density matrix given as a dense
    /// `2^N × 2^N` matrix.
    pub fn apply(&self, sigma: &Mat<C64>) -> Mat<C64> {
        let d = self.basis.dimension();
        let out = self.matrix.mul_vec(&vectorize(sigma));
        unvectorize(&out, d)
    }
}

/// Column-stacking vectorization.
pub fn vectorize(m: &Mat<C64>) -> Vec<C64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            v.push(m[(r, c)]);
        }
    }
    v
}

pub fn unvectorize(v: &[C64], d: usize) -> Mat<C64> {
    Mat::from_fn(d, d, |r, c| v[r + c * d])
}

/// Dimension of coherence sector `q` for `N` atoms:
/// `Σ_e C(N, e) · C(N, e − q)`.
pub fn sector_dimension(n_atoms: usize, q: i32) -> usize {
    let n = n_atoms as i64;
    (0..=n).map(|e| binomial(n, e) * binomial(n, e - q as i64)).sum::<u64>() as usize
}

pub fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Builds the Liouvillian
///
/// ```text
/// Lσ = −i[H, σ]
///      + Σ_ij Γ_ij (S_j⁻ σ S_i⁺ − ½{S_i⁺ S_j⁻, σ})
///      + W (S_p⁺ σ S_p⁻ − ½{S_p⁻ S_p⁺, σ})
/// ```
///
/// with `H = Σ_{i≠j} δ_ij S_i⁺ S_j⁻` and `p` the pumped atom. Rates are in
/// units of `Γ_ca`.
pub fn build_liouvillian(couplings: &CouplingMatrices, pumped_index: usize, pump_w: f64) -> Result<Superoperator> {
    let n = couplings.n_atoms();
    let basis = ProductBasis::new(n);
    basis.check_atom(pumped_index)?;
    if !(pump_w >= 0.0 && pump_w.is_finite()) {
        return Err(Error::InvalidConfiguration(format!("pump W = {pump_w} must be >= 0")));
    }
    let d = basis.dimension();
    let lower: Vec<SparseMatrix> = (0..n).map(|i| lowering_operator(&basis, i)).collect::<Result<_>>()?;
    let raise: Vec<SparseMatrix> = lower.iter().map(SparseMatrix::adjoint).collect();
    let id = basis.identity();
    let i_unit = C64::new(0.0, 1.0);

    // Non-Hermitian effective Hamiltonian H − (i/2) Σ_k L_k† L_k.
    let mut h_terms = Vec::new();
    let mut jumps: Vec<(&SparseMatrix, &SparseMatrix, f64)> = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            let coeff = C64::new(couplings.delta(i, j), -0.5 * couplings.gamma(i, j));
            if coeff != C64::new(0.0, 0.0) {
                h_terms.extend(raise[i].matmul(&lower[j]).iter().map(|(r, c, v)| (r, c, v * coeff)));
            }
            let g = couplings.gamma(i, j);
            if g != 0.0 {
                // S_j⁻ σ S_i⁺
                jumps.push((&lower[j], &raise[i], g));
            }
        }
    }
    if pump_w > 0.0 {
        let p = pumped_index;
        let coeff = C64::new(0.0, -0.5 * pump_w);
        h_terms.extend(lower[p].matmul(&raise[p]).iter().map(|(r, c, v)| (r, c, v * coeff)));
        jumps.push((&raise[p], &lower[p], pump_w));
    }
    let h_eff = SparseMatrix::from_triplets(d, d, h_terms);

    // −i(H_eff σ − σ H_eff†) → −i (1 ⊗ H_eff) + i (conj(H_eff) ⊗ 1), and
    // L σ R → (Rᵀ ⊗ L) vec σ.
    let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
    triplets.extend(id.kron(&h_eff).iter().map(|(r, c, v)| (r, c, -i_unit * v)));
    triplets.extend(h_eff.conj().kron(&id).iter().map(|(r, c, v)| (r, c, i_unit * v)));
    for (left, right, rate) in jumps {
        triplets.extend(right.transpose().kron(left).iter().map(|(r, c, v)| (r, c, v * rate)));
    }
    let matrix = SparseMatrix::from_triplets(d * d, d * d, triplets);

    let sector_of = (0..d * d)
        .map(|k| {
            let (m, col) = (k % d, k / d);
            basis.excitation_count(m) as i32 - basis.excitation_count(col) as i32
        })
        .collect();
    Ok(Superoperator { basis, matrix, sector_of })
}

/// Restriction of a superoperator to one coherence sector.
#[derive(Debug, Clone)]
pub struct SectorBlock {
    pub q: i32,
    /// Vectorized index of each block row/column.
    pub indices: Vec<usize>,
    pub matrix: Mat<C64>,
}

impl SectorBlock {
    /// Restricts a full vectorized vector to this block.
    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        self.indices.iter().map(|&k| full[k]).collect()
    }
}

pub fn sector_block(superop: &Superoperator, q: i32) -> SectorBlock {
    let indices = superop.sector_indices(q);
    let mut position = vec![usize::MAX; superop.dimension()];
    for (local, &global) in indices.iter().enumerate() {
        position[global] = local;
    }
    let mut matrix = Mat::<C64>::zeros(indices.len(), indices.len());
    for (local_row, &row) in indices.iter().enumerate() {
        for (col, v) in superop.matrix.row(row) {
            let local_col = position[col];
            debug_assert_ne!(local_col, usize::MAX, "entry crosses sectors");
            matrix[(local_row, local_col)] = v;
        }
    }
    SectorBlock { q, indices, matrix }
}

/// Reassembles a sparse superoperator from its sector blocks.
pub fn embed_blocks(dimension: usize, blocks: &[SectorBlock]) -> SparseMatrix {
    let triplets = blocks.iter().flat_map(|b| {
        let n = b.indices.len();
        (0..n).flat_map(move |i| (0..n).map(move |j| (b.indices[i], b.indices[j], b.matrix[(i, j)])))
    });
    SparseMatrix::from_triplets(dimension, dimension, triplets)
}
