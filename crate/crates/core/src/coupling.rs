//! Dipole-dipole coupling through the free-space dyadic Green function.
//!
//! For atoms `m != n` the complex coupling is
//!
//! ```text
//! δ_mn − (i/2) Γ_mn = −3π (Γ_ca c/ω_ca) μ_m · G_0(ω_ca, r_m − r_n) · μ_n
//! ```
//!
//! with `G_0` the outgoing free-space Green tensor returned by
//! [`green_tensor`]. The overall minus sign fixes the convention in which
//! `Γ_mn → +Γ_ca` as the separation vanishes and the near-field shift of
//! transverse parallel dipoles is `+3Γ_ca/(4ξ³)`. On the diagonal
//! `Γ_nn = Γ_ca` and `δ_nn` is the transition frequency itself, which is
//! removed by working in the frame rotating at `ω_ca`.

use std::f64::consts::PI;

use faer::Mat;
use serde::Serialize;

use crate::{linalg, Error, Result, Vec3, C64};

/// Tolerance on `|μ| = 1`.
pub const DIPOLE_NORM_TOL: f64 = 1e-12;

/// Lower bound on the eigenvalues of the rate matrix.
pub const PSD_TOL: f64 = -1e-10;

/// A cluster of identical two-level atoms with one pumped atom.
///
/// Positions are in units of `c/ω_ca`, the pump strength `W` is
/// dimensionless and `gamma_ca` is the rate unit in which every derived
/// quantity is reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomConfiguration {
    positions: Vec<Vec3>,
    dipoles: Vec<Vec3>,
    pumped_index: usize,
    pump_w: f64,
    gamma_ca: f64,
}

impl AtomConfiguration {
    pub fn new(positions: Vec<Vec3>, dipoles: Vec<Vec3>, pumped_index: usize, pump_w: f64) -> Result<Self> {
        Self::with_gamma(positions, dipoles, pumped_index, pump_w, 1.0)
    }

    pub fn with_gamma(
        positions: Vec<Vec3>,
        dipoles: Vec<Vec3>,
        pumped_index: usize,
        pump_w: f64,
        gamma_ca: f64,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidConfiguration("no atoms".into()));
        }
        if dipoles.len() != n {
            return Err(Error::InvalidConfiguration(format!("{n} positions but {} dipoles", dipoles.len())));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfiguration("non-finite position".into()));
        }
        for (i, mu) in dipoles.iter().enumerate() {
            let norm = norm(mu);
            if !norm.is_finite() || (norm - 1.0).abs() > DIPOLE_NORM_TOL {
                return Err(Error::InvalidConfiguration(format!("dipole {i} has norm {norm}, expected 1")));
            }
        }
        if pumped_index >= n {
            return Err(Error::IndexOutOfRange { index: pumped_index, n_atoms: n });
        }
        if !(pump_w >= 0.0 && pump_w.is_finite()) {
            return Err(Error::InvalidConfiguration(format!("pump W = {pump_w} must be >= 0")));
        }
        if !(gamma_ca > 0.0 && gamma_ca.is_finite()) {
            return Err(Error::InvalidConfiguration(format!("gamma_ca = {gamma_ca} must be > 0")));
        }
        for m in 0..n {
            for k in m + 1..n {
                if norm(&sub(&positions[m], &positions[k])) == 0.0 {
                    return Err(Error::CoincidentAtoms { first: m, second: k });
                }
            }
        }
        Ok(Self { positions, dipoles, pumped_index, pump_w, gamma_ca })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn dipoles(&self) -> &[Vec3] {
        &self.dipoles
    }

    pub fn pumped_index(&self) -> usize {
        self.pumped_index
    }

    pub fn pump_w(&self) -> f64 {
        self.pump_w
    }

    pub fn gamma_ca(&self) -> f64 {
        self.gamma_ca
    }

    /// Same geometry at a different pump strength.
    pub fn with_pump(&self, pump_w: f64) -> Result<Self> {
        Self::with_gamma(self.positions.clone(), self.dipoles.clone(), self.pumped_index, pump_w, self.gamma_ca)
    }

    /// Multiplies every position by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let positions = self.positions.iter().map(|p| [p[0] * factor, p[1] * factor, p[2] * factor]).collect();
        Self::with_gamma(positions, self.dipoles.clone(), self.pumped_index, self.pump_w, self.gamma_ca)
    }

    /// Equilateral triangle of passive atoms with circumradius `l` in the
    /// xy plane, the pumped atom at the centre, all dipoles along z.
    pub fn triangle_with_center(l: f64, pump_w: f64) -> Result<Self> {
        let mut positions = vec![[0.0, 0.0, 0.0]];
        for k in 0..3 {
            let phi = 2.0 * PI * k as f64 / 3.0;
            positions.push([l * phi.cos(), l * phi.sin(), 0.0]);
        }
        Self::new(positions, vec![[0.0, 0.0, 1.0]; 4], 0, pump_w)
    }
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Free-space dyadic Green tensor
///
/// `G_0 = e^{iξ}/(4π|r|) [ (1 + i/ξ − 1/ξ²) I + (−1 − 3i/ξ + 3/ξ²) r̂⊗r̂ ]`,
/// `ξ = k|r|`.
pub fn green_tensor(k: f64, r: Vec3) -> Result<[[C64; 3]; 3]> {
    let dist = norm(&r);
    if dist == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    let xi = k * dist;
    let i = C64::new(0.0, 1.0);
    let prefactor = (i * xi).exp() / (4.0 * PI * dist);
    let transverse = 1.0 + i / xi - 1.0 / (xi * xi);
    let longitudinal = -1.0 - 3.0 * i / xi + 3.0 / (xi * xi);
    let hat = [r[0] / dist, r[1] / dist, r[2] / dist];
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let delta = if a == b { 1.0 } else { 0.0 };
            g[a][b] = prefactor * (transverse * delta + longitudinal * hat[a] * hat[b]);
        }
    }
    Ok(g)
}

/// Collective shift and rate `(δ_mn, Γ_mn)` for `m != n`, in units of
/// `Γ_ca`.
pub fn coupling_pair(config: &AtomConfiguration, m: usize, n: usize) -> Result<(f64, f64)> {
    let n_atoms = config.n_atoms();
    for idx in [m, n] {
        if idx >= n_atoms {
            return Err(Error::IndexOutOfRange { index: idx, n_atoms });
        }
    }
    if m == n {
        return Err(Error::DiagonalCoupling(m));
    }
    // Canonical ordering makes the result bitwise symmetric under m ↔ n.
    let (m, n) = (m.min(n), m.max(n));
    let r = sub(&config.positions[m], &config.positions[n]);
    let g = green_tensor(1.0, r).map_err(|_| Error::CoincidentAtoms { first: m, second: n })?;
    let (mu_m, mu_n) = (&config.dipoles[m], &config.dipoles[n]);
    let mut contraction = C64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            contraction += mu_m[a] * g[a][b] * mu_n[b];
        }
    }
    let coupling = -3.0 * PI * contraction;
    Ok((coupling.re, -2.0 * coupling.im))
}

/// Collective shifts `δ` and rates `Γ` as dense symmetric matrices in units
/// of `Γ_ca`. The shift diagonal is zero (rotating frame) and the rate
/// diagonal is one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMatrices {
    n: usize,
    delta: Vec<f64>,
    gammas: Vec<f64>,
}

impl CouplingMatrices {
    /// Builds coupling matrices from explicit row-major entries. Checks
    /// shape, symmetry and the diagonal convention but not positivity; see
    /// [`CouplingMatrices::validate`].
    pub fn from_parts(n: usize, delta: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        for len in [delta.len(), gammas.len()] {
            if len != n * n {
                return Err(Error::DimensionMismatch { expected: n * n, found: len });
            }
        }
        for i in 0..n {
            if delta[i * n + i] != 0.0 || gammas[i * n + i] != 1.0 {
                return Err(Error::InvalidConfiguration(format!("diagonal ({i}, {i}) must be delta = 0, gamma = 1")));
            }
            for j in 0..i {
                if (delta[i * n + j] - delta[j * n + i]).abs() > 1e-12
                    || (gammas[i * n + j] - gammas[j * n + i]).abs() > 1e-12
                {
                    return Err(Error::InvalidConfiguration(format!("coupling matrices not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, delta, gammas })
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn delta(&self, m: usize, n: usize) -> f64 {
        self.delta[m * self.n + n]
    }

    pub fn gamma(&self, m: usize, n: usize) -> f64 {
        self.gammas[m * self.n + n]
    }

    pub fn delta_rows(&self) -> Vec<Vec<f64>> {
        self.delta.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn gamma_rows(&self) -> Vec<Vec<f64>> {
        self.gammas.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Smallest eigenvalue of the rate matrix.
    pub fn min_gamma_eigenvalue(&self) -> Result<f64> {
        let m = Mat::from_fn(self.n, self.n, |i, j| self.gamma(i, j));
        let eig = linalg::real_symmetric_eigenvalues(&m)?;
        Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Checks that the rates define a valid Lindblad dissipator: positive
    /// semidefinite and bounded by `Γ_ca` off the diagonal.
    pub fn validate(&self) -> Result<()> {
        let min_eigenvalue = self.min_gamma_eigenvalue()?;
        if min_eigenvalue < PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.gamma(i, j).abs() > 1.0 + 1e-12 {
                    return Err(Error::InvalidConfiguration(format!(
                        "|gamma({i}, {j})| = {} exceeds gamma_ca",
                        self.gamma(i, j).abs()
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn coupling_matrices(config: &AtomConfiguration) -> Result<CouplingMatrices> {
    let n = config.n_atoms();
    let mut delta = vec![0.0; n * n];
    let mut gammas = vec![0.0; n * n];
    for m in 0..n {
        gammas[m * n + m] = 1.0;
        for k in m + 1..n {
            let (d, g) = coupling_pair(config, m, k)?;
            delta[m * n + k] = d;
            delta[k * n + m] = d;
            gammas[m * n + k] = g;
            gammas[k * n + m] = g;
        }
    }
    Ok(CouplingMatrices { n, delta, gammas })
}
