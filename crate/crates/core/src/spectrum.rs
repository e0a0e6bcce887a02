//! Emission spectrum from the quantum regression theorem.
//!
//! The angle-integrated spectrum is built from the cross correlations
//! `C_ij(τ) = ⟨S_i⁺(τ) S_j⁻(0)⟩ = tr[S_i⁺ e^{Lτ}(S_j⁻ σ_ss)]` weighted by
//! the collective rates:
//!
//! ```text
//! S(ω) = (1/π) Re ∫₀^∞ e^{−iωτ} Σ_ij Γ_ij C_ij(τ) dτ
//! ```
//!
//! so that `∫ S(ω) dω` is the total emission rate. The initial operators
//! `S_j⁻ σ_ss` live entirely in the `q = −1` coherence sector, so only that
//! block of the Liouvillian is needed. Diagonalizing it turns the spectrum
//! into a finite sum of Lorentzians, one per eigenvalue
//! `λ_k = −γ_k + iν_k`:
//!
//! ```text
//! S(ω) = (1/π) Re Σ_k w_k / (γ_k + i(ω − ν_k))
//! ```

use std::f64::consts::PI;

use faer::Mat;
use serde::Serialize;

use crate::coupling::CouplingMatrices;
use crate::hilbert::{self, lowering_operator, raising_operator, SectorBlock, Superoperator};
use crate::steady::DensityMatrix;
use crate::{linalg, Error, Result, C64};

/// Bound on `‖BV − VΛ‖_F / ‖B‖_F` for an accepted eigendecomposition.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Relative tolerance on the sum rule `Σ_k w_k = C(0)`.
pub const SUM_RULE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzianTerm {
    /// Centre, as a detuning from `ω_ca`.
    pub center: f64,
    /// Half width at half maximum, `> 0`.
    pub hwhm: f64,
    pub weight: C64,
}

impl LorentzianTerm {
    pub fn evaluate(&self, omega: f64) -> f64 {
        (self.weight / C64::new(self.hwhm, omega - self.center)).re / PI
    }

    /// First and second derivatives with respect to `ω`.
    pub fn derivatives(&self, omega: f64) -> (f64, f64) {
        let z = C64::new(self.hwhm, omega - self.center);
        let first = (-C64::i() * self.weight / (z * z)).re / PI;
        let second = (-2.0 * self.weight / (z * z * z)).re / PI;
        (first, second)
    }

    /// `∫_a^b` of this term's contribution to `S(ω)`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let (xa, xb) = ((a - self.center) / self.hwhm, (b - self.center) / self.hwhm);
        let absorptive = xb.atan() - xa.atan();
        let dispersive = 0.5 * ((1.0 + xb * xb) / (1.0 + xa * xa)).ln();
        (self.weight.re * absorptive + self.weight.im * dispersive) / PI
    }
}

/// The spectrum as an exact finite sum of Lorentzians.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzianSum {
    pub terms: Vec<LorentzianTerm>,
    /// Spectrally integrated emission rate.
    pub total_rate: f64,
}

impl LorentzianSum {
    pub fn evaluate(&self, omega: f64) -> f64 {
        self.terms.iter().map(|t| t.evaluate(omega)).sum()
    }

    pub fn derivatives(&self, omega: f64) -> (f64, f64) {
        self.terms.iter().map(|t| t.derivatives(omega)).fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.terms.iter().map(|t| t.integral(a, b)).sum()
    }

    pub fn weight_sum(&self) -> C64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Terms carrying a non-negligible share of the total weight.
    pub fn significant_terms(&self) -> impl Iterator<Item = &LorentzianTerm> {
        let scale: f64 = self.terms.iter().map(|t| t.weight.norm()).sum();
        self.terms.iter().filter(move |t| t.weight.norm() > 1e-12 * scale)
    }

    /// Combines terms whose complex eigenvalues lie within `tol` of each
    /// other. For reporting only; the evaluated spectrum is unchanged up to
    /// `O(tol)`.
    pub fn merged(&self, tol: f64) -> LorentzianSum {
        let mut out: Vec<(LorentzianTerm, usize)> = Vec::new();
        for t in &self.terms {
            match out.iter_mut().find(|(m, _)| (m.center - t.center).hypot(m.hwhm - t.hwhm) < tol) {
                Some((m, count)) => {
                    m.weight += t.weight;
                    *count += 1;
                }
                None => out.push((*t, 1)),
            }
        }
        LorentzianSum { terms: out.into_iter().map(|(t, _)| t).collect(), total_rate: self.total_rate }
    }
}

/// Spectrum sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumGridResult {
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    pub normalized: bool,
}

impl SpectrumGridResult {
    /// Rescales so that the maximum intensity is one.
    pub fn normalize(mut self) -> Self {
        let peak = self.intensity.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if peak > 0.0 {
            for v in &mut self.intensity {
                *v /= peak;
            }
        }
        self.normalized = true;
        self
    }
}

/// `points` evenly spaced frequencies in `[min, max]`.
pub fn linear_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::InvalidGrid(format!("{min}:{max}:{points}")));
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { max } else { min + step * i as f64 }).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

pub fn evaluate_spectrum(lorentzians: &LorentzianSum, grid: &[f64], normalized: bool) -> Result<SpectrumGridResult> {
    check_grid(grid)?;
    let result = SpectrumGridResult {
        omega: grid.to_vec(),
        intensity: grid.iter().map(|&w| lorentzians.evaluate(w)).collect(),
        normalized: false,
    };
    Ok(if normalized { result.normalize() } else { result })
}

/// Regression problem restricted to the `q = −1` block: the initial vectors
/// `b_j = vec(S_j⁻ σ)` and the weighted trace functionals
/// `u_j = Σ_i Γ_ij vec(S_i⁺)`, so that `Σ_ij Γ_ij C_ij(τ) = Σ_j u_jᵀ e^{Bτ} b_j`.
struct Regression {
    block: SectorBlock,
    initial: Mat<C64>,
    functionals: Mat<C64>,
}

impl Regression {
    fn new(superop: &Superoperator, couplings: &CouplingMatrices, state: &DensityMatrix) -> Result<Self> {
        let basis = *superop.basis();
        let n = basis.n_atoms();
        if couplings.n_atoms() != n || state.basis().n_atoms() != n {
            return Err(Error::DimensionMismatch { expected: n, found: couplings.n_atoms() });
        }
        let d = basis.dimension();
        let block = hilbert::sector_block(superop, -1);
        let dim = block.indices.len();
        let sigma = state.matrix();

        let mut initial = Mat::<C64>::zeros(dim, n);
        let mut trace_rows = Vec::with_capacity(n);
        for j in 0..n {
            let lo = lowering_operator(&basis, j)?;
            let mut full = vec![C64::new(0.0, 0.0); d * d];
            for (r, k, v) in lo.iter() {
                for c in 0..d {
                    full[r + c * d] += v * sigma[(k, c)];
                }
            }
            for (local, x) in block.restrict(&full).into_iter().enumerate() {
                initial[(local, j)] = x;
            }
            // tr(S_j⁺ X) = Σ_{(r,c)} S⁺[r, c] X[c, r]
            let up = raising_operator(&basis, j)?;
            let mut coeffs = vec![C64::new(0.0, 0.0); d * d];
            for (r, c, v) in up.iter() {
                coeffs[c + r * d] += v;
            }
            trace_rows.push(block.restrict(&coeffs));
        }
        let functionals = Mat::from_fn(dim, n, |k, j| (0..n).map(|i| couplings.gamma(i, j) * trace_rows[i][k]).sum());
        Ok(Self { block, initial, functionals })
    }

    /// `Σ_j u_jᵀ Bᵏ b_j` for k = 0, 1, 2, 3.
    fn moments(&self) -> [C64; 4] {
        let mut out = [C64::new(0.0, 0.0); 4];
        let mut x = self.initial.clone();
        for slot in out.iter_mut() {
            *slot = self.contract(&x);
            x = &self.block.matrix * &x;
        }
        out
    }

    fn contract(&self, x: &Mat<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..x.ncols() {
            for k in 0..x.nrows() {
                acc += self.functionals[(k, j)] * x[(k, j)];
            }
        }
        acc
    }
}

/// Exact Lorentzian decomposition of the emission spectrum.
///
/// Returns [`Error::DefectiveBlock`] when the `q = −1` block cannot be
/// diagonalized reliably (residual above [`EIGEN_RESIDUAL_TOL`] or weights
/// that fail the sum rule); [`spectrum_via_integration`] is the fallback.
pub fn spectrum_lorentzians(
    superop: &Superoperator,
    couplings: &CouplingMatrices,
    state: &DensityMatrix,
) -> Result<LorentzianSum> {
    let reg = Regression::new(superop, couplings, state)?;
    let b = &reg.block.matrix;
    let (values, vectors) = linalg::eigen(b)?;

    let bv = b * &vectors;
    let mut diff = Mat::<C64>::zeros(bv.nrows(), bv.ncols());
    for k in 0..bv.ncols() {
        for i in 0..bv.nrows() {
            diff[(i, k)] = bv[(i, k)] - vectors[(i, k)] * values[k];
        }
    }
    let scale = linalg::frobenius_norm(b).max(f64::MIN_POSITIVE);
    let residual = linalg::frobenius_norm(&diff) / scale;
    if !(residual < EIGEN_RESIDUAL_TOL) {
        return Err(Error::DefectiveBlock { residual });
    }

    // Coordinates of the initial vectors in the eigenbasis, and the
    // functionals evaluated on each eigenvector.
    let coords = linalg::solve(&vectors, &reg.initial);
    let projections = reg.functionals.transpose() * &vectors;
    let n = reg.initial.ncols();
    let terms: Vec<LorentzianTerm> = values
        .iter()
        .enumerate()
        .map(|(k, lambda)| LorentzianTerm {
            center: lambda.im,
            hwhm: -lambda.re,
            weight: (0..n).map(|j| projections[(j, k)] * coords[(k, j)]).sum(),
        })
        .collect();

    let c0 = reg.moments()[0];
    let sum: C64 = terms.iter().map(|t| t.weight).sum();
    let sum_error = (sum - c0).norm();
    if !(sum_error <= SUM_RULE_TOL * c0.norm().max(1e-4)) {
        return Err(Error::DefectiveBlock { residual: sum_error });
    }
    Ok(LorentzianSum { terms, total_rate: c0.re })
}

/// Brute-force spectrum: propagates the regression vectors with the exact
/// one-step propagator `e^{B·dt}` and Fourier transforms the sampled
/// one-sided correlation with an endpoint-corrected trapezoid rule.
///
/// Independent of the eigendecomposition used by [`spectrum_lorentzians`].
pub fn spectrum_via_integration(
    superop: &Superoperator,
    couplings: &CouplingMatrices,
    state: &DensityMatrix,
    t_max: f64,
    dt: f64,
    grid: &[f64],
) -> Result<SpectrumGridResult> {
    check_grid(grid)?;
    if !(t_max > 0.0 && dt > 0.0 && dt <= t_max) {
        return Err(Error::InvalidGrid(format!("t_max = {t_max}, dt = {dt}")));
    }
    let reg = Regression::new(superop, couplings, state)?;
    let steps = (t_max / dt).ceil() as usize;
    let h = t_max / steps as f64;
    let step_matrix =
        Mat::from_fn(reg.block.matrix.nrows(), reg.block.matrix.ncols(), |i, j| reg.block.matrix[(i, j)] * h);
    let propagator = linalg::expm(&step_matrix);

    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = reg.initial.clone();
    samples.push(reg.contract(&x));
    for _ in 0..steps {
        x = &propagator * &x;
        samples.push(reg.contract(&x));
    }
    let c0 = samples[0].norm();
    let tail = samples[steps].norm();
    if tail > 1e-8 * c0.max(f64::MIN_POSITIVE) && c0 > 0.0 {
        return Err(Error::IntegrationNotConverged { tail });
    }

    let [m0, m1, m2, m3] = reg.moments();
    let i = C64::new(0.0, 1.0);
    let intensity = grid
        .iter()
        .map(|&omega| {
            let rot = C64::from_polar(1.0, -omega * h);
            let mut phase = C64::new(1.0, 0.0);
            let mut acc = 0.5 * samples[0];
            for s in &samples[1..] {
                phase *= rot;
                acc += phase * s;
            }
            let first = m1 - i * omega * m0;
            let third = m3 - 3.0 * i * omega * m2 - 3.0 * omega * omega * m1 + i * omega.powi(3) * m0;
            let integral = h * acc + h * h / 12.0 * first - h.powi(4) / 720.0 * third;
            integral.re / PI
        })
        .collect();
    Ok(SpectrumGridResult { omega: grid.to_vec(), intensity, normalized: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{coupling_matrices, AtomConfiguration};
    use crate::hilbert::build_liouvillian;
    use crate::steady::steady_state;

    fn pipeline(cfg: &AtomConfiguration) -> (Superoperator, CouplingMatrices, DensityMatrix) {
        let c = coupling_matrices(cfg).unwrap();
        let l = build_liouvillian(&c, cfg.pumped_index(), cfg.pump_w()).unwrap();
        let s = steady_state(&l).unwrap();
        (l, c, s)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = LorentzianTerm { center: 0.4, hwhm: 0.7, weight: C64::new(0.8, -0.3) };
        let h = 1e-4;
        for omega in [-2.0, 0.1, 0.4, 1.3] {
            let (d1, d2) = t.derivatives(omega);
            let fd1 = (t.evaluate(omega + h) - t.evaluate(omega - h)) / (2.0 * h);
            let fd2 = (t.evaluate(omega + h) - 2.0 * t.evaluate(omega) + t.evaluate(omega - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-7, "{d1} {fd1}");
            assert!((d2 - fd2).abs() < 1e-5, "{d2} {fd2}");
        }
    }

    #[test]
    fn single_term_peak_value() {
        let t = LorentzianTerm { center: 0.0, hwhm: 1.0, weight: C64::new(1.0, 0.0) };
        assert!((t.evaluate(0.0) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn analytic_integral_matches_quadrature() {
        let t = LorentzianTerm { center: 0.3, hwhm: 0.7, weight: C64::new(0.8, 0.25) };
        let (a, b) = (-1.0, 2.5);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let trap: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                w * t.evaluate(a + h * k as f64)
            })
            .sum::<f64>()
            * h;
        assert!((trap - t.integral(a, b)).abs() < 1e-9);
    }

    #[test]
    fn wide_grid_integral_recovers_total_rate() {
        let sum = LorentzianSum {
            terms: vec![
                LorentzianTerm { center: -1.0, hwhm: 0.5, weight: C64::new(0.6, 0.0) },
                LorentzianTerm { center: 2.0, hwhm: 0.3, weight: C64::new(0.4, 0.0) },
            ],
            total_rate: 1.0,
        };
        let grid = linear_grid(-2000.0, 2000.0, 400_001).unwrap();
        let s = evaluate_spectrum(&sum, &grid, false).unwrap();
        let h = grid[1] - grid[0];
        let trap: f64 = s.intensity.iter().sum::<f64>() * h - 0.5 * h * (s.intensity[0] + s.intensity[grid.len() - 1]);
        assert!((trap - 1.0).abs() < 1e-3, "{trap}");
    }

    #[test]
    fn separated_terms_give_two_maxima() {
        let sum = LorentzianSum {
            terms: vec![
                LorentzianTerm { center: -5.0, hwhm: 0.5, weight: C64::new(1.0, 0.0) },
                LorentzianTerm { center: 5.0, hwhm: 0.5, weight: C64::new(1.0, 0.0) },
            ],
            total_rate: 2.0,
        };
        let grid = linear_grid(-10.0, 10.0, 2001).unwrap();
        let s = evaluate_spectrum(&sum, &grid, false).unwrap();
        let maxima: Vec<f64> = (1..grid.len() - 1)
            .filter(|&i| s.intensity[i] > s.intensity[i - 1] && s.intensity[i] > s.intensity[i + 1])
            .map(|i| grid[i])
            .collect();
        assert_eq!(maxima.len(), 2);
        assert!((maxima[0] + 5.0).abs() < 0.011 && (maxima[1] - 5.0).abs() < 0.011);
    }

    #[test]
    fn empty_grid_rejected() {
        let sum = LorentzianSum { terms: vec![], total_rate: 0.0 };
        assert!(matches!(evaluate_spectrum(&sum, &[], false), Err(Error::InvalidGrid(_))));
        assert!(evaluate_spectrum(&sum, &[1.0, 0.0], false).is_err());
    }

    #[test]
    fn single_atom_is_one_lorentzian() {
        for w in [0.5, 1.0, 3.0] {
            let cfg = AtomConfiguration::new(vec![[0.0; 3]], vec![[0.0, 0.0, 1.0]], 0, w).unwrap();
            let (l, c, s) = pipeline(&cfg);
            let sum = spectrum_lorentzians(&l, &c, &s).unwrap();
            assert_eq!(sum.terms.len(), 1);
            let t = sum.terms[0];
            assert!(t.center.abs() < 1e-12);
            assert!((2.0 * t.hwhm - (1.0 + w)).abs() < 1e-12);
            assert!((sum.total_rate - w / (1.0 + w)).abs() < 1e-12);
        }
    }

    #[test]
    fn dark_state_correlation_vanishes() {
        let cfg = AtomConfiguration::triangle_with_center(0.7, 0.0).unwrap();
        let (l, c, s) = pipeline(&cfg);
        let grid = linear_grid(-5.0, 5.0, 11).unwrap();
        let r = spectrum_via_integration(&l, &c, &s, 10.0, 0.05, &grid).unwrap();
        assert!(r.intensity.iter().all(|&v| v == 0.0));
        let sum = spectrum_lorentzians(&l, &c, &s).unwrap();
        assert_eq!(sum.total_rate, 0.0);
    }

    #[test]
    fn normalized_peak_is_one() {
        let cfg = AtomConfiguration::new(vec![[0.0; 3]], vec![[0.0, 0.0, 1.0]], 0, 1.0).unwrap();
        let (l, c, s) = pipeline(&cfg);
        let sum = spectrum_lorentzians(&l, &c, &s).unwrap();
        let r = evaluate_spectrum(&sum, &linear_grid(-3.0, 3.0, 61).unwrap(), true).unwrap();
        assert_eq!(r.intensity.iter().copied().fold(f64::MIN, f64::max), 1.0);
    }

    #[test]
    fn unconverged_integration_is_reported() {
        let cfg = AtomConfiguration::new(vec![[0.0; 3]], vec![[0.0, 0.0, 1.0]], 0, 1.0).unwrap();
        let (l, c, s) = pipeline(&cfg);
        let r = spectrum_via_integration(&l, &c, &s, 2.0, 0.01, &[0.0]);
        assert!(matches!(r, Err(Error::IntegrationNotConverged { .. })));
    }
}
