//! Line width, photon number and pump sweeps.
//!
//! The photon number `n` is the spectral weight inside the full width at
//! half maximum of the spectrum, in units of `Γ_ca`. Tracking `(Δω, n)`
//! while the pump grows exposes gain narrowing below saturation and the
//! power-broadening turnover above it.

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{coupling_matrices, AtomConfiguration, CouplingMatrices};
use crate::hilbert::{build_liouvillian, Superoperator};
use crate::spectrum::{self, LorentzianSum, SpectrumGridResult};
use crate::steady::{self, DensityMatrix};
use crate::{Error, Result};

/// Width and location of the half-maximum interval around the global peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fwhm {
    pub delta_omega: f64,
    pub omega_peak: f64,
    pub peak_value: f64,
    pub lower: f64,
    pub upper: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection for `g(x) = 0` given `g(inside) ≥ 0 > g(outside)`.
fn bisect(g: impl Fn(f64) -> f64, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside || (outside - inside).abs() < 1e-14 {
            break;
        }
        if g(mid) >= 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// FWHM of the continuous spectrum.
///
/// The global maximum is found by a grid scan (plus the term centres)
/// refined by golden-section search; the half-maximum crossings are then
/// located by stepping outwards and bisecting. With several peaks the
/// width is that of the contiguous interval around the highest one.
pub fn fwhm(lorentzians: &LorentzianSum) -> Result<Fwhm> {
    let terms: Vec<_> = lorentzians.significant_terms().copied().collect();
    if !(lorentzians.total_rate > 0.0) || terms.is_empty() {
        return Err(Error::DarkSpectrum);
    }
    let s = |w: f64| lorentzians.evaluate(w);
    let gamma_min = terms.iter().map(|t| t.hwhm).fold(f64::INFINITY, f64::min).max(1e-9);
    let gamma_max = terms.iter().map(|t| t.hwhm).fold(0.0, f64::max);
    let lo = terms.iter().map(|t| t.center).fold(f64::INFINITY, f64::min) - 10.0 * gamma_max;
    let hi = terms.iter().map(|t| t.center).fold(f64::NEG_INFINITY, f64::max) + 10.0 * gamma_max;
    let step = (gamma_min / 8.0).max((hi - lo) / 200_000.0);

    let scan_points = ((hi - lo) / step).ceil() as usize;
    let candidates = (0..=scan_points).map(|k| lo + step * k as f64).chain(terms.iter().map(|t| t.center));
    let (mut x0, mut s0) = (lo, f64::NEG_INFINITY);
    for x in candidates {
        let v = s(x);
        if v > s0 {
            (x0, s0) = (x, v);
        }
    }
    let mut refined = golden_max(s, x0 - step, x0 + step);
    // Golden section stalls at ~sqrt(eps) on a flat top; Newton on S'
    // recovers full precision.
    for _ in 0..4 {
        let (d1, d2) = lorentzians.derivatives(refined);
        if !(d2 < 0.0) {
            break;
        }
        let next = refined - d1 / d2;
        if (next - refined).abs() > step || !(s(next) >= s(refined)) {
            break;
        }
        refined = next;
    }
    let (peak, peak_value) = if s(refined) >= s0 { (refined, s(refined)) } else { (x0, s0) };
    if !(peak_value > 0.0) {
        return Err(Error::DarkSpectrum);
    }

    let half = 0.5 * peak_value;
    let g = |w: f64| s(w) - half;
    let crossing = |direction: f64| {
        let mut inside = peak;
        let mut k = 1.0;
        loop {
            let x = peak + direction * step * k;
            if g(x) < 0.0 {
                return bisect(g, inside, x);
            }
            inside = x;
            k += 1.0;
        }
    };
    let upper = crossing(1.0);
    let lower = crossing(-1.0);
    Ok(Fwhm { delta_omega: upper - lower, omega_peak: peak, peak_value, lower, upper })
}

/// Spectral weight in `[lower, upper]` in units of `Γ_ca`.
pub fn photon_number_in(lorentzians: &LorentzianSum, lower: f64, upper: f64) -> f64 {
    lorentzians.integral(lower, upper)
}

/// Photon number `n`: spectral weight inside the FWHM interval.
pub fn photon_number(lorentzians: &LorentzianSum, width: &Fwhm) -> f64 {
    photon_number_in(lorentzians, width.lower, width.upper)
}

/// FWHM of a sampled spectrum, with linear interpolation of the crossings.
pub fn fwhm_grid(spectrum: &SpectrumGridResult) -> Result<Fwhm> {
    let (w, s) = (&spectrum.omega, &spectrum.intensity);
    let (ipk, &peak_value) = s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).ok_or(Error::DarkSpectrum)?;
    if !(peak_value > 0.0) {
        return Err(Error::DarkSpectrum);
    }
    let half = 0.5 * peak_value;
    let interp = |i: usize, j: usize| w[i] + (half - s[i]) * (w[j] - w[i]) / (s[j] - s[i]);
    let upper = (ipk + 1..s.len())
        .find(|&i| s[i] < half)
        .map(|i| interp(i - 1, i))
        .ok_or_else(|| Error::InvalidGrid("half maximum not reached above the peak".into()))?;
    let lower = (0..ipk)
        .rev()
        .find(|&i| s[i] < half)
        .map(|i| interp(i + 1, i))
        .ok_or_else(|| Error::InvalidGrid("half maximum not reached below the peak".into()))?;
    Ok(Fwhm { delta_omega: upper - lower, omega_peak: w[ipk], peak_value, lower, upper })
}

/// Trapezoid estimate of the spectral weight in `[lower, upper]`.
pub fn photon_number_grid(spectrum: &SpectrumGridResult, lower: f64, upper: f64) -> f64 {
    let (w, s) = (&spectrum.omega, &spectrum.intensity);
    let at = |x: f64| {
        let i = w.partition_point(|&v| v <= x).clamp(1, w.len() - 1);
        s[i - 1] + (x - w[i - 1]) * (s[i] - s[i - 1]) / (w[i] - w[i - 1])
    };
    let mut xs = vec![lower];
    xs.extend(w.iter().copied().filter(|&x| x > lower && x < upper));
    xs.push(upper);
    xs.windows(2).map(|p| 0.5 * (p[1] - p[0]) * (at(p[0]) + at(p[1]))).sum()
}

/// One pump strength of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NarrowingPoint {
    pub w: f64,
    pub delta_omega: f64,
    pub omega_peak: f64,
    pub n: f64,
    pub emission_rate: f64,
    pub absorption_rate: f64,
}

/// Everything computed for one configuration at one pump strength.
#[derive(Debug, Clone)]
pub struct PointSolution {
    pub couplings: CouplingMatrices,
    pub liouvillian: Superoperator,
    pub state: DensityMatrix,
    /// `None` when the block was defective and the spectrum came from direct
    /// integration.
    pub lorentzians: Option<LorentzianSum>,
    pub point: NarrowingPoint,
}

/// Frequency window wide enough to hold every line of a configuration
/// pumped at `pump_w`.
pub fn spectral_reach(couplings: &CouplingMatrices, pump_w: f64) -> f64 {
    let n = couplings.n_atoms();
    let max_shift =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| couplings.delta(i, j).abs()).fold(0.0, f64::max);
    10.0 * (1.0 + pump_w) + (n as f64) * max_shift
}

/// Spectrum on `grid` by direct integration, doubling the integration time
/// until the correlations have decayed.
pub fn integrated_spectrum(
    liouvillian: &Superoperator,
    couplings: &CouplingMatrices,
    state: &DensityMatrix,
    grid: &[f64],
) -> Result<SpectrumGridResult> {
    let mut t_max = 50.0;
    loop {
        match spectrum::spectrum_via_integration(liouvillian, couplings, state, t_max, 0.01, grid) {
            Err(Error::IntegrationNotConverged { .. }) if t_max < 5000.0 => t_max *= 2.0,
            other => return other,
        }
    }
}

/// Full pipeline at a single pump strength.
pub fn solve_point(config: &AtomConfiguration) -> Result<PointSolution> {
    let couplings = coupling_matrices(config)?;
    let liouvillian = build_liouvillian(&couplings, config.pumped_index(), config.pump_w())?;
    let state = steady::steady_state(&liouvillian)?;
    let emission_rate = steady::emission_rate(&state, &couplings)?;
    let absorption_rate = steady::pump_absorption_rate(&state, config.pump_w(), config.pumped_index())?;
    let (lorentzians, width, n) = match spectrum::spectrum_lorentzians(&liouvillian, &couplings, &state) {
        Ok(sum) => {
            let width = fwhm(&sum)?;
            let n = photon_number(&sum, &width);
            (Some(sum), width, n)
        }
        Err(Error::DefectiveBlock { .. }) => {
            let reach = spectral_reach(&couplings, config.pump_w());
            let grid = spectrum::linear_grid(-reach, reach, 16_001)?;
            let grid = integrated_spectrum(&liouvillian, &couplings, &state, &grid)?;
            let width = fwhm_grid(&grid)?;
            let n = photon_number_grid(&grid, width.lower, width.upper);
            (None, width, n)
        }
        Err(e) => return Err(e),
    };
    let point = NarrowingPoint {
        w: config.pump_w(),
        delta_omega: width.delta_omega,
        omega_peak: width.omega_peak,
        n,
        emission_rate,
        absorption_rate,
    };
    Ok(PointSolution { couplings, liouvillian, state, lorentzians, point })
}

pub fn evaluate_point(config: &AtomConfiguration, pump_w: f64) -> Result<NarrowingPoint> {
    let cfg = config.with_pump(pump_w)?;
    solve_point(&cfg).map(|s| s.point).map_err(|e| Error::SweepPoint { w: pump_w, source: Box::new(e) })
}

/// `points` logarithmically spaced values in `[min, max]`.
pub fn log_spaced(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || points == 0 || (points > 1 && max == min) {
        return Err(Error::InvalidSweep(format!("range {min}..{max} with {points} points")));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|i| match i {
            0 => min,
            i if i + 1 == points => max,
            i => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
        })
        .collect())
}

/// Default pump grid: 40 log-spaced values over `[0.1, 30]`.
pub fn default_pump_grid() -> Vec<f64> {
    log_spaced(0.1, 30.0, 40).expect("valid default range")
}

fn check_pump_list(ws: &[f64]) -> Result<()> {
    if ws.is_empty() {
        return Err(Error::InvalidSweep("empty pump list".into()));
    }
    if ws.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidSweep("pump values must be positive".into()));
    }
    if ws.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidSweep("pump values must be strictly increasing".into()));
    }
    Ok(())
}

/// Evaluates every pump value independently (in parallel); results are in
/// input order.
pub fn sweep_points(config: &AtomConfiguration, ws: &[f64]) -> Result<Vec<Result<NarrowingPoint>>> {
    check_pump_list(ws)?;
    Ok(ws.par_iter().map(|&w| evaluate_point(config, w)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: AtomConfiguration,
    pub points: Vec<NarrowingPoint>,
}

pub fn pump_sweep(config: &AtomConfiguration, ws: &[f64]) -> Result<SweepResult> {
    let points = sweep_points(config, ws)?.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { config: config.clone(), points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Saturation {
    pub delta_omega_min: f64,
    pub w_at_delta_omega_min: f64,
    pub n_max: f64,
    pub w_at_n_max: f64,
    /// Pump absorption rate interpolated at `w_at_n_max`.
    pub absorption_at_n_max: f64,
    /// The maximum of `n` lies strictly inside the sweep.
    pub bracketed: bool,
    /// The minimum of `Δω` lies strictly inside the sweep.
    pub delta_omega_bracketed: bool,
}

/// Vertex of the parabola through three points, or `None` if they are
/// collinear.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a == 0.0 || !a.is_finite() {
        return None;
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = -b / (2.0 * a);
    let yv = lagrange(x, y, xv);
    Some((xv, yv))
}

fn lagrange(x: [f64; 3], y: [f64; 3], at: f64) -> f64 {
    (0..3)
        .map(|i| {
            let basis: f64 = (0..3).filter(|&j| j != i).map(|j| (at - x[j]) / (x[i] - x[j])).product();
            y[i] * basis
        })
        .sum()
}

/// Extremum of `values` with quadratic refinement in `ln W` when it is
/// interior. Returns `(W, value, index, interior)`.
fn refined_extremum(ws: &[f64], values: &[f64], maximize: bool) -> (f64, f64, usize, bool) {
    let sign = if maximize { 1.0 } else { -1.0 };
    let (i, _) =
        values.iter().enumerate().max_by(|a, b| (sign * a.1).total_cmp(&(sign * b.1))).expect("non-empty sweep");
    let interior = i > 0 && i + 1 < values.len();
    if !interior {
        return (ws[i], values[i], i, false);
    }
    let x = [ws[i - 1].ln(), ws[i].ln(), ws[i + 1].ln()];
    let y = [values[i - 1], values[i], values[i + 1]];
    match parabola_vertex(x, y) {
        Some((xv, yv)) if xv >= x[0] && xv <= x[2] && sign * yv >= sign * y[1] => (xv.exp(), yv, i, true),
        _ => (ws[i], values[i], i, true),
    }
}

/// Saturation point of a sweep: maximum photon number and minimum line
/// width, extracted independently.
pub fn saturation_point(points: &[NarrowingPoint]) -> Result<Saturation> {
    if points.is_empty() {
        return Err(Error::InvalidSweep("empty sweep".into()));
    }
    let ws: Vec<f64> = points.iter().map(|p| p.w).collect();
    let ns: Vec<f64> = points.iter().map(|p| p.n).collect();
    let dws: Vec<f64> = points.iter().map(|p| p.delta_omega).collect();
    let (w_n, n_max, i, bracketed) = refined_extremum(&ws, &ns, true);
    let (w_dw, dw_min, _, delta_omega_bracketed) = refined_extremum(&ws, &dws, false);
    let absorption_at_n_max = if bracketed {
        let x = [ws[i - 1].ln(), ws[i].ln(), ws[i + 1].ln()];
        let y = [points[i - 1].absorption_rate, points[i].absorption_rate, points[i + 1].absorption_rate];
        lagrange(x, y, w_n.ln())
    } else {
        points[i].absorption_rate
    };
    Ok(Saturation {
        delta_omega_min: dw_min,
        w_at_delta_omega_min: w_dw,
        n_max,
        w_at_n_max: w_n,
        absorption_at_n_max,
        bracketed,
        delta_omega_bracketed,
    })
}

/// Fraction of absorbed pump photons re-emitted inside the FWHM.
pub fn efficiency(n_max: f64, absorption_rate: f64) -> Result<f64> {
    if !(absorption_rate > 0.0) {
        return Err(Error::ZeroAbsorption);
    }
    Ok(n_max / absorption_rate)
}

/// Saturation summary of one geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSummary {
    pub saturation: Saturation,
    pub efficiency: Option<f64>,
}

pub fn summarize(points: &[NarrowingPoint]) -> Result<SweepSummary> {
    let saturation = saturation_point(points)?;
    let efficiency =
        if saturation.bracketed { efficiency(saturation.n_max, saturation.absorption_at_n_max).ok() } else { None };
    Ok(SweepSummary { saturation, efficiency })
}

/// Sweeps the pump for each geometry scale `L` (positions of `template`
/// multiplied by `L`). Scales are processed in order; the pump points of
/// each scale run in parallel.
pub fn length_scan(template: &AtomConfiguration, lengths: &[f64], ws: &[f64]) -> Vec<(f64, Result<SweepSummary>)> {
    lengths
        .iter()
        .map(|&l| {
            let result =
                template.scaled(l).and_then(|cfg| pump_sweep(&cfg, ws)).and_then(|sweep| summarize(&sweep.points));
            (l, result)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::LorentzianTerm;
    use crate::C64;

    fn lorentzian(center: f64, hwhm: f64, weight: f64) -> LorentzianTerm {
        LorentzianTerm { center, hwhm, weight: C64::new(weight, 0.0) }
    }

    fn single(w: f64) -> AtomConfiguration {
        AtomConfiguration::new(vec![[0.0; 3]], vec![[0.0, 0.0, 1.0]], 0, w).unwrap()
    }

    #[test]
    fn single_lorentzian_width() {
        let sum = LorentzianSum { terms: vec![lorentzian(0.3, 0.5, 1.0)], total_rate: 1.0 };
        let f = fwhm(&sum).unwrap();
        assert!((f.delta_omega - 1.0).abs() < 1e-12);
        assert!((f.omega_peak - 0.3).abs() < 1e-12);
        assert!((photon_number(&sum, &f) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_separated_peaks_use_contiguous_interval() {
        let sum = LorentzianSum { terms: vec![lorentzian(-5.0, 0.5, 1.0), lorentzian(5.0, 0.5, 1.0)], total_rate: 2.0 };
        let f = fwhm(&sum).unwrap();
        // The other peak shifts the half-maximum level slightly; the width
        // stays that of one line, not the envelope.
        assert!((f.delta_omega - 1.0).abs() < 0.02, "{}", f.delta_omega);
    }

    #[test]
    fn dark_spectrum_error() {
        let sum = LorentzianSum { terms: vec![lorentzian(0.0, 1.0, 0.0)], total_rate: 0.0 };
        assert!(matches!(fwhm(&sum), Err(Error::DarkSpectrum)));
    }

    #[test]
    fn photon_number_monotone_in_interval() {
        let sum = LorentzianSum { terms: vec![lorentzian(-0.4, 0.5, 0.7), lorentzian(1.0, 0.2, 0.3)], total_rate: 1.0 };
        let mut last = 0.0;
        for k in 1..50 {
            let half = 0.1 * k as f64;
            let n = photon_number_in(&sum, -half, half);
            assert!(n >= last);
            last = n;
        }
        assert!(last <= sum.total_rate);
    }

    #[test]
    fn single_atom_point() {
        for w in [0.5, 1.0, 3.0] {
            let p = evaluate_point(&single(w), w).unwrap();
            assert!((p.delta_omega - (1.0 + w)).abs() < 1e-9);
            assert!((p.n - w / (2.0 * (1.0 + w))).abs() < 1e-10);
            assert!((p.emission_rate - p.absorption_rate).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_synthetic_sweep_not_bracketed() {
        let points: Vec<_> = (1..=5)
            .map(|k| NarrowingPoint {
                w: k as f64,
                delta_omega: 5.0 - 0.5 * k as f64,
                omega_peak: 0.0,
                n: 0.1 * k as f64,
                emission_rate: 1.0,
                absorption_rate: 1.0,
            })
            .collect();
        let s = saturation_point(&points).unwrap();
        assert!(!s.bracketed);
        assert!(!s.delta_omega_bracketed);
        assert_eq!(s.n_max, 0.5);
        assert!(summarize(&points).unwrap().efficiency.is_none());
    }

    #[test]
    fn quadratic_refinement_finds_vertex() {
        // n = 1 − (ln W − ln 2)², sampled off-vertex.
        let ws = [1.0, 1.5, 2.5, 4.0];
        let points: Vec<_> = ws
            .iter()
            .map(|&w: &f64| NarrowingPoint {
                w,
                delta_omega: 1.0 + (w.ln() - 2f64.ln()).powi(2),
                omega_peak: 0.0,
                n: 1.0 - (w.ln() - 2f64.ln()).powi(2),
                emission_rate: 1.0,
                absorption_rate: 2.0,
            })
            .collect();
        let s = saturation_point(&points).unwrap();
        assert!(s.bracketed);
        assert!((s.w_at_n_max - 2.0).abs() < 1e-12);
        assert!((s.n_max - 1.0).abs() < 1e-12);
        assert!((s.w_at_delta_omega_min - 2.0).abs() < 1e-12);
        assert!((s.absorption_at_n_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_rejects_zero_absorption() {
        assert!(matches!(efficiency(0.1, 0.0), Err(Error::ZeroAbsorption)));
        assert_eq!(efficiency(0.25, 1.0).unwrap(), 0.25);
    }

    #[test]
    fn sweep_rejects_unordered_pumps() {
        assert!(pump_sweep(&single(1.0), &[1.0, 0.5]).is_err());
        assert!(pump_sweep(&single(1.0), &[0.0, 0.5]).is_err());
    }

    #[test]
    fn log_spacing_endpoints() {
        let g = default_pump_grid();
        assert_eq!(g.len(), 40);
        assert_eq!((g[0], g[39]), (0.1, 30.0));
        assert!(g.windows(2).all(|p| p[1] > p[0]));
    }
}
