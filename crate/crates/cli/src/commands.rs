use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fewlase_core::analysis::{self, NarrowingPoint};
use fewlase_core::coupling::coupling_matrices;
use fewlase_core::spectrum::{self, SpectrumGridResult};

use crate::config::{PumpSpec, RunConfig};
use crate::output::{emit, fmt_e, fmt_opt, parse_range, CsvDoc};
use crate::{CliError, EXIT_SWEEP};

/// Fraction of sweep points (or scan lengths) that must succeed.
pub const MIN_SUCCESS_FRACTION: f64 = 0.9;

const DEFAULT_GRID_POINTS: usize = 1201;

#[derive(Debug, Parser)]
#[command(name = "fewlase", version, about = "Exact spectra and pump sweeps of few-atom lasers")]
pub struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file.
    pub config: PathBuf,

    /// Write CSV here (sidecar JSON goes next to it); stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collective shifts and rates δ_ij, Γ_ij.
    Couplings(Common),
    /// Stationary emission spectrum at the configured pump.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Frequency grid `min:max:points` (default: sized to the lines).
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Scale the spectrum to unit peak height.
        #[arg(long)]
        normalized: bool,
    },
    /// Linewidth and photon number against pump strength.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Pump range `min:max:points`, log spaced (default: `W_sweep` from
        /// the config, else 0.1:30:40).
        #[arg(long)]
        w_range: Option<String>,
    },
    /// Saturation summary against a geometry scale multiplying all
    /// positions.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Scales `min:max:points`, linearly spaced.
        #[arg(long)]
        lengths: String,
        #[arg(long)]
        w_range: Option<String>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::schema("--threads must be positive"));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match cli.command {
        Command::Couplings(c) => cmd_couplings(&c.config, c.out.as_deref()),
        Command::Spectrum { common, grid, normalized } => {
            cmd_spectrum(&common.config, grid.as_deref(), normalized, common.out.as_deref())
        }
        Command::Sweep { common, w_range } => cmd_sweep(&common.config, w_range.as_deref(), common.out.as_deref()),
        Command::Scan { common, lengths, w_range } => {
            cmd_scan(&common.config, &lengths, w_range.as_deref(), common.out.as_deref())
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::new(crate::EXIT_OTHER, format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)))
}

pub fn cmd_couplings(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(config)?;
    let c = coupling_matrices(&cfg.atoms)?;
    let n = c.n_atoms();
    let mut doc = CsvDoc::new("couplings", &cfg.echo());
    doc.row(&["matrix", "row", "col", "value"]);
    for (name, rows) in [("delta", c.delta_rows()), ("gamma", c.gamma_rows())] {
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                doc.row(&[name.to_string(), i.to_string(), j.to_string(), fmt_e(*v)]);
            }
        }
    }
    let sidecar = json!({
        "n_atoms": n,
        "delta": c.delta_rows(),
        "gamma": c.gamma_rows(),
        "min_gamma_eigenvalue": c.min_gamma_eigenvalue()?,
    });
    emit(doc, out, "couplings", &sidecar)
}

fn single_pump(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.pump {
        PumpSpec::Single(w) => Ok(w),
        PumpSpec::Sweep { .. } => Err(CliError::schema("spectrum needs a single pump value `W`, not `W_sweep`")),
    }
}

pub fn cmd_spectrum(config: &Path, grid: Option<&str>, normalized: bool, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(config)?;
    let w = single_pump(&cfg)?;
    let solution = analysis::solve_point(&cfg.atoms)?;
    let omega = match grid {
        Some(g) => {
            let (min, max, points) = parse_range(g).map_err(CliError::schema)?;
            spectrum::linear_grid(min, max, points)?
        }
        None => {
            let half = (analysis::spectral_reach(&solution.couplings, w) * 0.3).max(10.0);
            spectrum::linear_grid(-half, half, DEFAULT_GRID_POINTS)?
        }
    };
    let (result, method): (SpectrumGridResult, &str) = match &solution.lorentzians {
        Some(sum) => (spectrum::evaluate_spectrum(sum, &omega, normalized)?, "lorentzian"),
        None => {
            let r = analysis::integrated_spectrum(&solution.liouvillian, &solution.couplings, &solution.state, &omega)?;
            (if normalized { r.normalize() } else { r }, "integration")
        }
    };

    let mut doc = CsvDoc::new("spectrum", &cfg.echo());
    doc.comment(&format!("normalized: {normalized}"));
    doc.comment(&format!("method: {method}"));
    doc.row(&["omega", "intensity"]);
    for (o, i) in result.omega.iter().zip(&result.intensity) {
        doc.row(&[fmt_e(*o), fmt_e(*i)]);
    }
    let terms: Vec<_> = solution
        .lorentzians
        .iter()
        .flat_map(|s| s.terms.iter())
        .map(|t| json!({ "nu": t.center, "gamma_hwhm": t.hwhm, "w_re": t.weight.re, "w_im": t.weight.im }))
        .collect();
    let p = &solution.point;
    let sidecar = json!({
        "method": method,
        "W": w,
        "total_rate": p.emission_rate,
        "absorption_rate": p.absorption_rate,
        "delta_omega": p.delta_omega,
        "omega_peak": p.omega_peak,
        "n": p.n,
        "terms": terms,
    });
    emit(doc, out, "terms", &sidecar)
}

fn pump_grid(cfg: &RunConfig, w_range: Option<&str>) -> Result<Vec<f64>, CliError> {
    let (min, max, points) = match (w_range, &cfg.pump) {
        (Some(r), _) => parse_range(r).map_err(CliError::schema)?,
        (None, PumpSpec::Sweep { min, max, points }) => (*min, *max, *points),
        (None, PumpSpec::Single(_)) => return Ok(analysis::default_pump_grid()),
    };
    Ok(analysis::log_spaced(min, max, points)?)
}

pub fn check_success(ok: usize, total: usize, what: &str) -> Result<(), CliError> {
    if (ok as f64) < MIN_SUCCESS_FRACTION * total as f64 {
        return Err(CliError::new(EXIT_SWEEP, format!("only {ok} of {total} {what} succeeded")));
    }
    Ok(())
}

pub fn cmd_sweep(config: &Path, w_range: Option<&str>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(config)?;
    let ws = pump_grid(&cfg, w_range)?;
    // Validate the geometry once so that physics errors are not reported
    // as a failed sweep.
    coupling_matrices(&cfg.atoms)?.validate()?;
    let results = analysis::sweep_points(&cfg.atoms, &ws)?;

    let mut doc = CsvDoc::new("sweep", &cfg.echo());
    doc.row(&["W", "delta_omega", "omega_peak", "n", "emission_rate", "absorption_rate", "error"]);
    let mut good: Vec<NarrowingPoint> = Vec::new();
    let mut failures = Vec::new();
    for (w, r) in ws.iter().zip(&results) {
        match r {
            Ok(p) => {
                doc.row(&[
                    fmt_e(p.w),
                    fmt_e(p.delta_omega),
                    fmt_e(p.omega_peak),
                    fmt_e(p.n),
                    fmt_e(p.emission_rate),
                    fmt_e(p.absorption_rate),
                    String::new(),
                ]);
                good.push(*p);
            }
            Err(e) => {
                let msg = e.root().to_string();
                doc.row(&[
                    fmt_e(*w),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    msg.clone(),
                ]);
                failures.push(json!({ "W": w, "error": msg }));
            }
        }
    }
    let summary = analysis::summarize(&good).ok();
    let sat = summary.map(|s| s.saturation);
    let sidecar = json!({
        "points": ws.len(),
        "failed": failures,
        "delta_omega_min": sat.map(|s| s.delta_omega_min),
        "w_at_delta_omega_min": sat.map(|s| s.w_at_delta_omega_min),
        "delta_omega_bracketed": sat.map(|s| s.delta_omega_bracketed),
        "n_max": sat.map(|s| s.n_max),
        "w_at_n_max": sat.map(|s| s.w_at_n_max),
        "absorption_at_n_max": sat.map(|s| s.absorption_at_n_max),
        "bracketed": sat.map(|s| s.bracketed),
        "status": match sat {
            Some(s) if s.bracketed => "saturated",
            Some(_) => "saturation not bracketed",
            None => "no successful points",
        },
        "efficiency": summary.and_then(|s| s.efficiency),
    });
    emit(doc, out, "summary", &sidecar)?;
    check_success(good.len(), ws.len(), "sweep points")
}

pub fn cmd_scan(config: &Path, lengths: &str, w_range: Option<&str>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(config)?;
    let ws = pump_grid(&cfg, w_range)?;
    let (min, max, points) = parse_range(lengths).map_err(CliError::schema)?;
    if !(min > 0.0) {
        return Err(CliError::schema("--lengths must be positive"));
    }
    let ls = spectrum::linear_grid(min, max, points)?;
    let rows = analysis::length_scan(&cfg.atoms, &ls, &ws);

    let mut doc = CsvDoc::new("scan", &cfg.echo());
    doc.comment(&format!("pump: {} log-spaced values in [{}, {}]", ws.len(), ws[0], ws[ws.len() - 1]));
    doc.row(&[
        "L",
        "delta_omega_min",
        "w_at_delta_omega_min",
        "n_max",
        "w_at_n_max",
        "efficiency",
        "bracketed",
        "error",
    ]);
    let mut ok = 0;
    let mut best: Option<(f64, f64)> = None;
    for (l, r) in &rows {
        match r {
            Ok(s) => {
                ok += 1;
                let sat = &s.saturation;
                if best.is_none_or(|(_, n)| sat.n_max > n) {
                    best = Some((*l, sat.n_max));
                }
                doc.row(&[
                    fmt_e(*l),
                    fmt_e(sat.delta_omega_min),
                    fmt_e(sat.w_at_delta_omega_min),
                    fmt_e(sat.n_max),
                    fmt_e(sat.w_at_n_max),
                    fmt_opt(s.efficiency),
                    sat.bracketed.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                let mut fields = vec![fmt_e(*l)];
                fields.extend(std::iter::repeat_n(String::new(), 6));
                fields.push(e.root().to_string());
                doc.row(&fields);
            }
        }
    }
    let sidecar = json!({
        "lengths": ls.len(),
        "succeeded": ok,
        "best_length": best.map(|b| b.0),
        "best_n_max": best.map(|b| b.1),
    });
    emit(doc, out, "summary", &sidecar)?;
    check_success(ok, ls.len(), "scan lengths")
}
