//! Configuration file reader.
//!
//! ```text
//! # pumped atom with one passive neighbour
//! [atoms]
//! n_atoms = 2
//! position_0 = 0 0 0
//! position_1 = 0.7 0 0
//! dipole_0 = 0 0 1
//! dipole_1 = 0 0 1
//! pumped = 0
//!
//! [pump]
//! W = 1.77
//! # or: W_sweep = 1.76 13.43 40
//! ```
//!
//! Section headers only group keys; every key is global. Positions are in
//! units of `c/ω_ca` and are multiplied by the optional `scale`.

use std::collections::HashMap;
use std::fmt::Write as _;

use fewlase_core::coupling::AtomConfiguration;
use fewlase_core::{Error as CoreError, Vec3};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum PumpSpec {
    Single(f64),
    Sweep { min: f64, max: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub atoms: AtomConfiguration,
    pub pump: PumpSpec,
}

struct Entry {
    line: usize,
    value: String,
}

fn schema(line: usize, field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::schema(format!("line {line}: field `{field}`: {msg}"))
}

fn parse_f64(e: &Entry, field: &str) -> Result<f64, CliError> {
    e.value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| schema(e.line, field, format!("expected a number, got `{}`", e.value)))
}

fn parse_usize(e: &Entry, field: &str) -> Result<usize, CliError> {
    e.value
        .trim()
        .parse::<usize>()
        .map_err(|_| schema(e.line, field, format!("expected a non-negative integer, got `{}`", e.value)))
}

fn parse_vec3(e: &Entry, field: &str) -> Result<Vec3, CliError> {
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(schema(e.line, field, format!("expected three numbers, got `{}`", e.value)));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| schema(e.line, field, format!("`{p}` is not a number")))?;
    }
    Ok(v)
}

const KNOWN_SECTIONS: [&str; 3] = ["atoms", "pump", "scan"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: HashMap<String, Entry> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(section) = content.strip_prefix('[') {
                let name = section
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::schema(format!("line {line}: malformed section header")))?;
                if !KNOWN_SECTIONS.contains(&name.trim()) {
                    return Err(CliError::schema(format!("line {line}: unknown section `{name}`")));
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::schema(format!("line {line}: expected `key = value`")))?;
            let key = key.trim().to_string();
            if entries.contains_key(&key) {
                return Err(schema(line, &key, "duplicate key"));
            }
            entries.insert(key, Entry { line, value: value.trim().to_string() });
        }

        let take = |entries: &mut HashMap<String, Entry>, key: &str| entries.remove(key);
        let n_entry = take(&mut entries, "n_atoms").ok_or_else(|| CliError::schema("missing field `n_atoms`"))?;
        let n = parse_usize(&n_entry, "n_atoms")?;
        if !(1..=8).contains(&n) {
            return Err(schema(n_entry.line, "n_atoms", "must be between 1 and 8"));
        }
        let scale = match take(&mut entries, "scale") {
            Some(e) => {
                let s = parse_f64(&e, "scale")?;
                if !(s > 0.0) {
                    return Err(schema(e.line, "scale", "must be positive"));
                }
                s
            }
            None => 1.0,
        };
        let mut positions = Vec::with_capacity(n);
        let mut dipoles = Vec::with_capacity(n);
        for i in 0..n {
            let pkey = format!("position_{i}");
            let p = take(&mut entries, &pkey).ok_or_else(|| CliError::schema(format!("missing field `{pkey}`")))?;
            let v = parse_vec3(&p, &pkey)?;
            positions.push([v[0] * scale, v[1] * scale, v[2] * scale]);

            let dkey = format!("dipole_{i}");
            let d = take(&mut entries, &dkey).ok_or_else(|| CliError::schema(format!("missing field `{dkey}`")))?;
            let mu = parse_vec3(&d, &dkey)?;
            let norm = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > fewlase_core::coupling::DIPOLE_NORM_TOL {
                return Err(schema(d.line, &dkey, format!("dipole must be a unit vector (norm {norm})")));
            }
            dipoles.push(mu);
        }
        let pumped_entry = take(&mut entries, "pumped").ok_or_else(|| CliError::schema("missing field `pumped`"))?;
        let pumped = parse_usize(&pumped_entry, "pumped")?;
        if pumped >= n {
            return Err(schema(pumped_entry.line, "pumped", format!("index must be below n_atoms = {n}")));
        }
        let gamma_ca = match take(&mut entries, "gamma_ca") {
            Some(e) => {
                let g = parse_f64(&e, "gamma_ca")?;
                if !(g > 0.0) {
                    return Err(schema(e.line, "gamma_ca", "must be positive"));
                }
                g
            }
            None => 1.0,
        };
        let pump = match (take(&mut entries, "W"), take(&mut entries, "W_sweep")) {
            (Some(_), Some(e)) => return Err(schema(e.line, "W_sweep", "`W` and `W_sweep` are exclusive")),
            (Some(e), None) => {
                let w = parse_f64(&e, "W")?;
                if w < 0.0 {
                    return Err(schema(e.line, "W", "must be >= 0"));
                }
                PumpSpec::Single(w)
            }
            (None, Some(e)) => {
                let parts: Vec<&str> = e.value.split_whitespace().collect();
                let bad = || schema(e.line, "W_sweep", "expected `min max points` with 0 < min < max");
                if parts.len() != 3 {
                    return Err(bad());
                }
                let min = parts[0].parse::<f64>().map_err(|_| bad())?;
                let max = parts[1].parse::<f64>().map_err(|_| bad())?;
                let points = parts[2].parse::<usize>().map_err(|_| bad())?;
                if !(min > 0.0 && (max > min || (points == 1 && max >= min)) && max.is_finite()) || points == 0 {
                    return Err(bad());
                }
                PumpSpec::Sweep { min, max, points }
            }
            (None, None) => return Err(CliError::schema("missing field `W` or `W_sweep`")),
        };
        if let Some((key, e)) = entries.iter().min_by_key(|(_, e)| e.line) {
            return Err(schema(e.line, key, "unknown field"));
        }
        let w0 = match pump {
            PumpSpec::Single(w) => w,
            PumpSpec::Sweep { min, .. } => min,
        };
        let atoms = AtomConfiguration::with_gamma(positions, dipoles, pumped, w0, gamma_ca).map_err(|e| match e {
            CoreError::CoincidentAtoms { .. } => CliError::physics(e.to_string()),
            other => CliError::schema(other.to_string()),
        })?;
        Ok(Self { atoms, pump })
    }

    /// The configuration as `key = value` lines that parse back to the same
    /// values (positions already scaled).
    pub fn echo(&self) -> String {
        let a = &self.atoms;
        let mut out = String::new();
        let _ = writeln!(out, "n_atoms = {}", a.n_atoms());
        for (i, p) in a.positions().iter().enumerate() {
            let _ = writeln!(out, "position_{i} = {} {} {}", p[0], p[1], p[2]);
        }
        for (i, d) in a.dipoles().iter().enumerate() {
            let _ = writeln!(out, "dipole_{i} = {} {} {}", d[0], d[1], d[2]);
        }
        let _ = writeln!(out, "pumped = {}", a.pumped_index());
        let _ = writeln!(out, "gamma_ca = {}", a.gamma_ca());
        match self.pump {
            PumpSpec::Single(w) => {
                let _ = writeln!(out, "W = {w}");
            }
            PumpSpec::Sweep { min, max, points } => {
                let _ = writeln!(out, "W_sweep = {min} {max} {points}");
            }
        }
        out
    }
}
