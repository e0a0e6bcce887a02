//! Deterministic CSV and JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// `printf("%.12e")` formatting, so that output is byte-identical across
/// runs and comparable with C and Python tools.
pub fn fmt_e(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_e).unwrap_or_default()
}

/// Quotes a field when RFC 4180 requires it.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A CSV document: `#` metadata lines, a header row and data rows.
#[derive(Debug, Default)]
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    pub fn new(command: &str, config_echo: &str) -> Self {
        let mut doc = Self::default();
        doc.comment(&format!("fewlase {command}"));
        doc.comment("units: frequencies are offsets from omega_ca in units of Gamma_ca; rates in units of Gamma_ca");
        for line in config_echo.lines() {
            doc.comment(&format!("config: {line}"));
        }
        doc
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let joined: Vec<String> = fields.iter().map(|f| csv_field(f.as_ref())).collect();
        let _ = writeln!(self.text, "{}", joined.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Extracts the configuration echoed into a CSV document's header.
pub fn config_from_csv(text: &str) -> String {
    text.lines().filter_map(|l| l.strip_prefix("# config: ")).fold(String::new(), |mut acc, l| {
        acc.push_str(l);
        acc.push('\n');
        acc
    })
}

/// `<out>.<suffix>.json` next to the CSV file.
pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(format!(".{suffix}.json"));
    PathBuf::from(name)
}

/// Writes the CSV and its JSON sidecar. Without an output path both go to
/// stdout, the JSON as a trailing `# <suffix>: {...}` line.
pub fn emit(doc: CsvDoc, out: Option<&Path>, suffix: &str, sidecar: &serde_json::Value) -> Result<(), CliError> {
    let json = serde_json::to_string(sidecar).map_err(|e| CliError::new(crate::EXIT_OTHER, e.to_string()))?;
    match out {
        Some(path) => {
            fs::write(path, doc.as_str())?;
            fs::write(sidecar_path(path, suffix), format!("{json}\n"))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(doc.as_str().as_bytes())?;
            writeln!(stdout, "# {suffix}: {json}")?;
        }
    }
    Ok(())
}

/// Parses `min:max:points`.
pub fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("expected `min:max:points`, got `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let min = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let max = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    let points = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
    if !(min.is_finite() && max.is_finite()) || points == 0 {
        return Err(bad());
    }
    Ok((min, max, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponents() {
        assert_eq!(fmt_e(1.5), "1.500000000000e+00");
        assert_eq!(fmt_e(-0.00123), "-1.230000000000e-03");
        assert_eq!(fmt_e(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e(6.02e123), "6.020000000000e+123");
        assert_eq!(fmt_e(f64::NAN), "nan");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("-10:10:401").unwrap(), (-10.0, 10.0, 401));
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:2:0").is_err());
        assert!(parse_range("a:2:3").is_err());
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("/tmp/s.csv"), "terms"), PathBuf::from("/tmp/s.csv.terms.json"));
    }

    #[test]
    fn echo_is_recoverable() {
        let doc = CsvDoc::new("spectrum", "n_atoms = 1\nW = 2\n");
        assert_eq!(config_from_csv(doc.as_str()), "n_atoms = 1\nW = 2\n");
    }
}
