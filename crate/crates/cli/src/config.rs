//! The run configuration: an INI-like text file with a `[system]` and a
//! `[command]` section of `key = value` lines. `#` starts a comment.
//!
//! ```text
//! [system]
//! potential = asymmetric_linear
//! a = 4
//! b = 1
//! perturbation = arctan
//! scale = 2
//! cos1 = 0.5
//!
//! [command]
//! run = check
//! tol = 1e-9
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use isochron_core::model::{ForcingSpec, OscillatorSystem, PerturbationSpec, PotentialSpec, MAX_HARMONIC};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Check,
    Simulate,
    Poincare,
    Phi,
    Sweep,
    Verify,
}

impl Command {
    fn parse(s: &str) -> Option<Self> {
        <Self as clap::ValueEnum>::from_str(s, false).ok()
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = clap::ValueEnum::to_possible_value(self).expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// Key/value pairs of one section, remembering line numbers for messages.
#[derive(Debug, Clone, Default)]
pub struct Section {
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn insert(&mut self, line: usize, key: &str, value: &str) -> Result<(), CliError> {
        if let Some((first, _)) = self.entries.get(key) {
            return Err(CliError::Config(format!("line {line}: duplicate key '{key}' (first set on line {first})")));
        }
        self.entries.insert(key.to_string(), (line, value.to_string()));
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("line {line}: cannot parse '{v}' as the value of '{key}'"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str, section: &str) -> Result<T, CliError> {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("[{section}] needs '{key}'")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some((line, v)) = self.entries.get(key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse().map_err(|_| CliError::Config(format!("line {line}: cannot parse '{s}' in the list '{key}'")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn reject_unknown(&self, section: &str, allowed: &[&str]) -> Result<(), CliError> {
        for (k, (line, _)) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Config(format!("line {line}: unknown key '{k}' in [{section}]")));
            }
        }
        Ok(())
    }
}

pub struct RunConfig {
    pub system: OscillatorSystem,
    /// Command named by `run = ...`, if any.
    pub command: Option<Command>,
    /// The `[command]` section without `run`.
    pub params: Section,
}

fn split_sections(text: &str) -> Result<(Section, Section), CliError> {
    let mut system = Section::default();
    let mut command = Section::default();
    let mut seen = (false, false);
    let mut current: Option<&mut Section> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = match name.trim() {
                "system" if !seen.0 => {
                    seen.0 = true;
                    Some(&mut system)
                }
                "command" if !seen.1 => {
                    seen.1 = true;
                    Some(&mut command)
                }
                "system" | "command" => return Err(CliError::Config(format!("line {line_no}: section [{name}] repeated"))),
                other => return Err(CliError::Config(format!("line {line_no}: unknown section [{other}]"))),
            };
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {line_no}: expected 'key = value', got '{line}'")));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::Config(format!("line {line_no}: empty key or value")));
        }
        match current.as_deref_mut() {
            Some(sec) => sec.insert(line_no, k, v)?,
            None => return Err(CliError::Config(format!("line {line_no}: '{k}' appears before any section"))),
        }
    }
    if !seen.0 {
        return Err(CliError::Config("missing [system] section".into()));
    }
    Ok((system, command))
}

fn harmonic_index(key: &str) -> Option<(bool, usize)> {
    let (is_cos, digits) = if let Some(d) = key.strip_prefix("cos") {
        (true, d)
    } else {
        (false, key.strip_prefix("sin")?)
    };
    if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    (k <= MAX_HARMONIC && (is_cos || k >= 1)).then_some((is_cos, k))
}

fn core(e: isochron_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn build_system(sec: &Section) -> Result<OscillatorSystem, CliError> {
    let kind: String = sec.require("potential", "system")?;
    let (potential, mut allowed) = match kind.as_str() {
        "asymmetric_linear" => {
            let p = PotentialSpec::asymmetric_linear(sec.require("a", "system")?, sec.require("b", "system")?);
            (p.map_err(core)?, vec!["a", "b"])
        }
        "bonheure_fabry" => (PotentialSpec::bonheure_fabry(sec.require("sigma", "system")?).map_err(core)?, vec!["sigma"]),
        "harmonic" => (PotentialSpec::harmonic(sec.get_or("k", 1.0)?).map_err(core)?, vec!["k"]),
        other => {
            return Err(CliError::Config(format!(
                "unknown potential '{other}' (expected asymmetric_linear, bonheure_fabry or harmonic)"
            )))
        }
    };
    allowed.extend(["potential", "perturbation"]);
    let perturbation = match sec.raw("perturbation").unwrap_or("none") {
        "none" => PerturbationSpec::zero(),
        "arctan" => {
            allowed.push("scale");
            PerturbationSpec::arctan(sec.get_or("scale", 1.0)?).map_err(core)?
        }
        other => return Err(CliError::Config(format!("unknown perturbation '{other}' (expected none or arctan)"))),
    };

    let mut cos = vec![0.0; MAX_HARMONIC + 1];
    let mut sin = vec![0.0; MAX_HARMONIC];
    let mut degree = 0;
    let keys: Vec<String> = sec.keys().map(str::to_string).collect();
    for key in &keys {
        if allowed.contains(&key.as_str()) {
            continue;
        }
        let Some((is_cos, k)) = harmonic_index(key) else { continue };
        let v: f64 = sec.require(key, "system")?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("forcing coefficient '{key}' must be finite")));
        }
        if is_cos {
            cos[k] = v;
        } else {
            sin[k - 1] = v;
        }
        degree = degree.max(k);
    }
    let forcing_keys: Vec<&str> = keys.iter().map(String::as_str).filter(|k| harmonic_index(k).is_some()).collect();
    allowed.extend(forcing_keys);
    sec.reject_unknown("system", &allowed)?;

    cos.truncate(degree + 1);
    sin.truncate(degree);
    let forcing = ForcingSpec::new(cos, sin).map_err(core)?;
    Ok(OscillatorSystem::new(potential, perturbation, forcing))
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let (system, mut params) = split_sections(text)?;
    let system = build_system(&system)?;
    let command = match params.entries.remove("run") {
        None => None,
        Some((line, name)) => Some(
            Command::parse(&name)
                .ok_or_else(|| CliError::Config(format!("line {line}: unknown command '{name}'")))?,
        ),
    };
    Ok(RunConfig { system, command, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[system]\npotential = harmonic\n";

    #[test]
    fn parses_a_full_system() {
        let cfg = parse(
            "# demo\n[system]\npotential = asymmetric_linear\na = 4\nb = 1  # slopes\nperturbation = arctan\nscale = 2\ncos0 = 0.1\ncos2 = 1\nsin1 = -0.5\n\n[command]\nrun = phi\nsamples = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.command, Some(Command::Phi));
        assert_eq!(cfg.system.forcing.cos_coeffs(), &[0.1, 0.0, 1.0]);
        assert_eq!(cfg.system.forcing.sin_coeffs(), &[-0.5, 0.0]);
        assert_eq!(cfg.system.perturbation.g_plus, std::f64::consts::PI);
        assert!((cfg.system.omega - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(cfg.params.get::<usize>("samples").unwrap(), Some(8));
        assert!(cfg.params.raw("run").is_none());
    }

    #[test]
    fn defaults() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.system.omega, 1.0);
        assert!(cfg.system.forcing.is_zero());
        assert_eq!(cfg.command, None);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "potential = harmonic\n[system]\n",
            "[system]\npotential = harmonic\nsigma = 0.2\n",
            "[system]\npotential = harmonic\nk = 1\nk = 2\n",
            "[system]\npotential = harmonic\nsin0 = 1\n",
            "[system]\npotential = harmonic\ncos01 = 1\n",
            "[system]\npotential = harmonic\ncos99 = 1\n",
            "[system]\npotential = harmonic\nscale = 1\n",
            "[system]\npotential = cubic\n",
            "[system]\npotential = asymmetric_linear\na = 1\n",
            "[system]\npotential = asymmetric_linear\na = -1\nb = 1\n",
            "[system]\npotential = harmonic\nk = one\n",
            "[system]\npotential = harmonic\n[extra]\n",
            "[system]\npotential = harmonic\n[system]\n",
            "[system]\npotential harmonic\n",
            "[system]\npotential = harmonic\n[command]\nrun = plot\n",
        ] {
            assert!(matches!(parse(bad), Err(CliError::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn section_helpers() {
        let cfg = parse(&format!("{BASE}[command]\nladder = 1e2, 1e3,1e4\ntol = x\n")).unwrap();
        assert_eq!(cfg.params.list::<f64>("ladder").unwrap(), Some(vec![1e2, 1e3, 1e4]));
        assert!(cfg.params.get::<f64>("tol").is_err());
        assert_eq!(cfg.params.get_or("missing", 3usize).unwrap(), 3);
        assert!(cfg.params.reject_unknown("command", &["ladder"]).is_err());
        assert!(cfg.params.reject_unknown("command", &["ladder", "tol"]).is_ok());
    }
}
