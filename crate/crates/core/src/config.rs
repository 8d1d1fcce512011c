//! Run configuration: a TOML document with one section per experiment.
//!
//! ```toml
//! experiment = "phase-sweep"
//! [phase_sweep]
//! photon_numbers = [2, 4, 6]
//! ```
//!
//! Every key has a default; the defaults that were filled in are reported
//! by [`LoadedConfig::defaults_applied`] so they can be echoed into the
//! manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{GhostScanConfig, PhaseSweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PhaseSweep,
    GhostScan,
    OracleCheck,
    Modes,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PhaseSweep => "phase-sweep",
            ExperimentKind::GhostScan => "ghost-scan",
            ExperimentKind::OracleCheck => "oracle-check",
            ExperimentKind::Modes => "modes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `_norm` columns repeat the raw values.
    Raw,
    /// `_norm` columns are divided by their sweep maximum.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub draws: usize,
    pub seed: u64,
    pub photon_numbers: Vec<u32>,
    pub mode_counts: Vec<usize>,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            draws: 50,
            seed: 20_231_101,
            photon_numbers: vec![2, 4],
            mode_counts: vec![2, 3, 6],
            tolerance: 1e-10,
        }
    }
}

/// Solve a permittivity map and dump its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesConfig {
    /// CSV map (`eps1d,nx` / `eps2d,nx,ny` header); relative to the config file.
    /// Without it a uniform 1D medium of `cells` cells is used.
    pub permittivity_file: Option<PathBuf>,
    pub cell_size: [f64; 2],
    pub origin: [f64; 2],
    pub cells: usize,
    pub eps: f64,
    /// Modes at or below this frequency are dropped; `None` uses the DC floor.
    pub omega_floor: Option<f64>,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self {
            permittivity_file: None,
            cell_size: [1.0 / 64.0, 1.0 / 64.0],
            origin: [0.0, 0.0],
            cells: 64,
            eps: 1.0,
            omega_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Reject unknown keys (otherwise they are dropped with a warning).
    pub strict: bool,
    pub output_dir: PathBuf,
    pub normalization: Normalization,
    pub phase_sweep: PhaseSweepConfig,
    pub ghost_scan: GhostScanConfig,
    pub oracle: OracleConfig,
    pub modes: ModesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::PhaseSweep,
            strict: true,
            output_dir: PathBuf::from("out"),
            normalization: Normalization::Max,
            phase_sweep: PhaseSweepConfig::default(),
            ghost_scan: GhostScanConfig::default(),
            oracle: OracleConfig::default(),
            modes: ModesConfig::default(),
        }
    }
}

fn in_section(section: &str, err: Error) -> Error {
    match err {
        Error::Config { key, message } => Error::Config {
            key: format!("{section}.{key}"),
            message,
        },
        other => other,
    }
}

impl RunConfig {
    /// Range checks for the section the experiment uses.
    pub fn validate(&self) -> Result<()> {
        match self.experiment {
            ExperimentKind::PhaseSweep => self.phase_sweep.validate().map_err(|e| in_section("phase_sweep", e)),
            ExperimentKind::GhostScan => self.ghost_scan.validate().map_err(|e| in_section("ghost_scan", e)),
            ExperimentKind::OracleCheck => {
                let o = &self.oracle;
                if o.draws == 0 {
                    return Err(Error::config("oracle.draws", "must be at least 1"));
                }
                if o.photon_numbers.iter().any(|&n| n == 0 || n % 2 != 0 || n > crate::correlation::ORACLE_MAX_PHOTONS) {
                    return Err(Error::config(
                        "oracle.photon_numbers",
                        format!("entries must be even and in [2, {}]", crate::correlation::ORACLE_MAX_PHOTONS),
                    ));
                }
                if o.mode_counts.iter().any(|&k| k == 0 || k > crate::grid::MIN_CELLS) {
                    return Err(Error::config(
                        "oracle.mode_counts",
                        format!("entries must lie in [1, {}]", crate::grid::MIN_CELLS),
                    ));
                }
                if !(o.tolerance.is_finite() && o.tolerance > 0.0) {
                    return Err(Error::config("oracle.tolerance", "must be finite and > 0"));
                }
                Ok(())
            }
            ExperimentKind::Modes => {
                let m = &self.modes;
                for (i, v) in m.cell_size.iter().enumerate() {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::config(format!("modes.cell_size[{i}]"), format!("{v} must be finite and > 0")));
                    }
                }
                if m.permittivity_file.is_none() {
                    if m.cells < crate::grid::MIN_CELLS {
                        return Err(Error::config(
                            "modes.cells",
                            format!("{} is below the minimum {}", m.cells, crate::grid::MIN_CELLS),
                        ));
                    }
                    if !(m.eps.is_finite() && m.eps >= 1.0) {
                        return Err(Error::config("modes.eps", format!("{} must be >= 1", m.eps)));
                    }
                }
                if let Some(f) = m.omega_floor {
                    if !(f.is_finite() && f >= 0.0) {
                        return Err(Error::config("modes.omega_floor", format!("{f} must be >= 0")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Canonical TOML of the effective configuration.
    /// Fills optional fields whose value is derived from others, so the
    /// serialized form reproduces the same run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.ghost_scan.spectral_std = Some(self.ghost_scan.spectral_std());
        c
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.resolved()).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the key-sorted JSON form; independent of key order in the file.
    pub fn hash(&self) -> Result<String> {
        let value = serde_json::to_value(self.resolved()).map_err(|e| Error::Parse(e.to_string()))?;
        let canonical = serde_json::to_string(&value).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(format!("{:x}", Sha256::digest(canonical.as_bytes())))
    }
}

/// A parsed configuration plus what parsing had to fill in or drop.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Dotted keys whose defaults were applied.
    pub defaults_applied: Vec<String>,
    /// Unknown keys dropped in non-strict mode.
    pub ignored_keys: Vec<String>,
    /// Directory relative paths in the file resolve against.
    pub base_dir: PathBuf,
}

fn collect_missing(user: Option<&toml::Value>, effective: &toml::Value, path: &str, out: &mut Vec<String>) {
    match effective {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let u = user.and_then(|u| u.get(k));
                if u.is_none() && !v.is_table() {
                    out.push(p);
                } else {
                    collect_missing(u, v, &p, out);
                }
            }
        }
        _ => {
            if user.is_none() {
                out.push(path.to_string());
            }
        }
    }
}

/// Removes keys of `user` that `reference` does not know about.
fn strip_unknown(user: &mut toml::Value, reference: &toml::Value, path: &str, out: &mut Vec<String>) {
    let (Some(u), Some(r)) = (user.as_table_mut(), reference.as_table()) else {
        return;
    };
    let unknown: Vec<String> = u
        .keys()
        .filter(|k| !r.contains_key(*k) && !OPTIONAL_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    for k in unknown {
        u.remove(&k);
        out.push(if path.is_empty() { k } else { format!("{path}.{k}") });
    }
    for (k, v) in u.iter_mut() {
        if let Some(rv) = r.get(k) {
            let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            strip_unknown(v, rv, &p, out);
        }
    }
}

/// Optional keys whose default (`None`) is absent from the serialised form.
const OPTIONAL_KEYS: &[&str] = &[
    "cells",
    "splitter_thickness",
    "detection_time",
    "spectral_std",
    "bucket_half_height",
    "permittivity_file",
    "omega_floor",
];

/// Parses TOML text. `base_dir` anchors relative file paths.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<LoadedConfig> {
    parse_config_str_as(text, base_dir, None)
}

/// Like [`parse_config_str`], but the experiment is fixed by the caller: a
/// missing `experiment` key takes `kind`, a different one is an error.
pub fn parse_config_str_as(text: &str, base_dir: &Path, kind: Option<ExperimentKind>) -> Result<LoadedConfig> {
    let mut user: toml::Value = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut implied_experiment = false;
    if let (Some(kind), Some(table)) = (kind, user.as_table_mut()) {
        match table.get("experiment").and_then(toml::Value::as_str) {
            None if !table.contains_key("experiment") => {
                table.insert("experiment".into(), toml::Value::String(kind.as_str().into()));
                implied_experiment = true;
            }
            Some(found) if found != kind.as_str() => {
                return Err(Error::config(
                    "experiment",
                    format!("config is for `{found}`, requested `{}`", kind.as_str()),
                ));
            }
            _ => {}
        }
    }
    let strict = user.get("strict").and_then(toml::Value::as_bool).unwrap_or(true);
    let mut ignored_keys = Vec::new();
    if !strict {
        let reference = toml::Value::try_from(RunConfig::default()).map_err(|e| Error::Parse(e.to_string()))?;
        strip_unknown(&mut user, &reference, "", &mut ignored_keys);
        for k in &ignored_keys {
            log::warn!("ignoring unknown config key `{k}`");
        }
    }
    let config: RunConfig = user.clone().try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let effective = toml::Value::try_from(&config).map_err(|e| Error::Parse(e.to_string()))?;
    let mut defaults_applied = Vec::new();
    collect_missing(Some(&user), &effective, "", &mut defaults_applied);
    if implied_experiment {
        defaults_applied.retain(|k| k != "experiment");
    }
    let loaded = LoadedConfig {
        config,
        defaults_applied,
        ignored_keys,
        base_dir: base_dir.to_path_buf(),
    };
    loaded.config.validate()?;
    loaded.check_files()?;
    Ok(loaded)
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    parse_config_as(path, None)
}

pub fn parse_config_as(path: &Path, kind: Option<ExperimentKind>) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str_as(&text, &base, kind)
}

impl LoadedConfig {
    /// Defaults only, as when no file is given.
    pub fn defaults(experiment: ExperimentKind) -> Result<Self> {
        let config = RunConfig {
            experiment,
            ..RunConfig::default()
        };
        let effective = toml::Value::try_from(&config).map_err(|e| Error::Parse(e.to_string()))?;
        let mut defaults_applied = Vec::new();
        collect_missing(None, &effective, "", &mut defaults_applied);
        defaults_applied.retain(|k| k != "experiment");
        config.validate()?;
        Ok(Self {
            config,
            defaults_applied,
            ignored_keys: Vec::new(),
            base_dir: PathBuf::new(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_files(&self) -> Result<()> {
        if self.config.experiment == ExperimentKind::Modes {
            if let Some(f) = &self.config.modes.permittivity_file {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(Error::config(
                        "modes.permittivity_file",
                        format!("{} does not exist", p.display()),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadedConfig> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_phase_config_gets_defaults() {
        let c = parse("[phase_sweep]\nphoton_numbers = [2, 4]\n").unwrap();
        let p = &c.config.phase_sweep;
        assert_eq!(p.photon_numbers, vec![2, 4]);
        assert_eq!(p.packet_offset, 0.375);
        assert_eq!(p.center_frequency, 526.0);
        assert_eq!(p.spectral_std, 1.59);
        assert!(c.defaults_applied.contains(&"phase_sweep.packet_offset".to_string()));
        assert!(c.defaults_applied.contains(&"experiment".to_string()));
        assert!(!c.defaults_applied.contains(&"phase_sweep.photon_numbers".to_string()));
    }

    #[test]
    fn negative_size_names_the_key() {
        let err = parse("[phase_sweep]\ndomain_length = -1.0\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "phase_sweep.domain_length"),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("experiment = \"modes\"\n[modes]\ncell_size = [-0.1, 0.1]\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "modes.cell_size[0]"));
    }

    #[test]
    fn duplicate_and_unknown_keys_are_rejected() {
        assert!(matches!(parse("strict = true\nstrict = true\n"), Err(Error::Parse(_))));
        let err = parse("[phase_sweep]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert_eq!(err.class(), crate::ErrorClass::Config);
    }

    #[test]
    fn lenient_mode_drops_unknown_keys() {
        let c = parse("strict = false\n[phase_sweep]\nbogus = 1\ntheta_samples = 200\n").unwrap();
        assert_eq!(c.ignored_keys, vec!["phase_sweep.bogus".to_string()]);
        assert_eq!(c.config.phase_sweep.theta_samples, 200);
    }

    #[test]
    fn round_trip_reproduces_effective_config() {
        let c = parse("experiment = \"ghost-scan\"\n[ghost_scan]\ns_samples = 11\n[ghost_scan.geometry]\neps_d = 5.0\n").unwrap();
        let text = c.config.to_toml().unwrap();
        let again = parse(&text).unwrap();
        assert_eq!(again.config, c.config);
        assert!(again.defaults_applied.iter().all(|k| OPTIONAL_KEYS.iter().any(|o| k.ends_with(o))));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = parse("experiment = \"phase-sweep\"\nstrict = true\n[phase_sweep]\ntheta_samples = 128\neps_reg = 1e-8\n").unwrap();
        let b = parse("[phase_sweep]\neps_reg = 1e-8\ntheta_samples = 128\n[oracle]\n").unwrap();
        assert_eq!(a.config.hash().unwrap(), b.config.hash().unwrap());
        let c = parse("[phase_sweep]\ntheta_samples = 256\n").unwrap();
        assert_ne!(a.config.hash().unwrap(), c.config.hash().unwrap());
    }

    #[test]
    fn missing_map_file_is_a_config_error() {
        let err = parse("experiment = \"modes\"\n[modes]\npermittivity_file = \"nope.csv\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "modes.permittivity_file"));
    }

    #[test]
    fn requested_experiment() {
        let text = "[phase_sweep]\ndomain_length = -1.0\n";
        let c = parse_config_str_as(text, Path::new("."), Some(ExperimentKind::OracleCheck)).unwrap();
        assert_eq!(c.config.experiment, ExperimentKind::OracleCheck);
        assert!(!c.defaults_applied.contains(&"experiment".to_string()));
        let err = parse_config_str_as("experiment = \"modes\"\n", Path::new("."), Some(ExperimentKind::GhostScan));
        assert!(matches!(err, Err(Error::Config { ref key, .. }) if key == "experiment"));
    }

    #[test]
    fn theta_samples_floor() {
        let err = parse("[phase_sweep]\nphoton_numbers = [8]\ntheta_samples = 100\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "phase_sweep.theta_samples"));
    }
}
