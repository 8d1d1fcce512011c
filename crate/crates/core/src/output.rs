//! CSV and manifest writers, the randomized oracle check, and the driver
//! that runs a loaded configuration end to end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentKind, LoadedConfig, Normalization, OracleConfig};
use crate::correlation::{noon_cf, noon_cf_oracle, CfComponents, DetectorSpec, Regularization};
use crate::error::{Error, Result};
use crate::experiments::ghost::{perturbation_tag, run_ghost_geometry};
use crate::experiments::{run_phase_sweep, SweepResult};
use crate::grid::{Grid, PermittivityMap};
use crate::modes::{default_omega_floor, solve_modes, ModeBasis};
use crate::operators::build_operators;
use crate::wavepackets::{NoonStateSpec, SpectralAmplitudes};

pub const TOOL_NAME: &str = "noonsim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a sweep as CSV: header, then one row per sample, `{:.16e}`
/// values, LF line endings. An empty sweep yields the header alone.
pub fn csv_string(result: &SweepResult) -> String {
    let mut out = result.header().join(",");
    out.push('\n');
    for (i, v) in result.values.iter().enumerate() {
        let _ = write!(out, "{v:.16e}");
        for (_, col) in &result.columns {
            let _ = write!(out, ",{:.16e}", col[i]);
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(result))?;
    Ok(())
}

/// Long-format CSV of every correlation component:
/// `<variable>,photons,numerator,denom_alpha,denom_beta,state_norm,value,regularized`.
pub fn components_csv_string(result: &SweepResult) -> String {
    let mut out = format!(
        "{},photons,numerator,denom_alpha,denom_beta,state_norm,value,regularized\n",
        result.variable
    );
    for (n, comps) in &result.meta.components {
        for (v, c) in result.values.iter().zip(comps) {
            let _ = writeln!(
                out,
                "{v:.16e},{n},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.numerator,
                c.denom_alpha,
                c.denom_beta,
                c.state_norm,
                c.value,
                u8::from(c.regularized)
            );
        }
    }
    out
}

/// `result_<kind>[_<tag>].csv`
pub fn result_file_name(kind: ExperimentKind, tag: Option<&str>) -> String {
    file_name("result", kind, tag)
}

/// `components_<kind>[_<tag>].csv`
pub fn components_file_name(kind: ExperimentKind, tag: Option<&str>) -> String {
    file_name("components", kind, tag)
}

fn file_name(prefix: &str, kind: ExperimentKind, tag: Option<&str>) -> String {
    match tag {
        Some(t) => format!("{prefix}_{}_{t}.csv", kind.as_str()),
        None => format!("{prefix}_{}.csv", kind.as_str()),
    }
}

/// Replaces every `_norm` column by its raw counterpart.
fn apply_normalization(result: &mut SweepResult, mode: Normalization) {
    if mode == Normalization::Max {
        return;
    }
    let raw: BTreeMap<String, Vec<f64>> = result.columns.iter().cloned().collect();
    for (name, data) in &mut result.columns {
        if let Some(base) = name.strip_suffix("_norm") {
            if let Some(r) = raw.get(base) {
                *data = r.clone();
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunEntry {
    pub label: String,
    pub file: String,
    pub components_file: String,
    pub mode_count: usize,
    pub eigen_residual: f64,
    pub capture_min: f64,
    pub solve_seconds: f64,
    pub sweep_seconds: f64,
    /// Per photon number, whether each sweep point took the zero-over-zero value.
    pub regularized: BTreeMap<String, Vec<bool>>,
}

impl RunEntry {
    fn from_sweep(result: &SweepResult, file: String, components_file: String) -> Self {
        let regularized = result
            .meta
            .regularized()
            .into_iter()
            .map(|(n, flags)| (format!("N{n}"), flags))
            .collect();
        Self {
            label: result.meta.label.clone(),
            file,
            components_file,
            mode_count: result.meta.mode_count,
            eigen_residual: result.meta.eigen_residual,
            capture_min: result.meta.min_capture(),
            solve_seconds: result.meta.solve_seconds,
            sweep_seconds: result.meta.sweep_seconds,
            regularized,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimes {
    pub parse: f64,
    pub compute: f64,
    pub write: f64,
}

/// Contents of `manifest.json`. The key set is fixed.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_hash: String,
    pub effective_config: serde_json::Value,
    pub defaults_applied: Vec<String>,
    pub ignored_keys: Vec<String>,
    pub runs: Vec<RunEntry>,
    pub wall_seconds: StageTimes,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(loaded: &LoadedConfig) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            experiment: loaded.config.experiment.as_str().into(),
            config_hash: loaded.config.hash()?,
            effective_config: serde_json::to_value(loaded.config.resolved()).map_err(|e| Error::Parse(e.to_string()))?,
            defaults_applied: loaded.defaults_applied.clone(),
            ignored_keys: loaded.ignored_keys.clone(),
            runs: Vec::new(),
            wall_seconds: StageTimes::default(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCase {
    pub photons: u32,
    pub modes: usize,
    pub draws: usize,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub tolerance: f64,
    pub cases: Vec<OracleCase>,
    pub max_relative_deviation: f64,
    pub passed: bool,
}

fn rel_dev(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn component_deviation(a: &CfComponents, b: &CfComponents) -> f64 {
    [
        rel_dev(a.numerator, b.numerator),
        rel_dev(a.denom_alpha, b.denom_alpha),
        rel_dev(a.denom_beta, b.denom_beta),
        rel_dev(a.state_norm, b.state_norm),
        rel_dev(a.value, b.value),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// A random `modes`-mode basis on an 8-cell line with unit mass.
fn random_basis(rng: &mut ChaCha8Rng, modes: usize) -> Result<ModeBasis> {
    let grid = Grid::new_1d(crate::grid::MIN_CELLS, 1.0, 0.0)?;
    let n = grid.dof();
    let omegas = (0..modes).map(|_| rng.gen_range(0.5..5.0)).collect();
    let m = Mat::<f64>::from_fn(n, modes, |_, _| rng.gen_range(-1.0..1.0));
    ModeBasis::from_parts(grid, vec![1.0; n], omegas, m)
}

/// Compares the closed form against the Wick oracle on random bases,
/// packets, detectors and phases.
pub fn run_oracle_check(cfg: &OracleConfig) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reg = Regularization::absolute(0.0);
    let mut cases = Vec::new();
    for &photons in &cfg.photon_numbers {
        for &modes in &cfg.mode_counts {
            let mut worst = 0.0f64;
            for _ in 0..cfg.draws {
                let basis = random_basis(&mut rng, modes)?;
                let packet = |rng: &mut ChaCha8Rng| {
                    SpectralAmplitudes::normalized((0..modes).map(|_| random_complex(rng)).collect())
                };
                let left = packet(&mut rng)?;
                let right = packet(&mut rng)?;
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let state = NoonStateSpec::new(photons, left, right, theta)?;
                let det = |rng: &mut ChaCha8Rng| {
                    DetectorSpec::new(rng.gen_range(0..basis.grid().dof()), rng.gen_range(0.0..3.0), photons / 2)
                };
                let (da, db) = (det(&mut rng), det(&mut rng));
                let fast = noon_cf(&basis, &state, &da, &db, &reg)?;
                let slow = noon_cf_oracle(&basis, &state, &da, &db, &reg)?;
                worst = worst.max(component_deviation(&fast, &slow));
            }
            cases.push(OracleCase {
                photons,
                modes,
                draws: cfg.draws,
                max_relative_deviation: worst,
            });
        }
    }
    let max_relative_deviation = cases.iter().map(|c| c.max_relative_deviation).fold(0.0, f64::max);
    Ok(OracleReport {
        seed: cfg.seed,
        tolerance: cfg.tolerance,
        cases,
        max_relative_deviation,
        passed: max_relative_deviation < cfg.tolerance,
    })
}

/// Solves the configured permittivity map.
pub fn solve_configured_modes(loaded: &LoadedConfig) -> Result<ModeBasis> {
    let m = &loaded.config.modes;
    let map = match &m.permittivity_file {
        Some(f) => {
            let text = std::fs::read_to_string(loaded.resolve(f))?;
            PermittivityMap::from_csv(&text, m.cell_size, m.origin)?
        }
        None => PermittivityMap::uniform(Grid::new_1d(m.cells, m.cell_size[0], m.origin[0])?, m.eps)?,
    };
    let ops = build_operators(&map)?;
    solve_modes(&ops, m.omega_floor.unwrap_or_else(|| default_omega_floor(&map)))
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub sweeps: Vec<SweepResult>,
    pub oracle: Option<OracleReport>,
}

/// Runs the configured experiment and writes its outputs into `out_dir`.
/// An oracle check above tolerance is reported as a numerical error after
/// the report has been written.
pub fn run(loaded: &LoadedConfig, out_dir: &Path, parse_seconds: f64) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let cfg = &loaded.config;
    let mut manifest = Manifest::new(loaded)?;
    manifest.wall_seconds.parse = parse_seconds;
    let mut sweeps = Vec::new();
    let mut oracle = None;

    let started = Instant::now();
    let mut files: Vec<(Option<String>, SweepResult)> = Vec::new();
    match cfg.experiment {
        ExperimentKind::PhaseSweep => {
            files.push((None, run_phase_sweep(&cfg.phase_sweep)?));
        }
        ExperimentKind::GhostScan => {
            for &f in &cfg.ghost_scan.perturbations {
                files.push((Some(perturbation_tag(f)), run_ghost_geometry(&cfg.ghost_scan, f)?));
            }
        }
        ExperimentKind::Modes => {
            let basis = solve_configured_modes(loaded)?;
            manifest.runs.push(RunEntry {
                label: "modes".into(),
                file: "modes.csv".into(),
                components_file: String::new(),
                mode_count: basis.kept_count(),
                eigen_residual: basis.eigen_residual(),
                capture_min: f64::NAN,
                solve_seconds: started.elapsed().as_secs_f64(),
                sweep_seconds: 0.0,
                regularized: BTreeMap::new(),
            });
            manifest.wall_seconds.compute = started.elapsed().as_secs_f64();
            let w = Instant::now();
            basis.export_csv(out_dir)?;
            manifest.outputs = vec!["omegas.csv".into(), "modes.csv".into()];
            manifest.wall_seconds.write = w.elapsed().as_secs_f64();
        }
        ExperimentKind::OracleCheck => {
            let report = run_oracle_check(&cfg.oracle)?;
            manifest.wall_seconds.compute = started.elapsed().as_secs_f64();
            let w = Instant::now();
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            std::fs::write(out_dir.join("oracle_check.json"), text + "\n")?;
            manifest.outputs = vec!["oracle_check.json".into()];
            manifest.wall_seconds.write = w.elapsed().as_secs_f64();
            oracle = Some(report);
        }
    }
    if !files.is_empty() {
        manifest.wall_seconds.compute = started.elapsed().as_secs_f64();
        let w = Instant::now();
        for (tag, mut r) in files {
            let name = result_file_name(cfg.experiment, tag.as_deref());
            let comp_name = components_file_name(cfg.experiment, tag.as_deref());
            apply_normalization(&mut r, cfg.normalization);
            emit_csv(&r, &out_dir.join(&name))?;
            std::fs::write(out_dir.join(&comp_name), components_csv_string(&r))?;
            manifest.runs.push(RunEntry::from_sweep(&r, name.clone(), comp_name.clone()));
            manifest.outputs.push(name);
            manifest.outputs.push(comp_name);
            sweeps.push(r);
        }
        manifest.wall_seconds.write = w.elapsed().as_secs_f64();
    }
    manifest.write(out_dir)?;
    if let Some(rep) = &oracle {
        if !rep.passed {
            return Err(Error::Numerical(format!(
                "oracle deviation {:e} exceeds tolerance {:e}",
                rep.max_relative_deviation, rep.tolerance
            )));
        }
    }
    Ok(RunOutcome {
        manifest,
        sweeps,
        oracle,
    })
}
