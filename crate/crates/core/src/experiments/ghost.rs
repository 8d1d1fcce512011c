//! Two-dimensional ghost-imaging scan: a slitted dielectric slab sits on the
//! left arm in front of a bucket detector, a pixel detector watches the
//! right arm, and the launch height `s` is swept across the object.

use std::time::Instant;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{at_point, check_photons, SweepResult};
use crate::correlation::{finish, noon_terms, BranchAmplitudes, CfTerms, Regularization};
use crate::error::{Error, Result};
use crate::grid::{Grid, PermittivityMap};
use crate::modes::{default_omega_floor, solve_modes, ModeBasis};
use crate::operators::build_operators_2d_tmz;
use crate::wavepackets::{overlap, packet_profile, project_packet, SpectralAmplitudes, WavepacketSpec};

/// Slab of permittivity `eps_d` and thickness `thickness` (along x) made of
/// two arms of length `side_length` on either side of a centred slit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhostGeometry {
    pub eps_d: f64,
    pub slit_width: f64,
    pub side_length: f64,
    pub thickness: f64,
    pub slab_center: [f64; 2],
    /// Periodic domain extents (m), centred on the origin.
    pub extent: [f64; 2],
    pub cells: [usize; 2],
}

impl Default for GhostGeometry {
    fn default() -> Self {
        Self {
            eps_d: 4.0,
            slit_width: 4.33e-2,
            side_length: 1.70e-1,
            thickness: 9.67e-2,
            slab_center: [-0.15, 0.0],
            extent: [1.2, 0.8],
            cells: [84, 56],
        }
    }
}

impl GhostGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_d.is_finite() && self.eps_d >= 1.0) {
            return Err(Error::config("eps_d", format!("{} must be >= 1", self.eps_d)));
        }
        for (key, v) in [
            ("slit_width", self.slit_width),
            ("side_length", self.side_length),
            ("thickness", self.thickness),
            ("extent[0]", self.extent[0]),
            ("extent[1]", self.extent[1]),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("{v} must be finite and > 0")));
            }
        }
        if self.slit_width >= self.side_length {
            return Err(Error::Geometry(format!(
                "slit width {} must be smaller than the side length {}",
                self.slit_width, self.side_length
            )));
        }
        let [cx, cy] = self.slab_center;
        let half_x = 0.5 * self.thickness;
        let half_y = 0.5 * self.slit_width + self.side_length;
        if cx - half_x < -0.5 * self.extent[0]
            || cx + half_x > 0.5 * self.extent[0]
            || cy - half_y < -0.5 * self.extent[1]
            || cy + half_y > 0.5 * self.extent[1]
        {
            return Err(Error::Geometry("slab does not fit inside the domain".into()));
        }
        Ok(())
    }

    /// Same object with the slit widened by `fraction` (arms keep their length).
    pub fn perturbed(&self, fraction: f64) -> Self {
        Self {
            slit_width: self.slit_width * (1.0 + fraction),
            ..self.clone()
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::centered_2d(self.cells, self.extent)
    }

    /// Whether `point` lies inside the slab material.
    pub fn in_slab(&self, point: [f64; 2]) -> bool {
        let dx = (point[0] - self.slab_center[0]).abs();
        let dy = (point[1] - self.slab_center[1]).abs();
        dx < 0.5 * self.thickness && dy >= 0.5 * self.slit_width && dy < 0.5 * self.slit_width + self.side_length
    }

    /// 1 where a horizontal ray at height `s` crosses the slab, 0 elsewhere.
    pub fn footprint(&self, s: f64) -> f64 {
        let dy = (s - self.slab_center[1]).abs();
        if dy >= 0.5 * self.slit_width && dy < 0.5 * self.slit_width + self.side_length {
            1.0
        } else {
            0.0
        }
    }
}

/// Permittivity map of the slitted slab; cells are filled by centre test.
pub fn build_ghost_geometry(geom: &GhostGeometry) -> Result<PermittivityMap> {
    geom.validate()?;
    let grid = geom.grid()?;
    let eps = (0..grid.dof())
        .map(|j| if geom.in_slab(grid.cell_center(j)) { geom.eps_d } else { 1.0 })
        .collect();
    PermittivityMap::new(grid, eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketMode {
    /// Incoherent sum over every cell of the bucket column.
    Column,
    /// The single cell at the bucket position on the launch axis.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhostScanConfig {
    pub geometry: GhostGeometry,
    pub center_frequency: f64,
    /// Spectral FWHM; converted to a Gaussian std unless `spectral_std` is set.
    pub spectral_fwhm: f64,
    pub spectral_std: Option<f64>,
    pub transverse_std: f64,
    /// Launch point x; both packets start here at height `s`.
    pub source_x: f64,
    pub bucket_x: f64,
    /// Half height of the bucket column around the slab axis; `None` spans the domain.
    pub bucket_half_height: Option<f64>,
    pub bucket_mode: BucketMode,
    pub pixel_x: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub s_samples: usize,
    pub photon_numbers: Vec<u32>,
    pub perturbations: Vec<f64>,
    /// Common detection time; `None` uses the ballistic transit to each detector.
    pub detection_time: Option<f64>,
    pub eps_reg: f64,
}

impl Default for GhostScanConfig {
    fn default() -> Self {
        Self {
            geometry: GhostGeometry::default(),
            center_frequency: 50.0,
            spectral_fwhm: 1.56,
            spectral_std: Some(12.0),
            transverse_std: 0.02,
            source_x: 0.0,
            bucket_x: -0.3,
            bucket_half_height: None,
            bucket_mode: BucketMode::Column,
            pixel_x: 0.3,
            s_min: -0.3,
            s_max: 0.3,
            s_samples: 61,
            photon_numbers: vec![2, 4, 8],
            perturbations: vec![-0.1, 0.0, 0.1],
            detection_time: None,
            eps_reg: crate::correlation::DEFAULT_EPS_REG,
        }
    }
}

impl GhostScanConfig {
    pub fn spectral_std(&self) -> f64 {
        self.spectral_std
            .unwrap_or(self.spectral_fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt()))
    }

    pub fn s_values(&self) -> Vec<f64> {
        if self.s_samples == 1 {
            return vec![self.s_min];
        }
        let step = (self.s_max - self.s_min) / (self.s_samples - 1) as f64;
        (0..self.s_samples).map(|k| self.s_min + step * k as f64).collect()
    }

    /// Detection times of the bucket and the pixel.
    pub fn detection_times(&self) -> [f64; 2] {
        match self.detection_time {
            Some(t) => [t, t],
            None => [
                (self.bucket_x - self.source_x).abs(),
                (self.pixel_x - self.source_x).abs(),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        for (key, v) in [
            ("center_frequency", self.center_frequency),
            ("spectral_fwhm", self.spectral_fwhm),
            ("spectral_std", self.spectral_std()),
            ("transverse_std", self.transverse_std),
            ("eps_reg", self.eps_reg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("{v} must be finite and > 0")));
            }
        }
        check_photons(&self.photon_numbers)?;
        if self.s_samples == 0 {
            return Err(Error::config("s_samples", "must be at least 1"));
        }
        if !(self.s_min <= self.s_max) {
            return Err(Error::config("s_max", format!("{} must be >= s_min {}", self.s_max, self.s_min)));
        }
        if let Some(&p) = self.perturbations.iter().find(|p| !(p.is_finite() && **p > -1.0)) {
            return Err(Error::config("perturbations", format!("{p} must be > -1")));
        }
        if self.perturbations.is_empty() {
            return Err(Error::config("perturbations", "at least one perturbation required"));
        }
        let g = &self.geometry;
        let x0 = g.slab_center[0];
        let ht = 0.5 * g.thickness;
        // Object sits between the source and the bucket; the pixel looks the other way.
        let bucket_side = (self.bucket_x - self.source_x).signum();
        let object_side = (x0 - self.source_x).signum();
        if bucket_side != object_side || (self.bucket_x - x0).abs() <= ht || (self.source_x - x0).abs() <= ht {
            return Err(Error::config("bucket_x", "bucket must sit behind the object, opposite the source"));
        }
        if (self.pixel_x - self.source_x).signum() != -bucket_side {
            return Err(Error::config("pixel_x", "pixel plane must be on the opposite side from the bucket"));
        }
        let half_y = 0.5 * g.slit_width + g.side_length;
        let (lo, hi) = (g.slab_center[1] - half_y, g.slab_center[1] + half_y);
        if !(self.s_min <= g.slab_center[1] && self.s_max >= g.slab_center[1]) {
            return Err(Error::config("s_min", "scan must cover the slit"));
        }
        if self.s_min > lo + 0.25 * g.side_length || self.s_max < hi - 0.25 * g.side_length {
            return Err(Error::config("s_max", "scan must reach into both slab arms"));
        }
        Ok(())
    }
}

/// All-cell positive-frequency amplitude `sum_i c_i(r_j, t) g_i` for a batch of packets.
fn amplitude_fields(basis: &ModeBasis, packets: &[&SpectralAmplitudes], time: f64) -> Result<Vec<Vec<Complex64>>> {
    let k = basis.kept_count();
    let cols = 2 * packets.len();
    let mut coeff = Mat::<f64>::zeros(k, cols);
    for (p, g) in packets.iter().enumerate() {
        if g.len() != k {
            return Err(Error::LengthMismatch { expected: k, found: g.len() });
        }
        for (i, (&w, z)) in basis.omegas().iter().zip(g.as_slice()).enumerate() {
            let c = z * Complex64::from_polar((0.5 / w).sqrt(), -w * time);
            coeff.write(i, 2 * p, c.re);
            coeff.write(i, 2 * p + 1, c.im);
        }
    }
    let field = basis.modes() * &coeff;
    Ok((0..packets.len())
        .map(|p| {
            (0..field.nrows())
                .map(|j| Complex64::new(field.read(j, 2 * p), field.read(j, 2 * p + 1)))
                .collect()
        })
        .collect())
}

/// Bucket cells for a configuration.
pub fn bucket_cells(cfg: &GhostScanConfig, grid: &Grid) -> Result<Vec<usize>> {
    let axis = grid
        .cell_at([cfg.bucket_x, cfg.geometry.slab_center[1]])
        .ok_or_else(|| Error::config("bucket_x", "outside the domain"))?;
    let (ix, _) = grid.coords(axis);
    let ny = grid.counts()[1];
    let cells: Vec<usize> = match cfg.bucket_mode {
        BucketMode::Point => vec![axis],
        BucketMode::Column => (0..ny)
            .map(|iy| grid.index(ix, iy))
            .filter(|&j| match cfg.bucket_half_height {
                Some(h) => (grid.cell_center(j)[1] - cfg.geometry.slab_center[1]).abs() <= h,
                None => true,
            })
            .collect(),
    };
    if cells.is_empty() {
        return Err(Error::config("bucket_half_height", "bucket covers no cells"));
    }
    Ok(cells)
}

/// Cell nearest to `(x, s)`. Heights on a cell boundary resolve away from
/// `axis`, so mirror-image heights land on mirror-image cells.
pub fn pixel_cell(grid: &Grid, x: f64, s: f64, axis: f64) -> Result<usize> {
    let column = grid
        .cell_at([x, axis])
        .ok_or_else(|| Error::config("pixel_x", "pixel outside the domain"))?;
    let (ix, _) = grid.coords(column);
    let dy = grid.cell_size()[1];
    let oy = grid.origin()[1];
    let ny = grid.counts()[1] as i64;
    let f = (s - oy) / dy - 0.5;
    let base = f.floor();
    let frac = f - base;
    let iy = if (frac - 0.5).abs() < 1e-9 {
        if s >= axis { base + 1.0 } else { base }
    } else {
        f.round()
    } as i64;
    Ok(grid.index(ix, iy.rem_euclid(ny) as usize))
}

/// Correlation terms at one launch height on a solved geometry.
pub fn ghost_point_terms(
    cfg: &GhostScanConfig,
    basis: &ModeBasis,
    bucket: &[usize],
    s: f64,
) -> Result<(Vec<CfTerms>, [f64; 2])> {
    let grid = basis.grid();
    let packet = |dir: f64| WavepacketSpec {
        center: [cfg.source_x, s],
        direction: [dir, 0.0],
        center_frequency: cfg.center_frequency,
        spectral_std: cfg.spectral_std(),
        transverse_std: Some(cfg.transverse_std),
    };
    let left = project_packet(basis, &packet_profile(&packet(-1.0), grid)?)?;
    let right = project_packet(basis, &packet_profile(&packet(1.0), grid)?)?;
    let gamma = overlap(&left.amplitudes, &right.amplitudes)?;
    let [tb, tp] = cfg.detection_times();
    let pixel = pixel_cell(grid, cfg.pixel_x, s, cfg.geometry.slab_center[1])?;
    let at_bucket = amplitude_fields(basis, &[&left.amplitudes, &right.amplitudes], tb)?;
    let beta = BranchAmplitudes::from_field(&basis.field_row(pixel, tp)?, &left.amplitudes, &right.amplitudes)?;
    let terms = cfg
        .photons_sorted()
        .into_iter()
        .map(|n| {
            let mut acc: Option<CfTerms> = None;
            for &j in bucket {
                let alpha = BranchAmplitudes {
                    left: at_bucket[0][j],
                    right: at_bucket[1][j],
                };
                let t = noon_terms(n, 0.0, gamma, alpha, beta)?;
                match acc.as_mut() {
                    Some(a) => a.accumulate_alpha(&t),
                    None => acc = Some(t),
                }
            }
            acc.ok_or(Error::config("bucket", "empty bucket"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((terms, [left.capture, right.capture]))
}

impl GhostScanConfig {
    pub fn photons_sorted(&self) -> Vec<u32> {
        let mut v = self.photon_numbers.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Perturbation suffix used in file names: `m10`, `0`, `p10`.
pub fn perturbation_tag(fraction: f64) -> String {
    let pct = (fraction * 100.0).round() as i64;
    match pct {
        0 => "0".into(),
        p if p < 0 => format!("m{}", -p),
        p => format!("p{p}"),
    }
}

/// Scan of one (possibly perturbed) geometry.
pub fn run_ghost_geometry(cfg: &GhostScanConfig, fraction: f64) -> Result<SweepResult> {
    cfg.validate()?;
    let geom = cfg.geometry.perturbed(fraction);
    let map = build_ghost_geometry(&geom)?;
    let started = Instant::now();
    let ops = build_operators_2d_tmz(&map)?;
    let basis = solve_modes(&ops, default_omega_floor(&map))?;
    let solve_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let bucket = bucket_cells(cfg, basis.grid())?;
    let s = cfg.s_values();
    let points: Vec<(Vec<CfTerms>, [f64; 2])> = s
        .par_iter()
        .map(|&si| ghost_point_terms(cfg, &basis, &bucket, si))
        .collect::<Result<_>>()?;

    let mut result = SweepResult::new("s", s.clone());
    for (k, n) in cfg.photons_sorted().into_iter().enumerate() {
        let terms: Vec<CfTerms> = points.iter().map(|(t, _)| t[k]).collect();
        let reg = Regularization::from_peaks(cfg.eps_reg, &terms);
        let comps = terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| finish(t, &reg).map_err(|e| at_point(i, n, e)))
            .collect::<Result<Vec<_>>>()?;
        result.push_cf(n, comps)?;
    }
    result.push_column("object_footprint", s.iter().map(|&v| geom.footprint(v)).collect())?;
    result.meta.label = format!("ghost-scan_{}", perturbation_tag(fraction));
    result.meta.mode_count = basis.kept_count();
    result.meta.eigen_residual = basis.eigen_residual();
    result.meta.capture = points.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    result.meta.solve_seconds = solve_seconds;
    result.meta.sweep_seconds = started.elapsed().as_secs_f64();
    Ok(result)
}

/// One result per configured slit-width perturbation, in config order.
pub fn run_ghost_scan(cfg: &GhostScanConfig) -> Result<Vec<(f64, SweepResult)>> {
    cfg.validate()?;
    cfg.perturbations
        .iter()
        .map(|&f| Ok((f, run_ghost_geometry(cfg, f)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slit_must_be_narrower_than_arms() {
        let g = GhostGeometry {
            slit_width: 0.2,
            side_length: 0.17,
            ..GhostGeometry::default()
        };
        assert!(matches!(g.validate(), Err(Error::Geometry(_))));
        assert_eq!(g.validate().unwrap_err().class(), crate::ErrorClass::Config);
    }

    #[test]
    fn slab_cells_match_footprint() {
        let g = GhostGeometry::default();
        let map = build_ghost_geometry(&g).unwrap();
        let grid = map.grid();
        let [dx, dy] = grid.cell_size();
        let filled = map.eps().iter().filter(|&&e| e > 1.0).count();
        // Two arms, thickness by side length, to within one cell row per edge.
        let nominal = 2.0 * g.thickness * g.side_length / (dx * dy);
        let slack = 2.0 * (g.thickness / dx + 2.0) * 2.0 + 4.0 * (g.side_length / dy + 2.0);
        assert!((filled as f64 - nominal).abs() <= slack, "{filled} vs {nominal}");
        // The slit stays open on the axis.
        let centre = grid.cell_at(g.slab_center).unwrap();
        assert_eq!(map.eps()[centre], 1.0);
    }

    #[test]
    fn perturbation_only_moves_the_slit() {
        let g = GhostGeometry::default();
        let wide = g.perturbed(0.1);
        assert!((wide.slit_width - 1.1 * g.slit_width).abs() < 1e-15);
        assert_eq!(wide.side_length, g.side_length);
        let grid = g.grid().unwrap();
        for j in 0..grid.dof() {
            let p = grid.cell_center(j);
            let dy = (p[1] - g.slab_center[1]).abs();
            if wide.in_slab(p) {
                assert!(dy >= 0.5 * wide.slit_width);
            }
            if g.in_slab(p) && dy >= 0.5 * wide.slit_width && dy < 0.5 * wide.slit_width + g.side_length {
                assert!(wide.in_slab(p));
            }
        }
    }

    #[test]
    fn footprint_profile() {
        let g = GhostGeometry::default();
        assert_eq!(g.footprint(0.0), 0.0);
        assert_eq!(g.footprint(0.1), 1.0);
        assert_eq!(g.footprint(-0.1), 1.0);
        assert_eq!(g.footprint(0.3), 0.0);
    }

    #[test]
    fn tags() {
        assert_eq!(perturbation_tag(-0.1), "m10");
        assert_eq!(perturbation_tag(0.0), "0");
        assert_eq!(perturbation_tag(0.1), "p10");
    }

    #[test]
    fn pixel_cells_mirror() {
        let grid = GhostGeometry::default().grid().unwrap();
        let dy = grid.cell_size()[1];
        for k in 0..28 {
            // Cell boundaries and centres alike.
            for s in [k as f64 * dy, (k as f64 + 0.5) * dy, k as f64 * dy + 0.3 * dy] {
                // On an even grid the axis itself is a boundary with no mirror cell.
                if s == 0.0 {
                    continue;
                }
                let up = grid.cell_center(pixel_cell(&grid, 0.3, s, 0.0).unwrap())[1];
                let down = grid.cell_center(pixel_cell(&grid, 0.3, -s, 0.0).unwrap())[1];
                assert!((up + down).abs() < 1e-12, "s = {s}: {up} vs {down}");
            }
        }
    }

    #[test]
    fn scan_config_checks() {
        let cfg = GhostScanConfig::default();
        cfg.validate().unwrap();
        assert!((GhostScanConfig { spectral_std: None, ..cfg.clone() }.spectral_std() - 1.56 / 2.354_820_045).abs() < 1e-8);
        let bad = GhostScanConfig {
            photon_numbers: vec![3],
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let bucket = bucket_cells(&cfg, &cfg.geometry.grid().unwrap()).unwrap();
        assert_eq!(bucket.len(), cfg.geometry.cells[1]);
    }
}
