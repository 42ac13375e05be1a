//! Manufactured-solution dataset generator.
//!
//! Fields are analytically prescribed functions of geometry and operating
//! condition, so every integral and error metric downstream has an exact,
//! recomputable reference. The recipe is shaped to give the wing-flap
//! family a realistic design-sweep character: drag rises monotonically
//! with flap angle, downforce (negative CzS) deepens and saturates beyond
//! about 1.5-2 degrees, and the efficiency knee |CzS|/CxS lands between 1
//! and 2 degrees.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loads::{integrate_fields, write_fields_csv, AeroCoefficients, FlowConstants};
use crate::mesh::{gen_wing_flap, save_mesh, vertex_normals, SurfaceMesh, WING_FLAP_CHORD};

/// One operating condition.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapPoint {
    pub name: String,
    pub heave_m: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub roll_deg: f64,
    pub steer_deg: f64,
}

impl MapPoint {
    pub fn new(name: &str, heave_m: f64, pitch_deg: f64, yaw_deg: f64, roll_deg: f64, steer_deg: f64) -> Self {
        Self {
            name: name.to_string(),
            heave_m,
            pitch_deg,
            yaw_deg,
            roll_deg,
            steer_deg,
        }
    }

    /// Conditioning vector in the fixed order (heave, pitch, yaw, roll, steer).
    pub fn as_vector(&self) -> [f64; 5] {
        [self.heave_m, self.pitch_deg, self.yaw_deg, self.roll_deg, self.steer_deg]
    }
}

/// Declared admissible ranges for map-point values.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MapPointRanges {
    pub heave_m: (f64, f64),
    pub pitch_deg: (f64, f64),
    pub yaw_deg: (f64, f64),
    pub roll_deg: (f64, f64),
    pub steer_deg: (f64, f64),
}

impl Default for MapPointRanges {
    fn default() -> Self {
        Self {
            heave_m: (-0.05, 0.05),
            pitch_deg: (-1.0, 1.0),
            yaw_deg: (-5.0, 5.0),
            roll_deg: (-2.0, 2.0),
            steer_deg: (-10.0, 10.0),
        }
    }
}

impl MapPointRanges {
    pub fn check(&self, mp: &MapPoint) -> Result<()> {
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if within(mp.heave_m, self.heave_m)
            && within(mp.pitch_deg, self.pitch_deg)
            && within(mp.yaw_deg, self.yaw_deg)
            && within(mp.roll_deg, self.roll_deg)
            && within(mp.steer_deg, self.steer_deg)
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "map point {} is outside the declared ranges",
                mp.name
            )))
        }
    }
}

/// Six named operating points: three straight-line, three cornering.
pub fn default_map_points() -> Vec<MapPoint> {
    vec![
        MapPoint::new("straight_ride", 0.0, 0.0, 0.0, 0.0, 0.0),
        MapPoint::new("straight_low", -0.02, -0.5, 0.0, 0.0, 0.0),
        MapPoint::new("straight_high", 0.02, 0.5, 0.0, 0.0, 0.0),
        MapPoint::new("corner_left", -0.01, 0.2, 3.0, 1.5, 8.0),
        MapPoint::new("corner_right", -0.01, 0.2, -3.0, -1.5, -8.0),
        MapPoint::new("corner_fast", -0.015, 0.4, 1.5, 0.8, 4.0),
    ]
}

/// Constants of the manufactured fields. These are artifact-defined knobs,
/// not physical data; defaults are tuned so the sweep shape described in
/// the module docs holds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldRecipe {
    /// Peak flap pressure-jump coefficient.
    pub cp0: f64,
    /// Flap angle scale of the tanh loading curve, degrees.
    pub alpha0_deg: f64,
    /// Baseline shear, Pa.
    pub tau0: f64,
    /// Relative baseline-shear growth per degree.
    pub tau_alpha: f64,
    /// Peak main-plate pressure bump, Pa.
    pub main_bump_pa: f64,
    /// Bump modulation per degree of pitch.
    pub pitch_gain: f64,
    /// Bump modulation per meter of heave.
    pub heave_gain: f64,
    /// Peak of the tapered main-plate shear, Pa.
    pub main_shear_pa: f64,
    /// Peak of the tapered flap shear at zero angle, Pa.
    pub flap_shear_pa: f64,
    /// Growth of the tapered flap shear, Pa per degree.
    pub flap_shear_slope: f64,
}

impl Default for FieldRecipe {
    fn default() -> Self {
        Self {
            cp0: 0.8,
            alpha0_deg: 1.5,
            tau0: 2.0,
            tau_alpha: 0.05,
            main_bump_pa: 740.0,
            pitch_gain: 0.1,
            heave_gain: 2.0,
            main_shear_pa: 85.0,
            flap_shear_pa: 20.0,
            flap_shear_slope: 23.0,
        }
    }
}

/// Recovers the flap angle encoded in a wing-flap mesh from the trailing
/// edge position (exact up to floating-point rounding).
pub fn wing_flap_alpha_deg(mesh: &SurfaceMesh) -> Result<f64> {
    let te = mesh
        .vertices()
        .iter()
        .cloned()
        .max_by(|a, b| a[0].total_cmp(&b[0]))
        .ok_or_else(|| Error::FieldGeneration("empty mesh".into()))?;
    let dx = te[0] - 1.0;
    if dx <= 1e-9 {
        return Err(Error::FieldGeneration(
            "mesh has no flap extending past x = 1".into(),
        ));
    }
    Ok(te[2].atan2(dx).to_degrees())
}

/// Pointwise manufactured field: pressure and wall shear at a surface point
/// with the given outward normal, on the part named by `pid`.
pub fn field_at(
    pid: &str,
    pos: [f64; 3],
    normal: [f64; 3],
    alpha_deg: f64,
    map: &MapPoint,
    flow: &FlowConstants,
    recipe: &FieldRecipe,
) -> Result<(f64, [f64; 3])> {
    let q = flow.dynamic_pressure();
    let alpha = alpha_deg.to_radians();
    let y_frac = (pos[1] / 0.5).clamp(0.0, 1.0);
    let span_taper = (std::f64::consts::PI * y_frac).sin();
    let base_shear = recipe.tau0 * (1.0 + recipe.tau_alpha * alpha_deg);

    match pid {
        "main" => {
            let bump = (std::f64::consts::PI * pos[0].clamp(0.0, 1.0)).sin() * span_taper;
            let modulation =
                1.0 + recipe.pitch_gain * map.pitch_deg + recipe.heave_gain * map.heave_m;
            let side = sign(normal[2]);
            let p = -side * 0.5 * recipe.main_bump_pa * modulation * bump;
            let tau_x = base_shear + recipe.main_shear_pa * bump;
            Ok((p, [tau_x, 0.0, 0.0]))
        }
        "flap" => {
            // chordwise coordinate along the rotated flap
            let s = (((pos[0] - 1.0) * alpha.cos() + pos[2] * alpha.sin()) / WING_FLAP_CHORD)
                .clamp(0.0, 1.0);
            let taper = (std::f64::consts::PI * s).sin() * span_taper;
            let up = [-alpha.sin(), 0.0, alpha.cos()];
            let side = sign(crate::mesh::dot(normal, up));
            let dp = q * recipe.cp0 * (alpha_deg / recipe.alpha0_deg).tanh();
            let p = -side * 0.5 * dp * taper;
            let tau_x = base_shear
                + (recipe.flap_shear_pa + recipe.flap_shear_slope * alpha_deg) * taper;
            Ok((p, [tau_x, 0.0, 0.0]))
        }
        other => Err(Error::FieldGeneration(format!(
            "no manufactured field for pid {other:?}"
        ))),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-vertex manufactured fields (columns p, taux, tauy, tauz) on a
/// wing-flap mesh. The flap angle is recovered from the geometry.
pub fn manufactured_fields(
    mesh: &SurfaceMesh,
    map: &MapPoint,
    flow: &FlowConstants,
    recipe: &FieldRecipe,
) -> Result<DMatrix<f64>> {
    let pids = mesh.pid_names();
    for required in ["main", "flap"] {
        if !pids.iter().any(|p| p == required) {
            return Err(Error::FieldGeneration(format!(
                "mesh is missing required pid {required:?}"
            )));
        }
    }
    let alpha_deg = wing_flap_alpha_deg(mesh)?;
    let normals = vertex_normals(mesh);
    let n = mesh.vertex_count();
    let mut fields = DMatrix::<f64>::zeros(n, 4);
    for i in 0..n {
        let pos = mesh.vertices()[i];
        // the hinge line x = 1 separates the two parts; both formulas taper
        // to the same values there
        let pid = if pos[0] < 1.0 { "main" } else { "flap" };
        let (p, tau) = field_at(pid, pos, normals[i], alpha_deg, map, flow, recipe)?;
        fields[(i, 0)] = p;
        fields[(i, 1)] = tau[0];
        fields[(i, 2)] = tau[1];
        fields[(i, 3)] = tau[2];
    }
    Ok(fields)
}

/// Ground-truth coefficients for one (alpha, map point): manufactured
/// fields integrated on a 4x-resolution mesh through the loads module.
/// The wind frame is the yaw-rotated body frame of the map point.
pub fn analytic_coefficients(
    alpha_deg: f64,
    map: &MapPoint,
    resolution: usize,
    flow: &FlowConstants,
    recipe: &FieldRecipe,
) -> Result<AeroCoefficients> {
    let mesh = gen_wing_flap(alpha_deg, resolution * 4)?;
    let fields = manufactured_fields(&mesh, map, flow, recipe)?;
    let constants = FlowConstants {
        rho: flow.rho,
        v_inf: flow.v_inf,
        l_ref: flow.l_ref,
        moment_origin: flow.moment_origin,
        ..FlowConstants::with_yaw(map.yaw_deg)
    };
    integrate_fields(&mesh, &fields, &constants)
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

pub const MANIFEST_VERSION: &str = "gist-dataset-1";

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub configurations: usize,
    pub alpha_min_deg: f64,
    pub alpha_max_deg: f64,
    pub resolution: usize,
    pub map_points: Vec<MapPoint>,
    pub seed: u64,
    pub flow: FlowConstants,
    pub recipe: FieldRecipe,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            configurations: 10,
            alpha_min_deg: 0.75,
            alpha_max_deg: 3.0,
            resolution: 24,
            map_points: default_map_points(),
            seed: 7,
            flow: FlowConstants::default(),
            recipe: FieldRecipe::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SampleRecord {
    pub config_id: usize,
    pub alpha_deg: f64,
    pub map_point: String,
    pub mesh_path: String,
    pub fields_path: String,
    pub split: Split,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub seed: u64,
    pub resolution: usize,
    pub alpha_min_deg: f64,
    pub alpha_max_deg: f64,
    pub flow: FlowConstants,
    pub recipe: FieldRecipe,
    pub map_point_ranges: MapPointRanges,
    pub map_points: Vec<MapPoint>,
    pub samples: Vec<SampleRecord>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn mesh_path(&self, sample: &SampleRecord) -> PathBuf {
        self.base_dir.join(&sample.mesh_path)
    }

    pub fn fields_path(&self, sample: &SampleRecord) -> PathBuf {
        self.base_dir.join(&sample.fields_path)
    }

    pub fn samples_in(&self, split: Split) -> Vec<&SampleRecord> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    pub fn map_point(&self, name: &str) -> Option<&MapPoint> {
        self.map_points.iter().find(|m| m.name == name)
    }

    /// Alpha range covered by the training split.
    pub fn train_alpha_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in self.samples_in(Split::Train) {
            lo = lo.min(s.alpha_deg);
            hi = hi.max(s.alpha_deg);
        }
        (lo, hi)
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
    manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(manifest)
}

/// Writes the meshes, field files and manifest for a full dataset:
/// `configurations` flap angles, each evaluated at every map point.
/// Splits are assigned per configuration (never per sample) as 70/15/15.
/// Identical inputs regenerate byte-identical files.
pub fn generate_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if config.configurations < 2 {
        return Err(Error::InvalidParameter(
            "dataset needs at least 2 configurations".into(),
        ));
    }
    if config.map_points.is_empty() {
        return Err(Error::InvalidParameter("dataset needs map points".into()));
    }
    let ranges = MapPointRanges::default();
    for mp in &config.map_points {
        ranges.check(mp)?;
    }
    {
        let mut names: Vec<&str> = config.map_points.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != config.map_points.len() {
            return Err(Error::InvalidParameter("map point names must be unique".into()));
        }
    }

    std::fs::create_dir_all(out_dir.join("meshes"))?;
    std::fs::create_dir_all(out_dir.join("fields"))?;

    let c = config.configurations;
    let alphas: Vec<f64> = (0..c)
        .map(|i| {
            config.alpha_min_deg
                + (config.alpha_max_deg - config.alpha_min_deg) * i as f64 / (c - 1) as f64
        })
        .collect();

    // split by configuration so no flap angle leaks across splits
    let mut order: Vec<usize> = (0..c).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let n_train = ((0.7 * c as f64).floor() as usize).max(1);
    let n_val = ((0.15 * c as f64).floor() as usize).max(1).min(c - n_train - 1);
    let mut split_of = vec![Split::Test; c];
    for (rank, &cfg) in order.iter().enumerate() {
        split_of[cfg] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let mut samples = Vec::with_capacity(c * config.map_points.len());
    for (cfg_id, &alpha) in alphas.iter().enumerate() {
        let mesh = gen_wing_flap(alpha, config.resolution)?;
        let mesh_rel = format!("meshes/config_{cfg_id:03}.obj");
        std::fs::write(out_dir.join(&mesh_rel), save_mesh(&mesh))?;
        for mp in &config.map_points {
            let fields = manufactured_fields(&mesh, mp, &config.flow, &config.recipe)?;
            let fields_rel = format!("fields/config_{cfg_id:03}__{}.csv", mp.name);
            std::fs::write(out_dir.join(&fields_rel), write_fields_csv(&fields))?;
            samples.push(SampleRecord {
                config_id: cfg_id,
                alpha_deg: alpha,
                map_point: mp.name.clone(),
                mesh_path: mesh_rel.clone(),
                fields_path: fields_rel,
                split: split_of[cfg_id],
            });
        }
    }

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.to_string(),
        seed: config.seed,
        resolution: config.resolution,
        alpha_min_deg: config.alpha_min_deg,
        alpha_max_deg: config.alpha_max_deg,
        flow: config.flow.clone(),
        recipe: config.recipe.clone(),
        map_point_ranges: ranges,
        map_points: config.map_points.clone(),
        samples,
        base_dir: out_dir.to_path_buf(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(out_dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Sweep-table row: predicted and (optionally) true coefficients at one
/// flap angle.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha_deg: f64,
    pub cxs: f64,
    pub czs: f64,
    pub efficiency: f64,
    pub truth: Option<(f64, f64, f64)>,
    pub out_of_domain: bool,
}

pub fn write_sweep_csv(rows: &[SweepRow], with_truth: bool) -> String {
    let mut out = String::from("alpha_deg,cxs,czs,efficiency");
    if with_truth {
        out.push_str(",cxs_true,czs_true,efficiency_true");
    }
    out.push_str(",out_of_domain\n");
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{}",
            crate::mesh::fmt_f64(r.alpha_deg),
            crate::mesh::fmt_f64(r.cxs),
            crate::mesh::fmt_f64(r.czs),
            crate::mesh::fmt_f64(r.efficiency)
        );
        if with_truth {
            let (cxs, czs, eff) = r.truth.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            let _ = write!(
                out,
                ",{},{},{}",
                crate::mesh::fmt_f64(cxs),
                crate::mesh::fmt_f64(czs),
                crate::mesh::fmt_f64(eff)
            );
        }
        let _ = writeln!(out, ",{}", r.out_of_domain);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> MapPoint {
        MapPoint::new("straight_ride", 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn alpha_recovery_is_exact() {
        for alpha in [-2.0, -0.5, 0.0, 1.25, 3.0] {
            let mesh = gen_wing_flap(alpha, 8).unwrap();
            let rec = wing_flap_alpha_deg(&mesh).unwrap();
            assert!((rec - alpha).abs() <= 1e-10, "{alpha} -> {rec}");
        }
    }

    #[test]
    fn zero_alpha_means_zero_flap_pressure() {
        let mesh = gen_wing_flap(0.0, 8).unwrap();
        let fields = manufactured_fields(&mesh, &straight(), &FlowConstants::default(), &FieldRecipe::default()).unwrap();
        for (i, v) in mesh.vertices().iter().enumerate() {
            if v[0] > 1.0 {
                assert_eq!(fields[(i, 0)], 0.0, "flap vertex {i} has nonzero pressure");
            }
        }
    }

    #[test]
    fn peak_pressure_jump_matches_tanh_curve() {
        // at the flap center the taper is ~1, so the upper/lower pressure
        // difference reaches q * cp0 * tanh(alpha / alpha0)
        let flow = FlowConstants::default();
        let recipe = FieldRecipe::default();
        let alpha: f64 = 1.5;
        let a = alpha.to_radians();
        let up = [-a.sin(), 0.0, a.cos()];
        let down = [a.sin(), 0.0, -a.cos()];
        let center = [
            1.0 + 0.5 * WING_FLAP_CHORD * a.cos(),
            0.25,
            0.5 * WING_FLAP_CHORD * a.sin(),
        ];
        let (p_upper, _) = field_at("flap", center, up, alpha, &straight(), &flow, &recipe).unwrap();
        let (p_lower, _) = field_at("flap", center, down, alpha, &straight(), &flow, &recipe).unwrap();
        let dp = p_lower - p_upper;
        let expected = flow.dynamic_pressure() * 0.8 * 1.0f64.tanh();
        assert!((dp - expected).abs() <= 1e-9, "dp {dp} vs {expected}");
        assert!((dp - 933.0).abs() <= 0.1, "dp {dp} should be about 933 Pa");
    }

    #[test]
    fn drag_strictly_increasing_over_sweep_grid() {
        let flow = FlowConstants::default();
        let recipe = FieldRecipe::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..13 {
            let alpha = -2.0 + 6.0 * i as f64 / 12.0;
            let c = analytic_coefficients(alpha, &straight(), 6, &flow, &recipe).unwrap();
            assert!(
                c.cxs() > prev,
                "CxS({alpha}) = {} is not above previous {prev}",
                c.cxs()
            );
            prev = c.cxs();
        }
    }

    #[test]
    fn downforce_saturates_and_stays_negative() {
        let flow = FlowConstants::default();
        let recipe = FieldRecipe::default();
        let czs =
            |a: f64| analytic_coefficients(a, &straight(), 6, &flow, &recipe).unwrap().czs();
        let c0 = czs(0.0);
        let c1 = czs(1.0);
        let c3 = czs(3.0);
        let c4 = czs(4.0);
        assert!(c0 < 0.0 && c1 < c0, "downforce must deepen with alpha");
        assert!((c4 - c3).abs() < (c1 - c0).abs(), "increments must shrink");
    }

    #[test]
    fn tanh_term_is_antisymmetric_about_zero() {
        // (CzS(a) + CzS(-a)) / 2 equals the alpha-independent main-plate
        // part, i.e. CzS(0)
        let flow = FlowConstants::default();
        let recipe = FieldRecipe::default();
        let czs =
            |a: f64| analytic_coefficients(a, &straight(), 6, &flow, &recipe).unwrap().czs();
        let mid = 0.5 * (czs(1.0) + czs(-1.0));
        let c0 = czs(0.0);
        assert!(
            (mid - c0).abs() <= 0.01 * c0.abs(),
            "mid {mid} vs CzS(0) {c0}"
        );
    }

    #[test]
    fn efficiency_knee_in_design_window() {
        let flow = FlowConstants::default();
        let recipe = FieldRecipe::default();
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for i in 0..13 {
            let alpha = -2.0 + 6.0 * i as f64 / 12.0;
            let c = analytic_coefficients(alpha, &straight(), 6, &flow, &recipe).unwrap();
            let eff = c.czs().abs() / c.cxs();
            if eff > best.0 {
                best = (eff, alpha);
            }
        }
        assert!(
            best.1 >= 1.0 && best.1 <= 2.0,
            "efficiency argmax at {} deg",
            best.1
        );
    }

    #[test]
    fn generate_dataset_counts_and_splits() {
        let dir = tempfile::tempdir().unwrap();
        let config = DatasetConfig {
            configurations: 10,
            resolution: 6,
            ..DatasetConfig::default()
        };
        let manifest = generate_dataset(&config, dir.path()).unwrap();
        assert_eq!(manifest.samples.len(), 60);
        // split by configuration: a config id never appears in two splits
        let mut split_by_config = std::collections::HashMap::new();
        for s in &manifest.samples {
            let prev = split_by_config.insert(s.config_id, s.split);
            if let Some(p) = prev {
                assert_eq!(p, s.split, "config {} straddles splits", s.config_id);
            }
        }
        let count = |sp: Split| {
            split_by_config.values().filter(|&&v| v == sp).count()
        };
        assert_eq!(count(Split::Train), 7);
        assert_eq!(count(Split::Val), 1);
        assert_eq!(count(Split::Test), 2);
        // field row counts match mesh vertex counts
        for s in manifest.samples.iter().take(6) {
            let mesh = crate::mesh::load_mesh_file(&manifest.mesh_path(s)).unwrap();
            let fields = crate::loads::read_fields_csv_file(&manifest.fields_path(s)).unwrap();
            assert_eq!(fields.nrows(), mesh.vertex_count());
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let config = DatasetConfig {
            configurations: 3,
            resolution: 5,
            ..DatasetConfig::default()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = generate_dataset(&config, d1.path()).unwrap();
        let m2 = generate_dataset(&config, d2.path()).unwrap();
        for (a, b) in m1.samples.iter().zip(&m2.samples) {
            assert_eq!(
                std::fs::read(m1.mesh_path(a)).unwrap(),
                std::fs::read(m2.mesh_path(b)).unwrap()
            );
            assert_eq!(
                std::fs::read(m1.fields_path(a)).unwrap(),
                std::fs::read(m2.fields_path(b)).unwrap()
            );
        }
        assert_eq!(
            std::fs::read_to_string(d1.path().join("manifest.json")).unwrap(),
            std::fs::read_to_string(d2.path().join("manifest.json")).unwrap()
        );
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = DatasetConfig {
            configurations: 2,
            resolution: 5,
            ..DatasetConfig::default()
        };
        let written = generate_dataset(&config, dir.path()).unwrap();
        let loaded = load_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded.version, MANIFEST_VERSION);
        assert_eq!(loaded.samples.len(), written.samples.len());
        assert_eq!(loaded.base_dir, dir.path());
        let (lo, hi) = loaded.train_alpha_range();
        assert!(lo <= hi);
    }

    #[test]
    fn missing_pid_is_generation_error() {
        let mesh = crate::mesh::gen_icosphere(0).unwrap();
        let err = manufactured_fields(
            &mesh,
            &straight(),
            &FlowConstants::default(),
            &FieldRecipe::default(),
        );
        assert!(matches!(err, Err(Error::FieldGeneration(_))));
    }

    #[test]
    fn rejects_map_point_outside_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = DatasetConfig {
            configurations: 2,
            resolution: 5,
            ..DatasetConfig::default()
        };
        config.map_points.push(MapPoint::new("wild", 0.5, 0.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            generate_dataset(&config, dir.path()),
            Err(Error::InvalidParameter(_))
        ));
    }
}
