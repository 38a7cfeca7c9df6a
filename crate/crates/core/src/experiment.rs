//! Reproducible experiments: configuration, benchmark presets, dataset generation,
//! evaluation and the full mapping-then-relocalization run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcslam::{run_gcslam, Gcslam, GcslamConfig};
use crate::io::{self, Dataset};
use crate::map::MapDocument;
use crate::metrics::{adjacent_error, ate_rmse, final_pose_error, nees, row_orientation_deviation, slot_width_error, trajectory_length};
use crate::sfloc::{run_icp_only, run_sfloc, IcpDiagnostic, SflocConfig};
use crate::simworld::{
    generate_lot, generate_trajectory, simulate_detections, simulate_odometry, simulate_semantic_frames, BevConfig, LotLayout,
    SimNoiseConfig, WorldModel,
};
use crate::svg::{self, Track};
use crate::{Pose2d, Vec2d};

pub const REPORT_VERSION: u32 = 1;
/// Offset applied to the seed for the revisit traversal's noise.
pub const REVISIT_SEED_OFFSET: u64 = 1_000_003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub rows: usize,
    pub slots_per_row: usize,
    pub slot_width: f64,
    pub slot_depth: f64,
    pub inclined_fraction: f64,
    pub detect_radius: f64,
    /// Trajectory sampling step, meters.
    pub step: f64,
    /// Distance of the loop's vertical legs from the lot's side edges, meters.
    pub route_margin: f64,
    /// Extra distance driven along the first lane after closing the loop, meters.
    pub loop_overlap: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            rows: 6,
            slots_per_row: 32,
            slot_width: 2.5,
            slot_depth: 5.3,
            inclined_fraction: 0.0,
            detect_radius: 8.0,
            step: 0.1,
            route_margin: 4.0,
            loop_overlap: 72.0,
        }
    }
}

impl WorldParams {
    pub fn layout(&self) -> LotLayout {
        LotLayout {
            rows: self.rows,
            slots_per_row: self.slots_per_row,
            slot_width: self.slot_width,
            slot_depth: self.slot_depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.slots_per_row == 0 {
            return Err(Error::Config("the loop route needs rows ≥ 2 and slots_per_row ≥ 1".into()));
        }
        for (name, v) in [("slot_width", self.slot_width), ("slot_depth", self.slot_depth), ("detect_radius", self.detect_radius), ("step", self.step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.inclined_fraction) {
            return Err(Error::Config("inclined_fraction must lie in [0, 1]".into()));
        }
        let w = self.layout().width();
        if !(self.route_margin > 0.0 && 2.0 * self.route_margin < w) || !(self.loop_overlap >= 0.0) {
            return Err(Error::Config("route_margin or loop_overlap out of range".into()));
        }
        Ok(())
    }
}

/// Rectangle along the first and last lanes, driven counter-clockwise, then
/// `overlap` meters more along the first lane so the start area is seen twice.
pub fn loop_route(p: &WorldParams) -> Vec<Vec2d> {
    let l = p.layout();
    let (x0, x1) = (p.route_margin, l.width() - p.route_margin);
    let (y0, y1) = (l.lane_center_y(0), l.lane_center_y(l.rows - 1));
    let mut r = vec![Vec2d::new(x0, y0), Vec2d::new(x1, y0), Vec2d::new(x1, y1), Vec2d::new(x0, y1), Vec2d::new(x0, y0)];
    if p.loop_overlap > 0.0 {
        r.push(Vec2d::new((x0 + p.loop_overlap).min(x1), y0));
    }
    r
}

/// The same rectangle driven clockwise, without overlap.
pub fn revisit_route(p: &WorldParams) -> Vec<Vec2d> {
    let mut r = loop_route(&WorldParams { loop_overlap: 0.0, ..p.clone() });
    r.reverse();
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drives every random stream; `noise.seed` is overwritten with it.
    pub seed: u64,
    #[serde(default)]
    pub world: WorldParams,
    #[serde(default)]
    pub noise: SimNoiseConfig,
    #[serde(default)]
    pub bev: BevConfig,
    #[serde(default)]
    pub gcslam: GcslamConfig,
    #[serde(default)]
    pub sfloc: SflocConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also run the ablated mapping variants.
    #[serde(default = "default_true")]
    pub ablations: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

pub const PRESETS: [&str; 2] = ["square-loop", "zero-noise"];

impl ExperimentConfig {
    /// Named benchmark configurations. `square-loop` is the noisy default benchmark;
    /// `zero-noise` switches every noise source off.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let base = Self {
            seed,
            world: WorldParams::default(),
            noise: SimNoiseConfig { seed, ..SimNoiseConfig::default() },
            bev: BevConfig::default(),
            gcslam: GcslamConfig::default(),
            sfloc: SflocConfig::default(),
            output_dir: default_output_dir(),
            ablations: true,
        };
        match name {
            "square-loop" => Ok(base),
            "zero-noise" => Ok(Self {
                noise: SimNoiseConfig::noiseless(seed),
                bev: BevConfig::noiseless(),
                ..base
            }),
            _ => Err(Error::Config(format!("unknown preset {name:?}; expected one of {}", PRESETS.join(", ")))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_text(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.noise.validate()?;
        self.bev.validate()?;
        self.gcslam.validate()?;
        self.sfloc.validate()
    }

    fn noise_for(&self, seed: u64) -> SimNoiseConfig {
        SimNoiseConfig { seed, ..self.noise.clone() }
    }
}

pub fn generate_world(cfg: &ExperimentConfig) -> Result<WorldModel> {
    let w = &cfg.world;
    generate_lot(w.rows, w.slots_per_row, w.slot_width, w.slot_depth, w.inclined_fraction, cfg.seed)
}

/// Simulates one drive along `route` through `world` with the given noise seed.
pub fn simulate_traversal(cfg: &ExperimentConfig, world: &WorldModel, route: &[Vec2d], seed: u64) -> Result<Dataset> {
    let truth = generate_trajectory(world, route, cfg.world.step)?;
    let noise = cfg.noise_for(seed);
    Ok(Dataset {
        world: world.clone(),
        ground_truth: truth.iter().enumerate().map(|(k, p)| (k as u64, *p)).collect(),
        odometry: simulate_odometry(&truth, &noise),
        detections: simulate_detections(world, &truth, &noise, cfg.world.detect_radius),
        semantic: simulate_semantic_frames(world, &truth, &cfg.bev, seed),
    })
}

/// Mapping drive and revisit drive through the same lot.
pub fn generate_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let world = generate_world(cfg)?;
    let mapping = simulate_traversal(cfg, &world, &loop_route(&cfg.world), cfg.seed)?;
    let revisit = simulate_traversal(cfg, &world, &revisit_route(&cfg.world), cfg.seed.wrapping_add(REVISIT_SEED_OFFSET))?;
    Ok((mapping, revisit))
}

/// Quality of a map against the lot it was built in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapQuality {
    pub stable_slots: usize,
    pub false_slots: usize,
    pub adjacent_pairs: usize,
    /// Largest distance from a mapped slot to its true midpoint.
    pub max_slot_error_m: Option<f64>,
    pub mean_slot_error_m: Option<f64>,
    pub swe_cm: Option<f64>,
    pub ae_cm: Option<f64>,
    pub row_deviation_deg: Option<f64>,
}

pub fn map_quality(map: &MapDocument, world: &WorldModel) -> MapQuality {
    let true_mid: BTreeMap<u64, Vec2d> = world.slots.iter().map(|s| (s.id, s.entry_mid)).collect();
    let errors: Vec<f64> = map
        .slots
        .iter()
        .filter_map(|s| s.truth_id.and_then(|t| true_mid.get(&t)).map(|m| m.distance(s.midpoint())))
        .collect();
    let pairs = map.metric_pairs();
    MapQuality {
        stable_slots: map.slots.len(),
        false_slots: map.false_slots(),
        adjacent_pairs: pairs.len(),
        max_slot_error_m: errors.iter().copied().reduce(f64::max),
        mean_slot_error_m: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        swe_cm: slot_width_error(&pairs, world.true_slot_width).ok(),
        ae_cm: adjacent_error(&pairs).ok(),
        row_deviation_deg: map.direction().and_then(|d| row_orientation_deviation(&pairs, &d).ok()),
    }
}

/// Error of an estimated trajectory against a reference, on shared frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub frames: usize,
    /// Length of the reference trajectory.
    pub length_m: f64,
    pub ate_m: f64,
    pub nees_pct: f64,
    pub final_error_m: f64,
}

pub fn trajectory_metrics(est: &[(u64, Pose2d)], reference: &[(u64, Pose2d)]) -> Result<TrajectoryMetrics> {
    let poses: Vec<Pose2d> = reference.iter().map(|(_, p)| *p).collect();
    let length = trajectory_length(&poses)?;
    let ate = ate_rmse(est, reference)?;
    let frames: std::collections::BTreeSet<u64> = reference.iter().map(|(f, _)| *f).collect();
    Ok(TrajectoryMetrics {
        frames: est.iter().filter(|(f, _)| frames.contains(f)).count(),
        length_m: length,
        ate_m: ate,
        nees_pct: nees(ate, length)?,
        final_error_m: final_pose_error(est, reference)?,
    })
}

/// Mapping quality. Trajectory errors are measured at keyframes, for odometry as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingMetrics {
    pub length_m: f64,
    pub keyframes: usize,
    pub odometry_ate_m: f64,
    pub odometry_nees_pct: f64,
    pub gcslam_ate_m: f64,
    pub gcslam_nees_pct: f64,
    pub gcslam_final_error_m: f64,
    pub map: MapQuality,
}

pub fn evaluate_mapping(ds: &Dataset, slam_traj: &[(u64, Pose2d)], map: &MapDocument) -> Result<MappingMetrics> {
    let truth: Vec<Pose2d> = ds.ground_truth.iter().map(|(_, p)| *p).collect();
    let length = trajectory_length(&truth)?;
    let frames: std::collections::BTreeSet<u64> = slam_traj.iter().map(|(f, _)| *f).collect();
    let odo_kf: Vec<(u64, Pose2d)> = ds.odometry.iter().filter(|o| frames.contains(&o.frame)).map(|o| (o.frame, o.pose)).collect();
    let odometry_ate = ate_rmse(&odo_kf, &ds.ground_truth)?;
    let gcslam_ate = ate_rmse(slam_traj, &ds.ground_truth)?;
    Ok(MappingMetrics {
        length_m: length,
        keyframes: slam_traj.len(),
        odometry_ate_m: odometry_ate,
        odometry_nees_pct: nees(odometry_ate, length)?,
        gcslam_ate_m: gcslam_ate,
        gcslam_nees_pct: nees(gcslam_ate, length)?,
        gcslam_final_error_m: final_pose_error(slam_traj, &ds.ground_truth)?,
        map: map_quality(map, &ds.world),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationMetrics {
    pub length_m: f64,
    pub odometry_ate_m: f64,
    pub sfloc_ate_m: f64,
    pub icp_only_ate_m: f64,
    pub label_blind_ate_m: f64,
    pub sfloc_icp_accepted: usize,
    pub icp_attempts: usize,
    pub icp_only_accepted: usize,
    pub label_blind_accepted: usize,
}

/// Everything produced by one localization run.
#[derive(Debug, Clone)]
pub struct LocalizationRun {
    pub sfloc: Vec<(u64, Pose2d)>,
    pub sfloc_diagnostics: Vec<IcpDiagnostic>,
    pub icp_only: Vec<(u64, Pose2d)>,
    pub icp_only_diagnostics: Vec<IcpDiagnostic>,
    pub label_blind: Vec<(u64, Pose2d)>,
    pub label_blind_diagnostics: Vec<IcpDiagnostic>,
    pub metrics: LocalizationMetrics,
}

pub fn run_localization(cfg: &SflocConfig, map: &MapDocument, ds: &Dataset) -> Result<LocalizationRun> {
    let start = ds.start_pose()?;
    let clouds: BTreeMap<u64, _> = ds.semantic.iter().map(|f| (f.frame, &f.cloud)).collect();
    let cloud = &map.semantic_cloud;
    let (sfloc, sfloc_diagnostics) = run_sfloc(cloud, cfg, start, &ds.odometry, &clouds)?;
    let (icp_only, icp_only_diagnostics) = run_icp_only(cloud, cfg, start, &ds.odometry, &clouds, false)?;
    let (label_blind, label_blind_diagnostics) = run_icp_only(cloud, cfg, start, &ds.odometry, &clouds, true)?;
    let truth: Vec<Pose2d> = ds.ground_truth.iter().map(|(_, p)| *p).collect();
    let accepted = |d: &[IcpDiagnostic]| d.iter().filter(|x| x.accepted).count();
    let metrics = LocalizationMetrics {
        length_m: trajectory_length(&truth)?,
        odometry_ate_m: ate_rmse(&ds.odometry_trajectory(), &ds.ground_truth)?,
        sfloc_ate_m: ate_rmse(&sfloc, &ds.ground_truth)?,
        icp_only_ate_m: ate_rmse(&icp_only, &ds.ground_truth)?,
        label_blind_ate_m: ate_rmse(&label_blind, &ds.ground_truth)?,
        sfloc_icp_accepted: accepted(&sfloc_diagnostics),
        icp_attempts: sfloc_diagnostics.len(),
        icp_only_accepted: accepted(&icp_only_diagnostics),
        label_blind_accepted: accepted(&label_blind_diagnostics),
    };
    Ok(LocalizationRun {
        sfloc,
        sfloc_diagnostics,
        icp_only,
        icp_only_diagnostics,
        label_blind,
        label_blind_diagnostics,
        metrics,
    })
}

/// Mapping variants with factor families or the filter switched off.
pub const ABLATIONS: [(&str, bool, bool, bool); 4] = [
    // name, no_aet, no_gvet, no_filter
    ("no-aet", true, false, false),
    ("no-gvet", false, true, false),
    ("no-filter", false, false, true),
    ("no-gvet+no-filter", false, true, true),
];

pub fn ablated(cfg: &GcslamConfig, name: &str) -> Result<GcslamConfig> {
    let (_, no_aet, no_gvet, no_filter) =
        ABLATIONS.iter().find(|a| a.0 == name).ok_or_else(|| Error::Config(format!("unknown ablation {name:?}")))?;
    Ok(GcslamConfig {
        no_aet: cfg.no_aet || *no_aet,
        no_gvet: cfg.no_gvet || *no_gvet,
        no_filter: cfg.no_filter || *no_filter,
        ..cfg.clone()
    })
}

/// One mapping run and its evaluation.
pub struct MappingRun {
    pub slam: Gcslam,
    pub map: MapDocument,
    pub metrics: MappingMetrics,
}

pub fn run_mapping(cfg: &GcslamConfig, ds: &Dataset) -> Result<MappingRun> {
    let slam = run_gcslam(cfg, &ds.odometry, &ds.detections, &ds.semantic)?;
    let map = slam.export_map();
    let metrics = evaluate_mapping(ds, &slam.trajectory(), &map)?;
    Ok(MappingRun { slam, map, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub metrics: MappingMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub seed: u64,
    pub mapping: MappingMetrics,
    pub localization: LocalizationMetrics,
    pub ablations: Vec<AblationRow>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Plain-text tables.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let mut s = String::new();
        let _ = writeln!(s, "seed {}", self.seed);
        let m = &self.mapping;
        let _ = writeln!(s, "\nmapping ({:.1} m, {} keyframes)", m.length_m, m.keyframes);
        let _ = writeln!(s, "  {:<12} {:>10} {:>10}", "", "ATE [m]", "NEES [%]");
        let _ = writeln!(s, "  {:<12} {:>10.4} {:>10.4}", "odometry", m.odometry_ate_m, m.odometry_nees_pct);
        let _ = writeln!(s, "  {:<12} {:>10.4} {:>10.4}", "gcslam", m.gcslam_ate_m, m.gcslam_nees_pct);
        let l = &self.localization;
        let _ = writeln!(s, "\nlocalization ({:.1} m, {} ICP attempts)", l.length_m, l.icp_attempts);
        let _ = writeln!(s, "  {:<12} {:>10} {:>10}", "", "ATE [m]", "accepted");
        let _ = writeln!(s, "  {:<12} {:>10.4} {:>10}", "odometry", l.odometry_ate_m, "-");
        let _ = writeln!(s, "  {:<12} {:>10.4} {:>10}", "sf-loc", l.sfloc_ate_m, l.sfloc_icp_accepted);
        let _ = writeln!(s, "  {:<12} {:>10.4} {:>10}", "icp-only", l.icp_only_ate_m, l.icp_only_accepted);
        let _ = writeln!(s, "  {:<12} {:>10.4} {:>10}", "label-blind", l.label_blind_ate_m, l.label_blind_accepted);
        let _ = writeln!(s, "\nmap quality");
        let _ = writeln!(
            s,
            "  {:<18} {:>9} {:>8} {:>8} {:>9} {:>7} {:>6} {:>6}",
            "variant", "ATE [m]", "SWE[cm]", "AE[cm]", "row[deg]", "stable", "false", "pairs"
        );
        let rows = std::iter::once(("full", m)).chain(self.ablations.iter().map(|a| (a.name.as_str(), &a.metrics)));
        for (name, m) in rows {
            let q = &m.map;
            let _ = writeln!(
                s,
                "  {:<18} {:>9.4} {:>8} {:>8} {:>9} {:>7} {:>6} {:>6}",
                name,
                m.gcslam_ate_m,
                opt(q.swe_cm),
                opt(q.ae_cm),
                opt(q.row_deviation_deg),
                q.stable_slots,
                q.false_slots,
                q.adjacent_pairs
            );
        }
        s
    }
}

/// Results of a full run, before anything is written.
pub struct RunAll {
    pub mapping_data: Dataset,
    pub revisit_data: Dataset,
    pub mapping: MappingRun,
    pub localization: LocalizationRun,
    pub ablations: Vec<(String, MappingRun)>,
    pub report: Report,
}

/// Simulate, map, relocalize on the revisit drive and evaluate, all in memory.
pub fn run_all(cfg: &ExperimentConfig) -> Result<RunAll> {
    let (mapping_data, revisit_data) = generate_datasets(cfg)?;
    let mapping = run_mapping(&cfg.gcslam, &mapping_data)?;
    let localization = run_localization(&cfg.sfloc, &mapping.map, &revisit_data)?;
    let mut ablations = Vec::new();
    if cfg.ablations {
        for (name, ..) in ABLATIONS {
            ablations.push((name.to_string(), run_mapping(&ablated(&cfg.gcslam, name)?, &mapping_data)?));
        }
    }
    let report = Report {
        version: REPORT_VERSION,
        seed: cfg.seed,
        mapping: mapping.metrics.clone(),
        localization: localization.metrics.clone(),
        ablations: ablations.iter().map(|(n, r)| AblationRow { name: n.clone(), metrics: r.metrics.clone() }).collect(),
    };
    Ok(RunAll {
        mapping_data,
        revisit_data,
        mapping,
        localization,
        ablations,
        report,
    })
}

/// Writes datasets, maps, trajectories, logs, the report and plots under `dir`.
pub fn write_run_all(dir: &Path, cfg: &ExperimentConfig, run: &RunAll) -> Result<()> {
    io::create_dir(dir)?;
    io::write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    io::write_dataset(&dir.join("mapping"), &run.mapping_data)?;
    io::write_dataset(&dir.join("revisit"), &run.revisit_data)?;

    let slam_traj = run.mapping.slam.trajectory();
    io::write_map(&dir.join("map.json"), &run.mapping.map)?;
    io::write_trajectory(&dir.join("gcslam_trajectory.csv"), &slam_traj)?;
    io::write_optimization_log(&dir.join("gcslam_optimization.csv"), run.mapping.slam.optimization_log())?;

    let l = &run.localization;
    io::write_trajectory(&dir.join("sfloc_trajectory.csv"), &l.sfloc)?;
    io::write_trajectory(&dir.join("icp_only_trajectory.csv"), &l.icp_only)?;
    io::write_trajectory(&dir.join("label_blind_trajectory.csv"), &l.label_blind)?;
    io::write_icp_diagnostics(&dir.join("sfloc_icp.csv"), &l.sfloc_diagnostics)?;

    let odo = run.mapping_data.odometry_trajectory();
    let mapping_svg = svg::render(
        Some(&run.mapping.map),
        &[
            Track { name: "ground truth", poses: &run.mapping_data.ground_truth },
            Track { name: "odometry", poses: &odo },
            Track { name: "gcslam", poses: &slam_traj },
        ],
    );
    io::write_text(&dir.join("map.svg"), &mapping_svg)?;
    let revisit_odo = run.revisit_data.odometry_trajectory();
    let loc_svg = svg::render(
        Some(&run.mapping.map),
        &[
            Track { name: "ground truth", poses: &run.revisit_data.ground_truth },
            Track { name: "odometry", poses: &revisit_odo },
            Track { name: "sf-loc", poses: &l.sfloc },
            Track { name: "icp-only", poses: &l.icp_only },
            Track { name: "label-blind", poses: &l.label_blind },
        ],
    );
    io::write_text(&dir.join("localization.svg"), &loc_svg)?;

    if !run.ablations.is_empty() {
        let adir = dir.join("ablations");
        io::create_dir(&adir)?;
        for (name, r) in &run.ablations {
            io::write_map(&adir.join(format!("{name}_map.json")), &r.map)?;
            let t = r.slam.trajectory();
            io::write_text(&adir.join(format!("{name}_map.svg")), &svg::render(Some(&r.map), &[Track { name, poses: &t }]))?;
        }
    }

    io::write_text(&dir.join("report.json"), &run.report.to_json())?;
    io::write_text(&dir.join("report.txt"), &run.report.to_text())
}

/// One-line summary of a dataset.
pub fn dataset_summary(ds: &Dataset) -> String {
    let truth: Vec<Pose2d> = ds.ground_truth.iter().map(|(_, p)| *p).collect();
    let len = trajectory_length(&truth).unwrap_or(0.0);
    let dets: usize = ds.detections.iter().map(|f| f.detections.len()).sum();
    let pts: usize = ds.semantic.iter().map(|f| f.cloud.len()).sum();
    format!(
        "{} frames, {:.1} m, lot {:.1}×{:.1} m with {} slots, {} detections, {} semantic frames ({} points)",
        ds.odometry.len(),
        len,
        ds.world.lot_width,
        ds.world.lot_height,
        ds.world.slots.len(),
        dets,
        ds.semantic.len(),
        pts
    )
}
