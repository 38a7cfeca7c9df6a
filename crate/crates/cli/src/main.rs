use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gcslam_core::experiment::{
    self, ablated, dataset_summary, map_quality, run_all, run_localization, run_mapping, trajectory_metrics, write_run_all,
    ExperimentConfig, PRESETS,
};
use gcslam_core::io;
use gcslam_core::sfloc::run_sfloc;
use gcslam_core::svg::{self, Track};
use gcslam_core::Error;

/// Exit status for invalid configuration or command-line usage.
const EXIT_CONFIG: u8 = 2;
/// Exit status for failures while running a stage (I/O, malformed input, numerical failure).
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(name = "parkslam", version, about = "Parking-lot semantic SLAM and map-based localization on simulated data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a lot plus mapping and revisit drives into <out>/mapping and <out>/revisit.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a map from a dataset.
    Gcslam {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Do not create adjacent-slot factors.
        #[arg(long)]
        no_aet: bool,
        /// Do not create global-direction factors.
        #[arg(long)]
        no_gvet: bool,
        /// Stabilize slots on creation instead of filtering them.
        #[arg(long)]
        no_filter: bool,
    },
    /// Localize a dataset against a map.
    Sfloc {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also run the ICP-only and label-blind baselines.
        #[arg(long)]
        baselines: bool,
    },
    /// Compare a trajectory with a reference and optionally score a map.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, requires = "truth")]
        map: Option<PathBuf>,
        /// Dataset directory holding the true lot.
        #[arg(long, requires = "map")]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Render a map and/or trajectories to SVG.
    Plot {
        #[arg(long)]
        map: Option<PathBuf>,
        /// Trajectory CSV; repeatable.
        #[arg(long = "traj")]
        trajectories: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, map, relocalize, evaluate and plot.
    RunAll {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the ablated mapping runs.
        #[arg(long)]
        skip_ablations: bool,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (square-loop, zero-noise).
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the configuration's seed; required with --preset.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

impl ConfigArgs {
    fn resolve(&self) -> gcslam_core::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, preset) => {
                let seed = self.seed.ok_or_else(|| Error::Config("--seed is required unless --config sets one".into()))?;
                ExperimentConfig::preset(preset.as_deref().unwrap_or(PRESETS[0]), seed)?
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.noise.seed = seed;
        }
        Ok(cfg)
    }

    /// For stages that only read the algorithm settings, where no seed is needed.
    fn resolve_settings(&self) -> gcslam_core::Result<ExperimentConfig> {
        if self.config.is_none() && self.seed.is_none() {
            return ExperimentConfig::preset(self.preset.as_deref().unwrap_or(PRESETS[0]), 0);
        }
        self.resolve()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn run(cmd: Cmd) -> gcslam_core::Result<()> {
    match cmd {
        Cmd::Simulate { cfg, out } => {
            let cfg = cfg.resolve()?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let (mapping, revisit) = experiment::generate_datasets(&cfg)?;
            io::write_dataset(&out.join("mapping"), &mapping)?;
            io::write_dataset(&out.join("revisit"), &revisit)?;
            println!("mapping: {}", dataset_summary(&mapping));
            println!("revisit: {}", dataset_summary(&revisit));
            println!("written to {}", out.display());
        }
        Cmd::Gcslam { cfg, dataset, out, no_aet, no_gvet, no_filter } => {
            let cfg = cfg.resolve_settings()?;
            let mut g = cfg.gcslam.clone();
            for (on, name) in [(no_aet, "no-aet"), (no_gvet, "no-gvet"), (no_filter, "no-filter")] {
                if on {
                    g = ablated(&g, name)?;
                }
            }
            let ds = io::read_dataset(&dataset)?;
            let run = run_mapping(&g, &ds)?;
            io::create_dir(&out)?;
            io::write_map(&out.join("map.json"), &run.map)?;
            io::write_trajectory(&out.join("gcslam_trajectory.csv"), &run.slam.trajectory())?;
            io::write_optimization_log(&out.join("gcslam_optimization.csv"), run.slam.optimization_log())?;
            let m = &run.metrics;
            println!(
                "{} keyframes, {} stable slots ({} adjacent pairs); ATE {:.4} m vs odometry {:.4} m",
                m.keyframes, m.map.stable_slots, m.map.adjacent_pairs, m.gcslam_ate_m, m.odometry_ate_m
            );
        }
        Cmd::Sfloc { cfg, map, dataset, out, baselines } => {
            let cfg = cfg.resolve_settings()?;
            let map = io::read_map(&map)?;
            let ds = io::read_dataset(&dataset)?;
            io::create_dir(&out)?;
            if baselines {
                let r = run_localization(&cfg.sfloc, &map, &ds)?;
                io::write_trajectory(&out.join("sfloc_trajectory.csv"), &r.sfloc)?;
                io::write_icp_diagnostics(&out.join("sfloc_icp.csv"), &r.sfloc_diagnostics)?;
                io::write_trajectory(&out.join("icp_only_trajectory.csv"), &r.icp_only)?;
                io::write_trajectory(&out.join("label_blind_trajectory.csv"), &r.label_blind)?;
                let m = &r.metrics;
                println!(
                    "ATE sf-loc {:.4} m, icp-only {:.4} m, label-blind {:.4} m, odometry {:.4} m",
                    m.sfloc_ate_m, m.icp_only_ate_m, m.label_blind_ate_m, m.odometry_ate_m
                );
            } else {
                let clouds = ds.semantic.iter().map(|f| (f.frame, &f.cloud)).collect();
                let (traj, diags) = run_sfloc(&map.semantic_cloud, &cfg.sfloc, ds.start_pose()?, &ds.odometry, &clouds)?;
                io::write_trajectory(&out.join("sfloc_trajectory.csv"), &traj)?;
                io::write_icp_diagnostics(&out.join("sfloc_icp.csv"), &diags)?;
                let accepted = diags.iter().filter(|d| d.accepted).count();
                println!("{} frames localized, {accepted}/{} ICP results accepted", traj.len(), diags.len());
            }
        }
        Cmd::Eval { est, reference, map, truth, format } => {
            let t = trajectory_metrics(&io::read_trajectory(&est)?, &io::read_trajectory(&reference)?)?;
            let mut rows: Vec<(&str, String)> = vec![
                ("frames", t.frames.to_string()),
                ("length_m", format!("{:.6}", t.length_m)),
                ("ate_m", format!("{:.6}", t.ate_m)),
                ("nees_pct", format!("{:.6}", t.nees_pct)),
                ("final_error_m", format!("{:.6}", t.final_error_m)),
            ];
            if let (Some(map), Some(truth)) = (map, truth) {
                let q = map_quality(&io::read_map(&map)?, &io::read_world(&truth)?);
                let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
                rows.extend([
                    ("stable_slots", q.stable_slots.to_string()),
                    ("false_slots", q.false_slots.to_string()),
                    ("adjacent_pairs", q.adjacent_pairs.to_string()),
                    ("mean_slot_error_m", opt(q.mean_slot_error_m)),
                    ("max_slot_error_m", opt(q.max_slot_error_m)),
                    ("swe_cm", opt(q.swe_cm)),
                    ("ae_cm", opt(q.ae_cm)),
                    ("row_deviation_deg", opt(q.row_deviation_deg)),
                ]);
            }
            match format {
                Format::Csv => {
                    println!("metric,value");
                    for (k, v) in rows {
                        println!("{k},{v}");
                    }
                }
                Format::Table => {
                    for (k, v) in rows {
                        println!("{k:<20} {v:>14}");
                    }
                }
            }
        }
        Cmd::Plot { map, trajectories, out } => {
            if map.is_none() && trajectories.is_empty() {
                return Err(Error::Config("plot needs --map or at least one --traj".into()));
            }
            let map = map.as_deref().map(io::read_map).transpose()?;
            let loaded: Vec<(String, Vec<_>)> = trajectories
                .iter()
                .map(|p| Ok((file_stem(p), io::read_trajectory(p)?)))
                .collect::<gcslam_core::Result<_>>()?;
            let tracks: Vec<Track> = loaded.iter().map(|(n, t)| Track { name: n, poses: t }).collect();
            io::write_text(&out, &svg::render(map.as_ref(), &tracks))?;
            println!("wrote {}", out.display());
        }
        Cmd::RunAll { cfg, out, skip_ablations } => {
            let mut cfg = cfg.resolve()?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if skip_ablations {
                cfg.ablations = false;
            }
            let run = run_all(&cfg)?;
            write_run_all(&cfg.output_dir, &cfg, &run)?;
            print!("{}", run.report.to_text());
            println!("\nwritten to {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}
