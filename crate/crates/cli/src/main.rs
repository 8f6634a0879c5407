//! `splatgate`: batch orchestration of scene editing, rendering, scoring and gating.
//!
//! Exit status: 0 when the gate passes (or the subcommand has no verdict),
//! 2 when the gate fails, 1 on any execution error.

mod config;
mod dataset;
mod fixture;
mod pipeline;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use splatgate_core::coverage::{CoverageOptions, DEFAULT_MIN_OBSERVATIONS};
use splatgate_core::metrics::{Palette, DEFAULT_IOU_THRESHOLD};
use splatgate_core::report::{apply_gate, emit_report, Baseline, GateConfig, MetricReport, Verdict};
use splatgate_core::sampler::SweepSpec;
use splatgate_core::scene::{load_scene, load_trajectory, save_scene, scene_hash, SceneGraph};

use config::RunConfig;
use dataset::Dataset;
use pipeline::{stage, write_json, EvalSettings, PoseSet, RenderIndex};

#[derive(Parser, Debug)]
#[command(name = "splatgate", version, about = "Fidelity gating for edited Gaussian splat scenes")]
struct Cli {
    /// Worker threads for per-frame parallelism.
    #[arg(long, global = true, env = "SPLATGATE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SceneArgs {
    /// Splat point cloud (binary PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Scene manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
}

impl SceneArgs {
    fn load(&self) -> Result<SceneGraph> {
        load_scene(&self.scene, &self.manifest).with_context(|| format!("scene {}", self.scene.display()))
    }
}

#[derive(Args, Debug, Clone)]
struct CoverageArgs {
    #[arg(long, default_value_t = DEFAULT_MIN_OBSERVATIONS)]
    min_observations: usize,
    /// Count a training frame only if the node wins pixels in its render.
    #[arg(long)]
    occlusion_aware: bool,
}

impl CoverageArgs {
    fn options(&self) -> CoverageOptions {
        CoverageOptions {
            min_observations: self.min_observations,
            occlusion_aware: self.occlusion_aware,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scene statistics, plus coverage tags when a trajectory and camera are given.
    Inspect {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, requires = "camera")]
        trajectory: Option<PathBuf>,
        #[arg(long, requires = "trajectory")]
        camera: Option<PathBuf>,
        #[command(flatten)]
        coverage: CoverageArgs,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an edit script and write the edited scene.
    Edit {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        edits: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offset a training trajectory into sweep poses.
    SamplePoses {
        #[arg(long)]
        trajectory: PathBuf,
        /// Sweep spec (JSON); the default lateral/longitudinal/vertical sweep when absent.
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render poses to images, instance rasters, class masks and boxes.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        /// `poses.json` from `sample-poses`.
        #[arg(long)]
        poses: PathBuf,
        /// Cameras and palette from a dataset manifest.
        #[arg(long, conflicts_with = "camera")]
        dataset: Option<PathBuf>,
        /// Single camera file, used when no dataset is given.
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long, conflicts_with = "dataset")]
        palette: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score renders against the dataset's ground truth.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory written by `render`.
        #[arg(long)]
        renders: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou_threshold: f64,
        #[arg(long)]
        scenario_id: Option<String>,
    },
    /// Apply a gate to a metric report against its ground-truth baseline report.
    Gate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        /// Gate config (JSON); the 10% relative-drop preset when absent.
        #[arg(long)]
        gate_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Viewpoint coverage tags for dynamic nodes.
    Coverage {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        /// Node ids; every dynamic node when absent.
        #[arg(long = "node")]
        nodes: Vec<String>,
        #[command(flatten)]
        coverage: CoverageArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline from a config file; flags override config values.
    Run(RunArgs),
    /// Write a seeded synthetic street dataset with a ready-to-run config.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Training frames (one ground-truth frame per frame and sweep bin).
        #[arg(long, default_value_t = 8)]
        frames: usize,
        /// Single zero-offset lateral bin instead of the default sweep.
        #[arg(long)]
        zero_offset: bool,
        /// Position noise on the pipeline scene, meters.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Run config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    scene: Option<PathBuf>,
    #[arg(long, requires = "scene")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    edits: Option<PathBuf>,
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    gate_config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    min_observations: Option<usize>,
    #[arg(long)]
    occlusion_aware: bool,
    #[arg(long)]
    scenario_id: Option<String>,
    /// Recorded only; the pipeline itself draws no random numbers.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn config(&self, threads: Option<usize>) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            scenario_id: self.scenario_id.clone(),
            dataset: self.dataset.clone(),
            scene: self.scene.clone(),
            manifest: self.manifest.clone(),
            edits: self.edits.clone(),
            sweep: self.sweep.clone(),
            gate_config: self.gate_config.clone(),
            out: self.out.clone(),
            iou_threshold: self.iou_threshold,
            min_observations: self.min_observations,
            occlusion_aware: self.occlusion_aware.then_some(true),
            seed: self.seed,
            threads,
        };
        Ok(file.merged(flags))
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct NodeStats {
    id: String,
    class: String,
    gaussians: usize,
    track_keys: usize,
    rigidity_caveat: bool,
}

#[derive(Serialize)]
struct SceneStats {
    scene_hash: String,
    gaussians: usize,
    frame_rate: f64,
    time_span: [f64; 2],
    nodes: Vec<NodeStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<pipeline::CoverageDoc>,
}

fn scene_stats(scene: &SceneGraph) -> SceneStats {
    SceneStats {
        scene_hash: scene_hash(scene),
        gaussians: scene.gaussians.len(),
        frame_rate: scene.frame_rate,
        time_span: scene.time_span,
        nodes: scene
            .nodes
            .iter()
            .map(|n| NodeStats {
                id: n.id.clone(),
                class: n.class.as_str().into(),
                gaussians: n.indices.len(),
                track_keys: n.pose_track.len(),
                rigidity_caveat: n.has_rigidity_caveat(),
            })
            .collect(),
        coverage: None,
    }
}

/// Outcome of a subcommand: a gate verdict, or nothing to judge.
fn execute(cli: Cli) -> Result<Option<Verdict>> {
    match cli.command {
        Command::Inspect {
            scene,
            trajectory,
            camera,
            coverage,
            out,
        } => {
            let g = scene.load()?;
            let mut stats = scene_stats(&g);
            if let (Some(t), Some(c)) = (trajectory, camera) {
                let training = load_trajectory(&t).with_context(|| format!("trajectory {}", t.display()))?;
                let cam = pipeline::load_camera(&c)?;
                stats.coverage = Some(pipeline::coverage_tags(
                    &g,
                    &training,
                    &cam,
                    &pipeline::dynamic_nodes(&g),
                    &coverage.options(),
                )?);
            }
            emit_json(&stats, out.as_deref())?;
            Ok(None)
        }
        Command::Edit { scene, edits, out } => {
            let g = scene.load()?;
            let edited = pipeline::edit_scene(&g, &edits)?;
            pipeline::create_dir(&out)?;
            save_scene(&edited.scene, out.join("scene.ply"), out.join("scene.json"))?;
            write_json(&out.join("edit_log.json"), &edited.log)?;
            for w in &edited.log.warnings {
                eprintln!("warning: {w}");
            }
            Ok(None)
        }
        Command::SamplePoses { trajectory, sweep, out } => {
            let training =
                load_trajectory(&trajectory).with_context(|| format!("trajectory {}", trajectory.display()))?;
            let spec = match sweep {
                Some(p) => SweepSpec::load(p)?,
                None => SweepSpec::default(),
            };
            spec.validate()?;
            let poses = pipeline::sample_poses(&training, &spec)?;
            pipeline::create_dir(&out)?;
            write_json(&out.join("poses.json"), &poses)?;
            Ok(None)
        }
        Command::Render {
            scene,
            poses,
            dataset,
            camera,
            palette,
            out,
        } => {
            let g = scene.load()?;
            let poses: PoseSet = pipeline::read_json(&poses)?;
            let (cameras, palette) = match (dataset, camera) {
                (Some(d), _) => {
                    let ds = Dataset::load(&d)?;
                    let palette = match &ds.doc.palette {
                        Some(p) => Palette::load(p)?,
                        None => pipeline::default_palette(),
                    };
                    (ds.doc.cameras, palette)
                }
                (None, Some(c)) => {
                    let palette = match palette {
                        Some(p) => Palette::load(p)?,
                        None => pipeline::default_palette(),
                    };
                    (vec![pipeline::load_camera(&c)?], palette)
                }
                (None, None) => bail!("render needs --dataset or --camera"),
            };
            pipeline::render_all(&g, &poses, &cameras, &palette, &out)?;
            Ok(None)
        }
        Command::Eval {
            dataset,
            renders,
            out,
            iou_threshold,
            scenario_id,
        } => {
            let ds = Dataset::load(&dataset)?;
            ds.validate()?;
            let index: RenderIndex = pipeline::read_json(&renders.join(pipeline::RENDER_INDEX))?;
            let cfg = RunConfig {
                scenario_id,
                ..Default::default()
            };
            let settings = EvalSettings {
                scenario_id: run::scenario_id(&cfg, &dataset),
                iou_threshold,
                scene_hash: Some(index.scene_hash.clone()),
                edit_script_hash: None,
                caveats: Vec::new(),
                diff_dir: Some(&out.join("diff")),
            };
            let eval = pipeline::evaluate(&ds, &renders, &index, &settings)?;
            emit_report(&eval.observed, None, &out)?;
            emit_report(&eval.baseline, None, out.join("baseline"))?;
            Ok(None)
        }
        Command::Gate {
            report,
            baseline,
            gate_config,
            out,
        } => {
            let read = |p: &Path| -> Result<MetricReport> {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                MetricReport::from_json(&text).with_context(|| format!("malformed report {}", p.display()))
            };
            let observed = read(&report)?;
            let base = read(&baseline)?;
            let cfg = match gate_config {
                Some(p) => GateConfig::load(p)?,
                None => GateConfig::default(),
            };
            run::check_detector_baseline(&cfg, base.provenance.detector_source.as_deref())?;
            let decision = apply_gate(&observed, Baseline::Report(&base), &cfg)?;
            emit_report(&observed, Some(&decision), &out)?;
            Ok(Some(decision.overall))
        }
        Command::Coverage {
            scene,
            trajectory,
            camera,
            nodes,
            coverage,
            out,
        } => {
            let g = scene.load()?;
            let training =
                load_trajectory(&trajectory).with_context(|| format!("trajectory {}", trajectory.display()))?;
            let cam = pipeline::load_camera(&camera)?;
            let nodes = if nodes.is_empty() { pipeline::dynamic_nodes(&g) } else { nodes };
            let doc = pipeline::coverage_tags(&g, &training, &cam, &nodes, &coverage.options())?;
            emit_json(&doc, out.as_deref())?;
            Ok(None)
        }
        Command::Run(args) => {
            let cfg = args.config(cli.threads)?;
            run::run_pipeline(&cfg).map(Some)
        }
        Command::Synth {
            seed,
            out,
            frames,
            zero_offset,
            jitter,
        } => {
            let opts = fixture::SynthOptions {
                seed,
                frames,
                zero_offset,
                jitter,
            };
            let run_path = stage("synth", || fixture::write_dataset(&out, &opts))?;
            println!("{}", run_path.display());
            Ok(None)
        }
    }
}

fn configure_threads(cli: &Cli) -> Result<()> {
    let mut threads = cli.threads;
    if let (None, Command::Run(args)) = (threads, &cli.command) {
        if let Some(p) = &args.config {
            threads = RunConfig::load(p)?.threads;
        }
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure worker threads")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(&cli).and_then(|_| execute(cli));
    match result {
        Ok(Some(Verdict::Fail)) => {
            eprintln!("gate: FAIL");
            ExitCode::from(2)
        }
        Ok(Some(Verdict::Pass)) => {
            eprintln!("gate: PASS");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
