use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use masklift::pipeline::{self, EvaluateInputs, ProposalMode, RunOptions, Workspace};
use masklift::proposal2d::MergeOrder;
use masklift::synth::{generate_scene, SceneSpec};
use masklift::{Error, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "masklift", version, about = "Open-vocabulary 3D instance proposals from RGB-D scene bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    tau_iou: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau_sim: Option<f64>,
    #[arg(long)]
    tau_depth: Option<f64>,
    #[arg(long)]
    tau_dup: Option<f64>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    min_points: Option<usize>,
    #[arg(long)]
    score_min: Option<f64>,
    #[arg(long)]
    frame_subsample: Option<usize>,
    #[arg(long)]
    order: Option<MergeOrder>,
    /// Neighbors per point in the superpoint graph.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    fz_k: Option<f64>,
    #[arg(long)]
    min_size: Option<usize>,
    /// Superpoint inclusion ratio for snapping external masks, or `none`.
    #[arg(long)]
    snap_fraction: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let pairs: [(&str, Option<String>); 14] = [
            ("workers", self.workers.map(|v| v.to_string())),
            ("tau_iou", self.tau_iou.map(|v| v.to_string())),
            ("tau_sim", self.tau_sim.map(|v| v.to_string())),
            ("tau_depth", self.tau_depth.map(|v| v.to_string())),
            ("tau_dup", self.tau_dup.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("min_points", self.min_points.map(|v| v.to_string())),
            ("score_min", self.score_min.map(|v| v.to_string())),
            ("frame_subsample", self.frame_subsample.map(|v| v.to_string())),
            ("merge_order", self.order.map(|v| v.to_string())),
            ("knn_k", self.k.map(|v| v.to_string())),
            ("fz_k", self.fz_k.map(|v| v.to_string())),
            ("min_size", self.min_size.map(|v| v.to_string())),
            ("snap_fraction", self.snap_fraction.clone()),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                c.set(key, &v)?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Clone)]
struct StageArgs {
    /// Scene bundle directory.
    #[arg(long)]
    scene: PathBuf,
    /// Directory for stage outputs; defaults to the scene directory.
    #[arg(long)]
    work: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

impl StageArgs {
    fn workspace(&self) -> Workspace {
        Workspace::new(&self.scene, self.work.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene bundle with ground truth.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        objects: usize,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        /// Scene description as JSON; replaces seed/objects/frames.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// No floor, objects lifted, cameras above and below.
        #[arg(long)]
        floating: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment the cloud into superpoints.
    Superpoints {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-frame point visibility.
    Project {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lift 2D masks into 3D proposals.
    Propose2d {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter external 3D proposals and fuse with the 2D-guided set.
    Combine {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long, conflicts_with = "only_3d")]
        only_2d: bool,
        #[arg(long)]
        only_3d: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pool per-point open-vocabulary features over proposals and views.
    Features {
        #[command(flatten)]
        stage: StageArgs,
    },
    /// Score proposals against text prompts.
    Query {
        #[command(flatten)]
        stage: StageArgs,
        /// Directory with prompts.json and text_embeddings.o3df, relative to the scene.
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        topk: usize,
    },
    /// AP metrics against ground truth. Paths default to the standard
    /// locations under --scene and --work.
    Evaluate {
        #[arg(long, required_unless_present_all = ["pred", "gt"])]
        scene: Option<PathBuf>,
        #[arg(long)]
        work: Option<PathBuf>,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the cloud colored by proposal.
    ExportPly {
        #[command(flatten)]
        stage: StageArgs,
        /// Proposal file; defaults to the fused set in the work directory.
        #[arg(long)]
        proposals: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage in order, reusing cached outputs.
    Run {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long, conflicts_with = "only_3d")]
        only_2d: bool,
        #[arg(long)]
        only_3d: bool,
        #[arg(long, default_value_t = 10)]
        topk: usize,
        /// Ignore cached stage outputs.
        #[arg(long)]
        force: bool,
        /// Also write the resolved config here.
        #[arg(long)]
        save_config: Option<PathBuf>,
    },
}

fn mode(only_2d: bool, only_3d: bool) -> ProposalMode {
    match (only_2d, only_3d) {
        (true, _) => ProposalMode::Only2d,
        (_, true) => ProposalMode::Only3d,
        _ => ProposalMode::Both,
    }
}

/// Copies a standard artifact to `out` (relative to the work directory) when it names another place.
fn deliver(ws: &Workspace, rel: &str, out: Option<&Path>) -> Result<()> {
    let Some(out) = out else { return Ok(()) };
    let target = ws.work_dir.join(out);
    let source = ws.work_path(rel);
    if target == source || target.components().eq(source.components()) {
        return Ok(());
    }
    let copy = |from: &Path, to: &Path| -> Result<()> {
        if let Some(dir) = to.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
        }
        fs::copy(from, to).map_err(|e| Error::InvalidArgument(format!("{}: {e}", to.display())))?;
        Ok(())
    };
    if source.is_dir() {
        let entries = fs::read_dir(&source).map_err(|e| Error::InvalidArgument(format!("{}: {e}", source.display())))?;
        for e in entries.flatten() {
            copy(&e.path(), &target.join(e.file_name()))?;
        }
        Ok(())
    } else {
        copy(&source, &target)
    }
}

fn staged<T: Send>(stage: &StageArgs, f: impl FnOnce(&Workspace, &PipelineConfig) -> Result<T> + Send) -> Result<T> {
    let config = stage.overrides.resolve()?;
    let ws = stage.workspace();
    pipeline::with_workers(&config, || f(&ws, &config))?
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            seed,
            objects,
            frames,
            spec,
            floating,
            out,
        } => {
            let mut spec = match spec {
                Some(p) => masklift::scene::read_json::<SceneSpec>(&p)?,
                None => SceneSpec::random(seed, objects, frames),
            };
            if floating {
                spec = spec.floating();
            }
            let s = generate_scene(&spec, &out)?;
            println!(
                "wrote {} points, {} frames, {} masks to {}",
                s.scene.num_points(),
                s.scene.frames.len(),
                s.scene.masks.iter().map(Vec::len).sum::<usize>(),
                out.display()
            );
        }
        Command::Superpoints { stage, out } => {
            let p = staged(&stage, pipeline::run_superpoints)?;
            deliver(&stage.workspace(), pipeline::SUPERPOINTS_FILE, out.as_deref())?;
            println!("{} superpoints over {} points", p.num_superpoints(), p.num_points());
        }
        Command::Project { stage, out } => {
            let v = staged(&stage, pipeline::run_project)?;
            deliver(&stage.workspace(), pipeline::VIS_DIR, out.as_deref())?;
            println!("visibility for {} frames", v.len());
        }
        Command::Propose2d { stage, out } => {
            let set = staged(&stage, pipeline::run_propose2d)?;
            deliver(&stage.workspace(), pipeline::PROPOSALS_2D_FILE, out.as_deref())?;
            println!("{} 2D-guided proposals", set.len());
        }
        Command::Combine {
            stage,
            only_2d,
            only_3d,
            out,
        } => {
            let m = mode(only_2d, only_3d);
            let set = staged(&stage, |ws, c| pipeline::run_combine(ws, c, m))?;
            deliver(&stage.workspace(), pipeline::PROPOSALS_FINAL_FILE, out.as_deref())?;
            println!("{} fused proposals", set.len());
        }
        Command::Features { stage } => {
            let f = staged(&stage, pipeline::run_features)?;
            println!("{}x{} point features", f.num_points(), f.dim());
        }
        Command::Query { stage, prompts, topk } => {
            let dir = prompts.map(|p| stage.scene.join(p));
            let labels = staged(&stage, |ws, _| pipeline::run_query(ws, dir.as_deref(), topk))?;
            println!("labeled {} proposals", labels.proposals.len());
        }
        Command::Evaluate {
            scene,
            work,
            pred,
            labels,
            gt,
            groups,
            report,
        } => {
            let mut inputs = match scene {
                Some(s) => EvaluateInputs::standard(&Workspace::new(s, work)),
                None => EvaluateInputs {
                    predictions: PathBuf::new(),
                    labels: None,
                    ground_truth: PathBuf::new(),
                    groups: None,
                    report: PathBuf::from(pipeline::REPORT_FILE),
                },
            };
            if let Some(p) = pred {
                inputs.predictions = p;
            }
            if let Some(p) = gt {
                inputs.ground_truth = p;
            }
            if let Some(p) = report {
                inputs.report = p;
            }
            if labels.is_some() {
                inputs.labels = labels;
            }
            if groups.is_some() {
                inputs.groups = groups;
            }
            let r = pipeline::evaluate_files(&inputs)?;
            print_report(&r);
        }
        Command::ExportPly { stage, proposals, out } => {
            staged(&stage, |ws, _| pipeline::export_ply(ws, proposals.as_deref(), &out))?;
            println!("wrote {}", out.display());
        }
        Command::Run {
            stage,
            only_2d,
            only_3d,
            topk,
            force,
            save_config,
        } => {
            let config = stage.overrides.resolve()?;
            if let Some(p) = save_config {
                config.save(p)?;
            }
            let options = RunOptions {
                mode: mode(only_2d, only_3d),
                topk,
                force,
            };
            let summary = pipeline::run_pipeline(&stage.workspace(), &config, &options)?;
            println!(
                "ran [{}], cached [{}], skipped [{}]",
                summary.executed.join(", "),
                summary.cached.join(", "),
                summary.skipped.join(", ")
            );
            if let Some(r) = &summary.report {
                print_report(r);
            }
        }
    }
    Ok(())
}

fn print_report(r: &pipeline::EvaluationReport) {
    let m = &r.metrics;
    let a = &m.class_agnostic;
    println!("AP {:.4}  AP50 {:.4}  AP25 {:.4}", m.ap, m.ap50, m.ap25);
    println!(
        "class-agnostic: AP {:.4}  AP50 {:.4}  AR {:.4}  recall@50 {:.4}",
        a.ap, a.ap50, a.ar, a.recall50
    );
    if let Some(acc) = r.labels_at_50.accuracy() {
        println!(
            "labels: {}/{} matched GT correct ({acc:.4})",
            r.labels_at_50.correct, r.labels_at_50.matched
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
