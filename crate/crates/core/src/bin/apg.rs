//! `apg` command-line driver.
//!
//! Exit status: 0 on success, 1 on a fatal configuration or I/O error, 2 when
//! any image failed (backend or input error) but the batch completed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use apg_core::binarize::{BinarizeConfig, DEFAULT_THRESHOLD};
use apg_core::metrics::summary_line;
use apg_core::pipeline::{
    ablate_prompts, evaluate_outputs, run_pipeline, sweep_threshold, PromptStrategy, RunConfig, RunReport,
};
use apg_core::prompt::{ContourPromptMode, GridConfig, PromptMode, DEFAULT_GRID_N};
use apg_core::segmenter::{BridgeMode, ExternalSegmenter, MockSegmenter, Segmenter, DEFAULT_DELTA};
use apg_core::synth::{emit_corpus, SceneSpec};

#[derive(Parser)]
#[command(name = "apg", version, about = "Heatmap-to-prompt pseudo-labeling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate prompts and pseudo-masks for every positive sample.
    Run(RunArgs),
    /// Re-run the pipeline for a range of thresholds.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated thresholds.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "50,60,70,80,90,100,110,120,130,140,150,160,170"
        )]
        thresholds: Vec<u8>,
    },
    /// Compare point+box, box-only and point-only prompting.
    Ablate(RunArgs),
    /// Write a synthetic corpus with manifest.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of scenes.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Edge length of the square scenes.
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
    /// Score existing pseudo-masks under --out against ground truth.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Mock,
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BridgeModeArg {
    PerPair,
    SingleCall,
}

#[derive(Args)]
struct RunArgs {
    /// CSV with columns id,image,heatmap,label,gt_mask.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Heatmap pixels strictly above this are foreground.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Smallest component, in pixels, that still gets a prompt.
    #[arg(long, default_value_t = 0)]
    min_area: usize,
    /// point+box, box-only, point-only or grid.
    #[arg(long, default_value = "point+box")]
    mode: PromptMode,
    /// Points per image edge in grid mode.
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid_n: usize,
    #[arg(long, value_enum, default_value_t = Backend::Mock)]
    segmenter: Backend,
    /// Intensity tolerance of the mock segmenter.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: u8,
    /// Bridge executable for `--segmenter external`.
    #[arg(long, default_value = "sam_bridge")]
    bridge: PathBuf,
    /// Extra argument passed to the bridge before the request flags (repeatable).
    #[arg(long = "bridge-arg", allow_hyphen_values = true)]
    bridge_args: Vec<String>,
    /// One decode per prompt pair (union), or one call with all prompts.
    #[arg(long, value_enum, default_value_t = BridgeModeArg::PerPair)]
    bridge_mode: BridgeModeArg,
    /// Write all-background masks for negative samples.
    #[arg(long)]
    emit_negatives: bool,
    /// Score pseudo-masks against ground truth.
    #[arg(long)]
    eval: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, String> {
        if !self.manifest.is_file() {
            return Err(format!("manifest {} does not exist", self.manifest.display()));
        }
        let strategy = match self.mode {
            PromptMode::PointBox => PromptStrategy::Contours(ContourPromptMode::PointBox),
            PromptMode::BoxOnly => PromptStrategy::Contours(ContourPromptMode::BoxOnly),
            PromptMode::PointOnly => PromptStrategy::Contours(ContourPromptMode::PointOnly),
            PromptMode::Grid => {
                if self.grid_n == 0 {
                    return Err("--grid-n must be at least 1".into());
                }
                PromptStrategy::Grid(GridConfig { n: self.grid_n })
            }
        };
        Ok(RunConfig {
            manifest: self.manifest.clone(),
            out_dir: self.out.clone(),
            binarize: BinarizeConfig {
                threshold: self.threshold,
            },
            min_area: self.min_area,
            strategy,
            emit_negatives: self.emit_negatives,
            evaluate: self.eval,
        })
    }

    fn segmenter(&self) -> Box<dyn Segmenter> {
        match self.segmenter {
            Backend::Mock => Box::new(MockSegmenter::new(self.delta)),
            Backend::External => Box::new(ExternalSegmenter {
                program: self.bridge.clone(),
                args: self.bridge_args.clone(),
                scratch_dir: self.out.join("bridge"),
                mode: match self.bridge_mode {
                    BridgeModeArg::PerPair => BridgeMode::PerPair,
                    BridgeModeArg::SingleCall => BridgeMode::SingleCall,
                },
            }),
        }
    }
}

fn print_report(title: &str, report: &RunReport) {
    println!(
        "{title}: {} samples, {} processed, {} empty-prompts, {} skipped-negative, {} backend-error, {} input-error ({:.2?})",
        report.records.len(),
        report.count("processed"),
        report.count("empty-prompts"),
        report.count("skipped-negative"),
        report.count("backend-error"),
        report.count("input-error"),
        report.wall,
    );
    let t = report.stage_totals();
    println!(
        "  stage time: load {:.2?}, binarize {:.2?}, contours {:.2?}, prompts {:.2?}, segment {:.2?}, write {:.2?}, evaluate {:.2?}",
        t.load, t.binarize, t.contours, t.prompts, t.segment, t.write, t.evaluate
    );
    for r in report.records.iter().filter(|r| r.status.is_failure()) {
        println!("  {}: {:?}", r.id, r.status);
    }
    if let Some(total) = &report.total {
        println!("  {}", summary_line(total));
    }
}

fn exit_for(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let report = run_pipeline(&cfg, args.segmenter().as_ref()).map_err(|e| e.to_string())?;
            print_report("run", &report);
            Ok(exit_for(report.has_failures()))
        }
        Command::Sweep { run, thresholds } => {
            let cfg = run.config()?;
            let rows = sweep_threshold(&cfg, &thresholds, run.segmenter().as_ref()).map_err(|e| e.to_string())?;
            println!("threshold  IoU     F1      mean K");
            for r in &rows {
                println!(
                    "{:>9}  {:6.2}  {:6.2}  {:6.2}",
                    r.threshold,
                    r.iou * 100.0,
                    r.f1 * 100.0,
                    r.mean_k
                );
            }
            println!("wrote {}", cfg.out_dir.join("sweep.csv").display());
            Ok(exit_for(rows.iter().any(|r| r.report.has_failures())))
        }
        Command::Ablate(args) => {
            let cfg = RunConfig {
                evaluate: true,
                ..args.config()?
            };
            let ablation = ablate_prompts(&cfg, args.segmenter().as_ref()).map_err(|e| e.to_string())?;
            println!("prompts     OA      Precision  Recall  F1      IoU");
            for (mode, report) in &ablation.runs {
                if let Some(m) = &report.total {
                    println!(
                        "{:<10}  {:6.2}  {:9.2}  {:6.2}  {:6.2}  {:6.2}",
                        PromptMode::from(*mode).as_str(),
                        m.oa * 100.0,
                        m.precision * 100.0,
                        m.recall * 100.0,
                        m.f1 * 100.0,
                        m.iou * 100.0
                    );
                }
            }
            if !ablation.same_k_per_image() {
                println!("warning: prompt counts differ between modes");
            }
            println!("wrote {}", cfg.out_dir.join("ablation.csv").display());
            Ok(exit_for(ablation.runs.iter().any(|(_, r)| r.has_failures())))
        }
        Command::Synth { seed, count, out, size } => {
            let spec = SceneSpec {
                seed,
                width: size,
                height: size,
                ..SceneSpec::default()
            };
            let manifest = emit_corpus(&spec, count, &out).map_err(|e| e.to_string())?;
            let positives = manifest.samples.iter().filter(|s| s.label).count();
            println!(
                "wrote {} samples ({positives} positive) to {}",
                manifest.len(),
                out.join("manifest.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { manifest, out } => {
            let rows = evaluate_outputs(&manifest, &out).map_err(|e| e.to_string())?;
            let mut failed = false;
            let ok: Vec<_> = rows
                .iter()
                .filter_map(|(id, r)| match r {
                    Ok(m) => Some(m),
                    Err(e) => {
                        println!("{id}: {e}");
                        failed = true;
                        None
                    }
                })
                .collect();
            println!("evaluated {} masks", ok.len());
            if let Ok(total) = apg_core::metrics::aggregate(ok) {
                println!("  {}", summary_line(&total));
            }
            Ok(exit_for(failed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let fatal = e.use_stderr();
            let _ = e.print();
            return if fatal { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
