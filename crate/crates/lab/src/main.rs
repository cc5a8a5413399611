use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gsit_core::{SegmentLayout, StructureName};
use gsit_lab::checkpoint::Checkpoint;
use gsit_lab::config::{ModelKind, RunConfig};
use gsit_lab::disorder::disorder_demo;
use gsit_lab::report::{bench, masks_ascii, masks_csv, Report};
use gsit_lab::stats::weight_report;
use gsit_lab::suites::{self, SUITES};
use gsit_lab::train::train;

#[derive(Parser)]
#[command(name = "gsit", version, about = "Graph-structured fusion transformer toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[command(flatten)]
        model: ModelArgs,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation, memory and parameter accounting for one configuration.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Emit::Json)]
        emit: Emit,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on synthetic data and write the loss curve as CSV.
    Train {
        #[arg(long)]
        model: Option<ModelKind>,
        #[command(flatten)]
        shape: ModelArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Loss-curve CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Binary checkpoint of the final weights.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// JSON weight statistics of the final weights.
        #[arg(long)]
        weight_stats: Option<PathBuf>,
    },
    /// Print the block masks of a structure.
    Masks {
        #[arg(long)]
        structure: StructureName,
        #[arg(long, default_value = "1,1,1")]
        layout: SegmentLayout,
        #[arg(long, value_enum, default_value_t = MaskEmit::Ascii)]
        emit: MaskEmit,
    },
    /// Compare the forward fusion maps with and without an extra allowed block.
    Disorder {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "3,4,5")]
        layout: SegmentLayout,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        heads: usize,
    },
}

/// Model shape. Flags override `--config`; otherwise bench defaults apply.
#[derive(Args)]
struct ModelArgs {
    /// TOML file with `[model]`, `[train]` and `[data]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    layout: Option<SegmentLayout>,
    #[arg(long)]
    dim: Option<usize>,
    /// MLP hidden width; twice `--dim` when neither flag nor file sets it.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    structure: Option<StructureName>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut run = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let mut run = RunConfig::default();
                run.model.heads = 1;
                run
            }
        };
        let m = &mut run.model;
        if let Some(l) = self.layout {
            m.layout = l;
        }
        if let Some(d) = self.dim {
            m.d = d;
            if self.config.is_none() {
                m.p = 2 * d;
            }
        }
        if let Some(p) = self.hidden {
            m.p = p;
        }
        if let Some(h) = self.heads {
            m.heads = h;
        }
        if let Some(s) = self.structure {
            m.structure = s;
        }
        Ok(run)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Equiv,
    Graph,
    Decomp,
    /// Operation counts, parameter counts and attention-map memory.
    Flops,
    Grad,
    Masks,
    Disorder,
}

impl Suite {
    fn names(self) -> Vec<&'static str> {
        match self {
            Suite::All => SUITES.to_vec(),
            Suite::Equiv => vec!["equiv"],
            Suite::Graph => vec!["graph"],
            Suite::Decomp => vec!["decomp"],
            Suite::Flops => vec!["flops", "params", "memory"],
            Suite::Grad => vec!["grad"],
            Suite::Masks => vec!["masks"],
            Suite::Disorder => vec!["disorder"],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MaskEmit {
    Ascii,
    Csv,
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit_report(report: &Report, out: Option<&Path>) -> Result<ExitCode> {
    let json = report.to_json();
    if let Some(path) = out {
        write_out(path, &json)?;
    }
    std::io::stdout().write_all(json.as_bytes())?;
    for s in report.suites.values() {
        eprintln!("{}", s.line());
    }
    let failing = report.failing();
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed: {}", failing.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify { suite, model, out } => {
            let run = model.resolve()?;
            let mut report = Report::for_config(&run.model_config()?)?;
            for name in suite.names() {
                let result = suites::run_named(name)?.expect("listed suite exists");
                report.add_suite(result);
            }
            emit_report(&report, out.as_deref())
        }
        Command::Bench {
            model,
            emit: Emit::Json,
            out,
        } => {
            let run = model.resolve()?;
            emit_report(&bench(&run.model_config()?)?, out.as_deref())
        }
        Command::Train {
            model,
            shape,
            steps,
            lr,
            seed,
            batch_size,
            out,
            checkpoint,
            weight_stats,
        } => {
            let mut run = shape.resolve()?;
            if shape.config.is_none() {
                run.model.heads = shape.heads.unwrap_or(2);
            }
            if let Some(k) = model {
                run.model.kind = k;
            }
            let t = &mut run.train;
            t.steps = steps.unwrap_or(t.steps);
            t.lr = lr.unwrap_or(t.lr);
            t.seed = seed.unwrap_or(t.seed);
            t.batch_size = batch_size.unwrap_or(t.batch_size);
            t.out = out.or(t.out.take());
            t.checkpoint = checkpoint.or(t.checkpoint.take());
            run.validate()?;

            let outcome = train(&run)?;
            let csv = outcome.loss_csv();
            match &run.train.out {
                Some(path) => write_out(path, &csv)?,
                None => std::io::stdout().write_all(csv.as_bytes())?,
            }
            if let Some(path) = &run.train.checkpoint {
                Checkpoint::new(run.model_config()?, outcome.weights.clone()).save(path)?;
            }
            if let Some(path) = weight_stats {
                let mut json = serde_json::to_string_pretty(&weight_report(&outcome.weights))?;
                json.push('\n');
                write_out(&path, &json)?;
            }
            eprintln!("final_mse {:.6e}", outcome.final_mse);
            Ok(ExitCode::SUCCESS)
        }
        Command::Masks {
            structure,
            layout,
            emit,
        } => {
            let text = match emit {
                MaskEmit::Ascii => masks_ascii(structure),
                MaskEmit::Csv => masks_csv(structure, &layout),
            };
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Disorder {
            seed,
            layout,
            dim,
            heads,
        } => {
            let r = disorder_demo(seed, &layout, dim, heads)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            if r.identity_holds {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed: restriction identity (residual {:e})", r.identity_residual);
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
