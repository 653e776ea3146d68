//! Command-line interface: training, inference, evaluation, chromatic
//! compensation, synthetic data generation, and schedule inspection.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use aquadiff::checkpoint::Checkpoint;
use aquadiff::compensation::{preprocess, CompensationParams};
use aquadiff::config::FlatConfig;
use aquadiff::imaging::{load_png, save_png};
use aquadiff::pipeline::{
    enhance_dir, evaluate_dirs, load_paired_dirs, pairs_from_synth, png_stems, PipelineConfig,
    Trainer,
};
use aquadiff::schedule::linear_schedule;
use aquadiff::synth::make_dataset;

#[derive(Parser)]
#[command(
    name = "aquadiff",
    about = "Conditional-diffusion underwater image enhancement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model as described by a flat key-value config file.
    Train {
        /// Config file; unknown keys select data and output locations:
        /// data.degraded_dir / data.clean_dir for paired PNGs, or
        /// data.synth_n / data.synth_size / data.synth_seed to generate;
        /// out.dir for logs and checkpoints; resume_from to continue.
        #[arg(long)]
        config: PathBuf,
    },
    /// Enhance every PNG in a directory with a trained checkpoint.
    Enhance {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score enhanced images; CSV goes to stdout.
    Eval {
        #[arg(long)]
        enhanced: PathBuf,
        /// Reference directory with matching filenames; omit for
        /// no-reference scoring only.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Apply chromatic compensation to every PNG in a directory.
    Compensate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic clean/degraded dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a linear noise schedule as CSV.
    ScheduleDump {
        #[arg(long = "T")]
        t_steps: usize,
        #[arg(long)]
        beta_start: f64,
        #[arg(long)]
        beta_end: f64,
    },
}

fn cmd_train(config_path: &PathBuf) -> anyhow::Result<()> {
    let flat = FlatConfig::from_file(config_path)
        .with_context(|| format!("reading config {config_path:?}"))?;
    let cfg = PipelineConfig::from_flat(&flat)?;

    let pairs = if let Some(n) = flat.get("data.synth_n") {
        let n: usize = n.parse().context("data.synth_n must be an integer")?;
        let size = flat.usize_or("data.synth_size", cfg.denoiser.input_size)?;
        let seed = flat.u64_or("data.synth_seed", 0)?;
        eprintln!("generating {n} synthetic pairs at {size}x{size} (seed {seed})");
        pairs_from_synth(&make_dataset(n, size, seed)?)?
    } else {
        let degraded = flat.require("data.degraded_dir")?;
        let clean = flat.require("data.clean_dir")?;
        load_paired_dirs(degraded.as_ref(), clean.as_ref())?
    };
    eprintln!("dataset: {} pairs", pairs.len());

    let out_dir = PathBuf::from(flat.string_or("out.dir", "runs/train"));
    let mut trainer = match flat.get("resume_from") {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let trainer = Trainer::from_checkpoint(&ckpt, cfg)?;
            eprintln!("resumed from {path} at step {}", trainer.state().step);
            trainer
        }
        None => Trainer::new(cfg)?,
    };

    let outcome = trainer.run(&pairs, Some(&out_dir))?;
    if let Some(row) = outcome.log.last() {
        eprintln!(
            "step {}: total {:.6} (eps {:.6}, cdc {:.6})",
            row.step, row.losses.total, row.losses.eps_mse, row.losses.cdc.total
        );
    }
    if let Some(best) = outcome.best_step {
        eprintln!("best validation checkpoint from step {best}");
    }
    eprintln!("artifacts in {out_dir:?}");
    Ok(())
}

fn cmd_compensate(input: &PathBuf, out: &PathBuf) -> anyhow::Result<()> {
    let stems = png_stems(input)?;
    if stems.is_empty() {
        bail!("no .png files found in {input:?}");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {out:?}"))?;
    let params = CompensationParams::default();
    for stem in &stems {
        let img = load_png(input.join(format!("{stem}.png")))?;
        let compensated = preprocess(&img, &params)?;
        save_png(&compensated, out.join(format!("{stem}.png")))?;
    }
    eprintln!("compensated {} images into {out:?}", stems.len());
    Ok(())
}

fn cmd_synth(n: usize, size: usize, seed: u64, out: &PathBuf) -> anyhow::Result<()> {
    let pairs = make_dataset(n, size, seed)?;
    let clean_dir = out.join("clean");
    let degraded_dir = out.join("degraded");
    std::fs::create_dir_all(&clean_dir).with_context(|| format!("creating {clean_dir:?}"))?;
    std::fs::create_dir_all(&degraded_dir)
        .with_context(|| format!("creating {degraded_dir:?}"))?;
    for pair in pairs_from_synth(&pairs)? {
        save_png(&pair.clean, clean_dir.join(format!("{}.png", pair.name)))?;
        save_png(&pair.degraded, degraded_dir.join(format!("{}.png", pair.name)))?;
    }
    eprintln!("wrote {n} pairs under {out:?} (clean/ and degraded/)");
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { config } => cmd_train(&config)?,
        Command::Enhance {
            ckpt,
            input,
            out,
            seed,
        } => {
            let checkpoint = Checkpoint::load(&ckpt)?;
            let names = enhance_dir(&checkpoint, &input, &out, seed)?;
            eprintln!("enhanced {} images into {out:?}", names.len());
        }
        Command::Eval {
            enhanced,
            reference,
        } => {
            let report = evaluate_dirs(&enhanced, reference.as_deref())?;
            print!("{}", report.to_csv());
        }
        Command::Compensate { input, out } => cmd_compensate(&input, &out)?,
        Command::Synth { n, size, seed, out } => cmd_synth(n, size, seed, &out)?,
        Command::ScheduleDump {
            t_steps,
            beta_start,
            beta_end,
        } => {
            let s = linear_schedule(t_steps, beta_start, beta_end)?;
            println!("t,beta,alpha,gamma,posterior_var");
            for t in 1..=t_steps {
                println!(
                    "{t},{:.10},{:.10},{:.10},{:.10}",
                    s.beta(t),
                    s.alpha(t),
                    s.gamma(t),
                    s.posterior_var(t)
                );
            }
        }
    }
    Ok(())
}
