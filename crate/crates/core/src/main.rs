use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adalabel::analysis::HierarchyTree;
use adalabel::checkpoint::Checkpoint;
use adalabel::data::{gen_synthetic, write_csv, SynthSpec};
use adalabel::error::{Error, Result};
use adalabel::harness::run::{render_score, structure_score};
use adalabel::harness::{report_dir, run, RunConfig};

#[derive(Parser)]
#[command(name = "adalabel", version, about = "Train classifiers with adaptive label vectors and compare them to a one-hot baseline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a hierarchical Gaussian dataset: data.csv, hierarchy.tsv, spec.txt.
    GenSynth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every seed of a config and write metrics, checkpoints and dendrograms.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score the label table stored in a checkpoint against a class hierarchy.
    EvalLabels {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
    },
    /// Summarise the runs stored under a directory into report.txt.
    Report {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn gen_synth(spec_path: &Path, out: &Path) -> Result<()> {
    let spec = SynthSpec::load(spec_path)?;
    let synth = gen_synthetic(&spec)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_csv(&synth.dataset, &out.join("data.csv"))?;
    let tree_path = out.join("hierarchy.tsv");
    fs::write(&tree_path, synth.tree.to_tsv()).map_err(|e| Error::io(&tree_path, e))?;
    let spec_out = out.join("spec.txt");
    fs::write(&spec_out, spec.to_text()).map_err(|e| Error::io(&spec_out, e))?;
    println!(
        "wrote {} samples, {} classes to {}",
        synth.dataset.len(),
        synth.dataset.num_classes(),
        out.display()
    );
    Ok(())
}

fn train(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    for r in run(&cfg)? {
        println!(
            "method={} seed={} best_test_acc={:.4} auac={:.4} best_epoch={}",
            r.method, r.seed, r.best_test_acc, r.auac, r.best_epoch
        );
    }
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}

fn eval_labels(checkpoint: &Path, hierarchy: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let (table, names) = ck
        .labels
        .ok_or_else(|| Error::format(checkpoint, "checkpoint holds no label table"))?;
    let tree = HierarchyTree::load(hierarchy)?;
    print!("{}", render_score(&structure_score(&table, &names, &tree)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenSynth { spec, out } => gen_synth(spec, out),
        Command::Train { config } => train(config),
        Command::EvalLabels { checkpoint, hierarchy } => eval_labels(checkpoint, hierarchy),
        Command::Report { runs } => report_dir(runs).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
