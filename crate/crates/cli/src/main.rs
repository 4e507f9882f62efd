use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use denoise_cli::checkpoint::{self, Checkpoint};
use denoise_cli::config::ExperimentConfig;
use denoise_cli::experiment::{self, WallClock};
use denoise_cli::tu::{self, parse_tudataset, validate_dataset};
use denoise_cli::{output, CliError};
use denoise_core::graph::gen_synthetic;
use denoise_core::pipeline::{run_trial_with_clock, score_graphs, scored_auc, trial_seed};
use denoise_core::protocol::Assignment;

#[derive(Parser)]
#[command(name = "denoise", version, about = "Contamination-robust graph-level anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a TU dataset directory.
    Parse(Common),
    /// Write the configured synthetic dataset as a TU directory under --out.
    Synth(Common),
    /// Train one model (trial 0 of --seed) and save a checkpoint.
    Train(Common),
    /// Score every graph of the dataset with a saved checkpoint.
    Score(Common),
    /// Full multi-trial experiment.
    Run(Common),
    /// Run every point of the config's [grid] table.
    Sweep(Common),
    /// Write the graph embeddings of a saved checkpoint.
    DumpEmbeddings(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// TU dataset directory (overrides the config).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Contamination ratio.
    #[arg(long)]
    beta: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Checkpoint file for `score` and `dump-embeddings` (default: <out>/checkpoint.txt).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate().map_err(|msg| CliError::Config {
            path: self.config.clone(),
            msg,
        })?;
        Ok(cfg)
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("checkpoint.txt"))
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn parse(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let dir = cfg.dataset.clone().ok_or_else(|| CliError::Config {
        path: args.config.clone(),
        msg: "dataset: a TU directory is required".into(),
    })?;
    let name = cfg
        .name
        .clone()
        .unwrap_or_else(|| dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let parsed = parse_tudataset(&dir, &name, &cfg.tu_options())?;
    let report = validate_dataset(&parsed.dataset);
    println!("{report}");
    println!("attributes   {:?}", parsed.attr_source);
    if let Some(c) = parsed.anomaly_class {
        println!("anomalous    class {c}");
    }
    println!("edge lines   {} ({} self-loops dropped)", parsed.directed_lines, parsed.self_loops_dropped);
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Data {
            name,
            msg: "dataset has non-finite attributes or empty graphs".into(),
        })
    }
}

fn synth(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let d = gen_synthetic(&cfg.synth_config(), cfg.synth_seed).map_err(CliError::core("synthetic dataset"))?;
    tu::write_tudataset(&d, &args.out, "SYNTH")?;
    let (normals, anomalies) = d.class_counts();
    println!(
        "wrote {} graphs ({normals} normal, {anomalies} anomalous) to {} as SYNTH; anomalies carry class 1",
        d.len(),
        args.out.display()
    );
    Ok(())
}

fn train(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let dataset = experiment::load_dataset(&cfg)?;
    let seed = trial_seed(cfg.seed, 0);
    let clock = WallClock::start();
    let r = run_trial_with_clock(&dataset, &cfg.trial_config(), seed, &clock).map_err(CliError::core("training"))?;
    create_dir(&args.out)?;
    let ck = Checkpoint {
        model: r.model,
        head: r.head,
        tau_exp: cfg.tau_exp,
    };
    checkpoint::save(&ck, &args.checkpoint_path())?;
    output::write_history(&args.out.join("history.csv"), &r.history)?;
    output::write_split(&args.out.join("split.csv"), &dataset, &r.split)?;
    output::write_scores(&args.out.join("scores_test.csv"), &r.test)?;
    output::write_scores(&args.out.join("scores_val.csv"), &r.val)?;
    println!("seed {seed}: test AUC {:.4}, val AUC {:.4}", r.test_auc, r.val_auc);
    Ok(())
}

fn score(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let dataset = experiment::load_dataset(&cfg)?;
    let ck = checkpoint::load(&args.checkpoint_path())?;
    let ids: Vec<usize> = (0..dataset.len()).collect();
    let scored = score_graphs(&ck.model, &ck.head, dataset.graphs(), &ids, ck.tau_exp).map_err(CliError::core("scoring"))?;
    create_dir(&args.out)?;
    output::write_scores(&args.out.join("scores.csv"), &scored)?;
    match scored_auc(&scored) {
        Ok(auc) => println!("scored {} graphs, AUC {auc:.4}", scored.len()),
        Err(_) => println!("scored {} graphs", scored.len()),
    }
    Ok(())
}

fn run(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let dataset = experiment::load_dataset(&cfg)?;
    let exp = experiment::run_experiment(&dataset, &cfg, Some(&args.out))?;
    for t in &exp.report.trials {
        println!("trial {} seed {}: test AUC {:.4}", t.trial, t.seed, t.test_auc);
    }
    println!("mean AUC {:.4} ± {:.4}", exp.report.mean_auc, exp.report.std_auc);
    Ok(())
}

fn sweep(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let dataset = experiment::load_dataset(&cfg)?;
    let rows = experiment::sweep(&dataset, &cfg, Some(&args.out))?;
    for r in &rows {
        let point: Vec<String> = r.assignments.iter().map(|(n, v)| format!("{n}={v}")).collect();
        println!("{}: mean AUC {:.4} ± {:.4}", point.join(" "), r.report.mean_auc, r.report.std_auc);
    }
    Ok(())
}

fn dump(args: &Common) -> Result<(), CliError> {
    let cfg = args.config()?;
    let dataset = experiment::load_dataset(&cfg)?;
    let ck = checkpoint::load(&args.checkpoint_path())?;
    let split = experiment::trial_split(&dataset, cfg.beta, trial_seed(cfg.seed, 0))?;
    create_dir(&args.out)?;
    let path = args.out.join("embeddings.csv");
    experiment::dump_embeddings(&ck.model, &dataset, &split, &path)?;
    println!(
        "wrote {} embeddings ({} test) to {}",
        dataset.len(),
        split.count(Assignment::Test),
        path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(a) => parse(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::DumpEmbeddings(a) => dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
