use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use empathy_core::dataio::{split, synth_generate, SplitSpec, SynthConfig, SynthTask};
use empathy_core::error::ErrorKind;
use empathy_core::eval::{evaluate, run_ablation, AblationSuite};
use empathy_core::lda::{Corpus, LdaConfig, LdaModel};
use empathy_core::training::{
    fit_targets, gradcheck_model, Checkpoint, GradCheckConfig, TargetMap, TrainConfig, Trainer,
};
use empathy_core::{Dataset, LabelTarget};
use log::info;
use serde::Serialize;

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "empathy",
    version,
    about = "Multi-modal empathy prediction with topic-distribution assisted training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a 70/10/20 split of a dataset; writes checkpoints and a log to --out.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label: Option<LabelTarget>,
        /// JSON training config; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Disable topic-distribution supervision.
        #[arg(long)]
        no_sdat: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint; prints the report as JSON.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the label the checkpoint was trained on.
        #[arg(long)]
        label: Option<LabelTarget>,
    },
    /// Fit LDA on a text file with one whitespace-tokenized document per line.
    LdaFit {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long, default_value_t = 10)]
        topics: usize,
        #[arg(long, default_value_t = 500)]
        sweeps: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the most probable words of every topic of a fitted LDA model.
    LdaTopics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// unimodal-linear, cross-modal-parity or topic-correlated
        #[arg(long)]
        task: SynthTask,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the full loss; fails if the error reaches 1e-4.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every variant of an ablation suite; JSON to stdout, table to stderr.
    Ablate {
        /// modality or sdat
        #[arg(long)]
        suite: AblationSuite,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label: Option<LabelTarget>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(
    path: Option<&Path>,
    label: Option<LabelTarget>,
    seed: Option<u64>,
) -> anyhow::Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            TrainConfig::load(p).with_context(|| format!("loading config {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(label) = label {
        cfg.label_target = label;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    best_epoch: usize,
    best_val_accuracy: f64,
    best_val_weighted_f1: f64,
    test: empathy_core::EvalReport,
}

fn cmd_train(
    data: &Path,
    label: Option<LabelTarget>,
    config: Option<&Path>,
    out: &Path,
    no_sdat: bool,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config, label, seed)?;
    if no_sdat {
        cfg.sdat_enabled = false;
    }
    let ds = load_data(data)?;
    let (tr, va, te) = split(&ds, &SplitSpec::standard(cfg.seed))?;
    info!("split {} / {} / {}", tr.len(), va.len(), te.len());
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let targets = if cfg.sdat_enabled && cfg.modalities.text {
        let (lda, targets) = fit_targets(&tr, &cfg)?;
        lda.save(out.join("lda.json"))?;
        targets
    } else {
        TargetMap::new()
    };
    let trainer = Trainer::with_targets(&tr, &va, cfg.clone(), targets)?;
    let mut log = BufWriter::new(File::create(out.join("train_log.jsonl"))?);
    let mut log_err = None;
    let run = trainer.run_with(|rec, _| {
        info!(
            "epoch {} loss {:.5} (ce {:.5}, kl {:.5}) val acc {:.4}",
            rec.epoch, rec.total, rec.l_s, rec.l_t, rec.val_accuracy
        );
        let written = serde_json::to_writer(&mut log, rec)
            .map_err(anyhow::Error::from)
            .and_then(|()| Ok(writeln!(log)?));
        if let Err(e) = written {
            log_err.get_or_insert(e);
        }
    });
    log.flush()?;
    if let Some(e) = log_err {
        return Err(e.context("writing the training log"));
    }
    let run = run?;
    run.best.save(out.join("best.json"))?;
    run.last.save(out.join("last.json"))?;
    let test = evaluate(&run.best.model()?, &te, cfg.label_target)?;
    print_json(&TrainSummary {
        best_epoch: run.best_epoch,
        best_val_accuracy: run.best_val_accuracy,
        best_val_weighted_f1: run.best_val_weighted_f1,
        test,
    })
}

fn cmd_evaluate(checkpoint: &Path, data: &Path, label: Option<LabelTarget>) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let ds = load_data(data)?;
    let report = evaluate(
        &ckpt.model()?,
        &ds,
        label.unwrap_or(ckpt.config.label_target),
    )?;
    print_json(&report)
}

fn read_docs(path: &Path) -> anyhow::Result<Vec<Vec<String>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut docs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        docs.push(line.split_whitespace().map(str::to_owned).collect());
    }
    // a trailing empty line is not a document
    while docs.last().is_some_and(|d: &Vec<String>| d.is_empty()) {
        docs.pop();
    }
    Ok(docs)
}

fn cmd_lda_fit(docs: &Path, cfg: LdaConfig, out: &Path) -> anyhow::Result<()> {
    let corpus = Corpus::from_token_docs(read_docs(docs)?);
    let model = LdaModel::fit(&corpus, &cfg)?;
    model.save(out)?;
    info!("log joint {:.3}", model.log_joint());
    Ok(())
}

#[derive(Serialize)]
struct TopicWords {
    topic: usize,
    words: Vec<(String, f64)>,
}

fn cmd_lda_topics(model: &Path, top: usize) -> anyhow::Result<()> {
    let model = LdaModel::load(model)?;
    let topics = (0..model.k())
        .map(|k| {
            Ok(TopicWords {
                topic: k,
                words: model.top_words(k, top)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    print_json(&topics)
}

fn cmd_synth(task: SynthTask, n: usize, seed: u64, out: &Path) -> anyhow::Result<()> {
    let ds = synth_generate(&SynthConfig::for_task(task, n), seed)?;
    ds.save(out)?;
    Ok(())
}

fn cmd_gradcheck(config: Option<&Path>, seed: u64) -> anyhow::Result<ExitCode> {
    let cfg: GradCheckConfig = match config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => GradCheckConfig::default(),
    };
    let report = gradcheck_model(&cfg, seed)?;
    print_json(&report)?;
    if report.max_relative_error < GRADCHECK_TOLERANCE {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "max relative error {:.3e} is not below {GRADCHECK_TOLERANCE:e}",
            report.max_relative_error
        );
        Ok(ExitCode::from(3))
    }
}

fn cmd_ablate(
    suite: AblationSuite,
    data: &Path,
    label: Option<LabelTarget>,
    config: Option<&Path>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let cfg = load_config(config, label, seed)?;
    let ds = load_data(data)?;
    let (tr, va, te) = split(&ds, &SplitSpec::standard(cfg.seed))?;
    let table = run_ablation(suite, &cfg, &tr, &va, &te, None)?;
    print_json(&table)?;
    eprint!("{}", table.to_text());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train {
            data,
            label,
            config,
            out,
            no_sdat,
            seed,
        } => cmd_train(&data, label, config.as_deref(), &out, no_sdat, seed)?,
        Command::Evaluate {
            checkpoint,
            data,
            label,
        } => cmd_evaluate(&checkpoint, &data, label)?,
        Command::LdaFit {
            docs,
            topics,
            sweeps,
            alpha,
            beta,
            seed,
            out,
        } => {
            let cfg = LdaConfig {
                k: topics,
                alpha,
                beta,
                sweeps,
                seed,
            };
            cmd_lda_fit(&docs, cfg, &out)?
        }
        Command::LdaTopics { model, top } => cmd_lda_topics(&model, top)?,
        Command::Synth { task, n, seed, out } => cmd_synth(task, n, seed, &out)?,
        Command::Gradcheck { config, seed } => return cmd_gradcheck(config.as_deref(), seed),
        Command::Ablate {
            suite,
            data,
            label,
            config,
            seed,
        } => cmd_ablate(suite, &data, label, config.as_deref(), seed)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<empathy_core::Error>())
        .map(empathy_core::Error::kind);
    match kind {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Numeric) => 3,
        Some(ErrorKind::Data) | None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
