use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ddosnet::baselines::{BaselineKind, Hyper};
use ddosnet::cli::{
    cmd_baseline, cmd_evaluate, cmd_plot, cmd_prepare, cmd_sweep_lr, cmd_synth, cmd_train, EvaluateOptions,
    PlotRequest, RunConfig, DEFAULT_PRETRAIN_EPOCHS, DEFAULT_SEQ_LEN, DEFAULT_SWEEP_RATES,
};
use ddosnet::error::{Error, Result};
use ddosnet::ingest::SynthSpec;
use ddosnet::model::{FineTuneScope, TrainConfig};
use ddosnet::nn::Activation;
use ddosnet::preprocess::{GroupKey, SplitSpec};
use ddosnet::viz::PcaFitOn;

#[derive(Parser, Debug)]
#[command(name = "ddosnet", version, about = "RNN-autoencoder DDoS flow classifier")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Feature catalog file; the built-in CICDDoS2019 catalog if omitted.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Directory with prepared splits (defaults to --out-dir).
    #[arg(long, global = true)]
    prepared: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEQ_LEN)]
    seq_len: usize,
    /// Fine-tuning epochs.
    #[arg(long, global = true, default_value_t = 50)]
    epochs: usize,
    #[arg(long, global = true, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, global = true, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_PRETRAIN_EPOCHS)]
    pretrain_epochs: usize,
    #[arg(long, global = true, value_enum, default_value_t = ScopeArg::WholeNetwork)]
    fine_tune_scope: ScopeArg,
    #[arg(long, global = true, value_enum, default_value_t = ActivationArg::Relu)]
    activation: ActivationArg,
    /// Single-threaded gradients and zeroed timings in written histories.
    #[arg(long, global = true)]
    strict_determinism: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    HeadOnly,
    WholeNetwork,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean, split, balance and scale flow CSVs.
    Prepare {
        /// Input CSV files (repeatable).
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        /// Exact target sizes TRAIN,VAL,TEST; overrides the fractions.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        split_counts: Option<Vec<usize>>,
        #[arg(long)]
        no_stratify: bool,
        /// Move every record of this attack subtype into holdout.csv.
        #[arg(long)]
        holdout_subtype: Option<String>,
        /// Cap each group in the training split at this many records.
        #[arg(long)]
        balance_per_group: Option<usize>,
        #[arg(long, default_value = "label")]
        balance_key: String,
    },
    /// Pretrain and fine-tune on prepared splits.
    Train,
    /// Score a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the prepared test split.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Scale raw input with this scaler file.
        #[arg(long)]
        scaler: Option<PathBuf>,
    },
    /// Train and score classical baselines.
    Baseline {
        /// Comma-separated list of NB, DT, Booster, RF, SVM, LR, or "all".
        #[arg(long, default_value = "all")]
        kinds: String,
        /// Hyper-parameter override KIND.key=value (repeatable).
        #[arg(long = "hyper")]
        hyper: Vec<String>,
        /// Add a row for this saved model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and evaluate once per learning rate.
    SweepLr {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_RATES)]
        rates: Vec<f64>,
    },
    /// Render a figure.
    Plot {
        #[command(subcommand)]
        figure: Figure,
    },
    /// Write a seeded two-class Gaussian dataset and its catalog.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n_benign: usize,
        #[arg(long, default_value_t = 2000)]
        n_attack: usize,
        #[arg(long, default_value_t = 77)]
        n_features: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
}

#[derive(Subcommand, Debug)]
enum Figure {
    Andrews {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.10)]
        sample_fraction: f64,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value = "sample")]
        pca_fit_on: String,
    },
    Loss {
        #[arg(long)]
        history: PathBuf,
    },
    Roc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
}

fn run_config(common: &Common) -> RunConfig {
    RunConfig {
        catalog: common.catalog.clone(),
        seq_len: common.seq_len,
        pretrain_epochs: common.pretrain_epochs,
        out_dir: common.out_dir.clone(),
        prepared_dir: common.prepared.clone(),
        train: TrainConfig {
            epochs: common.epochs,
            batch_size: common.batch_size,
            learning_rate: common.lr,
            seed: common.seed,
            activation: match common.activation {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            },
            fine_tune_scope: match common.fine_tune_scope {
                ScopeArg::HeadOnly => FineTuneScope::HeadOnly,
                ScopeArg::WholeNetwork => FineTuneScope::WholeNetwork,
            },
            strict_determinism: common.strict_determinism,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    }
}

fn parse_kinds(text: &str) -> Result<Vec<BaselineKind>> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(BaselineKind::ALL.to_vec());
    }
    text.split(',').map(|k| k.trim().parse()).collect()
}

fn parse_hyper(items: &[String]) -> Result<BTreeMap<BaselineKind, Hyper>> {
    let mut out: BTreeMap<BaselineKind, Hyper> = BTreeMap::new();
    for item in items {
        let bad = || Error::Config(format!("--hyper expects KIND.key=value, got {item:?}"));
        let (lhs, value) = item.split_once('=').ok_or_else(bad)?;
        let (kind, key) = lhs.split_once('.').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        out.entry(kind.trim().parse()?).or_default().insert(key.trim().to_string(), value);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = run_config(&cli.common);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Prepare {
            data,
            train_fraction,
            val_fraction,
            test_fraction,
            split_counts,
            no_stratify,
            holdout_subtype,
            balance_per_group,
            balance_key,
        } => {
            cfg.data = data;
            cfg.split = SplitSpec {
                train_fraction,
                val_fraction,
                test_fraction,
                seed: cli.common.seed,
                stratify_by_label: !no_stratify,
            };
            cfg.split_counts = split_counts.map(|c| [c[0], c[1], c[2]]);
            cfg.holdout_subtype = holdout_subtype;
            cfg.balance = match balance_per_group {
                Some(n) => Some((n, balance_key.parse::<GroupKey>()?)),
                None => None,
            };
            cmd_prepare(&cfg, &mut out)?;
        }
        Command::Train => {
            cmd_train(&cfg, &mut out)?;
        }
        Command::Evaluate { model, test, scaler } => {
            cmd_evaluate(&cfg, &EvaluateOptions { model, test, scaler }, &mut out)?;
        }
        Command::Baseline { kinds, hyper, model } => {
            let kinds = parse_kinds(&kinds)?;
            let hyper = parse_hyper(&hyper)?;
            cmd_baseline(&cfg, &kinds, &hyper, model.as_deref(), &mut out)?;
        }
        Command::SweepLr { rates } => {
            cmd_sweep_lr(&cfg, &rates, &mut out)?;
        }
        Command::Plot { figure } => {
            let request = match figure {
                Figure::Andrews {
                    data,
                    sample_fraction,
                    k,
                    pca_fit_on,
                } => PlotRequest::Andrews {
                    data,
                    sample_fraction,
                    k,
                    fit_on: pca_fit_on.parse::<PcaFitOn>()?,
                },
                Figure::Loss { history } => PlotRequest::Loss { history },
                Figure::Roc { model, test } => PlotRequest::Roc { model, test },
            };
            for path in cmd_plot(&cfg, &request)? {
                use std::io::Write as _;
                let _ = writeln!(out, "{}", path.display());
            }
        }
        Command::Synth {
            n_benign,
            n_attack,
            n_features,
            separation,
            noise,
        } => {
            let spec = SynthSpec {
                n_benign,
                n_attack,
                n_features,
                class_separation: separation,
                noise_scale: noise,
                seed: cli.common.seed,
            };
            let (data, catalog) = cmd_synth(&spec, &cfg.out_dir)?;
            use std::io::Write as _;
            let _ = writeln!(out, "{}\n{}", data.display(), catalog.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
