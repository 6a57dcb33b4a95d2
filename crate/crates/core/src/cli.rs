//! Command-line front ends for `getinfo` and `patchnet`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgGroup, ArgMatches, CommandFactory, FromArgMatches, Parser};

use crate::corpus::{getinfo, read_commit_list, read_patch_data, PreprocessConfig, RuleConfig};
use crate::encode::ShapeConfig;
use crate::error::{Error, Result};
use crate::eval::{format_key_values, format_table, kfold_cv};
use crate::model::{load_model, parse_filter_sizes, DataType, Hyperparameters};
use crate::train::{predict, train, TrainOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Extract and preprocess commits into `<prefix>.out` and `<prefix>.dict`.
#[derive(Debug, Parser)]
#[command(name = "getinfo", version)]
pub struct GetinfoArgs {
    /// File of `<sha> [label]` lines.
    #[arg(long = "commit_list", value_name = "FILE")]
    pub commit_list: PathBuf,
    /// Path to the git repository.
    #[arg(long = "git", value_name = "PATH")]
    pub git: PathBuf,
    /// Output prefix.
    #[arg(short = 'o', value_name = "PREFIX")]
    pub output: PathBuf,
    /// TOML file overriding the annotation rules.
    #[arg(long = "config", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Drop commits with more changed lines than this; 0 keeps everything.
    #[arg(long = "max_lines", value_name = "N", default_value_t = 100)]
    pub max_lines: usize,
}

fn parse_data_type(s: &str) -> std::result::Result<DataType, String> {
    match s {
        "both" => Ok(DataType::All),
        other => other.parse(),
    }
}

/// Train, apply or cross-validate a patch classifier.
#[derive(Debug, Parser)]
#[command(name = "patchnet", version)]
#[command(group(ArgGroup::new("mode").required(true).args(["train", "predict", "cv"])))]
pub struct PatchnetArgs {
    /// Train a model on labeled patches.
    #[arg(long)]
    pub train: bool,
    /// Score unlabeled patches with a trained model.
    #[arg(long)]
    pub predict: bool,
    /// Stratified k-fold cross-validation.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    /// Patch-data file.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Model directory.
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    /// Write predictions or the report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Type of data used to build the model: msg, code, or all (alias both).
    #[arg(long = "data_type", default_value = "all", value_parser = parse_data_type)]
    pub data_type: DataType,
    /// Dimension of embedding vectors.
    #[arg(long = "embedding_dim", default_value_t = 32)]
    pub embedding_dim: usize,
    /// Sizes of filters used by the convolutional layers.
    #[arg(long = "filter_sizes", default_value = "1,2", value_parser = parse_filter_sizes)]
    pub filter_sizes: ::std::vec::Vec<usize>,
    /// Number of filters.
    #[arg(long = "num_filters", default_value_t = 32)]
    pub num_filters: usize,
    /// Width of the hidden fully connected layer.
    #[arg(long = "hidden_layers", default_value_t = 16)]
    pub hidden_layers: usize,
    /// Keep probability of dropout during training.
    #[arg(long = "dropout_keep_prob", default_value = "0.5")]
    pub dropout_keep_prob: f64,
    /// Regularization rate.
    #[arg(long = "l2_reg_lambda", default_value = "1e-5")]
    pub l2_reg_lambda: f64,
    /// Learning rate.
    #[arg(long = "learning_rate", default_value = "1e-4")]
    pub learning_rate: f64,
    /// Batch size.
    #[arg(long = "batch_size", default_value_t = 64)]
    pub batch_size: usize,
    /// Number of epochs.
    #[arg(long = "num_epochs", default_value_t = 25)]
    pub num_epochs: usize,

    /// Changed files kept per patch.
    #[arg(long, default_value_t = 5)]
    pub files: usize,
    /// Hunks kept per file.
    #[arg(long, default_value_t = 8)]
    pub hunks: usize,
    /// Lines kept per hunk and side.
    #[arg(long, default_value_t = 10)]
    pub lines: usize,
    /// Words kept per line.
    #[arg(long, default_value_t = 120)]
    pub words: usize,
    /// Words kept per commit message.
    #[arg(long = "msg_len", default_value_t = 256)]
    pub msg_len: usize,

    /// Clip the gradient to this global norm.
    #[arg(long, value_name = "NORM")]
    pub clip: Option<f64>,
    /// Fraction of training data held out for a validation loss.
    #[arg(long = "valid_ratio", default_value_t = 0.0)]
    pub valid_ratio: f64,
}

impl PatchnetArgs {
    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            embedding_dim: self.embedding_dim,
            filter_sizes: self.filter_sizes.clone(),
            num_filters: self.num_filters,
            hidden_layers: self.hidden_layers,
            dropout_keep_prob: self.dropout_keep_prob,
            l2_reg_lambda: self.l2_reg_lambda,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            num_epochs: self.num_epochs,
            data_type: self.data_type,
            shape: self.shape(),
            extra_dim: 0,
        }
    }

    pub fn shape(&self) -> ShapeConfig {
        ShapeConfig {
            files: self.files,
            hunks: self.hunks,
            lines: self.lines,
            words: self.words,
            msg_len: self.msg_len,
        }
    }

    pub fn options(&self) -> TrainOptions {
        TrainOptions {
            seed: self.seed,
            clip: self.clip,
            valid_ratio: self.valid_ratio,
        }
    }
}

enum Parsed<T> {
    Args(T, ArgMatches),
    Exit(i32),
}

fn parse<T: CommandFactory + FromArgMatches>(args: impl IntoIterator<Item = OsString>) -> Parsed<T> {
    let result = T::command()
        .try_get_matches_from(args)
        .and_then(|m| T::from_arg_matches(&m).map(|t| (t, m)));
    match result {
        Ok((t, m)) => Parsed::Args(t, m),
        Err(e) => {
            let _ = e.print();
            Parsed::Exit(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK })
        }
    }
}

fn usage(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn report(result: Result<()>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(std::path::Path::new("<stdout>"), e)),
    }
}

pub fn getinfo_main(args: impl IntoIterator<Item = OsString>) -> i32 {
    let a: GetinfoArgs = match parse(args) {
        Parsed::Args(a, _) => a,
        Parsed::Exit(code) => return code,
    };
    report(run_getinfo(&a))
}

fn run_getinfo(a: &GetinfoArgs) -> Result<()> {
    let rules = match &a.config {
        Some(p) => RuleConfig::load(p)?,
        None => RuleConfig::default(),
    };
    let config = PreprocessConfig {
        max_changed_lines: (a.max_lines > 0).then_some(a.max_lines),
        ..PreprocessConfig::default()
    };
    let entries = read_commit_list(&a.commit_list)?;
    let r = getinfo(&entries, &a.git, &a.output, &config, &rules)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    for s in &r.skipped {
        eprintln!("skipped {}: {}", s.rev, s.reason);
    }
    eprintln!(
        "wrote {} patches to {} and {} ({} skipped)",
        r.written,
        r.patch_data.display(),
        r.dictionary.display(),
        r.skipped.len()
    );
    Ok(())
}

const SHAPE_FLAGS: [&str; 5] = ["files", "hunks", "lines", "words", "msg_len"];

pub fn patchnet_main(args: impl IntoIterator<Item = OsString>) -> i32 {
    let (a, matches): (PatchnetArgs, ArgMatches) = match parse(args) {
        Parsed::Args(a, m) => (a, m),
        Parsed::Exit(code) => return code,
    };
    if (a.train || a.predict) && a.model.is_none() {
        return usage("--model is required with --train and --predict");
    }
    if let Some(k) = a.cv {
        if k < 2 {
            return usage(&format!("--cv needs k >= 2, got {k}"));
        }
    }
    if let Err(e) = a.hyperparameters().validate() {
        return usage(&e.to_string());
    }
    let explicit_shape = SHAPE_FLAGS
        .iter()
        .any(|f| matches.value_source(f) == Some(ValueSource::CommandLine));
    report(run_patchnet(&a, explicit_shape))
}

fn run_patchnet(a: &PatchnetArgs, explicit_shape: bool) -> Result<()> {
    if a.train {
        let dir = a.model.as_ref().expect("checked");
        train(&a.data, &a.hyperparameters(), dir, &a.options(), &mut std::io::stdout())?;
        eprintln!("model saved to {}", dir.display());
    } else if a.predict {
        let dir = a.model.as_ref().expect("checked");
        if explicit_shape {
            let model = load_model(dir)?;
            if model.hyper.shape != a.shape() {
                return Err(Error::Config(format!(
                    "shape flags {:?} do not match the model in {} ({:?})",
                    a.shape(),
                    dir.display(),
                    model.hyper.shape
                )));
            }
        }
        write_output(a.output.as_ref(), &predict(&a.data, dir)?)?;
    } else if let Some(k) = a.cv {
        let patches = read_patch_data(&a.data)?;
        let cv = kfold_cv(&patches, k, &a.hyperparameters(), &a.options())?;
        eprint!("{}", format_table(&cv));
        write_output(a.output.as_ref(), &format_key_values(&cv))?;
    }
    Ok(())
}
