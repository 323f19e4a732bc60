//! Command-line front end for the Self-ONN thermal fault diagnosis
//! pipeline. The binary is a thin wrapper over [`run`].

pub mod commands;
pub mod config;
pub mod exit;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, FoldSelection, Overrides, Preset, RunConfig};
use exit::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(name = "selfonn-kit", version, about = "Self-ONN thermal fault diagnosis toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic thermal corpus and its manifest.
    Synth,
    /// Assign manifest entries to stratified, ordered folds.
    Split,
    /// Train and test on one cross-validation split.
    Train,
    /// Train and test on every split, then aggregate.
    Crossval,
    /// Evaluate saved weights on a fold or the whole manifest.
    Eval,
    /// Print trainable parameter counts for Q = 1..5.
    Params,
    /// Time single-frame inference.
    Bench {
        /// Benchmark Q = 1..5 instead of the configured order.
        #[arg(long)]
        all_q: bool,
    },
}

/// Options shared by every subcommand. A flag beats the config file, which
/// beats the built-in default.
#[derive(Debug, Args)]
pub struct Flags {
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Taylor order of the generative neurons.
    #[arg(long, global = true)]
    pub q: Option<u32>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Initial learning rate.
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// `all` or a 1-based test fold.
    #[arg(long, global = true, value_name = "all|i")]
    pub folds: Option<FoldSelection>,
    /// Output directory (corpus directory for `synth`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Corpus root that manifest paths are relative to.
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Fold plan written by `split`.
    #[arg(long, global = true, value_name = "FILE")]
    pub plan: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    /// Base architecture before `[model]` overrides.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Timed benchmark runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub warmup: Option<usize>,
    /// Synthetic images per class.
    #[arg(long, global = true)]
    pub per_class: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
}

impl Flags {
    fn overrides(&self, command: &Command) -> Overrides {
        let mut o = Overrides {
            q: self.q,
            seed: self.seed,
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            folds: self.folds,
            out: self.out.clone(),
            data: self.data.clone(),
            manifest: self.manifest.clone(),
            plan: self.plan.clone(),
            weights: self.weights.clone(),
            preset: self.preset,
            runs: self.runs,
            warmup: self.warmup,
            per_class: self.per_class,
            width: self.width,
            height: self.height,
        };
        // `synth --out DIR` names the corpus directory.
        if matches!(command, Command::Synth) && o.data.is_none() {
            o.data = o.out.clone();
        }
        o
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(file, &cli.flags.overrides(&cli.command))?;
    match &cli.command {
        Command::Synth => commands::cmd_synth(&cfg, out),
        Command::Split => commands::cmd_split(&cfg, out),
        Command::Train => commands::cmd_train(&cfg, out),
        Command::Crossval => commands::cmd_crossval(&cfg, out),
        Command::Eval => commands::cmd_eval(&cfg, out),
        Command::Params => commands::cmd_params(&cfg, out),
        Command::Bench { all_q } => commands::cmd_bench(&cfg, *all_q, out),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                ExitCode::Usage
            } else {
                let _ = out.write_all(text.as_bytes());
                ExitCode::Success
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => ExitCode::Success,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
