use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdss::bench::{self, BenchError, CommandOutput, RunConfig};

#[derive(Parser)]
#[command(
    name = "sdss",
    version,
    about = "GCN training with self-supervision and self-distillation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one mode over the configured seeds.
    Train(Common),
    /// Run the mode, pretext-task and distillation-term comparison grid.
    Ablation(Common),
    /// Accuracy of all four modes against labeled nodes per class.
    LabelRatio(Common),
    /// Write pretext-task targets for inspection.
    PretextExport(Common),
    /// Write a planted-partition dataset directory.
    GenSynthetic(Common),
}

#[derive(Args)]
struct Common {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. --set alpha=0.2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Dataset directory, or "synthetic".
    #[arg(long)]
    dataset: Option<String>,
    /// baseline, ss, sd or sdss.
    #[arg(long)]
    mode: Option<String>,
    /// degree, clustering, partitioning or completion.
    #[arg(long)]
    pretext: Option<String>,
    /// Seed list such as 0,1,2 or 0..10; falls back to SDSS_SEED.
    #[arg(long)]
    seeds: Option<String>,
    /// Labels per class for label-ratio, e.g. 5,10,20,50.
    #[arg(long)]
    per_class: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn into_config(self) -> Result<RunConfig, BenchError> {
        let file = self
            .config
            .as_ref()
            .map(|p| {
                std::fs::read_to_string(p).map_err(|e| {
                    BenchError::Usage(format!("cannot read config {}: {e}", p.display()))
                })
            })
            .transpose()?;
        let mut overrides = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| BenchError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let flags = [
            ("dataset", self.dataset),
            ("mode", self.mode),
            ("pretext", self.pretext),
            ("seeds", self.seeds),
            ("per_class", self.per_class),
            ("out", self.out.map(|p| p.display().to_string())),
        ];
        overrides.extend(
            flags
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        let env = std::env::var("SDSS_SEED").ok();
        RunConfig::from_sources(file.as_deref(), &overrides, env.as_deref())
    }
}

type CommandFn = fn(&RunConfig) -> Result<CommandOutput, BenchError>;

fn run(cli: Cli) -> Result<CommandOutput, BenchError> {
    let (common, cmd): (Common, CommandFn) = match cli.command {
        Command::Train(c) => (c, bench::cmd_train),
        Command::Ablation(c) => (c, bench::cmd_ablation),
        Command::LabelRatio(c) => (c, bench::cmd_label_ratio),
        Command::PretextExport(c) => (c, bench::cmd_pretext_export),
        Command::GenSynthetic(c) => (c, bench::cmd_gen_synthetic),
    };
    cmd(&common.into_config()?)
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
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            for line in &out.lines {
                // a closed pipe (e.g. `| head`) is not an error
                if writeln!(stdout, "{line}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
