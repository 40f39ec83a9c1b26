use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use player_form::ingest::Role;
use player_form::pipeline::{self, PipelineError, Preset, RunConfig, StageStatus};

#[derive(Parser)]
#[command(name = "player-form", version, about = "Pitch-sequence form embeddings and clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a corpus of games into <out>/sim
    Simulate(Common),
    /// Enumerate the gamestate-delta vocabulary
    Vocab(Common),
    /// Parse, reconstruct and tokenize events; fit the feature standardizer
    Ingest(Common),
    /// Cut form windows and the chronological train/held-out split
    Windows(Common),
    /// Train the encoder
    Train {
        #[command(flatten)]
        common: Common,
        /// Print the resolved configuration and exit
        #[arg(long)]
        dry_run: bool,
    },
    /// Compute game-start form embeddings from the trained checkpoint
    Embed(Common),
    /// Ward-cluster form embeddings and the statistics baseline
    Cluster(Common),
    /// Write timeline CSV/SVG reports and switch rates
    Report(Common),
    /// Run every stage in order
    Pipeline(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Batter,
    Pitcher,
}

#[derive(Args)]
struct Common {
    /// Run directory
    #[arg(long, default_value = "runs/default")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    #[arg(long, value_enum, default_value = "batter")]
    role: RoleArg,
    /// Number of games to simulate
    #[arg(long, default_value_t = 240, value_parser = clap::value_parser!(u64).range(1..))]
    games: u64,
    /// Directory with events.csv (and optionally seasons.csv) to ingest
    /// instead of the simulated corpus
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of clusters
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Output width of the statistics baseline PCA
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pca_dim: u64,
    /// Contrastive temperature
    #[arg(long)]
    tau: Option<f64>,
    /// Weight of the contrastive loss
    #[arg(long)]
    lambda: Option<f64>,
    /// Window stride in at-bats
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    stride: Option<u64>,
    /// Longest view, in pitches plus [CLS], admitted to a batch
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    max_len: Option<u64>,
    /// Training steps
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    steps: Option<u64>,
}

impl Common {
    fn run_config(&self) -> RunConfig {
        let mut rc = RunConfig::new(&self.out);
        rc.seed = self.seed;
        rc.preset = match self.preset {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        };
        rc.role = match self.role {
            RoleArg::Batter => Role::Batter,
            RoleArg::Pitcher => Role::Pitcher,
        };
        rc.games = self.games as usize;
        rc.input = self.input.clone();
        rc.k = self.k as usize;
        rc.pca_dim = self.pca_dim as usize;
        rc.tau = self.tau;
        rc.lambda = self.lambda;
        rc.stride = self.stride.map(|v| v as usize);
        rc.max_len = self.max_len.map(|v| v as usize);
        rc.steps = self.steps.map(|v| v as usize);
        rc
    }
}

fn report(name: &str, status: StageStatus) {
    match status {
        StageStatus::Ran => println!("{name}: done"),
        StageStatus::UpToDate => println!("{name}: up to date"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(c) => report("simulate", pipeline::cmd_simulate(&c.run_config())?),
        Command::Vocab(c) => report("vocab", pipeline::cmd_vocab(&c.run_config())?),
        Command::Ingest(c) => report("ingest", pipeline::cmd_ingest(&c.run_config())?),
        Command::Windows(c) => report("windows", pipeline::cmd_windows(&c.run_config())?),
        Command::Train { common, dry_run } => {
            let rc = common.run_config();
            rc.validate()?;
            let (vocab, sup) = pipeline::ingested_dims(&rc)?;
            print!("{}", pipeline::train_config_echo(&rc, vocab, sup));
            if !dry_run {
                report("train", pipeline::cmd_train(&rc)?);
            }
        }
        Command::Embed(c) => report("embed", pipeline::cmd_embed(&c.run_config())?),
        Command::Cluster(c) => report("cluster", pipeline::cmd_cluster(&c.run_config())?),
        Command::Report(c) => report("report", pipeline::cmd_report(&c.run_config())?),
        Command::Pipeline(c) => {
            for (stage, status) in pipeline::cmd_pipeline(&c.run_config())? {
                report(stage.command(), status);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<PipelineError>() {
                Some(PipelineError::Usage(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
