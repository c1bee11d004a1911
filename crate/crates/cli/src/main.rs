//! Command-line driver: fixture generation and the five pipeline stages.
//! Exit codes: 0 ok, 1 validation error, 2 runtime error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use planesplat::config::RunConfig;
use planesplat::error::Error;
use planesplat::fixture::{self, FixtureKind, FixtureParams, WallLayout};
use planesplat::pipeline::{self, StageOutcome};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "planesplat",
    about = "Indoor surface reconstruction with plane-prior-guided flattened Gaussian splatting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fixture (inputs + ground truth + run config)
    MakeFixture(MakeFixtureArgs),
    /// Align dense depth priors to sparse depth and write gating masks
    Align(StageArgs),
    /// Refine plane proposals into per-view label maps
    Lp3(StageArgs),
    /// Optimize the Gaussian scene
    Train(StageArgs),
    /// Fuse rendered depth into a mesh
    Fuse(StageArgs),
    /// Surface + image metrics against ground truth
    Eval(StageArgs),
    /// Run align, lp3, train, fuse and eval in order
    All(StageArgs),
}

#[derive(Args)]
struct MakeFixtureArgs {
    /// Fixture kind
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with fixture parameter overrides
    #[arg(long)]
    params: Option<PathBuf>,
    /// Wall layout for the two-walls kind
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    BoxRoom,
    TwoWalls,
    SphereInRoom,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Perp,
    Both,
}

#[derive(Args)]
struct StageArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Re-run even when the stage is up to date
    #[arg(long)]
    force: bool,
    /// Print the resolved configuration and exit
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> planesplat::Result<()> {
    match cli.command {
        Command::MakeFixture(args) => make_fixture(args),
        Command::Align(args) => stage(args, |cfg, force| {
            report("align", pipeline::cmd_align(cfg, force)?);
            Ok(())
        }),
        Command::Lp3(args) => stage(args, |cfg, force| {
            report("lp3", pipeline::cmd_lp3(cfg, force)?);
            Ok(())
        }),
        Command::Train(args) => stage(args, |cfg, force| {
            report("train", pipeline::cmd_train(cfg, force)?);
            Ok(())
        }),
        Command::Fuse(args) => stage(args, |cfg, force| {
            report("fuse", pipeline::cmd_fuse(cfg, force)?);
            Ok(())
        }),
        Command::Eval(args) => stage(args, |cfg, force| {
            match pipeline::cmd_eval(cfg, force)? {
                Some(r) => println!("{}", serde_json::to_string_pretty(&r)?),
                None => println!("eval: up to date"),
            }
            Ok(())
        }),
        Command::All(args) => stage(args, |cfg, force| {
            match pipeline::cmd_all(cfg, force)? {
                Some(r) => println!("{}", serde_json::to_string_pretty(&r)?),
                None => println!("all stages up to date"),
            }
            Ok(())
        }),
    }
}

fn report(name: &str, outcome: StageOutcome) {
    match outcome {
        StageOutcome::Ran => println!("{name}: done"),
        StageOutcome::SkippedUpToDate => println!("{name}: up to date (use --force to re-run)"),
    }
}

fn stage(
    args: StageArgs,
    f: impl FnOnce(&RunConfig, bool) -> planesplat::Result<()>,
) -> planesplat::Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    f(&cfg, args.force)
}

fn make_fixture(args: MakeFixtureArgs) -> planesplat::Result<()> {
    let mut params = match &args.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::FileFormat {
                path: p.clone(),
                msg: e.to_string(),
            })?;
            serde_json::from_str::<FixtureParams>(&text)?
        }
        None => FixtureParams::default(),
    };
    params.kind = match args.kind {
        KindArg::BoxRoom => FixtureKind::BoxRoom,
        KindArg::TwoWalls => FixtureKind::TwoWalls,
        KindArg::SphereInRoom => FixtureKind::SphereInRoom,
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if let Some(layout) = args.layout {
        params.layout = match layout {
            LayoutArg::Perp => WallLayout::Perp,
            LayoutArg::Both => WallLayout::Both,
        };
    }
    let data = fixture::generate(&params)?;
    let cfg_path = pipeline::write_fixture(&args.out, &data)?;
    println!(
        "fixture written to {} ({} views); run config: {}",
        args.out.display(),
        data.cams.len(),
        cfg_path.display()
    );
    Ok(())
}
