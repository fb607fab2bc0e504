use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kitbash::pipeline::{
    exit_code, export_poses, load_scene, pose_sequence, read_placements, run_attach, run_full, write_json, write_run,
    LoadedScene,
};
use kitbash::metrics::compute_metrics;
use kitbash::Result;

#[derive(Parser)]
#[command(name = "kitbash", version, about = "Attach and pose articulated parts from a scene config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scene config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; nothing is written outside it.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct WithPlacements {
    #[command(flatten)]
    common: Common,
    /// Placement JSON; defaults to `<out>/placements.json` when present,
    /// otherwise the config's initial placements.
    #[arg(long)]
    placements: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve each part's attachment independently.
    Attach(Common),
    /// Full sampler run with objective and priors.
    Solve(Common),
    /// Rooted, stable and overlap metrics for a placement file.
    Metrics(WithPlacements),
    /// Pose-sequence OBJ export for a placement file.
    Export(WithPlacements),
    /// Load and check the config without solving.
    Validate(Common),
}

fn setup(common: &Common) -> Result<LoadedScene> {
    if let Some(n) = common.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut scene = load_scene(&common.config)?;
    if let Some(seed) = common.seed {
        scene.config.seed = seed;
    }
    Ok(scene)
}

fn placements_for(args: &WithPlacements, scene: &LoadedScene) -> Result<kitbash::kinematics::PlacementSet> {
    let default = args.common.out.join("placements.json");
    match &args.placements {
        Some(p) => read_placements(p),
        None if default.is_file() => read_placements(&default),
        None => Ok(scene.initial.clone()),
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(c) => {
            let s = setup(&c)?;
            println!(
                "ok: {} parts, {} evaluation poses, objective: {}",
                s.tree.parts.len(),
                s.pose_set.len(),
                if s.config.objective.is_some() { "yes" } else { "no" }
            );
        }
        Command::Attach(c) => {
            let s = setup(&c)?;
            let out = run_attach(&s)?;
            write_run(&s, &out, &c.out)?;
            println!("attachment energy {:.6e}; wrote {}", out.report.energies.attachment, c.out.display());
        }
        Command::Solve(c) => {
            let s = setup(&c)?;
            let out = run_full(&s)?;
            write_run(&s, &out, &c.out)?;
            println!("best energies {:?}; wrote {}", out.report.energies, c.out.display());
        }
        Command::Metrics(a) => {
            let s = setup(&a.common)?;
            let placements = placements_for(&a, &s)?;
            let report = compute_metrics(&s.assembled(placements)?, &s.config.metrics)?;
            ensure_dir(&a.common.out)?;
            write_json(&a.common.out.join("metrics.json"), &report)?;
            println!("rooted {} stable {} aor {:.4}", report.rooted, report.stable, report.aor);
        }
        Command::Export(a) => {
            let s = setup(&a.common)?;
            let placements = placements_for(&a, &s)?;
            let poses = pose_sequence(&s.tree, s.config.poses.export_frames);
            let m = export_poses(&s.tree, &placements, &poses, &a.common.out.join("poses"))?;
            println!("wrote {} pose files", m.files.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
