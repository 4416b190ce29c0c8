use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use gallerynav_core::config::{load_noise_profile, AgentConfig};
use gallerynav_core::episodes::{
    distance_histogram, generate_exploration_episodes, generate_pointnav_episodes, Dataset, EpisodeWorld, WorldRef,
};
use gallerynav_core::runner::{merge_aggregates, run_dataset, score_directory, World};
use gallerynav_core::sim::EpisodeKind;
use gallerynav_core::world::{generate_museum, FloorPlan, MuseumParams};

#[derive(Parser)]
#[command(name = "gallerynav", version, about = "Museum navigation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Exploration,
    Pointnav,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a museum floorplan.
    GenWorld {
        #[arg(long)]
        seed: u64,
        /// TOML file with generator parameters; defaults apply to missing keys.
        #[arg(long)]
        params_file: Option<PathBuf>,
        /// Output floorplan JSON.
        #[arg(long)]
        out: PathBuf,
        /// Also write the rasterized grid (P-OCC text) here.
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Generate an episode dataset (JSON lines) for a floorplan.
    GenEpisodes {
        #[arg(long)]
        world: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Exploration episode count.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Rejection-sampling draws per pointnav tier.
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        /// Write the geodesic distance histogram CSV here (pointnav only).
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long)]
        agent_config: Option<PathBuf>,
    },
    /// Run an agent on a dataset.
    Run {
        #[arg(long)]
        episodes: PathBuf,
        #[arg(long)]
        agent_config: Option<PathBuf>,
        /// `noise-free`, `noisy`, or a TOML noise model file.
        #[arg(long, default_value = "noise-free")]
        noise_profile: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Recompute metrics from run logs.
    Score {
        /// The `logs` directory of a run.
        #[arg(long)]
        logs: PathBuf,
        /// Ground-truth floorplan JSON or P-OCC grid.
        #[arg(long)]
        gt_world: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        agent_config: Option<PathBuf>,
    },
    /// Merge the aggregate tables of several runs.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
    },
}

fn agent_config(path: &Option<PathBuf>) -> Result<AgentConfig> {
    Ok(match path {
        Some(p) => AgentConfig::load(p)?,
        None => AgentConfig::default(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Path of `target` as stored in a file written to `from_file`: just the
/// file name when both share a directory, otherwise absolute.
fn reference(target: &Path, from_file: &Path) -> Result<String> {
    let abs = |p: &Path| -> Result<PathBuf> {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dir = fs::canonicalize(parent).with_context(|| format!("resolving {}", parent.display()))?;
        Ok(dir.join(p.file_name().context("path has no file name")?))
    };
    let (t, f) = (abs(target)?, abs(from_file)?);
    if t.parent() == f.parent() {
        Ok(t.file_name().expect("checked above").to_string_lossy().into_owned())
    } else {
        Ok(t.to_string_lossy().into_owned())
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenWorld { seed, params_file, out, grid_out } => {
            let params: MuseumParams = match params_file {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => MuseumParams::default(),
            };
            let plan = generate_museum(seed, &params)?;
            write(&out, &plan.to_json())?;
            if let Some(g) = grid_out {
                let world = World::from_plan(plan.clone(), params.cell_size)?;
                write(&g, &world.grid.to_text())?;
            }
            eprintln!(
                "{} rooms, {} doorways, {} points of interest, {:.1} m² navigable",
                plan.rooms.len(),
                plan.doorways.len(),
                plan.pois.len(),
                plan.navigable_area()
            );
        }
        Command::GenEpisodes { world, kind, seed, out, count, budget, histogram, agent_config: cfg } => {
            let cfg = agent_config(&cfg)?;
            let text = fs::read_to_string(&world).with_context(|| format!("reading {}", world.display()))?;
            let plan = FloorPlan::from_json(&text)?;
            let w = World::from_plan(plan.clone(), cfg.mapper.cell_size)?;
            // the output directory must exist before the reference is resolved
            write(&out, "")?;
            let world_ref = WorldRef { floorplan: reference(&world, &out)?, seed: None };
            let ew = EpisodeWorld { plan: &plan, grid: &w.grid, world_ref: world_ref.clone(), agent_radius: cfg.sim.agent_radius };
            let dataset = match kind {
                Kind::Exploration => {
                    let eps = generate_exploration_episodes(&ew, count, seed)?;
                    Dataset::new(world_ref, EpisodeKind::Exploration, seed, eps, vec![])
                }
                Kind::Pointnav => {
                    let (eps, missing) = generate_pointnav_episodes(&ew, seed, budget)?;
                    Dataset::new(world_ref, EpisodeKind::Pointnav, seed, eps, missing)
                }
            };
            write(&out, &dataset.to_jsonl())?;
            if let Some(h) = histogram {
                write(&h, &distance_histogram(&dataset.episodes)?.to_csv())?;
            }
            let t = &dataset.manifest.tiers;
            eprintln!(
                "{} episodes (easy {}, medium {}, difficult {}; {} tiers missing)",
                dataset.manifest.count,
                t.easy,
                t.medium,
                t.difficult,
                dataset.manifest.missing.len()
            );
        }
        Command::Run { episodes, agent_config: cfg, noise_profile, out_dir } => {
            let cfg = agent_config(&cfg)?;
            let noise = load_noise_profile(&noise_profile)?;
            let text = fs::read_to_string(&episodes).with_context(|| format!("reading {}", episodes.display()))?;
            let dataset = Dataset::from_jsonl(&text)?;
            let base = episodes.parent().unwrap_or(Path::new("."));
            let world = World::load(&base.join(&dataset.manifest.world_ref.floorplan), cfg.mapper.cell_size)?;
            fs::create_dir_all(&out_dir)?;
            write(&out_dir.join("agent_config.toml"), &cfg.to_toml())?;
            let (report, _) = run_dataset(&world, &dataset, &cfg, &noise, Some(&out_dir))?;
            print!("{}", report.aggregate_csv());
        }
        Command::Score { logs, gt_world, out, agent_config: cfg } => {
            let cfg = agent_config(&cfg)?;
            let world = World::load(&gt_world, cfg.mapper.cell_size)?;
            let report = score_directory(&logs, &world)?;
            report.write_csvs(&out)?;
            print!("{}", report.aggregate_csv());
        }
        Command::Report { runs, csv } => {
            let mut tables = Vec::new();
            for r in &runs {
                let p = r.join("aggregate.csv");
                let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                tables.push((r.display().to_string(), text));
            }
            if tables.is_empty() {
                bail!("no runs given");
            }
            write(&csv, &merge_aggregates(&tables)?)?;
        }
    }
    Ok(())
}
