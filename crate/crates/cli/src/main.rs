use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use segkit::pipeline::{
    harmonize, run_eval, run_report, run_sample_plan, run_split, synth_phantom, DatasetManifest, EvalOptions,
    EvalScope, Failure, PhantomSpec, Prediction, RunConfig, Store,
};
use segkit::{Catalog, Error};

#[derive(Parser)]
#[command(name = "segkit", version, about = "Harmonize, split, sample and evaluate 3D segmentation datasets")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run config JSON; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// NSD tolerance in millimetres.
    #[arg(long, global = true)]
    tau_mm: Option<f64>,
    /// NSD tolerance in voxel steps; wins over --tau-mm.
    #[arg(long, global = true)]
    tau_voxels: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Reorient, resample, crop, normalize and relabel every scan of the manifests.
    Harmonize {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Patient-level train/test split of a harmonized store.
    Split {
        #[arg(long)]
        store: PathBuf,
    },
    /// Sampling pool over the training scans.
    SamplePlan {
        #[arg(long)]
        store: PathBuf,
    },
    /// Score predictions against the stored ground truth.
    Eval {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Prediction masks laid out like the store.
        #[arg(long, conflicts_with = "boxes", required_unless_present = "boxes")]
        pred_dir: Option<PathBuf>,
        /// Box baseline generated from the ground truth.
        #[arg(long, value_enum)]
        boxes: Option<Boxes>,
        #[arg(long, value_enum, default_value_t = Scope::Test)]
        scope: Scope,
    },
    /// Aggregate eval records into class, region and dataset tables.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Harmonized store whose catalog labels the records.
        #[arg(long, conflicts_with = "catalog")]
        store: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Write a synthetic three-dataset corpus with manifests and a config.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        scans_per_dataset: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Boxes {
    Tight,
    Loose,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Test,
    Train,
    All,
}

enum Outcome {
    Done,
    Partial(usize),
}

fn config(g: &Global) -> segkit::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.tau_mm {
        cfg.tau_mm = t;
    }
    if g.tau_voxels.is_some() {
        cfg.tau_voxels = g.tau_voxels;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_failures(failures: &[Failure]) -> Outcome {
    for f in failures {
        eprintln!("failed {}/{} [{}]: {}", f.dataset_id, f.scan_id, f.stage, f.error);
    }
    if failures.is_empty() {
        Outcome::Done
    } else {
        Outcome::Partial(failures.len())
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let jobs = cli
        .global
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::InvalidConfig("--jobs must be positive".into()).into());
    }
    let cfg = config(&cli.global)?;
    match cli.command {
        Command::Harmonize { out, manifests } => {
            let ms = manifests
                .iter()
                .map(DatasetManifest::load)
                .collect::<segkit::Result<Vec<_>>>()?;
            let s = harmonize(&ms, &cfg, &out, jobs)?;
            println!("harmonized {} scans into {}", s.records.len(), out.display());
            Ok(report_failures(&s.failures))
        }
        Command::Split { store } => {
            let s = run_split(&Store::new(store), &cfg)?;
            let train = s.assignments.values().filter(|v| **v == segkit::sampler::Split::Train).count();
            println!("train {train} / test {}", s.assignments.len() - train);
            Ok(Outcome::Done)
        }
        Command::SamplePlan { store } => {
            let p = run_sample_plan(&Store::new(store), &cfg)?;
            println!("sample plan: {} entries", p.entries.len());
            Ok(Outcome::Done)
        }
        Command::Eval { store, out, pred_dir, boxes, scope } => {
            let prediction = match (pred_dir, boxes) {
                (Some(d), _) => Prediction::Dir(d),
                (None, Some(Boxes::Tight)) => Prediction::TightBox,
                (None, Some(Boxes::Loose)) => Prediction::LooseBox,
                (None, None) => unreachable!("clap requires one of --pred-dir/--boxes"),
            };
            let opts = EvalOptions {
                scope: match scope {
                    Scope::Test => EvalScope::Test,
                    Scope::Train => EvalScope::Train,
                    Scope::All => EvalScope::All,
                },
                ..EvalOptions::new(prediction, &cfg)
            };
            let s = run_eval(&Store::new(store), &opts, &out, jobs)?;
            println!("{} records written to {}", s.records.len(), out.join("records.jsonl").display());
            Ok(report_failures(&s.failures))
        }
        Command::Report { records, out, store, catalog } => {
            let catalog = match (store, catalog) {
                (Some(s), _) => {
                    let store = Store::new(s);
                    let hint = format!("segkit harmonize --out {} <manifest.json>...", store.root().display());
                    Catalog::load(store.require(store.catalog_path(), &hint)?)?
                }
                (None, Some(c)) => Catalog::load(c)?,
                (None, None) => cfg.load_catalog()?,
            };
            let r = run_report(&records, &catalog, &out)?;
            print!("{}", r.region_csv());
            Ok(Outcome::Done)
        }
        Command::Phantom { out, scans_per_dataset } => {
            let spec = PhantomSpec {
                seed: cfg.seed,
                scans_per_dataset,
                ..PhantomSpec::default()
            };
            let o = synth_phantom(&out, &spec).with_context(|| format!("writing phantom to {}", out.display()))?;
            for m in &o.manifests {
                println!("{}", m.display());
            }
            println!("{}", o.config.display());
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("{n} scan(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
