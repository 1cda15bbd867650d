//! Command-line front end: `run`, `reproduce`, `speedup`, `export-model`.

pub mod config;
pub mod experiment;
pub mod presets;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::builtin_by_name;
use config::{load_config, parse_override, Engine, Mode};
use experiment::{json_text, pool_spec, run_experiment, run_pool, speedup_record, Report};

#[derive(Debug, Parser)]
#[command(
    name = "parrep",
    version,
    about = "Parallel replica simulation of stochastic reaction networks"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Override any config field, e.g. `--set parrep.replicas=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut v: Vec<(String, String)> = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<_>>()?;
        if let Some(s) = self.seed {
            v.push(("seed".into(), s.to_string()));
        }
        if let Some(t) = self.t_end {
            v.push(("t_end".into(), format!("{t:?}")));
        }
        if let Some(t) = self.burn_in {
            v.push(("burn_in".into(), format!("{t:?}")));
        }
        if let Some(n) = self.n_traj {
            v.push(("n_traj".into(), n.to_string()));
        }
        if let Some(r) = self.replicas {
            v.push(("parrep.replicas".into(), r.to_string()));
        }
        if let Some(o) = &self.out {
            v.push((
                "output.dir".into(),
                toml::Value::String(o.display().to_string()).to_string(),
            ));
        }
        Ok(v)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a named reproduction target.
    Reproduce {
        /// One of schlogl-fig2, schlogl-fig3, schlogl-table2, schlogl-table3, gsw-table4, gsw-iaf, gsw-fig6.
        target: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Wall-clock SSA against ParRep for identical model, t_end and n_traj.
    Speedup {
        config: PathBuf,
        /// Replica counts to measure; defaults to the config's value.
        #[arg(long = "replica-counts", value_delimiter = ',')]
        replica_counts: Vec<usize>,
        /// Repetitions per measurement; the median wall time is kept.
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a built-in model as a network file.
    ExportModel {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Error::InvalidParams(e.to_string())),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({"error": e.class(), "message": e.to_string()}));
            match e {
                Error::Schema { .. } | Error::UnknownModel(_) | Error::Io(_) => 2,
                _ => 1,
            }
        }
    }
}

fn finish(report: &Report, dir: &std::path::Path) -> Result<()> {
    report.write(dir)?;
    for (name, _) in &report.files {
        println!("{}", dir.join(name).display());
    }
    match &report.error {
        Some(e) => Err(e.clone()),
        None => Ok(()),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, overrides } => {
            let cfg = load_config(&config, &overrides.pairs()?)?;
            if cfg.mode == Mode::Reproduce {
                let target = cfg.target.clone().expect("validated");
                let (cfg, report) = presets::reproduce(&target, &overrides.pairs()?)?;
                return finish(&report, &cfg.output.dir);
            }
            let report = run_experiment(&cfg, None)?;
            finish(&report, &cfg.output.dir)
        }
        Command::Reproduce { target, overrides } => {
            let (cfg, report) = presets::reproduce(&target, &overrides.pairs()?)?;
            finish(&report, &cfg.output.dir)
        }
        Command::Speedup {
            config,
            replica_counts,
            repetitions,
            overrides,
        } => {
            let mut pairs = overrides.pairs()?;
            pairs.push(("mode".into(), "\"parrep\"".into()));
            let cfg = load_config(&config, &pairs)?;
            let model = cfg.resolve()?;
            let counts = if replica_counts.is_empty() {
                vec![cfg.parrep.as_ref().expect("validated").replicas]
            } else {
                replica_counts
            };
            let reps = repetitions.max(1);
            let median_pool = |spec: &experiment::PoolSpec| {
                let mut pools: Vec<_> = (0..reps).map(|_| run_pool(&model, spec)).collect();
                pools.sort_by(|a, b| a.wall.total_cmp(&b.wall));
                pools.swap_remove(reps / 2)
            };
            let serial = median_pool(&pool_spec(&cfg, &model, Engine::Ssa, false));
            let mut records = Vec::new();
            for r in counts {
                let mut c = cfg.clone();
                c.parrep.as_mut().expect("validated").replicas = r;
                let pool = median_pool(&pool_spec(&c, &model, Engine::Parrep, false));
                let rec = speedup_record(
                    &serial,
                    &pool,
                    &c.parrep_params().unwrap(),
                    c.t_end.unwrap(),
                );
                println!(
                    "R = {:>4}  serial {:>9.3} s  parrep {:>9.3} s  speedup {:>7.3}  throughput {:.4e}",
                    r, rec.serial_wall, rec.parrep_wall, rec.speedup, rec.parrep_throughput
                );
                records.push(rec);
            }
            std::fs::create_dir_all(&cfg.output.dir)?;
            let path = cfg.output.dir.join("speedup.json");
            std::fs::write(&path, json_text(&json!(records)))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::ExportModel { name, out } => {
            let text = builtin_by_name(&name)?.network.to_spec().to_toml()?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
