use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use kadconn::config::parse_scenarios;
use kadconn::connectivity::{menger_paths, DiGraph, DimacsProblem, TransformedGraph};
use kadconn::experiment::{emit_plot_data, run_matrix, ExperimentMatrix, MANIFEST_NAME};
use kadconn::report::{analyze_graph, assert_resilience, churn_phase_stats, kappa_series, read_csv};
use kadconn::snapshot::Snapshot;
use kadconn::time::SimTime;

/// Kademlia overlay simulator and vertex-connectivity analyzer.
///
/// Exit status: 0 on success, 1 when an assertion or scenario fails, 2 on bad input.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a config file and write one report CSV each.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of every scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the duration (minutes) of every scenario.
        #[arg(long)]
        duration: Option<f64>,
        /// Overrides the snapshot interval (minutes) of every scenario.
        #[arg(long)]
        snapshot_interval: Option<f64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Fraction of vertices used as flow sources, in (0, 1].
        #[arg(long, default_value_t = 0.02)]
        c: f64,
        /// Parallel scenarios; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also store every snapshot under <out>/<tag>/.
        #[arg(long)]
        snapshots: bool,
    },
    /// Compute the connectivity of one snapshot file.
    Analyze {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        c: f64,
        /// Write the flow problem of the weakest pair here as DIMACS.
        #[arg(long)]
        dimacs_out: Option<PathBuf>,
    },
    /// Mean and relative variance of the minimum connectivity after churn starts.
    Stats {
        #[arg(long)]
        csv: PathBuf,
        /// Minutes.
        #[arg(long, default_value_t = 120.0)]
        churn_start: f64,
    },
    /// Check that the minimum connectivity exceeds the number of attackers.
    Assert {
        #[arg(long)]
        csv: PathBuf,
        /// Number of compromised nodes to tolerate.
        #[arg(long)]
        tolerate: u32,
        /// Snapshot time in minutes; defaults to the last analyzed row.
        #[arg(long)]
        at: Option<f64>,
    },
    /// Turn every report CSV in a directory into gnuplot data plus a script.
    Plot {
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a DIMACS max-flow problem.
    Maxflow {
        #[arg(long)]
        dimacs: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// `Ok(false)` reports a failed check rather than bad input.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Simulate { config, seed, duration, snapshot_interval, out, c, workers, snapshots } => {
            let mut configs =
                parse_scenarios(&read(&config)?).with_context(|| format!("in {}", config.display()))?;
            if configs.is_empty() {
                bail!("{} defines no scenarios", config.display());
            }
            for cfg in &mut configs {
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                if let Some(d) = duration {
                    cfg.duration = d;
                }
                if let Some(i) = snapshot_interval {
                    cfg.snapshot_interval = i;
                }
            }
            if !(c > 0.0 && c <= 1.0) {
                bail!("--c must be in (0, 1], got {c}");
            }
            let matrix = ExperimentMatrix { configs, c, output_dir: out.clone(), workers, write_snapshots: snapshots };
            let summary = run_matrix(&matrix)?;
            for o in &summary.outcomes {
                match &o.result {
                    Ok(rows) => println!("ok     {} ({rows} rows)", o.tag),
                    Err(e) => println!("FAILED {}: {e}", o.tag),
                }
            }
            println!("manifest: {}", out.join(MANIFEST_NAME).display());
            Ok(summary.failed() == 0)
        }
        Command::Analyze { snapshot, c, dimacs_out } => {
            let snap = Snapshot::read_file(&snapshot)?;
            let g = DiGraph::from_snapshot(&snap);
            let (row, report) = analyze_graph(&g, snap.at, c)?;
            println!("time_min {}", row.at);
            println!("n {}", row.n);
            println!("m {}", row.m);
            match row.reciprocity {
                Some(r) => println!("reciprocity {r}"),
                None => println!("reciprocity undefined"),
            }
            let Some(report) = report else {
                println!("kappa undefined (fewer than 2 nodes)");
                return Ok(true);
            };
            println!("c_used {}", report.c_used);
            println!("sources {}", report.sources);
            println!("pairs_computed {}", report.pairs_computed);
            println!("kappa_min {}", report.kappa_min);
            println!("kappa_avg {}", report.kappa_avg);
            println!("resilience {}", report.resilience);
            if let Some((v, w)) = report.witness {
                let name = |x: usize| g.label(x).map(|id| id.to_string()).unwrap_or_else(|| x.to_string());
                println!("witness {} -> {}", name(v), name(w));
                if let Some(dir) = dimacs_out {
                    let t = TransformedGraph::new(&g);
                    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
                    let path = dir.join(format!("pair_{v}_{w}.dimacs"));
                    std::fs::write(&path, DimacsProblem::for_pair(&t, v, w).to_text())
                        .with_context(|| format!("cannot write {}", path.display()))?;
                    println!("dimacs {}", path.display());
                    let paths = menger_paths(&g, &t, v, w)?;
                    println!("disjoint_paths {}", paths.len());
                }
            }
            Ok(true)
        }
        Command::Stats { csv, churn_start } => {
            let rows = read_csv(&csv)?;
            let stats = churn_phase_stats(&kappa_series(&rows), SimTime::from_minutes_f64(churn_start))?;
            println!("samples {}", stats.samples);
            println!("mean {}", stats.mean);
            println!("variance {}", stats.variance);
            match stats.relative_variance {
                Some(rv) => println!("rv {rv}"),
                None => println!("rv undefined"),
            }
            Ok(true)
        }
        Command::Assert { csv, tolerate, at } => {
            let rows = read_csv(&csv)?;
            let row = match at {
                Some(t) => {
                    let t = SimTime::from_minutes_f64(t);
                    rows.iter().find(|r| r.at == t).with_context(|| format!("{}: no row at {t} min", csv.display()))?
                }
                None => rows
                    .iter()
                    .rev()
                    .find(|r| r.kappa_min.is_some())
                    .with_context(|| format!("{}: no analyzed rows", csv.display()))?,
            };
            let Some(kappa) = row.kappa_min else {
                bail!("{}: connectivity undefined at {} min", csv.display(), row.at);
            };
            let verdict = assert_resilience(kappa, tolerate);
            println!(
                "{} at {} min: kappa_min {kappa} {} a = {tolerate}, r = {}",
                if verdict.pass { "PASS" } else { "FAIL" },
                row.at,
                if verdict.pass { ">" } else { "<=" },
                verdict.r
            );
            Ok(verdict.pass)
        }
        Command::Plot { dir, out } => {
            let mut csvs: Vec<PathBuf> = std::fs::read_dir(&dir)
                .with_context(|| format!("cannot list {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            csvs.sort();
            if csvs.is_empty() {
                bail!("no .csv files in {}", dir.display());
            }
            let plot = emit_plot_data(&csvs, out.as_deref().unwrap_or(&dir))?;
            for d in &plot.dat_files {
                println!("{}", d.display());
            }
            println!("{}", plot.script.display());
            Ok(true)
        }
        Command::Maxflow { dimacs } => {
            let problem = DimacsProblem::parse(&read(&dimacs)?).with_context(|| format!("in {}", dimacs.display()))?;
            println!("{}", problem.max_flow()?);
            Ok(true)
        }
    }
}
