//! Scenario matrices run in parallel, one report CSV per scenario, and
//! gnuplot inputs built from those CSVs.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{MatrixError, ReportError};
use crate::report::{analyze_snapshot, read_csv, write_csv, ReportRow};
use crate::sim::Simulation;
use crate::snapshot::Snapshot;

pub const MANIFEST_NAME: &str = "manifest.tsv";
pub const PLOT_SCRIPT_NAME: &str = "plot.gp";

#[derive(Clone, Debug)]
pub struct ExperimentMatrix {
    pub configs: Vec<ScenarioConfig>,
    /// Source fraction for every analysis.
    pub c: f64,
    pub output_dir: PathBuf,
    /// Scenarios run concurrently; 0 lets rayon decide.
    pub workers: usize,
    /// Also write each snapshot under `<output_dir>/<tag>/`.
    pub write_snapshots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutcome {
    pub tag: String,
    /// Report rows written, or why the scenario failed.
    pub result: Result<usize, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSummary {
    /// In config order.
    pub outcomes: Vec<ScenarioOutcome>,
}

impl MatrixSummary {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }
}

/// Simulates one scenario and analyzes each snapshot as it is taken.
pub fn run_scenario(
    config: &ScenarioConfig,
    c: f64,
    mut on_snapshot: impl FnMut(&Snapshot) -> Result<(), String>,
) -> Result<Vec<ReportRow>, String> {
    let sim = Simulation::new(config.clone()).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let mut failure = None;
    sim.run(|snap| {
        if failure.is_some() {
            return;
        }
        let step = on_snapshot(&snap).and_then(|_| analyze_snapshot(&snap, c).map_err(|e| e.to_string()));
        match step {
            Ok((row, _)) => rows.push(row),
            Err(e) => failure = Some(format!("at {} min: {e}", snap.at)),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

pub fn run_matrix(matrix: &ExperimentMatrix) -> Result<MatrixSummary, MatrixError> {
    let mut tags = HashSet::new();
    for cfg in &matrix.configs {
        cfg.validate()?;
        if !tags.insert(cfg.tag()) {
            return Err(MatrixError::DuplicateTag(cfg.tag()));
        }
    }
    let out = &matrix.output_dir;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| MatrixError::Io { path, source }
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(matrix.workers)
        .build()
        .map_err(|e| MatrixError::Pool(e.to_string()))?;

    let outcomes: Vec<ScenarioOutcome> = pool.install(|| {
        matrix
            .configs
            .par_iter()
            .map(|cfg| {
                let tag = cfg.tag();
                let result = catch_unwind(AssertUnwindSafe(|| run_one(matrix, cfg, &tag)))
                    .unwrap_or_else(|panic| Err(format!("worker panicked: {}", panic_message(&*panic))));
                ScenarioOutcome { tag, result }
            })
            .collect()
    });

    let summary = MatrixSummary { outcomes };
    let manifest = out.join(MANIFEST_NAME);
    std::fs::write(&manifest, manifest_text(&summary)).map_err(io(&manifest))?;
    Ok(summary)
}

fn run_one(matrix: &ExperimentMatrix, cfg: &ScenarioConfig, tag: &str) -> Result<usize, String> {
    let snap_dir = matrix.output_dir.join(tag);
    if matrix.write_snapshots {
        std::fs::create_dir_all(&snap_dir).map_err(|e| format!("{}: {e}", snap_dir.display()))?;
    }
    let rows = run_scenario(cfg, matrix.c, |snap| {
        if !matrix.write_snapshots {
            return Ok(());
        }
        let path = snap_dir.join(format!("t{}.snap", snap.at));
        snap.write_file(&path).map_err(|e| format!("{}: {e}", path.display()))
    })?;
    let csv = matrix.output_dir.join(format!("{tag}.csv"));
    write_csv(&csv, &rows).map_err(|e| e.to_string())?;
    Ok(rows.len())
}

fn panic_message(panic: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}

/// Tab-separated `tag, status, detail`, one line per scenario in config order.
pub fn manifest_text(summary: &MatrixSummary) -> String {
    let mut out = String::from("tag\tstatus\tdetail\n");
    for o in &summary.outcomes {
        match &o.result {
            Ok(rows) => writeln!(out, "{}\tok\t{rows} rows", o.tag),
            Err(e) => writeln!(out, "{}\tfailed\t{}", o.tag, e.replace(['\t', '\n'], " ")),
        }
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotOutput {
    pub dat_files: Vec<PathBuf>,
    pub script: PathBuf,
}

/// `time kappa_min kappa_avg` per row, `?` where a value is undefined.
pub fn dat_text(rows: &[ReportRow]) -> String {
    fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
        v.map_or_else(|| "?".into(), |v| v.to_string())
    }
    let mut out = String::from("# time_min kappa_min kappa_avg\n");
    for r in rows {
        writeln!(out, "{} {} {}", r.at, cell(r.kappa_min), cell(r.kappa_avg)).unwrap();
    }
    out
}

/// Writes one `<csv stem>.dat` per CSV into `out_dir`, plus a gnuplot script
/// overlaying minimum and average connectivity of every scenario. The script
/// names the data files relative to `out_dir`.
pub fn emit_plot_data(csvs: &[PathBuf], out_dir: &Path) -> Result<PlotOutput, ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut dat_files = Vec::with_capacity(csvs.len());
    for csv in csvs {
        let rows = read_csv(csv)?;
        let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
        let dat = out_dir.join(format!("{stem}.dat"));
        std::fs::write(&dat, dat_text(&rows)).map_err(io(&dat))?;
        dat_files.push(dat);
    }
    let script = out_dir.join(PLOT_SCRIPT_NAME);
    std::fs::write(&script, plot_script(&dat_files)).map_err(io(&script))?;
    Ok(PlotOutput { dat_files, script })
}

/// Two curves per data file: minimum (solid) and average (dashed).
pub fn plot_script(dat_files: &[PathBuf]) -> String {
    let mut out = String::new();
    out.push_str("set datafile missing \"?\"\n");
    out.push_str("set xlabel \"time [min]\"\nset ylabel \"connectivity\"\n");
    out.push_str("set key outside right\nset terminal pngcairo size 1000,600\nset output \"connectivity.png\"\n");
    let curves: Vec<String> = dat_files
        .iter()
        .enumerate()
        .flat_map(|(i, dat)| {
            let name = dat.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let title = name.trim_end_matches(".dat").replace('_', "\\_");
            let color = i + 1;
            [
                format!("\"{name}\" using 1:2 with lines lc {color} dt 1 title \"{title} min\""),
                format!("\"{name}\" using 1:3 with lines lc {color} dt 2 title \"{title} avg\""),
            ]
        })
        .collect();
    if !curves.is_empty() {
        writeln!(out, "plot {}", curves.join(", \\\n     ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::parse_csv;

    fn tiny(seed: u64) -> ScenarioConfig {
        ScenarioConfig { size: 12, k: 4, b: 32, seed, duration: 20.0, snapshot_interval: 5.0, ..Default::default() }
    }

    fn matrix(dir: &Path, configs: Vec<ScenarioConfig>, workers: usize) -> ExperimentMatrix {
        ExperimentMatrix { configs, c: 1.0, output_dir: dir.to_path_buf(), workers, write_snapshots: true }
    }

    #[test]
    fn one_config_gives_one_row_per_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(1);
        let summary = run_matrix(&matrix(dir.path(), vec![cfg.clone()], 1)).unwrap();
        assert_eq!(summary.failed(), 0);
        let text = std::fs::read_to_string(dir.path().join(format!("{}.csv", cfg.tag()))).unwrap();
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 20 / 5 + 1);
        assert_eq!(summary.outcomes[0].result, Ok(5));
        let snaps = std::fs::read_dir(dir.path().join(cfg.tag())).unwrap().count();
        assert_eq!(snaps, 5);
    }

    #[test]
    fn outputs_do_not_depend_on_worker_count() {
        let configs: Vec<_> = (1..=3).map(tiny).collect();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_matrix(&matrix(a.path(), configs.clone(), 1)).unwrap();
        run_matrix(&matrix(b.path(), configs.clone(), 3)).unwrap();
        for cfg in &configs {
            let name = format!("{}.csv", cfg.tag());
            assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
        }
        let manifest = |d: &Path| std::fs::read(d.join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest(a.path()), manifest(b.path()));
    }

    #[test]
    fn duplicate_tags_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_matrix(&matrix(dir.path(), vec![tiny(1), tiny(1)], 1)).unwrap_err();
        assert!(matches!(err, MatrixError::DuplicateTag(_)));
    }

    #[test]
    fn failing_scenario_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        // Writing a snapshot into a path occupied by a file fails for that scenario only.
        let bad = tiny(2);
        std::fs::write(dir.path().join(bad.tag()), "").unwrap();
        let summary = run_matrix(&matrix(dir.path(), vec![tiny(1), bad], 2)).unwrap();
        assert_eq!(summary.failed(), 1);
        assert!(summary.outcomes[0].result.is_ok());
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest.lines().filter(|l| l.contains("\tfailed\t")).count(), 1);
    }

    #[test]
    fn single_csv_gives_three_column_dat_with_same_values() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("one.csv");
        std::fs::write(&csv, "time_min,kappa_min,kappa_avg,resilience,c_used,pairs_computed,n,m,reciprocity\n0,,,,1,,1,0,\n2.5,3,4.125,2,1,12,4,9,0.5\n").unwrap();
        let out = emit_plot_data(&[csv], dir.path()).unwrap();
        let dat = std::fs::read_to_string(&out.dat_files[0]).unwrap();
        let data: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, ["0 ? ?", "2.5 3 4.125"]);
        assert!(data.iter().all(|l| l.split(' ').count() == 3));
    }

    #[test]
    fn four_csvs_give_eight_curves() {
        let dir = tempfile::tempdir().unwrap();
        let csvs: Vec<PathBuf> = [5, 10, 20, 30]
            .iter()
            .map(|k| {
                let p = dir.path().join(format!("k{k}.csv"));
                std::fs::write(&p, format!("{}\n120,{k},{k},0,1,2,3,4,1\n", crate::report::CSV_HEADER)).unwrap();
                p
            })
            .collect();
        let out = emit_plot_data(&csvs, dir.path()).unwrap();
        let script = std::fs::read_to_string(out.script).unwrap();
        assert_eq!(script.matches(" with lines ").count(), 8);
    }

    #[test]
    fn missing_column_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("broken.csv");
        std::fs::write(&csv, "time_min,kappa_min\n1,2\n").unwrap();
        let err = emit_plot_data(&[csv], dir.path()).unwrap_err().to_string();
        assert!(err.contains("broken.csv") && err.contains("kappa_avg"), "{err}");
    }
}
