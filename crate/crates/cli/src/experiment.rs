//! Multi-run orchestration and CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use psge_core::engine::{run_seed, run_with_observer};
use psge_core::{Pcfg, Problem, ProblemKind, RunRecord, RunResult, Variant};
use rayon::prelude::*;

use crate::config::Experiment;

pub const RUN_HEADER: [&str; 7] =
    ["run", "generation", "best_gen", "best_overall", "mean", "invalid_count", "elapsed_ms"];

pub struct RunOutput {
    pub run: usize,
    pub seed: u64,
    pub result: RunResult,
    /// Grammar text per generation, when snapshots were requested.
    pub snapshots: Vec<String>,
    pub test_fitness: Option<f64>,
}

pub fn load_problem(exp: &Experiment) -> Result<(Problem, Pcfg)> {
    let kind = exp.base.problem;
    let problem = match kind {
        ProblemKind::BostonHousing => {
            let path = exp.dataset.as_deref().context("problem `boston` needs --dataset PATH")?;
            Problem::boston(path, &exp.target_col, exp.base.seed)?
        }
        _ => Problem::builtin(kind)?,
    };
    let text = match &exp.grammar {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading grammar {}", path.display()))?,
        None => problem.grammar_text(),
    };
    let grammar = Pcfg::parse(&text).context("parsing grammar")?;
    Ok((problem, grammar))
}

/// Runs `exp.runs` independent seeded runs of `variant` in parallel.
pub fn run_variant(exp: &Experiment, problem: &Problem, grammar: &Pcfg, variant: Variant) -> Result<Vec<RunOutput>> {
    (0..exp.runs)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(exp.base.seed, run);
            let config = psge_core::RunConfig { variant, seed, ..exp.base.clone() };
            let mut snapshots = Vec::new();
            let result = run_with_observer(&config, grammar, problem, |view| {
                if exp.snapshot_grammar {
                    snapshots.push(format!("# generation {}\n{}", view.record.generation, view.grammar));
                }
            })?;
            let test_fitness =
                result.best.as_ref().and_then(|b| b.phenotype.as_deref()).and_then(|ph| problem.evaluate_test(ph));
            Ok(RunOutput { run, seed, result, snapshots, test_fitness })
        })
        .collect()
}

fn record_fields(r: &RunRecord) -> [String; 6] {
    [
        r.generation.to_string(),
        r.best_gen.to_string(),
        r.best_overall.to_string(),
        r.mean.to_string(),
        r.invalid_count.to_string(),
        r.elapsed_ms.to_string(),
    ]
}

pub fn write_run_csv(path: &Path, out: &RunOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(RUN_HEADER)?;
    for r in &out.result.records {
        let mut row = vec![out.run.to_string()];
        row.extend(record_fields(r));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean over runs of the best-overall fitness, per generation.
pub fn mean_best(outputs: &[RunOutput]) -> Vec<f64> {
    let gens = outputs.iter().map(|o| o.result.records.len()).min().unwrap_or(0);
    (0..gens)
        .map(|g| outputs.iter().map(|o| o.result.records[g].best_overall).sum::<f64>() / outputs.len() as f64)
        .collect()
}

pub fn write_aggregate(path: &Path, columns: &[(Variant, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["generation".to_string()];
    header.extend(columns.iter().map(|(v, _)| v.tag().to_string()));
    w.write_record(&header)?;
    let gens = columns.iter().map(|(_, c)| c.len()).min().unwrap_or(0);
    for g in 0..gens {
        let mut row = vec![g.to_string()];
        row.extend(columns.iter().map(|(_, c)| c[g].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per run: seed, final best fitness, held-out fitness and phenotype.
pub fn write_summary(path: &Path, outputs: &[RunOutput]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["run", "seed", "best_overall", "test_fitness", "phenotype"])?;
    for o in outputs {
        let best = o.result.best.as_ref();
        w.write_record([
            o.run.to_string(),
            o.seed.to_string(),
            best.map_or(f64::INFINITY, |b| b.fitness).to_string(),
            o.test_fitness.map(|f| f.to_string()).unwrap_or_default(),
            best.and_then(|b| b.phenotype.clone()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_long(path: &Path, by_variant: &[(Variant, Vec<RunOutput>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["variant"];
    header.extend(RUN_HEADER);
    w.write_record(&header)?;
    for (v, outputs) in by_variant {
        for o in outputs {
            for r in &o.result.records {
                let mut row = vec![v.tag().to_string(), o.run.to_string()];
                row.extend(record_fields(r));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes per-run CSVs, grammar snapshots and the run summary of one variant.
/// Returns the files written.
pub fn write_variant_files(
    dir: &Path,
    problem: ProblemKind,
    variant: Variant,
    outputs: &[RunOutput],
) -> Result<Vec<PathBuf>> {
    let prefix = format!("{problem}_{variant}");
    let mut written = Vec::new();
    for o in outputs {
        let path = dir.join(format!("{prefix}_run{:03}.csv", o.run));
        write_run_csv(&path, o)?;
        written.push(path);
        if !o.snapshots.is_empty() {
            let path = dir.join(format!("{prefix}_run{:03}_grammars.txt", o.run));
            fs::write(&path, o.snapshots.join("\n"))?;
            written.push(path);
        }
    }
    let path = dir.join(format!("{prefix}_summary.csv"));
    write_summary(&path, outputs)?;
    written.push(path);
    Ok(written)
}

/// Plain-text table of final mean best fitness per variant.
pub fn summary_text(problem: ProblemKind, runs: usize, columns: &[(Variant, Vec<f64>)]) -> String {
    let mut s = format!("problem {problem}, {runs} runs, final mean best fitness\n");
    for (v, c) in columns {
        let last = c.last().copied().unwrap_or(f64::INFINITY);
        s.push_str(&format!("{:<6}{last}\n", v.tag()));
    }
    s
}
