//! `psge`: run, compare and inspect grammar-based evolution experiments.

mod config;
mod experiment;
mod map;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use psge_core::{Pcfg, ProblemKind, Variant};

use config::Experiment;
use experiment::{
    load_problem, mean_best, run_variant, summary_text, write_aggregate, write_long, write_variant_files,
};

#[derive(Parser)]
#[command(name = "psge", version, about = "Grammar-based evolution: GE, PGE, SGE and PSGE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Independent seeded runs of one variant.
    Run {
        #[arg(long)]
        variant: Option<Variant>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// The same runs for several variants with matched seeds.
    Compare {
        /// Comma-separated, at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<Variant>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Map one genotype and print the derivation.
    Map {
        #[arg(long)]
        variant: Variant,
        /// Bracketed codons, e.g. `[34,13,9]` or `[[0.19,0.46],[0.27],[0.32]]`.
        #[arg(long)]
        genotype: String,
        /// Grammar file; defaults to the grammar of `--problem`.
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long, default_value = "quartic")]
        problem: ProblemKind,
        #[arg(long, default_value_t = 10)]
        max_depth: usize,
        /// Seed for codons appended by PSGE.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    elitism: Option<usize>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    #[arg(long)]
    tournament: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    genotype_size: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Keep the grammar fixed (probabilistic variants).
    #[arg(long)]
    no_learning: bool,
    /// CSV file for the boston problem.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    target_col: Option<String>,
    #[arg(long, env = "PSGE_OUTPUT_DIR", default_value = "results")]
    output: PathBuf,
    /// Write the grammar of every generation next to the run CSV.
    #[arg(long)]
    snapshot_grammar: bool,
    /// key = value settings applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record wall-clock milliseconds in `elapsed_ms` (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
}

impl CommonArgs {
    fn experiment(&self, variant: Option<Variant>) -> Result<Experiment> {
        let mut e = Experiment::default();
        if let Some(path) = &self.config {
            e.load_file(path)?;
        }
        let c = &mut e.base;
        macro_rules! apply {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { $field = v; })*
            };
        }
        apply!(
            problem => c.problem,
            seed => c.seed,
            generations => c.generations,
            population => c.population_size,
            elitism => c.elitism_count,
            mutation_rate => c.mutation_rate,
            crossover_rate => c.crossover_rate,
            tournament => c.tournament_size,
            max_depth => c.max_depth,
            genotype_size => c.genotype_size,
            sigma => c.sigma,
            lambda => c.learning.lambda,
        );
        if let Some(v) = variant {
            c.variant = v;
        }
        if self.no_learning {
            c.learning.enabled = false;
        }
        if self.timing {
            c.timing = true;
        }
        apply!(runs => e.runs, target_col => e.target_col);
        if self.grammar.is_some() {
            e.grammar = self.grammar.clone();
        }
        if self.dataset.is_some() {
            e.dataset = self.dataset.clone();
        }
        e.snapshot_grammar |= self.snapshot_grammar;
        e.check()?;
        Ok(e)
    }
}

fn cmd_run(variant: Option<Variant>, common: &CommonArgs) -> Result<()> {
    let exp = common.experiment(variant)?;
    let (problem, grammar) = load_problem(&exp)?;
    let v = exp.base.variant;
    let outputs = run_variant(&exp, &problem, &grammar, v)?;
    fs::create_dir_all(&common.output).with_context(|| format!("creating {}", common.output.display()))?;
    let mut written = write_variant_files(&common.output, exp.base.problem, v, &outputs)?;
    let columns = vec![(v, mean_best(&outputs))];
    let agg = common.output.join(format!("{}_{v}_aggregate.csv", exp.base.problem));
    write_aggregate(&agg, &columns)?;
    written.push(agg);
    print!("{}", summary_text(exp.base.problem, exp.runs, &columns));
    eprintln!("wrote {} files to {}", written.len(), common.output.display());
    Ok(())
}

fn cmd_compare(variants: &[Variant], common: &CommonArgs) -> Result<()> {
    let exp = common.experiment(None)?;
    let (problem, grammar) = load_problem(&exp)?;
    fs::create_dir_all(&common.output).with_context(|| format!("creating {}", common.output.display()))?;
    let mut by_variant = Vec::new();
    for &v in variants {
        let outputs = run_variant(&exp, &problem, &grammar, v)?;
        write_variant_files(&common.output, exp.base.problem, v, &outputs)?;
        by_variant.push((v, outputs));
    }
    let columns: Vec<_> = by_variant.iter().map(|(v, o)| (*v, mean_best(o))).collect();
    let p = exp.base.problem;
    write_aggregate(&common.output.join(format!("{p}_compare.csv")), &columns)?;
    write_long(&common.output.join(format!("{p}_compare_long.csv")), &by_variant)?;
    let text = summary_text(p, exp.runs, &columns);
    fs::write(common.output.join(format!("{p}_compare_summary.txt")), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_map(
    variant: Variant,
    genotype: &str,
    grammar: Option<&PathBuf>,
    problem: ProblemKind,
    max_depth: usize,
    seed: u64,
) -> Result<()> {
    let text = match grammar {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading grammar {}", p.display()))?,
        None => problem.default_grammar().to_string(),
    };
    let g = Pcfg::parse(&text).context("parsing grammar")?;
    let gt = map::parse_genotype(variant, genotype, &g)?;
    print!("{}", map::trace_report(gt, &g, max_depth, seed));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { variant, common } => cmd_run(*variant, common),
        Command::Compare { variants, common } => {
            if variants.iter().all(|v| *v == variants[0]) {
                Cli::command()
                    .error(ErrorKind::ValueValidation, "compare needs at least two distinct --variants")
                    .exit();
            }
            cmd_compare(variants, common)
        }
        Command::Map { variant, genotype, grammar, problem, max_depth, seed } => {
            cmd_map(*variant, genotype, grammar.as_ref(), *problem, *max_depth, *seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
