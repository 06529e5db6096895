//! Experiment settings: defaults, then a key=value file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use psge_core::{LearningConfig, ProblemKind, RunConfig, Variant};

/// Everything an experiment needs besides the per-run seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub base: RunConfig,
    pub runs: usize,
    pub grammar: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub target_col: String,
    pub snapshot_grammar: bool,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            base: RunConfig::default(),
            runs: 1,
            grammar: None,
            dataset: None,
            target_col: "medv".into(),
            snapshot_grammar: false,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => bail!("expected a boolean, got `{v}`"),
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow::anyhow!("bad value `{v}` for `{key}`: {e}"))
}

impl Experiment {
    /// Applies one setting. Keys follow the `RunConfig` field names; the
    /// short flag spellings (`population`, `elitism`, ...) are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let c = &mut self.base;
        match key.as_str() {
            "variant" => c.variant = v.parse::<Variant>().map_err(anyhow::Error::msg)?,
            "problem" => c.problem = v.parse::<ProblemKind>().map_err(anyhow::Error::msg)?,
            "population_size" | "population" => c.population_size = num(&key, v)?,
            "generations" => c.generations = num(&key, v)?,
            "elitism_count" | "elitism" => c.elitism_count = num(&key, v)?,
            "mutation_rate" => c.mutation_rate = num(&key, v)?,
            "crossover_rate" => c.crossover_rate = num(&key, v)?,
            "tournament_size" | "tournament" => c.tournament_size = num(&key, v)?,
            "genotype_size" => c.genotype_size = num(&key, v)?,
            "max_depth" => c.max_depth = num(&key, v)?,
            "sigma" => c.sigma = num(&key, v)?,
            "lambda" => c.learning.lambda = num(&key, v)?,
            "learning" | "learning_enabled" => c.learning.enabled = parse_bool(v)?,
            "seed" => c.seed = num(&key, v)?,
            "timing" => c.timing = parse_bool(v)?,
            "runs" => self.runs = num(&key, v)?,
            "grammar" => self.grammar = Some(v.into()),
            "dataset" => self.dataset = Some(v.into()),
            "target_col" => self.target_col = v.into(),
            "snapshot_grammar" => self.snapshot_grammar = parse_bool(v)?,
            _ => bail!("unknown setting `{key}`"),
        }
        Ok(())
    }

    /// Reads `key = value` lines. `[section]` headers and `#` comments are
    /// skipped, so sectioned files work as long as keys are unique.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), n + 1);
            };
            self.set(k, v.trim().trim_matches('"')).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        self.base.validate()?;
        LearningConfig::new(self.base.learning.lambda, self.base.learning.enabled).map_err(anyhow::Error::msg)?;
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.base.problem == ProblemKind::BostonHousing && self.dataset.is_none() {
            bail!("problem `boston` needs --dataset PATH");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        fs::write(
            &path,
            "[run]\npopulation_size = 40 # small\nelitism = 4\n\n[learning]\nlambda = 0.2\nlearning = off\n",
        )
        .unwrap();
        let mut e = Experiment::default();
        e.load_file(&path).unwrap();
        assert_eq!(e.base.population_size, 40);
        assert_eq!(e.base.elitism_count, 4);
        assert_eq!(e.base.learning.lambda, 0.2);
        assert!(!e.base.learning.enabled);
        e.set("population", "60").unwrap();
        assert_eq!(e.base.population_size, 60);
        assert_eq!(e.base.generations, 50);
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut e = Experiment::default();
        assert!(e.set("colour", "blue").is_err());
        assert!(e.set("population", "many").is_err());
        assert!(e.set("problem", "tetris").is_err());
    }

    #[test]
    fn boston_needs_data() {
        let mut e = Experiment::default();
        e.set("problem", "boston").unwrap();
        assert!(e.check().is_err());
    }
}
