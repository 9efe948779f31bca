//! Pipeline configuration: a TOML file with one table per stage family.
//!
//! Every key is optional. Unknown keys and mistyped values are rejected
//! before deserialisation so errors name the offending key. Environment
//! variables `RSTARS_<SECTION>__<KEY>` override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::corpus::CohortSpec;
use crate::error::{Error, Result};
use crate::eval::EvalSettings;
use crate::graphs::PageRankConfig;
use crate::ranker::TrainConfig;
use crate::synth::SynthConfig;
use crate::topics::LdaConfig;
use crate::util::sha256_hex;

pub const ENV_PREFIX: &str = "RSTARS_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub workdir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            workdir: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    /// Number of topics R.
    pub r: usize,
    /// Groups joined per author.
    pub m: usize,
    /// Defaults to `50 / r`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_lda: Option<f64>,
    pub beta_lda: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Minimum document frequency of a vocabulary word.
    pub min_df: usize,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        TopicsConfig {
            r: 10,
            m: 3,
            alpha_lda: None,
            beta_lda: 0.01,
            iterations: 200,
            seed: 0,
            min_df: 2,
        }
    }
}

impl TopicsConfig {
    pub fn lda(&self) -> LdaConfig {
        let mut cfg = LdaConfig::with_topics(self.r, self.seed);
        if let Some(a) = self.alpha_lda {
            cfg.alpha = a;
        }
        cfg.beta = self.beta_lda;
        cfg.iterations = self.iterations;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub alpha: f64,
    pub lambda_w: f64,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub pair_cap: usize,
    pub seed: u64,
    /// Ridge penalty of the pointwise baseline.
    pub ridge: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            alpha: t.alpha,
            lambda_w: t.lambda_w,
            max_epochs: t.max_epochs,
            rel_tol: t.rel_tol,
            pair_cap: t.pair_cap,
            seed: t.seed,
            ridge: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Pre@k% cut-offs, in percent.
    pub k: Vec<f64>,
    pub split_ratio: f64,
    pub seed: u64,
    /// Topic whose model is transferred to the others.
    pub r_hat: usize,
    /// Correlation buckets need more than this many authors.
    pub min_group: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: vec![10.0, 20.0],
            split_ratio: 0.5,
            seed: 0,
            r_hat: 1,
            min_group: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub cohort: CohortSpec,
    pub topics: TopicsConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub pagerank: PageRankConfig,
    /// Generator settings used by the `synth` command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

#[derive(Clone, Copy)]
enum Kind {
    Int,
    UInt,
    Float,
    Str,
    FloatList,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "integer",
            Kind::UInt => "non-negative integer",
            Kind::Float => "float",
            Kind::Str => "string",
            Kind::FloatList => "array of numbers",
        }
    }
}

fn schema(section: &str) -> Option<&'static [(&'static str, Kind)]> {
    use Kind::*;
    Some(match section {
        "paths" => &[("corpus", Str), ("workdir", Str)],
        "cohort" => &[("t", Int), ("t_1st", Int), ("delta_t", Int)],
        "topics" => &[
            ("r", UInt),
            ("m", UInt),
            ("alpha_lda", Float),
            ("beta_lda", Float),
            ("iterations", UInt),
            ("seed", UInt),
            ("min_df", UInt),
        ],
        "train" => &[
            ("alpha", Float),
            ("lambda_w", Float),
            ("max_epochs", UInt),
            ("rel_tol", Float),
            ("pair_cap", UInt),
            ("seed", UInt),
            ("ridge", Float),
        ],
        "eval" => &[
            ("k", FloatList),
            ("split_ratio", Float),
            ("seed", UInt),
            ("r_hat", UInt),
            ("min_group", UInt),
        ],
        "pagerank" => &[("damping", Float), ("tol", Float), ("max_iter", UInt)],
        "synth" => &[
            ("n_authors", UInt),
            ("n_venues", UInt),
            ("start_year", Int),
            ("end_year", Int),
            ("cohort_year", Int),
            ("cohort_fraction", Float),
            ("paper_rate", Float),
            ("refs_per_paper", UInt),
            ("coauthors_mean", Float),
            ("pa_exponent", Float),
            ("topics", UInt),
            ("vocab_size", UInt),
            ("title_words", UInt),
            ("abstract_words", UInt),
            ("signal_strength", Float),
            ("seed", UInt),
        ],
        _ => return None,
    })
}

/// Check a value against its declared kind, widening integers to floats.
fn check_value(key: &str, kind: Kind, value: &mut Value) -> Result<()> {
    let bad = || Error::KeyType {
        key: key.to_string(),
        expected: kind.name(),
    };
    match (kind, &*value) {
        (Kind::Int, Value::Integer(_)) => {}
        (Kind::UInt, Value::Integer(i)) if *i >= 0 => {}
        (Kind::Float, Value::Float(_)) | (Kind::Str, Value::String(_)) => {}
        (Kind::Float, Value::Integer(i)) => *value = Value::Float(*i as f64),
        (Kind::FloatList, Value::Array(items)) => {
            let widened = items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(Value::Float(*f)),
                    Value::Integer(i) => Ok(Value::Float(*i as f64)),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>>>()?;
            *value = Value::Array(widened);
        }
        _ => return Err(bad()),
    }
    Ok(())
}

fn validate_table(table: &mut Table) -> Result<()> {
    for (section, body) in table.iter_mut() {
        let fields = schema(section).ok_or_else(|| Error::UnknownKey(section.clone()))?;
        let Value::Table(body) = body else {
            return Err(Error::KeyType {
                key: section.clone(),
                expected: "table",
            });
        };
        for (key, value) in body.iter_mut() {
            let full = format!("{section}.{key}");
            let (_, kind) = fields
                .iter()
                .find(|(name, _)| name == key)
                .ok_or_else(|| Error::UnknownKey(full.clone()))?;
            check_value(&full, *kind, value)?;
        }
    }
    Ok(())
}

/// Parse an environment value as a TOML literal, falling back to a bare
/// string.
fn env_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Apply `RSTARS_SECTION__KEY=value` overrides.
fn apply_env(table: &mut Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some((section, key)) = rest.split_once("__") else {
            return Err(Error::UnknownKey(name));
        };
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        match entry {
            Value::Table(t) => {
                t.insert(key.to_string(), env_value(&raw));
            }
            _ => {
                return Err(Error::KeyType {
                    key: section.to_string(),
                    expected: "table",
                })
            }
        }
    }
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    /// Parse TOML text with environment overrides. Relative paths resolve
    /// against `base_dir`.
    pub fn parse(
        text: &str,
        base_dir: &Path,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut table: Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        apply_env(&mut table, env)?;
        validate_table(&mut table)?;
        let mut config: PipelineConfig =
            Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.paths.corpus = resolve(base_dir, &config.paths.corpus);
        config.paths.workdir = resolve(base_dir, &config.paths.workdir);
        config.validate()?;
        Ok(config)
    }

    /// Read `path`, applying overrides from the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort.validate()?;
        if self.topics.r < 2 || self.topics.m == 0 || self.topics.m > self.topics.r {
            return Err(Error::InvalidParameter("need r >= 2 and 1 <= m <= r".into()));
        }
        self.train_config().validate()?;
        if !(self.train.ridge >= 0.0) {
            return Err(Error::InvalidParameter("ridge must be >= 0".into()));
        }
        if self.eval.k.is_empty() || self.eval.k.iter().any(|k| !(*k > 0.0 && *k <= 100.0)) {
            return Err(Error::InvalidParameter("eval.k needs values in (0, 100]".into()));
        }
        if !(self.eval.split_ratio > 0.0 && self.eval.split_ratio < 1.0) {
            return Err(Error::InvalidParameter("split_ratio must lie in (0, 1)".into()));
        }
        if self.eval.r_hat >= self.topics.r {
            return Err(Error::InvalidParameter(format!(
                "r_hat {} out of range for {} topics",
                self.eval.r_hat, self.topics.r
            )));
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    /// Replace every seed (topics, training, evaluation, generator).
    pub fn override_seed(&mut self, seed: u64) {
        self.topics.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
        if let Some(s) = &mut self.synth {
            s.seed = seed;
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.train.alpha,
            lambda_w: self.train.lambda_w,
            max_epochs: self.train.max_epochs,
            rel_tol: self.train.rel_tol,
            pair_cap: self.train.pair_cap,
            seed: self.train.seed,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            split_ratio: self.eval.split_ratio,
            seed: self.eval.seed,
            ks: self.eval.k.clone(),
            train: self.train_config(),
            ridge: self.train.ridge,
            ..EvalSettings::default()
        }
    }

    /// TOML of everything except `[paths]`, which varies between machines.
    pub fn canonical_toml(&self) -> String {
        let mut echo = self.clone();
        echo.paths = PathsConfig::default();
        let mut table = Table::try_from(&echo).expect("config serialises");
        table.remove("paths");
        toml::to_string(&table).expect("config serialises")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hash of the canonical config and the corpus contents.
    pub fn hash(&self, corpus_sha: &str) -> String {
        sha256_hex(format!("{}\ncorpus={corpus_sha}\n", self.canonical_toml()).as_bytes())
    }
}
