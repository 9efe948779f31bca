//! Staged on-disk execution with a per-stage manifest.
//!
//! Layout under the workdir:
//!
//! ```text
//! config.toml              canonical config echo
//! manifest.jsonl           one line per completed stage
//! graphs/                  acn.csv accn.csv vccn.csv pagerank.json
//! topics/                  model.json groups.json top_words.txt
//! features/                raw.csv transformed.csv labels.csv provenance.json
//! models/                  topic_<r>.json
//! reports/                 evaluation.{json,txt} ablation.{csv,json}
//!                          transfer.{json,txt} correlation/F<k>.csv
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{compute_features, compute_graphs, compute_topics, GraphSet, PipelineConfig, Stage, TopicSet};
use crate::corpus::{Corpus, CohortSpec};
use crate::error::{Error, Result};
use crate::eval::{
    ablation, correlation_csv, correlation_report, evaluate_with, format_reports, split, transfer_experiment,
    AblationMode, EvalData, FittedMethod, Method, MethodReport,
};
use crate::features::{FeatureGroup, FeatureMatrix, Provenance, FEATURE_COUNT, FEATURE_NAMES};
use crate::graphs::{PageRankScores, WeightedDigraph};
use crate::topics::{AuthorTopicProfile, TopicModel};
use crate::util::{format_sig, sha256_hex};
use crate::AuthorId;

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// SHA-256 of each input file, keyed by workdir-relative path (the
    /// corpus is keyed `corpus`).
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each file written, keyed by workdir-relative path.
    pub outputs: BTreeMap<String, String>,
    pub duration_ms: u64,
}

/// JSON artifact stamped with the config hash that produced it.
#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    config_hash: String,
    body: T,
}

#[derive(Serialize, Deserialize)]
struct PageRankArtifact {
    snapshot_year: i32,
    acn: PageRankScores,
    accn: PageRankScores,
    vccn: PageRankScores,
}

#[derive(Serialize, Deserialize)]
struct ModelArtifact {
    model: TopicModel,
}

#[derive(Serialize, Deserialize)]
struct GroupsArtifact {
    cohort: Vec<AuthorId>,
    profiles: Vec<AuthorTopicProfile>,
    groups: Vec<Vec<AuthorId>>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceArtifact {
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TopicModels {
    topic: usize,
    train: Vec<AuthorId>,
    iirl: FittedMethod,
    pointwise: FittedMethod,
}

#[derive(Serialize, Deserialize)]
struct EvaluationArtifact {
    methods: Vec<MethodReport>,
}

#[derive(Serialize, Deserialize)]
struct AblationArtifact {
    ablation: crate::eval::AblationTable,
}

#[derive(Serialize, Deserialize)]
struct TransferArtifact {
    transfer: crate::eval::TransferReport,
}

pub(super) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub(super) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

fn file_sha(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Read every manifest line; a missing file reads as empty.
pub fn read_manifest(workdir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = workdir.join(MANIFEST);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_text(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn write_manifest(workdir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    write_bytes(&workdir.join(MANIFEST), out.as_bytes())
}

fn stage_rank(name: &str) -> usize {
    Stage::ALL.iter().position(|s| s.name() == name).unwrap_or(usize::MAX)
}

/// Collects the files a stage writes so they land in its manifest line.
struct Outputs<'a> {
    workdir: &'a Path,
    files: BTreeMap<String, String>,
}

impl<'a> Outputs<'a> {
    fn new(workdir: &'a Path) -> Self {
        Outputs {
            workdir,
            files: BTreeMap::new(),
        }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_bytes(&self.workdir.join(rel), bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, hash: &str, body: T) -> Result<()> {
        let text = to_json(&Stamped {
            config_hash: hash.to_string(),
            body,
        })?;
        self.write(rel, text.as_bytes())
    }
}

struct Runner<'a> {
    config: &'a PipelineConfig,
    corpus: Corpus,
    corpus_sha: String,
    hash: String,
    workdir: PathBuf,
    manifest: Vec<ManifestEntry>,
}

impl Runner<'_> {
    fn cohort(&self) -> &CohortSpec {
        &self.config.cohort
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.workdir.join(rel)
    }

    /// Confirm `stage` completed under the current config and its files
    /// are intact.
    fn require(&self, stage: Stage) -> Result<()> {
        let primary = self.path(primary_artifact(stage));
        let Some(entry) = self.manifest.iter().find(|e| e.stage == stage.name()) else {
            return Err(Error::MissingArtifact {
                stage: stage.name(),
                path: primary,
            });
        };
        if entry.config_hash != self.hash {
            return Err(Error::StaleArtifact {
                stage: stage.name(),
                found: entry.config_hash.clone(),
                expected: self.hash.clone(),
            });
        }
        for (rel, sha) in &entry.outputs {
            let path = self.path(rel);
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    stage: stage.name(),
                    path,
                });
            }
            let found = file_sha(&path)?;
            if &found != sha {
                return Err(Error::StaleArtifact {
                    stage: stage.name(),
                    found,
                    expected: sha.clone(),
                });
            }
        }
        Ok(())
    }

    fn inputs_of(&self, stage: Stage) -> BTreeMap<String, String> {
        let mut inputs = BTreeMap::new();
        if matches!(stage, Stage::Graphs | Stage::Topics | Stage::Features) {
            inputs.insert("corpus".to_string(), self.corpus_sha.clone());
        }
        for pre in stage.prerequisites() {
            if let Some(e) = self.manifest.iter().find(|e| e.stage == pre.name()) {
                inputs.extend(e.outputs.clone());
            }
        }
        inputs
    }

    fn seed_of(&self, stage: Stage) -> Option<u64> {
        match stage {
            Stage::Graphs | Stage::Features | Stage::Correlate => None,
            Stage::Topics => Some(self.config.topics.seed),
            Stage::Train => Some(self.config.train.seed),
            Stage::Evaluate | Stage::Ablate | Stage::Transfer => Some(self.config.eval.seed),
        }
    }

    fn check_stamp(&self, stage: Stage, found: &str) -> Result<()> {
        if found != self.hash {
            return Err(Error::StaleArtifact {
                stage: stage.name(),
                found: found.to_string(),
                expected: self.hash.clone(),
            });
        }
        Ok(())
    }

    fn load<T: DeserializeOwned>(&self, stage: Stage, rel: &str) -> Result<T> {
        let stamped: Stamped<T> = read_json(&self.path(rel))?;
        self.check_stamp(stage, &stamped.config_hash)?;
        Ok(stamped.body)
    }

    fn run_stage(&mut self, stage: Stage) -> Result<()> {
        for &pre in stage.prerequisites() {
            self.require(pre)?;
        }
        log::info!("stage {stage}: start");
        let started = Instant::now();
        let inputs = self.inputs_of(stage);
        let outputs = match stage {
            Stage::Graphs => self.graphs(),
            Stage::Topics => self.topics(),
            Stage::Features => self.features(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate(),
            Stage::Ablate => self.ablate(),
            Stage::Transfer => self.transfer(),
            Stage::Correlate => self.correlate(),
        }?;
        let entry = ManifestEntry {
            stage: stage.name().to_string(),
            config_hash: self.hash.clone(),
            seed: self.seed_of(stage),
            inputs,
            outputs,
            duration_ms: started.elapsed().as_millis() as u64,
        };
        log::info!("stage {stage}: done in {} ms", entry.duration_ms);
        self.manifest.retain(|e| e.stage != entry.stage);
        self.manifest.push(entry);
        self.manifest.sort_by_key(|e| stage_rank(&e.stage));
        write_manifest(&self.workdir, &self.manifest)
    }

    fn graphs(&self) -> Result<BTreeMap<String, String>> {
        let g = compute_graphs(&self.corpus, self.cohort().t, &self.config.pagerank)?;
        let mut out = Outputs::new(&self.workdir);
        for (name, graph) in [("acn", &g.acn), ("accn", &g.accn), ("vccn", &g.vccn)] {
            let mut buf = Vec::new();
            graph.write_edge_csv(&mut buf).expect("write to memory");
            out.write(&format!("graphs/{name}.csv"), &buf)?;
        }
        out.json(
            "graphs/pagerank.json",
            &self.hash,
            PageRankArtifact {
                snapshot_year: self.cohort().t,
                acn: g.pr_acn,
                accn: g.pr_accn,
                vccn: g.pr_vccn,
            },
        )?;
        Ok(out.files)
    }

    fn load_graphs(&self) -> Result<GraphSet> {
        let pr: PageRankArtifact = self.load(Stage::Graphs, "graphs/pagerank.json")?;
        let read = |name: &str, directed: bool| -> Result<WeightedDigraph> {
            let path = self.path(&format!("graphs/{name}.csv"));
            let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            WeightedDigraph::read_edge_csv(BufReader::new(f), directed)
        };
        Ok(GraphSet {
            acn: read("acn", false)?,
            accn: read("accn", true)?,
            vccn: read("vccn", true)?,
            pr_acn: pr.acn,
            pr_accn: pr.accn,
            pr_vccn: pr.vccn,
        })
    }

    fn topics(&self) -> Result<BTreeMap<String, String>> {
        let t = compute_topics(&self.corpus, self.cohort(), &self.config.topics)?;
        let mut out = Outputs::new(&self.workdir);
        out.write("topics/top_words.txt", t.model.top_words_table(10).as_bytes())?;
        out.json("topics/model.json", &self.hash, ModelArtifact { model: t.model })?;
        out.json(
            "topics/groups.json",
            &self.hash,
            GroupsArtifact {
                cohort: t.cohort.into_iter().collect(),
                profiles: t.profiles,
                groups: t.groups.into_iter().map(|g| g.into_iter().collect()).collect(),
            },
        )?;
        Ok(out.files)
    }

    fn load_groups(&self) -> Result<GroupsArtifact> {
        self.load(Stage::Topics, "topics/groups.json")
    }

    fn load_topics(&self) -> Result<TopicSet> {
        let ModelArtifact { model } = self.load(Stage::Topics, "topics/model.json")?;
        let g = self.load_groups()?;
        Ok(TopicSet {
            cohort: g.cohort.into_iter().collect(),
            model,
            profiles: g.profiles,
            groups: g.groups.into_iter().map(|g| g.into_iter().collect()).collect(),
        })
    }

    fn features(&self) -> Result<BTreeMap<String, String>> {
        let graphs = self.load_graphs()?;
        let topics = self.load_topics()?;
        let mut f = compute_features(&self.corpus, self.cohort(), &graphs, &topics)?;
        let mut hashes = BTreeMap::new();
        hashes.insert("config".to_string(), self.hash.clone());
        hashes.insert("corpus".to_string(), self.corpus_sha.clone());
        hashes.insert("graphs".to_string(), file_sha(&self.path("graphs/pagerank.json"))?);
        hashes.insert("topics".to_string(), file_sha(&self.path("topics/model.json"))?);
        let provenance = Provenance {
            snapshot_year: self.cohort().t,
            hashes,
        };
        f.raw.provenance = provenance.clone();
        f.transformed.provenance = provenance.clone();

        let mut out = Outputs::new(&self.workdir);
        for (name, m) in [("raw", &f.raw), ("transformed", &f.transformed)] {
            let mut buf = Vec::new();
            m.write_csv(&mut buf).expect("write to memory");
            out.write(&format!("features/{name}.csv"), &buf)?;
        }
        let mut labels = String::from("author_id,increment\n");
        for (a, s) in &f.labels {
            labels.push_str(&format!("{a},{s}\n"));
        }
        out.write("features/labels.csv", labels.as_bytes())?;
        out.json("features/provenance.json", &self.hash, ProvenanceArtifact { provenance })?;
        Ok(out.files)
    }

    fn load_eval_data(&self) -> Result<EvalData> {
        let ProvenanceArtifact { provenance } = self.load(Stage::Features, "features/provenance.json")?;
        let read = |name: &str| -> Result<FeatureMatrix> {
            let path = self.path(&format!("features/{name}.csv"));
            let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            FeatureMatrix::read_csv(BufReader::new(f), provenance.clone())
        };
        let raw = read("raw")?;
        let transformed = read("transformed")?;
        let path = self.path("features/labels.csv");
        let mut labels = HashMap::new();
        for (i, line) in read_text(&path)?.lines().enumerate().skip(1) {
            let bad = |message: String| Error::MalformedLine { line: i + 1, message };
            let (a, s) = line.split_once(',').ok_or_else(|| bad("expected 2 fields".into()))?;
            let a: AuthorId = a.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
            let s: u64 = s.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
            labels.insert(a, s as f64);
        }
        EvalData::new(&raw, &transformed, &labels)
    }

    fn groups(&self) -> Result<Vec<BTreeSet<AuthorId>>> {
        Ok(self
            .load_groups()?
            .groups
            .into_iter()
            .map(|g| g.into_iter().collect())
            .collect())
    }

    fn train(&self) -> Result<BTreeMap<String, String>> {
        let data = self.load_eval_data()?;
        let groups = self.groups()?;
        let settings = self.config.eval_settings();
        let mut out = Outputs::new(&self.workdir);
        for r in crate::eval::evaluable_topics(&groups) {
            let members: Vec<AuthorId> = groups[r].iter().copied().collect();
            let (train, _) = split(&members, &settings.split_spec(r))?;
            let iirl = FittedMethod::fit(Method::Iirl, &data, &train, &settings, r)?;
            let pointwise = FittedMethod::fit(Method::Pointwise, &data, &train, &settings, r)?;
            if let FittedMethod::Iirl { model, .. } = &iirl {
                log::info!(
                    "topic {r}: {} epochs, objective {} -> {}",
                    model.epochs,
                    format_sig(model.initial_objective, 6),
                    format_sig(model.objective, 6)
                );
            }
            out.json(
                &model_path(r),
                &self.hash,
                TopicModels {
                    topic: r,
                    train,
                    iirl,
                    pointwise,
                },
            )?;
        }
        Ok(out.files)
    }

    fn evaluate(&self) -> Result<BTreeMap<String, String>> {
        let data = self.load_eval_data()?;
        let groups = self.groups()?;
        let settings = self.config.eval_settings();
        let mut methods = Vec::new();
        for method in Method::COMPARED {
            let report = evaluate_with(method, &groups, &data, &settings, |r, train| match method {
                Method::Iirl | Method::Pointwise => {
                    let rel = model_path(r);
                    if !self.path(&rel).exists() {
                        return Err(Error::MissingArtifact {
                            stage: Stage::Train.name(),
                            path: self.path(&rel),
                        });
                    }
                    let saved: TopicModels = self.load(Stage::Train, &rel)?;
                    if saved.train != train {
                        return Err(Error::StaleArtifact {
                            stage: Stage::Train.name(),
                            found: format!("split of topic {r} in {rel}"),
                            expected: "current split".into(),
                        });
                    }
                    Ok(if method == Method::Iirl {
                        saved.iirl
                    } else {
                        saved.pointwise
                    })
                }
                _ => FittedMethod::fit(method, &data, train, &settings, r),
            })?;
            methods.push(report);
        }
        let mut out = Outputs::new(&self.workdir);
        out.write("reports/evaluation.txt", format_reports(&methods).as_bytes())?;
        out.json("reports/evaluation.json", &self.hash, EvaluationArtifact { methods })?;
        Ok(out.files)
    }

    fn ablate(&self) -> Result<BTreeMap<String, String>> {
        let data = self.load_eval_data()?;
        let groups = self.groups()?;
        let table = ablation(
            &FeatureGroup::ALL,
            &[AblationMode::Keep, AblationMode::Drop],
            &groups,
            &data,
            &self.config.eval_settings(),
        )?;
        let mut out = Outputs::new(&self.workdir);
        out.write("reports/ablation.csv", table.to_csv().as_bytes())?;
        out.json("reports/ablation.json", &self.hash, AblationArtifact { ablation: table })?;
        Ok(out.files)
    }

    fn transfer(&self) -> Result<BTreeMap<String, String>> {
        let data = self.load_eval_data()?;
        let groups = self.groups()?;
        let report = transfer_experiment(&groups, self.config.eval.r_hat, &data, &self.config.eval_settings())?;
        let mut out = Outputs::new(&self.workdir);
        out.write("reports/transfer.txt", super::report::format_transfer(&report).as_bytes())?;
        out.json("reports/transfer.json", &self.hash, TransferArtifact { transfer: report })?;
        Ok(out.files)
    }

    fn correlate(&self) -> Result<BTreeMap<String, String>> {
        let data = self.load_eval_data()?;
        let mut out = Outputs::new(&self.workdir);
        for k in 0..FEATURE_COUNT {
            let column: Vec<f64> = data.raw.iter().map(|r| r[k]).collect();
            let rows = correlation_report(&column, &data.labels, self.config.eval.min_group)?;
            out.write(
                &format!("reports/correlation/{}.csv", FEATURE_NAMES[k]),
                correlation_csv(&rows).as_bytes(),
            )?;
        }
        Ok(out.files)
    }
}

fn model_path(topic: usize) -> String {
    format!("models/topic_{topic}.json")
}

fn primary_artifact(stage: Stage) -> &'static str {
    match stage {
        Stage::Graphs => "graphs/pagerank.json",
        Stage::Topics => "topics/groups.json",
        Stage::Features => "features/raw.csv",
        Stage::Train => "models",
        Stage::Evaluate => "reports/evaluation.json",
        Stage::Ablate => "reports/ablation.json",
        Stage::Transfer => "reports/transfer.json",
        Stage::Correlate => "reports/correlation",
    }
}

pub(super) fn load_evaluation(workdir: &Path) -> Result<(String, Vec<MethodReport>)> {
    let s: Stamped<EvaluationArtifact> = read_json(&workdir.join("reports/evaluation.json"))?;
    Ok((s.config_hash, s.body.methods))
}

pub(super) fn load_ablation(workdir: &Path) -> Result<Option<crate::eval::AblationTable>> {
    let path = workdir.join("reports/ablation.json");
    if !path.exists() {
        return Ok(None);
    }
    let s: Stamped<AblationArtifact> = read_json(&path)?;
    Ok(Some(s.body.ablation))
}

pub(super) fn load_transfer(workdir: &Path) -> Result<Option<crate::eval::TransferReport>> {
    let path = workdir.join("reports/transfer.json");
    if !path.exists() {
        return Ok(None);
    }
    let s: Stamped<TransferArtifact> = read_json(&path)?;
    Ok(Some(s.body.transfer))
}

/// Run `stages` (in pipeline order) against `config`, writing artifacts
/// under `config.paths.workdir`. Returns the manifest lines written.
pub fn run_pipeline(config: &PipelineConfig, stages: &[Stage]) -> Result<Vec<ManifestEntry>> {
    let corpus_path = &config.paths.corpus;
    let bytes = fs::read(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    let corpus_sha = sha256_hex(&bytes);
    let corpus = Corpus::from_reader(bytes.as_slice())?;
    let workdir = config.paths.workdir.clone();
    fs::create_dir_all(&workdir).map_err(|e| Error::io(&workdir, e))?;
    let hash = config.hash(&corpus_sha);
    let mut echo = fs::File::create(workdir.join("config.toml")).map_err(|e| Error::io(&workdir, e))?;
    write!(echo, "# config_hash = \"{hash}\"\n{}", config.canonical_toml()).map_err(|e| Error::io(&workdir, e))?;

    let mut runner = Runner {
        config,
        corpus,
        corpus_sha,
        hash,
        manifest: read_manifest(&workdir)?,
        workdir,
    };
    let ordered: BTreeSet<Stage> = stages.iter().copied().collect();
    for &stage in &ordered {
        runner.run_stage(stage)?;
    }
    Ok(runner
        .manifest
        .into_iter()
        .filter(|e| ordered.iter().any(|s| s.name() == e.stage))
        .collect())
}
