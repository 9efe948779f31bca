//! End-to-end orchestration: in-memory stage computations and the staged
//! on-disk runner used by the command-line driver.

mod config;
mod report;
mod runner;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

pub use config::{EvalSection, PathsConfig, PipelineConfig, TopicsConfig, TrainSection, ENV_PREFIX};
pub use report::{report, Summary};
pub use runner::{read_manifest, run_pipeline, ManifestEntry, MANIFEST};

use crate::corpus::{identify_cohort, increment_labels, CohortSpec, Corpus};
use crate::error::{Error, Result};
use crate::eval::EvalData;
use crate::features::{log_transform, FeatureContext, FeatureMatrix};
use crate::graphs::{build_acn, build_accn, build_vccn, pagerank, PageRankConfig, PageRankScores, WeightedDigraph};
use crate::topics::{
    author_topic_profile, divide_researchers, fit_lda, tokenize, AuthorTopicProfile, Document, TopicModel,
    Vocabulary,
};
use crate::AuthorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Graphs,
    Topics,
    Features,
    Train,
    Evaluate,
    Ablate,
    Transfer,
    Correlate,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 8] = [
        Stage::Graphs,
        Stage::Topics,
        Stage::Features,
        Stage::Train,
        Stage::Evaluate,
        Stage::Ablate,
        Stage::Transfer,
        Stage::Correlate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Graphs => "graphs",
            Stage::Topics => "topics",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
            Stage::Transfer => "transfer",
            Stage::Correlate => "correlate",
        }
    }

    /// Stages whose artifacts must exist first, in the order checked.
    pub fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Graphs | Stage::Topics => &[],
            Stage::Features => &[Stage::Graphs, Stage::Topics],
            Stage::Train => &[Stage::Features, Stage::Topics],
            Stage::Evaluate => &[Stage::Features, Stage::Train, Stage::Topics],
            Stage::Ablate | Stage::Transfer => &[Stage::Features, Stage::Topics],
            Stage::Correlate => &[Stage::Features],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownStage(s.to_string()))
    }
}

/// Parse a comma-separated stage list (or `all`) into execution order.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(Stage::ALL.to_vec());
    }
    let set: BTreeSet<Stage> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if set.is_empty() {
        return Err(Error::UnknownStage(list.to_string()));
    }
    Ok(set.into_iter().collect())
}

/// The three networks of the snapshot before `t` and their PageRank.
#[derive(Debug, Clone)]
pub struct GraphSet {
    pub acn: WeightedDigraph,
    pub accn: WeightedDigraph,
    pub vccn: WeightedDigraph,
    pub pr_acn: PageRankScores,
    pub pr_accn: PageRankScores,
    pub pr_vccn: PageRankScores,
}

pub fn compute_graphs(corpus: &Corpus, t: i32, config: &PageRankConfig) -> Result<GraphSet> {
    let snap = corpus.snapshot(t);
    let acn = build_acn(&snap);
    let accn = build_accn(&snap);
    let vccn = build_vccn(&snap);
    let pr_acn = pagerank(&acn, config)?;
    let pr_accn = pagerank(&accn, config)?;
    let pr_vccn = pagerank(&vccn, config)?;
    for (name, pr) in [("ACN", &pr_acn), ("ACCN", &pr_accn), ("VCCN", &pr_vccn)] {
        if !pr.converged {
            log::warn!("{name} PageRank did not converge in {} iterations", pr.iterations);
        }
    }
    Ok(GraphSet {
        acn,
        accn,
        vccn,
        pr_acn,
        pr_accn,
        pr_vccn,
    })
}

/// Cohort, topic model over the cohort's papers before `t`, and the
/// resulting topic groups.
#[derive(Debug, Clone)]
pub struct TopicSet {
    pub cohort: BTreeSet<AuthorId>,
    pub model: TopicModel,
    pub profiles: Vec<AuthorTopicProfile>,
    pub groups: Vec<BTreeSet<AuthorId>>,
}

pub fn compute_topics(corpus: &Corpus, cohort_spec: &CohortSpec, config: &TopicsConfig) -> Result<TopicSet> {
    let cohort = identify_cohort(corpus, cohort_spec.t_1st);
    if cohort.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no authors with a first first-author paper in {}",
            cohort_spec.t_1st
        )));
    }
    let snap = corpus.snapshot(cohort_spec.t);
    let paper_idx: BTreeSet<usize> = cohort
        .iter()
        .flat_map(|&a| snap.author_papers(a).iter().copied())
        .collect();
    let tokens: Vec<Vec<String>> = paper_idx
        .iter()
        .map(|&i| {
            let p = corpus.paper(i);
            tokenize(&p.title, &p.abstract_text)
        })
        .collect();
    let vocabulary = Vocabulary::build(&tokens, config.min_df);
    let documents: Vec<Document> = paper_idx
        .iter()
        .zip(&tokens)
        .map(|(&i, toks)| Document {
            paper_id: corpus.paper(i).id,
            tokens: vocabulary.encode(toks),
        })
        .collect();
    let model = fit_lda(&documents, &vocabulary, &config.lda())?;
    let profiles = cohort
        .iter()
        .map(|&a| {
            let papers: Vec<_> = snap.author_papers(a).iter().map(|&i| corpus.paper(i).id).collect();
            author_topic_profile(&model, a, &papers, config.m)
        })
        .collect::<Result<Vec<_>>>()?;
    let groups = divide_researchers(&profiles, config.r, config.m);
    Ok(TopicSet {
        cohort,
        model,
        profiles,
        groups,
    })
}

/// Raw and log-transformed cohort features with their increment labels.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub raw: FeatureMatrix,
    pub transformed: FeatureMatrix,
    pub labels: BTreeMap<AuthorId, u64>,
}

impl FeatureSet {
    pub fn eval_data(&self) -> Result<EvalData> {
        let labels: HashMap<AuthorId, f64> = self.labels.iter().map(|(&a, &s)| (a, s as f64)).collect();
        EvalData::new(&self.raw, &self.transformed, &labels)
    }
}

pub fn compute_features(
    corpus: &Corpus,
    cohort_spec: &CohortSpec,
    graphs: &GraphSet,
    topics: &TopicSet,
) -> Result<FeatureSet> {
    let ctx = FeatureContext {
        corpus,
        t: cohort_spec.t,
        acn: &graphs.acn,
        pr_acn: &graphs.pr_acn,
        pr_accn: &graphs.pr_accn,
        pr_vccn: &graphs.pr_vccn,
        model: &topics.model,
    };
    let raw = ctx.extract(&topics.cohort)?;
    let transformed = log_transform(raw.clone())?;
    let labels = increment_labels(corpus, &topics.cohort, cohort_spec.t, cohort_spec.delta_t);
    Ok(FeatureSet {
        raw,
        transformed,
        labels,
    })
}

/// Graphs, topics and features in one call.
pub fn compute_all(corpus: &Corpus, config: &PipelineConfig) -> Result<(GraphSet, TopicSet, FeatureSet)> {
    let graphs = compute_graphs(corpus, config.cohort.t, &config.pagerank)?;
    let topics = compute_topics(corpus, &config.cohort, &config.topics)?;
    let features = compute_features(corpus, &config.cohort, &graphs, &topics)?;
    Ok((graphs, topics, features))
}
