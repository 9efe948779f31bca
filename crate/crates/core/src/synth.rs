//! Synthetic publication corpora with a planted author-fitness signal.
//!
//! Every author draws a latent fitness from `lognormal(0, 1)` and a latent
//! topic. With signal strength `beta`, fitness raises both the author's
//! yearly paper rate and the attractiveness of their papers:
//!
//! ```text
//! rate(a)    = paper_rate * fitness^beta * exp(-beta^2 / 2)
//! weight(q)  = (indegree(q) + 1)^exponent * fitness(first_author(q))^beta
//! ```
//!
//! Citations are drawn by preferential attachment on `weight` from papers
//! of strictly earlier years, so the citation graph is a DAG. A fraction of
//! authors is forced to publish their first first-author paper in
//! `cohort_year` and is inactive before it; all other authors publish a
//! first-author paper in their (non-cohort) start year.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::corpus::PaperRecord;
use crate::error::{Error, Result};
use crate::topics::is_stopword;
use crate::util::sha256_hex;
use crate::{AuthorId, VenueId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_authors: usize,
    pub n_venues: usize,
    pub start_year: i32,
    pub end_year: i32,
    pub cohort_year: i32,
    /// Share of authors forced into the young cohort.
    pub cohort_fraction: f64,
    /// Mean first-author papers per author-year at average fitness.
    pub paper_rate: f64,
    pub refs_per_paper: usize,
    /// Mean number of co-authors added to each paper.
    pub coauthors_mean: f64,
    pub pa_exponent: f64,
    pub topics: usize,
    pub vocab_size: usize,
    pub title_words: usize,
    pub abstract_words: usize,
    pub signal_strength: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_authors: 2000,
            n_venues: 40,
            start_year: 1998,
            end_year: 2012,
            cohort_year: 2006,
            cohort_fraction: 0.5,
            paper_rate: 0.8,
            refs_per_paper: 8,
            coauthors_mean: 1.5,
            pa_exponent: 1.0,
            topics: 10,
            vocab_size: 600,
            title_words: 6,
            abstract_words: 40,
            signal_strength: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_authors == 0 || self.n_venues == 0 || self.topics == 0 || self.refs_per_paper == 0 {
            return bad("author, venue, topic and reference counts must be >= 1");
        }
        if self.vocab_size < 2 * self.topics || self.title_words + self.abstract_words == 0 {
            return bad("vocabulary must hold at least two words per topic and papers need text");
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad("signal_strength must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.cohort_fraction) {
            return bad("cohort_fraction must lie in [0, 1]");
        }
        if !(self.start_year < self.cohort_year && self.cohort_year <= self.end_year) {
            return bad("need start_year < cohort_year <= end_year");
        }
        if !(self.paper_rate > 0.0) || !(self.coauthors_mean >= 0.0) || !(self.pa_exponent >= 0.0) {
            return bad("rates must be positive and exponent non-negative");
        }
        Ok(())
    }
}

/// Latent ground truth of one author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub author_id: AuthorId,
    pub fitness: f64,
    pub topic: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub papers: Vec<PaperRecord>,
    pub truth: Vec<TruthRow>,
    /// Corpus serialised in the JSON-lines ingestion format.
    pub jsonl: String,
    /// SHA-256 of `jsonl`.
    pub hash: String,
}

impl SynthOutput {
    pub fn truth_csv(&self) -> String {
        truth_csv(&self.truth)
    }

    /// Write the corpus file and, when given, `truth.csv`.
    pub fn write(&self, corpus_path: &Path, truth_path: Option<&Path>) -> Result<()> {
        write_file(corpus_path, self.jsonl.as_bytes())?;
        if let Some(p) = truth_path {
            write_file(p, self.truth_csv().as_bytes())?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// `author_id,fitness,topic`.
pub fn truth_csv(rows: &[TruthRow]) -> String {
    let mut out = String::from("author_id,fitness,topic\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.author_id, r.fitness, r.topic);
    }
    out
}

/// Fenwick tree over non-negative weights supporting weighted sampling.
struct WeightTree {
    tree: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightTree {
    fn with_capacity(n: usize) -> Self {
        WeightTree {
            tree: vec![0.0; n + 1],
            weights: vec![0.0; n],
        }
    }

    fn set(&mut self, i: usize, w: f64) {
        let delta = w - self.weights[i];
        self.weights[i] = w;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn total(&self, len: usize) -> f64 {
        let mut j = len;
        let mut s = 0.0;
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `u`.
    fn find(&self, mut u: f64, len: usize) -> usize {
        let mut pos = 0;
        let mut step = self.tree.len().next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(len - 1)
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vi", "so", "de", "pa", "gu", "be", "zo", "fi", "ho", "ly",
];

/// Deterministic pronounceable word for index `i`; at least three syllables.
fn synth_word(i: usize) -> String {
    let mut word = String::new();
    let mut x = i;
    for _ in 0..3 {
        word.push_str(SYLLABLES[x % SYLLABLES.len()]);
        x /= SYLLABLES.len();
    }
    while x > 0 {
        word.push_str(SYLLABLES[x % SYLLABLES.len()]);
        x /= SYLLABLES.len();
    }
    debug_assert!(!is_stopword(&word));
    word
}

struct Author {
    id: AuthorId,
    fitness: f64,
    topic: usize,
    start: i32,
    /// Pre-multiplied yearly first-author rate.
    rate: f64,
}

/// Generate a corpus; deterministic under `config.seed`.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let beta = config.signal_strength;
    let lognormal = LogNormal::new(0.0, 1.0).expect("valid lognormal");

    let established_years: Vec<i32> = (config.start_year..=config.end_year)
        .filter(|&y| y != config.cohort_year)
        .collect();
    let n_cohort = (config.cohort_fraction * config.n_authors as f64).round() as usize;
    let mut cohort_flags: Vec<bool> = (0..config.n_authors).map(|i| i < n_cohort).collect();
    cohort_flags.shuffle(&mut rng);
    let norm = (-beta * beta / 2.0).exp();
    let authors: Vec<Author> = cohort_flags
        .iter()
        .enumerate()
        .map(|(i, &cohort)| {
            let fitness = lognormal.sample(&mut rng);
            let topic = rng.gen_range(0..config.topics);
            let start = if cohort {
                config.cohort_year
            } else {
                *established_years.choose(&mut rng).expect("non-empty year range")
            };
            Author {
                id: i as AuthorId + 1,
                fitness,
                topic,
                start,
                rate: config.paper_rate * fitness.powf(beta) * norm,
            }
        })
        .collect();

    // Vocabulary: the first fifth is shared background, the rest is split
    // evenly across topics.
    let background = (config.vocab_size / 5).max(1);
    let per_topic = ((config.vocab_size - background) / config.topics).max(1);
    let topic_venues: Vec<Vec<VenueId>> = (0..config.topics)
        .map(|t| {
            let v: Vec<VenueId> = (0..config.n_venues)
                .filter(|v| v % config.topics == t)
                .map(|v| v as VenueId + 1)
                .collect();
            if v.is_empty() {
                vec![(t % config.n_venues) as VenueId + 1]
            } else {
                v
            }
        })
        .collect();

    let mut papers: Vec<PaperRecord> = Vec::new();
    let mut first_author_fitness: Vec<f64> = Vec::new();
    let mut indegree: Vec<u32> = Vec::new();
    let capacity_guess = (config.n_authors as f64 * config.paper_rate * 2.0
        * (config.end_year - config.start_year + 1) as f64) as usize
        + config.n_authors * 2;
    let mut tree = WeightTree::with_capacity(capacity_guess);
    let attract = |fitness: f64| fitness.powf(beta);
    let mut citable = 0usize;

    for year in config.start_year..=config.end_year {
        let active: Vec<usize> = (0..authors.len()).filter(|&a| authors[a].start <= year).collect();
        let mut active_by_topic: Vec<Vec<usize>> = vec![Vec::new(); config.topics];
        for &a in &active {
            active_by_topic[authors[a].topic].push(a);
        }
        // Co-authors are drawn in proportion to productivity.
        let pick_from = |pool: &[usize]| WeightedIndex::new(pool.iter().map(|&a| authors[a].rate)).ok();
        let pick_active = pick_from(&active);
        let pick_topic: Vec<_> = active_by_topic.iter().map(|p| pick_from(p)).collect();
        let year_start = papers.len();
        for &a in &active {
            let author = &authors[a];
            let mut n = Poisson::new(author.rate).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
            if year == author.start {
                n = n.max(1);
            }
            for _ in 0..n {
                let paper_topic = if rng.gen_bool(0.85) {
                    author.topic
                } else {
                    rng.gen_range(0..config.topics)
                };
                let mut author_list = vec![author.id];
                let n_co = Poisson::new(config.coauthors_mean.max(1e-9))
                    .map(|p| p.sample(&mut rng) as usize)
                    .unwrap_or(0);
                for _ in 0..n_co {
                    let (pool, pick) = if rng.gen_bool(0.8) && active_by_topic[author.topic].len() > 1 {
                        (&active_by_topic[author.topic], &pick_topic[author.topic])
                    } else {
                        (&active, &pick_active)
                    };
                    let pick = pick.as_ref().expect("positive rates");
                    let co = authors[pool[pick.sample(&mut rng)]].id;
                    if !author_list.contains(&co) {
                        author_list.push(co);
                    }
                }

                let venue = if rng.gen_bool(0.05) {
                    None
                } else if rng.gen_bool(0.9) {
                    topic_venues[paper_topic].choose(&mut rng).copied()
                } else {
                    Some(rng.gen_range(1..=config.n_venues) as VenueId)
                };

                let mut refs = Vec::with_capacity(config.refs_per_paper);
                if year > config.start_year {
                    if citable < config.refs_per_paper {
                        return Err(Error::Infeasible(format!(
                            "{} references per paper but only {citable} papers before {year}",
                            config.refs_per_paper
                        )));
                    }
                    let mut tries = 0;
                    while refs.len() < config.refs_per_paper && tries < config.refs_per_paper * 50 {
                        tries += 1;
                        let u = rng.gen::<f64>() * tree.total(citable);
                        let q = tree.find(u, citable);
                        let qid = papers[q].id;
                        if refs.contains(&qid) {
                            continue;
                        }
                        refs.push(qid);
                        indegree[q] += 1;
                        let w = (indegree[q] as f64 + 1.0).powf(config.pa_exponent) * attract(first_author_fitness[q]);
                        tree.set(q, w);
                    }
                }

                let mut words = |count: usize| -> String {
                    (0..count)
                        .map(|_| {
                            let idx = if rng.gen_bool(0.25) {
                                rng.gen_range(0..background)
                            } else {
                                // Skewed towards the head of the topic's word list.
                                let r: f64 = rng.gen();
                                background + paper_topic * per_topic + ((r * r) * per_topic as f64) as usize
                            };
                            synth_word(idx)
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let title = words(config.title_words);
                let abstract_text = words(config.abstract_words);

                papers.push(PaperRecord {
                    id: papers.len() as u64 + 1,
                    title,
                    abstract_text,
                    year,
                    venue,
                    authors: author_list,
                    refs,
                });
                first_author_fitness.push(author.fitness);
                indegree.push(0);
            }
        }
        // Papers become citable from the following year on.
        let year_end = papers.len();
        if tree.weights.len() < year_end {
            let mut grown = WeightTree::with_capacity(year_end * 2);
            for (i, &w) in tree.weights.iter().enumerate().take(citable) {
                grown.set(i, w);
            }
            tree = grown;
        }
        for q in year_start..year_end {
            let w = (indegree[q] as f64 + 1.0).powf(config.pa_exponent) * attract(first_author_fitness[q]);
            tree.set(q, w);
        }
        citable = year_end;
    }

    let mut jsonl = String::new();
    for p in &papers {
        jsonl.push_str(&serde_json::to_string(p)?);
        jsonl.push('\n');
    }
    let hash = sha256_hex(jsonl.as_bytes());
    let truth = authors
        .iter()
        .map(|a| TruthRow {
            author_id: a.id,
            fitness: a.fitness,
            topic: a.topic,
        })
        .collect();
    Ok(SynthOutput {
        papers,
        truth,
        jsonl,
        hash,
    })
}

/// Latent fitness and topic of every author, provided `corpus_bytes` is
/// exactly the corpus this config generates.
pub fn planted_truth(config: &SynthConfig, corpus_bytes: &[u8]) -> Result<Vec<TruthRow>> {
    let out = generate_corpus(config)?;
    if sha256_hex(corpus_bytes) != out.hash {
        return Err(Error::Provenance);
    }
    Ok(out.truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_authors: 200,
            start_year: 2000,
            end_year: 2009,
            cohort_year: 2006,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn words_are_distinct_and_tokenizable() {
        let words: std::collections::BTreeSet<String> = (0..5000).map(synth_word).collect();
        assert_eq!(words.len(), 5000);
        for w in words.iter().take(100) {
            assert_eq!(crate::topics::tokenize(w, ""), vec![w.clone()]);
        }
    }

    #[test]
    fn fenwick_sampling_matches_weights() {
        let mut t = WeightTree::with_capacity(4);
        for (i, w) in [1.0, 0.0, 3.0, 4.0].into_iter().enumerate() {
            t.set(i, w);
        }
        assert_eq!(t.total(4), 8.0);
        assert_eq!(t.find(0.5, 4), 0);
        assert_eq!(t.find(1.0, 4), 2);
        assert_eq!(t.find(3.99, 4), 2);
        assert_eq!(t.find(4.0, 4), 3);
        assert_eq!(t.find(7.99, 4), 3);
        assert_eq!(t.total(2), 1.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        assert_eq!(a.jsonl, b.jsonl);
        let c = generate_corpus(&SynthConfig { seed: 5, ..small() }).unwrap();
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn infeasible_reference_count() {
        let cfg = SynthConfig {
            n_authors: 3,
            refs_per_paper: 50,
            ..small()
        };
        assert!(matches!(generate_corpus(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn invalid_config() {
        let cfg = SynthConfig {
            signal_strength: 1.5,
            ..small()
        };
        assert!(generate_corpus(&cfg).is_err());
    }

    #[test]
    fn truth_requires_matching_corpus() {
        let cfg = small();
        let out = generate_corpus(&cfg).unwrap();
        let truth = planted_truth(&cfg, out.jsonl.as_bytes()).unwrap();
        assert_eq!(truth.len(), cfg.n_authors);
        assert_eq!(truth, out.truth);
        assert!(matches!(planted_truth(&cfg, b"{}\n"), Err(Error::Provenance)));
    }
}
