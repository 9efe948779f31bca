//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokenize::{Document, Vocabulary};
use crate::error::{Error, Result};
use crate::PaperId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// `alpha = 50 / R`, `beta = 0.01`, 200 sweeps.
    pub fn with_topics(topics: usize, seed: u64) -> Self {
        LdaConfig {
            topics,
            alpha: 50.0 / topics as f64,
            beta: 0.01,
            iterations: 200,
            seed,
        }
    }
}

/// Fitted topic model: per-paper topic mixtures and per-topic word
/// distributions, point-estimated from the final sampler state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    #[serde(rename = "R")]
    pub topics: usize,
    pub alpha_lda: f64,
    pub beta_lda: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocabulary: Vec<String>,
    /// p(r|l) keyed by paper id.
    pub doc_topic: BTreeMap<PaperId, Vec<f64>>,
    /// R x V, rows sum to one.
    pub topic_word: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn paper_topics(&self, paper: PaperId) -> Option<&[f64]> {
        self.doc_topic.get(&paper).map(Vec::as_slice)
    }

    /// The `n` most probable words of each topic with their probabilities.
    pub fn top_words(&self, n: usize) -> Vec<Vec<(&str, f64)>> {
        self.topic_word
            .iter()
            .map(|row| {
                let mut ids: Vec<usize> = (0..row.len()).collect();
                ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                ids.into_iter()
                    .take(n)
                    .map(|w| (self.vocabulary[w].as_str(), row[w]))
                    .collect()
            })
            .collect()
    }

    /// Aligned text table of the top words per topic.
    pub fn top_words_table(&self, n: usize) -> String {
        let mut out = String::from("topic  words\n");
        for (r, words) in self.top_words(n).iter().enumerate() {
            let words: Vec<&str> = words.iter().map(|(w, _)| *w).collect();
            out.push_str(&format!("{r:<5}  {}\n", words.join(", ")));
        }
        out
    }
}

/// Run the collapsed Gibbs sampler for `config.iterations` sweeps.
pub fn fit_lda(documents: &[Document], vocabulary: &Vocabulary, config: &LdaConfig) -> Result<TopicModel> {
    if config.topics < 2 {
        return Err(Error::InvalidParameter("topic count must be >= 2".into()));
    }
    if !(config.alpha > 0.0 && config.beta > 0.0) {
        return Err(Error::InvalidParameter("LDA priors must be positive".into()));
    }
    if documents.iter().all(Document::is_empty) {
        return Err(Error::EmptyTopicCorpus);
    }
    let k = config.topics;
    let v = vocabulary.len();
    for doc in documents {
        if let Some(&w) = doc.tokens.iter().find(|&&w| w >= v) {
            return Err(Error::Dimension { expected: v, got: w + 1 });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut doc_counts = vec![vec![0u32; k]; documents.len()];
    // Word-major layout: word_counts[w * k + topic].
    let mut word_counts = vec![0u32; v * k];
    let mut topic_totals = vec![0u32; k];
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(documents.len());
    for (d, doc) in documents.iter().enumerate() {
        let z: Vec<usize> = doc.tokens.iter().map(|_| rng.gen_range(0..k)).collect();
        for (&w, &t) in doc.tokens.iter().zip(&z) {
            doc_counts[d][t] += 1;
            word_counts[w * k + t] += 1;
            topic_totals[t] += 1;
        }
        assignments.push(z);
    }

    let v_beta = v as f64 * config.beta;
    let mut weights = vec![0.0; k];
    for _ in 0..config.iterations {
        for (d, doc) in documents.iter().enumerate() {
            for (i, &w) in doc.tokens.iter().enumerate() {
                let old = assignments[d][i];
                doc_counts[d][old] -= 1;
                word_counts[w * k + old] -= 1;
                topic_totals[old] -= 1;

                let row = &word_counts[w * k..(w + 1) * k];
                let mut total = 0.0;
                for t in 0..k {
                    total += (doc_counts[d][t] as f64 + config.alpha)
                        * (row[t] as f64 + config.beta)
                        / (topic_totals[t] as f64 + v_beta);
                    weights[t] = total;
                }
                let u = rng.gen::<f64>() * total;
                let new = weights.partition_point(|&c| c <= u).min(k - 1);

                assignments[d][i] = new;
                doc_counts[d][new] += 1;
                word_counts[w * k + new] += 1;
                topic_totals[new] += 1;
            }
        }
    }

    let k_alpha = k as f64 * config.alpha;
    let doc_topic = documents
        .iter()
        .zip(&doc_counts)
        .map(|(doc, counts)| {
            let n = doc.tokens.len() as f64;
            let row = counts
                .iter()
                .map(|&c| (c as f64 + config.alpha) / (n + k_alpha))
                .collect();
            (doc.paper_id, row)
        })
        .collect();
    let topic_word = (0..k)
        .map(|t| {
            let denom = topic_totals[t] as f64 + v_beta;
            (0..v)
                .map(|w| (word_counts[w * k + t] as f64 + config.beta) / denom)
                .collect()
        })
        .collect();

    Ok(TopicModel {
        topics: k,
        alpha_lda: config.alpha,
        beta_lda: config.beta,
        seed: config.seed,
        iterations: config.iterations,
        vocabulary: vocabulary.words().to_vec(),
        doc_topic,
        topic_word,
    })
}
