//! Topic modelling of cohort papers and the content features built on it.
//!
//! Each author's topic mass `p(r|a)` is the sum of their papers' topic
//! mixtures; an author joins the groups of their `m` heaviest topics.

mod lda;
mod tokenize;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use lda::{fit_lda, LdaConfig, TopicModel};
pub use tokenize::{is_stopword, tokenize, Document, Vocabulary};

use crate::error::{Error, Result};
use crate::util::xlnx;
use crate::{AuthorId, PaperId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorTopicProfile {
    pub author_id: AuthorId,
    /// Unnormalised topic mass, one entry per topic.
    pub mass: Vec<f64>,
    /// Top-`m` topics by mass, ties to the lower index.
    pub groups: Vec<usize>,
}

/// Indices of the `m` largest entries, ties broken by ascending index.
pub fn top_m(mass: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mass.len()).collect();
    idx.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// Sum the topic mixtures of an author's papers.
pub fn author_topic_profile(
    model: &TopicModel,
    author_id: AuthorId,
    papers: &[PaperId],
    m: usize,
) -> Result<AuthorTopicProfile> {
    if papers.is_empty() {
        return Err(Error::NoPapers(author_id));
    }
    let mut mass = vec![0.0; model.topics];
    for &p in papers {
        let row = model.paper_topics(p).ok_or(Error::UnmodeledPaper(p))?;
        for (acc, x) in mass.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let groups = top_m(&mass, m);
    Ok(AuthorTopicProfile {
        author_id,
        mass,
        groups,
    })
}

/// Topic groups: `groups[r]` holds every author with `r` among their
/// top-`m` topics.
pub fn divide_researchers(
    profiles: &[AuthorTopicProfile],
    topics: usize,
    m: usize,
) -> Vec<BTreeSet<AuthorId>> {
    let mut groups = vec![BTreeSet::new(); topics];
    for profile in profiles {
        for r in top_m(&profile.mass, m) {
            groups[r].insert(profile.author_id);
        }
    }
    groups
}

/// Mean Shannon entropy (natural log) of the given topic mixtures.
pub fn diversity(rows: &[&[f64]]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|row| -row.iter().map(|&p| xlnx(p)).sum::<f64>())
        .sum();
    total / rows.len() as f64
}

/// Citation-weighted topic mass averaged over the `topics` topics:
/// `sum_r sum_l p(r|l) c_l / R`.
pub fn authority(rows: &[&[f64]], citations: &[u64], topics: usize) -> f64 {
    assert_eq!(rows.len(), citations.len());
    let mut total = 0.0;
    for (row, &c) in rows.iter().zip(citations) {
        for &p in row.iter() {
            total += p * c as f64;
        }
    }
    total / topics as f64
}
