//! The 18 per-author features, grouped as author (F1-F3), social (F4-F9),
//! venue (F10-F12), content (F13-F14) and temporal (F15-F18).
//!
//! All features are measured on the snapshot strictly before year `t`.
//! PageRank features are probabilities multiplied by 10^6. Every average
//! over an empty set is 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusSnapshot};
use crate::error::{Error, Result};
use crate::graphs::{PageRankScores, WeightedDigraph};
use crate::topics::{authority, diversity, TopicModel};
use crate::util::format_sig;
use crate::{AuthorId, VenueId};

pub const FEATURE_COUNT: usize = 18;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11", "F12", "F13", "F14", "F15",
    "F16", "F17", "F18",
];

/// Multiplier applied to PageRank probabilities.
pub const PR_SCALE: f64 = 1e6;

pub type FeatureRow = [f64; FEATURE_COUNT];

/// The five feature groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Author,
    Social,
    Venue,
    Content,
    Temporal,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Author,
        FeatureGroup::Social,
        FeatureGroup::Venue,
        FeatureGroup::Content,
        FeatureGroup::Temporal,
    ];

    /// Zero-based column indices.
    pub fn columns(self) -> std::ops::Range<usize> {
        match self {
            FeatureGroup::Author => 0..3,
            FeatureGroup::Social => 3..9,
            FeatureGroup::Venue => 9..12,
            FeatureGroup::Content => 12..14,
            FeatureGroup::Temporal => 14..18,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Author => "Author",
            FeatureGroup::Social => "Social",
            FeatureGroup::Venue => "Venue",
            FeatureGroup::Content => "Content",
            FeatureGroup::Temporal => "Temporal",
        }
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFeatureGroup(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub snapshot_year: i32,
    /// Named input hashes (corpus, graphs, topic model, config).
    pub hashes: BTreeMap<String, String>,
}

/// One row per author, ordered by author id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub author_ids: Vec<AuthorId>,
    pub rows: Vec<FeatureRow>,
    pub transformed: bool,
    pub provenance: Provenance,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_of(&self, author: AuthorId) -> Option<&FeatureRow> {
        self.author_ids
            .binary_search(&author)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    pub fn index(&self) -> HashMap<AuthorId, usize> {
        self.author_ids.iter().enumerate().map(|(i, &a)| (a, i)).collect()
    }

    /// CSV with header `author_id,F1,...,F18,transformed`; six significant
    /// digits per value.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "author_id,{},transformed", FEATURE_NAMES.join(","))?;
        for (a, row) in self.author_ids.iter().zip(&self.rows) {
            write!(out, "{a}")?;
            for x in row {
                write!(out, ",{}", format_sig(*x, 6))?;
            }
            writeln!(out, ",{}", u8::from(self.transformed))?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead, provenance: Provenance) -> Result<Self> {
        let mut author_ids = Vec::new();
        let mut rows = Vec::new();
        let mut transformed = None;
        for (i, line) in input.lines().enumerate() {
            let bad = |message: String| Error::MalformedLine {
                line: i + 1,
                message,
            };
            let line = line.map_err(|e| bad(e.to_string()))?;
            if i == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != FEATURE_COUNT + 2 {
                return Err(bad(format!("expected {} fields", FEATURE_COUNT + 2)));
            }
            author_ids.push(fields[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?);
            let mut row = [0.0; FEATURE_COUNT];
            for (x, f) in row.iter_mut().zip(&fields[1..=FEATURE_COUNT]) {
                *x = f.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            }
            rows.push(row);
            let flag = fields[FEATURE_COUNT + 1] == "1";
            if *transformed.get_or_insert(flag) != flag {
                return Err(bad("mixed transformed flags".into()));
            }
        }
        Ok(FeatureMatrix {
            author_ids,
            rows,
            transformed: transformed.unwrap_or(false),
            provenance,
        })
    }
}

/// Replace every cell `f` by `ln(1 + f)`. Refuses a matrix that is
/// already transformed.
pub fn log_transform(matrix: FeatureMatrix) -> Result<FeatureMatrix> {
    if matrix.transformed {
        return Err(Error::AlreadyTransformed);
    }
    let rows = matrix
        .rows
        .into_iter()
        .map(|row| row.map(f64::ln_1p))
        .collect();
    Ok(FeatureMatrix {
        rows,
        transformed: true,
        ..matrix
    })
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// F1-F3: paper count, citation count, citations per paper.
pub fn author_features(snapshot: &CorpusSnapshot<'_>, author: AuthorId) -> Result<[f64; 3]> {
    let papers = snapshot.paper_count(author);
    if papers == 0 {
        return Err(Error::NoPapers(author));
    }
    let citations = snapshot.citation_count(author) as f64;
    let papers = papers as f64;
    Ok([papers, citations, citations / papers])
}

/// F4-F9 given the author's co-authors (ACN neighbours).
pub fn social_features(
    snapshot: &CorpusSnapshot<'_>,
    coauthors: &BTreeSet<AuthorId>,
    pr_acn: &PageRankScores,
    pr_accn: &PageRankScores,
    author: AuthorId,
) -> [f64; 6] {
    let f4 = coauthors.len() as f64;
    let f5 = mean(coauthors.iter().map(|&b| snapshot.citation_count(b) as f64));
    let f6 = pr_acn.get(author) * PR_SCALE;
    let f7 = pr_accn.get(author) * PR_SCALE;
    let f8 = mean(coauthors.iter().map(|&b| pr_acn.get(b) * PR_SCALE));
    let f9 = mean(coauthors.iter().map(|&b| pr_accn.get(b) * PR_SCALE));
    [f4, f5, f6, f7, f8, f9]
}

/// Mean snapshot citation count of each venue's snapshot papers.
pub fn venue_citations(snapshot: &CorpusSnapshot<'_>) -> BTreeMap<VenueId, f64> {
    let mut acc: BTreeMap<VenueId, (u64, u64)> = BTreeMap::new();
    for (idx, p) in snapshot.papers().iter().enumerate() {
        if let Some(v) = p.venue {
            let e = acc.entry(v).or_insert((0, 0));
            e.0 += snapshot.paper_citations(idx);
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(v, (c, n))| (v, c as f64 / n as f64))
        .collect()
}

/// F10-F12. Averages run over the author's venue-bearing papers with
/// multiplicity; F11 keeps only papers from years `t-2` and `t-1`.
pub fn venue_features(
    snapshot: &CorpusSnapshot<'_>,
    venue_citation: &BTreeMap<VenueId, f64>,
    pr_vccn: &PageRankScores,
    author: AuthorId,
    t: i32,
) -> [f64; 3] {
    let corpus = snapshot.corpus();
    let venues: Vec<(i32, VenueId)> = snapshot
        .author_papers(author)
        .iter()
        .filter_map(|&i| {
            let p = corpus.paper(i);
            p.venue.map(|v| (p.year, v))
        })
        .collect();
    let vc = |v: &VenueId| venue_citation.get(v).copied().unwrap_or(0.0);
    let f10 = mean(venues.iter().map(|(_, v)| vc(v)));
    let f11 = mean(
        venues
            .iter()
            .filter(|(y, _)| *y == t - 2 || *y == t - 1)
            .map(|(_, v)| vc(v)),
    );
    let f12 = mean(venues.iter().map(|(_, v)| pr_vccn.get(*v) * PR_SCALE));
    [f10, f11, f12]
}

/// F13-F14: diversity and authority of the author's snapshot papers.
pub fn content_features(
    snapshot: &CorpusSnapshot<'_>,
    model: &TopicModel,
    author: AuthorId,
) -> Result<[f64; 2]> {
    let corpus = snapshot.corpus();
    let papers = snapshot.author_papers(author);
    if papers.is_empty() {
        return Err(Error::NoPapers(author));
    }
    let mut rows = Vec::with_capacity(papers.len());
    let mut cites = Vec::with_capacity(papers.len());
    for &i in papers {
        let id = corpus.paper(i).id;
        rows.push(model.paper_topics(id).ok_or(Error::UnmodeledPaper(id))?);
        cites.push(snapshot.paper_citations(i));
    }
    Ok([diversity(&rows), authority(&rows, &cites, model.topics)])
}

/// Citation and paper counts of one author at the snapshots `t`, `t-1`,
/// `t-2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActivityCounts {
    pub citations: [u64; 3],
    pub papers: [u64; 3],
}

impl ActivityCounts {
    pub fn measure(corpus: &Corpus, author: AuthorId, t: i32) -> Self {
        let mut counts = ActivityCounts::default();
        for back in 0..3 {
            let s = corpus.snapshot(t - back as i32);
            counts.citations[back] = s.citation_count(author);
            counts.papers[back] = s.paper_count(author);
        }
        counts
    }
}

/// F15-F18 from activity counts.
pub fn temporal_from_counts(counts: &ActivityCounts) -> [f64; 4] {
    let c = counts.citations.map(|x| x as f64);
    let n = counts.papers.map(|x| x as f64);
    [c[0] - c[1], (c[0] - c[2]) / 2.0, n[0] - n[1], (n[0] - n[2]) / 2.0]
}

/// F15-F18: one-year and two-year-average citation and paper increments.
pub fn temporal_features(corpus: &Corpus, author: AuthorId, t: i32) -> [f64; 4] {
    temporal_from_counts(&ActivityCounts::measure(corpus, author, t))
}

/// Shared inputs for extracting the full matrix.
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub t: i32,
    pub acn: &'a WeightedDigraph,
    pub pr_acn: &'a PageRankScores,
    pub pr_accn: &'a PageRankScores,
    pub pr_vccn: &'a PageRankScores,
    pub model: &'a TopicModel,
}

impl FeatureContext<'_> {
    /// Untransformed matrix for `authors`, rows in ascending author order.
    pub fn extract(&self, authors: &BTreeSet<AuthorId>) -> Result<FeatureMatrix> {
        let now = self.corpus.snapshot(self.t);
        let prev = [self.corpus.snapshot(self.t - 1), self.corpus.snapshot(self.t - 2)];
        let neighbors = self.acn.neighbor_map();
        let empty = BTreeSet::new();
        let venue_citation = venue_citations(&now);

        let mut rows = Vec::with_capacity(authors.len());
        for &a in authors {
            let mut row = [0.0; FEATURE_COUNT];
            row[0..3].copy_from_slice(&author_features(&now, a)?);
            let coauthors = neighbors.get(&a).unwrap_or(&empty);
            row[3..9].copy_from_slice(&social_features(
                &now,
                coauthors,
                self.pr_acn,
                self.pr_accn,
                a,
            ));
            row[9..12].copy_from_slice(&venue_features(
                &now,
                &venue_citation,
                self.pr_vccn,
                a,
                self.t,
            ));
            row[12..14].copy_from_slice(&content_features(&now, self.model, a)?);
            let counts = ActivityCounts {
                citations: [now.citation_count(a), prev[0].citation_count(a), prev[1].citation_count(a)],
                papers: [now.paper_count(a), prev[0].paper_count(a), prev[1].paper_count(a)],
            };
            row[14..18].copy_from_slice(&temporal_from_counts(&counts));
            rows.push(row);
        }
        Ok(FeatureMatrix {
            author_ids: authors.iter().copied().collect(),
            rows,
            transformed: false,
            provenance: Provenance {
                snapshot_year: self.t,
                hashes: BTreeMap::new(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PaperRecord;

    fn paper(id: u64, year: i32, venue: Option<u64>, authors: &[u64], refs: &[u64]) -> PaperRecord {
        PaperRecord {
            id,
            title: String::new(),
            abstract_text: String::new(),
            year,
            venue,
            authors: authors.to_vec(),
            refs: refs.to_vec(),
        }
    }

    fn matrix(rows: Vec<FeatureRow>) -> FeatureMatrix {
        FeatureMatrix {
            author_ids: (0..rows.len() as u64).collect(),
            rows,
            transformed: false,
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn author_features_single_uncited_paper() {
        let c = Corpus::from_papers(vec![paper(1, 2006, None, &[5], &[])]).unwrap();
        assert_eq!(author_features(&c.snapshot(2008), 5).unwrap(), [1.0, 0.0, 0.0]);
        assert!(matches!(
            author_features(&c.snapshot(2008), 6),
            Err(Error::NoPapers(6))
        ));
    }

    #[test]
    fn solo_author_social_features() {
        let c = Corpus::from_papers(vec![paper(1, 2006, None, &[5], &[])]).unwrap();
        let s = c.snapshot(2008);
        let mut pr = PageRankScores {
            scores: BTreeMap::new(),
            iterations: 0,
            converged: true,
        };
        pr.scores.insert(5, 1.0);
        let f = social_features(&s, &BTreeSet::new(), &pr, &pr, 5);
        assert_eq!(f, [0.0, 0.0, 1e6, 1e6, 0.0, 0.0]);
    }

    #[test]
    fn coauthor_pr_mean_is_rescaled() {
        let c = Corpus::from_papers(vec![paper(1, 2006, None, &[1, 2, 3], &[])]).unwrap();
        let mut pr = PageRankScores {
            scores: BTreeMap::new(),
            iterations: 0,
            converged: true,
        };
        pr.scores.insert(2, 2.0e-6);
        pr.scores.insert(3, 4.0e-6);
        let co: BTreeSet<u64> = [2, 3].into();
        let f = social_features(&c.snapshot(2008), &co, &pr, &pr, 1);
        assert!((f[4] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn venue_citation_mean() {
        // Venue 9 has four papers with 0, 2, 4, 6 citations.
        let mut papers = vec![
            paper(1, 2000, Some(9), &[1], &[]),
            paper(2, 2000, Some(9), &[1], &[]),
            paper(3, 2000, Some(9), &[1], &[]),
            paper(4, 2000, Some(9), &[1], &[]),
        ];
        let targets = [(2u64, 2usize), (3, 4), (4, 6)];
        let mut id = 100;
        for (target, n) in targets {
            for _ in 0..n {
                papers.push(paper(id, 2001, None, &[50], &[target]));
                id += 1;
            }
        }
        let c = Corpus::from_papers(papers).unwrap();
        let s = c.snapshot(2008);
        let vc = venue_citations(&s);
        assert_eq!(vc[&9], 3.0);
        let pr = PageRankScores {
            scores: BTreeMap::new(),
            iterations: 0,
            converged: true,
        };
        let f = venue_features(&s, &vc, &pr, 1, 2008);
        assert_eq!(f, [3.0, 0.0, 0.0]);
        assert_eq!(venue_features(&s, &vc, &pr, 50, 2008), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn temporal_from_table_counts() {
        let counts = ActivityCounts {
            citations: [134, 99, 56],
            papers: [12, 5, 2],
        };
        assert_eq!(temporal_from_counts(&counts), [35.0, 39.0, 7.0, 5.0]);
        assert_eq!(temporal_from_counts(&ActivityCounts::default()), [0.0; 4]);
    }

    #[test]
    fn log_transform_values_and_refusal() {
        let mut row = [0.0; FEATURE_COUNT];
        row[1] = std::f64::consts::E - 1.0;
        let m = log_transform(matrix(vec![row])).unwrap();
        assert_eq!(m.rows[0][0], 0.0);
        assert!((m.rows[0][1] - 1.0).abs() < 1e-15);
        assert!(matches!(log_transform(m), Err(Error::AlreadyTransformed)));
    }

    #[test]
    fn group_names_parse() {
        assert_eq!("temporal".parse::<FeatureGroup>().unwrap(), FeatureGroup::Temporal);
        assert!(matches!(
            "Citations".parse::<FeatureGroup>(),
            Err(Error::UnknownFeatureGroup(_))
        ));
        let total: usize = FeatureGroup::ALL.iter().map(|g| g.columns().len()).sum();
        assert_eq!(total, FEATURE_COUNT);
    }

    #[test]
    fn csv_round_trip_keeps_six_digits() {
        let mut row = [0.0; FEATURE_COUNT];
        row[2] = 134.0 / 12.0;
        let m = matrix(vec![row]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("author_id,F1,F2,F3,F4"));
        assert!(text.contains(",11.1667,"));
        let back = FeatureMatrix::read_csv(buf.as_slice(), Provenance::default()).unwrap();
        assert_eq!(back.rows[0][2], 11.1667);
        assert!(!back.transformed);
    }
}
