//! Publication corpus ingestion and temporal snapshots.
//!
//! The on-disk format is JSON lines, one paper per line:
//!
//! ```text
//! {"id": 1, "title": "...", "abstract": "...", "year": 2006, "venue": 3, "authors": [10, 11], "refs": [0]}
//! ```
//!
//! Papers are stored sorted by `(year, id)`, so the snapshot "strictly before
//! year `t`" is always a prefix of the paper array.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{AuthorId, PaperId, VenueId};

/// One publication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: PaperId,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub year: i32,
    #[serde(default)]
    pub venue: Option<VenueId>,
    /// Ordered author list; position 0 is the first author.
    pub authors: Vec<AuthorId>,
    #[serde(default)]
    pub refs: Vec<PaperId>,
}

impl PaperRecord {
    /// Deduplicate references and authors (first occurrence wins) and check
    /// the per-record invariants.
    fn normalize(mut self) -> std::result::Result<Self, String> {
        if self.authors.is_empty() {
            return Err(format!("paper {} has no authors", self.id));
        }
        let mut seen = HashSet::new();
        self.authors.retain(|a| seen.insert(*a));
        let mut seen = HashSet::new();
        self.refs.retain(|r| seen.insert(*r));
        if self.refs.contains(&self.id) {
            return Err(format!("paper {} references itself", self.id));
        }
        Ok(self)
    }

    pub fn first_author(&self) -> AuthorId {
        self.authors[0]
    }
}

/// The full, cross-indexed corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    papers: Vec<PaperRecord>,
    by_id: HashMap<PaperId, usize>,
    /// For each paper, indices of the (present) papers citing it, ascending.
    cited_by: Vec<Vec<usize>>,
    /// For each author, indices of their papers, ascending.
    by_author: BTreeMap<AuthorId, Vec<usize>>,
}

/// Read a JSON-lines corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_reader(std::io::BufReader::new(file))
}

impl Corpus {
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut papers = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::MalformedLine {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: PaperRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let record = record.normalize().map_err(|message| Error::MalformedLine {
                line: line_no,
                message,
            })?;
            papers.push(record);
        }
        Self::build(papers)
    }

    pub fn from_papers(papers: Vec<PaperRecord>) -> Result<Self> {
        let papers = papers
            .into_iter()
            .map(|p| p.normalize().map_err(Error::InvalidParameter))
            .collect::<Result<Vec<_>>>()?;
        Self::build(papers)
    }

    fn build(mut papers: Vec<PaperRecord>) -> Result<Self> {
        papers.sort_by_key(|p| (p.year, p.id));
        let mut by_id = HashMap::with_capacity(papers.len());
        for (idx, p) in papers.iter().enumerate() {
            if by_id.insert(p.id, idx).is_some() {
                return Err(Error::DuplicatePaper(p.id));
            }
        }
        let mut cited_by = vec![Vec::new(); papers.len()];
        for (idx, p) in papers.iter().enumerate() {
            for r in &p.refs {
                // Dangling references stay in the record but are not indexed.
                if let Some(&target) = by_id.get(r) {
                    let t = &papers[target];
                    if t.year > p.year {
                        return Err(Error::FutureReference {
                            paper: p.id,
                            year: p.year,
                            target: t.id,
                            target_year: t.year,
                        });
                    }
                    cited_by[target].push(idx);
                }
            }
        }
        let mut by_author: BTreeMap<AuthorId, Vec<usize>> = BTreeMap::new();
        for (idx, p) in papers.iter().enumerate() {
            for a in &p.authors {
                by_author.entry(*a).or_default().push(idx);
            }
        }
        Ok(Corpus {
            papers,
            by_id,
            cited_by,
            by_author,
        })
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn paper(&self, idx: usize) -> &PaperRecord {
        &self.papers[idx]
    }

    pub fn index_of(&self, id: PaperId) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn author_count(&self) -> usize {
        self.by_author.len()
    }

    pub fn authors(&self) -> impl Iterator<Item = AuthorId> + '_ {
        self.by_author.keys().copied()
    }

    /// Indices of every paper listing `author`, in `(year, id)` order.
    pub fn author_papers(&self, author: AuthorId) -> &[usize] {
        self.by_author.get(&author).map_or(&[], Vec::as_slice)
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        Some((self.papers.first()?.year, self.papers.last()?.year))
    }

    /// All papers with `year < cutoff_year`.
    pub fn snapshot(&self, cutoff_year: i32) -> CorpusSnapshot<'_> {
        let len = self.papers.partition_point(|p| p.year < cutoff_year);
        CorpusSnapshot {
            corpus: self,
            cutoff_year,
            len,
        }
    }
}

/// Free-function form of [`Corpus::snapshot`].
pub fn snapshot(corpus: &Corpus, cutoff_year: i32) -> CorpusSnapshot<'_> {
    corpus.snapshot(cutoff_year)
}

/// Immutable view of the corpus restricted to papers before a cutoff year.
///
/// Paper indices are shared with the parent [`Corpus`]; included papers are
/// exactly the indices `0..len()`.
#[derive(Debug, Clone, Copy)]
pub struct CorpusSnapshot<'a> {
    corpus: &'a Corpus,
    cutoff_year: i32,
    len: usize,
}

impl<'a> CorpusSnapshot<'a> {
    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn cutoff_year(&self) -> i32 {
        self.cutoff_year
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn papers(&self) -> &'a [PaperRecord] {
        &self.corpus.papers[..self.len]
    }

    pub fn contains(&self, idx: usize) -> bool {
        idx < self.len
    }

    /// Included papers citing paper `idx`.
    pub fn citing(&self, idx: usize) -> &'a [usize] {
        if !self.contains(idx) {
            return &[];
        }
        let all = &self.corpus.cited_by[idx];
        &all[..all.partition_point(|&p| p < self.len)]
    }

    /// Number of included papers citing paper `idx`.
    pub fn paper_citations(&self, idx: usize) -> u64 {
        self.citing(idx).len() as u64
    }

    /// Included references of paper `idx` (dangling ones dropped).
    pub fn references(&self, idx: usize) -> impl Iterator<Item = usize> + 'a {
        let corpus = self.corpus;
        corpus.papers[idx]
            .refs
            .iter()
            .filter_map(move |r| corpus.by_id.get(r).copied())
    }

    /// The author's included papers, in `(year, id)` order.
    pub fn author_papers(&self, author: AuthorId) -> &'a [usize] {
        let all = self.corpus.author_papers(author);
        &all[..all.partition_point(|&p| p < self.len)]
    }

    pub fn paper_count(&self, author: AuthorId) -> u64 {
        self.author_papers(author).len() as u64
    }

    pub fn citation_count(&self, author: AuthorId) -> u64 {
        self.author_papers(author)
            .iter()
            .map(|&p| self.paper_citations(p))
            .sum()
    }

    /// Authors with at least one included paper, ascending.
    pub fn authors(&self) -> BTreeSet<AuthorId> {
        self.papers()
            .iter()
            .flat_map(|p| p.authors.iter().copied())
            .collect()
    }
}

/// Sum over the author's included papers of their included citing papers.
pub fn citation_count(snapshot: &CorpusSnapshot<'_>, author: AuthorId) -> u64 {
    snapshot.citation_count(author)
}

/// Observation year, first-first-author year and prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub t: i32,
    pub t_1st: i32,
    pub delta_t: i32,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            t: 2008,
            t_1st: 2006,
            delta_t: 4,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_1st >= self.t {
            return Err(Error::InvalidParameter(format!(
                "t_1st ({}) must be before t ({})",
                self.t_1st, self.t
            )));
        }
        if self.delta_t < 1 {
            return Err(Error::InvalidParameter("delta_t must be >= 1".into()));
        }
        Ok(())
    }
}

/// Authors whose earliest first-author paper appeared in `t_1st`.
pub fn identify_cohort(corpus: &Corpus, t_1st: i32) -> BTreeSet<AuthorId> {
    let mut first: BTreeMap<AuthorId, i32> = BTreeMap::new();
    for p in corpus.papers() {
        // Papers are year-ordered, so the first hit is the earliest.
        first.entry(p.first_author()).or_insert(p.year);
    }
    first
        .into_iter()
        .filter(|&(_, year)| year == t_1st)
        .map(|(a, _)| a)
        .collect()
}

/// Ground-truth citation increment of one author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncrementLabel {
    pub author_id: AuthorId,
    pub s: u64,
}

/// Citations gained between the snapshot before `t` and the snapshot
/// through `t + delta_t` inclusive.
pub fn citation_increment(
    corpus: &Corpus,
    author: AuthorId,
    t: i32,
    delta_t: i32,
) -> IncrementLabel {
    let before = corpus.snapshot(t).citation_count(author);
    let after = corpus.snapshot(t + delta_t + 1).citation_count(author);
    IncrementLabel {
        author_id: author,
        s: after - before,
    }
}

/// [`citation_increment`] for many authors, sharing the two snapshots.
pub fn increment_labels<'a>(
    corpus: &Corpus,
    authors: impl IntoIterator<Item = &'a AuthorId>,
    t: i32,
    delta_t: i32,
) -> BTreeMap<AuthorId, u64> {
    let before = corpus.snapshot(t);
    let after = corpus.snapshot(t + delta_t + 1);
    authors
        .into_iter()
        .map(|&a| (a, after.citation_count(a) - before.citation_count(a)))
        .collect()
}
