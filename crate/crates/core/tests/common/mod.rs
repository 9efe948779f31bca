#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use rising_stars::corpus::{Corpus, PaperRecord};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn paper(id: u64, year: i32, venue: Option<u64>, authors: &[u64], refs: &[u64]) -> PaperRecord {
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

/// Small random corpus: references only point at papers from the same or
/// an earlier year.
pub fn arb_corpus() -> impl Strategy<Value = Corpus> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(2000i32..2010, n),
            prop::collection::vec(prop::collection::vec(1u64..12, 1..4), n),
            prop::collection::vec(prop::option::of(1u64..5), n),
            prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 0..5), n),
        )
            .prop_map(move |(years, authors, venues, refs)| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by_key(|&i| (years[i], i));
                let papers = order
                    .iter()
                    .enumerate()
                    .map(|(pos, &i)| {
                        let earlier: Vec<u64> = (0..pos)
                            .filter(|&q| years[order[q]] <= years[i])
                            .map(|q| q as u64 + 1)
                            .collect();
                        let r: Vec<u64> = if earlier.is_empty() {
                            Vec::new()
                        } else {
                            refs[i].iter().map(|ix| *ix.get(&earlier)).collect()
                        };
                        paper(pos as u64 + 1, years[i], venues[i], &authors[i], &r)
                    })
                    .collect();
                Corpus::from_papers(papers).expect("valid random corpus")
            })
    })
}

/// Average ranks, ties sharing the mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|x| (x - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Citation and paper history engineered for one author: papers per year
/// and citations received from papers of each later year.
pub struct History {
    pub author: u64,
    /// (year, papers first-authored that year)
    pub papers: Vec<(i32, usize)>,
    /// (year, citing papers that year); all cite the author's earliest papers.
    pub citations: Vec<(i32, usize)>,
}

/// Corpus realising each history with otherwise isolated citing authors.
pub fn engineered_corpus(histories: &[History]) -> Corpus {
    let mut papers = Vec::new();
    let mut next_id = 1u64;
    let mut outsider = 9_000_000u64;
    for h in histories {
        let mut own = Vec::new();
        for &(year, n) in &h.papers {
            for _ in 0..n {
                papers.push(paper(next_id, year, Some(1), &[h.author], &[]));
                own.push((year, next_id));
                next_id += 1;
            }
        }
        for &(year, n) in &h.citations {
            let targets: Vec<u64> = own.iter().filter(|(y, _)| *y < year).map(|(_, id)| *id).collect();
            assert!(!targets.is_empty(), "no earlier paper to cite in {year}");
            for k in 0..n {
                outsider += 1;
                papers.push(paper(next_id, year, Some(2), &[outsider], &[targets[k % targets.len()]]));
                next_id += 1;
            }
        }
    }
    Corpus::from_papers(papers).expect("engineered corpus is valid")
}

/// Two authors whose counts at t = 2008 give the case-study rows:
/// 202883 with c = 134/99/56 over t, t-1, t-2 and 12 papers;
/// 210049 with c = 319/225/121 and 6 papers.
pub fn case_study_corpus() -> Corpus {
    engineered_corpus(&[
        History {
            author: 202883,
            papers: vec![(2004, 2), (2006, 3), (2007, 7)],
            citations: vec![(2005, 56), (2006, 43), (2007, 35)],
        },
        History {
            author: 210049,
            papers: vec![(2004, 2), (2006, 2), (2007, 2)],
            citations: vec![(2005, 121), (2006, 104), (2007, 94)],
        },
    ])
}
