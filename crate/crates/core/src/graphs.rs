//! Author collaboration (ACN), author citation (ACCN) and venue citation
//! (VCCN) networks, plus weighted PageRank.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSnapshot;
use crate::error::{Error, Result};

/// A weighted graph over integer node ids, directed or undirected.
///
/// Undirected edges are kept once, keyed `(min, max)`. Self-loops are never
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    directed: bool,
    nodes: BTreeSet<u64>,
    edges: BTreeMap<(u64, u64), f64>,
}

impl WeightedDigraph {
    pub fn directed() -> Self {
        WeightedDigraph {
            directed: true,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn undirected() -> Self {
        WeightedDigraph {
            directed: false,
            ..Self::directed()
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn add_node(&mut self, node: u64) {
        self.nodes.insert(node);
    }

    /// Add `weight` to edge `src -> dst`. Returns `false` (and stores
    /// nothing) for self-loops.
    pub fn add_weight(&mut self, src: u64, dst: u64, weight: f64) -> bool {
        assert!(weight > 0.0, "edge weights must be positive");
        if src == dst {
            return false;
        }
        self.nodes.insert(src);
        self.nodes.insert(dst);
        *self.edges.entry(self.key(src, dst)).or_insert(0.0) += weight;
        true
    }

    fn key(&self, src: u64, dst: u64) -> (u64, u64) {
        if self.directed {
            (src, dst)
        } else {
            (src.min(dst), src.max(dst))
        }
    }

    pub fn weight(&self, src: u64, dst: u64) -> f64 {
        self.edges.get(&self.key(src, dst)).copied().unwrap_or(0.0)
    }

    pub fn nodes(&self) -> &BTreeSet<u64> {
        &self.nodes
    }

    pub fn contains_node(&self, node: u64) -> bool {
        self.nodes.contains(&node)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Stored edges; undirected edges appear once with `src < dst`.
    pub fn edges(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        self.edges.iter().map(|(&(s, d), &w)| (s, d, w))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Neighbours of `node` ignoring direction, ascending.
    pub fn neighbors(&self, node: u64) -> BTreeSet<u64> {
        self.edges
            .keys()
            .filter_map(|&(s, d)| {
                if s == node {
                    Some(d)
                } else if d == node {
                    Some(s)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Adjacency view, ignoring direction. Cheaper than repeated
    /// [`neighbors`](Self::neighbors) calls when many nodes are queried.
    pub fn neighbor_map(&self) -> BTreeMap<u64, BTreeSet<u64>> {
        let mut map: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        for &(s, d) in self.edges.keys() {
            map.entry(s).or_default().insert(d);
            map.entry(d).or_default().insert(s);
        }
        map
    }

    /// Directed out-edge list; undirected edges are symmetrised.
    fn arcs(&self) -> Vec<(u64, u64, f64)> {
        let mut arcs = Vec::with_capacity(self.edges.len() * 2);
        for (&(s, d), &w) in &self.edges {
            arcs.push((s, d, w));
            if !self.directed {
                arcs.push((d, s, w));
            }
        }
        arcs
    }

    /// Write the edge list as `src,dst,weight` CSV.
    pub fn write_edge_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "src,dst,weight")?;
        for (s, d, w) in self.edges() {
            writeln!(out, "{s},{d},{w}")?;
        }
        Ok(())
    }

    /// Read an edge list written by [`write_edge_csv`](Self::write_edge_csv).
    pub fn read_edge_csv(input: impl BufRead, directed: bool) -> Result<Self> {
        let mut g = if directed {
            Self::directed()
        } else {
            Self::undirected()
        };
        for (i, line) in input.lines().enumerate().skip(1) {
            let bad = |message: String| Error::MalformedLine {
                line: i + 1,
                message,
            };
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", fields.len())));
            }
            let parse_id = |s: &str| s.parse::<u64>().map_err(|e| bad(e.to_string()));
            let w: f64 = fields[2].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            if !(w > 0.0) {
                return Err(bad(format!("non-positive weight {w}")));
            }
            g.add_weight(parse_id(fields[0])?, parse_id(fields[1])?, w);
        }
        Ok(g)
    }

    /// Multiply every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        let mut g = self.clone();
        for w in g.edges.values_mut() {
            *w *= factor;
        }
        g
    }
}

/// Undirected co-authorship network over every author in the snapshot.
/// Edge weight counts joint papers.
pub fn build_acn(snapshot: &CorpusSnapshot<'_>) -> WeightedDigraph {
    let mut g = WeightedDigraph::undirected();
    for p in snapshot.papers() {
        for (i, &a) in p.authors.iter().enumerate() {
            g.add_node(a);
            for &b in &p.authors[i + 1..] {
                g.add_weight(a, b, 1.0);
            }
        }
    }
    g
}

/// Directed author citation network: one unit of weight per
/// (citing paper, cited paper, citing author, cited author) combination,
/// with author self-citations dropped. Nodes are edge endpoints only.
pub fn build_accn(snapshot: &CorpusSnapshot<'_>) -> WeightedDigraph {
    let corpus = snapshot.corpus();
    let mut g = WeightedDigraph::directed();
    for (idx, p) in snapshot.papers().iter().enumerate() {
        for q in snapshot.references(idx) {
            let cited = corpus.paper(q);
            for &a in &p.authors {
                for &b in &cited.authors {
                    g.add_weight(a, b, 1.0);
                }
            }
        }
    }
    g
}

/// Directed venue citation network; venueless papers and same-venue
/// citations are skipped. Nodes are edge endpoints only.
pub fn build_vccn(snapshot: &CorpusSnapshot<'_>) -> WeightedDigraph {
    let corpus = snapshot.corpus();
    let mut g = WeightedDigraph::directed();
    for (idx, p) in snapshot.papers().iter().enumerate() {
        let Some(u) = p.venue else { continue };
        for q in snapshot.references(idx) {
            if let Some(v) = corpus.paper(q).venue {
                g.add_weight(u, v, 1.0);
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageRankConfig {
    pub damping: f64,
    /// L1 convergence threshold.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// PageRank probabilities (not rescaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankScores {
    pub scores: BTreeMap<u64, f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PageRankScores {
    /// Score of `node`, or 0 for nodes outside the graph.
    pub fn get(&self, node: u64) -> f64 {
        self.scores.get(&node).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.scores.values().sum()
    }
}

/// Weighted PageRank by power iteration.
///
/// The transition probability `u -> v` is `w(u,v) / sum_x w(u,x)`; dangling
/// nodes spread their mass uniformly and teleportation is uniform.
pub fn pagerank(graph: &WeightedDigraph, config: &PageRankConfig) -> Result<PageRankScores> {
    if !(config.damping > 0.0 && config.damping < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1), got {}",
            config.damping
        )));
    }
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "tol must be > 0 and max_iter >= 1".into(),
        ));
    }
    let nodes: Vec<u64> = graph.nodes().iter().copied().collect();
    let n = nodes.len();
    if n == 0 {
        return Ok(PageRankScores {
            scores: BTreeMap::new(),
            iterations: 0,
            converged: true,
        });
    }
    let index: BTreeMap<u64, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let arcs = graph.arcs();
    let mut out_weight = vec![0.0; n];
    for &(s, _, w) in &arcs {
        out_weight[index[&s]] += w;
    }
    // Incoming arcs per node as (source index, transition probability).
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(s, d, w) in &arcs {
        let si = index[&s];
        incoming[index[&d]].push((si, w / out_weight[si]));
    }
    let dangling: Vec<usize> = (0..n).filter(|&i| out_weight[i] == 0.0).collect();

    let d = config.damping;
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let dangling_mass: f64 = dangling.iter().map(|&i| x[i]).sum();
        let base = (1.0 - d) / nf + d * dangling_mass / nf;
        for (v, inc) in incoming.iter().enumerate() {
            let flow: f64 = inc.iter().map(|&(u, p)| x[u] * p).sum();
            next[v] = base + d * flow;
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < config.tol {
            converged = true;
            break;
        }
    }
    let total: f64 = x.iter().sum();
    let scores = nodes
        .into_iter()
        .zip(x)
        .map(|(v, s)| (v, s / total))
        .collect();
    Ok(PageRankScores {
        scores,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, PaperRecord};

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

    fn pr(g: &WeightedDigraph) -> PageRankScores {
        pagerank(g, &PageRankConfig::default()).unwrap()
    }

    #[test]
    fn acn_counts_joint_papers() {
        let c = Corpus::from_papers(vec![
            paper(1, 2000, None, &[1, 2], &[]),
            paper(2, 2000, None, &[2, 1], &[]),
            paper(3, 2001, None, &[1, 2, 3], &[]),
            paper(4, 2001, None, &[4], &[]),
        ])
        .unwrap();
        let g = build_acn(&c.snapshot(2002));
        assert_eq!(g.weight(1, 2), 3.0);
        assert_eq!(g.weight(2, 1), 3.0);
        assert_eq!(g.edge_count(), 3);
        assert!(g.contains_node(4), "solo authors are nodes");
    }

    #[test]
    fn solo_corpus_has_no_edges() {
        let c = Corpus::from_papers(vec![paper(1, 2000, None, &[1], &[]), paper(2, 2000, None, &[2], &[])])
            .unwrap();
        let g = build_acn(&c.snapshot(2001));
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn accn_cross_product_and_self_loops() {
        let c = Corpus::from_papers(vec![
            paper(1, 2000, None, &[3], &[]),
            paper(2, 2001, None, &[1, 2], &[1]),
            paper(3, 2001, None, &[3], &[1]),
        ])
        .unwrap();
        let g = build_accn(&c.snapshot(2002));
        assert_eq!(g.weight(1, 3), 1.0);
        assert_eq!(g.weight(2, 3), 1.0);
        assert_eq!(g.edge_count(), 2);
        assert!(!g.contains_node(4));
    }

    #[test]
    fn vccn_skips_same_venue_and_venueless() {
        let c = Corpus::from_papers(vec![
            paper(1, 2000, Some(10), &[1], &[]),
            paper(2, 2001, Some(20), &[2], &[1]),
            paper(3, 2001, Some(10), &[3], &[1]),
            paper(4, 2001, None, &[4], &[1]),
        ])
        .unwrap();
        let g = build_vccn(&c.snapshot(2002));
        assert_eq!(g.weight(20, 10), 1.0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn self_loop_is_not_stored() {
        let mut g = WeightedDigraph::directed();
        assert!(!g.add_weight(1, 1, 1.0));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn pagerank_two_node_symmetric() {
        let mut g = WeightedDigraph::undirected();
        g.add_weight(1, 2, 1.0);
        let s = pr(&g);
        assert!((s.get(1) - 0.5).abs() < 1e-12);
        assert!((s.get(2) * 1e6 - 500000.0).abs() < 1e-6);
    }

    #[test]
    fn pagerank_directed_cycle_is_uniform() {
        let mut g = WeightedDigraph::directed();
        g.add_weight(1, 2, 2.0);
        g.add_weight(2, 3, 2.0);
        g.add_weight(3, 1, 2.0);
        let s = pr(&g);
        for v in 1..=3 {
            assert!((s.get(v) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pagerank_single_arc() {
        // Closed form: x_b = (1 - 0.075) / 1.425, x_a = 1 - x_b.
        let mut g = WeightedDigraph::directed();
        g.add_weight(1, 2, 1.0);
        let s = pr(&g);
        let xb = 0.925 / 1.425;
        assert!((s.get(2) - xb).abs() < 1e-10);
        assert!((s.get(1) - (1.0 - xb)).abs() < 1e-10);
        assert!((s.get(1) - 0.351).abs() < 1e-3);
    }

    #[test]
    fn pagerank_empty_graph() {
        let s = pr(&WeightedDigraph::directed());
        assert!(s.scores.is_empty());
    }

    #[test]
    fn pagerank_rejects_bad_damping() {
        let cfg = PageRankConfig {
            damping: 1.0,
            ..Default::default()
        };
        assert!(pagerank(&WeightedDigraph::directed(), &cfg).is_err());
    }

    #[test]
    fn edge_csv_round_trip() {
        let mut g = WeightedDigraph::undirected();
        g.add_weight(5, 2, 3.0);
        g.add_weight(1, 2, 1.0);
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "src,dst,weight\n1,2,1\n2,5,3\n");
        let back = WeightedDigraph::read_edge_csv(buf.as_slice(), false).unwrap();
        assert_eq!(back, g);
    }
}
