//! Per-topic evaluation: seeded train/test splits, Pre@k%, method
//! comparison, cross-topic transfer, feature-group ablation and the binned
//! feature/increment correlation table.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureMatrix, FeatureRow, FEATURE_COUNT};
use crate::ranker::{base1_score, base2_score, build_pairs, train_iirl, train_pointwise, IirlModel, TrainConfig};
use crate::util::{derive_seed, format_sig, round_half_up};
use crate::AuthorId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { ratio: 0.5, seed: 0 }
    }
}

/// Seeded partition into `(train, test)`, each sorted ascending.
/// `|train| = round_half_up(ratio * n)`, clamped so both halves are
/// non-empty.
pub fn split(group: &[AuthorId], spec: &SplitSpec) -> Result<(Vec<AuthorId>, Vec<AuthorId>)> {
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio must lie in (0, 1), got {}",
            spec.ratio
        )));
    }
    let n = group.len();
    if n < 2 {
        return Err(Error::GroupTooSmall(n));
    }
    let mut ids = group.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = round_half_up(spec.ratio * ids.len() as f64).clamp(1, ids.len() - 1);
    let mut test = ids.split_off(n_train);
    ids.sort_unstable();
    test.sort_unstable();
    Ok((ids, test))
}

/// `max(1, round_half_up(k% * n))`.
pub fn top_k_size(n: usize, k_percent: f64) -> usize {
    round_half_up(k_percent * n as f64 / 100.0).max(1).min(n)
}

/// Authors holding the `top_k_size` highest scores; ties go to the lower
/// author id.
pub fn top_k_set(scores: &[(AuthorId, f64)], k_percent: f64) -> BTreeSet<AuthorId> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let m = top_k_size(ranked.len(), k_percent);
    ranked.into_iter().take(m).map(|(a, _)| a).collect()
}

/// `|predicted ∩ truth| / |truth|`.
pub fn precision_at_k(predicted: &BTreeSet<AuthorId>, truth: &BTreeSet<AuthorId>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTrueSet);
    }
    let hits = predicted.intersection(truth).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Raw and log-transformed features with increment labels, aligned by row.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub author_ids: Vec<AuthorId>,
    pub raw: Vec<FeatureRow>,
    pub transformed: Vec<FeatureRow>,
    pub labels: Vec<f64>,
    index: HashMap<AuthorId, usize>,
}

impl EvalData {
    pub fn new(raw: &FeatureMatrix, transformed: &FeatureMatrix, labels: &HashMap<AuthorId, f64>) -> Result<Self> {
        if raw.transformed || !transformed.transformed || raw.author_ids != transformed.author_ids {
            return Err(Error::InvalidParameter(
                "expected aligned raw and transformed feature matrices".into(),
            ));
        }
        let labels = raw
            .author_ids
            .iter()
            .map(|a| {
                labels.get(a).copied().ok_or_else(|| {
                    Error::InvalidParameter(format!("no increment label for author {a}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalData {
            author_ids: raw.author_ids.clone(),
            raw: raw.rows.clone(),
            transformed: transformed.rows.clone(),
            labels,
            index: raw.index(),
        })
    }

    pub fn row(&self, author: AuthorId) -> Result<usize> {
        self.index
            .get(&author)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("author {author} has no feature row")))
    }

    pub fn label(&self, author: AuthorId) -> Result<f64> {
        Ok(self.labels[self.row(author)?])
    }
}

/// Column mask: `true` keeps the column, `false` zeroes it.
pub type FeatureMask = [bool; FEATURE_COUNT];

pub const KEEP_ALL: FeatureMask = [true; FEATURE_COUNT];

pub fn apply_mask(row: &FeatureRow, mask: &FeatureMask) -> FeatureRow {
    let mut out = *row;
    for (x, keep) in out.iter_mut().zip(mask) {
        if !keep {
            *x = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Iirl,
    Base1,
    Base2,
    Pointwise,
    /// Scores by the true increment; an upper bound used for sanity checks.
    Oracle,
    /// Scores every author 0; ties resolve by author id.
    Constant,
}

impl Method {
    pub const COMPARED: [Method; 4] = [Method::Iirl, Method::Base1, Method::Base2, Method::Pointwise];

    pub fn name(self) -> &'static str {
        match self {
            Method::Iirl => "IIRL",
            Method::Base1 => "Base-1",
            Method::Base2 => "Base-2",
            Method::Pointwise => "Pointwise",
            Method::Oracle => "Oracle",
            Method::Constant => "Constant",
        }
    }
}

/// Settings shared by every evaluation routine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub split_ratio: f64,
    pub seed: u64,
    pub ks: Vec<f64>,
    pub train: TrainConfig,
    pub ridge: f64,
    #[serde(skip, default = "keep_all")]
    pub mask: FeatureMask,
}

fn keep_all() -> FeatureMask {
    KEEP_ALL
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            split_ratio: 0.5,
            seed: 0,
            ks: vec![10.0, 20.0],
            train: TrainConfig::default(),
            ridge: 1.0,
            mask: KEEP_ALL,
        }
    }
}

impl EvalSettings {
    /// The split of topic `topic`, shared by every method.
    pub fn split_spec(&self, topic: usize) -> SplitSpec {
        SplitSpec {
            ratio: self.split_ratio,
            seed: derive_seed(self.seed, "split", topic as u64),
        }
    }

    pub fn train_config(&self, topic: usize) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.train.seed, "train", topic as u64),
            ..self.train
        }
    }
}

/// A method fitted on one topic's training half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedMethod {
    Iirl { model: IirlModel, mask: Vec<bool> },
    Pointwise { weights: Vec<f64>, mask: Vec<bool> },
    Base1,
    Base2,
    Oracle,
    Constant,
}

impl FittedMethod {
    pub fn fit(method: Method, data: &EvalData, train: &[AuthorId], settings: &EvalSettings, topic: usize) -> Result<Self> {
        let masked_rows = || -> Result<Vec<FeatureRow>> {
            train
                .iter()
                .map(|&a| Ok(apply_mask(&data.transformed[data.row(a)?], &settings.mask)))
                .collect()
        };
        let labels = || -> Result<Vec<f64>> { train.iter().map(|&a| data.label(a)).collect() };
        Ok(match method {
            Method::Iirl => {
                let config = settings.train_config(topic);
                let pairs = build_pairs(&labels()?, config.pair_cap, derive_seed(config.seed, "pairs", 0));
                let model = train_iirl(&pairs, &masked_rows()?, &config)?;
                FittedMethod::Iirl {
                    model,
                    mask: settings.mask.to_vec(),
                }
            }
            Method::Pointwise => FittedMethod::Pointwise {
                weights: train_pointwise(&masked_rows()?, &labels()?, settings.ridge)?,
                mask: settings.mask.to_vec(),
            },
            Method::Base1 => FittedMethod::Base1,
            Method::Base2 => FittedMethod::Base2,
            Method::Oracle => FittedMethod::Oracle,
            Method::Constant => FittedMethod::Constant,
        })
    }

    pub fn score(&self, data: &EvalData, author: AuthorId) -> Result<f64> {
        let i = data.row(author)?;
        let linear = |w: &[f64], mask: &[bool]| -> f64 {
            data.transformed[i]
                .iter()
                .zip(mask)
                .zip(w)
                .map(|((x, &keep), w)| if keep { x * w } else { 0.0 })
                .sum()
        };
        Ok(match self {
            FittedMethod::Iirl { model, mask } => linear(&model.weights, mask),
            FittedMethod::Pointwise { weights, mask } => linear(weights, mask),
            FittedMethod::Base1 => base1_score(&data.raw[i]),
            FittedMethod::Base2 => base2_score(&data.raw[i]),
            FittedMethod::Oracle => data.labels[i],
            FittedMethod::Constant => 0.0,
        })
    }

    pub fn score_all(&self, data: &EvalData, authors: &[AuthorId]) -> Result<Vec<(AuthorId, f64)>> {
        authors.iter().map(|&a| Ok((a, self.score(data, a)?))).collect()
    }
}

/// Pre@k% of one method on one topic's test half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub topic: usize,
    pub method: String,
    pub ks: Vec<f64>,
    pub precision: Vec<f64>,
    pub test_size: usize,
    pub true_sizes: Vec<usize>,
    pub seed: u64,
}

/// Pre@k% of fitted scores against the true increments of `test`.
pub fn score_test(
    fitted: &FittedMethod,
    data: &EvalData,
    test: &[AuthorId],
    ks: &[f64],
) -> Result<(Vec<f64>, Vec<usize>)> {
    let predicted_scores = fitted.score_all(data, test)?;
    let true_scores = test
        .iter()
        .map(|&a| Ok((a, data.label(a)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut precision = Vec::with_capacity(ks.len());
    let mut sizes = Vec::with_capacity(ks.len());
    for &k in ks {
        let truth = top_k_set(&true_scores, k);
        let predicted = top_k_set(&predicted_scores, k);
        precision.push(precision_at_k(&predicted, &truth)?);
        sizes.push(truth.len());
    }
    Ok((precision, sizes))
}

/// Per-topic reports of one method and their macro-average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub ks: Vec<f64>,
    pub topics: Vec<EvalReport>,
    pub macro_average: Vec<f64>,
}

fn macro_average(reports: &[EvalReport], n_k: usize) -> Vec<f64> {
    (0..n_k)
        .map(|ki| {
            if reports.is_empty() {
                0.0
            } else {
                reports.iter().map(|r| r.precision[ki]).sum::<f64>() / reports.len() as f64
            }
        })
        .collect()
}

/// Topics with at least two members, in ascending topic order.
pub fn evaluable_topics(groups: &[BTreeSet<AuthorId>]) -> Vec<usize> {
    (0..groups.len()).filter(|&r| groups[r].len() >= 2).collect()
}

/// Split every topic group, fit `method` on the training half and report
/// Pre@k% on the test half. Groups smaller than two are skipped.
pub fn evaluate_method(
    method: Method,
    groups: &[BTreeSet<AuthorId>],
    data: &EvalData,
    settings: &EvalSettings,
) -> Result<MethodReport> {
    evaluate_with(method, groups, data, settings, |topic, train| {
        FittedMethod::fit(method, data, train, settings, topic)
    })
}

/// [`evaluate_method`] with a caller-supplied fitting step, e.g. one that
/// loads previously trained models.
pub fn evaluate_with(
    method: Method,
    groups: &[BTreeSet<AuthorId>],
    data: &EvalData,
    settings: &EvalSettings,
    mut fit: impl FnMut(usize, &[AuthorId]) -> Result<FittedMethod>,
) -> Result<MethodReport> {
    let mut topics = Vec::new();
    for r in evaluable_topics(groups) {
        let members: Vec<AuthorId> = groups[r].iter().copied().collect();
        let spec = settings.split_spec(r);
        let (train, test) = split(&members, &spec)?;
        let fitted = fit(r, &train)?;
        let (precision, true_sizes) = score_test(&fitted, data, &test, &settings.ks)?;
        topics.push(EvalReport {
            topic: r,
            method: method.name().to_string(),
            ks: settings.ks.clone(),
            precision,
            test_size: test.len(),
            true_sizes,
            seed: spec.seed,
        });
    }
    Ok(MethodReport {
        method: method.name().to_string(),
        ks: settings.ks.clone(),
        macro_average: macro_average(&topics, settings.ks.len()),
        topics,
    })
}

/// Aligned text table: one row per topic, one column per (method, k).
pub fn format_reports(reports: &[MethodReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let mut header = format!("{:<8}", "topic");
    for rep in reports {
        for k in &rep.ks {
            header.push_str(&format!(" {:>16}", format!("{}@{}%", rep.method, format_sig(*k, 6))));
        }
    }
    out.push_str(header.trim_end());
    out.push('\n');
    for (ti, topic) in first.topics.iter().enumerate() {
        let mut line = format!("{:<8}", topic.topic);
        for rep in reports {
            for p in &rep.topics[ti].precision {
                line.push_str(&format!(" {:>16.4}", p));
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    let mut line = format!("{:<8}", "average");
    for rep in reports {
        for p in &rep.macro_average {
            line.push_str(&format!(" {:>16.4}", p));
        }
    }
    out.push_str(&line);
    out.push('\n');
    out
}

/// Own-model versus transferred-model Pre@k% for one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub topic: usize,
    pub own: Vec<f64>,
    pub transfer: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub r_hat: usize,
    pub ks: Vec<f64>,
    pub rows: Vec<TransferRow>,
}

/// Evaluate each topic's test half with its own IIRL model and with the
/// model trained on topic `r_hat`'s training half.
pub fn transfer_experiment(
    groups: &[BTreeSet<AuthorId>],
    r_hat: usize,
    data: &EvalData,
    settings: &EvalSettings,
) -> Result<TransferReport> {
    let topics = evaluable_topics(groups);
    if !topics.contains(&r_hat) {
        return Err(Error::InvalidParameter(format!(
            "r_hat {r_hat} is not an evaluable topic"
        )));
    }
    let mut splits = Vec::new();
    let mut models = Vec::new();
    for &r in &topics {
        let members: Vec<AuthorId> = groups[r].iter().copied().collect();
        let (train, test) = split(&members, &settings.split_spec(r))?;
        models.push(FittedMethod::fit(Method::Iirl, data, &train, settings, r)?);
        splits.push(test);
    }
    let hat = topics.iter().position(|&r| r == r_hat).expect("checked above");
    let mut rows = Vec::new();
    for (i, &r) in topics.iter().enumerate() {
        let (own, _) = score_test(&models[i], data, &splits[i], &settings.ks)?;
        let (transfer, _) = score_test(&models[hat], data, &splits[i], &settings.ks)?;
        rows.push(TransferRow { topic: r, own, transfer });
    }
    Ok(TransferReport {
        r_hat,
        ks: settings.ks.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationMode {
    /// Train on this group only.
    Keep,
    /// Train on every group except this one.
    Drop,
}

impl AblationMode {
    pub fn mask(self, group: FeatureGroup) -> FeatureMask {
        let mut mask = match self {
            AblationMode::Keep => [false; FEATURE_COUNT],
            AblationMode::Drop => KEEP_ALL,
        };
        for c in group.columns() {
            mask[c] = self == AblationMode::Keep;
        }
        mask
    }

    pub fn sign(self) -> char {
        match self {
            AblationMode::Keep => '+',
            AblationMode::Drop => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `All`, or `+Group` / `-Group`.
    pub setting: String,
    pub per_topic: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub k: f64,
    pub topics: Vec<usize>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, setting: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.setting == setting)
    }

    /// `setting,topic_<r>...,average`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting");
        for r in &self.topics {
            let _ = write!(out, ",topic_{r}");
        }
        out.push_str(",average\n");
        for row in &self.rows {
            out.push_str(&row.setting);
            for p in &row.per_topic {
                let _ = write!(out, ",{}", format_sig(*p, 6));
            }
            let _ = writeln!(out, ",{}", format_sig(row.average, 6));
        }
        out
    }
}

/// IIRL Pre@10% with all features and with each listed group kept alone
/// or dropped (columns zeroed), per topic.
pub fn ablation(
    feature_groups: &[FeatureGroup],
    modes: &[AblationMode],
    groups: &[BTreeSet<AuthorId>],
    data: &EvalData,
    settings: &EvalSettings,
) -> Result<AblationTable> {
    let k = 10.0;
    let run = |mask: FeatureMask, setting: String| -> Result<AblationRow> {
        let s = EvalSettings {
            ks: vec![k],
            mask,
            ..settings.clone()
        };
        let rep = evaluate_method(Method::Iirl, groups, data, &s)?;
        Ok(AblationRow {
            setting,
            per_topic: rep.topics.iter().map(|t| t.precision[0]).collect(),
            average: rep.macro_average[0],
        })
    };
    let mut rows = vec![run(settings.mask, "All".to_string())?];
    for &g in feature_groups {
        for &mode in modes {
            let mut mask = mode.mask(g);
            for (m, base) in mask.iter_mut().zip(&settings.mask) {
                *m &= base;
            }
            rows.push(run(mask, format!("{}{}", mode.sign(), g.name()))?);
        }
    }
    Ok(AblationTable {
        k,
        topics: evaluable_topics(groups),
        rows,
    })
}

/// [`ablation`] with groups given by name.
pub fn ablation_by_name(
    names: &[&str],
    modes: &[AblationMode],
    groups: &[BTreeSet<AuthorId>],
    data: &EvalData,
    settings: &EvalSettings,
) -> Result<AblationTable> {
    let parsed = names
        .iter()
        .map(|n| n.parse::<FeatureGroup>())
        .collect::<Result<Vec<_>>>()?;
    ablation(&parsed, modes, groups, data, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub value: f64,
    pub count: usize,
    pub mean_increment: f64,
}

/// Round to two significant digits.
pub fn bucket_value(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(1 - e);
    (x * scale).round() / scale
}

/// Group authors by feature value (bucketed to two significant digits
/// unless every value is an integer) and report the mean increment of
/// every group with more than `min_group` members, by ascending value.
pub fn correlation_report(values: &[f64], labels: &[f64], min_group: usize) -> Result<Vec<CorrelationRow>> {
    if values.len() != labels.len() {
        return Err(Error::Dimension {
            expected: values.len(),
            got: labels.len(),
        });
    }
    let discrete = values.iter().all(|v| v.fract() == 0.0);
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(labels)
        .map(|(&v, &s)| (if discrete { v } else { bucket_value(v) }, s))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows = Vec::new();
    let mut start = 0;
    while start < pairs.len() {
        let value = pairs[start].0;
        let end = start + pairs[start..].partition_point(|p| p.0 == value);
        let count = end - start;
        if count > min_group {
            let total: f64 = pairs[start..end].iter().map(|p| p.1).sum();
            rows.push(CorrelationRow {
                value,
                count,
                mean_increment: total / count as f64,
            });
        }
        start = end;
    }
    Ok(rows)
}

pub fn correlation_csv(rows: &[CorrelationRow]) -> String {
    let mut out = String::from("value,count,mean_increment\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_sig(r.value, 6),
            r.count,
            format_sig(r.mean_increment, 6)
        );
    }
    out
}
