mod common;

use common::case_study_corpus;
use rising_stars::corpus::Corpus;
use rising_stars::features::{
    author_features, log_transform, temporal_features, FeatureMatrix, FEATURE_COUNT,
};
use rising_stars::pipeline::{compute_all, PipelineConfig};
use rising_stars::synth::{generate_corpus, SynthConfig};
use rising_stars::Error;

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[test]
fn case_study_rows() {
    let c = case_study_corpus();
    let now = c.snapshot(2008);

    let a = author_features(&now, 202883).unwrap();
    assert_eq!((a[0], a[1]), (12.0, 134.0));
    assert_eq!(round1(a[2]), 11.2);
    let t = temporal_features(&c, 202883, 2008);
    assert_eq!(t, [35.0, 39.0, 7.0, 5.0]);

    let b = author_features(&now, 210049).unwrap();
    assert_eq!((b[0], b[1]), (6.0, 319.0));
    assert_eq!(round1(b[2]), 53.2);
    let t = temporal_features(&c, 210049, 2008);
    assert_eq!(t, [94.0, 99.0, 2.0, 2.0]);
}

fn small_synthetic() -> (Corpus, PipelineConfig) {
    let synth = SynthConfig {
        n_authors: 300,
        seed: 11,
        ..SynthConfig::default()
    };
    let corpus = Corpus::from_reader(generate_corpus(&synth).unwrap().jsonl.as_bytes()).unwrap();
    let mut config = PipelineConfig::default();
    config.topics.iterations = 50;
    (corpus, config)
}

#[test]
fn extracted_matrix_identities() {
    let (corpus, config) = small_synthetic();
    let (_, topics, f) = compute_all(&corpus, &config).unwrap();
    let r = config.topics.r as f64;
    let t = config.cohort.t;
    let snaps = [corpus.snapshot(t), corpus.snapshot(t - 1), corpus.snapshot(t - 2)];
    assert_eq!(f.raw.author_ids, topics.cohort.iter().copied().collect::<Vec<_>>());
    for (a, row) in f.raw.author_ids.iter().zip(&f.raw.rows) {
        let c: Vec<f64> = snaps.iter().map(|s| s.citation_count(*a) as f64).collect();
        let p: Vec<f64> = snaps.iter().map(|s| s.paper_count(*a) as f64).collect();
        assert_eq!(row[0], p[0]);
        assert_eq!(row[1], c[0]);
        assert!((row[2] - c[0] / p[0]).abs() < 1e-12);
        assert!(row[12] >= 0.0 && row[12] <= r.ln() + 1e-12);
        assert!((row[13] - c[0] / r).abs() < 1e-9);
        assert_eq!(row[14], c[0] - c[1]);
        assert_eq!(row[15], (c[0] - c[2]) / 2.0);
        assert_eq!(row[16], p[0] - p[1]);
        assert_eq!(row[17], (p[0] - p[2]) / 2.0);
        assert!(row.iter().all(|x| x.is_finite()));
    }
    for (raw, tr) in f.raw.rows.iter().zip(&f.transformed.rows) {
        for k in 0..FEATURE_COUNT {
            assert!((tr[k] - raw[k].ln_1p()).abs() < 1e-15);
        }
    }
    assert!(matches!(log_transform(f.transformed.clone()), Err(Error::AlreadyTransformed)));
}

#[test]
fn csv_round_trip_of_extracted_matrix() {
    let (corpus, config) = small_synthetic();
    let (_, _, f) = compute_all(&corpus, &config).unwrap();
    let mut buf = Vec::new();
    f.transformed.write_csv(&mut buf).unwrap();
    let back = FeatureMatrix::read_csv(buf.as_slice(), f.transformed.provenance.clone()).unwrap();
    assert!(back.transformed);
    assert_eq!(back.author_ids, f.transformed.author_ids);
    for (a, b) in back.rows.iter().zip(&f.transformed.rows) {
        for k in 0..FEATURE_COUNT {
            assert!((a[k] - b[k]).abs() <= 5e-6 * b[k].abs().max(1e-300));
        }
    }
}
