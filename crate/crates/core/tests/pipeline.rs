use std::fs;
use std::path::{Path, PathBuf};

use rising_stars::pipeline::{
    parse_stages, read_manifest, report, run_pipeline, PipelineConfig, Stage,
};
use rising_stars::synth::{generate_corpus, SynthConfig};
use rising_stars::Error;

const BUNDLED: &str = include_str!("../../../configs/synthetic.toml");

fn no_env() -> Vec<(String, String)> {
    Vec::new()
}

fn parse(text: &str) -> rising_stars::Result<PipelineConfig> {
    PipelineConfig::parse(text, Path::new("/base"), no_env())
}

#[test]
fn empty_config_takes_defaults() {
    let c = parse("").unwrap();
    assert_eq!((c.cohort.t, c.cohort.t_1st, c.cohort.delta_t), (2008, 2006, 4));
    assert_eq!((c.topics.r, c.topics.m), (10, 3));
    assert_eq!((c.train.alpha, c.train.lambda_w), (0.01, 0.01));
    assert_eq!(c.eval.k, vec![10.0, 20.0]);
    assert_eq!((c.eval.split_ratio, c.eval.r_hat), (0.5, 1));
    assert_eq!(c.paths.corpus, PathBuf::from("/base/corpus.jsonl"));
    assert!(c.synth.is_none());
}

#[test]
fn keys_override_defaults() {
    let c = parse("[cohort]\ndelta_t = 4\nt = 2010\n[eval]\nk = [5, 12.5]\n").unwrap();
    assert_eq!(c.cohort.delta_t, 4);
    assert_eq!(c.cohort.t, 2010);
    assert_eq!(c.eval.k, vec![5.0, 12.5]);
    let c = parse("[paths]\ncorpus = \"/abs/c.jsonl\"\nworkdir = \"w\"\n").unwrap();
    assert_eq!(c.paths.corpus, PathBuf::from("/abs/c.jsonl"));
    assert_eq!(c.paths.workdir, PathBuf::from("/base/w"));
}

#[test]
fn unknown_keys_and_wrong_types_are_named() {
    let err = parse("[cohrot]\nt = 2008\n").unwrap_err();
    assert_eq!(err.to_string(), "unknown key: cohrot");
    let err = parse("[cohort]\ndelta = 4\n").unwrap_err();
    assert_eq!(err.to_string(), "unknown key: cohort.delta");
    match parse("[topics]\nr = \"ten\"\n").unwrap_err() {
        Error::KeyType { key, .. } => assert_eq!(key, "topics.r"),
        e => panic!("{e}"),
    }
    match parse("[train]\nalpha = [1]\n").unwrap_err() {
        Error::KeyType { key, .. } => assert_eq!(key, "train.alpha"),
        e => panic!("{e}"),
    }
}

#[test]
fn environment_overrides_file() {
    let env = vec![
        ("RSTARS_TOPICS__R".to_string(), "4".to_string()),
        ("RSTARS_PATHS__WORKDIR".to_string(), "/tmp/elsewhere".to_string()),
        ("UNRELATED".to_string(), "1".to_string()),
    ];
    let c = PipelineConfig::parse("[topics]\nr = 7\n", Path::new("/base"), env).unwrap();
    assert_eq!(c.topics.r, 4);
    assert_eq!(c.paths.workdir, PathBuf::from("/tmp/elsewhere"));
    let bad = vec![("RSTARS_TOPICS__RR".to_string(), "4".to_string())];
    assert!(PipelineConfig::parse("", Path::new("/base"), bad).is_err());
}

#[test]
fn seed_override_and_hash() {
    let mut a = parse(BUNDLED).unwrap();
    let b = parse(BUNDLED).unwrap();
    assert_eq!(a.hash("x"), b.hash("x"));
    assert_ne!(a.hash("x"), a.hash("y"));
    a.override_seed(99);
    assert_eq!((a.topics.seed, a.train.seed, a.eval.seed), (99, 99, 99));
    assert_eq!(a.synth.as_ref().unwrap().seed, 99);
    assert_ne!(a.hash("x"), b.hash("x"));
    // Paths do not enter the hash.
    let moved = PipelineConfig::parse(BUNDLED, Path::new("/other"), no_env()).unwrap();
    assert_eq!(moved.hash("x"), b.hash("x"));
    // The canonical echo parses back to the same config.
    let back = PipelineConfig::parse(&b.to_toml(), Path::new("/"), no_env()).unwrap();
    assert_eq!(back, b);
}

#[test]
fn stage_lists() {
    assert_eq!(parse_stages("all").unwrap(), Stage::ALL.to_vec());
    assert_eq!(
        parse_stages("evaluate,graphs").unwrap(),
        vec![Stage::Graphs, Stage::Evaluate]
    );
    assert!(matches!(parse_stages("graphs,bogus"), Err(Error::UnknownStage(_))));
}

/// Small config writing into `dir`, with its corpus generated.
fn small_run(dir: &Path) -> PipelineConfig {
    let text = r#"
[paths]
corpus = "corpus.jsonl"
workdir = "work"
[topics]
r = 4
m = 2
iterations = 40
[synth]
n_authors = 300
seed = 2
"#;
    let config = PipelineConfig::parse(text, dir, no_env()).unwrap();
    generate_corpus(config.synth.as_ref().unwrap())
        .unwrap()
        .write(&config.paths.corpus, None)
        .unwrap();
    config
}

#[test]
fn missing_prerequisites_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_run(dir.path());
    let err = run_pipeline(&config, &[Stage::Evaluate]).unwrap_err();
    assert!(err.to_string().contains("run stage: features"), "{err}");

    run_pipeline(&config, &[Stage::Graphs]).unwrap();
    let err = run_pipeline(&config, &[Stage::Features]).unwrap_err();
    assert!(err.to_string().contains("run stage: topics"), "{err}");
}

#[test]
fn stale_artifacts_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_run(dir.path());
    run_pipeline(&config, &[Stage::Graphs, Stage::Topics, Stage::Features]).unwrap();
    let mut changed = config.clone();
    changed.topics.seed = 5;
    assert!(matches!(
        run_pipeline(&changed, &[Stage::Train]),
        Err(Error::StaleArtifact { .. })
    ));

    // A tampered artifact is refused as well.
    let raw = config.paths.workdir.join("features/raw.csv");
    let mut text = fs::read_to_string(&raw).unwrap();
    text.push('\n');
    fs::write(&raw, text).unwrap();
    assert!(matches!(
        run_pipeline(&config, &[Stage::Train]),
        Err(Error::StaleArtifact { .. })
    ));
}

#[test]
fn report_needs_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(report(dir.path()), Err(Error::Workdir(_))));
    let config = small_run(dir.path());
    run_pipeline(&config, &[Stage::Graphs]).unwrap();
    assert!(matches!(
        report(&config.paths.workdir),
        Err(Error::MissingArtifact { stage: "evaluate", .. })
    ));
}

#[test]
fn small_run_reports_recomputed_averages() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_run(dir.path());
    let entries = run_pipeline(&config, &Stage::ALL).unwrap();
    assert_eq!(entries.len(), Stage::ALL.len());
    let summary = report(&config.paths.workdir).unwrap();
    let names: Vec<&str> = summary.evaluation.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["IIRL", "Base-1", "Base-2", "Pointwise"]);
    for rep in &summary.evaluation {
        for ki in 0..rep.ks.len() {
            let mean = rep.topics.iter().map(|t| t.precision[ki]).sum::<f64>() / rep.topics.len() as f64;
            assert!((rep.macro_average[ki] - mean).abs() < 1e-12);
        }
    }
    let text = summary.to_text();
    assert!(text.contains("== Pre@k% by topic =="));
    assert!(text.contains("[cohort]"));
    for d in ["graphs", "topics", "features", "models", "reports"] {
        assert!(config.paths.workdir.join(d).is_dir(), "{d}");
    }

    // Rerunning one stage leaves its artifacts byte-identical.
    let before = read_manifest(&config.paths.workdir).unwrap();
    run_pipeline(&config, &[Stage::Train]).unwrap();
    let after = read_manifest(&config.paths.workdir).unwrap();
    let outputs = |m: &[rising_stars::pipeline::ManifestEntry]| {
        m.iter().map(|e| (e.stage.clone(), e.outputs.clone())).collect::<Vec<_>>()
    };
    assert_eq!(outputs(&before), outputs(&after));
}

fn strip_durations(manifest: &str) -> String {
    manifest
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("duration_ms");
            format!("{v}\n")
        })
        .collect()
}

fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from golden file");
}

#[test]
fn bundled_config_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig::parse(BUNDLED, &dir.path().join("configs"), no_env()).unwrap();
    let synth: &SynthConfig = config.synth.as_ref().unwrap();
    assert_eq!(synth.n_authors, 2000);
    generate_corpus(synth).unwrap().write(&config.paths.corpus, None).unwrap();
    run_pipeline(&config, &Stage::ALL).unwrap();
    let manifest = fs::read_to_string(config.paths.workdir.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), Stage::ALL.len());
    check_golden("manifest.jsonl", &strip_durations(&manifest));
    report(&config.paths.workdir).unwrap();
    let summary = fs::read_to_string(config.paths.workdir.join("reports/summary.txt")).unwrap();
    check_golden("summary.txt", &summary);
}
