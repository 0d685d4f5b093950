use std::path::{Path, PathBuf};

use prescient::cli::{
    cmd_score, cmd_synth, cmd_train, read_scores, Checkpoint, RunConfig, Strategy, SynthRequest, CHECKPOINT_FILE,
    CONFIG_FILE, SCORES_FILE,
};
use prescient::data::{load_csv, make_windows, normalize, LoadOptions, SynthKind};
use prescient::scoring::forward_score;

fn synth(dir: &Path, seed: u64) -> PathBuf {
    cmd_synth(&SynthRequest {
        kind: SynthKind::SineSpike,
        length: 600,
        train_length: None,
        features: 3,
        rate: 0.03,
        seed,
        out: dir.join("data"),
    })
    .unwrap()
}

fn config(manifest: &Path, out: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.data.manifest = Some(manifest.to_path_buf());
    cfg.train.epochs = 1;
    cfg.score.strategy = Strategy::Topk;
    cfg.run.out = Some(out.to_path_buf());
    cfg.set_seed(seed);
    cfg
}

pub fn same_seed_gives_identical_checkpoints_and_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), 5);
    let runs: Vec<(Vec<u8>, Vec<u8>)> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let cfg = config(&manifest, &out, 11);
            let trained = cmd_train(&cfg, |_, _| {}).unwrap();
            let scored = cmd_score(&cfg, &trained.dir.join(CHECKPOINT_FILE), &out.join(SCORES_FILE)).unwrap();
            assert_eq!(scored.path, out.join(SCORES_FILE));
            (std::fs::read(out.join(CHECKPOINT_FILE)).unwrap(), std::fs::read(out.join(SCORES_FILE)).unwrap())
        })
        .collect();
    assert_eq!(runs[0].0, runs[1].0, "checkpoints differ");
    assert_eq!(runs[0].1, runs[1].1, "score files differ");

    let other = config(&manifest, &tmp.path().join("c"), 12);
    cmd_train(&other, |_, _| {}).unwrap();
    assert_ne!(std::fs::read(tmp.path().join("c").join(CHECKPOINT_FILE)).unwrap(), runs[0].0);
}

pub fn saved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), 6);
    let first = tmp.path().join("first");
    let cfg = config(&manifest, &first, 3);
    cmd_train(&cfg, |_, _| {}).unwrap();
    cmd_score(&cfg, &first.join(CHECKPOINT_FILE), &first.join(SCORES_FILE)).unwrap();

    let mut again = RunConfig::load(&first.join(CONFIG_FILE)).unwrap();
    let second = tmp.path().join("second");
    again.run.out = Some(second.clone());
    assert_eq!(RunConfig { run: cfg.run.clone(), ..again.clone() }, cfg);
    cmd_train(&again, |_, _| {}).unwrap();
    cmd_score(&again, &second.join(CHECKPOINT_FILE), &second.join(SCORES_FILE)).unwrap();
    for file in [CHECKPOINT_FILE, SCORES_FILE] {
        assert_eq!(std::fs::read(first.join(file)).unwrap(), std::fs::read(second.join(file)).unwrap(), "{file}");
    }
}

pub fn loaded_checkpoint_reproduces_scores_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(tmp.path(), 7);
    let out = tmp.path().join("run");
    let cfg = config(&manifest, &out, 4);
    let trained = cmd_train(&cfg, |_, _| {}).unwrap();
    let loaded = Checkpoint::load(&out.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(loaded, trained.checkpoint);
    for (_, t) in loaded.params.iter() {
        assert!(t.data().iter().all(|&v| v as f32 as f64 == v));
    }

    let test_path = tmp.path().join("data").join("test.csv");
    let raw = load_csv(&test_path, None, &LoadOptions::default()).unwrap();
    let score = |ck: &Checkpoint| {
        let series = normalize(&raw, &ck.schema).unwrap();
        let spec = &ck.spec;
        let windows = make_windows(&series, spec.window, spec.horizon, spec.direction).unwrap();
        forward_score(&ck.model().unwrap(), &ck.params, &windows).unwrap().scores
    };
    let (a, b) = (score(&trained.checkpoint), score(&loaded));
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());

    cmd_score(&cfg, &out.join(CHECKPOINT_FILE), &out.join(SCORES_FILE)).unwrap();
    let rows = read_scores(&out.join(SCORES_FILE)).unwrap();
    assert_eq!(rows.len(), a.len());
    for (row, s) in rows.iter().zip(&a) {
        assert_eq!(row.score, s.ln_1p());
    }
}
