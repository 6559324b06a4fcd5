use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rasterkit_core::geometry::{SE3Pose, Vec3};
use rasterkit_core::io::{audit, parse_log, read_manifest, run_batch, sample_log, to_canonical_json, RunConfig, SceneLog};
use rasterkit_core::Error;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn bundled_sample_is_canonical() {
    let text = fs::read_to_string(data("sample_log.json")).unwrap();
    assert_eq!(text, to_canonical_json(&sample_log()));
    assert_eq!(parse_log(&text).unwrap(), sample_log());
}

#[test]
fn bundled_config_loads() {
    let cfg = RunConfig::load(&data("sample_config.toml")).unwrap();
    assert_eq!(cfg.fraction_perturbed, 0.5);
}

/// The sample log with every track pose jittered by arbitrary finite offsets.
fn jittered(offsets: &[(f64, f64, f64)]) -> SceneLog {
    let mut log = sample_log();
    let mut k = 0;
    for tr in &mut log.tracks {
        for s in &mut tr.trajectory.samples {
            let (dx, dy, yaw) = offsets[k % offsets.len()];
            k += 1;
            s.pose = SE3Pose::from_yaw(yaw, Vec3::new(dx, dy, 0.0)).compose(&s.pose);
        }
    }
    log
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn canonical_json_round_trips(offsets in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, -3.2..3.2f64), 1..40)) {
        let log = jittered(&offsets);
        let text = to_canonical_json(&log);
        let back = parse_log(&text).unwrap();
        prop_assert_eq!(&back, &log);
        prop_assert_eq!(to_canonical_json(&back), text);
    }
}

#[test]
fn schema_errors_carry_a_location() {
    let text = fs::read_to_string(data("sample_log.json")).unwrap();
    let broken = text.replacen("\"ego_id\": \"ego\"", "\"ego_id\": 12", 1);
    match parse_log(&broken) {
        Err(Error::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let mut log = sample_log();
    log.timestamps.swap(3, 4);
    match parse_log(&to_canonical_json(&log)) {
        Err(Error::Invariant { path, .. }) => assert!(path.contains("timestamps"), "{path}"),
        other => panic!("{other:?}"),
    }
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn batch_output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig {
        seed: 7,
        fraction_perturbed: 0.5,
        ..Default::default()
    };
    let logs = [sample_log()];
    let mut trees = Vec::new();
    for (name, workers) in [("a", 1), ("b", 8), ("c", 1)] {
        let cfg = RunConfig {
            out: dir.path().join(name),
            workers: Some(workers),
            ..base.clone()
        };
        let s = run_batch(&cfg, &logs).unwrap();
        assert!(s.jobs > 0 && s.images > 0);
        audit(&cfg.out).unwrap();
        trees.push(tree(&cfg.out));
    }
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0], trees[2]);

    let (header, entries) = read_manifest(&dir.path().join("a/manifest.jsonl")).unwrap();
    assert_eq!(header.jobs, entries.len());
    assert_eq!(header.config["seed"], 7);

    // Rerunning into an existing output replaces it.
    let again = RunConfig {
        out: dir.path().join("a"),
        workers: Some(2),
        ..base
    };
    run_batch(&again, &logs).unwrap();
    assert_eq!(tree(&again.out), trees[0]);
}
