mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fogcache::config::SweepAxis;
use fogcache::experiment::{execute, run, sweep, WriteOptions};
use fogcache::fog::Mode;

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap());
        }
    }
    files
}

#[test]
fn identical_seeds_write_identical_files() {
    let mut cfg = common::config(12, 0.2, 200.0);
    cfg.fog.cache_capacity = 15;
    cfg.workload.update_fraction = 0.1;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&cfg, a.path(), WriteOptions::default()).unwrap();
    let rb = run(&cfg, b.path(), WriteOptions::default()).unwrap();
    assert_eq!(ra.event_digest_hex(), rb.event_digest_hex());
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert!(fa.contains_key("events.log"));
    assert_eq!(fa, fb);
}

#[test]
fn different_seeds_diverge() {
    let cfg = common::config(12, 0.2, 200.0);
    let other = fogcache::config::ExperimentConfig { seed: cfg.seed + 1, ..cfg.clone() };
    let a = execute(&cfg, Mode::Cached).unwrap();
    let b = execute(&other, Mode::Cached).unwrap();
    assert_ne!(a.event_digest_hex(), b.event_digest_hex());
}

#[test]
fn parallel_sweep_matches_serial_runs() {
    let mut cfg = common::config(5, 0.3, 150.0);
    cfg.fog.cache_capacity = 10;
    cfg.sweep = vec![SweepAxis {
        parameter: "fog.n_nodes".into(),
        values: [3, 6, 9].into_iter().map(toml::Value::Integer).collect(),
    }];
    let dir = tempfile::tempdir().unwrap();
    let swept = sweep(&cfg, dir.path(), WriteOptions::default()).unwrap();
    for (point, parallel) in cfg.sweep_points().unwrap().iter().zip(&swept) {
        let serial = execute(&point.config, Mode::Cached).unwrap();
        assert_eq!(serial.event_digest_hex(), parallel.event_digest_hex());
        let log = fs::read(dir.path().join(format!("point_{:03}", point.index)).join("events.log")).unwrap();
        let mut expected = Vec::new();
        serial.output.log.write_to(&mut expected).unwrap();
        assert_eq!(log, expected);
    }
}
