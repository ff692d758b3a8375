mod common;

use common::binomial_sigma;
use fogcache::backing::CallKind;
use fogcache::config::SweepAxis;
use fogcache::experiment::{execute, sweep, WriteOptions};
use fogcache::fog::Mode;
use fogcache::metrics::{report, to_csv_string, EventKind, MissRatioRow, Source};
use fogcache::netsim::exact_complete_loss;

#[test]
fn counters_agree_with_a_recount_of_a_large_log() {
    let cfg = common::config(50, 0.1, 400.0);
    let r = execute(&cfg, Mode::Cached).unwrap();
    assert!(r.output.log.len() >= 1_000_000, "only {} events", r.output.log.len());
    assert_eq!(r.output.log.counters(), &r.output.log.recount());
}

#[test]
fn every_store_call_is_charged_once_on_the_wan() {
    let mut cfg = common::config(10, 0.2, 300.0);
    cfg.fog.cache_capacity = 10;
    cfg.workload.recency_window = Some(200);
    let r = execute(&cfg, Mode::Cached).unwrap();
    let counters = r.output.log.counters();
    let calls = r.output.store.call_log();
    assert!(counters.count("ReadMiss") > 0);
    assert_eq!(counters.count("BytesWAN"), calls.len() as u64);
    let rejected = calls.iter().filter(|c| !c.accepted).count() as u64;
    assert_eq!(counters.count("StoreRateLimited"), rejected);
    let reads = calls.iter().filter(|c| c.accepted && c.kind == CallKind::Read).count() as u64;
    assert_eq!(counters.count("StoreReadAll"), reads);
    assert_eq!(counters.bytes_of("BytesWAN"), r.totals.wan_bytes);
    // nodes never touch the WAN directly
    for e in r.output.log.events() {
        if matches!(e.kind, EventKind::BytesWan) {
            assert_eq!(e.source, Source::Router);
        }
    }
}

#[test]
fn lan_charges_are_whole_multiples_of_the_receiver_count() {
    let cfg = common::config(7, 0.4, 200.0);
    let r = execute(&cfg, Mode::Cached).unwrap();
    for e in r.output.log.events() {
        if matches!(e.kind, EventKind::BytesLan) {
            assert_eq!(e.size_bytes.unwrap() % 6, 0);
        }
    }
}

#[test]
fn complete_announce_loss_tracks_the_exact_probability() {
    for (n, p) in [(10u32, 0.3), (5, 0.5), (3, 0.3)] {
        let mut cfg = common::config(n, p, 0.0);
        cfg.workload.duration_s = (10_000 / n + 1) as f64;
        let r = execute(&cfg, Mode::Cached).unwrap();
        let t = &r.totals;
        assert!(t.announces_sent >= 10_000);
        let q = exact_complete_loss(p, n - 1);
        let sigma = binomial_sigma(q, t.announces_sent);
        assert!(
            (t.complete_loss_rate - q).abs() <= 3.0 * sigma,
            "n={n} p={p}: {} vs {q}",
            t.complete_loss_rate
        );
    }
}

#[test]
fn missratio_sweep_writes_one_row_per_point() {
    let mut cfg = common::config(5, 0.1, 150.0);
    cfg.fog.cache_capacity = 20;
    cfg.sweep = vec![SweepAxis {
        parameter: "fog.n_nodes".into(),
        values: [5, 10, 20, 50].into_iter().map(toml::Value::Integer).collect(),
    }];
    let dir = tempfile::tempdir().unwrap();
    let results = sweep(&cfg, dir.path(), WriteOptions { event_log: false }).unwrap();
    let text = std::fs::read_to_string(dir.path().join("missratio.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["n_nodes", "miss_ratio", "backing_fraction"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for (row, r) in rows.iter().zip(&results) {
        let want = r.missratio_row();
        assert_eq!(row[0].parse::<u32>().unwrap(), want.n_nodes);
        assert!((row[1].parse::<f64>().unwrap() - want.miss_ratio).abs() <= 1e-6);
        assert!((row[2].parse::<f64>().unwrap() - want.backing_fraction).abs() <= 1e-6);
    }
    let ns: Vec<u32> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(ns, [5, 10, 20, 50]);
}

#[test]
fn csv_round_trip_is_within_a_millionth() {
    let rows: Vec<MissRatioRow> = (0..50)
        .map(|i| MissRatioRow { n_nodes: i, miss_ratio: 1.0 / (f64::from(i) + 3.0), backing_fraction: f64::from(i).sqrt() / 7.0 })
        .collect();
    let text = to_csv_string(&rows);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (rec, want) in rdr.records().map(Result::unwrap).zip(&rows) {
        assert_eq!(rec[0].parse::<u32>().unwrap(), want.n_nodes);
        assert!((rec[1].parse::<f64>().unwrap() - want.miss_ratio).abs() <= 1e-6);
        assert!((rec[2].parse::<f64>().unwrap() - want.backing_fraction).abs() <= 1e-6);
    }
}

#[test]
fn steady_state_window_excludes_warm_up() {
    let cfg = common::config(10, 0.0, 200.0);
    let r = execute(&cfg, Mode::Cached).unwrap();
    assert_eq!(r.report.window_start_s, 40.0);
    assert_eq!(r.report.window_end_s, 200.0);
    let whole = report(&r.output.log, None).unwrap();
    assert_eq!((whole.generates, whole.wan_bytes, whole.lan_bytes), (r.totals.generates, r.totals.wan_bytes, r.totals.lan_bytes));
    assert_eq!(r.totals.window_end_s, r.output.end.as_secs_f64());
    assert!(r.report.generates < r.totals.generates);
    // writes at phase + k s for k < 200, so k = 40..=199 fall in the window
    assert_eq!(r.report.generates, 10 * 160);
}
