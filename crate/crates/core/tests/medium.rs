mod common;

use common::binomial_sigma;
use fogcache::cache::NodeId;
use fogcache::netsim::{exact_complete_loss, markov_loss_bound, BroadcastMedium, DelayModel, DelaySampling};
use fogcache::time::{SimDuration, SimTime};
use proptest::prelude::*;

fn medium(n: u32, p: f64, seed: u64) -> BroadcastMedium {
    BroadcastMedium::seeded(n, p, DelayModel::default(), DelaySampling::PerDelivery, seed).unwrap()
}

#[test]
fn delivery_rate_is_binomial() {
    let (n, p, broadcasts) = (50u32, 0.3, 10_000u64);
    let mut m = medium(n, p, 11);
    let mut delivered = 0u64;
    for i in 0..broadcasts {
        delivered += m.broadcast(SimTime::ZERO, NodeId((i % u64::from(n)) as u32), 64).deliveries.len() as u64;
    }
    let trials = broadcasts * u64::from(n - 1);
    let rate = delivered as f64 / trials as f64;
    let sigma = binomial_sigma(1.0 - p, trials);
    assert!((rate - 0.7).abs() <= 3.0 * sigma, "rate {rate}, 3 sigma {}", 3.0 * sigma);
}

fn complete_loss_frequency(n: u32, p: f64, broadcasts: u64, seed: u64) -> f64 {
    let mut m = medium(n, p, seed);
    let mut complete = 0u64;
    for _ in 0..broadcasts {
        if m.broadcast(SimTime::ZERO, NodeId(0), 16).deliveries.is_empty() {
            complete += 1;
        }
    }
    complete as f64 / broadcasts as f64
}

#[test]
fn complete_loss_matches_exact_probability() {
    let broadcasts = 100_000;
    for (n, p) in [(2u32, 0.5), (3, 0.3), (4, 0.5), (5, 0.3), (10, 0.5)] {
        let q = exact_complete_loss(p, n - 1);
        let observed = complete_loss_frequency(n, p, broadcasts, u64::from(n));
        let sigma = binomial_sigma(q, broadcasts);
        assert!((observed - q).abs() <= 3.0 * sigma, "n={n} p={p}: observed {observed}, exact {q}");
        assert!(observed <= markov_loss_bound(p, n).unwrap() + 3.0 * sigma);
    }
}

#[test]
fn forty_nine_receivers_are_never_all_lost() {
    let observed = complete_loss_frequency(50, 0.3, 100_000, 5);
    assert_eq!(observed, 0.0);
    assert!(exact_complete_loss(0.3, 49) < 1e-25);
}

#[test]
fn per_link_rtt_is_twice_the_slowest_link() {
    let delay = DelayModel::Uniform { min_s: 0.001, max_s: 0.020 };
    let n = 8;
    let m = BroadcastMedium::seeded(n, 0.0, delay, DelaySampling::PerLink, 3).unwrap();
    let mut slowest = SimDuration::ZERO;
    for k in 1..n {
        let d = m.link_delay(NodeId(0), NodeId(k)).unwrap();
        assert_eq!(Some(d), m.link_delay(NodeId(k), NodeId(0)));
        slowest = slowest.max(d);
    }
    // a ping out and a reply back over the same symmetric link
    let mut m = m;
    let out = m.broadcast(SimTime::ZERO, NodeId(0), 13);
    let rtt = out
        .deliveries
        .iter()
        .map(|d| d.at + m.link_delay(d.to, NodeId(0)).unwrap())
        .max()
        .unwrap();
    assert_eq!(rtt - SimTime::ZERO, slowest + slowest);
}

proptest! {
    #[test]
    fn lan_bytes_charge_every_receiver_regardless_of_loss(
        n in 2u32..30,
        p in 0.0f64..=1.0,
        sizes in prop::collection::vec(1usize..2_000, 1..40),
        seed in any::<u64>(),
    ) {
        let mut m = medium(n, p, seed);
        let mut expected = 0u64;
        for (i, &size) in sizes.iter().enumerate() {
            let out = m.broadcast(SimTime::from_millis(i as u64), NodeId(i as u32 % n), size);
            prop_assert_eq!(out.deliveries.len() + out.lost.len(), (n - 1) as usize);
            prop_assert!(out.deliveries.iter().all(|d| d.to != NodeId(i as u32 % n)));
            expected += size as u64 * u64::from(n - 1);
        }
        prop_assert_eq!(m.lan_bytes(), expected);
    }

    #[test]
    fn identical_seeds_give_identical_outcomes(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut a = medium(7, p, seed);
        let mut b = medium(7, p, seed);
        for i in 0..20u64 {
            let (x, y) = (a.broadcast(SimTime::from_millis(i), NodeId(1), 10), b.broadcast(SimTime::from_millis(i), NodeId(1), 10));
            prop_assert_eq!(x, y);
        }
    }
}
