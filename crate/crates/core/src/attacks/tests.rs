use super::*;
use crate::bounds::OptimizeInput;

fn cfg(
    n: u32,
    m: u32,
    omega: u32,
    l_max: u32,
    k: u64,
    b: u32,
    s0: f64,
) -> crate::bounds::SchemeConfig {
    OptimizeInput::new(n, m, omega, l_max, 64, 1e-10).scheme(k, b, s0)
}

#[test]
fn wilson_interval_examples() {
    let (lo, hi) = wilson_interval(0, 100, WILSON_Z);
    assert_eq!(lo, 0.0);
    assert!((hi - 0.0622).abs() < 1e-3, "{hi}");
    let (lo, hi) = wilson_interval(50, 100, WILSON_Z);
    assert!(
        (lo - 0.37528).abs() < 1e-4 && (hi - 0.62472).abs() < 1e-4,
        "{lo} {hi}"
    );
    assert_eq!(wilson_interval(0, 0, WILSON_Z), (0.0, 1.0));
}

#[test]
fn trial_report_pass_rule() {
    let r = TrialReport::new("x", 10_000, 0, 1e-3);
    assert!(r.pass && r.observable && r.slack == 0.0);
    let r = TrialReport::new("x", 10_000, 500, 1e-3);
    assert!(!r.pass);
    // within the sampling slack of the bound
    let r = TrialReport::new("x", 10_000, 12, 1e-3);
    assert!(r.pass);
    assert!(!TrialReport::new("x", 100, 0, 1e-3).observable);
}

#[test]
fn trial_rng_depends_on_seed_and_trial_only() {
    use rand::Rng;
    let a: u64 = trial_rng(3, 5).gen();
    let b: u64 = trial_rng(3, 5).gen();
    let c: u64 = trial_rng(3, 6).gen();
    let d: u64 = trial_rng(4, 5).gen();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, d);
}

#[test]
fn view_enforces_omega_and_collects_keys() {
    use crate::protocol::{distribute, wire::DirectChannel, Honest, Params};
    use std::collections::BTreeSet;
    let p = Params::new(&cfg(4, 0, 1, 1, 5, 3, 0.3)).unwrap();
    let d = distribute(&p, 1, &mut DirectChannel, &mut Honest).unwrap();
    assert!(AdversaryView::new(&d, &BTreeSet::from([1, 2]), vec![], false).is_err());
    assert!(AdversaryView::new(&d, &BTreeSet::from([5]), vec![], true).is_err());
    let v = AdversaryView::new(&d, &BTreeSet::from([2]), vec![], false).unwrap();
    let known = v.known_keys();
    // own slice (N k) plus the k keys received from each other source
    assert_eq!(known.len(), 20 + 3 * 5);
    for (&r, key) in &known {
        assert_eq!(d.signing_key.key(r), key);
    }
    let block = v.known_block(2, 3).unwrap();
    assert_eq!(block, d.shares[2].block(2).indices.as_slice());
    assert!(v.known_block(1, 3).is_none());
}

#[test]
fn forgery_with_all_keys_always_succeeds() {
    let c = cfg(4, 0, 1, 1, 20, 3, 0.3);
    let opts = ForgeryOptions {
        know_all: true,
        ..Default::default()
    };
    let r = attack_forgery(&c, &opts, 50, 1).unwrap();
    assert_eq!(r.successes, 50);
}

#[test]
fn forgery_is_rare_at_small_parameters() {
    let c = cfg(4, 0, 1, 1, 20, 3, 0.3);
    let r = attack_forgery(&c, &ForgeryOptions::default(), 2000, 2).unwrap();
    assert!(r.pass, "{r:?}");
    // deterministic in the seed
    let again = attack_forgery(&c, &ForgeryOptions::default(), 2000, 2).unwrap();
    assert_eq!(r, again);
}

#[test]
fn forgery_succeeds_with_weak_tags() {
    // b = 2 and a level-0 threshold near one half: random guesses pass
    let c = cfg(4, 0, 1, 1, 4, 2, 0.45);
    let r = attack_forgery(&c, &ForgeryOptions::default(), 2000, 3).unwrap();
    assert!(r.successes > 0);
    assert!(r.pass, "{r:?}");
}

#[test]
fn nontransfer_trial_spoils_victim_blocks() {
    use crate::protocol::Params;
    let c = cfg(7, 0, 2, 1, 30, 4, 0.6);
    let p = Params::new(&c).unwrap();
    let opts = NontransferOptions {
        coalition: Coalition::Signerless,
        mismatches_per_block: Some(0.0),
        ..Default::default()
    };
    let o = nontransfer_trial(&p, &opts, 5, 0).unwrap();
    assert_eq!(o.coalition.len(), 2);
    assert!(!o.coalition.contains(&o.victim));
    assert_eq!(o.levels.len(), 5);
    // everyone else still sees all 7 blocks intact
    for (&i, &l) in &o.levels {
        if i != o.victim {
            assert_eq!(l, 1);
        }
    }
    // the victim lost exactly the two coalition blocks: 5 > 2(1 + 1) still
    assert_eq!(o.levels[&o.victim], 1);
}

#[test]
fn nontransfer_and_repudiation_within_bounds() {
    let c = cfg(4, 0, 1, 1, 30, 4, 0.6);
    for coalition in [Coalition::WithSigner, Coalition::Signerless] {
        let opts = NontransferOptions {
            coalition,
            ..Default::default()
        };
        let r = attack_nontransfer(&c, &opts, 1000, 9).unwrap();
        assert!(r.pass, "{r:?}");
        let rep = attack_repudiation(&c, &opts, 1000, 9).unwrap();
        assert!(rep.report.pass, "{rep:?}");
        assert_eq!(rep.outside_nontransfer, 0);
        assert_eq!(rep.nontransfer, r);
    }
}

#[test]
fn counter_exhaustion_never_blocks_honest_external() {
    let c = cfg(5, 3, 1, 2, 6, 4, 0.5);
    let r = attack_counter_exhaustion(&c, 20, 4).unwrap();
    assert!(r.attempts > 0);
    assert_eq!(r.limit, 4);
    assert_eq!(r.max_counter, 3);
    assert!(r.pass(), "{r:?}");
}

#[test]
fn acceptability_small_networks() {
    for (n, l) in [(4, 1), (5, 2), (6, 1)] {
        let r = attack_acceptability(n, l, 3).unwrap();
        assert!(r.pass(), "{r:?}");
    }
    let r = attack_acceptability(4, 1, 1).unwrap();
    assert_eq!(r.omega_max, 1);
    // 4 coalitions, 3 honest targets each
    assert_eq!(r.patterns, 4 * 8);
}

#[test]
fn broadcast_checks_hold() {
    let r = broadcast_exhaustive(4).unwrap();
    assert!(r.pass(), "{r:?}");
    let r = broadcast_randomized(7, 2, 2, 200, 1).unwrap();
    assert!(r.pass(), "{r:?}");
    assert_eq!(r.runs, 200);
}

#[test]
fn family_check_small() {
    let r = as2u_check(9, 2, 0, 100, 1).unwrap();
    assert_eq!((r.s, r.y), (1, 8));
    assert_eq!(r.messages, 512);
    assert!(r.pass(), "{r:?}");
}
