use super::*;
use crate::bounds::{key_consumption, SchemeConfig};
use crate::protocol::{MvExt, MvOutcome};

fn small(n: u32, m: u32, omega: u32, l_max: u32, k: u64) -> SchemeConfig {
    SchemeConfig {
        n,
        m,
        omega,
        l_max,
        a: 64,
        eps_tot: 1e-10,
        k,
        b: 4,
        s0: 0.5,
    }
}

fn link(s: &str) -> LinkId {
    s.parse().unwrap()
}

#[test]
fn link_ids_are_unordered() {
    assert_eq!(link("P2-P0"), link("P0-P2"));
    assert_eq!(link("P0-P2").to_string(), "P0-P2");
    assert_eq!(link("P1-P0").kind(), LinkKind::SignerRecipient);
    assert_eq!(link("P1-P3").kind(), LinkKind::RecipientRecipient);
    assert_eq!(link("E1-P3").kind(), LinkKind::External);
    assert!("P1".parse::<LinkId>().is_err());
}

#[test]
fn topology_examples() {
    let t = build_topology(&TopologySpec::complete(4, 0, 1, 1)).unwrap();
    assert_eq!(t.links.len(), 4 + 6);

    let mut spec = TopologySpec::complete(4, 1, 1, 1);
    spec.external_links = vec![vec![1, 2]];
    assert!(matches!(
        build_topology(&spec),
        Err(NetsimError::Topology(_))
    ));
    spec.external_links = vec![vec![1, 2, 4]];
    let t = build_topology(&spec).unwrap();
    assert_eq!(t.connected_internals(1), vec![1, 2, 4]);

    // omega < N / (2 + l_max) is strict: 2 < 6/3 fails
    assert!(matches!(
        build_topology(&TopologySpec::complete(6, 0, 2, 1)),
        Err(NetsimError::Bounds(_))
    ));
    assert!(build_topology(&TopologySpec::complete(7, 0, 2, 1)).is_ok());
    assert!(matches!(
        build_topology(&TopologySpec::complete(7, 0, 2, 2)),
        Err(NetsimError::Bounds(_))
    ));

    let mut spec = TopologySpec::complete(4, 2, 1, 1);
    spec.extra_links = vec![
        (NodeId::External(1), NodeId::External(2)),
        (NodeId::Signer, NodeId::External(1)),
    ];
    let t = build_topology(&spec).unwrap();
    assert!(t.has_link(NodeId::External(2), NodeId::External(1)));
    spec.extra_links = vec![(NodeId::Internal(1), NodeId::Internal(2))];
    assert!(build_topology(&spec).is_err());
}

#[test]
fn refill_examples() {
    let mut t = build_topology(&TopologySpec::complete(4, 0, 1, 1)).unwrap();
    refill(&mut t, 1000.0, 0.0, 1.0);
    assert!(t.ledger.iter().all(|(_, l)| l.refilled == 1000));

    let gamma = 0.05;
    let mut spec = TopologySpec::complete(4, 0, 1, 1);
    spec.sr_km = std::f64::consts::LN_2 / gamma;
    spec.rr_km = spec.sr_km;
    let mut t = build_topology(&spec).unwrap();
    refill(&mut t, 1000.0, gamma, 1.0);
    assert!(t.ledger.iter().all(|(_, l)| l.refilled == 500));
}

#[test]
fn fractional_refills_accumulate() {
    let mut t = build_topology(&TopologySpec::complete(4, 0, 1, 1)).unwrap();
    for _ in 0..10 {
        refill(&mut t, 0.25, 0.0, 1.0);
    }
    assert!(t.ledger.iter().all(|(_, l)| l.refilled == 2));
}

#[test]
fn ledger_conservation_and_purposes() {
    let mut ledger = KeyLedger::default();
    let sr = link("P0-P1");
    let ext = link("P1-E1");
    ledger.open(sr);
    ledger.open(ext);
    ledger.credit(sr, 100.0);
    ledger.credit(ext, 100.0);
    assert_eq!(ledger.debit(sr, Purpose::Otp, 60).unwrap(), 0);
    assert_eq!(ledger.debit(sr, Purpose::Auth, 30).unwrap(), 60);
    assert!(matches!(
        ledger.debit(sr, Purpose::Otp, 11),
        Err(ProtocolError::PoolExhausted {
            needed: 11,
            available: 10,
            ..
        })
    ));
    let l = ledger.get(sr).unwrap();
    assert_eq!((l.refilled, l.otp, l.auth, l.balance()), (100, 60, 30, 10));
    assert!(ledger.debit(ext, Purpose::Otp, 1).is_err());
    assert!(ledger.debit(ext, Purpose::Auth, 47).is_ok());
    assert!(ledger.debit(link("P2-P3"), Purpose::Auth, 1).is_err());
}

#[test]
fn pads_are_random_access() {
    let pads = PadSource::new(3);
    let l = link("P1-P2");
    let whole = pads.pad(l, 0, 200);
    assert_eq!(pads.pad(l, 37, 100), whole[37..137].to_bitvec());
    assert_ne!(pads.pad(link("P1-P3"), 0, 200), whole);
    assert_ne!(PadSource::new(4).pad(l, 0, 200), whole);
}

#[test]
fn honest_run_matches_consumption() {
    for (n, m, omega, l_max) in [(4, 1, 1, 1), (5, 2, 1, 2)] {
        let cfg = small(n, m, omega, l_max, 6);
        let out = run(&Scenario::honest(&cfg, 11)).unwrap();
        let r = &out.report;
        assert_eq!(r.outcome, Outcome::Completed);
        assert!(r.ledger_matches_consumption());
        let cons = key_consumption(&cfg).unwrap();
        let total: u64 = r.ledger.iter().map(|(_, l)| l.otp).sum();
        assert_eq!(total, cons.l_tot);
        assert!(r.ledger.iter().all(|(_, l)| l.auth == 0));
        assert_eq!(r.verdicts.len(), (n + m) as usize);
        assert!(r.all_verdicts_at(l_max as i32));
        assert!(r.block_lists.values().all(|b| b.is_empty()));
        assert!(r.counters.values().all(|c| c.is_empty()));
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = small(4, 1, 1, 1, 4);
    let a = run(&Scenario::honest(&cfg, 5)).unwrap();
    let b = run(&Scenario::honest(&cfg, 5)).unwrap();
    assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
    let c = run(&Scenario::honest(&cfg, 6)).unwrap();
    assert_ne!(a.trace.to_jsonl(), c.trace.to_jsonl());
}

#[test]
fn otp_ciphertext_length_equals_debit() {
    let cfg = small(4, 0, 1, 1, 3);
    let out = run(&Scenario::honest(&cfg, 1)).unwrap();
    let mut per_link: std::collections::BTreeMap<LinkId, u64> = Default::default();
    for r in &out.trace.records {
        if let TraceRecord::Otp {
            from,
            to,
            bits,
            ciphertext,
            ..
        } = r
        {
            assert_eq!(ciphertext.len(), bits.div_ceil(8) * 2);
            *per_link.entry(LinkId::new(*from, *to)).or_default() += *bits as u64;
        }
    }
    for (l, ledger) in out.report.ledger.iter() {
        assert_eq!(per_link[l], ledger.otp);
    }
}

#[test]
fn rubbish_keys_leave_verdicts_and_ledger_unchanged() {
    let cfg = small(4, 1, 1, 1, 6);
    let honest = run(&Scenario::honest(&cfg, 2)).unwrap();
    let mut sc = Scenario::honest(&cfg, 2);
    sc.behaviors
        .insert(NodeId::Internal(4), Behavior::RubbishKeys);
    // P4 still receives the signer's package but its verdict is not checked
    let out = run(&sc).unwrap();
    for node in [1, 2, 3] {
        assert_eq!(out.report.verdicts[&NodeId::Internal(node)][&0], Some(1));
    }
    assert_eq!(out.report.verdicts[&NodeId::External(1)][&0], Some(1));
    assert_eq!(out.report.ledger, honest.report.ledger);
}

#[test]
fn starved_pool_aborts_cleanly() {
    let cfg = small(4, 0, 1, 1, 6);
    let mut sc = Scenario::honest(&cfg, 3);
    sc.topology.initial_pool_bits = 100;
    let out = run(&sc).unwrap();
    assert!(matches!(out.report.outcome, Outcome::Aborted { .. }));
    assert!(out
        .trace
        .records
        .iter()
        .rev()
        .find(|r| matches!(r, TraceRecord::Abort { .. }))
        .is_some());
    assert!(out
        .report
        .ledger
        .iter()
        .all(|(_, l)| l.refilled >= l.debits()));
}

#[test]
fn auth_accounting_charges_every_message() {
    let cfg = small(4, 1, 1, 1, 4);
    let mut sc = Scenario::honest(&cfg, 4);
    sc.auth.enabled = true;
    let out = run(&sc).unwrap();
    assert_eq!(out.report.auth_bits, Some(47));
    let mut messages: std::collections::BTreeMap<LinkId, u64> = Default::default();
    for r in &out.trace.records {
        match r {
            TraceRecord::Otp { from, to, .. } | TraceRecord::Send { from, to, .. } => {
                *messages.entry(LinkId::new(*from, *to)).or_default() += 1;
            }
            _ => {}
        }
    }
    for (l, ledger) in out.report.ledger.iter() {
        assert_eq!(
            ledger.auth,
            47 * messages.get(l).copied().unwrap_or(0),
            "{l}"
        );
    }
    assert!(out.report.ledger_matches_consumption());
}

fn vote_scenario() -> Scenario {
    let cfg = small(4, 1, 1, 1, 6);
    let mut sc = Scenario::honest(&cfg, 9);
    sc.topology.extra_links = vec![(NodeId::Signer, NodeId::External(1))];
    sc.auth.enabled = true;
    // the first 2Nk tags cover blocks 1 and 2 of every recipient
    sc.behaviors
        .insert(NodeId::Signer, Behavior::FlipTags { count: 48 });
    sc.steps = vec![
        Step::Send {
            from: NodeId::Signer,
            to: NodeId::Internal(1),
            message: 0,
        },
        Step::Send {
            from: NodeId::Internal(1),
            to: NodeId::Internal(2),
            message: 0,
        },
        Step::Vote {
            initiator: 1,
            message: 0,
        },
        Step::Send {
            from: NodeId::Signer,
            to: NodeId::External(1),
            message: 0,
        },
        Step::MvLookup { ext: 1, message: 0 },
    ];
    sc
}

#[test]
fn level_zero_copy_goes_to_vote() {
    let out = run(&vote_scenario()).unwrap();
    let recs = &out.trace.records;
    assert_eq!(out.report.verdicts[&NodeId::Internal(1)][&0], Some(0));
    assert!(recs.iter().any(|r| matches!(
        r,
        TraceRecord::Skipped {
            node: NodeId::Internal(1),
            ..
        }
    )));
    let outcomes: Vec<_> = recs
        .iter()
        .filter_map(|r| match r {
            TraceRecord::MvOutcome { outcome, flag, .. } => Some((*outcome, *flag)),
            _ => None,
        })
        .collect();
    assert_eq!(outcomes, vec![(MvOutcome::Accepted, false); 4]);
    assert!(recs.iter().any(|r| matches!(
        r,
        TraceRecord::MvLookup {
            result: MvExt::Accepted,
            ..
        }
    )));
    // OM(1) on 4 nodes uses every link in both rounds
    let rounds = recs
        .iter()
        .filter(|r| matches!(r, TraceRecord::MvMessage { .. }))
        .count();
    assert_eq!(rounds, 45);
    // two key chunks, then round 2 of the pair broadcast and both vote rounds
    let l = out.report.ledger.get("P3-P4".parse().unwrap()).unwrap();
    assert_eq!(l.auth, 47 * (2 + 3));
}

#[test]
fn ineligible_vote_is_skipped() {
    let cfg = small(4, 0, 1, 1, 4);
    let mut sc = Scenario::honest(&cfg, 9);
    sc.steps.push(Step::Vote {
        initiator: 2,
        message: 0,
    });
    let out = run(&sc).unwrap();
    assert!(out
        .trace
        .records
        .iter()
        .any(|r| matches!(r, TraceRecord::Skipped { reason, .. } if reason.contains("level 0"))));
}

#[test]
fn silent_responder_still_leaves_quorum() {
    let cfg = small(4, 1, 1, 1, 6);
    let mut sc = Scenario::honest(&cfg, 10);
    sc.behaviors.insert(NodeId::Internal(2), Behavior::Silent);
    sc.steps = vec![
        Step::Send {
            from: NodeId::Signer,
            to: NodeId::Internal(4),
            message: 0,
        },
        Step::Send {
            from: NodeId::Internal(4),
            to: NodeId::External(1),
            message: 0,
        },
    ];
    let out = run(&sc).unwrap();
    let ext = out
        .trace
        .records
        .iter()
        .find_map(|r| match r {
            TraceRecord::ExtVerdict {
                responses, l_ver, ..
            } => Some((responses.clone(), *l_ver)),
            _ => None,
        })
        .unwrap();
    assert_eq!(ext, (vec![1], Some(1)));
}

#[test]
fn bad_packages_raise_counters() {
    let cfg = small(6, 1, 1, 3, 6);
    let mut sc = Scenario::honest(&cfg, 12);
    sc.topology.extra_links = vec![(NodeId::Signer, NodeId::External(1))];
    sc.behaviors
        .insert(NodeId::Signer, Behavior::FlipTags { count: usize::MAX });
    sc.steps = vec![Step::Send {
        from: NodeId::Signer,
        to: NodeId::External(1),
        message: 0,
    }];
    let out = run(&sc).unwrap();
    for i in 1..=3 {
        assert_eq!(out.report.counters[&NodeId::Internal(i)][&1], 1);
    }
    assert_eq!(out.report.verdicts[&NodeId::External(1)][&0], Some(-1));
    assert_eq!(
        out.report.block_lists[&NodeId::External(1)],
        vec![NodeId::Signer]
    );
}

#[test]
fn scenario_files_parse_with_overrides() {
    let text = r#"
seed = 7

[scheme]
n = 4
m = 1
omega = 1
l_max = 1
k = 5
b = 4
s0 = 0.5

[topology]
external_links = [[1, 2, 3]]

[behaviors]
P3 = { strategy = "rubbish_keys" }
P2 = { strategy = "report_level", level = -1 }

[[messages]]
text = "hello"

[[steps]]
action = "send"
from = "P0"
to = "P1"
message = 0
"#;
    let sc = Scenario::from_toml(text).unwrap();
    assert_eq!(sc.behavior(NodeId::Internal(3)), Behavior::RubbishKeys);
    assert_eq!(
        sc.behavior(NodeId::Internal(2)),
        Behavior::ReportLevel { level: -1 }
    );
    assert_eq!(sc.behavior(NodeId::Internal(1)), Behavior::Honest);
    let over = Scenario::from_toml_with_overrides(
        text,
        &[
            "scheme.k=9".into(),
            "seed=3".into(),
            "auth.enabled=true".into(),
        ],
    )
    .unwrap();
    assert_eq!(
        (over.scheme.k, over.seed, over.auth.enabled),
        (Some(9), 3, true)
    );
    assert!(Scenario::from_toml_with_overrides(text, &["scheme.kk=9".into()]).is_err());
    assert!(Scenario::from_toml_with_overrides(text, &["scheme".into()]).is_err());
    assert!(run(&sc).is_ok());
}

#[test]
fn missing_parameters_are_optimized() {
    let section = SchemeSection {
        n: 4,
        m: 0,
        omega: 1,
        l_max: 1,
        a: 64,
        eps_tot: 1e-3,
        k: None,
        b: Some(3),
        s0: None,
    };
    let cfg = section.resolve().unwrap();
    assert_eq!(cfg.b, 3);
    assert!(crate::bounds::forgery_bound(&cfg).unwrap() <= 5e-4);
}

#[test]
fn throughput_matches_rate_model() {
    let cfg = small(4, 0, 1, 1, 3);
    let mut spec = TopologySpec::complete(4, 0, 1, 1);
    spec.sr_km = 20.0;
    spec.rr_km = 5.0;
    let gamma = crate::bounds::db_per_km_to_gamma(0.2);
    let r = throughput(&cfg, &spec, 1e5, gamma, 20.0, 0.05, 1).unwrap();
    assert!(r.completions > 100);
    assert!(
        (r.measured_rate / r.predicted_rate - 1.0).abs() < 0.02,
        "{r:?}"
    );
}
