//! `simulate`: one scenario through the network simulator.

use std::collections::BTreeSet;

use anyhow::{Context, Result};
use uss_core::netsim::{self, LinkKind, Outcome, RunOutput, Scenario};

use crate::table::{fmt_bits, pass_fail, Table};
use crate::Common;

pub fn scheme_line(cfg: &uss_core::bounds::SchemeConfig) -> String {
    format!(
        "N={} M={} omega={} l_max={} a={} eps_tot={:e} k={} b={} s0={:.6}",
        cfg.n, cfg.m, cfg.omega, cfg.l_max, cfg.a, cfg.eps_tot, cfg.k, cfg.b, cfg.s0
    )
}

fn verdict_table(out: &RunOutput) -> Table {
    let r = &out.report;
    let messages: BTreeSet<usize> = r
        .verdicts
        .values()
        .flat_map(|m| m.keys().copied())
        .collect();
    let mut headers = vec!["node".to_string()];
    headers.extend(messages.iter().map(|m| format!("msg {m}")));
    let mut t = Table {
        title: format!(
            "verification levels (l_max={}; - = not received, none = no quorum)",
            r.scheme.l_max
        ),
        headers,
        rows: Vec::new(),
    };
    for (node, per_msg) in &r.verdicts {
        let mut row = vec![node.to_string()];
        for m in &messages {
            row.push(match per_msg.get(m) {
                Some(Some(l)) => l.to_string(),
                Some(None) => "none".into(),
                None => "-".into(),
            });
        }
        t.push(row);
    }
    t
}

fn block_table(out: &RunOutput) -> Table {
    let r = &out.report;
    let mut t = Table::new(
        "block lists and failed-request counters",
        &["node", "blocked", "counters"],
    );
    let nodes: BTreeSet<_> = r
        .block_lists
        .keys()
        .chain(r.counters.keys())
        .copied()
        .collect();
    for node in nodes {
        let blocked = r
            .block_lists
            .get(&node)
            .map(|l| {
                l.iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        let counters = r
            .counters
            .get(&node)
            .map(|c| {
                c.iter()
                    .map(|(e, v)| format!("E{e}:{v}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        t.push(vec![node.to_string(), or_dash(blocked), or_dash(counters)]);
    }
    t
}

fn or_dash(s: String) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s
    }
}

fn ledger_table(out: &RunOutput) -> Table {
    let r = &out.report;
    let mut t = Table::new(
        format!(
            "key ledger; expected OTP debits L_sr={} ({}) per signer link, L_rr={} ({}) per recipient pair",
            r.consumption.l_sr,
            fmt_bits(r.consumption.l_sr),
            r.consumption.l_rr,
            fmt_bits(r.consumption.l_rr)
        ),
        &["link", "expected_otp", "otp", "auth", "balance", "match"],
    );
    for (link, l) in r.ledger.iter() {
        let expected = match link.kind() {
            LinkKind::SignerRecipient => r.consumption.l_sr,
            LinkKind::RecipientRecipient => r.consumption.l_rr,
            LinkKind::External => 0,
        };
        t.push(vec![
            link.to_string(),
            expected.to_string(),
            l.otp.to_string(),
            l.auth.to_string(),
            l.balance().to_string(),
            if l.otp == expected { "yes" } else { "no" }.into(),
        ]);
    }
    t
}

/// Runs the scenario and prints what happened. With every node honest and
/// the run completed, the ledger must match the expected consumption and no
/// verification may fail; anything else is an invariant failure.
pub fn cmd_simulate(scenario: &Scenario, common: &Common) -> Result<bool> {
    let out = netsim::run(scenario)?;
    let r = &out.report;
    let all_honest = scenario.behaviors.values().all(|b| b.is_honest());
    let ledger_ok = r.ledger_matches_consumption();
    let verdicts_ok = r
        .verdicts
        .values()
        .flat_map(|m| m.values())
        .all(|v| v.is_some_and(|l| l >= 0));

    println!("scenario seed={} {}", scenario.seed, scheme_line(&r.scheme));
    if let Some(bits) = r.auth_bits {
        println!(
            "authentication: {bits} bits per message (eps_auth={:e})",
            scenario.auth.eps_auth
        );
    }
    let faulty: Vec<String> = scenario
        .behaviors
        .iter()
        .filter(|(_, b)| !b.is_honest())
        .map(|(n, b)| format!("{n}={b:?}"))
        .collect();
    println!(
        "faulty: {}",
        if faulty.is_empty() {
            "none".into()
        } else {
            faulty.join(", ")
        }
    );
    match &r.outcome {
        Outcome::Completed => println!("outcome: completed"),
        Outcome::Aborted { reason } => println!("outcome: aborted ({reason})"),
    }
    println!();
    for t in [verdict_table(&out), block_table(&out), ledger_table(&out)] {
        print!("{}", t.render(common.format));
        println!();
    }

    let top = r.scheme.l_max as i32;
    let mut pass = true;
    match &r.outcome {
        Outcome::Aborted { .. } => {
            println!("summary: run aborted cleanly; ledger shows the debits made before the stop")
        }
        Outcome::Completed => {
            let levels = if r.all_verdicts_at(top) {
                "all verdicts l_max".to_string()
            } else if verdicts_ok {
                "every verification accepted".to_string()
            } else {
                "some verification failed".to_string()
            };
            let ledger = if ledger_ok {
                "ledger matches L_sr/L_rr exactly"
            } else {
                "ledger differs from L_sr/L_rr"
            };
            println!("summary: {levels}; {ledger}");
            if all_honest {
                pass = ledger_ok && verdicts_ok;
                println!("honest invariants: {}", pass_fail(pass));
            }
        }
    }

    if let Some(dir) = &common.out {
        std::fs::write(dir.join("trace.jsonl"), out.trace.to_jsonl()).context("writing trace")?;
        let report = serde_json::to_string_pretty(&out.report).context("serializing report")?;
        std::fs::write(dir.join("report.json"), report + "\n").context("writing report")?;
        ledger_table(&out).write_csv(&dir.join("ledger.csv"))?;
    }
    Ok(pass)
}
