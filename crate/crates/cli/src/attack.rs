//! `attack`: adversarial strategies against the scheme.

use std::path::Path;

use anyhow::{bail, Result};
use clap::ValueEnum;
use uss_core::attacks::{
    attack_acceptability, attack_counter_exhaustion, attack_forgery, attack_nontransfer,
    attack_repudiation, broadcast_exhaustive, broadcast_randomized, Coalition, ForgeryOptions,
    NontransferOptions, TrialReport,
};
use uss_core::netsim::Scenario;

use crate::simulate::scheme_line;
use crate::table::{fmt_prob, pass_fail, Table};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Strategy {
    /// Coalition plus malicious external nodes forge a signature.
    Forgery,
    /// Midpoint tag corruption, with and without a dishonest signer.
    Nontransfer,
    /// The same corruption followed by a majority vote.
    Repudiation,
    /// Bad delegated-verification requests against an honest external node.
    Counter,
    /// Every rubbish-key pattern during distribution.
    Acceptability,
    /// Faulty relays in the broadcast primitive.
    Broadcast,
}

impl Strategy {
    pub const DEFAULT: [Strategy; 4] = [
        Strategy::Forgery,
        Strategy::Nontransfer,
        Strategy::Repudiation,
        Strategy::Counter,
    ];

    /// Scheme used when no configuration file is given.
    fn default_scheme(self) -> &'static str {
        match self {
            Strategy::Forgery => {
                "[scheme]\nn = 4\nm = 0\nomega = 1\nl_max = 1\na = 64\nk = 20\nb = 3\ns0 = 0.3\n"
            }
            Strategy::Nontransfer | Strategy::Repudiation => {
                "[scheme]\nn = 4\nm = 0\nomega = 1\nl_max = 1\na = 64\nk = 30\nb = 4\ns0 = 0.6\n"
            }
            Strategy::Counter => {
                "[scheme]\nn = 5\nm = 3\nomega = 1\nl_max = 2\na = 64\nk = 12\nb = 4\ns0 = 0.5\n"
            }
            Strategy::Acceptability => {
                "[scheme]\nn = 7\nomega = 2\nl_max = 1\nk = 3\nb = 4\ns0 = 0.5\n"
            }
            Strategy::Broadcast => {
                "[scheme]\nn = 4\nomega = 1\nl_max = 1\nk = 3\nb = 4\ns0 = 0.5\n"
            }
        }
    }

    fn default_trials(self) -> u64 {
        match self {
            Strategy::Counter => 100,
            _ => 10_000,
        }
    }
}

struct Row {
    strategy: String,
    parameters: String,
    trials: u64,
    successes: Option<u64>,
    report: Option<TrialReport>,
    detail: String,
    pass: bool,
}

impl Row {
    fn from_trials(r: TrialReport, parameters: &str, detail: String) -> Self {
        Self {
            strategy: r.strategy.clone(),
            parameters: parameters.to_string(),
            trials: r.trials,
            successes: Some(r.successes),
            pass: r.pass,
            detail: if r.observable {
                detail
            } else {
                format!("bound not observable at this trial count; {detail}")
            },
            report: Some(r),
        }
    }
}

fn run_one(
    strategy: Strategy,
    scenario: &Scenario,
    trials: Option<u64>,
    seed: u64,
) -> Result<Vec<Row>> {
    let trials = trials.unwrap_or(strategy.default_trials());
    let s = &scenario.scheme;
    let mut rows = Vec::new();
    match strategy {
        Strategy::Forgery => {
            let cfg = scenario.scheme.resolve()?;
            let r = attack_forgery(&cfg, &ForgeryOptions::default(), trials, seed)?;
            rows.push(Row::from_trials(r, &scheme_line(&cfg), String::new()));
        }
        Strategy::Nontransfer => {
            let cfg = scenario.scheme.resolve()?;
            for coalition in [Coalition::WithSigner, Coalition::Signerless] {
                let opts = NontransferOptions {
                    coalition,
                    ..Default::default()
                };
                let r = attack_nontransfer(&cfg, &opts, trials, seed)?;
                rows.push(Row::from_trials(r, &scheme_line(&cfg), String::new()));
            }
        }
        Strategy::Repudiation => {
            let cfg = scenario.scheme.resolve()?;
            for coalition in [Coalition::WithSigner, Coalition::Signerless] {
                let opts = NontransferOptions {
                    coalition,
                    ..Default::default()
                };
                let r = attack_repudiation(&cfg, &opts, trials, seed)?;
                let detail = format!(
                    "votes held {}, successes outside non-transferability failures {}",
                    r.votes_held, r.outside_nontransfer
                );
                let mut row = Row::from_trials(r.report, &scheme_line(&cfg), detail);
                row.pass &= r.outside_nontransfer == 0;
                rows.push(row);
            }
        }
        Strategy::Counter => {
            let cfg = scenario.scheme.resolve()?;
            let r = attack_counter_exhaustion(&cfg, trials, seed)?;
            rows.push(Row {
                strategy: "counter exhaustion".into(),
                parameters: scheme_line(&cfg),
                trials: r.trials,
                successes: None,
                report: None,
                detail: format!(
                    "bad requests {}, max counter {} (limit {}), honest blocked {}, replay counted {}, genuine accepted {}",
                    r.attempts, r.max_counter, r.limit, r.honest_blocked, r.replay_counted, r.genuine_accepted
                ),
                pass: r.pass(),
            });
        }
        Strategy::Acceptability => {
            let r = attack_acceptability(s.n, s.l_max, seed)?;
            let show = |p: &Option<uss_core::attacks::RubbishPattern>| match p {
                Some(p) => format!("coalition {:?} -> level {}", p.coalition, p.min_level),
                None => "none".into(),
            };
            rows.push(Row {
                strategy: "acceptability".into(),
                parameters: format!("N={} l_max={} omega_max={}", r.n, r.l_max, r.omega_max),
                trials: r.patterns,
                successes: None,
                report: None,
                detail: format!(
                    "violation within tolerance: {}; beyond tolerance: {}",
                    show(&r.violation),
                    show(&r.beyond)
                ),
                pass: r.pass(),
            });
        }
        Strategy::Broadcast => {
            let (r, how) = if s.omega <= 1 {
                (broadcast_exhaustive(s.n)?, "exhaustive binary")
            } else {
                (
                    broadcast_randomized(s.n, s.omega, 2, trials, seed)?,
                    "randomized binary",
                )
            };
            rows.push(Row {
                strategy: format!("broadcast ({how})"),
                parameters: format!("N={} omega={}", r.n, r.omega),
                trials: r.runs,
                successes: None,
                report: None,
                detail: format!(
                    "agreement violations {}, validity violations {}",
                    r.agreement_violations, r.validity_violations
                ),
                pass: r.pass(),
            });
        }
    }
    Ok(rows)
}

/// Each strategy runs against the scheme in `config` if given, otherwise a
/// small scheme of its own where the bound is observable.
pub fn cmd_attack(strategies: &[Strategy], config: Option<&Path>, common: &Common) -> Result<bool> {
    let mut strategies = if strategies.is_empty() {
        Strategy::DEFAULT.to_vec()
    } else {
        strategies.to_vec()
    };
    strategies.sort();
    strategies.dedup();
    let seed = common.seed.unwrap_or(crate::DEFAULT_SEED);
    if common.trials == Some(0) {
        bail!("--trials must be positive");
    }

    let mut rows = Vec::new();
    for strategy in strategies {
        let scenario = match config {
            Some(path) => Scenario::load(path, &common.overrides)?,
            None => {
                Scenario::from_toml_with_overrides(strategy.default_scheme(), &common.overrides)?
            }
        };
        rows.extend(run_one(strategy, &scenario, common.trials, seed)?);
    }

    let mut table = Table::new(
        format!("attack results, seed={seed}; pass when rate <= bound + 99% Wilson slack"),
        &[
            "strategy",
            "parameters",
            "trials",
            "successes",
            "rate",
            "bound",
            "upper_99",
            "result",
            "detail",
        ],
    );
    let mut all = true;
    for r in &rows {
        all &= r.pass;
        let (rate, bound, upper) = match &r.report {
            Some(t) => (
                fmt_prob(t.empirical_rate),
                fmt_prob(t.bound),
                fmt_prob(t.wilson_upper),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        table.push(vec![
            r.strategy.clone(),
            r.parameters.clone(),
            r.trials.to_string(),
            r.successes.map_or("-".into(), |s| s.to_string()),
            rate,
            bound,
            upper,
            pass_fail(r.pass),
            if r.detail.is_empty() {
                "-".into()
            } else {
                r.detail.clone()
            },
        ]);
    }
    print!("{}", table.render(common.format));
    if let Some(dir) = &common.out {
        table.write_csv(&dir.join("attacks.csv"))?;
    }
    Ok(all)
}
