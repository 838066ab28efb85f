//! `optimize` and `consume`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use uss_core::bounds::{self, BOutcome, LinkModel, OptimizeInput, OptimizerResult};
use uss_core::netsim::{apply_override, Scenario};

use crate::table::{fmt_bits, fmt_prob, Format, Table};
use crate::Common;

const MBIT8: u64 = 8 * 1024 * 1024;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowInput {
    n: u32,
    #[serde(default)]
    m: u32,
    omega: u32,
    l_max: u32,
    #[serde(default = "default_a")]
    a: u64,
    #[serde(default = "default_eps")]
    eps_tot: f64,
    b_min: Option<u32>,
    b_max: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sweep {
    #[serde(default = "default_n_min")]
    n_min: u32,
    #[serde(default = "default_n_max")]
    n_max: u32,
    #[serde(default = "default_sweep_m")]
    m: u32,
    #[serde(default = "default_a")]
    a: u64,
    #[serde(default = "default_eps")]
    eps_tot: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeFile {
    rows: Vec<RowInput>,
    #[serde(default = "default_sweep")]
    sweep: Sweep,
}

fn default_a() -> u64 {
    MBIT8
}
fn default_eps() -> f64 {
    1e-10
}
fn default_n_min() -> u32 {
    4
}
fn default_n_max() -> u32 {
    12
}
fn default_sweep_m() -> u32 {
    5
}
fn default_sweep() -> Sweep {
    Sweep {
        n_min: default_n_min(),
        n_max: default_n_max(),
        m: default_sweep_m(),
        a: default_a(),
        eps_tot: default_eps(),
    }
}

/// The eight reference configurations used when no input file is given.
pub const DEFAULT_ROWS: &str = r#"
rows = [
    { n = 4, m = 0, omega = 1, l_max = 1 },
    { n = 4, m = 10, omega = 1, l_max = 1 },
    { n = 10, m = 10, omega = 1, l_max = 7 },
    { n = 10, m = 10, omega = 3, l_max = 1 },
    { n = 10, m = 10, omega = 2, l_max = 2 },
    { n = 10, m = 10, omega = 2, l_max = 2, a = 33554432 },
    { n = 10, m = 10, omega = 2, l_max = 2, eps_tot = 1e-12 },
    { n = 10, m = 100, omega = 2, l_max = 2 },
]
"#;

/// Overrides starting with `sweep.` go to the sweep section, anything else
/// to every row.
fn load(path: Option<&Path>, overrides: &[String]) -> Result<OptimizeFile> {
    let text = match path {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => DEFAULT_ROWS.to_string(),
    };
    let mut doc: toml::Table = toml::from_str(&text).context("parsing optimizer input")?;
    for o in overrides {
        if o.trim_start().starts_with("sweep.") {
            apply_override(&mut doc, o)?;
            continue;
        }
        let rows = doc
            .get_mut("rows")
            .and_then(|r| r.as_array_mut())
            .context("optimizer input needs a rows array")?;
        for row in rows {
            let table = row.as_table_mut().context("each row must be a table")?;
            apply_override(table, o)?;
        }
    }
    let file: OptimizeFile = doc.try_into().context("optimizer input")?;
    if file.rows.is_empty() {
        bail!("optimizer input has no rows");
    }
    Ok(file)
}

impl RowInput {
    fn input(&self) -> OptimizeInput {
        let mut input =
            OptimizeInput::new(self.n, self.m, self.omega, self.l_max, self.a, self.eps_tot);
        if let Some(b) = self.b_min {
            input.b_min = b;
        }
        if let Some(b) = self.b_max {
            input.b_max = b;
        }
        input
    }
}

fn result_cells(r: &OptimizerResult) -> Vec<String> {
    vec![
        r.k.to_string(),
        r.b.to_string(),
        format!("{:.3}", r.s0),
        r.y.to_string(),
        fmt_bits(r.l_sr),
        fmt_bits(r.l_rr),
        fmt_bits(r.l_tot),
        fmt_bits(r.sig_len),
        fmt_prob(r.forgery),
        fmt_prob(r.nontransfer),
    ]
}

fn result_raw(r: &OptimizerResult) -> Vec<String> {
    vec![
        r.k.to_string(),
        r.b.to_string(),
        format!("{:.6}", r.s0),
        r.y.to_string(),
        r.l_sr.to_string(),
        r.l_rr.to_string(),
        r.l_tot.to_string(),
        r.sig_len.to_string(),
        format!("{:e}", r.forgery),
        format!("{:e}", r.nontransfer),
    ]
}

fn with_units(t: &Table, columns: &[usize]) -> Table {
    let mut out = t.clone();
    for row in &mut out.rows {
        for &c in columns {
            if let Ok(bits) = row[c].parse::<u64>() {
                row[c] = fmt_bits(bits);
            }
        }
    }
    out
}

const RESULT_HEADERS: [&str; 10] = [
    "k",
    "b",
    "s0",
    "y",
    "L_sr",
    "L_rr",
    "L_tot",
    "sig_len",
    "P_forge",
    "P_nontransfer",
];

pub fn cmd_optimize(config: Option<&Path>, common: &Common) -> Result<bool> {
    let file = load(config, &common.overrides)?;
    let input_headers = [
        "row", "N", "M", "omega", "l_max", "a", "eps_tot", "b_range", "tag",
    ];
    let headers: Vec<&str> = input_headers
        .iter()
        .chain(RESULT_HEADERS.iter())
        .copied()
        .collect();
    let mut table = Table::new(
        "optimized parameters, b optimized and b fixed at 2",
        &headers,
    );
    let mut raw = table.clone();
    let mut curve = Table::new(
        "L_tot against b (tag length) per row",
        &[
            "row", "N", "M", "omega", "l_max", "a", "eps_tot", "b", "status", "k", "s0", "L_tot",
        ],
    );
    let mut infeasible = 0;

    for (i, row) in file.rows.iter().enumerate() {
        let base = row.input();
        let inputs = |tag: &str, b_range: String| {
            vec![
                (i + 1).to_string(),
                row.n.to_string(),
                row.m.to_string(),
                row.omega.to_string(),
                row.l_max.to_string(),
                row.a.to_string(),
                format!("{:e}", row.eps_tot),
                b_range,
                tag.to_string(),
            ]
        };
        for (tag, input) in [("b_opt", base.clone()), ("b=2", base.clone().with_b(2))] {
            let range = format!("{}..{}", input.b_min, input.b_max);
            match bounds::optimize(&input) {
                Ok(r) => {
                    table.push([inputs(tag, range.clone()), result_cells(&r)].concat());
                    raw.push([inputs(tag, range), result_raw(&r)].concat());
                }
                Err(e) => {
                    infeasible += 1;
                    eprintln!("row {} ({tag}): {e}", i + 1);
                    let mut cells = inputs(tag, range);
                    cells.push("infeasible".into());
                    cells.extend(std::iter::repeat_n(
                        "-".to_string(),
                        RESULT_HEADERS.len() - 1,
                    ));
                    table.push(cells.clone());
                    raw.push(cells);
                }
            }
        }
        let points = match bounds::cost_curve(&base) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("row {} curve: {e}", i + 1);
                continue;
            }
        };
        for (b, outcome) in points {
            let mut cells = vec![
                (i + 1).to_string(),
                row.n.to_string(),
                row.m.to_string(),
                row.omega.to_string(),
                row.l_max.to_string(),
                row.a.to_string(),
                format!("{:e}", row.eps_tot),
                b.to_string(),
            ];
            match outcome {
                BOutcome::Feasible(r) => cells.extend([
                    "ok".into(),
                    r.k.to_string(),
                    format!("{:.6}", r.s0),
                    r.l_tot.to_string(),
                ]),
                BOutcome::NoRoot { .. } => {
                    cells.extend(["no_root", "-", "-", "-"].map(String::from))
                }
                BOutcome::Unreachable { .. } => {
                    cells.extend(["unreachable", "-", "-", "-"].map(String::from))
                }
            }
            curve.push(cells);
        }
    }

    let s = &file.sweep;
    let mut regimes = Table::new(
        format!(
            "optimized cost against N, M={} a={} eps_tot={:e}; min regime: largest omega at l_max=1, \
             max regime: omega=1 at l_max=N-3",
            s.m, s.a, s.eps_tot
        ),
        &["regime", "N", "M", "omega", "l_max", "k", "b", "s0", "L_sr", "L_rr", "L_tot"],
    );
    for n in s.n_min..=s.n_max {
        for regime in [
            bounds::Regime::MinTransferability,
            bounds::Regime::MaxTransferability,
        ] {
            let (omega, l_max) = regime.parameters(n);
            let input = OptimizeInput::new(n, s.m, omega, l_max, s.a, s.eps_tot);
            let mut cells = vec![
                regime.name().to_string(),
                n.to_string(),
                s.m.to_string(),
                omega.to_string(),
                l_max.to_string(),
            ];
            match bounds::optimize(&input) {
                Ok(r) => cells.extend([
                    r.k.to_string(),
                    r.b.to_string(),
                    format!("{:.6}", r.s0),
                    r.l_sr.to_string(),
                    r.l_rr.to_string(),
                    r.l_tot.to_string(),
                ]),
                Err(e) => {
                    eprintln!("sweep {} N={n}: {e}", regime.name());
                    cells.push("infeasible".into());
                    cells.extend(std::iter::repeat_n("-".to_string(), 5));
                }
            }
            regimes.push(cells);
        }
    }

    // aligned tables show bit counts in kbits/Mbits, CSV keeps raw bits
    let shown = match common.format {
        Format::Table => [
            table,
            with_units(&curve, &[11]),
            with_units(&regimes, &[8, 9, 10]),
        ],
        Format::Csv => [raw.clone(), curve.clone(), regimes.clone()],
    };
    for (i, t) in shown.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", t.render(common.format));
    }
    if let Some(dir) = &common.out {
        raw.write_csv(&dir.join("optimize.csv"))?;
        curve.write_csv(&dir.join("cost_curve.csv"))?;
        regimes.write_csv(&dir.join("regime_sweep.csv"))?;
    }
    if infeasible > 0 {
        eprintln!("{infeasible} configuration(s) infeasible");
    }
    Ok(true)
}

/// Key consumption, authentication cost and sustainable signing rate for the
/// scheme and link model of a scenario file.
pub fn cmd_consume(scenario: &Scenario, common: &Common) -> Result<bool> {
    let cfg = scenario.scheme.resolve()?;
    let cons = bounds::key_consumption(&cfg)?;
    let auth = bounds::auth_key_cost(scenario.auth.eps_auth)?;
    let t = &scenario.topology;
    let gamma = bounds::db_per_km_to_gamma(t.db_per_km);
    let links = LinkModel::star(cfg.n, t.rate0, gamma, t.sr_km, t.rr_km);
    let rate = bounds::uss_rate_for(cfg.n, &cons, &links)?;
    let mut table = Table::new(
        format!(
            "key consumption N={} M={} omega={} l_max={} a={} eps_tot={:e} k={} b={} s0={:.6}; \
             links rate0={} bit/s, {} dB/km, signer {} km, recipients {} km, eps_auth={:e}",
            cfg.n,
            cfg.m,
            cfg.omega,
            cfg.l_max,
            cfg.a,
            cfg.eps_tot,
            cfg.k,
            cfg.b,
            cfg.s0,
            t.rate0,
            t.db_per_km,
            t.sr_km,
            t.rr_km,
            scenario.auth.eps_auth
        ),
        &["quantity", "bits", "readable"],
    );
    for (name, bits) in [
        ("L_sr (per signer link)", cons.l_sr),
        ("L_rr (per recipient pair)", cons.l_rr),
        ("L_tot", cons.l_tot),
        ("signature length", cons.sig_len),
        ("auth key per message", auth),
    ] {
        table.push(vec![name.into(), bits.to_string(), fmt_bits(bits)]);
    }
    table.push(vec!["key length y".into(), cons.y.to_string(), "-".into()]);
    table.push(vec![
        "signing keys per second".into(),
        format!("{rate:.3e}"),
        "-".into(),
    ]);
    print!("{}", table.render(common.format));
    if let Some(dir) = &common.out {
        table.write_csv(&dir.join("consume.csv"))?;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rows_parse() {
        let f = load(None, &[]).unwrap();
        assert_eq!(f.rows.len(), 8);
        assert_eq!(f.rows[5].a, 32 * 1024 * 1024);
        assert_eq!(f.rows[0].a, MBIT8);
        assert_eq!(f.sweep.m, 5);
    }

    #[test]
    fn overrides_hit_rows_and_sweep() {
        let f = load(None, &["a=64".into(), "sweep.n_max=6".into()]).unwrap();
        assert!(f.rows.iter().all(|r| r.a == 64));
        assert_eq!(f.sweep.n_max, 6);
        assert!(load(None, &["nonsense=1".into()]).is_err());
    }
}
