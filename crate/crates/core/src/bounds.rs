//! Security bounds, key consumption and the parameter optimizer.
//!
//! Node 0 is the signer, nodes `1..=N` are the internal recipients. All
//! probabilities are clipped to `[0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::as2u::{self, As2uError};

/// Smallest tag length scanned by the optimizer.
pub const B_MIN: u32 = 2;
/// Largest tag length scanned by the optimizer.
pub const B_MAX: u32 = 20;
/// Absolute tolerance on `s0` for the bisection.
pub const S0_TOLERANCE: f64 = 1e-6;
/// Offset of the bisection bracket from the ends of the `s0` interval.
pub const S0_BRACKET_OFFSET: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("need at least 4 internal recipients, got N = {0}")]
    TooFewRecipients(u32),
    #[error("l_max must be at least 1")]
    NoLevels,
    #[error(
        "omega = {omega} violates omega < N/(2 + l_max) for N = {n}, l_max = {l_max} (max {max})"
    )]
    Unacceptable {
        n: u32,
        l_max: u32,
        omega: u32,
        max: u32,
    },
    #[error("s0 = {s0} outside (0, {limit}) for b = {b}")]
    S0OutOfRange { s0: f64, b: u32, limit: f64 },
    #[error("eps = {0} must lie in (0, 1)")]
    BadEpsilon(f64),
    #[error("link model: {0}")]
    LinkModel(String),
    #[error("no feasible b in {lo}..={hi}: {detail}")]
    Infeasible { lo: u32, hi: u32, detail: String },
    #[error(transparent)]
    Family(#[from] As2uError),
}

/// Which separation between adjacent level thresholds enters the
/// non-transferability exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaS {
    /// `s0 / l_max`.
    #[default]
    Full,
    /// `s0 / (2 l_max)`, the midpoint separation.
    Half,
}

impl DeltaS {
    fn value(self, s0: f64, l_max: u32) -> f64 {
        match self {
            DeltaS::Full => s0 / l_max as f64,
            DeltaS::Half => s0 / (2.0 * l_max as f64),
        }
    }
}

/// Full parameter set of one scheme instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub n: u32,
    pub m: u32,
    pub omega: u32,
    pub l_max: u32,
    pub a: u64,
    pub eps_tot: f64,
    pub k: u64,
    pub b: u32,
    pub s0: f64,
}

impl SchemeConfig {
    /// Checks network size, acceptability and the `s0` range.
    pub fn validate(&self) -> Result<(), BoundsError> {
        check_network(self.n, self.omega, self.l_max)?;
        check_s0(self.s0, self.b)
    }

    pub fn family(&self) -> Result<as2u::FamilyParams, BoundsError> {
        Ok(as2u::make_params(self.a, self.b)?)
    }

    /// Threshold fraction `s_l = (1 - l/l_max) s0` for level `l`.
    pub fn level_fraction(&self, l: u32) -> f64 {
        level_fraction(self.s0, l, self.l_max)
    }
}

pub fn level_fraction(s0: f64, l: u32, l_max: u32) -> f64 {
    (1.0 - l as f64 / l_max as f64) * s0
}

pub fn check_network(n: u32, omega: u32, l_max: u32) -> Result<(), BoundsError> {
    if n < 4 {
        return Err(BoundsError::TooFewRecipients(n));
    }
    if l_max < 1 {
        return Err(BoundsError::NoLevels);
    }
    let max = acceptability_max_omega(n, l_max);
    if omega < 1 || omega > max {
        return Err(BoundsError::Unacceptable {
            n,
            l_max,
            omega,
            max,
        });
    }
    Ok(())
}

fn s0_limit(b: u32) -> f64 {
    1.0 - 2f64.powi(1 - b as i32)
}

fn check_s0(s0: f64, b: u32) -> Result<(), BoundsError> {
    let limit = s0_limit(b);
    if b < 2 || !(s0 > 0.0 && s0 < limit) {
        return Err(BoundsError::S0OutOfRange { s0, b, limit });
    }
    Ok(())
}

/// Largest `omega` with `omega (2 + l_max) < N`; 0 means no tolerance.
pub fn acceptability_max_omega(n: u32, l_max: u32) -> u32 {
    n.saturating_sub(1) / (2 + l_max)
}

/// Forgery prefactor `N^2 [omega + M(omega + M)]`.
pub fn forgery_prefactor(n: u32, m: u32, omega: u32) -> f64 {
    let (n, m, w) = (n as f64, m as f64, omega as f64);
    n * n * (w + m * (w + m))
}

/// Non-transferability prefactor `2 N^2 (N - 1)`.
pub fn nontransfer_prefactor(n: u32) -> f64 {
    let n = n as f64;
    2.0 * n * n * (n - 1.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Forgery exponent per key in natural-log units.
pub fn beta1(s0: f64, b: u32) -> f64 {
    let hoeffding = 2.0 * (1.0 - s0 - 2f64.powi(1 - b as i32)).powi(2);
    if s0 < 0.5 {
        let bm1 = (b - 1) as f64;
        let entropy = bm1 * std::f64::consts::LN_2 * (1.0 - s0 - binary_entropy(s0) / bm1);
        if entropy > 0.0 {
            return hoeffding.max(entropy);
        }
    }
    hoeffding
}

/// Non-transferability exponent per key.
pub fn beta2(s0: f64, l_max: u32, delta: DeltaS) -> f64 {
    let ds = delta.value(s0, l_max);
    ds * ds / 2.0
}

fn clip(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

pub fn forgery_bound(cfg: &SchemeConfig) -> Result<f64, BoundsError> {
    cfg.validate()?;
    let j = forgery_prefactor(cfg.n, cfg.m, cfg.omega);
    Ok(clip(j * (-(cfg.k as f64) * beta1(cfg.s0, cfg.b)).exp()))
}

pub fn nontransfer_bound(cfg: &SchemeConfig) -> Result<f64, BoundsError> {
    nontransfer_bound_with(cfg, DeltaS::Full)
}

pub fn nontransfer_bound_with(cfg: &SchemeConfig, delta: DeltaS) -> Result<f64, BoundsError> {
    cfg.validate()?;
    let pre = nontransfer_prefactor(cfg.n);
    Ok(clip(
        pre * (-(cfg.k as f64) * beta2(cfg.s0, cfg.l_max, delta)).exp(),
    ))
}

pub fn repudiation_bound(cfg: &SchemeConfig) -> Result<f64, BoundsError> {
    nontransfer_bound(cfg)
}

pub fn false_blocking_bound(cfg: &SchemeConfig) -> Result<f64, BoundsError> {
    Ok(clip(forgery_bound(cfg)? + nontransfer_bound(cfg)?))
}

/// Key material per signing-key set, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyConsumption {
    /// Key length of one hash function.
    pub y: u32,
    /// Per signer-recipient link.
    pub l_sr: u64,
    /// Per recipient-recipient link.
    pub l_rr: u64,
    pub l_tot: u64,
    pub sig_len: u64,
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Consumption from `(N, k, b, y)` without recomputing the family.
pub fn consumption_for(n: u32, k: u64, b: u32, y: u32) -> KeyConsumption {
    let n64 = n as u64;
    let y64 = y as u64;
    let l_sr = n64 * k * y64;
    let l_rr = 2 * k * (y64 + ceil_log2(n64 * k) as u64);
    KeyConsumption {
        y,
        l_sr,
        l_rr,
        l_tot: n64 * l_sr + n64 * (n64 - 1) / 2 * l_rr,
        sig_len: n64 * n64 * k * b as u64,
    }
}

pub fn key_consumption(cfg: &SchemeConfig) -> Result<KeyConsumption, BoundsError> {
    let fam = cfg.family()?;
    Ok(consumption_for(cfg.n, cfg.k, cfg.b, fam.y))
}

/// Converts a fibre attenuation in dB/km into a natural-log loss coefficient.
pub fn db_per_km_to_gamma(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 10.0
}

/// QKD link rates as a function of distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Secret key rate at zero distance, bits/s.
    pub rate0: f64,
    /// Loss coefficient per km.
    pub gamma: f64,
    /// Symmetric `(N+1) x (N+1)` distance matrix in km; row 0 is the signer.
    pub distances: Vec<Vec<f64>>,
}

impl LinkModel {
    /// Every signer link at `sr_km`, every recipient pair at `rr_km`.
    pub fn star(n: u32, rate0: f64, gamma: f64, sr_km: f64, rr_km: f64) -> Self {
        let size = n as usize + 1;
        let mut distances = vec![vec![0.0; size]; size];
        for (i, row) in distances.iter_mut().enumerate() {
            for (j, d) in row.iter_mut().enumerate() {
                if i != j {
                    *d = if i == 0 || j == 0 { sr_km } else { rr_km };
                }
            }
        }
        Self {
            rate0,
            gamma,
            distances,
        }
    }

    pub fn uniform(n: u32, rate0: f64, gamma: f64, km: f64) -> Self {
        Self::star(n, rate0, gamma, km, km)
    }

    pub fn link_rate(&self, i: usize, j: usize) -> Result<f64, BoundsError> {
        let d = self
            .distances
            .get(i)
            .and_then(|row| row.get(j))
            .copied()
            .ok_or_else(|| {
                BoundsError::LinkModel(format!("missing distance for link ({i}, {j})"))
            })?;
        if d.is_nan() || d < 0.0 {
            return Err(BoundsError::LinkModel(format!(
                "bad distance {d} for link ({i}, {j})"
            )));
        }
        Ok(self.rate0 * (-self.gamma * d).exp())
    }

    fn validate(&self) -> Result<(), BoundsError> {
        if self.rate0.is_nan() || self.rate0 <= 0.0 || self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(BoundsError::LinkModel(format!(
                "need rate0 > 0 and gamma >= 0, got {} and {}",
                self.rate0, self.gamma
            )));
        }
        for (i, row) in self.distances.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                let back = self.distances.get(j).and_then(|r| r.get(i)).copied();
                if back != Some(d) {
                    return Err(BoundsError::LinkModel(format!(
                        "asymmetric distance at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Signing-key sets per second sustainable by the slowest links.
pub fn uss_rate_for(
    n: u32,
    consumption: &KeyConsumption,
    links: &LinkModel,
) -> Result<f64, BoundsError> {
    links.validate()?;
    let n = n as usize;
    let mut sr_min = f64::INFINITY;
    for j in 1..=n {
        sr_min = sr_min.min(links.link_rate(0, j)?);
    }
    let mut rr_min = f64::INFINITY;
    for i in 1..=n {
        for j in i + 1..=n {
            rr_min = rr_min.min(links.link_rate(i, j)?);
        }
    }
    Ok((sr_min / consumption.l_sr as f64).min(rr_min / consumption.l_rr as f64))
}

pub fn uss_rate(cfg: &SchemeConfig, links: &LinkModel) -> Result<f64, BoundsError> {
    uss_rate_for(cfg.n, &key_consumption(cfg)?, links)
}

/// Authentication key bits per message, `floor(-log2 eps) + 1`.
pub fn auth_key_cost(eps_auth: f64) -> Result<u64, BoundsError> {
    if !(eps_auth > 0.0 && eps_auth < 1.0) {
        return Err(BoundsError::BadEpsilon(eps_auth));
    }
    Ok((-eps_auth.log2()).floor() as u64 + 1)
}

/// Inputs of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeInput {
    pub n: u32,
    pub m: u32,
    pub omega: u32,
    pub l_max: u32,
    pub a: u64,
    pub eps_tot: f64,
    pub b_min: u32,
    pub b_max: u32,
    #[serde(default)]
    pub delta_s: DeltaS,
}

impl OptimizeInput {
    pub fn new(n: u32, m: u32, omega: u32, l_max: u32, a: u64, eps_tot: f64) -> Self {
        Self {
            n,
            m,
            omega,
            l_max,
            a,
            eps_tot,
            b_min: B_MIN,
            b_max: B_MAX,
            delta_s: DeltaS::Full,
        }
    }

    pub fn with_b(mut self, b: u32) -> Self {
        self.b_min = b;
        self.b_max = b;
        self
    }

    pub fn scheme(&self, k: u64, b: u32, s0: f64) -> SchemeConfig {
        SchemeConfig {
            n: self.n,
            m: self.m,
            omega: self.omega,
            l_max: self.l_max,
            a: self.a,
            eps_tot: self.eps_tot,
            k,
            b,
            s0,
        }
    }
}

/// Optimized parameters and their cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub k: u64,
    pub b: u32,
    pub s0: f64,
    pub s: u32,
    pub y: u32,
    pub l_sr: u64,
    pub l_rr: u64,
    pub l_tot: u64,
    pub sig_len: u64,
    pub forgery: f64,
    pub nontransfer: f64,
}

/// Why a given `b` produced no candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BOutcome {
    Feasible(OptimizerResult),
    NoRoot { f_lo: f64, f_hi: f64 },
    Unreachable { s0: f64 },
}

/// Optimizes `s0` and `k` for one tag length.
pub fn optimize_b(input: &OptimizeInput, b: u32) -> Result<BOutcome, BoundsError> {
    check_network(input.n, input.omega, input.l_max)?;
    if !(input.eps_tot > 0.0 && input.eps_tot < 1.0) {
        return Err(BoundsError::BadEpsilon(input.eps_tot));
    }
    let fam = as2u::make_params(input.a, b)?;
    let half = input.eps_tot / 2.0;
    let ln_a1 = forgery_prefactor(input.n, input.m, input.omega).ln();
    let ln_a2 = nontransfer_prefactor(input.n).ln();
    let b2 = |s0: f64| beta2(s0, input.l_max, input.delta_s);
    let k_real = |s0: f64| (ln_a2 - half.ln()) / b2(s0);
    let f = |s0: f64| (b2(s0) - beta1(s0, b)) * k_real(s0) - (ln_a2 - ln_a1);

    let mut lo = S0_BRACKET_OFFSET;
    let mut hi = s0_limit(b) - S0_BRACKET_OFFSET;
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Ok(BOutcome::NoRoot { f_lo, f_hi });
    }
    while hi - lo > S0_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);

    let bt1 = beta1(s0, b);
    if bt1 <= 0.0 {
        return Ok(BOutcome::Unreachable { s0 });
    }
    let mut k = k_real(s0).ceil().max(1.0) as u64;
    let check = |k: u64| -> Result<(f64, f64), BoundsError> {
        let cfg = input.scheme(k, b, s0);
        Ok((
            forgery_bound(&cfg)?,
            nontransfer_bound_with(&cfg, input.delta_s)?,
        ))
    };
    let mut bounds = check(k)?;
    if bounds.0 > half {
        // skip ahead to where the forgery exponent alone suffices
        let needed = ((ln_a1 - half.ln()) / bt1).ceil() as u64;
        if needed > k {
            k = needed;
            bounds = check(k)?;
        }
    }
    while bounds.0 > half || bounds.1 > half {
        k += 1;
        bounds = check(k)?;
    }
    let c = consumption_for(input.n, k, b, fam.y);
    Ok(BOutcome::Feasible(OptimizerResult {
        k,
        b,
        s0,
        s: fam.s,
        y: fam.y,
        l_sr: c.l_sr,
        l_rr: c.l_rr,
        l_tot: c.l_tot,
        sig_len: c.sig_len,
        forgery: bounds.0,
        nontransfer: bounds.1,
    }))
}

/// Per-`b` outcomes over `b_min..=b_max`, in increasing `b`.
pub fn cost_curve(input: &OptimizeInput) -> Result<Vec<(u32, BOutcome)>, BoundsError> {
    (input.b_min..=input.b_max)
        .into_par_iter()
        .map(|b| optimize_b(input, b).map(|o| (b, o)))
        .collect()
}

/// Picks the `b` with the smallest `L_tot`; ties go to the smaller `b`.
pub fn optimize(input: &OptimizeInput) -> Result<OptimizerResult, BoundsError> {
    let curve = cost_curve(input)?;
    let best = curve
        .iter()
        .filter_map(|(_, o)| match o {
            BOutcome::Feasible(r) => Some(*r),
            _ => None,
        })
        .min_by_key(|r| (r.l_tot, r.b));
    best.ok_or_else(|| BoundsError::Infeasible {
        lo: input.b_min,
        hi: input.b_max,
        detail: curve
            .iter()
            .map(|(b, o)| format!("b={b}: {o:?}"))
            .collect::<Vec<_>>()
            .join("; "),
    })
}

/// The two extremes of the omega / l_max trade-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `l_max = 1` with the largest tolerable omega.
    MinTransferability,
    /// `omega = 1` with `l_max = N - 3`.
    MaxTransferability,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::MinTransferability => "min_transferability",
            Regime::MaxTransferability => "max_transferability",
        }
    }

    /// `(omega, l_max)` for `N` recipients.
    pub fn parameters(self, n: u32) -> (u32, u32) {
        match self {
            Regime::MinTransferability => (acceptability_max_omega(n, 1), 1),
            Regime::MaxTransferability => (1, n.saturating_sub(3).max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub regime: Regime,
    pub n: u32,
    pub omega: u32,
    pub l_max: u32,
    pub result: OptimizerResult,
}

/// Optimized cost for each `N` in `ns` under both regimes.
pub fn regime_sweep(
    ns: impl IntoIterator<Item = u32>,
    m: u32,
    a: u64,
    eps_tot: f64,
) -> Result<Vec<RegimePoint>, BoundsError> {
    let mut out = Vec::new();
    for n in ns {
        for regime in [Regime::MinTransferability, Regime::MaxTransferability] {
            let (omega, l_max) = regime.parameters(n);
            let result = optimize(&OptimizeInput::new(n, m, omega, l_max, a, eps_tot))?;
            out.push(RegimePoint {
                regime,
                n,
                omega,
                l_max,
                result,
            });
        }
    }
    Ok(out)
}
