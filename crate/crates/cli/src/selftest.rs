//! `selftest`: quick exhaustive checks of the building blocks.

use anyhow::Result;
use uss_core::attacks::{as2u_check, broadcast_exhaustive};
use uss_core::gf2m::{FieldElement, FieldSpec};

use crate::table::{pass_fail, Table};
use crate::Common;

/// Field axioms over every triple of elements of GF(2^m).
fn field_axioms(m: u32) -> Result<(bool, u64)> {
    let f = FieldSpec::new(m)?;
    let all: Vec<FieldElement> = (0..f.order())
        .map(|v| f.element(v))
        .collect::<Result<_, _>>()?;
    let (zero, one) = (f.zero(), f.one());
    let mut ok = true;
    let mut checks = 0u64;
    for x in &all {
        ok &= x.add(&zero)? == *x && x.mul(&one)? == *x && x.add(x)? == zero;
        let inverses = all
            .iter()
            .filter(|y| x.mul(y).is_ok_and(|p| p == one))
            .count();
        ok &= inverses == usize::from(!x.is_zero());
        for y in &all {
            ok &= x.add(y)? == y.add(x)? && x.mul(y)? == y.mul(x)?;
            ok &= x.is_zero() || y.is_zero() || !x.mul(y)?.is_zero();
            for z in &all {
                ok &= x.add(y)?.add(z)? == x.add(&y.add(z)?)?;
                ok &= x.mul(y)?.mul(z)? == x.mul(&y.mul(z)?)?;
                ok &= x.mul(&y.add(z)?)? == x.mul(y)?.add(&x.mul(z)?)?;
                checks += 1;
            }
        }
    }
    Ok((ok, checks))
}

pub fn cmd_selftest(common: &Common) -> Result<bool> {
    let seed = common.seed.unwrap_or(crate::DEFAULT_SEED);
    let mut table = Table::new(
        format!("self test, seed={seed}"),
        &["check", "parameters", "cases", "result"],
    );
    let mut all = true;

    for (a, b) in [(9, 2), (12, 3)] {
        let r = as2u_check(a, b, 0, 100, seed)?;
        all &= r.pass();
        table.push(vec![
            "hash family: uniform tags and pair collisions".into(),
            format!(
                "a={} b={} s={} y={}, max pair ratio {:.4} vs {:.4}",
                r.a, r.b, r.s, r.y, r.max_ratio, r.ratio_bound
            ),
            format!("{} keys x {} messages", 1u64 << r.y, r.messages),
            pass_fail(r.pass()),
        ]);
    }
    for m in 2..=4 {
        let (ok, checks) = field_axioms(m)?;
        all &= ok;
        table.push(vec![
            "field axioms".into(),
            format!("GF(2^{m})"),
            format!("{checks} triples"),
            pass_fail(ok),
        ]);
    }
    let r = broadcast_exhaustive(4)?;
    all &= r.pass();
    table.push(vec![
        "broadcast agreement and validity".into(),
        format!("N={} omega={}, every binary faulty strategy", r.n, r.omega),
        format!("{} runs", r.runs),
        pass_fail(r.pass()),
    ]);

    print!("{}", table.render(common.format));
    if let Some(dir) = &common.out {
        table.write_csv(&dir.join("selftest.csv"))?;
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fields_satisfy_axioms() {
        for m in 2..=3 {
            let (ok, checks) = field_axioms(m).unwrap();
            assert!(ok);
            assert_eq!(checks, 1 << (3 * m));
        }
    }
}
