use std::path::PathBuf;
use std::process::{Command, Output};

fn uss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uss"))
        .args(args)
        .output()
        .expect("uss runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scenario(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    p.to_str().unwrap().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("uss-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn selftest_passes() {
    let o = uss(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.matches(" pass").count(), 6, "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn honest_default_run() {
    let o = uss(&["simulate"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(
        out.contains("summary: all verdicts l_max; ledger matches L_sr/L_rr exactly"),
        "{out}"
    );
    assert!(out.contains("authentication: 47 bits per message"));
}

#[test]
fn rubbish_keys_change_nothing() {
    let o = uss(&["simulate", &scenario("rubbish.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("faulty: P3=RubbishKeys, P6=Silent"));
    assert!(
        out.contains("summary: all verdicts l_max; ledger matches L_sr/L_rr exactly"),
        "{out}"
    );
}

#[test]
fn starved_pool_aborts_cleanly() {
    let o = uss(&["simulate", &scenario("pool_starved.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(
        out.contains("outcome: aborted (key pool on link P0-P1 holds 500 bits"),
        "{out}"
    );
}

#[test]
fn simulate_is_reproducible() {
    let dirs = [scratch("sim-a"), scratch("sim-b")];
    let outs: Vec<String> = dirs
        .iter()
        .map(|d| {
            let o = uss(&[
                "simulate",
                &scenario("rubbish.toml"),
                "--seed",
                "9",
                "--out",
                d.to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0));
            stdout(&o)
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].starts_with("scenario seed=9 "));
    for file in ["trace.jsonl", "report.json", "ledger.csv"] {
        let a = std::fs::read(dirs[0].join(file)).unwrap();
        let b = std::fs::read(dirs[1].join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs");
    }
    let other = uss(&["simulate", &scenario("rubbish.toml"), "--seed", "10"]);
    assert_ne!(stdout(&other), outs[0]);
}

#[test]
fn optimize_writes_plot_data() {
    let dir = scratch("opt");
    let o = uss(&["optimize", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("kbits") && out.contains("Mbits"));
    let rows = std::fs::read_to_string(dir.join("optimize.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 16);
    assert!(rows.starts_with("row,N,M,omega,l_max,a,eps_tot,b_range,tag,k,b,s0"));
    let curve = std::fs::read_to_string(dir.join("cost_curve.csv")).unwrap();
    assert!(curve.lines().count() > 8 * 10);
    let sweep = std::fs::read_to_string(dir.join("regime_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 9);
}

#[test]
fn optimize_overrides_and_csv() {
    let o = uss(&[
        "optimize",
        "--format",
        "csv",
        "--override",
        "a=64",
        "--override",
        "sweep.n_max=5",
        "--override",
        "sweep.a=64",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("# optimized parameters"));
    assert!(out.contains("\n1,4,0,1,1,64,1e-10,"));
    assert!(!out.contains("8388608"));
}

#[test]
fn consume_reports_costs() {
    let o = uss(&[
        "consume",
        "--override",
        "scheme.k=20",
        "--override",
        "scheme.b=4",
        "--override",
        "scheme.s0=0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("k=20 b=4 s0=0.500000"));
    assert!(out.contains("auth key per message"));
}

#[test]
fn attacks_pass_on_small_parameters() {
    let o = uss(&["attack", "forgery", "repudiation", "--trials", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("forgery "));
    assert_eq!(out.matches("repudiation (").count(), 2);
    assert!(!out.contains("FAIL"));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(
        uss(&["simulate", "/nonexistent/scenario.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        uss(&["simulate", "--override", "scheme.bogus=1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        uss(&["optimize", "--override", "bogus=1"]).status.code(),
        Some(2)
    );
    assert_eq!(uss(&["attack", "teleport"]).status.code(), Some(2));
    assert_eq!(
        uss(&["attack", "forgery", "--trials", "0"]).status.code(),
        Some(2)
    );
    let o = uss(&["simulate", "--override", "scheme.omega=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
