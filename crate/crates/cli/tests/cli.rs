use std::path::Path;
use std::process::{Command, Output};

use compfact::io;
use compfact::recovery::{l1_recover, RecoveryOptions};
use compfact::sensing::{certify_expander, gen_sparse_binary, CertifyMode, ExpanderReport};
use compfact::synthgen::{gen_matrix_instance, MatrixModel, ValueDist};
use serde_json::Value;

fn compfact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compfact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = compfact(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn recover_planted_twelve_dimensional_vector() {
    let dir = tempfile::tempdir().unwrap();
    let pfile = dir.path().join("P.json");
    let yfile = dir.path().join("y.csv");
    let xfile = dir.path().join("x.csv");
    ok(&[
        "gen-projection",
        "--n",
        "12",
        "--d",
        "11",
        "--p",
        "3",
        "--seed",
        "4",
        "--out",
        p(&pfile),
    ]);
    let pm = compfact::ProjectionMatrix::load_json(&pfile).unwrap();
    let mut x = vec![0.0; 12];
    x[2] = 1.5;
    x[7] = -0.8;
    io::write_csv_vector(&yfile, &pm.apply(&x).unwrap()).unwrap();
    let report = dir.path().join("rep.json");
    ok(&[
        "recover",
        "--projection",
        p(&pfile),
        "--y",
        p(&yfile),
        "--out",
        p(&xfile),
        "--report",
        p(&report),
    ]);
    let x_hat = io::read_csv_vector(&xfile).unwrap();
    let lib = l1_recover(&pm, &pm.apply(&x).unwrap(), &RecoveryOptions::default()).unwrap();
    assert_eq!(x_hat, lib.x_hat);
    let inf = x_hat.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(inf <= 1e-6, "{inf}");
    assert_eq!(read_json(&report)["converged"], Value::Bool(true));
}

#[test]
fn expander_check_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let pfile = dir.path().join("P.json");
    let out = dir.path().join("exp.json");
    ok(&[
        "gen-projection",
        "--n",
        "30",
        "--d",
        "60",
        "--p",
        "5",
        "--seed",
        "1",
        "--out",
        p(&pfile),
    ]);
    ok(&[
        "expander-check",
        "--projection",
        p(&pfile),
        "--gamma-n",
        "4",
        "--exhaustive",
        "--out",
        p(&out),
    ]);
    let cli: ExpanderReport = io::read_json(&out).unwrap();
    let pm = gen_sparse_binary(30, 60, 5, 1).unwrap();
    let lib = certify_expander(&pm, 4, 0.8, CertifyMode::exhaustive()).unwrap();
    assert_eq!(cli, lib);
    assert!(cli.exhaustive);
    assert_eq!(cli.subsets_tested, 30 + 435 + 4060 + 27405);
}

#[test]
fn pipeline_reports_recovery_call_counts() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let pfile = dir.path().join("P.json");
    ok(&[
        "synth",
        "--n",
        "80",
        "--m",
        "24",
        "--r",
        "3",
        "--k",
        "4",
        "--nonneg",
        "--seed",
        "2",
        "--out",
        p(&inst),
    ]);
    ok(&[
        "gen-projection",
        "--n",
        "80",
        "--d",
        "40",
        "--p",
        "4",
        "--seed",
        "2",
        "--out",
        p(&pfile),
    ]);
    for (mode, calls) in [("fr", 3), ("rf", 24)] {
        let out = dir.path().join(mode);
        let stdout = ok(&[
            "pipeline",
            mode,
            "--projection",
            p(&pfile),
            "--input",
            p(&inst.join("M.csv")),
            "--ambient",
            "--r",
            "3",
            "--iters",
            "50",
            "--out",
            p(&out),
        ]);
        assert!(stdout.contains(&format!("{calls} recovery calls")));
        let summary = read_json(&out.join("pipeline.json"));
        assert_eq!(summary["recovery_calls"], calls);
        assert_eq!(summary["m"], 24);
        assert!(summary["timing"]["recovery_ms"].as_f64().unwrap() >= 0.0);
        let w_hat = io::read_csv_matrix(&out.join("W_hat.csv")).unwrap();
        assert_eq!(w_hat.shape(), (80, 3));
    }
}

#[test]
fn factorize_writes_factors_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_matrix_instance(MatrixModel {
        n: 20,
        m: 15,
        r: 2,
        k: 5,
        noise_ratio: 0.0,
        nonneg: false,
        seed: 3,
        values: ValueDist::Gaussian,
    })
    .unwrap();
    let mfile = dir.path().join("M.csv");
    io::write_csv_matrix(&mfile, &inst.m).unwrap();
    let out = dir.path().join("fac");
    ok(&[
        "factorize",
        "--input",
        p(&mfile),
        "--method",
        "spca",
        "--lambda",
        "0",
        "--r",
        "2",
        "--out",
        p(&out),
    ]);
    let w = io::read_csv_matrix(&out.join("W.csv")).unwrap();
    let h = io::read_csv_matrix(&out.join("H.csv")).unwrap();
    let rel = w.matmul(&h).unwrap().sub(&inst.m).unwrap().frobenius_norm() / inst.m.frobenius_norm();
    assert!(rel < 1e-6, "{rel}");
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["method"], "spca");
    assert_eq!(report["r"], 2);
}

#[test]
fn malformed_input_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let mfile = dir.path().join("M.csv");
    std::fs::write(&mfile, "1,2\n3,oops\n").unwrap();
    let out = compfact(&[
        "factorize",
        "--input",
        p(&mfile),
        "--r",
        "1",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn uniqueness_report_on_planted_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    ok(&[
        "synth",
        "--n",
        "200",
        "--m",
        "15",
        "--r",
        "5",
        "--k",
        "10",
        "--seed",
        "1",
        "--out",
        p(&inst),
    ]);
    let out = dir.path().join("u.json");
    ok(&[
        "uniqueness",
        "--instance",
        p(&inst),
        "--trials",
        "2000",
        "--seed",
        "3",
        "--out",
        p(&out),
    ]);
    let rep = read_json(&out);
    assert_eq!(rep["d"], 230);
    assert_eq!(rep["sparsest"]["instances"], 2000);
    assert_eq!(rep["sparsest"]["violations"], 0);
    assert_eq!(rep["sparsest"]["colspace_equal"], Value::Bool(true));
    assert_eq!(rep["sparsest"]["bound_6kp5"], 60.0);
    assert_eq!(rep["expansion"]["exhaustive"], Value::Bool(true));
    assert_eq!(rep["expansion"]["subsets_tested"], 31);
}

fn bench_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synth_bench_rows_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"task":"nmf","n":60,"m":30,"r":2,"k":[3,6],"d":[20,40],"seeds":2,"iters":40}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["synth-bench", "--config", p(&cfg), "--out", p(&a)]);
    ok(&["synth-bench", "--config", p(&cfg), "--out", p(&b), "--jobs", "3"]);
    let text_a = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let text_b = std::fs::read_to_string(b.join("results.csv")).unwrap();
    assert_eq!(
        text_a.lines().next().unwrap(),
        "task,k,d,seed,err_Wt_PW,err_What_W,err_oracle,wallclock_ms"
    );
    let (ra, rb) = (bench_rows(&text_a), bench_rows(&text_b));
    assert_eq!(ra.len(), 2 * 2 * 2);
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x[..7], y[..7]);
        assert_eq!(x[0], "nmf");
    }
    let resolved = read_json(&a.join("config.json"));
    assert_eq!(resolved["output_dir"], p(&a));
}

#[test]
fn tensor_bench_writes_tensor_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    ok(&[
        "tensor-bench",
        "--n",
        "60",
        "--m",
        "8",
        "--r",
        "3",
        "--k",
        "4",
        "--d",
        "30",
        "--seeds",
        "2",
        "--out",
        p(&out),
    ]);
    let rows = bench_rows(&std::fs::read_to_string(out.join("results.csv")).unwrap());
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row[0], "tensor");
        let err: f64 = row[5].parse().unwrap();
        assert!(err < 0.1, "{err}");
    }
    let bad = compfact(&["tensor-bench", "--task", "nmf", "--out", p(&dir.path().join("x"))]);
    assert!(!bad.status.success());
}
