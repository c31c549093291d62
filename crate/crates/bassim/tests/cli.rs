//! End-to-end checks of the command-line interface: exit codes, CSV schema
//! stability, determinism, and artifact generation.

use std::process::{Command, Output};

fn bassim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bassim"))
        .args(args)
        .output()
        .expect("spawn bassim")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn bass_subcommand_prints_csv() {
    let out = bassim(&["bass", "--n", "1024", "--m", "16", "-b", "8", "--r", "0.5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,m,B,r,nbass,regime,rate,kappa,j_n");
    let row = lines.next().unwrap();
    assert!(row.starts_with("1024,16,8,0.5,"));
    assert!(row.contains(",intermediate,"));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(
        bassim(&["bass", "--n", "1", "--m", "1", "-b", "8", "--r", "0.5"])
            .status
            .code(),
        Some(2)
    );
    // Missing mandatory --seed is a usage error (clap exits 2).
    assert_eq!(
        bassim(&["run", "--model", "gaussian", "--r", "0.5", "--n", "64", "--m", "4", "-b", "40",])
            .status
            .code(),
        Some(2)
    );
    // Constraint-violating function for the model.
    assert_eq!(
        bassim(&[
            "run", "--model", "poisson", "--r", "0.5", "--l", "1", "--c0", "0", "--n", "64", "--m",
            "4", "-b", "40", "--seed", "1",
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn encode_decode_roundtrip() {
    let out = bassim(&["encode", "--value", "0.5", "--total", "16"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("bits=10010"), "{text}");
    assert!(text.contains("decoded=0.5"), "{text}");

    let out = bassim(&["decode", "--bits", "10010", "--total", "16"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.5");

    assert_eq!(
        bassim(&["decode", "--bits", "10", "--total", "16"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn run_is_deterministic_and_schema_stable() {
    let args = [
        "run", "--model", "gaussian", "--r", "0.5", "--n", "128", "--m", "8", "-b", "50", "--seed",
        "7",
    ];
    let first = bassim(&args);
    assert!(first.status.success());
    let second = bassim(&args);
    assert_eq!(stdout(&first), stdout(&second));

    let text = stdout(&first);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,r,n,m,B,kappa,j_n,nbass,rate_pred,mse_trunc,mse_tail,max_bits,seed"
    );
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields.len(), 13);
    assert_eq!(fields[0], "gaussian");
    let max_bits: f64 = fields[11].parse().unwrap();
    assert!(max_bits <= 50.0);
    assert_eq!(fields[12], "7");
}

#[test]
fn run_writes_hex_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let out = bassim(&[
        "run",
        "--model",
        "gaussian",
        "--r",
        "0.5",
        "--n",
        "64",
        "--m",
        "4",
        "-b",
        "40",
        "--seed",
        "3",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for (i, line) in lines.iter().enumerate() {
        assert!(
            line.starts_with(&format!("machine={} bits=", i + 1)),
            "{line}"
        );
        assert!(line.contains(" hex="), "{line}");
    }
}

#[test]
fn sweep_and_chart_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.cfg");
    std::fs::write(
        &config_path,
        "model = gaussian\n\
         func.kind = rough\n\
         func.r = 0.5\n\
         func.l = 1.0\n\
         func.c0 = 0.0\n\
         grid.points = 64:32:14 ; 64:64:15 ; 64:128:16\n\
         replicates = 5\n\
         seed = 11\n",
    )
    .unwrap();
    let results = dir.path().join("results.csv");
    let summary = dir.path().join("summary.csv");

    let run_sweep = || {
        bassim(&[
            "sweep",
            "--config",
            config_path.to_str().unwrap(),
            "--out-results",
            results.to_str().unwrap(),
            "--out-summary",
            summary.to_str().unwrap(),
        ])
    };
    let out = run_sweep();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("slope_intermediate="));

    let results_text = std::fs::read_to_string(&results).unwrap();
    let summary_text = std::fs::read_to_string(&summary).unwrap();
    assert!(results_text.starts_with(
        "model,r,n,m,B,replicate,kappa,j_n,nbass,rate_pred,mse_trunc,mse_tail,max_bits,seed\n"
    ));
    assert!(summary_text.starts_with(
        "model,r,n,m,B,kappa,j_n,nbass,regime,rate_pred,replicates,median_mse_trunc,median_mse_tail\n"
    ));
    assert_eq!(results_text.lines().count(), 1 + 3 * 5);
    assert_eq!(summary_text.lines().count(), 1 + 3);

    // Byte-identical on re-run.
    run_sweep();
    assert_eq!(std::fs::read_to_string(&results).unwrap(), results_text);
    assert_eq!(std::fs::read_to_string(&summary).unwrap(), summary_text);

    // Chart from the summary.
    let svg_path = dir.path().join("chart.svg");
    let out = bassim(&[
        "chart",
        "--summary",
        summary.to_str().unwrap(),
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("class=\"point\"").count(), 3);
    assert_eq!(svg.matches("class=\"reference\"").count(), 1);

    // Malformed summary is a config error.
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "model,r\nx\n").unwrap();
    assert_eq!(
        bassim(&["chart", "--summary", broken.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("noseed.cfg");
    std::fs::write(
        &config_path,
        "model = gaussian\n\
         func.kind = zero\n\
         func.r = 0.5\n\
         func.l = 1.0\n\
         grid.points = 64:8:40\n\
         replicates = 2\n",
    )
    .unwrap();
    // No seed anywhere: config error.
    let out = bassim(&["sweep", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let results = dir.path().join("r.csv");
    let summary = dir.path().join("s.csv");
    let out = bassim(&[
        "sweep",
        "--config",
        config_path.to_str().unwrap(),
        "--seed",
        "5",
        "--out-results",
        results.to_str().unwrap(),
        "--out-summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&results).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",5"));
}
