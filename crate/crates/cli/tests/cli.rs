use std::path::Path;
use std::process::{Command, Output};

use spillover_core::{bfs_shells, EdgeList};

fn spillover(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// The single data row of a one-row CSV, keyed by header.
fn row(path: &Path) -> Vec<(String, String)> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().clone();
    let record = reader.records().next().unwrap().unwrap();
    header.iter().map(String::from).zip(record.iter().map(String::from)).collect()
}

fn field(row: &[(String, String)], key: &str) -> String {
    row.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no column {key}")).1.clone()
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&spillover(d, &["generate", "--ring", "4", "--radius", "2"])), 2);
    assert_eq!(code(&spillover(d, &["generate", "--radius", "2"])), 2);

    let bad = d.join("bad.txt");
    std::fs::write(&bad, "# units 3 radius 1\n0 1 0,1\n").unwrap();
    assert_eq!(code(&spillover(d, &["generate", "--structure", bad.to_str().unwrap()])), 3);

    let big = ["misspec", "--ring", "20", "--radius", "2", "--transform", "shell_swap"];
    assert_eq!(code(&spillover(d, &big)), 4);
    assert_eq!(code(&spillover(d, &[&big[..], &["--closed-only"]].concat())), 0);
    assert!(d.join("misspec_report.csv").is_file());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "# experiment\nring = 10\nradius = 2\np = 0.3\nseed = 4\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    assert_eq!(code(&spillover(d, &["simulate", "--config", cfg])), 0);
    let from_file = row(&d.join("estimate.csv"));
    assert_eq!(field(&from_file, "p").parse::<f64>().unwrap(), 0.3);

    assert_eq!(code(&spillover(d, &["simulate", "--config", cfg, "--p", "0.7"])), 0);
    let overridden = row(&d.join("estimate.csv"));
    assert_eq!(field(&overridden, "p").parse::<f64>().unwrap(), 0.7);
    assert_eq!(field(&overridden, "seed"), "4");
}

#[test]
fn edge_list_input_matches_bfs_shells() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 5), (5, 6)];
    let text: String = edges.iter().map(|(a, b)| format!("{a} {b}\n")).collect();
    let path = d.join("edges.txt");
    std::fs::write(&path, text).unwrap();

    let out = spillover(d, &["generate", "--edges", path.to_str().unwrap(), "--radius", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let expected = bfs_shells(&EdgeList::new(7, edges).unwrap(), 3).unwrap().to_dump_string();
    assert_eq!(std::fs::read_to_string(d.join("structure.txt")).unwrap(), expected);
}

#[test]
fn truth_oracle_agrees_with_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for seed in ["0", "1", "2"] {
        let out = spillover(d, &["truth", "--grid", "4x3", "--radius", "2", "--model-seed", seed]);
        assert_eq!(code(&out), 0);
        let r = row(&d.join("truth.csv"));
        let closed: f64 = field(&r, "policy_effect").parse().unwrap();
        let oracle: f64 = field(&r, "policy_oracle").parse().unwrap();
        assert!((closed - oracle).abs() <= 1e-10, "{closed} vs {oracle}");
    }
}

#[test]
fn identity_transform_agrees_in_sign_when_effects_share_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (beta, gamma) in [("0,2", "0,2"), ("0,0", "0.1,2"), ("-2,0", "-2,0")] {
        let (beta_flag, gamma_flag) = (format!("--beta-range={beta}"), format!("--gamma-range={gamma}"));
        let out = spillover(d, &["misspec", "--ring", "9", "--radius", "2", &beta_flag, &gamma_flag]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let r = row(&d.join("misspec_report.csv"));
        assert_eq!(field(&r, "sign_agree"), "true", "beta {beta}, gamma {gamma}");
        assert_eq!(field(&r, "gamma_breve_closed"), field(&r, "gamma_bar"));
    }
}

#[test]
fn demos_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for kind in ["sign_flip", "magnitude_inflation", "cancellation"] {
        assert_eq!(code(&spillover(d, &["demo", kind])), 0);
        for file in ["structure.txt", "assumed.txt", "model.txt", "misspec_report.csv", "weights.csv"] {
            assert!(d.join(file).is_file(), "{kind}: missing {file}");
        }
    }
    let r = row(&d.join("misspec_report.csv"));
    assert_eq!(field(&r, "magnitude_ratio"), "inf");
    assert_ne!(code(&spillover(d, &["demo", "no_such_kind"])), 0);
}
