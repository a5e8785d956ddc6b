use std::path::PathBuf;
use std::process::{Command, Output};

fn ahlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahlp")).args(args).env_remove("AHLP_WORKERS").output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ahlp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generated(name: &str, args: &[&str]) -> String {
    let path = tmp(name);
    let p = path.to_str().unwrap().to_string();
    let mut all = vec!["generate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["-o", &p]);
    let o = ahlp(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("planted objective"));
    p
}

#[test]
fn generate_is_deterministic() {
    let a = ahlp(&["generate", "--blocks", "8", "--local-links", "2", "--seed", "1"]);
    let b = ahlp(&["generate", "--blocks", "8", "--local-links", "2", "--seed", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn zero_blocks_is_usage_error() {
    assert_eq!(ahlp(&["generate", "--blocks", "0"]).status.code(), Some(64));
    assert_eq!(ahlp(&["solve"]).status.code(), Some(64));
    assert_eq!(ahlp(&["--help"]).status.code(), Some(0));
}

#[test]
fn inspect_reports_flat_bound() {
    let p = generated("n3.ahlp", &["--blocks", "3", "--local-links", "1", "--global-links", "0", "--linking-vars", "0", "--root-rows", "0"]);
    let o = ahlp(&["inspect", "-i", &p]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("flat Schur nnz bound:     4"), "{text}");
    let j: serde_json::Value = serde_json::from_slice(&ahlp(&["inspect", "-i", &p, "--json"]).stdout).unwrap();
    assert_eq!(j["flat_schur_nnz_bound"], 4);
    assert_eq!(j["global_links"], 0);
}

#[test]
fn only_global_links_give_zero_band() {
    let p = generated("glob.ahlp", &["--blocks", "6", "--local-links", "0", "--global-links", "2"]);
    let j: serde_json::Value = serde_json::from_slice(&ahlp(&["inspect", "-i", &p, "--json"]).stdout).unwrap();
    assert_eq!(j["band_bound"], 0);
}

#[test]
fn malformed_input_reports_line() {
    let good = generated("good.ahlp", &["--blocks", "3", "--seed", "2"]);
    let text = std::fs::read_to_string(&good).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[4] = "zzz 1 2";
    let bad = tmp("bad.ahlp");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let o = ahlp(&["solve", "-i", bad.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn solve_json_lines_and_check() {
    let p = generated("n8.ahlp", &["--blocks", "8", "--local-links", "2", "--seed", "1"]);
    let o = ahlp(&["solve", "-i", &p, "--json", "--check", "--layers", "2", "--ranks", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let records: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let summary = records.last().unwrap();
    assert_eq!(summary["type"], "summary");
    assert_eq!(summary["status"], "optimal");
    assert_eq!(summary["check"]["ok"], true);
    assert_eq!(records.len() - 1, summary["iterations"].as_u64().unwrap() as usize);
    for key in ["factor", "solve", "reduce", "total"] {
        assert!(summary["times"][key].is_number());
    }
    assert!(records[..records.len() - 1].iter().all(|r| r["type"] == "iteration"));
}

#[test]
fn solver_choice_and_output_file() {
    let p = generated("n4.ahlp", &["--blocks", "4", "--seed", "3"]);
    let sol = tmp("sol.json");
    let mut objs = Vec::new();
    for solver in ["dense", "flat", "hierarchical"] {
        let o = ahlp(&["solve", "-i", &p, "--json", "--solver", solver, "-o", sol.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let last: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
        objs.push(last["objective"].as_f64().unwrap());
        let x: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
        assert_eq!(x["blocks"].as_array().unwrap().len(), 5);
    }
    assert!(objs.iter().all(|o| (o - objs[0]).abs() <= 1e-6 * (1.0 + objs[0].abs())));
    assert_eq!(ahlp(&["solve", "-i", &p, "--solver", "magic"]).status.code(), Some(64));
    assert_eq!(ahlp(&["solve", "-i", &p, "--layers", "7"]).status.code(), Some(64));
}

#[test]
fn iteration_cap_exits_two() {
    let p = generated("cap.ahlp", &["--blocks", "4", "--seed", "4"]);
    assert_eq!(ahlp(&["solve", "-i", &p, "--max-iter", "1"]).status.code(), Some(2));
}

#[test]
fn bench_emits_one_row_per_cell() {
    let p = generated("bench.ahlp", &["--blocks", "4", "--seed", "5"]);
    let o = ahlp(&["bench", "-i", &p, "--ranks", "1,2,4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ranks,layers,factor_s,solve_s,total_s,iterations");
    assert_eq!(lines.len(), 4);
    let ranks: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ranks, ["1", "2", "4"]);
}
