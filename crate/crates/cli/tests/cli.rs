//! End-to-end behaviour of the command-line tool.

use mtest_cli::report::{read_csv, CountRecord, GridRecord, PValueRecord, PowerRecord, RocRecord, SimRecord};
use mtest_cli::{parse_table, run};
use proptest::prelude::*;

fn exec(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["mtest"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = exec(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

#[test]
fn one_sided_p_of_the_smallest_table() {
    let rows: Vec<PValueRecord> = read_csv(ok(&["p", "--table", "0,1;1,0", "--sided", "one"]).as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0].p_value - 1.0 / 12.0).abs() < 1e-14);
    assert_eq!(rows[0].sided, "one");
    assert_eq!(rows[0].tables_total, "4");
}

#[test]
fn two_sided_p_with_a_tie() {
    let rows: Vec<PValueRecord> = read_csv(ok(&["p", "--table", "1,0;0,1"]).as_bytes()).unwrap();
    assert!((rows[0].p_value - 1.0 / 3.0).abs() < 1e-14);
    assert_eq!(rows[0].tables_included, 2);
}

#[test]
fn grid_sides() {
    let two: Vec<GridRecord> = read_csv(ok(&["grid", "--marginals", "10,7", "--sided", "two"]).as_bytes()).unwrap();
    assert_eq!(two.len(), 88);
    assert!(two.iter().all(|r| r.one_sided.is_none()));
    let sum: f64 = two.iter().map(|r| r.two_sided.unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-10);
    let one: Vec<GridRecord> = read_csv(ok(&["grid", "--marginals", "3,2", "--sided", "one"]).as_bytes()).unwrap();
    assert_eq!(one.len(), 12);
    assert!(one.iter().all(|r| r.two_sided.is_none() && r.s1 + r.f1 == 3 && r.s2 + r.f2 == 2));
}

#[test]
fn count_matches_workload_size() {
    let rows: Vec<CountRecord> = read_csv(ok(&["count", "--marginals", "16,16,16,16,16"]).as_bytes()).unwrap();
    assert_eq!(rows[0].tables, "1419857");
    let rows: Vec<CountRecord> = read_csv(ok(&["count", "--marginals", "2,2", "--rows", "3"]).as_bytes()).unwrap();
    assert_eq!(rows[0].tables, "36");
}

#[test]
fn simulate_output_feeds_back_into_p() {
    let sim = ok(&["simulate", "--marginals", "4,3", "-N", "25", "--seed", "9", "--pvalues"]);
    let records: Vec<SimRecord> = read_csv(sim.as_bytes()).unwrap();
    assert_eq!(records.len(), 25);
    for r in &records {
        let t = parse_table(&r.table).unwrap();
        assert_eq!(t.column_sums(), vec![4, 3]);
    }

    let path = std::env::temp_dir().join(format!("mtest-sim-{}.csv", std::process::id()));
    std::fs::write(&path, &sim).unwrap();
    let p = ok(&["p", "--input", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    let pvals: Vec<PValueRecord> = read_csv(p.as_bytes()).unwrap();
    assert_eq!(pvals.len(), records.len());
    for (s, p) in records.iter().zip(&pvals) {
        assert_eq!(s.table, p.table);
        assert_eq!(s.p_value, Some(p.p_value));
    }
}

#[test]
fn power_and_roc_round_trip() {
    let args = ["power", "--marginals", "5,4", "-N", "500", "--seed", "3", "--alphas", "0.05,0.1"];
    let rows: Vec<PowerRecord> = read_csv(ok(&args).as_bytes()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.tpr) && (0.0..=1.0).contains(&r.fpr)));
    let mut roc_args = args.to_vec();
    roc_args.push("--roc");
    let roc: Vec<RocRecord> = read_csv(ok(&roc_args).as_bytes()).unwrap();
    for test in ["mtest", "fisher", "barnard"] {
        let pts: Vec<&RocRecord> = roc.iter().filter(|r| r.test == test).collect();
        assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 0.0));
        assert_eq!((pts.last().unwrap().fpr, pts.last().unwrap().tpr), (1.0, 1.0));
    }
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let commands: [&[&str]; 4] = [
        &["simulate", "--marginals", "6,5,4", "--rows", "3", "-N", "3000", "--seed", "11", "--pvalues"],
        &["power", "--marginals", "6,5", "-N", "2000", "--seed", "5"],
        &["grid", "--marginals", "9,4"],
        &["p", "--table", "2,3,1;4,0,5"],
    ];
    for cmd in commands {
        let reference = ok(cmd);
        assert_eq!(ok(cmd), reference);
        for threads in ["1", "3", "8"] {
            let mut args = vec!["--threads", threads];
            args.extend_from_slice(cmd);
            assert_eq!(ok(&args), reference, "{cmd:?} with {threads} threads");
        }
    }
}

#[test]
fn json_mode_carries_metadata() {
    let out = ok(&["--format", "json", "power", "--marginals", "4,4", "-N", "200", "--seed", "8"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "power");
    assert_eq!(v["metadata"]["seed"], 8);
    assert_eq!(v["metadata"]["barnard_grid_points"], 100);
    assert_eq!(v["metadata"]["tie_tolerance"], 1e-9);
    assert!(v["metadata"]["alternative_model"].is_string());
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);

    let out = ok(&["--format", "json", "p", "--table", "0,0;300,300"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["results"][0]["log_p_value"].as_f64().unwrap().is_finite());
}

#[test]
fn exit_codes() {
    let (code, _, err) = exec(&["p", "--nope"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
    assert!(err.contains("Commands:"), "help text expected: {err}");
    assert_eq!(exec(&["p", "--table", "1,2;3"]).0, 2);
    assert_eq!(exec(&["p", "--table", "1,-2;3,4"]).0, 2);
    assert_eq!(exec(&["grid", "--marginals", "3,0"]).0, 2);
    assert_eq!(exec(&["simulate", "--marginals", "3,3,3", "-N", "5", "--hypothesis", "one-sided-null"]).0, 2);
    assert_eq!(exec(&["p", "--table", "1,2;3,4", "--sided", "one", "--threads", "0"]).0, 2);
    assert_eq!(exec(&["p", "--input", "/nonexistent/tables.csv"]).0, 1);
    assert_eq!(exec(&["--help"]).0, 0);
}

#[test]
fn capacity_cap_from_environment() {
    // The only test touching this variable.
    std::env::set_var(mtest_cli::MAX_TABLES_ENV, "100");
    let over = exec(&["p", "--table", "3,1,2;1,3,2"]);
    let under = exec(&["p", "--table", "3,1;1,3"]);
    std::env::set_var(mtest_cli::MAX_TABLES_ENV, "many");
    let bad = exec(&["p", "--table", "3,1;1,3"]);
    std::env::remove_var(mtest_cli::MAX_TABLES_ENV);
    assert_eq!(over.0, 3, "{}", over.2);
    assert_eq!(under.0, 0);
    assert_eq!(bad.0, 2);
}

proptest! {
    #[test]
    fn table_text_round_trips(d in 2usize..5, m in 1usize..5, seed in prop::collection::vec(0usize..50, 16)) {
        let rows: Vec<Vec<usize>> = (0..d).map(|r| (0..m).map(|c| seed[r * 4 + c]).collect()).collect();
        let text = rows.iter().map(|r| r.iter().map(usize::to_string).collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join(";");
        let t = parse_table(&text).unwrap();
        prop_assert_eq!(t.to_string(), text);
    }
}
