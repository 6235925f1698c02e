use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::time::Instant;

use mtest::montecarlo::{self, Hypothesis, PowerStudy, SimConfig, TestKind};
use mtest::{MarginalSpec, PValueOptions, PValueResult, Sided, TableCounts};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::report::{self, fmt_num, json_num};
use crate::table_text::parse_table;
use crate::{
    BenchArgs, Cli, CliError, Command, CountArgs, Format, GridArgs, GridSided, PArgs, PowerArgs,
    SimulateArgs, Workload, MAX_TABLES_ENV,
};

const ALTERNATIVE_MODEL: &str = "independent uniform probability vector per column";
const NULL_MODEL: &str = "one uniform probability vector shared by all columns";
const BARNARD_STATISTIC: &str = "pooled score (Wald) statistic, maximum over a midpoint grid with golden-section refinement";

type CmdResult = Result<(), CliError>;

pub(crate) fn execute(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    let opts = pvalue_options()?;
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            // Output is rendered inside the pool, then written by the caller.
            let mut buf = Vec::new();
            pool.install(|| dispatch(cli, &opts, &mut buf))?;
            out.write_all(&buf)?;
            Ok(())
        }
        None => dispatch(cli, &opts, out),
    }
}

fn pvalue_options() -> Result<PValueOptions, CliError> {
    let mut opts = PValueOptions::default();
    if let Ok(raw) = std::env::var(MAX_TABLES_ENV) {
        opts.max_tables = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{MAX_TABLES_ENV}: expected a nonnegative integer, got '{raw}'")))?;
    }
    Ok(opts)
}

fn dispatch(cli: &Cli, opts: &PValueOptions, out: &mut dyn Write) -> CmdResult {
    let format = cli.format;
    match &cli.command {
        Command::P(a) => cmd_p(a, opts, format, out),
        Command::Grid(a) => cmd_grid(a, format, out),
        Command::Simulate(a) => cmd_simulate(a, opts, format, out),
        Command::Power(a) => cmd_power(a, opts, format, out),
        Command::Count(a) => cmd_count(a, format, out),
        Command::Bench(a) => cmd_bench(a, opts, format, out),
    }
}

fn metadata(extra: &[(&str, Value)], opts: &PValueOptions) -> Value {
    let mut m = Map::new();
    m.insert("version".into(), json!(mtest::VERSION));
    m.insert("tie_tolerance".into(), json!(opts.tie_tolerance));
    m.insert("max_tables".into(), json!(opts.max_tables));
    for (k, v) in extra {
        m.insert((*k).into(), v.clone());
    }
    Value::Object(m)
}

fn write_json(out: &mut dyn Write, command: &str, body: Value, meta: Value) -> CmdResult {
    let mut obj = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("results".into(), other);
            m
        }
    };
    obj.insert("command".into(), json!(command));
    obj.insert("metadata".into(), meta);
    serde_json::to_writer_pretty(&mut *out, &Value::Object(obj))?;
    writeln!(out)?;
    Ok(())
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn spec_2x2(marginals: &[usize]) -> Result<MarginalSpec, CliError> {
    if marginals.len() != 2 {
        return Err(CliError::Usage("expected two marginals n1,n2".into()));
    }
    Ok(MarginalSpec::binomial(marginals.to_vec())?)
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

// ---- p ----------------------------------------------------------------

fn cmd_p(a: &PArgs, opts: &PValueOptions, format: Format, out: &mut dyn Write) -> CmdResult {
    let tables: Vec<TableCounts> = match (&a.table, &a.input) {
        (Some(text), _) => vec![parse_table(text)?],
        (None, Some(path)) => {
            let rows: Vec<report::TableColumn> = report::read_csv(File::open(path)?)?;
            rows.iter().map(|r| parse_table(&r.table)).collect::<Result<_, _>>()?
        }
        (None, None) => return Err(CliError::Usage("need --table or --input".into())),
    };
    let sided = Sided::from(a.sided);
    let results: Vec<PValueResult> = tables
        .iter()
        .map(|t| mtest::pvalue(t, sided, opts))
        .collect::<Result<_, _>>()?;

    match format {
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(report::PVALUE_HEADER)?;
            for (t, r) in tables.iter().zip(&results) {
                w.write_record([
                    t.to_string(),
                    r.sided.to_string(),
                    fmt_num(r.p_value),
                    fmt_num(r.log_p_value),
                    fmt_num(r.offset_log_prob.value()),
                    fmt_num(r.p_value_unclamped),
                    r.tables_total.to_string(),
                    r.tables_included.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let items: Vec<Value> = tables
                .iter()
                .zip(&results)
                .map(|(t, r)| {
                    json!({
                        "table": t.to_string(),
                        "sided": r.sided.to_string(),
                        "p_value": json_num(r.p_value),
                        "log_p_value": json_num(r.log_p_value),
                        "offset_log_prob": json_num(r.offset_log_prob.value()),
                        "p_value_unclamped": json_num(r.p_value_unclamped),
                        "tables_total": r.tables_total.to_string(),
                        "tables_included": r.tables_included,
                    })
                })
                .collect();
            write_json(out, "p", json!({ "results": items }), metadata(&[], opts))?;
        }
    }
    Ok(())
}

// ---- grid -------------------------------------------------------------

fn cmd_grid(a: &GridArgs, format: Format, out: &mut dyn Write) -> CmdResult {
    let spec = spec_2x2(&a.marginals)?;
    let (n1, n2) = (spec.marginals()[0], spec.marginals()[1]);
    let two = matches!(a.sided, GridSided::Two | GridSided::Both)
        .then(|| mtest::probability_grid(&spec, Sided::Two))
        .transpose()?;
    let one = matches!(a.sided, GridSided::One | GridSided::Both)
        .then(|| mtest::probability_grid(&spec, Sided::One))
        .transpose()?;
    let cell = |g: &Option<Vec<mtest::GridRow>>, i: usize| g.as_ref().map(|g| g[i].probability);

    match format {
        Format::Csv => {
            let mut w = csv_writer(out);
            let mut header = vec!["s1", "f1", "s2", "f2"];
            if two.is_some() {
                header.push("two_sided");
            }
            if one.is_some() {
                header.push("one_sided");
            }
            w.write_record(&header)?;
            let mut i = 0;
            for s1 in 0..=n1 {
                for s2 in 0..=n2 {
                    let mut rec = vec![s1.to_string(), (n1 - s1).to_string(), s2.to_string(), (n2 - s2).to_string()];
                    rec.extend(cell(&two, i).map(fmt_num));
                    rec.extend(cell(&one, i).map(fmt_num));
                    w.write_record(&rec)?;
                    i += 1;
                }
            }
            w.flush()?;
        }
        Format::Json => {
            let mut rows = Vec::with_capacity((n1 + 1) * (n2 + 1));
            let mut i = 0;
            for s1 in 0..=n1 {
                for s2 in 0..=n2 {
                    let mut r = Map::new();
                    r.insert("s1".into(), json!(s1));
                    r.insert("f1".into(), json!(n1 - s1));
                    r.insert("s2".into(), json!(s2));
                    r.insert("f2".into(), json!(n2 - s2));
                    if let Some(p) = cell(&two, i) {
                        r.insert("two_sided".into(), json_num(p));
                        r.insert("two_sided_log".into(), json_num(p.ln()));
                    }
                    if let Some(p) = cell(&one, i) {
                        r.insert("one_sided".into(), json_num(p));
                        r.insert("one_sided_log".into(), json_num(p.ln()));
                    }
                    rows.push(Value::Object(r));
                    i += 1;
                }
            }
            let meta = metadata(&[("marginals", json!([n1, n2]))], &PValueOptions::default());
            write_json(out, "grid", json!({ "rows": rows }), meta)?;
        }
    }
    Ok(())
}

// ---- simulate ---------------------------------------------------------

fn cmd_simulate(a: &SimulateArgs, opts: &PValueOptions, format: Format, out: &mut dyn Write) -> CmdResult {
    let cfg = SimConfig {
        spec: MarginalSpec::new(a.rows, a.marginals.clone())?,
        n_sims: a.n_sims,
        hypothesis: Hypothesis::from(a.hypothesis),
        seed: a.seed,
    };
    let tables = montecarlo::simulate_parallel(&cfg)?;
    let pvalues = if a.pvalues {
        let sided = Sided::from(a.sided);
        let mut distinct: Vec<&TableCounts> = tables.iter().collect();
        distinct.sort_by(|x, y| x.as_flat().cmp(y.as_flat()));
        distinct.dedup();
        let single = PValueOptions { threads: Some(1), ..*opts };
        let values: Vec<f64> = distinct
            .par_iter()
            .map(|t| mtest::pvalue(t, sided, &single).map(|r| r.p_value))
            .collect::<Result<_, _>>()?;
        let lookup: HashMap<&TableCounts, f64> = distinct.into_iter().zip(values).collect();
        Some(tables.iter().map(|t| lookup[t]).collect::<Vec<_>>())
    } else {
        None
    };

    match format {
        Format::Csv => {
            let mut w = csv_writer(out);
            if pvalues.is_some() {
                w.write_record(["index", "table", "p_value"])?;
            } else {
                w.write_record(["index", "table"])?;
            }
            for (i, t) in tables.iter().enumerate() {
                let mut rec = vec![i.to_string(), t.to_string()];
                if let Some(p) = &pvalues {
                    rec.push(fmt_num(p[i]));
                }
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = tables
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let mut r = json!({ "index": i, "table": t.to_string() });
                    if let Some(p) = &pvalues {
                        r["p_value"] = json_num(p[i]);
                    }
                    r
                })
                .collect();
            let model = match cfg.hypothesis {
                Hypothesis::AlternativeIndependent => ALTERNATIVE_MODEL,
                Hypothesis::NullShared => NULL_MODEL,
                Hypothesis::OneSidedNull => "two uniforms, the larger is column 1's success rate",
            };
            let meta = metadata(
                &[
                    ("seed", json!(a.seed)),
                    ("hypothesis", json!(cfg.hypothesis.name())),
                    ("model", json!(model)),
                    ("rng", json!("ChaCha8, splitmix64-derived shard seeds")),
                ],
                opts,
            );
            write_json(out, "simulate", json!({ "tables": rows }), meta)?;
        }
    }
    Ok(())
}

// ---- power ------------------------------------------------------------

fn cmd_power(a: &PowerArgs, opts: &PValueOptions, format: Format, out: &mut dyn Write) -> CmdResult {
    if a.tests.is_empty() {
        return Err(CliError::Usage("--tests needs at least one test".into()));
    }
    if a.tests.contains(&TestKind::Barnard) && a.grid_points == 0 {
        return Err(CliError::Usage("--grid-points must be positive".into()));
    }
    let mut study = PowerStudy::new(spec_2x2(&a.marginals)?, a.n_sims, a.seed);
    study.tests = a.tests.clone();
    study.alphas = a.alphas.clone();
    study.barnard_grid = a.grid_points;
    study.pvalue = PValueOptions { threads: Some(1), ..*opts };
    let result = montecarlo::run_power_study(&study)?;

    match (format, a.roc) {
        (Format::Csv, false) => {
            let mut w = csv_writer(out);
            w.write_record(report::POWER_HEADER)?;
            for r in &result.curve.rows {
                w.write_record([fmt_num(r.alpha), r.test.clone(), fmt_num(r.tpr), fmt_num(r.fpr)])?;
            }
            w.flush()?;
        }
        (Format::Csv, true) => {
            let mut w = csv_writer(out);
            w.write_record(["test", "fpr", "tpr"])?;
            for (i, test) in study.tests.iter().enumerate() {
                for p in result.roc(i) {
                    w.write_record([test.name().to_string(), fmt_num(p.fpr), fmt_num(p.tpr)])?;
                }
            }
            w.flush()?;
        }
        (Format::Json, roc) => {
            let rows: Vec<Value> = result
                .curve
                .rows
                .iter()
                .map(|r| json!({ "alpha": json_num(r.alpha), "test": r.test, "tpr": json_num(r.tpr), "fpr": json_num(r.fpr) }))
                .collect();
            let mut body = json!({ "rows": rows });
            if roc {
                let curves: Map<String, Value> = study
                    .tests
                    .iter()
                    .enumerate()
                    .map(|(i, test)| {
                        let pts: Vec<Value> = result
                            .roc(i)
                            .iter()
                            .map(|p| json!({ "fpr": json_num(p.fpr), "tpr": json_num(p.tpr) }))
                            .collect();
                        (test.name().to_string(), Value::Array(pts))
                    })
                    .collect();
                body["roc"] = Value::Object(curves);
            }
            let meta = metadata(
                &[
                    ("seed", json!(a.seed)),
                    ("alternative_seed", json!(study.alternative_seed())),
                    ("n_sims", json!(a.n_sims)),
                    ("marginals", json!(a.marginals)),
                    ("null_model", json!(NULL_MODEL)),
                    ("alternative_model", json!(ALTERNATIVE_MODEL)),
                    ("barnard_grid_points", json!(a.grid_points)),
                    ("barnard_statistic", json!(BARNARD_STATISTIC)),
                ],
                opts,
            );
            write_json(out, "power", body, meta)?;
        }
    }
    Ok(())
}

// ---- count ------------------------------------------------------------

fn cmd_count(a: &CountArgs, format: Format, out: &mut dyn Write) -> CmdResult {
    let spec = MarginalSpec::new(a.rows, a.marginals.clone())?;
    let n = mtest::count_tables(&spec);
    match format {
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(["rows", "marginals", "tables"])?;
            w.write_record([a.rows.to_string(), join(&a.marginals), n.to_string()])?;
            w.flush()?;
        }
        Format::Json => {
            let body = json!({ "rows": a.rows, "marginals": a.marginals, "tables": n.to_string() });
            write_json(out, "count", body, metadata(&[], &PValueOptions::default()))?;
        }
    }
    Ok(())
}

// ---- bench ------------------------------------------------------------

struct BenchCase {
    workload: &'static str,
    table: &'static str,
    sided: Sided,
}

const BENCH_CASES: [BenchCase; 3] = [
    BenchCase { workload: "2x2-400", table: "150,250;250,150", sided: Sided::Two },
    BenchCase { workload: "2x2-400", table: "150,250;250,150", sided: Sided::One },
    BenchCase { workload: "2x5-16", table: "8,6,9,7,8;8,10,7,9,8", sided: Sided::Two },
];

fn cmd_bench(a: &BenchArgs, opts: &PValueOptions, format: Format, out: &mut dyn Write) -> CmdResult {
    let wanted = |name: &str| match a.workload {
        Workload::All => true,
        Workload::TwoByTwo400 => name == "2x2-400",
        Workload::TwoByFive16 => name == "2x5-16",
    };
    let mut rows = Vec::new();
    for case in BENCH_CASES.iter().filter(|c| wanted(c.workload)) {
        let t = parse_table(case.table)?;
        let start = Instant::now();
        let r = mtest::pvalue(&t, case.sided, opts)?;
        let seconds = start.elapsed().as_secs_f64();
        rows.push((case, r, seconds));
    }
    match format {
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(["workload", "sided", "tables", "p_value", "seconds"])?;
            for (case, r, s) in &rows {
                w.write_record([
                    case.workload.to_string(),
                    case.sided.to_string(),
                    r.tables_total.to_string(),
                    fmt_num(r.p_value),
                    fmt_num(*s),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|(case, r, s)| {
                    json!({
                        "workload": case.workload,
                        "table": case.table,
                        "sided": case.sided.to_string(),
                        "tables": r.tables_total.to_string(),
                        "p_value": json_num(r.p_value),
                        "seconds": json_num(*s),
                    })
                })
                .collect();
            let threads = rayon::current_num_threads();
            write_json(out, "bench", json!({ "results": items }), metadata(&[("threads", json!(threads))], opts))?;
        }
    }
    Ok(())
}
