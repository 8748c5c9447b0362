//! Output schemas. Each checker returns the first deviation it finds.

use anyhow::{bail, ensure, Context, Result};
use serde_json::Value;
use std::path::Path;

pub const STUDY_HEADER: &str = "kernel,k,ell,seed,accept_rate,ess_per_iter,wall_ms";
pub const LONG_HEADER: &str = "kernel,k,ell,seed,metric,value";

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn require<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).with_context(|| format!("missing key `{key}`"))
}

fn numeric_fields(line: &str, from: usize, n: usize) -> Result<()> {
    let cells: Vec<&str> = line.split(',').collect();
    ensure!(cells.len() == n, "row `{line}` has {} fields, expected {n}", cells.len());
    for c in &cells[from..] {
        c.parse::<f64>().with_context(|| format!("non-numeric field `{c}` in `{line}`"))?;
    }
    Ok(())
}

/// `iter,accepted,log_density,x_0..x_{k-1}` with 0/1 accept flags.
pub fn check_trace_csv(path: &Path, dim: usize) -> Result<usize> {
    let text = read(path)?;
    let mut lines = text.lines();
    let header = lines.next().context("empty trace")?;
    let mut want = vec!["iter".to_string(), "accepted".into(), "log_density".into()];
    want.extend((0..dim).map(|i| format!("x_{i}")));
    ensure!(header == want.join(","), "trace header `{header}`");
    let mut rows = 0;
    for (t, line) in lines.enumerate() {
        numeric_fields(line, 0, dim + 3)?;
        let mut cells = line.split(',');
        ensure!(cells.next() == Some(t.to_string().as_str()), "iteration column out of order at row {t}");
        ensure!(matches!(cells.next(), Some("0" | "1")), "accept flag at row {t}");
        rows += 1;
    }
    Ok(rows)
}

pub fn check_study_csv(path: &Path) -> Result<usize> {
    let text = read(path)?;
    let mut lines = text.lines();
    ensure!(lines.next() == Some(STUDY_HEADER), "study header");
    let mut rows = 0;
    for line in lines {
        numeric_fields(line, 1, 7)?;
        rows += 1;
    }
    Ok(rows)
}

pub fn check_long_csv(path: &Path) -> Result<usize> {
    let text = read(path)?;
    let mut lines = text.lines();
    ensure!(lines.next() == Some(LONG_HEADER), "long-format header");
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        ensure!(cells.len() == 6, "row `{line}`");
        for i in [1, 2, 3, 5] {
            cells[i].parse::<f64>().with_context(|| format!("row `{line}`"))?;
        }
        rows += 1;
    }
    Ok(rows)
}

/// A JSON array of verdict objects.
pub fn check_verdicts_json(path: &Path) -> Result<usize> {
    let v = read_json(path)?;
    let arr = v.as_array().context("verdicts must be a JSON array")?;
    for (i, item) in arr.iter().enumerate() {
        let ctx = || format!("verdict {i}");
        require(item, "check_name").with_context(ctx)?.as_str().with_context(ctx)?;
        require(item, "passed").with_context(ctx)?.as_bool().with_context(ctx)?;
        require(item, "expected_failure").with_context(ctx)?.as_bool().with_context(ctx)?;
        require(item, "tolerance").with_context(ctx)?.as_f64().with_context(ctx)?;
        // A NaN violation serializes as null.
        let mv = require(item, "max_violation").with_context(ctx)?;
        ensure!(mv.is_number() || mv.is_null(), "verdict {i}: max_violation");
        let seed = require(item, "seed").with_context(ctx)?;
        ensure!(seed.is_u64() || seed.is_null(), "verdict {i}: seed");
        ensure!(require(item, "details")?.is_object(), "verdict {i}: details");
    }
    Ok(arr.len())
}

fn check_run_summary(s: &Value, dim: usize) -> Result<()> {
    for key in ["kernel", "target"] {
        require(s, key)?.as_str().with_context(|| key.to_string())?;
    }
    for key in ["seed", "n_chains", "n_iter", "burn_in"] {
        require(s, key)?.as_u64().with_context(|| key.to_string())?;
    }
    require(s, "mean_accept_rate")?.as_f64().context("mean_accept_rate")?;
    require(s, "wall_ms")?.as_f64().context("wall_ms")?;
    let rates = require(s, "accept_rate")?.as_array().context("accept_rate")?;
    ensure!(rates.len() as u64 == s["n_chains"].as_u64().unwrap(), "one acceptance rate per chain");
    let coords = require(s, "coordinates")?.as_array().context("coordinates")?;
    ensure!(coords.len() == dim, "{} coordinate summaries, expected {dim}", coords.len());
    for c in coords {
        for key in ["mean", "sd", "ess", "mcse"] {
            require(c, key)?.as_f64().with_context(|| key.to_string())?;
        }
        require(c, "rhat")?;
    }
    Ok(())
}

/// `summary.json` written by `sample`.
pub fn check_sample_summary(path: &Path, dim: usize) -> Result<()> {
    let v = read_json(path)?;
    ensure!(require(&v, "config")?.is_object(), "config");
    ensure!(require(&v, "traces")?.is_array(), "traces");
    check_run_summary(&v, dim)
}

/// `study_summary.json` written by `scaling-study`; returns the optimal rows.
pub fn check_study_summary(path: &Path) -> Result<usize> {
    let v = read_json(path)?;
    ensure!(require(&v, "spec")?.is_object(), "spec");
    let rows = require(&v, "optimal")?.as_array().context("optimal")?;
    for r in rows {
        require(r, "kernel")?.as_str().context("kernel")?;
        require(r, "k")?.as_u64().context("k")?;
        for key in ["ell_star", "accept_rate", "ess_per_iter"] {
            require(r, key)?.as_f64().with_context(|| key.to_string())?;
        }
    }
    Ok(rows.len())
}

/// `challenger.json` written by `challenger`.
pub fn check_challenger(path: &Path) -> Result<()> {
    let v = read_json(path)?;
    for kernel in ["tmcmc", "rwmh"] {
        check_run_summary(require(&v, kernel)?, 2).with_context(|| kernel.to_string())?;
    }
    let mode = require(&v, "laplace_mode")?.as_array().context("laplace_mode")?;
    ensure!(mode.len() == 2, "laplace_mode");
    require(&v, "max_rhat")?.as_f64().context("max_rhat")?;
    if !require(&v, "disagreement")?.is_boolean() {
        bail!("disagreement must be a boolean");
    }
    Ok(())
}
