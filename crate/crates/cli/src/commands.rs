//! One function per command; each returns the CSV text and a JSON result.

use std::collections::BTreeMap;

use hg_core::blowup::{blowup_time, limit_profile_at_t, Verdict};
use hg_core::kernel::{batch_csv, evaluate_batch};
use hg_core::longtime::{
    build_oscillating_data, classify_longtime, refine_with_trace, rescaling_residual, splice_difference, splice_shadow, trace_at_origin,
};
use hg_core::measures::{btv_norm, meps_norm, read_measure, uniform_norm, write_measure, Measure};
use hg_core::trace::{build_trace_solution, eval_trace_solution, verify_trace, DEFAULT_TRUNCATION};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::manifest::{Command, Probes, RunManifest};
use crate::CliError;

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: String,
    pub rows: usize,
    pub result: Value,
    /// Integrand evaluations (or series terms) per operation, where the
    /// operation reports them.
    pub nodes: BTreeMap<String, usize>,
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn measure(m: &RunManifest) -> Result<Measure, CliError> {
    let path = m
        .inputs
        .measure
        .as_ref()
        .ok_or_else(|| CliError::Validation(format!("{} needs inputs.measure", m.command)))?;
    Ok(read_measure(path)?)
}

fn csv_from(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn axis_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x_{i}")).collect()
}

pub fn dispatch(m: &RunManifest) -> Result<Artifacts, CliError> {
    let cfg = &m.quadrature;
    match m.command {
        Command::Evaluate => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                probes: Probes,
                times: Vec<f64>,
            }
            let p: P = m.params()?;
            let mu = measure(m)?;
            let xs = p.probes.points(mu.dimension, m.seed)?;
            let points: Vec<(Vec<f64>, f64)> = xs.iter().flat_map(|x| p.times.iter().map(move |t| (x.clone(), *t))).collect();
            let values = evaluate_batch(&mu, &points, cfg).into_iter().collect::<hg_core::Result<Vec<_>>>()?;
            let nodes = values.iter().map(|v| v.nodes).sum();
            let max = values.iter().fold(0.0f64, |a, v| a.max(v.value.abs()));
            Ok(Artifacts {
                csv: batch_csv(mu.dimension, &points, &values),
                rows: values.len(),
                result: json!({ "max_abs_value": max }),
                nodes: BTreeMap::from([("evaluate".to_string(), nodes)]),
            })
        }
        Command::Norms => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                #[serde(default)]
                eps: Vec<f64>,
                #[serde(default)]
                btv: bool,
                #[serde(default)]
                uniform: bool,
            }
            let p: P = m.params()?;
            let mu = measure(m)?;
            let mut rows = Vec::new();
            for e in &p.eps {
                rows.push(vec!["meps".into(), f(*e), f(meps_norm(&mu, *e, cfg)?)]);
            }
            if p.btv {
                rows.push(vec!["btv".into(), String::new(), f(btv_norm(&mu, cfg)?)]);
            }
            if p.uniform {
                rows.push(vec!["uniform".into(), String::new(), f(uniform_norm(&mu, cfg)?)]);
            }
            let g = mu.growth_index();
            rows.push(vec!["eps0".into(), String::new(), f(g.eps0)]);
            Ok(Artifacts {
                csv: csv_from("quantity,parameter,value", &rows),
                rows: rows.len(),
                result: json!({ "eps0": g.eps0, "maximal_time": g.maximal_time() }),
                nodes: BTreeMap::new(),
            })
        }
        Command::BlowupMap => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                probes: Probes,
            }
            let p: P = m.params()?;
            let mu = measure(m)?;
            let xs = p.probes.points(mu.dimension, m.seed)?;
            let profile = limit_profile_at_t(&mu, &xs, cfg)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            let rows: Vec<Vec<String>> = profile
                .iter()
                .map(|(x, c)| {
                    let (verdict, limit) = match &c.verdict {
                        Verdict::GlobalInTime => ("global_in_time", String::new()),
                        Verdict::Regular { limit, .. } => ("regular", f(*limit)),
                        Verdict::Blowup => ("blowup", String::new()),
                        Verdict::Undetermined => ("undetermined", String::new()),
                    };
                    *counts.entry(verdict).or_default() += 1;
                    let mut r: Vec<String> = x.iter().map(|v| f(*v)).collect();
                    r.extend([verdict.to_string(), limit, c.diagnostics.shells_used.to_string()]);
                    r
                })
                .collect();
            let mut header = axis_header(mu.dimension);
            header.extend(["verdict", "limit_or_blank", "shells_used"].map(String::from));
            Ok(Artifacts {
                csv: csv_from(&header.join(","), &rows),
                rows: rows.len(),
                result: json!({ "blowup_time": blowup_time(&mu)?, "verdicts": counts }),
                nodes: BTreeMap::new(),
            })
        }
        Command::Oscillate => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                targets: Vec<f64>,
                #[serde(default = "one")]
                dimension: usize,
                /// Where to write the constructed data, relative to the
                /// output.
                measure_out: Option<std::path::PathBuf>,
            }
            let p: P = m.params()?;
            let (mu, spec) = build_oscillating_data(&p.targets, p.dimension)?;
            if let Some(out) = &p.measure_out {
                let path = m.output.parent().map(|d| d.join(out)).unwrap_or_else(|| out.clone());
                write_measure(&path, &mu)?;
            }
            let u = trace_at_origin(&mu, &spec.t, cfg)?;
            let mut all_pass = true;
            let rows: Vec<Vec<String>> = (0..spec.b.len())
                .map(|k| {
                    let pass = (u[k] - spec.b[k]).abs() <= spec.error_bounds[k];
                    all_pass &= pass;
                    vec![
                        (k + 1).to_string(),
                        f(spec.b[k]),
                        f(spec.r[k]),
                        f(spec.lambda[k]),
                        f(spec.t[k]),
                        f(u[k]),
                        f(spec.error_bounds[k]),
                        pass.to_string(),
                    ]
                })
                .collect();
            let violated = spec.violated_conditions();
            Ok(Artifacts {
                csv: csv_from("k,b_k,r_k,lambda_k,t_k,u0tk,bound,pass", &rows),
                rows: rows.len(),
                result: json!({ "all_pass": all_pass, "violated_conditions": violated }),
                nodes: BTreeMap::new(),
            })
        }
        Command::Trace => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                times: Vec<f64>,
            }
            let p: P = m.params()?;
            let mu = measure(m)?;
            let u = trace_at_origin(&mu, &p.times, cfg)?;
            let rows: Vec<Vec<String>> = p.times.iter().zip(&u).map(|(t, v)| vec![f(*t), f(*v)]).collect();
            Ok(Artifacts {
                csv: csv_from("t,u0t", &rows),
                rows: rows.len(),
                result: json!({}),
                nodes: BTreeMap::new(),
            })
        }
        Command::TraceSolve => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                coeffs: Vec<f64>,
                c: f64,
                tau: f64,
                horizon: Option<f64>,
                truncation: Option<usize>,
                xs: Vec<f64>,
                times: Vec<f64>,
            }
            let p: P = m.params()?;
            let series = build_trace_solution(
                p.coeffs,
                p.c,
                p.tau,
                p.horizon.unwrap_or(f64::INFINITY),
                p.truncation.unwrap_or(DEFAULT_TRUNCATION),
            )?;
            let mut rows = Vec::new();
            let mut terms = 0;
            let mut worst = 0.0f64;
            for &x in &p.xs {
                for &t in &p.times {
                    let v = eval_trace_solution(&series, x, t, cfg)?;
                    let r = verify_trace(&series, &[t], &[x], cfg)?;
                    terms += v.nodes;
                    worst = worst.max(r);
                    rows.push(vec![f(x), f(t), f(v.value), f(r)]);
                }
            }
            Ok(Artifacts {
                csv: csv_from("x,t,u,residual", &rows),
                rows: rows.len(),
                result: json!({ "max_residual": worst }),
                nodes: BTreeMap::from([("series_terms".to_string(), terms)]),
            })
        }
        Command::Classify => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                #[serde(default = "default_k_max")]
                k_max: usize,
                /// Trace samples at `t = 4^k` refining a bounded verdict.
                #[serde(default)]
                refine_k: Vec<i32>,
                #[serde(default = "default_refine_rel")]
                refine_rel: f64,
            }
            let p: P = m.params()?;
            let mu = measure(m)?;
            let mut v = classify_longtime(&mu, p.k_max, cfg);
            if !p.refine_k.is_empty() {
                v = refine_with_trace(&mu, v, &p.refine_k, p.refine_rel, cfg)?;
            }
            let e = &v.evidence;
            let rows: Vec<Vec<String>> = (0..e.radii.len())
                .map(|i| {
                    let ann = if e.annulus_averages[i].is_nan() { String::new() } else { f(e.annulus_averages[i]) };
                    vec![f(e.radii[i]), ann, f(e.ball_averages[i])]
                })
                .collect();
            Ok(Artifacts {
                csv: csv_from("radius,annulus_average,ball_average", &rows),
                rows: rows.len(),
                result: json!({
                    "verdict": v.kind,
                    "criterion": e.criterion,
                    "liminf_positive": e.liminf_positive,
                    "trace": e.trace,
                }),
                nodes: BTreeMap::new(),
            })
        }
        Command::Shadow => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                /// Oscillation targets; used when `inputs.outer` is absent.
                #[serde(default)]
                targets: Vec<f64>,
                radii: Vec<f64>,
                probes: Probes,
                times: Vec<f64>,
            }
            let p: P = m.params()?;
            let v0 = measure(m)?;
            let outer = match &m.inputs.outer {
                Some(path) => read_measure(path)?,
                None if !p.targets.is_empty() => build_oscillating_data(&p.targets, v0.dimension)?.0,
                None => return Err(CliError::Validation("shadow needs inputs.outer or params.targets".into())),
            };
            let xs = p.probes.points(v0.dimension, m.seed)?;
            let mut rows = Vec::new();
            let mut diffs = Vec::new();
            for &r in &p.radii {
                let spliced = splice_shadow(&v0, &outer, r)?;
                let d = splice_difference(&v0, &spliced, &xs, &p.times, cfg)?;
                diffs.push(d);
                rows.push(vec![f(r), f(d)]);
            }
            let nonincreasing = diffs.windows(2).all(|w| w[1] <= w[0]);
            Ok(Artifacts {
                csv: csv_from("radius,sup_difference", &rows),
                rows: rows.len(),
                result: json!({ "nonincreasing": nonincreasing, "evaluations": 2 * xs.len() * p.times.len() * p.radii.len() }),
                nodes: BTreeMap::new(),
            })
        }
        Command::Rescale => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct P {
                lambdas: Vec<f64>,
                probes: Probes,
            }
            let p: P = m.params()?;
            let mu = measure(m)?;
            let xs = p.probes.points(mu.dimension, m.seed)?;
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for &l in &p.lambdas {
                let r = rescaling_residual(&mu, l, &xs, cfg)?;
                worst = worst.max(r);
                rows.push(vec![f(l), f(r)]);
            }
            Ok(Artifacts {
                csv: csv_from("lambda,residual", &rows),
                rows: rows.len(),
                result: json!({ "max_residual": worst }),
                nodes: BTreeMap::new(),
            })
        }
    }
}

fn one() -> usize {
    1
}

fn default_k_max() -> usize {
    12
}

fn default_refine_rel() -> f64 {
    1e-6
}
