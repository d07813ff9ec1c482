//! Trace directories: `graph.txt`, `trace.csv` and one function CSV per
//! entry under `states/`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::continuation::ContinuationTrace;
use crate::discretize::GraphFunction;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::graph::MetricGraph;

pub const TRACE_HEADER: &str = "step,parameter,p,rho,mu,lambda,energy,mass,residual,morse_unconstrained,morse_constrained,peak_value,peak_edge,peak_s,substeps,newton_iterations,verified";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("{}: {e}", path.display()))
}

pub fn state_file_name(step: usize) -> String {
    format!("step_{step:03}.csv")
}

/// Renders `trace.csv`.
pub fn trace_csv(trace: &ContinuationTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (k, e) in trace.entries.iter().enumerate() {
        let s = &e.state;
        let (mu_u, mu_c) = match &s.morse {
            Some(m) => (m.unconstrained.to_string(), m.constrained.to_string()),
            None => (String::new(), String::new()),
        };
        let vals = s.values();
        let imax = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
        let x = s.u.mesh().coordinate(imax);
        let edge = &s.u.mesh().graph().edges()[x.edge].id;
        let _ = writeln!(
            out,
            "{k},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{mu_u},{mu_c},{:e},{edge},{:e},{},{},{}",
            e.parameter,
            s.params.p,
            s.params.rho,
            s.params.mu,
            s.lambda,
            s.energy,
            s.mass,
            s.residuals.combined,
            vals[imax],
            x.s,
            e.substeps,
            e.newton_iterations,
            e.report.all_pass()
        );
    }
    out
}

pub fn write_trace_dir(dir: &Path, trace: &ContinuationTrace) -> Result<()> {
    let states = dir.join("states");
    fs::create_dir_all(&states).map_err(|e| io_err(&states, e))?;
    let graph = trace.entries[0].state.u.mesh().graph().to_text();
    let gp = dir.join("graph.txt");
    fs::write(&gp, graph).map_err(|e| io_err(&gp, e))?;
    let tp = dir.join("trace.csv");
    fs::write(&tp, trace_csv(trace)).map_err(|e| io_err(&tp, e))?;
    for (k, e) in trace.entries.iter().enumerate() {
        let sp = states.join(state_file_name(k));
        fs::write(&sp, e.state.u.to_csv()).map_err(|e| io_err(&sp, e))?;
    }
    Ok(())
}

/// One entry read back from a trace directory.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub step: usize,
    pub parameter: f64,
    pub params: EnergyParams,
    pub lambda: f64,
    pub u: GraphFunction,
}

pub fn read_trace_dir(dir: &Path) -> Result<(MetricGraph, Vec<TraceRecord>)> {
    let gp = dir.join("graph.txt");
    let graph = MetricGraph::parse(&fs::read_to_string(&gp).map_err(|e| io_err(&gp, e))?)?;
    let tp = dir.join("trace.csv");
    let text = fs::read_to_string(&tp).map_err(|e| io_err(&tp, e))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: &str| Error::Parse {
            line: idx + 1,
            message: m.to_string(),
        };
        if f.len() != TRACE_HEADER.split(',').count() {
            return Err(bad("wrong number of trace columns"));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad("bad number"));
        let step: usize = f[0].parse().map_err(|_| bad("bad step"))?;
        let params = EnergyParams {
            p: num(2)?,
            rho: num(3)?,
            mu: num(4)?,
        };
        let sp = dir.join("states").join(state_file_name(step));
        let u = GraphFunction::from_csv(&graph, &fs::read_to_string(&sp).map_err(|e| io_err(&sp, e))?)?;
        records.push(TraceRecord {
            step,
            parameter: num(1)?,
            params,
            lambda: num(5)?,
            u,
        });
    }
    Ok((graph, records))
}
