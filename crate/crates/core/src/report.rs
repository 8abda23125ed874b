//! CSV and JSON emission for runs, traces and verification reports.
//! CSV: comma-separated, header row, `.` decimals, LF line endings.
//! JSON: serde-serialized structs, stable key order.

use crate::coeffs::SweepReport;
use crate::eigen::EigenSystem;
use crate::error::Result;
use crate::experiments::{NormSeries, ShockOutput, ShockReport, StripGeometry};
use crate::params::PhysParams;
use crate::solver::{CharTrace, Field, Run};
use crate::state::Regime;
use serde::Serialize;
use std::io::Write;

pub fn write_field_csv<W: Write>(out: &mut W, field: &Field) -> Result<()> {
    writeln!(out, "x,u1,u2,u3,rho_minus_1,H2,H3,S")?;
    for (j, row) in field.phi.iter().enumerate() {
        write!(out, "{}", field.grid.x(j))?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_run_csv<W: Write>(out: &mut W, run: &Run) -> Result<()> {
    writeln!(out, "t,x,u1,u2,u3,rho_minus_1,H2,H3,S")?;
    for snap in &run.snapshots {
        for (j, row) in snap.phi.iter().enumerate() {
            write!(out, "{},{}", snap.time, snap.grid.x(j))?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: &mut W, trace: &CharTrace) -> Result<()> {
    writeln!(out, "family,z,t,x,rho,w,v")?;
    for s in &trace.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            trace.family + 1,
            trace.z,
            s.t,
            s.x,
            s.rho,
            s.w,
            s.v
        )?;
    }
    Ok(())
}

/// One row per eigenpair: family, eigenvalue, right components, left
/// components.
pub fn write_eigen_csv<W: Write>(out: &mut W, label: &str, es: &EigenSystem) -> Result<()> {
    write!(out, "label,family,lambda")?;
    for a in 0..7 {
        write!(out, ",r{}", a + 1)?;
    }
    for a in 0..7 {
        write!(out, ",l{}", a + 1)?;
    }
    writeln!(out)?;
    for i in 0..es.dim() {
        write!(out, "{label},{},{}", i + 1, es.lambdas[i])?;
        for a in 0..7 {
            write!(out, ",{}", es.right[i][a])?;
        }
        for a in 0..7 {
            write!(out, ",{}", es.left[i][a])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_norms_csv<W: Write>(out: &mut W, norms: &NormSeries) -> Result<()> {
    writeln!(out, "t,S,J,V,W_check,W,U_bar")?;
    for k in 0..norms.t.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            norms.t[k],
            norms.s[k],
            norms.j[k],
            norms.v[k],
            norms.w_check[k],
            norms.w[k],
            norms.u_bar[k]
        )?;
    }
    Ok(())
}

/// JSON run summary: lifespan data, per-family extrema and final norms.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub regime: &'static str,
    pub params: PhysParams,
    pub kind: String,
    pub n_nodes: usize,
    pub w0: f64,
    pub z0: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub shock: Option<ShockReport>,
    pub stopped_at: f64,
    pub min_rho_per_family: Vec<f64>,
    pub max_w_per_family: Vec<f64>,
    pub norms: Option<crate::experiments::NormReport>,
    pub geometry: StripGeometry,
}

impl RunSummary {
    pub fn from_output(out: &ShockOutput) -> RunSummary {
        let n = out.regime.dim();
        RunSummary {
            regime: out.regime.name(),
            params: out.params,
            kind: format!("{:?}", out.kind),
            n_nodes: out.grid.n,
            w0: out.w0,
            z0: out.z0,
            t_lo: out.t_lo,
            t_hi: out.t_hi,
            shock: out.shock.clone(),
            stopped_at: out.stopped_at,
            min_rho_per_family: out.min_rho[..n].to_vec(),
            max_w_per_family: out.max_abs_w[..n].to_vec(),
            norms: out.norms.at_end(),
            geometry: out.geometry.clone(),
        }
    }
}

/// JSON verification report of the coefficient structure checks.
#[derive(Debug, Serialize)]
pub struct CoeffReport {
    pub sweep: SweepReport,
    pub fd_samples: usize,
    pub fd_max_rel_err: f64,
    pub closed_form_max_rel_err: f64,
    pub pass: bool,
}

/// JSON verification report of the eigenstructure checks.
#[derive(Debug, Serialize)]
pub struct EigenReport {
    pub regime: Regime,
    pub samples: usize,
    pub max_duality_residual: f64,
    pub max_oracle_deviation: f64,
    pub ordering_ok: bool,
    pub pass: bool,
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::Config(format!("json: {e}")))
}
