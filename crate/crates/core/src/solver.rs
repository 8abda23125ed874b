//! Grid evolution of `d_t Phi + A(Phi) d_x Phi = 0` by a characteristic
//! upwind method of lines, plus characteristic / bi-characteristic tracing
//! through the computed field.
//!
//! Scheme: at every node the two upwind-biased one-sided differences are
//! decomposed into wave amplitudes, each amplitude is selected by the sign of
//! its speed, the update is reassembled as `-sum_k lambda_k w_k r_k`, and
//! time stepping is two-stage second order (Heun). The solver is trusted
//! pre-shock only; runs stop once an inverse density hits its floor.
//!
//! Traces integrate `X` by the field speed and carry `rho_i` and
//! `v_i = rho_i w_i` as ODEs along the curve: writing the `m = i` term of the
//! compression equation through `v_i` removes any dependence on the steepening
//! family's own (eventually under-resolved) field amplitude, so the shock
//! diagnostics stay well conditioned down to the density floor.

use crate::coeffs::eigen_derivatives;
use crate::decomp::decompose_raw;
use crate::eigen::{eigen_for_scheme, EigenSystem};
use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::scalar::dot7;
use crate::state::{Regime, State};
use rayon::prelude::*;
use serde::Serialize;

pub const CFL_MAX: f64 = 0.4;
pub const RHO_FLOOR: f64 = 1e-3;

/// Uniform grid: node `j` sits at `x_lo + j * dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x_lo: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Grid {
        assert!(n >= 8 && x_hi > x_lo);
        Grid {
            x_lo,
            dx: (x_hi - x_lo) / (n - 1) as f64,
            n,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_lo + self.dx * j as f64
    }

    pub fn x_hi(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi()
    }

    /// Inside the grid with a margin of `cells` nodes to spare: the region
    /// where interpolation stencils never touch the clamped boundary.
    pub fn contains_interior(&self, x: f64, cells: usize) -> bool {
        let pad = cells as f64 * self.dx;
        x >= self.x_lo + pad && x <= self.x_hi() - pad
    }
}

/// Grid field at one time.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Grid,
    pub phi: Vec<[f64; 7]>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, phi: Vec<[f64; 7]>, time: f64) -> Field {
        assert_eq!(phi.len(), grid.n);
        Field { grid, phi, time }
    }

    pub fn constant(grid: Grid, value: [f64; 7], time: f64) -> Field {
        let n = grid.n;
        Field::new(grid, vec![value; n], time)
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.grid.x_lo) / self.grid.dx).clamp(0.0, (self.grid.n - 1) as f64);
        let j = (s.floor() as usize).min(self.grid.n - 2);
        (j, s - j as f64)
    }

    /// Linear interpolation of the state at `x` (clamped to the grid).
    pub fn interp_state(&self, x: f64) -> State {
        let (j, a) = self.locate(x);
        let mut phi = [0.0; 7];
        for c in 0..7 {
            phi[c] = (1.0 - a) * self.phi[j][c] + a * self.phi[j + 1][c];
        }
        State::new(phi)
    }

    /// Fourth-order centered gradient at a node (clamped stencil near the
    /// boundaries). This is the measurement-side derivative feeding the
    /// amplitude diagnostics; its truncation error must sit well below the
    /// `eta W0^2`-sized quantities read off the decomposition.
    fn node_grad(&self, j: usize) -> [f64; 7] {
        let n = self.grid.n;
        let mut g = [0.0; 7];
        if j >= 2 && j + 2 < n {
            let (m2, m1, p1, p2) = (
                &self.phi[j - 2],
                &self.phi[j - 1],
                &self.phi[j + 1],
                &self.phi[j + 2],
            );
            let scale = 1.0 / (12.0 * self.grid.dx);
            for c in 0..7 {
                g[c] = (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) * scale;
            }
        } else {
            let jm = j.saturating_sub(1);
            let jp = (j + 1).min(n - 1);
            if jp > jm {
                let scale = 1.0 / ((jp - jm) as f64 * self.grid.dx);
                for c in 0..7 {
                    g[c] = (self.phi[jp][c] - self.phi[jm][c]) * scale;
                }
            }
        }
        g
    }

    /// Spatial gradient at `x`: centered differences at the nodes,
    /// interpolated linearly in between.
    pub fn interp_grad(&self, x: f64) -> [f64; 7] {
        let (j, a) = self.locate(x);
        let gl = self.node_grad(j);
        let gr = self.node_grad(j + 1);
        let mut g = [0.0; 7];
        for c in 0..7 {
            g[c] = (1.0 - a) * gl[c] + a * gr[c];
        }
        g
    }

    pub fn max_norm_inf(&self, regime: Regime) -> f64 {
        self.phi
            .iter()
            .map(|row| {
                row[..regime.dim()]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Largest |lambda| over the nodes; the CFL speed.
pub fn max_abs_lambda(field: &Field, p: &PhysParams, regime: Regime) -> Result<f64> {
    let chunk = 1024;
    let maxima: Vec<f64> = field
        .phi
        .par_chunks(chunk)
        .map(|rows| {
            let mut m = 0.0f64;
            for row in rows {
                let st = State::new(*row);
                if let Ok(ws) = crate::state::wave_speeds(&st, p, regime) {
                    m = m.max(st.u1().abs() + ws.cf);
                } else {
                    m = f64::NAN;
                }
            }
            m
        })
        .collect();
    let m = maxima.into_iter().fold(0.0f64, f64::max);
    if m.is_nan() {
        return Err(Error::NonFiniteState(field.time));
    }
    Ok(m)
}

fn stage_rhs(
    phi: &[[f64; 7]],
    grid: &Grid,
    p: &PhysParams,
    regime: Regime,
    out: &mut [[f64; 7]],
) -> Result<()> {
    let n = grid.n;
    let nd = regime.dim();
    let inv6dx = 1.0 / (6.0 * grid.dx);
    let idx = |i: isize| -> usize { i.clamp(0, (n - 1) as isize) as usize };
    out.par_iter_mut().enumerate().try_for_each(|(j, out_j)| {
        let jj = j as isize;
        let pm2 = &phi[idx(jj - 2)];
        let pm1 = &phi[idx(jj - 1)];
        let p0 = &phi[j];
        let pp1 = &phi[idx(jj + 1)];
        let pp2 = &phi[idx(jj + 2)];
        // Third-order upwind-biased one-sided differences, written as
        // combinations of neighbor differences so constants cancel exactly.
        let mut dm = [0.0; 7];
        let mut dp = [0.0; 7];
        for c in 0..nd {
            dm[c] = ((pm2[c] - pm1[c]) - 5.0 * (pm1[c] - p0[c]) - 2.0 * (p0[c] - pp1[c]))
                * inv6dx;
            dp[c] = (-(pp2[c] - pp1[c]) + 5.0 * (pp1[c] - p0[c]) + 2.0 * (p0[c] - pm1[c]))
                * inv6dx;
        }
        let st = State::new(*p0);
        let es = eigen_for_scheme(&st, p, regime)?;
        let wm = decompose_raw(&dm, &es);
        let wp = decompose_raw(&dp, &es);
        let mut rhs = [0.0; 7];
        for k in 0..nd {
            let lam = es.lambdas[k];
            let w = if lam >= 0.0 { wm[k] } else { wp[k] };
            let lw = lam * w;
            for (a, r) in rhs.iter_mut().enumerate().take(nd) {
                *r -= lw * es.right[k][a];
            }
        }
        *out_j = rhs;
        Ok::<(), Error>(())
    })
}

/// One Heun step of the upwind scheme. `dt` must respect the CFL limit.
pub fn step_field(field: &Field, p: &PhysParams, regime: Regime, dt: f64) -> Result<Field> {
    let lam = max_abs_lambda(field, p, regime)?;
    let dt_max = CFL_MAX * field.grid.dx / lam;
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::CflViolation(dt, dt_max));
    }
    let n = field.grid.n;
    let mut k1 = vec![[0.0; 7]; n];
    stage_rhs(&field.phi, &field.grid, p, regime, &mut k1)?;
    let mut mid: Vec<[f64; 7]> = field
        .phi
        .par_iter()
        .zip(&k1)
        .map(|(u, k)| {
            let mut v = *u;
            for c in 0..7 {
                v[c] += dt * k[c];
            }
            v
        })
        .collect();
    let mut k2 = vec![[0.0; 7]; n];
    stage_rhs(&mid, &field.grid, p, regime, &mut k2)?;
    mid.par_iter_mut()
        .zip(field.phi.par_iter())
        .zip(k1.par_iter().zip(&k2))
        .for_each(|((v, u), (a, b))| {
            for c in 0..7 {
                v[c] = u[c] + 0.5 * dt * (a[c] + b[c]);
            }
        });
    let next = Field::new(field.grid, mid, field.time + dt);
    for row in &next.phi {
        for c in 0..regime.dim() {
            if !row[c].is_finite() {
                return Err(Error::NonFiniteState(next.time));
            }
        }
    }
    let norm = next.max_norm_inf(regime);
    if norm > p.ball_radius() {
        return Err(Error::BallExit(norm, p.ball_radius()));
    }
    Ok(next)
}

/// Stored evolution: strided snapshots (the first and last steps always
/// included), the step sizes taken, and the shock flag if tracing stopped
/// the run.
#[derive(Debug)]
pub struct Run {
    pub regime: Regime,
    pub snapshots: Vec<Field>,
    pub dt_history: Vec<f64>,
    pub shock: Option<ShockEvent>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShockEvent {
    pub time: f64,
    pub z: f64,
    pub family: usize,
}

impl Run {
    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map(|f| f.time).unwrap_or(0.0)
    }

    /// Snapshot pair bracketing `t`, with the interpolation weight.
    fn bracket(&self, t: f64) -> (&Field, &Field, f64) {
        let ts = &self.snapshots;
        let mut hi = ts.partition_point(|f| f.time < t).min(ts.len() - 1);
        if hi == 0 {
            hi = 1;
        }
        let (a, b) = (&ts[hi - 1], &ts[hi]);
        let span = (b.time - a.time).max(f64::MIN_POSITIVE);
        let w = ((t - a.time) / span).clamp(0.0, 1.0);
        (a, b, w)
    }

    pub fn interp_state(&self, x: f64, t: f64) -> State {
        let (a, b, w) = self.bracket(t);
        let sa = a.interp_state(x);
        let sb = b.interp_state(x);
        let mut phi = [0.0; 7];
        for c in 0..7 {
            phi[c] = (1.0 - w) * sa.phi[c] + w * sb.phi[c];
        }
        State::new(phi)
    }

    pub fn interp_grad(&self, x: f64, t: f64) -> [f64; 7] {
        let (a, b, w) = self.bracket(t);
        let ga = a.interp_grad(x);
        let gb = b.interp_grad(x);
        let mut g = [0.0; 7];
        for c in 0..7 {
            g[c] = (1.0 - w) * ga[c] + w * gb[c];
        }
        g
    }
}

/// Evolves `initial` until `t_max`, storing every `snapshot_stride`-th step.
pub fn simulate(
    initial: Field,
    p: &PhysParams,
    regime: Regime,
    t_max: f64,
    snapshot_stride: usize,
) -> Result<Run> {
    let stride = snapshot_stride.max(1);
    let mut run = Run {
        regime,
        snapshots: vec![initial],
        dt_history: Vec::new(),
        shock: None,
    };
    let mut cur = run.snapshots[0].clone();
    let mut step = 0usize;
    while cur.time < t_max - 1e-12 {
        let lam = max_abs_lambda(&cur, p, regime)?;
        let dt = (CFL_MAX * cur.grid.dx / lam).min(t_max - cur.time);
        let next = step_field(&cur, p, regime, dt)?;
        run.dt_history.push(dt);
        step += 1;
        if step % stride == 0 || next.time >= t_max - 1e-12 {
            run.snapshots.push(next.clone());
        }
        cur = next;
    }
    Ok(run)
}

/// Per-family coefficient rows used by the trace ODEs:
/// `c[m] = c^i_im`, `g_im[m] = gamma^i_im`, `g_km[k][m] = gamma^i_km`.
#[derive(Debug, Clone, Copy)]
pub struct FamilyRows {
    pub c: [f64; 7],
    pub g_im: [f64; 7],
    pub g_km: [[f64; 7]; 7],
}

/// Coefficient rows for family `i` at a state. Uses the scheme-side
/// degenerate-direction convention so it stays defined along any trace.
pub fn family_rows(i: usize, state: &State, p: &PhysParams, regime: Regime) -> Result<FamilyRows> {
    let mut st = *state;
    if regime == Regime::Mhd && st.h_perp_sq(regime) < crate::eigen::H_PERP_SQ_FLOOR {
        st.phi[4] = crate::eigen::H_PERP_CONVENTION;
        st.phi[5] = 0.0;
    }
    let d = eigen_derivatives(&st, p, regime)?;
    let n = regime.dim();
    let mut rows = FamilyRows {
        c: [0.0; 7],
        g_im: [0.0; 7],
        g_km: [[0.0; 7]; 7],
    };
    for m in 0..n {
        rows.c[m] = dot7(&d.grad_lambda[i], &d.es.right[m]);
    }
    let jac_apply = |k: usize, m: usize| -> [f64; 7] {
        let mut out = [0.0; 7];
        for a in 0..7 {
            out[a] = dot7(&d.jac[k][a], &d.es.right[m]);
        }
        out
    };
    for m in 0..n {
        if m == i {
            continue;
        }
        let jim = jac_apply(i, m);
        let jmi = jac_apply(m, i);
        let mut diff = [0.0; 7];
        for a in 0..7 {
            diff[a] = jim[a] - jmi[a];
        }
        rows.g_im[m] = -(d.es.lambdas[i] - d.es.lambdas[m]) * dot7(&d.es.left[i], &diff);
        for k in 0..n {
            if k == i || k == m {
                continue;
            }
            rows.g_km[k][m] =
                -(d.es.lambdas[k] - d.es.lambdas[m]) * dot7(&d.es.left[i], &jac_apply(k, m));
        }
    }
    Ok(rows)
}

/// One sample along a characteristic trace. `w` is the transported amplitude
/// `v / rho`; `w_field` holds the field-decomposed amplitudes of all
/// families at the trace point.
#[derive(Debug, Clone, Copy)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub rho: f64,
    pub w: f64,
    pub v: f64,
    pub w_field: [f64; 7],
}

#[derive(Debug, Clone)]
pub struct CharTrace {
    pub family: usize,
    pub z: f64,
    pub samples: Vec<TraceSample>,
    /// Set when the trace left the grid before the run ended.
    pub truncated: bool,
}

impl CharTrace {
    pub fn min_rho(&self) -> f64 {
        self.samples.iter().map(|s| s.rho).fold(f64::INFINITY, f64::min)
    }

    /// Position at time `t` by linear interpolation between samples.
    pub fn x_at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let hi = s.partition_point(|q| q.t < t).min(s.len() - 1).max(1);
        let (a, b) = (&s[hi - 1], &s[hi]);
        let w = ((t - a.t) / (b.t - a.t).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
        Some((1.0 - w) * a.x + w * b.x)
    }
}

/// Live integrator state for a single trace, advanced level-to-level.
#[derive(Debug, Clone, Copy)]
pub struct TraceCursor {
    pub family: usize,
    pub z: f64,
    pub x: f64,
    pub rho: f64,
    pub v: f64,
    pub alive: bool,
    rows: Option<FamilyRows>,
    steps_since_rows: usize,
    /// Refresh period (in steps) of the cached coefficient rows. The
    /// coefficients drift on the slow state scale, so streaming runs renew
    /// them every few steps; post-hoc traces use fresh rows each step.
    rows_refresh: usize,
}

impl TraceCursor {
    pub fn new(family: usize, z: f64, w0: f64) -> TraceCursor {
        TraceCursor {
            family,
            z,
            x: z,
            rho: 1.0,
            v: w0,
            alive: true,
            rows: None,
            steps_since_rows: 0,
            rows_refresh: 16,
        }
    }

    pub fn with_fresh_rows(mut self) -> TraceCursor {
        self.rows_refresh = 1;
        self
    }

    /// Cursor resuming from an arbitrary mid-trace sample.
    pub fn resume(family: usize, x: f64, rho: f64, v: f64) -> TraceCursor {
        TraceCursor {
            family,
            z: x,
            x,
            rho,
            v,
            alive: true,
            rows: None,
            steps_since_rows: 0,
            rows_refresh: 1,
        }
    }

    pub fn w(&self) -> f64 {
        self.v / self.rho
    }

    fn rhs(
        &self,
        field: &Field,
        p: &PhysParams,
        regime: Regime,
        rows: &FamilyRows,
        x: f64,
        rho: f64,
        v: f64,
    ) -> Result<(f64, f64, f64, [f64; 7])> {
        let st = field.interp_state(x);
        let es = eigen_for_scheme(&st, p, regime)?;
        let grad = field.interp_grad(x);
        let w = decompose_raw(&grad, &es);
        let i = self.family;
        let n = regime.dim();
        let mut sum_c = 0.0;
        let mut sum_g = 0.0;
        let mut quad = 0.0;
        for m in 0..n {
            if m == i {
                continue;
            }
            sum_c += rows.c[m] * w[m];
            sum_g += rows.g_im[m] * w[m];
            for k in 0..n {
                if k == i || k == m {
                    continue;
                }
                quad += rows.g_km[k][m] * w[k] * w[m];
            }
        }
        let drho = rows.c[i] * v + rho * sum_c;
        let dv = v * sum_g + rho * quad;
        Ok((es.lambdas[i], drho, dv, w))
    }

    /// Heun step across one stored level pair `(f0, f1)`.
    pub fn advance(
        &mut self,
        f0: &Field,
        f1: &Field,
        p: &PhysParams,
        regime: Regime,
    ) -> Result<Option<TraceSample>> {
        if !self.alive {
            return Ok(None);
        }
        let dt = f1.time - f0.time;
        if self.rows.is_none() || self.steps_since_rows >= self.rows_refresh {
            self.rows = Some(family_rows(
                self.family,
                &f0.interp_state(self.x),
                p,
                regime,
            )?);
            self.steps_since_rows = 0;
        }
        let rows = self.rows.as_ref().unwrap();
        let (k1x, k1r, k1v, _) = self.rhs(f0, p, regime, rows, self.x, self.rho, self.v)?;
        let (xp, rp, vp) = (
            self.x + dt * k1x,
            self.rho + dt * k1r,
            self.v + dt * k1v,
        );
        let (k2x, k2r, k2v, wf) = self.rhs(f1, p, regime, rows, xp, rp, vp)?;
        self.x += 0.5 * dt * (k1x + k2x);
        self.rho += 0.5 * dt * (k1r + k2r);
        self.v += 0.5 * dt * (k1v + k2v);
        self.steps_since_rows += 1;
        // Stop once the stencil margin is reached: samples taken against the
        // clamped boundary extrapolation would be junk.
        if !f0.grid.contains_interior(self.x, 4) {
            self.alive = false;
            return Ok(None);
        }
        Ok(Some(TraceSample {
            t: f1.time,
            x: self.x,
            rho: self.rho,
            w: self.w(),
            v: self.v,
            w_field: wf,
        }))
    }

    /// Sample of the cursor's current state against a field level (used for
    /// the launch sample and for flushing the final state of a run).
    pub fn sample_now(&self, f0: &Field, p: &PhysParams, regime: Regime) -> Result<TraceSample> {
        let st = f0.interp_state(self.x);
        let es = eigen_for_scheme(&st, p, regime)?;
        let grad = f0.interp_grad(self.x);
        let wf = decompose_raw(&grad, &es);
        Ok(TraceSample {
            t: f0.time,
            x: self.x,
            rho: self.rho,
            w: self.w(),
            v: self.v,
            w_field: wf,
        })
    }
}

/// Traces the `family` characteristic launched from `z` through a stored run
/// (post-hoc; snapshot stride governs the time resolution).
pub fn trace_characteristic(
    run: &Run,
    p: &PhysParams,
    family: usize,
    z: f64,
) -> Result<CharTrace> {
    let regime = run.regime;
    if family >= regime.dim() {
        return Err(Error::IndexContract(format!(
            "family {family} out of range"
        )));
    }
    let first = run
        .snapshots
        .first()
        .ok_or_else(|| Error::InvalidParams("empty run".into()))?;
    if !first.grid.contains(z) {
        return Err(Error::InvalidParams(format!("launch point {z} off grid")));
    }
    let es0 = eigen_for_scheme(&first.interp_state(z), p, regime)?;
    let w0 = decompose_raw(&first.interp_grad(z), &es0)[family];
    let mut cursor = TraceCursor::new(family, z, w0).with_fresh_rows();
    let mut samples = vec![cursor.sample_now(first, p, regime)?];
    for pair in run.snapshots.windows(2) {
        match cursor.advance(&pair[0], &pair[1], p, regime)? {
            Some(s) => samples.push(s),
            None => break,
        }
    }
    Ok(CharTrace {
        family,
        z,
        samples,
        truncated: !cursor.alive,
    })
}

/// Residual time series of the amplitude transport equations along a trace:
/// the `s`-derivative (centered differences over the samples) of the
/// field-decomposed own amplitude minus the quadratic right-hand side, and
/// the same for `v = rho * w`.
pub fn transport_residual(
    trace: &CharTrace,
    run: &Run,
    p: &PhysParams,
) -> Result<Vec<(f64, f64, f64)>> {
    let regime = run.regime;
    let i = trace.family;
    let n = regime.dim();
    let s = &trace.samples;
    let mut out = Vec::new();
    for j in 1..s.len().saturating_sub(1) {
        let (a, b, c) = (&s[j - 1], &s[j], &s[j + 1]);
        let dt = c.t - a.t;
        let dw = (c.w_field[i] - a.w_field[i]) / dt;
        let dv = (c.rho * c.w_field[i] - a.rho * a.w_field[i]) / dt;
        let st = run.interp_state(b.x, b.t);
        let rows = family_rows(i, &st, p, regime)?;
        let w = &b.w_field;
        let mut lin_w = 0.0;
        let mut lin_v = 0.0;
        let mut quad = 0.0;
        for m in 0..n {
            if m == i {
                continue;
            }
            lin_w += (-rows.c[m] + rows.g_im[m]) * w[m];
            lin_v += rows.g_im[m] * w[m];
            for k in 0..n {
                if k == i || k == m {
                    continue;
                }
                quad += rows.g_km[k][m] * w[k] * w[m];
            }
        }
        let rhs_w = -rows.c[i] * w[i] * w[i] + lin_w * w[i] + quad;
        let rhs_v = lin_v * (b.rho * w[i]) + quad * b.rho;
        out.push((b.t, (dw - rhs_w).abs(), (dv - rhs_v).abs()));
    }
    Ok(out)
}

/// Crossing of two characteristics, located by bisection on the sign of
/// `X_i - X_j` between stored samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Intersection {
    pub x: f64,
    pub t: f64,
    /// `rho_i / (lambda_j - lambda_i)` at the crossing: the analytic value of
    /// `d t' / d y_i` of the bi-characteristic coordinate map.
    pub dt_dyi: f64,
}

pub fn bicharacteristic_intersection(
    run: &Run,
    p: &PhysParams,
    fam_i: usize,
    y_i: f64,
    fam_j: usize,
    y_j: f64,
) -> Result<Option<Intersection>> {
    if fam_i == fam_j {
        return Err(Error::IndexContract(
            "bi-characteristic coordinates need two distinct families".into(),
        ));
    }
    let ti = trace_characteristic(run, p, fam_i, y_i)?;
    let tj = trace_characteristic(run, p, fam_j, y_j)?;
    let t0 = ti.samples[0].t.max(tj.samples[0].t);
    let t1 = ti
        .samples
        .last()
        .unwrap()
        .t
        .min(tj.samples.last().unwrap().t);
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(None);
    }
    let gap = |t: f64| -> Option<f64> { Some(ti.x_at(t)? - tj.x_at(t)?) };
    // Scan at sample resolution for the first sign change, then bisect.
    let steps = (ti.samples.len() + tj.samples.len()).max(64);
    let mut prev_t = t0;
    let mut prev_g = match gap(t0) {
        Some(g) => g,
        None => return Ok(None),
    };
    if prev_g == 0.0 {
        let lam = crossing_lambdas(run, p, fam_i, fam_j, ti.x_at(t0).unwrap(), t0)?;
        let rho = ti.samples[0].rho;
        return Ok(Some(Intersection {
            x: ti.x_at(t0).unwrap(),
            t: t0,
            dt_dyi: rho / lam,
        }));
    }
    for k in 1..=steps {
        let t = t0 + span * k as f64 / steps as f64;
        let Some(g) = gap(t) else { break };
        if g == 0.0 || g.signum() != prev_g.signum() {
            let (mut ta, mut tb) = (prev_t, t);
            for _ in 0..60 {
                let tm = 0.5 * (ta + tb);
                let gm = gap(tm).unwrap();
                if gm == 0.0 {
                    ta = tm;
                    tb = tm;
                    break;
                }
                if gm.signum() == prev_g.signum() {
                    ta = tm;
                } else {
                    tb = tm;
                }
            }
            let tc = 0.5 * (ta + tb);
            let xc = ti.x_at(tc).unwrap();
            let lam = crossing_lambdas(run, p, fam_i, fam_j, xc, tc)?;
            // rho_i at the crossing, interpolated along the i-trace.
            let s = &ti.samples;
            let hi = s.partition_point(|q| q.t < tc).min(s.len() - 1).max(1);
            let (a, b) = (&s[hi - 1], &s[hi]);
            let w = ((tc - a.t) / (b.t - a.t).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            let rho = (1.0 - w) * a.rho + w * b.rho;
            return Ok(Some(Intersection {
                x: xc,
                t: tc,
                dt_dyi: rho / lam,
            }));
        }
        prev_t = t;
        prev_g = g;
    }
    Ok(None)
}

fn crossing_lambdas(
    run: &Run,
    p: &PhysParams,
    fam_i: usize,
    fam_j: usize,
    x: f64,
    t: f64,
) -> Result<f64> {
    let st = run.interp_state(x, t);
    let es: EigenSystem = eigen_for_scheme(&st, p, run.regime)?;
    Ok(es.lambdas[fam_j] - es.lambdas[fam_i])
}

/// Convenience: amplitude field of every family at every node.
pub fn amplitude_field(field: &Field, p: &PhysParams, regime: Regime) -> Result<Vec<[f64; 7]>> {
    let n = field.grid.n;
    let mut out = vec![[0.0; 7]; n];
    out.par_iter_mut().enumerate().try_for_each(|(j, w)| {
        let st = State::new(field.phi[j]);
        let es = eigen_for_scheme(&st, p, regime)?;
        let g = field.node_grad(j);
        *w = decompose_raw(&g, &es);
        Ok::<(), Error>(())
    })?;
    Ok(out)
}

/// Max |l . d_x Phi| outside a window, over the active families; helper for
/// leakage checks.
pub fn max_amplitude(w: &[[f64; 7]], families: &[usize]) -> f64 {
    let mut m = 0.0f64;
    for row in w {
        for &f in families {
            m = m.max(row[f].abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{integrate_profile, WaveProfiles};

    fn p() -> PhysParams {
        PhysParams::default()
    }

    fn bump(x: f64, center: f64, halfwidth: f64) -> f64 {
        let s = (x - center) / halfwidth;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    }

    fn smooth_field(grid: Grid, regime: Regime, amp: f64) -> Field {
        let profiles = WaveProfiles {
            amplitude: Box::new(move |k, x| match k {
                0 => amp * bump(x, 0.0, 0.15),
                3 => 0.2 * amp * bump(x, 0.05, 0.12),
                _ => 0.0,
            }),
            support: (-0.2, 0.2),
        };
        let xs: Vec<f64> = (0..grid.n).map(|j| grid.x(j)).collect();
        let phi = integrate_profile(&profiles, &xs, &p(), regime).unwrap();
        Field::new(grid, phi, 0.0)
    }

    #[test]
    fn constant_field_is_invariant() {
        let grid = Grid::new(-1.0, 1.0, 128);
        let f = Field::constant(grid, [0.0, 0.01, 0.0, 0.02, 0.0, 0.0, -0.01], 0.0);
        let next = step_field(&f, &p(), Regime::Mhd, 1e-3).unwrap();
        for (a, b) in f.phi.iter().zip(&next.phi) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cfl_violation_detected() {
        let grid = Grid::new(-1.0, 1.0, 128);
        let f = Field::constant(grid, [0.0; 7], 0.0);
        let dx = grid.dx;
        match step_field(&f, &p(), Regime::Mhd, dx) {
            Err(Error::CflViolation(_, _)) => {}
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn entropy_simple_wave_is_stationary() {
        // w4-only data in the H1 != 0 regime: lambda_4 = u1 = 0 everywhere,
        // so the field does not move at all.
        let grid = Grid::new(-0.5, 0.5, 256);
        let profiles = WaveProfiles {
            amplitude: Box::new(|k, x| if k == 3 { 0.02 * bump(x, 0.0, 0.2) } else { 0.0 }),
            support: (-0.2, 0.2),
        };
        let xs: Vec<f64> = (0..grid.n).map(|j| grid.x(j)).collect();
        let phi = integrate_profile(&profiles, &xs, &p(), Regime::Mhd).unwrap();
        let f0 = Field::new(grid, phi, 0.0);
        let run = simulate(f0.clone(), &p(), Regime::Mhd, 0.25, 4).unwrap();
        let last = run.snapshots.last().unwrap();
        let mut worst = 0.0f64;
        for (a, b) in f0.phi.iter().zip(&last.phi) {
            for c in 0..7 {
                worst = worst.max((a[c] - b[c]).abs());
            }
        }
        // Stationary up to the discretization noise of the decomposition.
        assert!(worst < 1e-10, "entropy profile moved by {worst:e}");
    }

    #[test]
    fn self_convergence_order_at_least_1_8() {
        // Smooth pre-steepening data; compare against a 4x-refined reference.
        let t_end = 0.2;
        let mut errs = Vec::new();
        // Cell counts chosen so coarse nodes coincide with fine nodes.
        let fine_n = 4097;
        let fine = {
            let grid = Grid::new(-1.0, 1.0, fine_n);
            let f0 = smooth_field(grid, Regime::H1Zero, 0.01);
            simulate(f0, &p(), Regime::H1Zero, t_end, usize::MAX)
                .unwrap()
                .snapshots
                .last()
                .unwrap()
                .clone()
        };
        for n in [1025usize, 2049] {
            let grid = Grid::new(-1.0, 1.0, n);
            let f0 = smooth_field(grid, Regime::H1Zero, 0.01);
            let run = simulate(f0, &p(), Regime::H1Zero, t_end, usize::MAX).unwrap();
            let last = run.snapshots.last().unwrap();
            let stride = (fine_n - 1) / (n - 1);
            let mut e = 0.0f64;
            for j in 0..n {
                for c in 0..7 {
                    e = e.max((last.phi[j][c] - fine.phi[j * stride][c]).abs());
                }
            }
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(
            order >= 1.8,
            "self-convergence order {order:.2} (errors {errs:?})"
        );
    }

    #[test]
    fn trace_through_zero_field_is_straight() {
        let grid = Grid::new(-1.0, 3.0, 512);
        let f = Field::constant(grid, [0.0; 7], 0.0);
        let run = simulate(f, &p(), Regime::Mhd, 0.5, 1).unwrap();
        let tr = trace_characteristic(&run, &p(), 0, -0.5).unwrap();
        let cf = 2.0f64.sqrt();
        for s in &tr.samples {
            assert!((s.x - (-0.5 + cf * s.t)).abs() < 1e-9);
            assert!((s.rho - 1.0).abs() < 1e-12);
            assert!((s.v - s.rho * s.w).abs() < 1e-12);
        }
        assert!(!tr.truncated);
    }

    #[test]
    fn trace_rho_matches_neighbor_fd() {
        // rho_i = dX_i/dz: compare the ODE against finite differences of
        // neighboring launch points.
        let grid = Grid::new(-1.2, 1.6, 2048);
        let f0 = smooth_field(grid, Regime::H1Zero, 0.008);
        let run = simulate(f0, &p(), Regime::H1Zero, 0.6, 2).unwrap();
        let dz = grid.dx;
        for z in [-0.05, 0.0, 0.08] {
            let tm = trace_characteristic(&run, &p(), 0, z - dz).unwrap();
            let t0 = trace_characteristic(&run, &p(), 0, z).unwrap();
            let tp = trace_characteristic(&run, &p(), 0, z + dz).unwrap();
            let last = t0.samples.len() - 1;
            let fd = (tp.samples[last].x - tm.samples[last].x) / (2.0 * dz);
            let ode = t0.samples[last].rho;
            assert!(
                (fd - ode).abs() / ode.abs() < 1e-3,
                "z = {z}: fd {fd} vs ode {ode}"
            );
        }
    }

    #[test]
    fn entropy_constant_along_family4_traces() {
        let grid = Grid::new(-1.2, 1.6, 1024);
        let f0 = smooth_field(grid, Regime::Mhd, 0.008);
        let run = simulate(f0, &p(), Regime::Mhd, 0.5, 2).unwrap();
        for z in [-0.1, 0.02, 0.1] {
            let tr = trace_characteristic(&run, &p(), 3, z).unwrap();
            let s0 = run.interp_state(z, 0.0).phi[6];
            for s in &tr.samples {
                let sv = run.interp_state(s.x, s.t).phi[6];
                assert!((sv - s0).abs() < 1e-6, "entropy drifted: {sv} vs {s0}");
            }
        }
    }

    #[test]
    fn rho_equation_self_consistency() {
        // Re-deriving each step of the compression equation from the stored
        // samples reproduces the rho integrated by the tracer: the trace ODE
        // is exactly the transport equation of the inverse density.
        let grid = Grid::new(-1.2, 1.6, 1024);
        let f0 = smooth_field(grid, Regime::H1Zero, 0.008);
        let run = simulate(f0, &p(), Regime::H1Zero, 0.4, 1).unwrap();
        let tr = trace_characteristic(&run, &p(), 0, 0.02).unwrap();
        let s = &tr.samples;
        let mut worst = 0.0f64;
        for j in 0..s.len() - 1 {
            let mut cur = TraceCursor::resume(0, s[j].x, s[j].rho, s[j].v);
            cur.advance(
                &run.snapshots[j],
                &run.snapshots[j + 1],
                &p(),
                Regime::H1Zero,
            )
            .unwrap();
            worst = worst.max((cur.rho - s[j + 1].rho).abs());
        }
        assert!(worst < 1e-8, "rho-equation residual {worst:e}");
    }

    #[test]
    fn zero_field_transport_residual_vanishes() {
        let grid = Grid::new(-1.0, 1.0, 256);
        let f = Field::constant(grid, [0.0; 7], 0.0);
        let run = simulate(f, &p(), Regime::Mhd, 0.3, 1).unwrap();
        let tr = trace_characteristic(&run, &p(), 2, 0.0).unwrap();
        for (_, rw, rv) in transport_residual(&tr, &run, &p()).unwrap() {
            assert!(rw.abs() < 1e-13 && rv.abs() < 1e-13);
        }
    }

    #[test]
    fn straight_line_intersection_time() {
        let grid = Grid::new(-2.0, 2.0, 512);
        let f = Field::constant(grid, [0.0; 7], 0.0);
        let run = simulate(f, &p(), Regime::Mhd, 1.0, 1).unwrap();
        let cf = 2.0f64.sqrt();
        let (y1, y7) = (-0.5, 0.5);
        let hit = bicharacteristic_intersection(&run, &p(), 0, y1, 6, y7)
            .unwrap()
            .expect("crossing expected");
        let expect_t = (y7 - y1) / (2.0 * cf);
        assert!((hit.t - expect_t).abs() < 1e-6, "{} vs {}", hit.t, expect_t);
        assert!((hit.dt_dyi - 1.0 / (-2.0 * cf)).abs() < 1e-6);
        assert!(matches!(
            bicharacteristic_intersection(&run, &p(), 2, 0.0, 2, 0.1),
            Err(Error::IndexContract(_))
        ));
        // Same-direction families launched apart never cross.
        assert!(bicharacteristic_intersection(&run, &p(), 0, 0.0, 1, -0.5)
            .unwrap()
            .is_none());
    }

    #[test]
    fn intersection_dt_dyi_matches_fd() {
        let grid = Grid::new(-1.5, 1.5, 1024);
        let f0 = smooth_field(grid, Regime::H1Zero, 0.006);
        let run = simulate(f0, &p(), Regime::H1Zero, 0.7, 2).unwrap();
        let (fam_i, fam_j) = (0usize, 6usize);
        let (y_i, y_j) = (-0.4, 0.4);
        let dy = 1e-3;
        let base = bicharacteristic_intersection(&run, &p(), fam_i, y_i, fam_j, y_j)
            .unwrap()
            .expect("crossing");
        let plus = bicharacteristic_intersection(&run, &p(), fam_i, y_i + dy, fam_j, y_j)
            .unwrap()
            .expect("crossing");
        let minus = bicharacteristic_intersection(&run, &p(), fam_i, y_i - dy, fam_j, y_j)
            .unwrap()
            .expect("crossing");
        let fd = (plus.t - minus.t) / (2.0 * dy);
        assert!(
            (fd - base.dt_dyi).abs() / base.dt_dyi.abs() < 1e-3,
            "fd {fd} vs analytic {}",
            base.dt_dyi
        );
    }

    #[test]
    fn determinism_across_thread_counts() {
        let grid = Grid::new(-1.0, 1.0, 512);
        let f0 = smooth_field(grid, Regime::H1Zero, 0.01);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool2 = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let r1 = pool1.install(|| simulate(f0.clone(), &p(), Regime::H1Zero, 0.2, 8).unwrap());
        let r2 = pool2.install(|| simulate(f0.clone(), &p(), Regime::H1Zero, 0.2, 8).unwrap());
        let (a, b) = (r1.snapshots.last().unwrap(), r2.snapshots.last().unwrap());
        assert_eq!(a.phi, b.phi, "bitwise determinism across thread counts");
    }
}
