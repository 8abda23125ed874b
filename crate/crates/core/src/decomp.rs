//! Wave decomposition `w_i = l_i . d_x Phi`, its inverse
//! `d_x Phi = sum_k w_k r_k`, and the profile-integration ODE that rebuilds
//! an initial field from prescribed per-family amplitude profiles.

use crate::eigen::{eigen_for_scheme, EigenSystem};
use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::scalar::dot_n;
use crate::state::{Regime, State};

/// Characteristic amplitudes of a gradient at a point.
#[derive(Debug, Clone, Copy)]
pub struct WaveAmplitudes {
    pub w: [f64; 7],
    pub state: State,
}

/// `w_k = l_k . grad` for every active family.
pub fn decompose_raw(grad_phi: &[f64; 7], es: &EigenSystem) -> [f64; 7] {
    let n = es.dim();
    let mut w = [0.0; 7];
    for k in 0..n {
        w[k] = dot_n(&es.left[k], grad_phi, n);
    }
    w
}

pub fn decompose(grad_phi: &[f64; 7], es: &EigenSystem, state: &State) -> WaveAmplitudes {
    WaveAmplitudes {
        w: decompose_raw(grad_phi, es),
        state: *state,
    }
}

/// `sum_k w_k r_k`.
pub fn reconstruct(w: &[f64; 7], es: &EigenSystem) -> [f64; 7] {
    let n = es.dim();
    let mut out = [0.0; 7];
    for k in 0..n {
        for a in 0..n {
            out[a] += w[k] * es.right[k][a];
        }
    }
    out
}

/// Per-family amplitude profiles `w_k(x)`, each compactly supported in
/// `support`.
pub struct WaveProfiles<'a> {
    pub amplitude: Box<dyn Fn(usize, f64) -> f64 + Sync + 'a>,
    pub support: (f64, f64),
}

impl WaveProfiles<'_> {
    pub fn eval(&self, family: usize, x: f64) -> f64 {
        if x <= self.support.0 || x >= self.support.1 {
            0.0
        } else {
            (self.amplitude)(family, x)
        }
    }
}

/// Integrates `d Phi / d x = sum_k w_k(x) r_k(Phi)` from the left edge of the
/// support (where `Phi = 0`), returning samples of `Phi_0` at the requested
/// (ascending) positions. Classic RK4 with step at most `support/2048`;
/// errors out if the state leaves the `2 delta` ball along the way.
pub fn integrate_profile(
    profiles: &WaveProfiles,
    x_out: &[f64],
    p: &PhysParams,
    regime: Regime,
) -> Result<Vec<[f64; 7]>> {
    let (lo, hi) = profiles.support;
    if !(hi > lo) {
        return Err(Error::InvalidParams("empty profile support".into()));
    }
    let h_max = (hi - lo) / 2048.0;
    let n = regime.dim();
    let rhs = |x: f64, phi: &[f64; 7]| -> Result<[f64; 7]> {
        let st = State::new(*phi);
        let es = eigen_for_scheme(&st, p, regime)?;
        let mut d = [0.0; 7];
        for k in 0..n {
            let wk = profiles.eval(k, x);
            if wk != 0.0 {
                for a in 0..n {
                    d[a] += wk * es.right[k][a];
                }
            }
        }
        Ok(d)
    };

    let mut out = Vec::with_capacity(x_out.len());
    let mut x = lo;
    let mut phi = [0.0; 7];
    for &target in x_out {
        if target <= lo {
            out.push([0.0; 7]);
            continue;
        }
        let stop = target.min(hi);
        if stop > x {
            let steps = ((stop - x) / h_max).ceil().max(1.0) as usize;
            let h = (stop - x) / steps as f64;
            for _ in 0..steps {
                let k1 = rhs(x, &phi)?;
                let mut p2 = phi;
                for a in 0..n {
                    p2[a] += 0.5 * h * k1[a];
                }
                let k2 = rhs(x + 0.5 * h, &p2)?;
                let mut p3 = phi;
                for a in 0..n {
                    p3[a] += 0.5 * h * k2[a];
                }
                let k3 = rhs(x + 0.5 * h, &p3)?;
                let mut p4 = phi;
                for a in 0..n {
                    p4[a] += h * k3[a];
                }
                let k4 = rhs(x + h, &p4)?;
                for a in 0..n {
                    phi[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
                }
                x += h;
                let norm = State::new(phi).norm_inf(regime);
                if norm > p.ball_radius() {
                    return Err(Error::BallExit(norm, p.ball_radius()));
                }
            }
        }
        out.push(phi);
    }
    Ok(out)
}
