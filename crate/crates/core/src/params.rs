//! Physical constants and experiment parameters.

use crate::config::Config;
use crate::error::{Error, Result};
use serde::Serialize;

/// Physical and experiment constants. Paper units throughout: the background
/// density is 1 and the equation of state is `p = A e^S rho^gamma`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhysParams {
    /// Pressure constant (> 0).
    pub a: f64,
    /// Adiabatic index (> 1).
    pub gamma: f64,
    /// Magnetic permeability (> 0).
    pub mu0: f64,
    /// Constant longitudinal magnetic-field component.
    pub h1: f64,
    /// Hyperbolicity-ball radius: states are trusted for |Phi|_inf <= 2*delta.
    pub delta: f64,
    /// Data amplitude.
    pub theta: f64,
    /// Support half-scale of the initial data (support is [-2*eta, 2*eta]).
    pub eta: f64,
    /// Log-exponent of the rough data family, in (0, 1/2).
    pub alpha: f64,
    /// Slack parameter of the lifespan bounds, in (0, 1/100].
    pub epsilon: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            a: 1.0,
            gamma: 2.0,
            mu0: 1.0,
            h1: 0.1,
            delta: 0.05,
            theta: 0.01,
            eta: 0.1,
            alpha: 0.3,
            epsilon: 0.01,
        }
    }
}

impl PhysParams {
    /// Validates the parameter ranges, including the longitudinal-field
    /// smallness condition `H1^2 <= min(A*gamma/mu0, 1) / 100`. The bound is
    /// non-strict so the reference set (A=1, gamma=2, mu0=1, H1=0.1) sits
    /// exactly on it.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.a > 0.0) {
            return fail(format!("A must be positive, got {}", self.a));
        }
        if !(self.gamma > 1.0) {
            return fail(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.mu0 > 0.0) {
            return fail(format!("mu0 must be positive, got {}", self.mu0));
        }
        if !(self.delta > 0.0) {
            return fail(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.theta > 0.0 && self.theta <= 0.01) {
            return fail(format!("theta must lie in (0, 1/100], got {}", self.theta));
        }
        if !(self.eta > 0.0) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return fail(format!("alpha must lie in (0, 1/2), got {}", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.01) {
            return fail(format!("epsilon must lie in (0, 1/100], got {}", self.epsilon));
        }
        let h1_bound = (self.a * self.gamma / self.mu0).min(1.0) * 1e-2;
        if self.h1 * self.h1 > h1_bound * (1.0 + 1e-12) {
            return fail(format!(
                "H1^2 = {:.6e} violates the smallness bound {:.6e}",
                self.h1 * self.h1,
                h1_bound
            ));
        }
        Ok(())
    }

    /// Radius of the trusted state ball, `2*delta`.
    pub fn ball_radius(&self) -> f64 {
        2.0 * self.delta
    }

    /// Reads the `[phys]` section of a config, filling defaults for missing
    /// keys, and validates the result.
    pub fn from_config(cfg: &Config) -> Result<PhysParams> {
        let mut p = PhysParams::default();
        if let Some(v) = cfg.get_f64("phys.A")? {
            p.a = v;
        }
        if let Some(v) = cfg.get_f64("phys.gamma")? {
            p.gamma = v;
        }
        if let Some(v) = cfg.get_f64("phys.mu0")? {
            p.mu0 = v;
        }
        if let Some(v) = cfg.get_f64("phys.H1")? {
            p.h1 = v;
        }
        if let Some(v) = cfg.get_f64("phys.delta")? {
            p.delta = v;
        }
        if let Some(v) = cfg.get_f64("phys.theta")? {
            p.theta = v;
        }
        if let Some(v) = cfg.get_f64("phys.eta")? {
            p.eta = v;
        }
        if let Some(v) = cfg.get_f64("phys.alpha")? {
            p.alpha = v;
        }
        if let Some(v) = cfg.get_f64("phys.epsilon")? {
            p.epsilon = v;
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PhysParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_large_h1() {
        let p = PhysParams {
            h1: 0.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_bad_ranges() {
        for (field, value) in [("gamma", 1.0), ("theta", 0.02), ("alpha", 0.5), ("epsilon", 0.0)] {
            let mut p = PhysParams::default();
            match field {
                "gamma" => p.gamma = value,
                "theta" => p.theta = value,
                "alpha" => p.alpha = value,
                _ => p.epsilon = value,
            }
            assert!(p.validate().is_err(), "{field}={value} should fail");
        }
    }

    #[test]
    fn config_roundtrip() {
        let cfg = Config::parse("[phys]\nH1 = 0.0\ntheta = 0.005\n").unwrap();
        let p = PhysParams::from_config(&cfg).unwrap();
        assert_eq!(p.h1, 0.0);
        assert_eq!(p.theta, 0.005);
        assert_eq!(p.gamma, 2.0);
    }
}
