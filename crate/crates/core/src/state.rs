//! State vector, equation of state and the three anisotropic wave speeds.
//!
//! The planar MHD state is `Phi = (u1, u2, u3, rho-1, H2, H3, S)`. The Euler
//! reduction keeps five active components laid out as
//! `(u1, u2, u3, rho-1, S)` in the leading slots of the same container.

use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::scalar::Scalar;
use serde::Serialize;

/// Which variant of the planar system is being solved.
///
/// `H1Zero` and `Euler` ignore `PhysParams::h1` (the longitudinal field is
/// identically zero there); `Euler` additionally drops the transverse field
/// and runs the 5x5 system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Mhd,
    H1Zero,
    Euler,
}

impl Regime {
    /// Number of active components / wave families.
    pub fn dim(self) -> usize {
        match self {
            Regime::Euler => 5,
            _ => 7,
        }
    }

    /// Slot of the entropy component in the state container.
    pub fn entropy_slot(self) -> usize {
        match self {
            Regime::Euler => 4,
            _ => 6,
        }
    }

    /// Effective longitudinal field for this regime.
    pub fn effective_h1(self, p: &PhysParams) -> f64 {
        match self {
            Regime::Mhd => p.h1,
            _ => 0.0,
        }
    }

    pub fn parse(name: &str) -> Result<Regime> {
        match name {
            "mhd" => Ok(Regime::Mhd),
            "h1zero" => Ok(Regime::H1Zero),
            "euler" => Ok(Regime::Euler),
            other => Err(Error::Config(format!(
                "unknown regime `{other}` (expected mhd, h1zero or euler)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Mhd => "mhd",
            Regime::H1Zero => "h1zero",
            Regime::Euler => "euler",
        }
    }
}

/// State vector over a generic scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateOf<S> {
    pub phi: [S; 7],
}

/// Concrete double-precision state.
pub type State = StateOf<f64>;

impl<S: Scalar> StateOf<S> {
    pub fn new(phi: [S; 7]) -> Self {
        StateOf { phi }
    }

    pub fn origin() -> Self {
        StateOf {
            phi: [S::zero(); 7],
        }
    }

    pub fn u1(&self) -> S {
        self.phi[0]
    }

    /// Density `rho = 1 + phi[3]`.
    pub fn rho(&self) -> S {
        S::one() + self.phi[3]
    }

    pub fn h2(&self, regime: Regime) -> S {
        match regime {
            Regime::Euler => S::zero(),
            _ => self.phi[4],
        }
    }

    pub fn h3(&self, regime: Regime) -> S {
        match regime {
            Regime::Euler => S::zero(),
            _ => self.phi[5],
        }
    }

    pub fn entropy(&self, regime: Regime) -> S {
        self.phi[regime.entropy_slot()]
    }

    /// Squared transverse field `H2^2 + H3^2`.
    pub fn h_perp_sq(&self, regime: Regime) -> S {
        let h2 = self.h2(regime);
        let h3 = self.h3(regime);
        h2 * h2 + h3 * h3
    }

    pub fn norm_inf(&self, regime: Regime) -> f64 {
        self.phi[..regime.dim()]
            .iter()
            .map(|x| x.value().abs())
            .fold(0.0, f64::max)
    }

    pub fn check_valid(&self, regime: Regime) -> Result<()> {
        for x in &self.phi[..regime.dim()] {
            if !x.is_finite_scalar() {
                return Err(Error::InvalidState("non-finite component".into()));
            }
        }
        if self.rho().value() <= 0.0 {
            return Err(Error::InvalidState(format!(
                "non-positive density {}",
                self.rho().value()
            )));
        }
        Ok(())
    }
}

impl State {
    /// Converts to a dual-number state with the identity seed, so that any
    /// generic formula evaluated on the result carries its gradient with
    /// respect to all seven state slots.
    pub fn seeded(&self) -> StateOf<crate::scalar::Dual7> {
        let mut phi = [crate::scalar::Dual7::constant(0.0); 7];
        for (k, slot) in phi.iter_mut().enumerate() {
            *slot = crate::scalar::Dual7::seeded(self.phi[k], k);
        }
        StateOf { phi }
    }
}

/// Fast, slow, Alfven and sound speeds at a state. All non-negative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaveSpeedsOf<S> {
    pub cf: S,
    pub cs: S,
    pub ca: S,
    pub c: S,
}

pub type WaveSpeeds = WaveSpeedsOf<f64>;

/// Polytropic pressure `p = A e^S rho^gamma`.
pub fn pressure<S: Scalar>(state: &StateOf<S>, p: &PhysParams, regime: Regime) -> S {
    let rho = state.rho();
    let s = state.entropy(regime);
    S::from_f64(p.a) * s.exp() * rho.powf_c(p.gamma)
}

/// Squared sound speed `c^2 = dp/drho = A gamma e^S rho^(gamma-1)`.
pub fn sound_speed_sq<S: Scalar>(state: &StateOf<S>, p: &PhysParams, regime: Regime) -> S {
    let rho = state.rho();
    let s = state.entropy(regime);
    S::from_f64(p.a * p.gamma) * s.exp() * rho.powf_c(p.gamma - 1.0)
}

/// Entropy derivative of the pressure, `dp/dS = A e^S rho^gamma`.
pub fn dp_ds<S: Scalar>(state: &StateOf<S>, p: &PhysParams, regime: Regime) -> S {
    pressure(state, p, regime)
}

/// Sound speed `c = sqrt(dp/drho)`.
pub fn sound_speed<S: Scalar>(state: &StateOf<S>, p: &PhysParams, regime: Regime) -> Result<S> {
    state.check_valid(regime)?;
    Ok(sound_speed_sq(state, p, regime).sqrt())
}

/// Discriminant slack tolerated before a numerical-domain error is raised.
pub const DISCRIMINANT_TOL: f64 = 1e-12;

/// Fast/slow magnetosonic and Alfven speeds.
///
/// `cf^2` and `cs^2` are the roots of
/// `mu^4 - (mu0 |H|^2 / rho + c^2) mu^2 + mu0 H1^2 c^2 / rho = 0`,
/// evaluated in the subtraction-free form `cf^2 = (b + sqrt(disc))/2`,
/// `cs^2 = d / cf^2`, which keeps the Vieta identities exact to rounding.
/// Tiny negative discriminants (down to `-1e-12`) are clamped to zero.
pub fn wave_speeds<S: Scalar>(
    state: &StateOf<S>,
    p: &PhysParams,
    regime: Regime,
) -> Result<WaveSpeedsOf<S>> {
    state.check_valid(regime)?;
    let h1 = regime.effective_h1(p);
    let rho = state.rho();
    let mu0 = S::from_f64(p.mu0);
    let c2 = sound_speed_sq(state, p, regime);
    let h_sq = S::from_f64(h1 * h1) + state.h_perp_sq(regime);
    let b = mu0 * h_sq / rho + c2;
    let d = S::from_f64(p.mu0 * h1 * h1) * c2 / rho;
    let four = S::from_f64(4.0);
    let mut disc = b * b - four * d;
    if disc.value() < 0.0 {
        if disc.value() < -DISCRIMINANT_TOL {
            return Err(Error::NumericalDomain(format!(
                "dispersion discriminant {:.3e} below clamp threshold",
                disc.value()
            )));
        }
        disc = S::zero();
    }
    let cf2 = (b + disc.sqrt()) / S::from_f64(2.0);
    let cf = cf2.sqrt();
    let cs = d.sqrt() / cf;
    let ca = (mu0 / rho).sqrt() * S::from_f64(h1.abs());
    Ok(WaveSpeedsOf {
        cf,
        cs,
        ca,
        c: c2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysParams {
        PhysParams::default()
    }

    #[test]
    fn sound_speed_at_origin() {
        // A = 1, gamma = 2 at Phi = 0 gives c = sqrt(2).
        let c = sound_speed(&State::origin(), &params(), Regime::Mhd).unwrap();
        assert!((c - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sound_speed_gamma_5_3() {
        let p = PhysParams {
            gamma: 5.0 / 3.0,
            h1: 0.05,
            ..params()
        };
        let c = sound_speed(&State::origin(), &p, Regime::Mhd).unwrap();
        assert!((c - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sound_speed_matches_fd_of_eos() {
        // Central finite differences of p(rho) at rho = 1.05, S = 0.1.
        let p = params();
        let mut st = State::origin();
        st.phi[3] = 0.05;
        st.phi[6] = 0.1;
        let h = 1e-6;
        let mut hi = st;
        hi.phi[3] += h;
        let mut lo = st;
        lo.phi[3] -= h;
        let dp = (pressure(&hi, &p, Regime::Mhd) - pressure(&lo, &p, Regime::Mhd)) / (2.0 * h);
        let c = sound_speed(&st, &p, Regime::Mhd).unwrap();
        assert!((c * c - dp).abs() / dp < 1e-6);
    }

    #[test]
    fn sound_speed_rejects_non_finite() {
        let mut st = State::origin();
        st.phi[2] = f64::NAN;
        assert!(sound_speed(&st, &params(), Regime::Mhd).is_err());
    }

    #[test]
    fn wave_speeds_degenerate_transverse_field() {
        // H2 = H3 = 0 collapses the dispersion relation: cf = c, cs = ca.
        let ws = wave_speeds(&State::origin(), &params(), Regime::Mhd).unwrap();
        assert!((ws.cf - 2.0f64.sqrt()).abs() < 1e-14);
        assert!((ws.cs - 0.1).abs() < 1e-14);
        assert!((ws.ca - 0.1).abs() < 1e-14);
    }

    #[test]
    fn wave_speeds_h1_zero() {
        let mut st = State::origin();
        st.phi[4] = 0.03;
        st.phi[5] = -0.04;
        let ws = wave_speeds(&st, &params(), Regime::H1Zero).unwrap();
        assert_eq!(ws.ca, 0.0);
        assert_eq!(ws.cs, 0.0);
        let expect = (1.0 * 0.0025f64 / 1.0 + 2.0).sqrt();
        assert!((ws.cf - expect).abs() < 1e-14);
    }

    #[test]
    fn wave_speeds_are_dispersion_roots() {
        // cf, cs are roots of mu^4 - b mu^2 + d = 0.
        let p = params();
        let mut st = State::origin();
        st.phi[3] = 0.02;
        st.phi[4] = 0.05;
        st.phi[5] = 0.02;
        st.phi[6] = -0.03;
        let ws = wave_speeds(&st, &p, Regime::Mhd).unwrap();
        let rho = st.rho();
        let c2 = sound_speed_sq(&st, &p, Regime::Mhd);
        let b = p.mu0 * (p.h1 * p.h1 + st.h_perp_sq(Regime::Mhd)) / rho + c2;
        let d = p.mu0 * p.h1 * p.h1 * c2 / rho;
        for m in [ws.cf, ws.cs] {
            let res = m.powi(4) - b * m.powi(2) + d;
            assert!(res.abs() < 1e-14, "residual {res:e}");
        }
        // Vieta identities.
        assert!((ws.cf.powi(2) + ws.cs.powi(2) - b).abs() / b < 1e-12);
        assert!((ws.cf.powi(2) * ws.cs.powi(2) - d).abs() / d < 1e-12);
        // Ordering cs <= ca < cf under the smallness condition.
        assert!(ws.cs <= ws.ca && ws.ca < ws.cf);
    }
}
