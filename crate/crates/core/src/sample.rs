//! Deterministic state sampling inside the hyperbolicity ball.

use crate::eigen::H_PERP_SQ_FLOOR;
use crate::params::PhysParams;
use crate::state::{Regime, State};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One state with every active component uniform in `[-2 delta, 2 delta]`.
/// In the `H1 != 0` regime, draws with a transverse field below the
/// degeneracy floor are rejected and redrawn.
pub fn sample_state<R: Rng>(rng: &mut R, p: &PhysParams, regime: Regime) -> State {
    let r = p.ball_radius();
    loop {
        let mut st = State::origin();
        for k in 0..regime.dim() {
            st.phi[k] = rng.gen_range(-r..=r);
        }
        if regime == Regime::Mhd && st.h_perp_sq(regime) < 100.0 * H_PERP_SQ_FLOOR {
            continue;
        }
        return st;
    }
}

pub fn sample_states(seed: u64, n: usize, p: &PhysParams, regime: Regime) -> Vec<State> {
    let mut r = rng(seed);
    (0..n).map(|_| sample_state(&mut r, p, regime)).collect()
}
