//! Coefficient matrix `A(Phi)` and its analytic eigenstructure.
//!
//! Three regimes share the container: the full planar MHD system with
//! `H1 != 0`, its `H1 = 0` variant (quintuple middle eigenvalue), and the
//! Euler reduction (5x5, triple middle eigenvalue). Eigenvectors follow the
//! fixed normalizations below so the interaction coefficients evaluate to the
//! intended closed forms; a general dense eigenvalue routine cross-checks the
//! spectra but never feeds results.
//!
//! For `H1 = 0` the fast pair `r_1, r_7` carries the extra factor `C_f`
//! relative to the unit-first-component convention, which is the continuous
//! `H1 -> 0` limit of the `H1 != 0` normalization. With it,
//! `c^1_11(0) = -sqrt(A gamma)(gamma+1)/2` in both regimes.

use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::scalar::{dot_n, Scalar};
use crate::state::{dp_ds, sound_speed_sq, wave_speeds, Regime, StateOf};

/// Threshold on `H2^2 + H3^2` below which the `H1 != 0` eigenbasis is
/// direction-degenerate. Below it the transverse direction is fixed by the
/// `phi = 0` convention, i.e. `(H2, H3)/|H_perp| = (1, 0)`.
pub const H_PERP_SQ_FLOOR: f64 = 1e-12;

/// Transverse-field magnitude substituted by the `phi = 0` convention when a
/// scheme-side evaluation needs a non-degenerate basis at `H_perp ~ 0`.
pub const H_PERP_CONVENTION: f64 = 1e-6;

/// Dense coefficient matrix with a size tag (7, or 5 for Euler).
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    pub a: [[f64; 7]; 7],
    pub dim: usize,
}

/// Analytic eigenstructure at a state: `lambdas[i]`, right eigenvector
/// `right[i]` and dual left eigenvector `left[i]` for family `i` (0-based;
/// the surrounding prose counts families 1..=dim).
#[derive(Debug, Clone, Copy)]
pub struct EigenSystemOf<S> {
    pub lambdas: [S; 7],
    pub right: [[S; 7]; 7],
    pub left: [[S; 7]; 7],
    pub regime: Regime,
}

pub type EigenSystem = EigenSystemOf<f64>;

impl<S: Scalar> EigenSystemOf<S> {
    pub fn dim(&self) -> usize {
        self.regime.dim()
    }
}

/// Builds `A(Phi)` for the requested regime.
pub fn build_matrix<S: Scalar>(
    state: &StateOf<S>,
    p: &PhysParams,
    regime: Regime,
) -> Result<SystemMatrix> {
    state.check_valid(regime)?;
    let n = regime.dim();
    let u1 = state.u1().value();
    let rho = state.rho().value();
    let c2 = sound_speed_sq(state, p, regime).value();
    let dps = dp_ds(state, p, regime).value();
    let mut a = [[0.0; 7]; 7];
    for (i, row) in a.iter_mut().enumerate().take(n) {
        row[i] = u1;
    }
    match regime {
        Regime::Euler => {
            a[0][3] = c2 / rho;
            a[0][4] = dps / rho;
            a[3][0] = rho;
        }
        Regime::Mhd | Regime::H1Zero => {
            let h1 = regime.effective_h1(p);
            let h2 = state.h2(regime).value();
            let h3 = state.h3(regime).value();
            a[0][3] = c2 / rho;
            a[0][4] = p.mu0 * h2 / rho;
            a[0][5] = p.mu0 * h3 / rho;
            a[0][6] = dps / rho;
            a[1][4] = -p.mu0 * h1 / rho;
            a[2][5] = -p.mu0 * h1 / rho;
            a[3][0] = rho;
            a[4][0] = h2;
            a[4][1] = -h1;
            a[5][0] = h3;
            a[5][2] = -h1;
        }
    }
    Ok(SystemMatrix { a, dim: n })
}

fn eigen_mhd<S: Scalar>(state: &StateOf<S>, p: &PhysParams) -> Result<EigenSystemOf<S>> {
    let regime = Regime::Mhd;
    if p.h1 <= 0.0 {
        return Err(Error::InvalidParams(
            "the mhd regime requires H1 > 0; use the h1zero regime for H1 = 0".into(),
        ));
    }
    let ws = wave_speeds(state, p, regime)?;
    let (cf, cs, ca) = (ws.cf, ws.cs, ws.ca);
    let u1 = state.u1();
    let rho = state.rho();
    let h1 = S::from_f64(p.h1);
    let h2 = state.h2(regime);
    let h3 = state.h3(regime);
    let gamma = S::from_f64(p.gamma);
    let one = S::one();
    let two = S::from_f64(2.0);
    let zero = S::zero();

    let ca2 = ca * ca;
    let cf2 = cf * cf;
    let cs2 = cs * cs;

    let lambdas = [
        u1 + cf,
        u1 + ca,
        u1 + cs,
        u1,
        u1 - cs,
        u1 - ca,
        u1 - cf,
    ];

    // Right eigenvectors, normalized as designed for the coefficient algebra.
    let rf_u = ca2 / cf - cf;
    let rf_t2 = ca2 * h2 / (cf * h1);
    let rf_t3 = ca2 * h3 / (cf * h1);
    let rf_r = rho * (ca2 / cf2 - one);
    let rs_u = ca2 / cs - cs;
    let rs_t2 = ca2 * h2 / (cs * h1);
    let rs_t3 = ca2 * h3 / (cs * h1);
    let rs_r = rho * (ca2 / cs2 - one);
    let ra_2 = ca * h3 / h1;
    let ra_3 = -(ca * h2) / h1;

    let right = [
        [rf_u, rf_t2, rf_t3, rf_r, -h2, -h3, zero],
        [zero, ra_2, ra_3, zero, -h3, h2, zero],
        [rs_u, rs_t2, rs_t3, rs_r, -h2, -h3, zero],
        [zero, zero, zero, -(rho / gamma), zero, zero, one],
        [rs_u, rs_t2, rs_t3, -rs_r, h2, h3, zero],
        [zero, ra_2, ra_3, zero, h3, -h2, zero],
        [rf_u, rf_t2, rf_t3, -rf_r, h2, h3, zero],
    ];

    // Dual left eigenvectors. `bp = H2^2 + H3^2` is the potentially singular
    // denominator; the caller guarantees it is above the floor.
    let bp = h2 * h2 + h3 * h3;
    let dsq = cf2 - cs2;
    let l1_u = -(cf / (two * dsq));
    let l1_t2 = h1 * h2 * cf * (ca2 - cs2) / (two * bp * ca2 * dsq);
    let l1_t3 = h1 * h3 * cf * (ca2 - cs2) / (two * bp * ca2 * dsq);
    let l1_r = -(cf2 * cs2 / (two * rho * ca2 * dsq));
    let l1_h2 = -(h2 * cf2 * (ca2 - cs2) / (two * bp * ca2 * dsq));
    let l1_h3 = -(h3 * cf2 * (ca2 - cs2) / (two * bp * ca2 * dsq));
    let l1_s = -(cf2 * cs2 / (two * gamma * ca2 * dsq));

    let l2_t2 = h1 * h3 / (two * ca * bp);
    let l2_t3 = -(h1 * h2 / (two * ca * bp));
    let l2_h2 = -(h3 / (two * bp));
    let l2_h3 = h2 / (two * bp);

    let l3_u = cs / (two * dsq);
    let l3_t2 = -(h1 * h2 * cs * (ca2 - cf2) / (two * bp * ca2 * dsq));
    let l3_t3 = -(h1 * h3 * cs * (ca2 - cf2) / (two * bp * ca2 * dsq));
    let l3_r = cf2 * cs2 / (two * rho * ca2 * dsq);
    let l3_h2 = h2 * cs2 * (ca2 - cf2) / (two * bp * ca2 * dsq);
    let l3_h3 = h3 * cs2 * (ca2 - cf2) / (two * bp * ca2 * dsq);
    let l3_s = cf2 * cs2 / (two * gamma * ca2 * dsq);

    let left = [
        [l1_u, l1_t2, l1_t3, l1_r, l1_h2, l1_h3, l1_s],
        [zero, l2_t2, l2_t3, zero, l2_h2, l2_h3, zero],
        [l3_u, l3_t2, l3_t3, l3_r, l3_h2, l3_h3, l3_s],
        [zero, zero, zero, zero, zero, zero, one],
        [l3_u, l3_t2, l3_t3, -l3_r, -l3_h2, -l3_h3, -l3_s],
        [zero, l2_t2, l2_t3, zero, -l2_h2, -l2_h3, zero],
        [l1_u, l1_t2, l1_t3, -l1_r, -l1_h2, -l1_h3, -l1_s],
    ];

    Ok(EigenSystemOf {
        lambdas,
        right,
        left,
        regime,
    })
}

fn eigen_h1zero<S: Scalar>(state: &StateOf<S>, p: &PhysParams) -> Result<EigenSystemOf<S>> {
    let regime = Regime::H1Zero;
    let ws = wave_speeds(state, p, regime)?;
    let cf = ws.cf;
    let u1 = state.u1();
    let rho = state.rho();
    let h2 = state.h2(regime);
    let h3 = state.h3(regime);
    let mu0 = S::from_f64(p.mu0);
    let c2 = sound_speed_sq(state, p, regime);
    let dps = dp_ds(state, p, regime);
    let one = S::one();
    let two = S::from_f64(2.0);
    let zero = S::zero();
    let cf2 = cf * cf;

    let lambdas = [u1 + cf, u1, u1, u1, u1, u1, u1 - cf];

    let right = [
        [-cf, zero, zero, -rho, -h2, -h3, zero],
        [zero, one, zero, zero, zero, zero, zero],
        [zero, zero, one, zero, zero, zero, zero],
        [zero, zero, zero, -(dps / c2), zero, zero, one],
        [zero, zero, zero, -(mu0 * h2 / c2), one, zero, zero],
        [zero, zero, zero, -(mu0 * h3 / c2), zero, one, zero],
        [-cf, zero, zero, rho, h2, h3, zero],
    ];

    let lf_u = -(one / (two * cf));
    let lf_r = -(c2 / (two * rho * cf2));
    let lf_h2 = -(mu0 * h2 / (two * rho * cf2));
    let lf_h3 = -(mu0 * h3 / (two * rho * cf2));
    let lf_s = -(dps / (two * rho * cf2));

    let l5_r = -(c2 * h2 / (rho * cf2));
    let l5_h2 = (mu0 * h3 * h3 + rho * c2) / (rho * cf2);
    let l5_h3 = -(mu0 * h2 * h3 / (rho * cf2));
    let l5_s = -(h2 * dps / (rho * cf2));
    let l6_r = -(c2 * h3 / (rho * cf2));
    let l6_h2 = -(mu0 * h2 * h3 / (rho * cf2));
    let l6_h3 = (mu0 * h2 * h2 + rho * c2) / (rho * cf2);
    let l6_s = -(h3 * dps / (rho * cf2));

    let left = [
        [lf_u, zero, zero, lf_r, lf_h2, lf_h3, lf_s],
        [zero, one, zero, zero, zero, zero, zero],
        [zero, zero, one, zero, zero, zero, zero],
        [zero, zero, zero, zero, zero, zero, one],
        [zero, zero, zero, l5_r, l5_h2, l5_h3, l5_s],
        [zero, zero, zero, l6_r, l6_h2, l6_h3, l6_s],
        [lf_u, zero, zero, -lf_r, -lf_h2, -lf_h3, -lf_s],
    ];

    Ok(EigenSystemOf {
        lambdas,
        right,
        left,
        regime,
    })
}

fn eigen_euler<S: Scalar>(state: &StateOf<S>, p: &PhysParams) -> Result<EigenSystemOf<S>> {
    let regime = Regime::Euler;
    let ws = wave_speeds(state, p, regime)?;
    let c = ws.c;
    let u1 = state.u1();
    let rho = state.rho();
    let c2 = c * c;
    let dps = dp_ds(state, p, regime);
    let one = S::one();
    let two = S::from_f64(2.0);
    let zero = S::zero();

    let mut lambdas = [zero; 7];
    lambdas[0] = u1 + c;
    lambdas[1] = u1;
    lambdas[2] = u1;
    lambdas[3] = u1;
    lambdas[4] = u1 - c;

    let mut right = [[zero; 7]; 7];
    right[0] = [-one, zero, zero, -(rho / c), zero, zero, zero];
    right[1][1] = one;
    right[2][2] = one;
    right[3] = [zero, zero, zero, -(dps / c2), one, zero, zero];
    right[4] = [-one, zero, zero, rho / c, zero, zero, zero];

    let mut left = [[zero; 7]; 7];
    let half = one / two;
    left[0] = [
        -half,
        zero,
        zero,
        -(c / (two * rho)),
        -(dps / (two * rho * c)),
        zero,
        zero,
    ];
    left[1][1] = one;
    left[2][2] = one;
    left[3][4] = one;
    left[4] = [
        -half,
        zero,
        zero,
        c / (two * rho),
        dps / (two * rho * c),
        zero,
        zero,
    ];

    Ok(EigenSystemOf {
        lambdas,
        right,
        left,
        regime,
    })
}

/// Analytic eigensystem at a state.
///
/// In the `H1 != 0` regime the transverse field must satisfy
/// `H2^2 + H3^2 >= H_PERP_SQ_FLOOR`; below that the basis direction is
/// ill-defined and a degenerate-direction error is returned.
pub fn eigen_analytic<S: Scalar>(
    state: &StateOf<S>,
    p: &PhysParams,
    regime: Regime,
) -> Result<EigenSystemOf<S>> {
    state.check_valid(regime)?;
    match regime {
        Regime::Mhd => {
            if state.h_perp_sq(regime).value() < H_PERP_SQ_FLOOR {
                return Err(Error::DegenerateDirection);
            }
            eigen_mhd(state, p)
        }
        Regime::H1Zero => eigen_h1zero(state, p),
        Regime::Euler => eigen_euler(state, p),
    }
}

/// Same as [`eigen_analytic`] in the `H1 != 0` regime but without the
/// transverse-field floor guard. Used by the cancellation sweep, which
/// deliberately drives `H_perp` toward zero; the formulas stay finite in
/// floating point for any `H_perp > 0`.
pub(crate) fn eigen_mhd_unguarded<S: Scalar>(
    state: &StateOf<S>,
    p: &PhysParams,
) -> Result<EigenSystemOf<S>> {
    state.check_valid(Regime::Mhd)?;
    eigen_mhd(state, p)
}

/// Eigensystem for the upwind scheme. Identical to [`eigen_analytic`] except
/// that a direction-degenerate `H1 != 0` state is evaluated at the `phi = 0`
/// convention `(H2, H3) = (H_PERP_CONVENTION, 0)` instead of failing; the
/// scheme only consumes the (normalization-invariant) projectors, so any
/// valid basis convention is admissible there.
pub fn eigen_for_scheme(state: &StateOf<f64>, p: &PhysParams, regime: Regime) -> Result<EigenSystem> {
    if regime == Regime::Mhd && state.h_perp_sq(regime) < H_PERP_SQ_FLOOR {
        let mut fixed = *state;
        fixed.phi[4] = H_PERP_CONVENTION;
        fixed.phi[5] = 0.0;
        return eigen_mhd(&fixed, p);
    }
    eigen_analytic(state, p, regime)
}

/// Eigenvalues of a system matrix by a general dense routine (Hessenberg
/// reduction + Francis QR), sorted in descending order. Independent of the
/// analytic formulas; used only for cross-validation.
pub fn eigen_numeric_oracle(m: &SystemMatrix) -> Result<Vec<f64>> {
    let n = m.dim;
    let mut scale = 0.0f64;
    for row in m.a.iter().take(n) {
        for &x in row.iter().take(n) {
            scale = scale.max(x.abs());
        }
    }
    let eig = crate::hqr::eigenvalues(&m.a, n)?;
    let imag_tol = 1e-9 * (1.0 + scale);
    let mut out = Vec::with_capacity(n);
    for (re, im) in eig {
        if im.abs() > imag_tol {
            return Err(Error::OracleFailure(format!(
                "complex eigenvalue {re} + {im}i for a hyperbolic matrix"
            )));
        }
        out.push(re);
    }
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(out)
}

/// Max-abs entry of `L*R - I` over the active block.
pub fn duality_residual<S: Scalar>(es: &EigenSystemOf<S>) -> f64 {
    let n = es.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (dot_n(&es.left[i], &es.right[j], n).value() - target).abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// Max over families of `|A r_i - lambda_i r_i|_inf`, for residual checks.
pub fn eigenpair_residual(m: &SystemMatrix, es: &EigenSystem) -> f64 {
    let n = m.dim;
    let mut worst = 0.0f64;
    for i in 0..n {
        let r = &es.right[i];
        for row in 0..n {
            let mut ar = 0.0;
            for col in 0..n {
                ar += m.a[row][col] * r[col];
            }
            worst = worst.max((ar - es.lambdas[i] * r[row]).abs());
        }
    }
    worst
}

/// Checks the eigenvalue ordering of the `H1 != 0` regime:
/// `l7 < l6 <= l5 < l4 < l3 <= l2 < l1`, with the non-strict pairs equal
/// exactly when the transverse field sits below the degeneracy floor.
pub fn ordering_holds(es: &EigenSystem, eq_tol: f64) -> bool {
    let l = &es.lambdas;
    l[6] < l[5] + eq_tol
        && l[5] <= l[4] + eq_tol
        && l[4] < l[3]
        && l[3] < l[2]
        && l[2] <= l[1] + eq_tol
        && l[1] < l[0]
}
