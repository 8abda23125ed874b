//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Heavy runs are computed once and shared across criteria.

use planar_mhd::coeffs::{
    boundedness_sweep, coefficient_gamma, fd_gamma_oracle, CoefficientTable,
};
use planar_mhd::decomp::{decompose_raw, reconstruct};
use planar_mhd::eigen::{
    build_matrix, duality_residual, eigen_analytic, eigen_numeric_oracle,
};
use planar_mhd::experiments::{
    c111_at_origin, dz_rho1_bound_strided, h1_diagnostic, run_shock_experiment, DataKind,
    ExperimentConfig, ShockOutput,
};
use planar_mhd::sample::{rng, sample_state, sample_states};
use planar_mhd::solver::{simulate, trace_characteristic, transport_residual, Field, Grid};
use planar_mhd::{PhysParams, Regime};
use rand::Rng;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

const SEED: u64 = 0x5ca1_ab1e;

/// Serializes the expensive runs so their wall-clock budgets are measured
/// without contention from sibling tests on the shared rayon pool.
fn heavy_lock() -> std::sync::MutexGuard<'static, ()> {
    static HEAVY: Mutex<()> = Mutex::new(());
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn params() -> PhysParams {
    PhysParams::default()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

fn shock_cfg(regime: Regime, kind: DataKind, nodes: usize, p: PhysParams) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(regime, p, kind);
    cfg.n_nodes = nodes;
    cfg.seed = SEED;
    cfg
}

/// Reference h1zero shock-family run at 2^14 nodes (criteria 5, 7, 8) with
/// its wall-clock time.
fn base_run() -> &'static (ShockOutput, f64) {
    static CELL: OnceLock<(ShockOutput, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let _g = heavy_lock();
        let t = Instant::now();
        let out = run_shock_experiment(&shock_cfg(
            Regime::H1Zero,
            DataKind::ShockFamily,
            1 << 14,
            params(),
        ))
        .expect("base run");
        (out, t.elapsed().as_secs_f64())
    })
}

/// Euler shock-family run at 2^14 nodes (criterion 12).
fn euler_run() -> &'static ShockOutput {
    static CELL: OnceLock<ShockOutput> = OnceLock::new();
    CELL.get_or_init(|| {
        let _g = heavy_lock();
        run_shock_experiment(&shock_cfg(
            Regime::Euler,
            DataKind::ShockFamily,
            1 << 14,
            params(),
        ))
        .expect("euler run")
    })
}

/// Illposedness-family ladder over matched (Delta, grid) levels
/// (criterion 9): grids 2^11..2^14 with Delta = 2, 1, 0.5, 0.25.
fn ladder_runs() -> &'static Vec<ShockOutput> {
    static CELL: OnceLock<Vec<ShockOutput>> = OnceLock::new();
    CELL.get_or_init(|| {
        let _g = heavy_lock();
        [1usize << 11, 1 << 12, 1 << 13, 1 << 14]
            .iter()
            .map(|&n| {
                run_shock_experiment(&shock_cfg(
                    Regime::H1Zero,
                    DataKind::IllposednessFamily,
                    n,
                    params(),
                ))
                .expect("ladder run")
            })
            .collect()
    })
}

/// Illposedness-family support-scale sweep at 2^13 nodes (criterion 10).
fn eta_sweep_runs() -> &'static Vec<ShockOutput> {
    static CELL: OnceLock<Vec<ShockOutput>> = OnceLock::new();
    CELL.get_or_init(|| {
        let _g = heavy_lock();
        [0.1, 0.03, 0.01]
            .iter()
            .map(|&eta| {
                let p = PhysParams {
                    eta,
                    ..params()
                };
                run_shock_experiment(&shock_cfg(
                    Regime::H1Zero,
                    DataKind::IllposednessFamily,
                    1 << 13,
                    p,
                ))
                .expect("eta sweep run")
            })
            .collect()
    })
}

#[test]
fn criterion_01_eigen_duality_and_spectra() {
    let p = params();
    let t = Instant::now();
    let mut max_dual = 0.0f64;
    let mut max_dev = 0.0f64;
    for regime in [Regime::Mhd, Regime::H1Zero, Regime::Euler] {
        for st in sample_states(SEED, 10_000, &p, regime) {
            let es = eigen_analytic(&st, &p, regime).unwrap();
            max_dual = max_dual.max(duality_residual(&es));
            let m = build_matrix(&st, &p, regime).unwrap();
            let num = eigen_numeric_oracle(&m).unwrap();
            let mut ana: Vec<f64> = es.lambdas[..regime.dim()].to_vec();
            ana.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, n) in ana.iter().zip(&num) {
                max_dev = max_dev.max((a - n).abs());
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        "1 (eigen duality & spectra)",
        max_dual <= 1e-10 && max_dev <= 1e-8 && secs < 10.0,
        &format!("duality {max_dual:.2e} <= 1e-10, oracle dev {max_dev:.2e} <= 1e-8, {secs:.2} s < 10 s"),
    );
}

#[test]
fn criterion_02_identity_suite() {
    let p = params();
    let sweep = boundedness_sweep(&p, Regime::Mhd, 10_000, SEED).unwrap();
    let c111_h1zero = c111_at_origin(&p, Regime::H1Zero).unwrap();
    let c111_target = -3.0 / 2.0f64.sqrt();
    let pass = sweep.vanishing_residual <= 1e-10
        && sweep.degeneracy_residual <= 1e-10
        && sweep.c111_max < 0.0
        && sweep.gamma_226_residual <= 1e-9
        && sweep.gamma_264_residual <= 1e-8
        && (c111_h1zero - c111_target).abs() <= 1e-10;
    report(
        "2 (identity suite)",
        pass,
        &format!(
            "|c_i2|,|c_i6| {:.2e}; degeneracy {:.2e}; max c111 {:.3e} < 0; |g226| {:.2e}; |g264 res| {:.2e}; c111(0)|H1=0 = {:.12} vs -3/sqrt2",
            sweep.vanishing_residual,
            sweep.degeneracy_residual,
            sweep.c111_max,
            sweep.gamma_226_residual,
            sweep.gamma_264_residual,
            c111_h1zero
        ),
    );
}

#[test]
fn criterion_03_coefficient_tables_vs_fd_oracle() {
    let p = params();
    let regime = Regime::Mhd;
    let mut r = rng(SEED ^ 0xfd);
    let mut max_rel = 0.0f64;
    let n = regime.dim();
    let mut count = 0;
    while count < 1000 {
        let st = sample_state(&mut r, &p, regime);
        let i = r.gen_range(0..n);
        let k = r.gen_range(0..n);
        let m = r.gen_range(0..n);
        if k == m || (k != i && m == i) {
            continue;
        }
        count += 1;
        let a = coefficient_gamma(i, k, m, &st, &p, regime).unwrap();
        let f = fd_gamma_oracle(i, k, m, &st, &p, regime, 1e-5).unwrap();
        max_rel = max_rel.max((a - f).abs() / a.abs().max(1e-3));
    }
    let sweep = boundedness_sweep(&p, regime, 2000, SEED).unwrap();
    let gamma0 = sweep.hperp_shrink.first().map(|x| x.1).unwrap_or(0.0);
    let shrink_ok = sweep.hperp_shrink.len() == 21
        && sweep
            .hperp_shrink
            .iter()
            .all(|(_, g)| g.is_finite() && *g <= 10.0 * gamma0);
    report(
        "3 (coefficient tables vs fd oracle)",
        max_rel <= 1e-5 && shrink_ok,
        &format!(
            "fd rel err {max_rel:.2e} <= 1e-5 on 1000 samples; Gamma along H_perp = 1e-3*2^-k bounded (start {:.3}, max {:.3})",
            gamma0,
            sweep.hperp_shrink.iter().map(|x| x.1).fold(0.0, f64::max)
        ),
    );
}

#[test]
fn criterion_04_decomposition_roundtrip() {
    let p = params();
    let mut worst = 0.0f64;
    for regime in [Regime::Mhd, Regime::H1Zero, Regime::Euler] {
        let mut r = rng(SEED ^ regime.dim() as u64);
        for _ in 0..1000 {
            let st = sample_state(&mut r, &p, regime);
            let es = eigen_analytic(&st, &p, regime).unwrap();
            let mut g = [0.0; 7];
            for a in g.iter_mut().take(regime.dim()) {
                *a = r.gen_range(-1.0..1.0);
            }
            let back = reconstruct(&decompose_raw(&g, &es), &es);
            for a in 0..regime.dim() {
                worst = worst.max((back[a] - g[a]).abs());
            }
        }
    }
    report(
        "4 (decomposition roundtrip)",
        worst <= 1e-10,
        &format!("max reconstruction error {worst:.2e} <= 1e-10 over 1000 gradients x 3 regimes"),
    );
}

fn check_lifespan(out: &ShockOutput, label: &str) {
    let shock = out.shock.as_ref().expect("shock must form");
    let in_window = shock.t_star >= 0.9 * out.t_lo && shock.t_star <= 1.1 * out.t_hi;
    // rho law along the maximizer trace, down to rho = 0.2.
    let c = shock.c111_origin.abs();
    let mut rho_ok = true;
    let mut checked = 0;
    for s in &out.z0_trace.samples {
        let pred = 1.0 - c * out.w0 * s.t;
        if s.rho < 0.2 || pred < 0.18 {
            break;
        }
        checked += 1;
        if (s.rho - pred).abs() > 0.05 * pred {
            rho_ok = false;
        }
    }
    report(
        label,
        in_window && rho_ok && checked > 10,
        &format!(
            "T* = {:.3} in [{:.3}, {:.3}]; rho(z0) linear law within 5% over {checked} samples",
            shock.t_star,
            0.9 * out.t_lo,
            1.1 * out.t_hi
        ),
    );
}

#[test]
fn criterion_05_shock_lifespan() {
    let (out, secs) = base_run();
    assert!(
        *secs < 300.0,
        "reference run took {secs:.0} s, budget 300 s"
    );
    check_lifespan(out, "5 (shock lifespan, H1=0)");
    println!("ACCEPTANCE 5 runtime: {secs:.1} s < 300 s");
}

#[test]
fn criterion_06_scaling_law() {
    // Halving W0 doubles T*: three amplitudes at 2^13 nodes (the lifespan
    // diagnostics ride the characteristic ODEs and are grid-robust).
    let _g = heavy_lock();
    let mut t_stars = Vec::new();
    for theta in [0.01, 0.005, 0.0025] {
        let p = PhysParams {
            theta,
            ..params()
        };
        let out = run_shock_experiment(&shock_cfg(
            Regime::H1Zero,
            DataKind::ShockFamily,
            1 << 13,
            p,
        ))
        .expect("scaling run");
        t_stars.push(out.shock.as_ref().expect("shock").t_star);
    }
    let r1 = t_stars[1] / t_stars[0];
    let r2 = t_stars[2] / t_stars[1];
    let pass = (r1 - 2.0).abs() <= 0.2 && (r2 - 2.0).abs() <= 0.2;
    report(
        "6 (lifespan scaling T* ~ 1/W0)",
        pass,
        &format!("T* = {t_stars:?}; doubling ratios {r1:.3}, {r2:.3} within 2 +- 0.2"),
    );
}

#[test]
fn criterion_07_no_spurious_shocks() {
    let (out, _) = base_run();
    let n = out.regime.dim();
    let min_rho_rest = out.min_rho[1..n].iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let max_w_rest = out.max_abs_w[1..n].iter().fold(0.0f64, |a, b| a.max(*b));
    let theta = out.params.theta;
    report(
        "7 (no spurious shocks)",
        min_rho_rest > 0.5 && max_w_rest <= 10.0 * theta,
        &format!("min rho_(i!=1) = {min_rho_rest:.3} > 0.5; sup|w_(i!=1)| = {max_w_rest:.2e} <= {:.2e}", 10.0 * theta),
    );
}

#[test]
fn criterion_08_bootstrap_conclusion_ratios() {
    // A single constant K across the reference-resolution runs.
    let (base, _) = base_run();
    let euler = euler_run();
    let ladder = ladder_runs();
    let mut k_max = 0.0f64;
    let mut s_max = 0.0f64;
    let mut j_ratio_max = 0.0f64;
    for out in [base, euler, ladder.last().unwrap()] {
        let r = out.norms.at_end().unwrap();
        let scale = out.params.eta * out.w0 * out.w0;
        k_max = k_max.max(r.v / scale).max(r.w_check / scale);
        s_max = s_max.max(r.s);
        j_ratio_max = j_ratio_max.max(r.j / out.w0);
    }
    report(
        "8 (bootstrap-conclusion ratios)",
        s_max <= 2.0 && j_ratio_max <= 2.0 && k_max <= 50.0,
        &format!("S <= {s_max:.3} (<= 2); J/W0 <= {j_ratio_max:.3} (<= 2); K = {k_max:.1} (<= 50)"),
    );
}

#[test]
fn criterion_09_blowup_diagnostics() {
    let ladder = ladder_runs();
    let deltas = [2.0, 1.0, 0.5, 0.25];
    let mut values = Vec::new();
    for (out, delta) in ladder.iter().zip(deltas) {
        let t_star = out.shock.as_ref().expect("shock").t_star;
        values.push(h1_diagnostic(out, t_star - delta));
    }
    let monotone = values.windows(2).all(|w| w[1] > w[0]);
    let growth = values.last().unwrap() / values.first().unwrap();
    let fine = ladder.last().unwrap();
    let d1 = dz_rho1_bound_strided(fine, 1);
    let d2 = dz_rho1_bound_strided(fine, 2);
    let dz_ratio = d1 / d2;
    report(
        "9 (blow-up diagnostics)",
        monotone && growth >= 3.0 && (0.5..=2.0).contains(&dz_ratio),
        &format!(
            "H1 functional {values:?} monotone x{growth:.2} (>= 3) over factor-8 Delta range; dz rho1 {d1:.2} vs {d2:.2} (ratio {dz_ratio:.2} in [0.5, 2])"
        ),
    );
}

#[test]
fn criterion_10_instantaneous_shock_proxy() {
    let runs = eta_sweep_runs();
    let w0s: Vec<f64> = runs.iter().map(|r| r.w0).collect();
    let t_stars: Vec<f64> = runs
        .iter()
        .map(|r| r.shock.as_ref().expect("shock").t_star)
        .collect();
    let w0_up = w0s.windows(2).all(|w| w[1] > w[0]);
    let t_down = t_stars.windows(2).all(|w| w[1] < w[0]);
    report(
        "10 (instantaneous-shock proxy)",
        w0_up && t_down,
        &format!("eta = [0.1, 0.03, 0.01]: W0 = {w0s:?} strictly up; T* = {t_stars:?} strictly down"),
    );
}

#[test]
fn criterion_11_transport_residual_decay() {
    let p = params();
    let regime = Regime::H1Zero;
    let data = planar_mhd::experiments::gen_shock_data(
        &planar_mhd::experiments::InitialDataSpec::from_params(DataKind::ShockFamily, &p),
        &p,
        regime,
    );
    let _g = heavy_lock();
    let mut sups = Vec::new();
    for n in [1usize << 12, 1 << 13] {
        let grid = Grid::new(-3.4, 3.4, n);
        let xs: Vec<f64> = (0..grid.n).map(|j| grid.x(j)).collect();
        let phi = planar_mhd::decomp::integrate_profile(&data.profiles, &xs, &p, regime).unwrap();
        let run = simulate(Field::new(grid, phi, 0.0), &p, regime, 1.5, 4).unwrap();
        let mut sup = 0.0f64;
        for (fam, z) in [
            (0usize, -0.1),
            (0, 0.05),
            (1, -0.05),
            (2, 0.1),
            (3, -0.15),
            (3, 0.0),
            (4, 0.05),
            (5, -0.1),
            (6, 0.0),
            (6, 0.12),
        ] {
            let tr = trace_characteristic(&run, &p, fam, z).unwrap();
            for (_, rw, rv) in transport_residual(&tr, &run, &p).unwrap() {
                sup = sup.max(rw).max(rv);
            }
        }
        sups.push(sup);
    }
    let order = (sups[0] / sups[1]).log2();
    report(
        "11 (transport-equation residuals)",
        order >= 1.0,
        &format!("sup residuals {sups:?}; decay order {order:.2} >= 1 under 2x refinement"),
    );
}

#[test]
fn criterion_12_euler_and_h1zero_regimes() {
    // Criteria 1, 2 (applicable identities) and 4 for the reduced regimes
    // are covered inside criteria 1-4's regime loops; here: the identity
    // values and the regime-specific lifespan runs.
    let p = params();
    // Applicable identity set: middle families are linearly degenerate and
    // decoupled from the eigenvalue gradients.
    for (regime, hi) in [(Regime::H1Zero, 6usize), (Regime::Euler, 4)] {
        let mut worst = 0.0f64;
        for st in sample_states(SEED ^ 0x12, 500, &p, regime) {
            let t = CoefficientTable::build(&st, &p, regime).unwrap();
            for i in 1..hi {
                for m in 1..hi {
                    worst = worst.max(t.c[i][m].abs());
                }
            }
            assert!(t.c[0][0] < 0.0, "{regime:?}: c111 must stay negative");
        }
        assert!(worst <= 1e-10, "{regime:?} middle-family identities: {worst:.2e}");
    }
    let c_euler = c111_at_origin(&p, Regime::Euler).unwrap();
    assert!(
        (c_euler + (p.gamma + 1.0) / 2.0).abs() <= 1e-12,
        "euler c111(0) = {c_euler}"
    );
    check_lifespan(euler_run(), "12 (Euler regime lifespan)");
    let (base, _) = base_run();
    assert!(base.shock.is_some());
    report(
        "12 (reduced regimes)",
        true,
        "quintuple/triple identity sets hold; Euler and H1=0 lifespan windows verified",
    );
}
