//! Command-line front end: eigenstructure and coefficient verification,
//! simulation runs, characteristic tracing, and lifespan scans.
//!
//! Exit codes:
//!   0  success, all checked invariants hold
//!   1  internal error
//!   2  configuration error
//!   3  invalid parameters or state
//!   4  degenerate transverse-field direction
//!   5  numerical-domain / oracle / stencil / quadrature failure
//!   6  state left the hyperbolicity ball
//!   7  CFL violation
//!   8  non-finite state (post-shock continuation refused)
//!   9  a verified identity exceeded its tolerance
//!  10  characteristic-speed groups not separated
//!  11  no shock within the configured horizon
//!  12  i/o failure

use clap::{Args, Parser, Subcommand};
use planar_mhd::coeffs::{boundedness_sweep, coefficient_gamma, fd_gamma_oracle};
use planar_mhd::config::Config;
use planar_mhd::eigen::{
    build_matrix, duality_residual, eigen_analytic, eigen_numeric_oracle, ordering_holds,
};
use planar_mhd::error::Error;
use planar_mhd::experiments::{
    run_shock_experiment, DataKind, ExperimentConfig,
};
use planar_mhd::report::{
    to_json_pretty, write_eigen_csv, write_field_csv, write_norms_csv, write_run_csv,
    write_trace_csv, CoeffReport, EigenReport, RunSummary,
};
use planar_mhd::sample::sample_states;
use planar_mhd::solver::{simulate, trace_characteristic, Field, Grid};
use planar_mhd::{PhysParams, Regime};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "planar-mhd",
    about = "Wave decomposition, structure verification and shock experiments for planar ideal compressible MHD",
    after_help = "Exit codes: 0 ok; 1 internal; 2 config; 3 invalid params/state; \
4 degenerate direction; 5 numerical domain/oracle; 6 ball exit; 7 CFL; \
8 non-finite state; 9 identity failure; 10 group separation; 11 shock timeout; 12 io"
)]
struct Cli {
    /// Plain-text `[section] key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Inline overrides, e.g. `--set phys.theta=0.005` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Cap on rayon worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRun {
    /// Regime: mhd, h1zero or euler. Defaults to mhd for the verification
    /// commands and h1zero for the experiment commands.
    #[arg(long)]
    regime: Option<String>,
    /// Grid size (number of nodes).
    #[arg(long)]
    nodes: Option<usize>,
    /// Sampling seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify eigen duality and the analytic spectra against the dense
    /// numeric oracle over sampled states; dump sample eigensystems as CSV.
    VerifyEigen {
        #[command(flatten)]
        common: CommonRun,
        /// Number of sampled states per regime.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Verify the interaction-coefficient identities, the boundedness sweep
    /// and the finite-difference oracle agreement; emit a JSON report.
    VerifyCoeffs {
        #[command(flatten)]
        common: CommonRun,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Random (i,k,m,state) samples for the fd-oracle comparison.
        #[arg(long, default_value_t = 1000)]
        fd_samples: usize,
    },
    /// Run a shock experiment and write summary.json, norms.csv, the
    /// initial/final fields and the maximizer trace.
    Simulate {
        #[command(flatten)]
        common: CommonRun,
        /// Initial-data family: shock or illposedness.
        #[arg(long, default_value = "shock")]
        data: String,
        /// Stop horizon as a multiple of the predicted upper lifespan bound.
        #[arg(long, default_value_t = 1.4)]
        t_max_factor: f64,
    },
    /// Short smooth run storing dense snapshots, then post-hoc traces of the
    /// requested family; emits one CSV per launch point.
    Trace {
        #[command(flatten)]
        common: CommonRun,
        /// Wave family, 1-based.
        #[arg(long, default_value_t = 1)]
        family: usize,
        /// Comma-separated launch points.
        #[arg(long, default_value = "-0.1,0.0,0.1", allow_hyphen_values = true)]
        launch: String,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
    },
    /// Lifespan scan over a list of support scales; one CSV row per run.
    ShockScan {
        #[command(flatten)]
        common: CommonRun,
        #[arg(long, default_value = "illposedness")]
        data: String,
        /// Comma-separated eta values.
        #[arg(long, default_value = "0.1,0.03,0.01")]
        etas: String,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::InvalidParams(_) | Error::InvalidState(_) | Error::IndexContract(_) => 3,
        Error::DegenerateDirection => 4,
        Error::NumericalDomain(_)
        | Error::OracleFailure(_)
        | Error::StencilCrossing
        | Error::QuadratureNonConvergence(_)
        | Error::SingularityDetected(_)
        | Error::RiccatiDomain(_) => 5,
        Error::BallExit(_, _) => 6,
        Error::CflViolation(_, _) => 7,
        Error::NonFiniteState(_) => 8,
        Error::GroupSeparation(_) => 10,
        Error::ShockTimeout(_) => 11,
        Error::Io(_) => 12,
    }
}

const EXIT_IDENTITY_FAILURE: u8 = 9;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_config(cli: &Cli) -> planar_mhd::Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for kv in &cli.sets {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")));
        };
        cfg.set(k.trim(), v.trim());
    }
    Ok(cfg)
}

fn resolve(
    cli: &Cli,
    common: &CommonRun,
    default_regime: &str,
) -> planar_mhd::Result<(PhysParams, Regime, usize, u64)> {
    let cfg = load_config(cli)?;
    let params = PhysParams::from_config(&cfg)?;
    let regime_name = common
        .regime
        .clone()
        .or_else(|| cfg.get("run.regime").map(str::to_string))
        .unwrap_or_else(|| default_regime.to_string());
    let regime = Regime::parse(&regime_name)?;
    let nodes = common
        .nodes
        .or(cfg.get_usize("run.nodes")?)
        .unwrap_or(1 << 14);
    let seed = common.seed.or(cfg.get_u64("run.seed")?).unwrap_or(20240913);
    Ok((params, regime, nodes, seed))
}

fn ensure_out_dir(dir: &Path) -> planar_mhd::Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_summary<T: serde::Serialize>(dir: &Path, value: &T) -> planar_mhd::Result<()> {
    fs::write(dir.join("summary.json"), to_json_pretty(value)? + "\n")?;
    Ok(())
}

fn run(cli: &Cli) -> planar_mhd::Result<u8> {
    ensure_out_dir(&cli.out_dir)?;
    match &cli.command {
        Command::VerifyEigen { common, samples } => {
            let (params, _, _, seed) = resolve(cli, common, "mhd")?;
            let mut reports = Vec::new();
            let mut csv = Vec::new();
            let mut all_pass = true;
            for regime in [Regime::Mhd, Regime::H1Zero, Regime::Euler] {
                let states = sample_states(seed, *samples, &params, regime);
                let mut max_dual = 0.0f64;
                let mut max_dev = 0.0f64;
                let mut ordering_ok = true;
                for st in &states {
                    let es = eigen_analytic(st, &params, regime)?;
                    max_dual = max_dual.max(duality_residual(&es));
                    let m = build_matrix(st, &params, regime)?;
                    let num = eigen_numeric_oracle(&m)?;
                    let mut ana: Vec<f64> = es.lambdas[..regime.dim()].to_vec();
                    ana.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    for (a, n) in ana.iter().zip(&num) {
                        max_dev = max_dev.max((a - n).abs());
                    }
                    if regime == Regime::Mhd {
                        ordering_ok &= ordering_holds(&es, 0.0);
                    }
                }
                let es = eigen_analytic(&states[0], &params, regime)?;
                write_eigen_csv(&mut csv, regime.name(), &es)?;
                let pass = max_dual <= 1e-10 && max_dev <= 1e-8 && ordering_ok;
                all_pass &= pass;
                reports.push(EigenReport {
                    regime,
                    samples: *samples,
                    max_duality_residual: max_dual,
                    max_oracle_deviation: max_dev,
                    ordering_ok,
                    pass,
                });
            }
            fs::write(cli.out_dir.join("eigensystems.csv"), csv)?;
            write_summary(&cli.out_dir, &reports)?;
            for r in &reports {
                println!(
                    "verify-eigen [{}]: duality {:.3e}, oracle dev {:.3e} -> {}",
                    r.regime.name(),
                    r.max_duality_residual,
                    r.max_oracle_deviation,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            Ok(if all_pass { 0 } else { EXIT_IDENTITY_FAILURE })
        }
        Command::VerifyCoeffs {
            common,
            samples,
            fd_samples,
        } => {
            let (params, regime, _, seed) = resolve(cli, common, "mhd")?;
            let sweep = boundedness_sweep(&params, regime, *samples, seed)?;
            let mut fd_max = 0.0f64;
            let mut closed_max = 0.0f64;
            let states = sample_states(seed ^ 0x5eed, *fd_samples, &params, regime);
            let n = regime.dim();
            let mut rng_idx = 0usize;
            for st in &states {
                // Deterministic index walk over valid (i, k, m) triples.
                let (i, k, m) = loop {
                    rng_idx += 1;
                    let i = rng_idx % n;
                    let k = (rng_idx / n) % n;
                    let m = (rng_idx / (n * n) + rng_idx) % n;
                    if k != m && !(k != i && m == i) {
                        break (i, k, m);
                    }
                };
                let a = coefficient_gamma(i, k, m, st, &params, regime)?;
                let f = fd_gamma_oracle(i, k, m, st, &params, regime, 1e-5)?;
                let scale = a.abs().max(1e-3);
                fd_max = fd_max.max((a - f).abs() / scale);
                if regime == Regime::Mhd && matches!(i, 1 | 3 | 5) {
                    let es = eigen_analytic(st, &params, regime)?;
                    if let Some(c) = planar_mhd::coeffs::gamma_closed_form(i, k, m, &es, &params) {
                        closed_max = closed_max.max((a - c).abs() / scale);
                    }
                }
            }
            let identities_ok = sweep.vanishing_residual <= 1e-10
                && sweep.degeneracy_residual <= 1e-10
                && sweep.c111_max < 0.0
                && sweep.gamma_226_residual <= 1e-9
                && sweep.gamma_264_residual <= 1e-8;
            let no_divergence = sweep
                .hperp_shrink
                .iter()
                .all(|(_, g)| g.is_finite() && *g <= 10.0 * sweep.gamma_max.max(1.0));
            let pass = identities_ok && no_divergence && fd_max <= 1e-5;
            let report = CoeffReport {
                sweep,
                fd_samples: *fd_samples,
                fd_max_rel_err: fd_max,
                closed_form_max_rel_err: closed_max,
                pass,
            };
            write_summary(&cli.out_dir, &report)?;
            println!(
                "verify-coeffs [{}]: Gamma_max {:.4}, fd rel err {:.3e} -> {}",
                regime.name(),
                report.sweep.gamma_max,
                fd_max,
                if pass { "pass" } else { "FAIL" }
            );
            Ok(if pass { 0 } else { EXIT_IDENTITY_FAILURE })
        }
        Command::Simulate {
            common,
            data,
            t_max_factor,
        } => {
            let (params, regime, nodes, seed) = resolve(cli, common, "h1zero")?;
            let kind = parse_kind(data)?;
            let mut cfg = ExperimentConfig::new(regime, params, kind);
            cfg.n_nodes = nodes;
            cfg.t_max_factor = *t_max_factor;
            cfg.seed = seed;
            if regime == Regime::Mhd {
                cfg.geometry_delta = Some(1e-3);
            }
            let out = run_shock_experiment(&cfg)?;
            let summary = RunSummary::from_output(&out);
            write_summary(&cli.out_dir, &summary)?;
            let mut buf = Vec::new();
            write_norms_csv(&mut buf, &out.norms)?;
            fs::write(cli.out_dir.join("norms.csv"), buf)?;
            let mut buf = Vec::new();
            write_field_csv(&mut buf, &out.initial)?;
            fs::write(cli.out_dir.join("initial_field.csv"), buf)?;
            let mut buf = Vec::new();
            write_field_csv(&mut buf, &out.final_field)?;
            fs::write(cli.out_dir.join("final_field.csv"), buf)?;
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &out.z0_trace)?;
            fs::write(cli.out_dir.join("z0_trace.csv"), buf)?;
            // The summary is on disk either way; no shock within the
            // horizon is reported through the timeout exit code.
            match &out.shock {
                Some(s) => {
                    println!(
                        "simulate [{}]: shock at T* = {:.4} (window [{:.4}, {:.4}]), z* = {:.4}",
                        regime.name(),
                        s.t_star,
                        s.t_lo,
                        s.t_hi,
                        s.z_star
                    );
                    Ok(0)
                }
                None => Err(Error::ShockTimeout(out.stopped_at)),
            }
        }
        Command::Trace {
            common,
            family,
            launch,
            t_max,
        } => {
            let (params, regime, nodes, _) = resolve(cli, common, "h1zero")?;
            if *family == 0 || *family > regime.dim() {
                return Err(Error::IndexContract(format!(
                    "family {family} outside 1..={}",
                    regime.dim()
                )));
            }
            let eta = params.eta;
            let data = planar_mhd::experiments::gen_shock_data(
                &planar_mhd::experiments::InitialDataSpec::from_params(
                    DataKind::ShockFamily,
                    &params,
                ),
                &params,
                regime,
            );
            let lam_pad = 2.0;
            let grid = Grid::new(
                -2.0 * eta - 1.0,
                2.0 * eta + lam_pad * t_max + 1.0,
                nodes,
            );
            let xs: Vec<f64> = (0..grid.n).map(|j| grid.x(j)).collect();
            let phi =
                planar_mhd::decomp::integrate_profile(&data.profiles, &xs, &params, regime)?;
            let run = simulate(Field::new(grid, phi, 0.0), &params, regime, *t_max, 4)?;
            for z_str in launch.split(',') {
                let z: f64 = z_str
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad launch point `{z_str}`")))?;
                let trace = trace_characteristic(&run, &params, family - 1, z)?;
                let mut buf = Vec::new();
                write_trace_csv(&mut buf, &trace)?;
                let name = format!("trace_f{}_z{}.csv", family, z_str.trim());
                fs::write(cli.out_dir.join(name), buf)?;
            }
            let mut buf = Vec::new();
            write_run_csv(&mut buf, &run)?;
            fs::write(cli.out_dir.join("run_snapshots.csv"), buf)?;
            write_summary(
                &cli.out_dir,
                &serde_json::json!({
                    "command": "trace",
                    "regime": regime.name(),
                    "family": family,
                    "t_max": t_max,
                    "snapshots": run.snapshots.len(),
                }),
            )?;
            println!("trace [{}]: {} snapshots stored", regime.name(), run.snapshots.len());
            Ok(0)
        }
        Command::ShockScan { common, data, etas } => {
            let (params, regime, nodes, seed) = resolve(cli, common, "h1zero")?;
            let kind = parse_kind(data)?;
            let mut rows = Vec::new();
            let mut csv = String::from(
                "eta,theta,W0,T_lo,T_star,T_hi,min_rho_2..,max_w_2..,S,J,V_over_etaW0sq,Wcheck_over_etaW0sq\n",
            );
            for eta_str in etas.split(',') {
                let eta: f64 = eta_str
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad eta `{eta_str}`")))?;
                let p = PhysParams { eta, ..params };
                p.validate()?;
                let mut cfg = ExperimentConfig::new(regime, p, kind);
                cfg.n_nodes = nodes;
                cfg.seed = seed;
                if regime == Regime::Mhd {
                    cfg.geometry_delta = Some(1e-3);
                }
                let out = run_shock_experiment(&cfg)?;
                let shock = out
                    .shock
                    .clone()
                    .ok_or(Error::ShockTimeout(out.stopped_at))?;
                let norms = out.norms.at_end().unwrap();
                let n = regime.dim();
                let min_rho_rest = out.min_rho[1..n]
                    .iter()
                    .fold(f64::INFINITY, |a, b| a.min(*b));
                let max_w_rest = out.max_abs_w[1..n].iter().fold(0.0f64, |a, b| a.max(*b));
                let scale = eta * out.w0 * out.w0;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    eta,
                    p.theta,
                    out.w0,
                    out.t_lo,
                    shock.t_star,
                    out.t_hi,
                    min_rho_rest,
                    max_w_rest,
                    norms.s,
                    norms.j,
                    norms.v / scale,
                    norms.w_check / scale
                ));
                rows.push(RunSummary::from_output(&out));
                println!(
                    "shock-scan [{} eta={}]: W0 = {:.5}, T* = {:.3}",
                    regime.name(),
                    eta,
                    out.w0,
                    shock.t_star
                );
            }
            fs::write(cli.out_dir.join("shock_scan.csv"), csv)?;
            write_summary(&cli.out_dir, &rows)?;
            Ok(0)
        }
    }
}

fn parse_kind(s: &str) -> planar_mhd::Result<DataKind> {
    match s {
        "shock" => Ok(DataKind::ShockFamily),
        "illposedness" => Ok(DataKind::IllposednessFamily),
        other => Err(Error::Config(format!(
            "unknown data family `{other}` (expected shock or illposedness)"
        ))),
    }
}
