//! The four subcommands.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use wgflow::dynamics::{rhs, simulate};
use wgflow::energetics::{
    energy, energy_balance, moment_certificate, reports, FourierGrid, MomentCertificate,
    ReportOptions,
};
use wgflow::fit::{fit_log_rate, RateFit};
use wgflow::io::{
    fmt_num, read_energy_reports, write_energy_reports, write_sidecar, write_steady,
    write_trajectory, SteadySidecar,
};
use wgflow::kernels::{AttractionPotential, Exponents};
use wgflow::measures::{wasserstein, InverseCdf, ReferenceProfile};
use wgflow::particle::{discrete_energy, particle_rhs, ParticleSystem};
use wgflow::steady::{shifted_profile_mlt1, steady_qr1_with, NodeFate};
use wgflow::{Error, SteadyKind};

use crate::config::Resolved;
use crate::exit::{Failure, ORACLE_MISMATCH};

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::config)? + "\n";
    fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::io(format!("cannot write {}: {e}", path.display()));
    let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(fail)?);
    writeln!(file, "{header}").map_err(fail)?;
    for row in rows {
        writeln!(file, "{row}").map_err(fail)?;
    }
    file.flush().map_err(fail)
}

#[derive(Serialize)]
struct SteadyDistance {
    kind: SteadyKind,
    final_w2: Option<f64>,
    monotone: Option<bool>,
    rate: Option<RateFit>,
}

#[derive(Serialize)]
struct SlopeSummary {
    certificate: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    n: usize,
    q_a: f64,
    q_r: f64,
    mass: f64,
    dt: f64,
    t_end: f64,
    steps: usize,
    lambda: f64,
    fit_window: [f64; 2],
    rate_com: Option<RateFit>,
    final_com_gap: f64,
    steady: Option<SteadyDistance>,
    min_dissipation: Option<f64>,
    energy_drop: Option<f64>,
    energy_balance_defect: Option<f64>,
    slope: SlopeSummary,
    moment_certificate: Option<MomentCertificate>,
    probes: Vec<f64>,
}

pub fn simulate_cmd(config: &Path, out: &Path, threads: Option<usize>) -> Result<(), Failure> {
    let run = Resolved::load(config)?;
    let x0 = run.initial()?;
    let cfg = run.integrator(threads)?;
    let opts = ReportOptions {
        r: run
            .raw
            .moment_order
            .unwrap_or_else(|| ReportOptions::for_exponents(&run.exps).r),
        fourier: run.raw.reports.fourier.then(FourierGrid::default),
    };
    let traj = simulate(&x0, &run.pot, &run.exps, &cfg).map_err(Failure::from_core)?;

    create_dir(out)?;
    write_trajectory(&out.join("trajectory"), &traj).map_err(Failure::from_core)?;
    let times = traj.times();
    let (lo, hi) = run.fit_window(cfg.t_end);

    let com = run.profile.center_of_mass();
    let com_gap: Vec<f64> = traj.states.iter().map(|s| (s.x.mean() - com).abs()).collect();

    let want_reports = run.raw.reports.energy || run.raw.reports.moments || run.raw.reports.fourier;
    let reps = if want_reports {
        let reps = reports(&traj, &run.pot, &run.exps, &opts).map_err(Failure::from_core)?;
        write_energy_reports(&out.join("energy.csv"), &reps).map_err(Failure::from_core)?;
        Some(reps)
    } else {
        None
    };

    let steady = if run.exps.q_r() == 1.0 && run.raw.reports.wasserstein_to_steady {
        Some(steady_distance(&run, &traj.states.iter().map(|s| &s.x).collect::<Vec<_>>(), &times, (lo, hi), out)?)
    } else {
        None
    };

    let moment = match &reps {
        Some(reps) if run.raw.reports.moments => {
            match moment_certificate(reps, &run.exps, &run.pot, opts.r) {
                Ok(c) => Some(c),
                Err(Error::Precondition(_)) => None,
                Err(e) => return Err(Failure::from_core(e)),
            }
        }
        _ => None,
    };

    let summary = SimulateSummary {
        n: run.n(),
        q_a: run.exps.q_a(),
        q_r: run.exps.q_r(),
        mass: run.profile.mass(),
        dt: cfg.dt,
        t_end: cfg.t_end,
        steps: traj.steps,
        lambda: traj.lambda,
        fit_window: [lo, hi],
        rate_com: fit_log_rate(&times, &com_gap, lo, hi),
        final_com_gap: *com_gap.last().expect("trajectory is never empty"),
        steady,
        min_dissipation: reps
            .as_ref()
            .map(|r| r.iter().map(|r| r.dissipation).fold(f64::INFINITY, f64::min)),
        energy_drop: reps
            .as_ref()
            .map(|r| r[0].energy - r[r.len() - 1].energy),
        energy_balance_defect: match &reps {
            Some(r) if r.len() >= 2 => Some(energy_balance(r).map_err(Failure::from_core)?),
            _ => None,
        },
        slope: SlopeSummary {
            certificate: traj.slope_certificate,
            ratio: traj.slope_ratio(),
        },
        moment_certificate: moment,
        probes: traj.last().probes.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "simulated {} steps to t = {}; outputs in {}",
        traj.steps,
        cfg.t_end,
        out.display()
    );
    Ok(())
}

/// Writes `wasserstein.csv` against the `q_r = 1` steady state when it exists.
fn steady_distance(
    run: &Resolved,
    states: &[&InverseCdf],
    times: &[f64],
    (lo, hi): (f64, f64),
    out: &Path,
) -> Result<SteadyDistance, Failure> {
    let steady = match steady_qr1_with(&run.pot, run.n()) {
        Ok(s) => s,
        Err(Error::NoSteadyState { .. }) => {
            return Ok(SteadyDistance {
                kind: SteadyKind::NoneExists,
                final_w2: None,
                monotone: None,
                rate: None,
            })
        }
        Err(e) => return Err(Failure::from_core(e)),
    };
    let w2 = states
        .iter()
        .map(|x| wasserstein(x, &steady.x_star, 2.0))
        .collect::<wgflow::Result<Vec<f64>>>()
        .map_err(Failure::from_core)?;
    write_rows(
        &out.join("wasserstein.csv"),
        "t,w2",
        times.iter().zip(&w2).map(|(t, w)| format!("{},{}", fmt_num(*t), fmt_num(*w))),
    )?;
    Ok(SteadyDistance {
        kind: steady.kind,
        final_w2: w2.last().copied(),
        monotone: Some(w2.windows(2).all(|w| w[1] <= w[0] + 1e-10)),
        rate: fit_log_rate(times, &w2, lo, hi),
    })
}

pub fn steady_cmd(config: &Path, out: &Path) -> Result<(), Failure> {
    let run = Resolved::load(config)?;
    if run.exps.q_r() != 1.0 {
        return Err(Failure::config(format!(
            "steady states are constructed for q_r = 1 only, got q_r = {}",
            run.exps.q_r()
        )));
    }
    create_dir(out)?;
    match steady_qr1_with(&run.pot, run.n()) {
        Ok(s) => {
            let (csv, json) = write_steady(&out.join("steady"), &s).map_err(Failure::from_core)?;
            println!("steady state ({:?}) written to {} and {}", s.kind, csv.display(), json.display());
        }
        Err(Error::NoSteadyState { mass }) => {
            let sidecar = SteadySidecar {
                x_lo: None,
                x_hi: None,
                x_zero: None,
                kind: SteadyKind::NoneExists,
            };
            write_sidecar(&out.join("steady.json"), &sidecar).map_err(Failure::from_core)?;
            let fates = shifted_profile_mlt1(&run.profile, run.n()).map_err(Failure::from_core)?;
            let path = out.join("shifted_profile.csv");
            write_rows(
                &path,
                "z,fate,x",
                fates.iter().enumerate().map(|(i, f)| {
                    let z = fmt_num(wgflow::measures::grid_point(run.n(), i));
                    match f {
                        NodeFate::EscapesLeft => format!("{z},escapes_left,"),
                        NodeFate::Window(x) => format!("{z},window,{}", fmt_num(*x)),
                        NodeFate::EscapesRight => format!("{z},escapes_right,"),
                    }
                }),
            )?;
            println!(
                "no steady state for mass {mass} < 1; limiting shifted profile written to {}",
                path.display()
            );
        }
        Err(e) => return Err(Failure::from_core(e)),
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleCase {
    q_a: f64,
    q_r: f64,
    states: usize,
    max_rhs_diff: f64,
    max_energy_diff: f64,
    passed: bool,
}

#[derive(Serialize)]
struct OracleReport {
    seed: u64,
    n: usize,
    tolerance: f64,
    cases: Vec<OracleCase>,
    passed: bool,
}

/// Exponent pairs exercised when no config is given.
const DEFAULT_PAIRS: [(f64, f64); 6] = [(1.7, 1.3), (1.8, 1.4), (2.0, 1.2), (1.5, 1.5), (1.25, 1.25), (2.0, 2.0)];
const DEFAULT_ORACLE_N: usize = 200;
const STATES_PER_PAIR: usize = 10;

pub fn oracle_check_cmd(
    config: Option<&Path>,
    out: Option<&Path>,
    seed: u64,
    tolerance: f64,
) -> Result<(), Failure> {
    let (profile, pairs, n) = match config {
        Some(path) => {
            let run = Resolved::load(path)?;
            (run.profile.clone(), vec![(run.exps.q_a(), run.exps.q_r())], run.n())
        }
        None => (
            ReferenceProfile::new(vec![0.0, 0.5, 1.5], vec![1.2, 0.4]).map_err(Failure::config)?,
            DEFAULT_PAIRS.to_vec(),
            DEFAULT_ORACLE_N,
        ),
    };
    let (lo, hi) = profile.support();
    let pad = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for (q_a, q_r) in pairs {
        let exps = Exponents::new(q_a, q_r).map_err(Failure::config)?;
        let pot = AttractionPotential::new(&profile, q_a, n).map_err(Failure::config)?;
        let (mut rhs_diff, mut energy_diff) = (0.0f64, 0.0f64);
        for _ in 0..STATES_PER_PAIR {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(lo - pad..hi + pad)).collect();
            x.sort_by(f64::total_cmp);
            let state = InverseCdf::new(x).map_err(Failure::from_core)?;
            let (d_rhs, d_energy) = oracle_gap(&state, &pot, &exps)?;
            rhs_diff = rhs_diff.max(d_rhs);
            energy_diff = energy_diff.max(d_energy);
        }
        let passed = rhs_diff <= tolerance && energy_diff <= tolerance;
        println!(
            "{} q_a = {q_a}, q_r = {q_r}: max rhs diff {rhs_diff:.3e}, max energy diff {energy_diff:.3e}",
            if passed { "PASS" } else { "FAIL" }
        );
        cases.push(OracleCase {
            q_a,
            q_r,
            states: STATES_PER_PAIR,
            max_rhs_diff: rhs_diff,
            max_energy_diff: energy_diff,
            passed,
        });
    }
    let passed = cases.iter().all(|c| c.passed);
    if let Some(out) = out {
        create_dir(out)?;
        write_json(
            &out.join("oracle.json"),
            &OracleReport {
                seed,
                n,
                tolerance,
                cases,
                passed,
            },
        )?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::new(ORACLE_MISMATCH, format!("oracle mismatch above {tolerance:e}")))
    }
}

fn oracle_gap(state: &InverseCdf, pot: &AttractionPotential, exps: &Exponents) -> Result<(f64, f64), Failure> {
    let sys = ParticleSystem::from(state);
    let v = rhs(state, pot, exps).map_err(Failure::from_core)?;
    let p = particle_rhs(&sys, pot, exps).map_err(Failure::from_core)?;
    let d_rhs = v.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let d_energy = (energy(state, pot, exps) - discrete_energy(&sys, pot, exps)).abs();
    Ok((d_rhs, d_energy))
}

#[derive(Serialize)]
struct AuditReport {
    source: PathBuf,
    snapshots: usize,
    energy_start: f64,
    energy_end: f64,
    energy_drop: f64,
    defect: f64,
    relative_defect: f64,
    energy_monotone: bool,
    min_dissipation: f64,
    tolerance: f64,
    passed: bool,
}

/// Audits `energy.csv` in a `simulate` output directory.
pub fn energy_audit_cmd(dir: &Path, out: Option<&Path>, tolerance: f64) -> Result<(), Failure> {
    let source = if dir.is_file() {
        dir.to_path_buf()
    } else {
        dir.join("energy.csv")
    };
    if !source.exists() {
        return Err(Failure::io(format!("no energy report at {}", source.display())));
    }
    let reps = read_energy_reports(&source).map_err(Failure::from_core)?;
    let defect = energy_balance(&reps).map_err(Failure::from_core)?;
    let (first, last) = (reps[0].energy, reps[reps.len() - 1].energy);
    let drop = first - last;
    let relative = if drop == 0.0 { defect } else { defect / drop.abs() };
    let report = AuditReport {
        source: source.clone(),
        snapshots: reps.len(),
        energy_start: first,
        energy_end: last,
        energy_drop: drop,
        defect,
        relative_defect: relative,
        energy_monotone: reps.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-10),
        min_dissipation: reps.iter().map(|r| r.dissipation).fold(f64::INFINITY, f64::min),
        tolerance,
        passed: relative <= tolerance,
    };
    println!(
        "{} energy balance: defect {defect:.3e}, |E(0) - E(T)| = {:.6e}, relative {relative:.3e} (tolerance {tolerance:e})",
        if report.passed { "PASS" } else { "FAIL" },
        drop.abs()
    );
    let target = match out {
        Some(o) => {
            create_dir(o)?;
            o.join("audit.json")
        }
        None => source.with_file_name("audit.json"),
    };
    write_json(&target, &report)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::new(
            ORACLE_MISMATCH,
            format!("energy balance defect {relative:.3e} exceeds {tolerance:e}"),
        ))
    }
}
