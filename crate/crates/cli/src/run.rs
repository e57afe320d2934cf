use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use nhqw_core::observables::{
    entropy, entropy_after, fidelity, launch_resolved_distribution, lyapunov_exponent,
    polarization_averaged_growth, reduced_density, state_ipr,
};
use nhqw_core::spectral::{
    distance_to_curve, median_edge_mass, obc_spectrum, pbc_spectrum, point_gap_winding,
    spectral_loop_area, EnergySource,
};
use nhqw_core::virtual_lab::CountsRecord;
use nhqw_core::virtual_lab::{
    bootstrap_error, normalize_counts, reconstruct_rho, simulate_counts, AmplitudeClass, Basis,
    DetectionConfig,
};
use nhqw_core::walk::{
    self, probability_distribution, Boundary, InitialState, PolarizedDistribution, WalkParams,
    WalkState,
};
use rayon::prelude::*;

use crate::csv::{Field, Table};
use crate::error::CliError;
use crate::scenario::{Detection, Grid, Job, Scenario};

/// OBC energies closer than this to the PBC curve are left out of the winding tally.
pub const WINDING_EXCLUSION: f64 = 1e-3;

pub struct Output {
    pub name: &'static str,
    pub table: Table,
}

impl Output {
    fn new(name: &'static str, table: Table) -> Self {
        Output { name, table }
    }
}

const DISTRIBUTION_HEADER: &str = "t,x,p_h,p_v";
const REPORT_HEADER: &str = "quantity,value,stderr";

fn distribution_rows(table: &mut Table, t: usize, d: &PolarizedDistribution) {
    for (&x, &(ph, pv)) in &d.0 {
        table.row(vec![t.into(), x.into(), ph.into(), pv.into()]);
    }
}

fn report_row(table: &mut Table, quantity: &str, value: f64, stderr: Option<f64>) {
    table.row(vec![quantity.into(), value.into(), stderr.into()]);
}

/// Evaluates `f` on every grid point in parallel; results keep grid order.
fn map_grid<F>(grid: &Grid, f: F) -> Result<Vec<(f64, f64, f64)>, CliError>
where
    F: Fn(f64, f64) -> nhqw_core::Result<f64> + Sync,
{
    grid.points()
        .into_par_iter()
        .map(|(th, g)| f(th, g).map(|v| (th, g, v)).map_err(CliError::from))
        .collect()
}

fn evolve(
    params: &WalkParams,
    initial: &InitialState,
    steps: usize,
    every: Option<usize>,
) -> Result<Vec<Output>, CliError> {
    let mut table = Table::new(DISTRIBUTION_HEADER);
    walk::evolve_with(initial, params, steps, |s: &WalkState| {
        let keep = s.t == steps || every.is_some_and(|n| s.t.is_multiple_of(n));
        if keep {
            distribution_rows(&mut table, s.t, &probability_distribution(s));
        }
        Ok(())
    })?;
    Ok(vec![Output::new("distribution.csv", table)])
}

#[allow(clippy::too_many_arguments)]
fn spectrum(
    theta: f64,
    gamma: f64,
    k_samples: usize,
    sites: usize,
    states: bool,
    diagnostics: bool,
    edge_fraction: f64,
) -> Result<Vec<Output>, CliError> {
    let line = WalkParams::new(theta, gamma, Boundary::Infinite, false)?;
    let chain = WalkParams::new(theta, gamma, Boundary::Open(sites), false)?;
    let pbc = pbc_spectrum(&line, k_samples)?;
    let obc = obc_spectrum(&chain, states || diagnostics)?;

    let mut table = Table::new("boundary,band_or_index,k,re_e,im_e");
    for q in pbc.energies.iter().chain(&obc.energies) {
        match q.source {
            EnergySource::Pbc { k, band } => table.row(vec![
                "pbc".into(),
                band.into(),
                k.into(),
                q.e.re.into(),
                q.e.im.into(),
            ]),
            EnergySource::Obc { index } => table.row(vec![
                "obc".into(),
                index.into(),
                Field::Empty,
                q.e.re.into(),
                q.e.im.into(),
            ]),
        }
    }
    let mut out = vec![Output::new("spectrum.csv", table)];

    if states {
        let mut profiles = Table::new("index,x,probability");
        for (i, v) in obc.eigenstates.iter().flatten().enumerate() {
            for (x, p) in v.iter().enumerate() {
                profiles.row(vec![i.into(), x.into(), (*p).into()]);
            }
        }
        out.push(Output::new("profiles.csv", profiles));
    }

    if diagnostics {
        let mut diag = Table::new(REPORT_HEADER);
        report_row(&mut diag, "pbc_max_abs_im_e", pbc.max_abs_imag(), None);
        report_row(&mut diag, "obc_max_abs_im_e", obc.max_abs_imag(), None);
        for (i, a) in spectral_loop_area(&pbc)?.iter().enumerate() {
            report_row(&mut diag, &format!("loop_area_curve_{i}"), *a, None);
        }
        let mut counted = 0usize;
        let mut winding = 0usize;
        for q in &obc.energies {
            if distance_to_curve(&pbc, q.e)? >= WINDING_EXCLUSION {
                counted += 1;
                if point_gap_winding(&pbc, q.e)? != 0 {
                    winding += 1;
                }
            }
        }
        report_row(&mut diag, "winding_evaluated", counted as f64, None);
        if counted > 0 {
            report_row(
                &mut diag,
                "winding_nonzero_fraction",
                winding as f64 / counted as f64,
                None,
            );
        }
        report_row(
            &mut diag,
            "median_edge_mass",
            median_edge_mass(&obc, edge_fraction)?,
            None,
        );
        out.push(Output::new("diagnostics.csv", diag));
    }
    Ok(out)
}

fn growth(params: &WalkParams, steps: usize) -> Result<Vec<Output>, CliError> {
    let profile = polarization_averaged_growth(params, steps)?;
    let (Some(lh), Some(lv)) = (&profile.lambda_h, &profile.lambda_v) else {
        return Err(CliError::Numerical(
            "growth profile lacks resolved rates".into(),
        ));
    };
    let mut table = Table::new("v,lambda_h,lambda_v,lambda_bar");
    for i in 0..profile.velocities.len() {
        table.row(vec![
            profile.velocities[i].into(),
            lh[i].into(),
            lv[i].into(),
            profile.rates[i].into(),
        ]);
    }
    let mut dist = Table::new(DISTRIBUTION_HEADER);
    distribution_rows(
        &mut dist,
        steps,
        &launch_resolved_distribution(params, steps)?,
    );
    Ok(vec![
        Output::new("growth.csv", table),
        Output::new("distribution.csv", dist),
    ])
}

fn dynamics(
    params: &WalkParams,
    initial: &InitialState,
    times: &[usize],
) -> Result<Vec<Output>, CliError> {
    let params = WalkParams {
        normalize_each_step: true,
        ..*params
    };
    let wanted: BTreeSet<usize> = times.iter().copied().collect();
    let last = *wanted.last().expect("non-empty time range");
    let mut table = Table::new("t,entropy,ipr");
    walk::evolve_with(initial, &params, last, |s: &WalkState| {
        if wanted.contains(&s.t) {
            let e = entropy(&reduced_density(s)?)?;
            table.row(vec![s.t.into(), e.into(), state_ipr(s).into()]);
        }
        Ok(())
    })?;
    Ok(vec![Output::new("dynamics.csv", table)])
}

fn measured_state(
    params: &WalkParams,
    initial: &InitialState,
    steps: usize,
) -> Result<WalkState, CliError> {
    let params = WalkParams {
        normalize_each_step: true,
        ..*params
    };
    Ok(walk::evolve(initial, &params, steps)?)
}

/// Z and X records for one seed; X uses the next seed so the bases are independent.
fn record_pair(
    state: &WalkState,
    cfg: DetectionConfig,
    seed: u64,
) -> Result<[CountsRecord; 2], CliError> {
    let z = simulate_counts(state, &DetectionConfig { seed, ..cfg }, Basis::Z)?;
    let x = simulate_counts(
        state,
        &DetectionConfig {
            seed: seed.wrapping_add(1),
            ..cfg
        },
        Basis::X,
    )?;
    Ok([z, x])
}

fn virtual_lab(
    params: &WalkParams,
    initial: &InitialState,
    steps: usize,
    det: &Detection,
    seed: u64,
) -> Result<Vec<Output>, CliError> {
    let state = measured_state(params, initial, steps)?;
    let exact = entropy(&reduced_density(&state)?)?;
    let [z, x] = record_pair(&state, det.config, seed)?;
    let rho = reconstruct_rho(&z, &x, AmplitudeClass::Real)?;
    let s = entropy(&rho)?;
    let boot = bootstrap_error(&z, &x, det.resamples, seed.wrapping_add(2))?;
    let mut table = Table::new(REPORT_HEADER);
    report_row(&mut table, "entropy_exact", exact, None);
    report_row(&mut table, "entropy_reconstructed", s, Some(boot.stderr));
    report_row(&mut table, "alpha", rho.alpha, None);
    report_row(&mut table, "beta", rho.beta, None);
    report_row(&mut table, "chi", rho.chi.re, None);
    report_row(&mut table, "shots_per_basis", det.config.shots as f64, None);
    report_row(&mut table, "detected_z", z.total_detected as f64, None);
    report_row(&mut table, "detected_x", x.total_detected as f64, None);
    Ok(vec![Output::new("virtual_lab.csv", table)])
}

fn fidelity_report(
    params: &WalkParams,
    initial: &InitialState,
    steps: usize,
    det: &Detection,
    seed: u64,
) -> Result<Vec<Output>, CliError> {
    let state = measured_state(params, initial, steps)?;
    let [z, x] = record_pair(&state, det.config, seed)?;
    let exact_z = probability_distribution(&state);
    let exact_x = nhqw_core::virtual_lab::basis_distribution(&state, Basis::X);
    let mut table = Table::new(REPORT_HEADER);
    report_row(
        &mut table,
        "fidelity_z",
        fidelity(&normalize_counts(&z)?, &exact_z),
        None,
    );
    report_row(
        &mut table,
        "fidelity_x",
        fidelity(&normalize_counts(&x)?, &exact_x),
        None,
    );
    report_row(&mut table, "detected_z", z.total_detected as f64, None);
    report_row(&mut table, "detected_x", x.total_detected as f64, None);
    Ok(vec![Output::new("fidelity.csv", table)])
}

/// Runs the scenario's command and returns its CSV tables.
pub fn run(scenario: &Scenario) -> Result<Vec<Output>, CliError> {
    match &scenario.job {
        Job::Evolve {
            params,
            initial,
            steps,
            record_every,
        } => evolve(params, initial, *steps, *record_every),
        Job::Spectrum {
            theta,
            gamma,
            k_samples,
            sites,
            states,
            diagnostics,
            edge_fraction,
        } => spectrum(
            *theta,
            *gamma,
            *k_samples,
            *sites,
            *states,
            *diagnostics,
            *edge_fraction,
        ),
        Job::Lyapunov { grid, steps } => {
            let rows = map_grid(grid, |th, g| {
                lyapunov_exponent(&WalkParams::infinite(th.to_radians(), g)?, *steps)
            })?;
            let mut table = Table::new("theta_deg,gamma,lambda_0");
            for (th, g, l) in rows {
                table.row(vec![th.into(), g.into(), l.into()]);
            }
            Ok(vec![Output::new("lyapunov.csv", table)])
        }
        Job::Growth { params, steps } => growth(params, *steps),
        Job::EntropySweep {
            grid,
            initial,
            steps,
        } => {
            let rows = map_grid(grid, |th, g| {
                entropy_after(initial, &WalkParams::infinite(th.to_radians(), g)?, *steps)
            })?;
            let mut table = Table::new("theta_deg,gamma,entropy");
            for (th, g, s) in rows {
                table.row(vec![th.into(), g.into(), s.into()]);
            }
            Ok(vec![Output::new("entropy_sweep.csv", table)])
        }
        Job::Dynamics {
            params,
            initial,
            times,
        } => dynamics(params, initial, times),
        Job::VirtualLab {
            params,
            initial,
            steps,
            detection,
        } => virtual_lab(params, initial, *steps, detection, scenario.seed),
        Job::Fidelity {
            params,
            initial,
            steps,
            detection,
        } => fidelity_report(params, initial, *steps, detection, scenario.seed),
    }
}

/// Runs on a dedicated pool of `threads` workers (all cores when `None`).
pub fn run_with_threads(
    scenario: &Scenario,
    threads: Option<usize>,
) -> Result<Vec<Output>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    pool.install(|| run(scenario))
}

/// Writes the tables plus a canonical copy of the scenario into `dir`.
pub fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    outputs: Vec<Output>,
) -> Result<Vec<(PathBuf, usize)>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = vec![];
    let echo = dir.join("scenario.toml");
    fs::write(&echo, scenario.echo_toml())
        .map_err(|e| CliError::Io(format!("{}: {e}", echo.display())))?;
    for out in outputs {
        let path = dir.join(out.name);
        let rows = out.table.rows();
        fs::write(&path, out.table.into_string())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push((path, rows));
    }
    Ok(written)
}
