//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{Complex, Matrix2};
use nhqw_core::eigen::eig_dense;
use nhqw_core::observables::{
    entropy, entropy_after, launch_resolved_distribution, lyapunov_exponent,
    polarization_averaged_growth, reduced_density, state_ipr, ReducedDensityMatrix,
};
use nhqw_core::spectral::{
    basis_index, dense_walk_matrix, distance_to_curve, median_edge_mass, obc_spectrum,
    pbc_spectrum, point_gap_winding, spectral_loop_area,
};
use nhqw_core::virtual_lab::{
    basis_distribution, bootstrap_error, reconstruct_from_distributions, reconstruct_rho,
    simulate_counts, AmplitudeClass, Basis, DetectionConfig,
};
use nhqw_core::walk::{
    self, probability_distribution, Boundary, InitialState, WalkParams, WalkState, H, V,
};
use nhqw_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ENTROPY_TOL: f64 = 1e-3;
const ENTROPY_TARGETS: [(f64, f64); 3] = [(45.0, 0.858), (57.0, 0.982), (65.0, 0.996)];
const ENTROPY_RUNTIME_S: f64 = 0.1;
const CIRCULAR_TARGET: f64 = 0.875;
const SMALL_THETA_FLOOR: f64 = 0.999;
const GROWTH_PEAKS: [(f64, f64); 3] = [(45.0, 0.6), (57.0, 0.5), (65.0, 0.4)];
const SYMMETRY_TOL: f64 = 1e-10;
const LYAPUNOV_T: usize = 2000;
const LYAPUNOV_ZERO_TOL: f64 = 0.01;
const LYAPUNOV_THETAS: [f64; 5] = [30.0, 45.0, 57.0, 65.0, 75.0];
const LYAPUNOV_GAMMAS: [f64; 5] = [0.0, 0.025, 0.05, 0.075, 0.1];
const LYAPUNOV_RUNTIME_S: f64 = 30.0;
const DISTRIBUTION_PEAKS: [(f64, i64); 3] = [(45.0, 12), (57.0, 10), (65.0, 8)];
const HERMITIAN_IM_TOL: f64 = 1e-8;
const PBC_K_SAMPLES: usize = 1024;
const OBC_SITES: usize = 50;
/// Frozen from an independent 4096-point evaluation (area 0.0921772).
const LOOP_AREA_THRESHOLD: f64 = 0.092;
const WINDING_FRACTION: f64 = 0.95;
const WINDING_EXCLUSION: f64 = 1e-3;
const EDGE_FRACTION: f64 = 0.1;
const SKIN_RATIO: f64 = 3.0;
const DYNAMICS_THETAS: [f64; 3] = [45.0, 57.0, 65.0];
const DYNAMICS_GAMMAS: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];
const BLOCH_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-12;
const CLOSED_FORM_TOL: f64 = 1e-12;
const RECONSTRUCTION_TOL: f64 = 1e-10;
const LAB_TRIALS: u64 = 100;
const LAB_DETECTIONS: f64 = 1e5;
const LAB_TARGET: f64 = 0.996;
const LAB_WINDOW: f64 = 0.01;
const LAB_MIN_HITS: usize = 95;
const LAB_RESAMPLES: usize = 200;
const BOOTSTRAP_RANGE: (f64, f64) = (0.005, 0.05);

struct Verdict {
    pass: bool,
    detail: String,
}

type Check = fn() -> Verdict;

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISS"
    }
}

fn line(theta_deg: f64, gamma: f64) -> WalkParams {
    WalkParams::infinite(theta_deg.to_radians(), gamma).unwrap()
}

fn criterion_1() -> Verdict {
    let mut pass = true;
    let mut parts = vec![];
    let mut slowest = 0.0f64;
    for (deg, want) in ENTROPY_TARGETS {
        let start = Instant::now();
        let s = entropy_after(&InitialState::horizontal(0), &line(deg, 0.0), 20).unwrap();
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let ok = (s - want).abs() <= ENTROPY_TOL && secs < ENTROPY_RUNTIME_S;
        pass &= ok;
        parts.push(format!(
            "{deg}deg S={s:.6} want {want}±{ENTROPY_TOL} {}",
            mark(ok)
        ));
    }
    verdict(
        pass,
        format!("{}; slowest {:.2} ms", parts.join(", "), slowest * 1e3),
    )
}

fn criterion_2() -> Verdict {
    let init = InitialState::circular(0);
    let s45 = entropy_after(&init, &line(45.0, 0.0), 20).unwrap();
    let s1 = entropy_after(&init, &line(1.0, 0.0), 20).unwrap();
    let a = (s45 - CIRCULAR_TARGET).abs() <= ENTROPY_TOL;
    let b = s1 > SMALL_THETA_FLOOR;
    verdict(
        a && b,
        format!("45deg S={s45:.6} {}, 1deg S={s1:.6} {}", mark(a), mark(b)),
    )
}

fn criterion_3() -> Verdict {
    let mut pass = true;
    let mut parts = vec![];
    for (deg, want) in GROWTH_PEAKS {
        let v = polarization_averaged_growth(&line(deg, 0.1), 20)
            .unwrap()
            .argmax_velocity()
            .unwrap();
        let ok = v == want;
        pass &= ok;
        parts.push(format!("{deg}deg argmax v={v} {}", mark(ok)));
    }
    verdict(pass, parts.join(", "))
}

fn criterion_4() -> Verdict {
    let mut pass = true;
    let mut parts = vec![];
    for deg in [45.0, 57.0, 65.0] {
        let p = polarization_averaged_growth(&line(deg, 0.0), 20).unwrap();
        let asym = p.asymmetry();
        let v = p.argmax_velocity().unwrap();
        let sym_ok = asym <= SYMMETRY_TOL;
        let peak_ok = v == 0.0;
        pass &= sym_ok && peak_ok;
        parts.push(format!(
            "{deg}deg asym={asym:.1e} {} argmax v={v} {}",
            mark(sym_ok),
            mark(peak_ok)
        ));
    }
    verdict(pass, parts.join(", "))
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    // |λ(0)| per θ (rows) and γ (columns)
    let table: Vec<Vec<f64>> = LYAPUNOV_THETAS
        .iter()
        .map(|&deg| {
            LYAPUNOV_GAMMAS
                .iter()
                .map(|&g| lyapunov_exponent(&line(deg, g), LYAPUNOV_T).unwrap())
                .collect()
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let zero_ok = table.iter().all(|row| row[0].abs() <= LYAPUNOV_ZERO_TOL);
    let gamma_ok = table
        .iter()
        .all(|row| row.windows(2).all(|w| w[1].abs() > w[0].abs()));
    let last = LYAPUNOV_GAMMAS.len() - 1;
    let theta_ok = table
        .windows(2)
        .all(|w| w[1][last].abs() < w[0][last].abs());
    let runtime_ok = secs < LYAPUNOV_RUNTIME_S;
    let worst_zero = table.iter().map(|r| r[0].abs()).fold(0.0, f64::max);
    let at_01: Vec<String> = table.iter().map(|r| format!("{:.4}", r[last])).collect();
    verdict(
        zero_ok && gamma_ok && theta_ok && runtime_ok,
        format!(
            "max|λ(0)|@γ=0 {worst_zero:.4} {}, γ-monotone {}, θ-monotone {} (γ=0.1: {}), runtime {secs:.2} s {}",
            mark(zero_ok),
            mark(gamma_ok),
            mark(theta_ok),
            at_01.join("/"),
            mark(runtime_ok)
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut pass = true;
    let mut parts = vec![];
    let mut literal = vec![];
    for (deg, want) in DISTRIBUTION_PEAKS {
        let params = line(deg, 0.1);
        let x = launch_resolved_distribution(&params, 20)
            .unwrap()
            .argmax_total()
            .unwrap();
        let ok = x == want;
        pass &= ok;
        parts.push(format!("{deg}deg x={x} {}", mark(ok)));
        let from_h = walk::evolve(&InitialState::horizontal(0), &params, 20).unwrap();
        literal.push(
            probability_distribution(&from_h)
                .argmax_total()
                .unwrap()
                .to_string(),
        );
    }
    verdict(
        pass,
        format!(
            "{} (|0,H>-only total peaks: {})",
            parts.join(", "),
            literal.join("/")
        ),
    )
}

fn criterion_7() -> Verdict {
    let hermitian = line(45.0, 0.0);
    let pbc0 = pbc_spectrum(&hermitian, PBC_K_SAMPLES)
        .unwrap()
        .max_abs_imag();
    let chain0 = WalkParams {
        boundary: Boundary::Open(OBC_SITES),
        normalize_each_step: false,
        ..hermitian
    };
    let obc0 = obc_spectrum(&chain0, false).unwrap().max_abs_imag();
    let real_ok = pbc0 <= HERMITIAN_IM_TOL && obc0 <= HERMITIAN_IM_TOL;

    let lossy = line(45.0, 0.1);
    let pbc = pbc_spectrum(&lossy, PBC_K_SAMPLES).unwrap();
    let areas = spectral_loop_area(&pbc).unwrap();
    let area_ok = !areas.is_empty() && areas.iter().all(|a| *a > LOOP_AREA_THRESHOLD);
    let chain = WalkParams {
        boundary: Boundary::Open(OBC_SITES),
        normalize_each_step: false,
        ..lossy
    };
    let obc = obc_spectrum(&chain, false).unwrap();
    let (mut counted, mut wound) = (0usize, 0usize);
    for q in &obc.energies {
        if distance_to_curve(&pbc, q.e).unwrap() >= WINDING_EXCLUSION {
            counted += 1;
            wound += (point_gap_winding(&pbc, q.e).unwrap() != 0) as usize;
        }
    }
    let frac = if counted == 0 {
        0.0
    } else {
        wound as f64 / counted as f64
    };
    let wind_ok = counted > 0 && frac >= WINDING_FRACTION;
    let area_text: Vec<String> = areas.iter().map(|a| format!("{a:.6}")).collect();
    verdict(
        real_ok && area_ok && wind_ok,
        format!(
            "γ=0 max|Im E| pbc {pbc0:.1e} obc {obc0:.1e} {}, γ=0.1 loop area {} > {LOOP_AREA_THRESHOLD} {}, winding≠0 {wound}/{counted} {}",
            mark(real_ok),
            area_text.join("/"),
            mark(area_ok),
            mark(wind_ok)
        ),
    )
}

fn criterion_8() -> Verdict {
    let medians: Vec<f64> = [0.0, 0.05, 0.1]
        .iter()
        .map(|&g| {
            let p = WalkParams::new(FRAC_PI_4, g, Boundary::Open(OBC_SITES), false).unwrap();
            median_edge_mass(&obc_spectrum(&p, true).unwrap(), EDGE_FRACTION).unwrap()
        })
        .collect();
    let order_ok = medians[2] > medians[1] && medians[1] > medians[0];
    let ratio_ok = medians[2] >= SKIN_RATIO * medians[0];
    verdict(
        order_ok && ratio_ok,
        format!(
            "median edge mass γ=0/0.05/0.1: {:.4}/{:.4}/{:.4} ordered {}, ratio {:.2} >= {SKIN_RATIO} {}",
            medians[0],
            medians[1],
            medians[2],
            mark(order_ok),
            medians[2] / medians[0],
            mark(ratio_ok)
        ),
    )
}

/// Entropy and IPR of the normalized walk at every step up to `t`.
fn trajectory(deg: f64, gamma: f64, t: usize) -> Vec<(f64, f64)> {
    let mut out = vec![];
    walk::evolve_with(
        &InitialState::horizontal(0),
        &line(deg, gamma),
        t,
        |s: &WalkState| {
            out.push((entropy(&reduced_density(s)?)?, state_ipr(s)));
            Ok(())
        },
    )
    .unwrap();
    out
}

fn criterion_9() -> Verdict {
    let mut violations = vec![];
    let mut t50_ok = true;
    let mut ipr_ok = true;
    for deg in DYNAMICS_THETAS {
        let lossless = trajectory(deg, 0.0, 50);
        let lossy = trajectory(deg, 0.1, 50);
        for t in 2..=20 {
            if lossless[t].0 < lossy[t].0 {
                violations.push(format!(
                    "{deg}deg t={t} ({:.4} < {:.4})",
                    lossless[t].0, lossy[t].0
                ));
            }
        }
        let at50: Vec<f64> = DYNAMICS_GAMMAS
            .iter()
            .map(|&g| trajectory(deg, g, 50)[50].0)
            .collect();
        t50_ok &= at50.windows(2).all(|w| w[1] < w[0]);
        ipr_ok &= lossy[20].1 >= lossless[20].1;
    }
    let order_ok = violations.is_empty();
    let detail = if order_ok {
        "none".to_string()
    } else {
        violations.join(", ")
    };
    verdict(
        order_ok && t50_ok && ipr_ok,
        format!(
            "S(γ=0) >= S(γ=0.1) for t in 2..=20 {} (violations: {detail}), t=50 decreasing in γ {}, IPR(0.1) >= IPR(0) at t=20 {}",
            mark(order_ok),
            mark(t50_ok),
            mark(ipr_ok)
        ),
    )
}

fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn bloch_vs_dense() -> f64 {
    let n = 40;
    let params = WalkParams::new(FRAC_PI_4, 0.1, Boundary::Periodic(n), false).unwrap();
    let dense = eig_dense(&dense_walk_matrix(&params).unwrap())
        .unwrap()
        .values;
    let mut pool: Vec<Complex64> = pbc_spectrum(&params, n)
        .unwrap()
        .energies
        .iter()
        .map(|q| q.eigenvalue())
        .collect();
    let mut worst = 0.0f64;
    for l in dense {
        let (i, d) = pool
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (l - w).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(i);
    }
    worst
}

fn dense_vs_step() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = 2 * rng.random_range(2..12);
        let params = WalkParams::new(
            rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
            rng.random_range(0.0..1.0),
            Boundary::Periodic(n),
            false,
        )
        .unwrap();
        let amps: Vec<[Complex64; 2]> = (0..n)
            .map(|_| [rand_c(&mut rng), rand_c(&mut rng)])
            .collect();
        let flat: Vec<Complex64> = amps.iter().flatten().copied().collect();
        let next = walk::step(&WalkState::from_amplitudes(0, amps), &params).unwrap();
        let mv = dense_walk_matrix(&params).unwrap().mul_vec(&flat);
        for x in 0..n {
            worst = worst.max((mv[basis_index(x, H)] - next.amps[x][H]).norm());
            worst = worst.max((mv[basis_index(x, V)] - next.amps[x][V]).norm());
        }
    }
    worst
}

fn closed_form_vs_direct() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let w: f64 = rng.random_range(0.0..1.0);
        let mut rho = ReducedDensityMatrix {
            alpha: 0.0,
            beta: 0.0,
            chi: Complex64::new(0.0, 0.0),
        };
        for p in [w, 1.0 - w] {
            let (a, b) = (rand_c(&mut rng), rand_c(&mut rng));
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            rho.alpha += p * (a / n).norm_sqr();
            rho.beta += p * (b / n).norm_sqr();
            rho.chi += p * (a / n) * (b / n).conj();
        }
        let m = Matrix2::new(
            Complex::new(rho.alpha, 0.0),
            Complex::new(rho.chi.re, rho.chi.im),
            Complex::new(rho.chi.re, -rho.chi.im),
            Complex::new(rho.beta, 0.0),
        );
        let e = m.symmetric_eigenvalues();
        let direct = [e[0].max(e[1]), e[0].min(e[1])];
        let closed = rho.eigenvalues();
        worst = worst
            .max((closed[0] - direct[0]).abs())
            .max((closed[1] - direct[1]).abs());
    }
    worst
}

fn reconstruction_identity() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let sites = rng.random_range(1..20);
        let mut amps: Vec<[Complex64; 2]> = (0..sites)
            .map(|_| {
                [
                    Complex64::new(rng.random_range(-1.0..1.0), 0.0),
                    Complex64::new(rng.random_range(-1.0..1.0), 0.0),
                ]
            })
            .collect();
        let norm = amps
            .iter()
            .map(|[a, b]| a.norm_sqr() + b.norm_sqr())
            .sum::<f64>()
            .sqrt();
        amps.iter_mut()
            .for_each(|p| p.iter_mut().for_each(|z| *z /= norm));
        let state = WalkState::from_amplitudes(0, amps);
        let direct = reduced_density(&state).unwrap();
        let rec = reconstruct_from_distributions(
            &basis_distribution(&state, Basis::Z),
            &basis_distribution(&state, Basis::X),
            AmplitudeClass::Real,
        )
        .unwrap();
        worst = worst
            .max((rec.alpha - direct.alpha).abs())
            .max((rec.beta - direct.beta).abs())
            .max((rec.chi - direct.chi).norm());
    }
    worst
}

fn criterion_10() -> Verdict {
    let checks = [
        ("bloch/dense", bloch_vs_dense(), BLOCH_TOL),
        ("dense/step", dense_vs_step(), STEP_TOL),
        ("closed-form/2x2", closed_form_vs_direct(), CLOSED_FORM_TOL),
        (
            "reconstruction",
            reconstruction_identity(),
            RECONSTRUCTION_TOL,
        ),
    ];
    let pass = checks.iter().all(|(_, err, tol)| err <= tol);
    let parts: Vec<String> = checks
        .iter()
        .map(|(name, err, tol)| format!("{name} {err:.1e} <= {tol:.0e} {}", mark(err <= tol)))
        .collect();
    verdict(pass, parts.join(", "))
}

fn criterion_11() -> Verdict {
    let params = line(65.0, 0.0);
    let state = walk::evolve(&InitialState::horizontal(0), &params, 20).unwrap();
    let base = DetectionConfig::default();
    let cfg = DetectionConfig {
        shots: base.shots_for_detections(LAB_DETECTIONS, 20),
        ..base
    };
    let mut hits = 0usize;
    let mut errors = vec![];
    let mut detected = 0u64;
    for trial in 0..LAB_TRIALS {
        let z = simulate_counts(
            &state,
            &DetectionConfig {
                seed: 3 * trial,
                ..cfg
            },
            Basis::Z,
        )
        .unwrap();
        let x = simulate_counts(
            &state,
            &DetectionConfig {
                seed: 3 * trial + 1,
                ..cfg
            },
            Basis::X,
        )
        .unwrap();
        detected += z.total_detected;
        let s = entropy(&reconstruct_rho(&z, &x, AmplitudeClass::Real).unwrap()).unwrap();
        if (s - LAB_TARGET).abs() <= LAB_WINDOW {
            hits += 1;
        }
        errors.push(
            bootstrap_error(&z, &x, LAB_RESAMPLES, 3 * trial + 2)
                .unwrap()
                .stderr,
        );
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    let hits_ok = hits >= LAB_MIN_HITS;
    let err_ok = median >= BOOTSTRAP_RANGE.0 && median <= BOOTSTRAP_RANGE.1;
    verdict(
        hits_ok && err_ok,
        format!(
            "{hits}/{LAB_TRIALS} within ±{LAB_WINDOW} of {LAB_TARGET} {}, median bootstrap error {median:.2e} in [{}, {}] {} (mean detections/basis {:.0}, shots {})",
            mark(hits_ok),
            BOOTSTRAP_RANGE.0,
            BOOTSTRAP_RANGE.1,
            mark(err_ok),
            detected as f64 / LAB_TRIALS as f64,
            cfg.shots
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_12() -> Verdict {
    let scenarios = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let tmp = tempfile::tempdir().unwrap();
    let mut names: Vec<_> = fs::read_dir(&scenarios)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    let mut differing = vec![];
    for (i, path) in names.iter().enumerate() {
        let mut runs = vec![];
        for (run, threads) in [("a", "1"), ("b", "3")] {
            let dir = tmp.path().join(format!("{i}{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_nhqw"))
                .arg(path)
                .args(["--out", dir.to_str().unwrap(), "--threads", threads])
                .output()
                .unwrap()
                .status;
            runs.push(if status.success() {
                Some(snapshot(&dir))
            } else {
                None
            });
        }
        if runs[0].is_none() || runs[0] != runs[1] {
            differing.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} scenarios run twice (1 vs 3 threads), byte-identical {}{}",
            names.len(),
            mark(differing.is_empty()),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" (differ: {})", differing.join(", "))
            }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 12] = [
        ("entropy point values", criterion_1),
        ("complex initial state entropy", criterion_2),
        ("growth-rate peak locations", criterion_3),
        ("symmetric Hermitian growth profiles", criterion_4),
        ("Lyapunov asymptotics", criterion_5),
        ("distribution peaks", criterion_6),
        ("spectral dichotomy", criterion_7),
        ("skin localization", criterion_8),
        ("entanglement suppression dynamics", criterion_9),
        ("oracle equivalences", criterion_10),
        ("virtual-lab calibration", criterion_11),
        ("reproducibility", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
