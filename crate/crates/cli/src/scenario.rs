//! Scenario files: one TOML document describes one command.
//!
//! ```toml
//! command = "entropy-sweep"
//! seed = 7
//! output = "out/fig2a"
//!
//! [initial]
//! state = "H"
//!
//! [time]
//! steps = 20
//!
//! [sweep]
//! theta_deg = { start = 0, stop = 90, step = 1 }
//! gamma = { start = 0, stop = 0.1, step = 0.005 }
//! ```
//!
//! Angles are degrees in the file and radians everywhere past [`parse_scenario`].

use std::ops::Range;
use std::path::PathBuf;

use nhqw_core::virtual_lab::{
    DetectionConfig, DEFAULT_EFFICIENCY, DEFAULT_SURVIVAL, MIN_RESAMPLES,
};
use nhqw_core::walk::{Boundary, InitialState, WalkParams};
use nhqw_core::Complex64;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Spectrum,
    Lyapunov,
    Growth,
    EntropySweep,
    Dynamics,
    VirtualLab,
    Fidelity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Spectrum => "spectrum",
            Command::Lyapunov => "lyapunov",
            Command::Growth => "growth",
            Command::EntropySweep => "entropy-sweep",
            Command::Dynamics => "dynamics",
            Command::VirtualLab => "virtual-lab",
            Command::Fidelity => "fidelity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    #[default]
    Infinite,
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Spanned<i64>>,
    /// Renormalize after every step (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitialKind {
    #[default]
    H,
    V,
    #[serde(rename = "circular")]
    Circular,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<InitialKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Spanned<i64>>,
    /// `[re, im]`, custom states only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_h: Option<Spanned<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_v: Option<Spanned<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Spanned<i64>>,
    /// evolve: also emit every n-th intermediate distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<Spanned<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<Spanned<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_stop: Option<Spanned<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_step: Option<Spanned<i64>>,
}

/// Either an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<Spanned<GridSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Spanned<GridSpec>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_samples: Option<Spanned<i64>>,
    /// Open-chain length for the OBC part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Spanned<i64>>,
    /// Write `profiles.csv` with OBC eigenstate profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<bool>,
    /// Write `diagnostics.csv` (loop areas, windings, edge masses).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_fraction: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    /// Launched photons per basis. Exclusive with `detections`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<Spanned<i64>>,
    /// Expected detected photons per basis; converted to shots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_step_survival: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_efficiency: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resamples: Option<Spanned<i64>>,
}

/// θ × γ grid, θ-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub theta_deg: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.theta_deg.len() * self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.theta_deg
            .iter()
            .flat_map(|&th| self.gamma.iter().map(move |&g| (th, g)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub config: DetectionConfig,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Evolve {
        params: WalkParams,
        initial: InitialState,
        steps: usize,
        record_every: Option<usize>,
    },
    Spectrum {
        theta: f64,
        gamma: f64,
        k_samples: usize,
        sites: usize,
        states: bool,
        diagnostics: bool,
        edge_fraction: f64,
    },
    Lyapunov {
        grid: Grid,
        steps: usize,
    },
    Growth {
        params: WalkParams,
        steps: usize,
    },
    EntropySweep {
        grid: Grid,
        initial: InitialState,
        steps: usize,
    },
    Dynamics {
        params: WalkParams,
        initial: InitialState,
        times: Vec<usize>,
    },
    VirtualLab {
        params: WalkParams,
        initial: InitialState,
        steps: usize,
        detection: Detection,
    },
    Fidelity {
        params: WalkParams,
        initial: InitialState,
        steps: usize,
        detection: Detection,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub command: Command,
    pub seed: u64,
    pub output: PathBuf,
    pub job: Job,
    /// The document as parsed, for echoing next to the results.
    pub file: ScenarioFile,
}

pub const DEFAULT_OUTPUT: &str = "out";
pub const DEFAULT_K_SAMPLES: usize = 1024;
pub const DEFAULT_OBC_SITES: usize = 50;
pub const DEFAULT_EDGE_FRACTION: f64 = 0.1;
pub const DEFAULT_RESAMPLES: usize = 200;

impl Scenario {
    /// Canonical TOML text; parsing it back yields an equal scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("scenario documents are plain tables")
    }

    /// Copy written next to the results. Leaves out `output`, so the same
    /// run produces the same bytes wherever it is written.
    pub fn echo_toml(&self) -> String {
        let file = ScenarioFile {
            output: None,
            ..self.file.clone()
        };
        toml::to_string(&file).expect("scenario documents are plain tables")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.file.seed = Some(seed);
        self
    }

    pub fn with_output(mut self, output: PathBuf) -> Self {
        self.file.output = Some(output.to_string_lossy().into_owned());
        self.output = output;
        self
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, col)
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn at(&self, span: Range<usize>) -> String {
        let (l, c) = line_col(self.text, span.start);
        format!("line {l}, column {c}")
    }

    fn invalid<T>(
        &self,
        key: &str,
        span: Range<usize>,
        reason: impl std::fmt::Display,
    ) -> Result<T, CliError> {
        Err(CliError::Config(format!(
            "{key}: {reason} ({})",
            self.at(span)
        )))
    }

    fn float_in(&self, key: &str, v: &Spanned<f64>, lo: f64, hi: f64) -> Result<f64, CliError> {
        let x = *v.get_ref();
        if !x.is_finite() || x < lo || x > hi {
            return self.invalid(key, v.span(), format!("{x} out of range [{lo}, {hi}]"));
        }
        Ok(x)
    }

    fn int_at_least(&self, key: &str, v: &Spanned<i64>, lo: i64) -> Result<usize, CliError> {
        let x = *v.get_ref();
        if x < lo {
            return self.invalid(key, v.span(), format!("{x} must be >= {lo}"));
        }
        Ok(x as usize)
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("{key}: required for this command"))
}

fn require<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| missing(key))
}

/// Rejects sections the command would silently ignore.
fn forbid(present: bool, section: &str, command: Command) -> Result<(), CliError> {
    if present {
        return Err(CliError::Config(format!(
            "[{section}]: not used by command {}",
            command.name()
        )));
    }
    Ok(())
}

const MAX_GRID_POINTS: usize = 1_000_000;

fn expand_grid(
    ctx: &Ctx,
    key: &str,
    spec: &Spanned<GridSpec>,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, CliError> {
    let span = spec.span();
    let g = spec.get_ref();
    let values = match (&g.values, g.start, g.stop, g.step) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(start), Some(stop), Some(step)) => {
            if ![start, stop, step].iter().all(|v| v.is_finite()) || step <= 0.0 || stop < start {
                return ctx.invalid(key, span, "need step > 0 and stop >= start");
            }
            let n = ((stop - start) / step).round();
            if n > MAX_GRID_POINTS as f64 {
                return ctx.invalid(key, span, format!("more than {MAX_GRID_POINTS} points"));
            }
            let n = n as usize;
            if (start + n as f64 * step - stop).abs() > 1e-9 * step.max(stop.abs()) {
                return ctx.invalid(key, span, "stop is not start + n*step");
            }
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        _ => {
            return ctx.invalid(
                key,
                span,
                "give either `values` or all of `start`, `stop`, `step`",
            )
        }
    };
    if values.is_empty() {
        return ctx.invalid(key, span, "grid is empty");
    }
    if let Some(bad) = values
        .iter()
        .find(|x| !x.is_finite() || **x < lo || **x > hi)
    {
        return ctx.invalid(key, span, format!("{bad} out of range [{lo}, {hi}]"));
    }
    Ok(values)
}

fn initial_state(
    ctx: &Ctx,
    sec: Option<&InitialSection>,
    boundary: Boundary,
) -> Result<InitialState, CliError> {
    let default = InitialSection::default();
    let sec = sec.unwrap_or(&default);
    let position = match (&sec.position, boundary.sites()) {
        (Some(p), Some(n)) => {
            let x = *p.get_ref();
            if x < 0 || x >= n as i64 {
                return ctx.invalid(
                    "initial.position",
                    p.span(),
                    format!("{x} outside lattice 0..{n}"),
                );
            }
            x
        }
        (Some(p), None) => *p.get_ref(),
        (None, Some(n)) => (n / 2) as i64,
        (None, None) => 0,
    };
    let kind = sec.state.unwrap_or_default();
    if kind != InitialKind::Custom && (sec.a_h.is_some() || sec.b_v.is_some()) {
        return Err(CliError::Config(
            "initial.a_h/b_v: only allowed with state = \"custom\"".into(),
        ));
    }
    Ok(match kind {
        InitialKind::H => InitialState::horizontal(position),
        InitialKind::V => InitialState::vertical(position),
        InitialKind::Circular => InitialState::circular(position),
        InitialKind::Custom => {
            let a = require(sec.a_h.as_ref(), "initial.a_h")?;
            let b = require(sec.b_v.as_ref(), "initial.b_v")?;
            let [ar, ai] = *a.get_ref();
            let [br, bi] = *b.get_ref();
            match InitialState::new(position, Complex64::new(ar, ai), Complex64::new(br, bi)) {
                Ok(s) => s,
                Err(e) => return ctx.invalid("initial.a_h", a.span(), e),
            }
        }
    })
}

fn walk_params(ctx: &Ctx, sec: Option<&WalkSection>) -> Result<WalkParams, CliError> {
    let sec = require(sec, "[walk]")?;
    let theta = ctx.float_in(
        "walk.theta_deg",
        require(sec.theta_deg.as_ref(), "walk.theta_deg")?,
        0.0,
        90.0,
    )?;
    let gamma = ctx.float_in(
        "walk.gamma",
        require(sec.gamma.as_ref(), "walk.gamma")?,
        0.0,
        f64::MAX,
    )?;
    let boundary = match (sec.boundary.unwrap_or_default(), &sec.sites) {
        (BoundaryKind::Infinite, None) => Boundary::Infinite,
        (BoundaryKind::Infinite, Some(s)) => {
            return ctx.invalid("walk.sites", s.span(), "not used on the infinite line")
        }
        (BoundaryKind::Open, Some(s)) => Boundary::Open(ctx.int_at_least("walk.sites", s, 2)?),
        (BoundaryKind::Periodic, Some(s)) => {
            let n = ctx.int_at_least("walk.sites", s, 2)?;
            if n % 2 == 1 {
                return ctx.invalid(
                    "walk.sites",
                    s.span(),
                    format!("{n} must be even on a ring"),
                );
            }
            Boundary::Periodic(n)
        }
        (_, None) => return Err(missing("walk.sites")),
    };
    WalkParams::new(
        theta.to_radians(),
        gamma,
        boundary,
        sec.normalize.unwrap_or(true),
    )
    .map_err(CliError::from)
}

/// Like [`walk_params`] but only the infinite line is accepted.
fn line_params(ctx: &Ctx, sec: Option<&WalkSection>) -> Result<WalkParams, CliError> {
    let p = walk_params(ctx, sec)?;
    if p.boundary != Boundary::Infinite {
        return Err(CliError::Config(
            "walk.boundary: this command needs the infinite line".into(),
        ));
    }
    Ok(p)
}

fn steps(ctx: &Ctx, sec: Option<&TimeSection>, min: i64) -> Result<usize, CliError> {
    let sec = require(sec, "[time]")?;
    ctx.int_at_least(
        "time.steps",
        require(sec.steps.as_ref(), "time.steps")?,
        min,
    )
}

fn sweep_grid(ctx: &Ctx, sec: Option<&SweepSection>) -> Result<Grid, CliError> {
    let sec = require(sec, "[sweep]")?;
    let theta = require(sec.theta_deg.as_ref(), "sweep.theta_deg")?;
    let gamma = require(sec.gamma.as_ref(), "sweep.gamma")?;
    Ok(Grid {
        theta_deg: expand_grid(ctx, "sweep.theta_deg", theta, 0.0, 90.0)?,
        gamma: expand_grid(ctx, "sweep.gamma", gamma, 0.0, f64::MAX)?,
    })
}

fn detection(
    ctx: &Ctx,
    sec: Option<&DetectionSection>,
    steps: usize,
) -> Result<Detection, CliError> {
    let default = DetectionSection::default();
    let sec = sec.unwrap_or(&default);
    let survival = match &sec.per_step_survival {
        Some(v) => ctx.float_in("detection.per_step_survival", v, 0.0, 1.0)?,
        None => DEFAULT_SURVIVAL,
    };
    let efficiency = match &sec.detection_efficiency {
        Some(v) => ctx.float_in("detection.detection_efficiency", v, 0.0, 1.0)?,
        None => DEFAULT_EFFICIENCY,
    };
    let mut config = DetectionConfig {
        per_step_survival: survival,
        detection_efficiency: efficiency,
        ..DetectionConfig::default()
    };
    config.shots = match (&sec.shots, &sec.detections) {
        (Some(_), Some(d)) => {
            return ctx.invalid(
                "detection.detections",
                d.span(),
                "give shots or detections, not both",
            )
        }
        (Some(s), None) => ctx.int_at_least("detection.shots", s, 1)? as u64,
        (None, Some(d)) => {
            let want = ctx.float_in("detection.detections", d, 1.0, 1e15)?;
            let p = config.detection_probability(steps);
            if p <= 0.0 || want / p > u64::MAX as f64 / 2.0 {
                return ctx.invalid(
                    "detection.detections",
                    d.span(),
                    "unreachable with this loss model",
                );
            }
            config.shots_for_detections(want, steps)
        }
        (None, None) => config.shots,
    };
    let resamples = match &sec.resamples {
        Some(r) => ctx.int_at_least("detection.resamples", r, MIN_RESAMPLES as i64)?,
        None => DEFAULT_RESAMPLES,
    };
    Ok(Detection { config, resamples })
}

fn real_initial(ctx: &Ctx, f: &ScenarioFile, boundary: Boundary) -> Result<InitialState, CliError> {
    let init = initial_state(ctx, f.initial.as_ref(), boundary)?;
    if !init.has_real_amplitudes() {
        return Err(CliError::Config(
            "initial.state: reconstruction needs real amplitudes (H, V or a real custom state)"
                .into(),
        ));
    }
    Ok(init)
}

fn build_job(ctx: &Ctx, f: &ScenarioFile) -> Result<Job, CliError> {
    use Command::*;
    let has = (
        f.walk.is_some(),
        f.initial.is_some(),
        f.time.is_some(),
        f.sweep.is_some(),
        f.spectrum.is_some(),
        f.detection.is_some(),
    );
    let c = f.command;
    if !matches!(c, VirtualLab | Fidelity) {
        forbid(has.5, "detection", c)?;
    }
    if c != Spectrum {
        forbid(has.4, "spectrum", c)?;
    }
    if !matches!(c, Lyapunov | EntropySweep) {
        forbid(has.3, "sweep", c)?;
    }
    let time = f.time.as_ref();
    if c != Evolve && time.is_some_and(|t| t.record_every.is_some()) {
        return Err(CliError::Config(
            "time.record_every: only used by evolve".into(),
        ));
    }
    if c != Dynamics
        && time.is_some_and(|t| t.t_start.is_some() || t.t_stop.is_some() || t.t_step.is_some())
    {
        return Err(CliError::Config(
            "time.t_start/t_stop/t_step: only used by dynamics".into(),
        ));
    }
    match c {
        Evolve => {
            let params = walk_params(ctx, f.walk.as_ref())?;
            let initial = initial_state(ctx, f.initial.as_ref(), params.boundary)?;
            let steps = steps(ctx, time, 0)?;
            let record_every = match time.and_then(|t| t.record_every.as_ref()) {
                Some(r) => Some(ctx.int_at_least("time.record_every", r, 1)?),
                None => None,
            };
            Ok(Job::Evolve {
                params,
                initial,
                steps,
                record_every,
            })
        }
        Spectrum => {
            forbid(has.1, "initial", c)?;
            forbid(has.2, "time", c)?;
            let w = require(f.walk.as_ref(), "[walk]")?;
            if w.boundary.is_some() || w.sites.is_some() || w.normalize.is_some() {
                return Err(CliError::Config(
                    "walk: spectrum takes only theta_deg and gamma; set the chain length in [spectrum]".into(),
                ));
            }
            let theta = ctx.float_in(
                "walk.theta_deg",
                require(w.theta_deg.as_ref(), "walk.theta_deg")?,
                0.0,
                90.0,
            )?;
            let gamma = ctx.float_in(
                "walk.gamma",
                require(w.gamma.as_ref(), "walk.gamma")?,
                0.0,
                f64::MAX,
            )?;
            let default = SpectrumSection::default();
            let s = f.spectrum.as_ref().unwrap_or(&default);
            let k_samples = match &s.k_samples {
                Some(k) => ctx.int_at_least("spectrum.k_samples", k, 16)?,
                None => DEFAULT_K_SAMPLES,
            };
            let sites = match &s.sites {
                Some(n) => {
                    let n_sites = ctx.int_at_least("spectrum.sites", n, 2)?;
                    if n_sites > nhqw_core::spectral::OBC_MAX_SITES {
                        return ctx.invalid(
                            "spectrum.sites",
                            n.span(),
                            format!("{n_sites} > {}", nhqw_core::spectral::OBC_MAX_SITES),
                        );
                    }
                    n_sites
                }
                None => DEFAULT_OBC_SITES,
            };
            let edge_fraction = match &s.edge_fraction {
                Some(v) => ctx.float_in("spectrum.edge_fraction", v, 1e-9, 0.5)?,
                None => DEFAULT_EDGE_FRACTION,
            };
            Ok(Job::Spectrum {
                theta: theta.to_radians(),
                gamma,
                k_samples,
                sites,
                states: s.states.unwrap_or(false),
                diagnostics: s.diagnostics.unwrap_or(true),
                edge_fraction,
            })
        }
        Lyapunov => {
            forbid(has.0, "walk", c)?;
            forbid(has.1, "initial", c)?;
            let n = steps(ctx, time, 2)?;
            if n % 2 == 1 {
                let span = time
                    .and_then(|t| t.steps.as_ref())
                    .map(|s| s.span())
                    .unwrap_or(0..0);
                return ctx.invalid(
                    "time.steps",
                    span,
                    format!("{n} is odd; x = 0 is only reached at even t"),
                );
            }
            Ok(Job::Lyapunov {
                grid: sweep_grid(ctx, f.sweep.as_ref())?,
                steps: n,
            })
        }
        Growth => {
            forbid(has.1, "initial", c)?;
            Ok(Job::Growth {
                params: line_params(ctx, f.walk.as_ref())?,
                steps: steps(ctx, time, 2)?,
            })
        }
        EntropySweep => {
            forbid(has.0, "walk", c)?;
            Ok(Job::EntropySweep {
                grid: sweep_grid(ctx, f.sweep.as_ref())?,
                initial: initial_state(ctx, f.initial.as_ref(), Boundary::Infinite)?,
                steps: steps(ctx, time, 0)?,
            })
        }
        Dynamics => {
            let params = walk_params(ctx, f.walk.as_ref())?;
            let initial = initial_state(ctx, f.initial.as_ref(), params.boundary)?;
            let t = require(time, "[time]")?;
            if t.steps.is_some() {
                return Err(CliError::Config(
                    "time.steps: dynamics uses t_start, t_stop, t_step".into(),
                ));
            }
            let start = match &t.t_start {
                Some(v) => ctx.int_at_least("time.t_start", v, 0)?,
                None => 0,
            };
            let stop_v = require(t.t_stop.as_ref(), "time.t_stop")?;
            let stop = ctx.int_at_least("time.t_stop", stop_v, start as i64)?;
            let step = match &t.t_step {
                Some(v) => ctx.int_at_least("time.t_step", v, 1)?,
                None => 1,
            };
            let times = (start..=stop).step_by(step).collect();
            Ok(Job::Dynamics {
                params,
                initial,
                times,
            })
        }
        VirtualLab | Fidelity => {
            let params = walk_params(ctx, f.walk.as_ref())?;
            let initial = if c == VirtualLab {
                real_initial(ctx, f, params.boundary)?
            } else {
                initial_state(ctx, f.initial.as_ref(), params.boundary)?
            };
            let steps = steps(ctx, time, 0)?;
            let detection = detection(ctx, f.detection.as_ref(), steps)?;
            Ok(if c == VirtualLab {
                Job::VirtualLab {
                    params,
                    initial,
                    steps,
                    detection,
                }
            } else {
                Job::Fidelity {
                    params,
                    initial,
                    steps,
                    detection,
                }
            })
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span() {
            Some(span) => {
                let (l, c) = line_col(text, span.start);
                CliError::Config(format!("{msg} (line {l}, column {c})"))
            }
            None => CliError::Config(msg),
        }
    })?;
    let ctx = Ctx { text };
    let job = build_job(&ctx, &file)?;
    Ok(Scenario {
        command: file.command,
        seed: file.seed.unwrap_or(0),
        output: PathBuf::from(file.output.as_deref().unwrap_or(DEFAULT_OUTPUT)),
        job,
        file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn grid_arithmetic() {
        let text = "command = \"lyapunov\"\n[time]\nsteps = 4\n[sweep]\ntheta_deg = { values = [30, 45] }\ngamma = { start = 0, stop = 0.1, step = 0.025 }\n";
        let s = parse_scenario(text).unwrap();
        let Job::Lyapunov { grid, .. } = s.job else {
            panic!()
        };
        assert_eq!(grid.theta_deg, vec![30.0, 45.0]);
        assert_eq!(grid.gamma.len(), 5);
        assert_eq!(grid.points()[1], (30.0, 0.025));
    }

    #[test]
    fn ragged_range_rejected() {
        let text = "command = \"lyapunov\"\n[time]\nsteps = 4\n[sweep]\ntheta_deg = { start = 0, stop = 1, step = 0.3 }\ngamma = { values = [0] }\n";
        let e = parse_scenario(text).unwrap_err().to_string();
        assert!(e.contains("sweep.theta_deg") && e.contains("line 5"), "{e}");
    }
}
