//! Turnkey drivers: soil-column collapse runs and sweeps, and the slope
//! safety-factor search by strength reduction.

use log::{info, warn};

use crate::analysis::{
    classify_curve, clumping_metric, runout_width, shear_band_count, strength_reduce, CurveClass, DisplacementCurve,
    UNSTABLE_FRACTION,
};
use crate::error::{Error, Result};
use crate::geometry::{boundary_layers, build_block, build_collapse, build_slope, SlopeGeometry, Walls};
use crate::integrator::{geostatic_initialize, GeostaticOptions, GeostaticReport, Method, Numerics, Simulation, StepInfo};
use crate::material::MaterialParams;
use crate::scalar::{lit, to_f64, Real};

/// Hook called by the drivers while a run advances.
pub trait Observer<T> {
    /// After every completed step.
    fn step(&mut self, sim: &Simulation<T>, info: &StepInfo<T>) -> Result<()>;

    /// Once, with the final state, whether or not the run completed.
    fn finish(&mut self, _sim: &Simulation<T>, _outcome: &Outcome<T>) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct Quiet;

impl<T> Observer<T> for Quiet {
    fn step(&mut self, _: &Simulation<T>, _: &StepInfo<T>) -> Result<()> {
        Ok(())
    }
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome<T> {
    Completed,
    NegativeJacobian { time: T, message: String },
    Aborted { time: T, message: String },
}

impl<T: Real> Outcome<T> {
    pub fn completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }

    pub fn label(&self) -> String {
        match self {
            Outcome::Completed => "completed".into(),
            Outcome::NegativeJacobian { time, .. } => format!("negative-jacobian@{:.4}", to_f64(*time)),
            Outcome::Aborted { time, .. } => format!("aborted@{:.4}", to_f64(*time)),
        }
    }

    fn from_error(err: &Error, time: T) -> Self {
        if err.is_negative_jacobian() {
            Outcome::NegativeJacobian {
                time,
                message: err.to_string(),
            }
        } else {
            Outcome::Aborted {
                time,
                message: err.to_string(),
            }
        }
    }
}

/// Soil column against a left wall on a floor extended by `runout`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseSetup<T> {
    pub width: T,
    pub height: T,
    pub runout: T,
    pub dp: T,
    pub t_end: T,
    /// Simulated time between clumping-metric samples (s).
    pub metric_interval: T,
}

/// Scalars reported for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary<T> {
    pub outcome: Outcome<T>,
    pub time: T,
    pub steps: usize,
    pub updates: usize,
    pub max_displacement: T,
    pub runout_width: T,
    pub shear_bands: usize,
    /// Smallest clumping metric seen over the run.
    pub clumping_min: Option<T>,
    pub tension_cutoffs: usize,
}

fn record_clumping<T: Real>(sim: &Simulation<T>, worst: &mut Option<T>) {
    if let Some(m) = clumping_metric(&sim.system, &sim.kernel) {
        *worst = Some(worst.map_or(m, |w: T| w.min(m)));
    }
}

/// Steps `sim` for `steps` steps, sampling the clumping metric every
/// `every` steps. Solver failures end up in the outcome.
fn drive<T: Real>(
    sim: &mut Simulation<T>,
    steps: usize,
    every: usize,
    observer: &mut dyn Observer<T>,
) -> Result<RunSummary<T>> {
    let mut clumping = None;
    record_clumping(sim, &mut clumping);
    let mut outcome = Outcome::Completed;
    for n in 1..=steps {
        match sim.step() {
            Ok(info) => {
                observer.step(sim, &info)?;
                if n % every == 0 {
                    record_clumping(sim, &mut clumping);
                }
            }
            Err(e) => {
                warn!("run stopped: {e}");
                outcome = Outcome::from_error(&e, sim.time);
                break;
            }
        }
    }
    observer.finish(sim, &outcome)?;
    Ok(RunSummary {
        outcome,
        time: sim.time,
        steps: sim.steps,
        updates: sim.diagnostics.updates,
        max_displacement: sim.system.max_displacement(),
        runout_width: runout_width(&sim.system),
        shear_bands: shear_band_count(&sim.system, 0.8),
        clumping_min: clumping,
        tension_cutoffs: sim.diagnostics.tension_cutoffs,
    })
}

fn step_count<T: Real>(span: T, dt: T) -> usize {
    (to_f64(span / dt) - 1e-9).ceil().max(0.0) as usize
}

/// Builds the collapse system and simulation without running it.
pub fn collapse_simulation<T: Real>(
    setup: &CollapseSetup<T>,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
) -> Result<Simulation<T>> {
    let sys = build_collapse(setup.width, setup.height, setup.runout, setup.dp, numerics.h, material.rho0)?;
    Simulation::new(sys, *material, *numerics)
}

/// Releases the column under gravity and runs to `t_end`.
pub fn run_collapse<T: Real>(
    setup: &CollapseSetup<T>,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
    observer: &mut dyn Observer<T>,
) -> Result<RunSummary<T>> {
    let mut sim = collapse_simulation(setup, material, numerics)?;
    info!(
        "collapse: {} particles, {} {}",
        sim.system.len(),
        numerics.method.name(),
        match numerics.method {
            Method::Cesph => format!("gamma = {}", to_f64(numerics.gamma)),
            Method::Tlsph => match numerics.k_update {
                Some(k) => format!("k = {}", to_f64(k)),
                None => "no configuration update".into(),
            },
        }
    );
    let steps = step_count(setup.t_end, numerics.dt);
    let every = step_count(setup.metric_interval, numerics.dt).max(1);
    drive(&mut sim, steps, every, observer)
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    K,
    SafetyFactor,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::K => "k",
            SweepParam::SafetyFactor => "fs",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(SweepParam::Gamma),
            "k" => Ok(SweepParam::K),
            "fs" => Ok(SweepParam::SafetyFactor),
            other => Err(Error::config("param", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// One sweep value; `None` switches the feature off (`k`: no update).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepValue<T>(pub Option<T>);

impl<T: Real> SweepValue<T> {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "none" | "off") {
            return Ok(SweepValue(None));
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::config("values", format!("`{s}` is not a number")))?;
        Ok(SweepValue(Some(lit(v))))
    }

    pub fn label(&self) -> String {
        match self.0 {
            Some(v) => format!("{}", to_f64(v)),
            None => "none".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint<T> {
    pub value: SweepValue<T>,
    pub summary: RunSummary<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport<T> {
    pub parameter: SweepParam,
    pub points: Vec<SweepPoint<T>>,
}

/// Applies a collapse sweep value to the numerics.
pub fn apply_sweep_value<T: Real>(numerics: &Numerics<T>, param: SweepParam, value: SweepValue<T>) -> Result<Numerics<T>> {
    let mut n = *numerics;
    match param {
        SweepParam::Gamma => n.gamma = value.0.unwrap_or_else(T::zero),
        SweepParam::K => n.k_update = value.0,
        SweepParam::SafetyFactor => {
            return Err(Error::config("param", "fs sweeps need a slope scenario"));
        }
    }
    n.validate()?;
    Ok(n)
}

/// Runs the collapse once per value. `observer_for` supplies a fresh
/// observer per run.
pub fn collapse_sweep<T: Real>(
    setup: &CollapseSetup<T>,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
    param: SweepParam,
    values: &[SweepValue<T>],
    mut observer_for: impl FnMut(SweepValue<T>) -> Result<Box<dyn Observer<T>>>,
) -> Result<SweepReport<T>> {
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let n = apply_sweep_value(numerics, param, value)?;
        let mut obs = observer_for(value)?;
        let summary = run_collapse(setup, material, &n, obs.as_mut())?;
        info!("{} = {}: {}", param.name(), value.label(), summary.outcome.label());
        points.push(SweepPoint { value, summary });
    }
    Ok(SweepReport { parameter: param, points })
}

/// Slope with the strength-reduction schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeSetup<T> {
    pub geometry: SlopeGeometry<T>,
    pub dp: T,
    /// Simulated time per reduction factor (s).
    pub t_trial: T,
    /// Time between displacement samples (s).
    pub sample_interval: T,
    pub fs_start: T,
    pub fs_step: T,
    /// Largest factor tried before reporting no failure.
    pub fs_max: T,
    pub geostatic: GeostaticOptions<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial<T> {
    pub factor: T,
    pub curve: DisplacementCurve<T>,
    pub class: CurveClass,
    pub outcome: Outcome<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepStatus {
    /// A first unstable factor was found and the next factor confirmed it.
    Found,
    /// Every factor up to the limit was stable or indeterminate.
    NoFailure,
    /// A stable trial followed the first unstable one.
    NonMonotone,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafetyReport<T> {
    pub geostatic: GeostaticReport<T>,
    pub trials: Vec<Trial<T>>,
    /// Smallest factor classified unstable.
    pub factor: Option<T>,
    pub status: SweepStatus,
}

/// Runs one reduced-strength trial from the equilibrium state `base`.
pub fn run_trial<T: Real>(
    base: &Simulation<T>,
    setup: &SlopeSetup<T>,
    factor: T,
    observer: &mut dyn Observer<T>,
) -> Result<Trial<T>> {
    let mut sim = base.clone();
    sim.restore_keep_stress();
    sim.set_material(strength_reduce(&base.material, factor)?);
    let height = setup.geometry.height;
    let limit = height * lit(UNSTABLE_FRACTION);
    let steps = step_count(setup.t_trial, sim.numerics.dt);
    let every = step_count(setup.sample_interval, sim.numerics.dt).max(1);
    let mut curve = DisplacementCurve::new();
    let mut outcome = Outcome::Completed;
    for n in 1..=steps {
        match sim.step() {
            Ok(info) => observer.step(&sim, &info)?,
            Err(e) => {
                outcome = Outcome::from_error(&e, sim.time);
                break;
            }
        }
        if n % every == 0 {
            let d = sim.system.max_displacement();
            curve.push(sim.time, d)?;
            if d >= limit {
                break;
            }
        }
    }
    observer.finish(&sim, &outcome)?;
    let reached = curve.final_displacement().is_some_and(|d| d >= limit);
    let class = if !outcome.completed() || reached {
        CurveClass::Unstable
    } else {
        classify_curve(&curve, height)?
    };
    info!(
        "f_s = {:.2}: {} (max displacement {:.4e} m)",
        to_f64(factor),
        class.name(),
        to_f64(curve.final_displacement().unwrap_or_else(T::zero))
    );
    Ok(Trial {
        factor,
        curve,
        class,
        outcome,
    })
}

/// Builds the slope and relaxes it to geostatic equilibrium with the
/// unreduced material.
pub fn slope_equilibrium<T: Real>(
    setup: &SlopeSetup<T>,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
) -> Result<(Simulation<T>, GeostaticReport<T>)> {
    let sys = build_slope(&setup.geometry, setup.dp, numerics.h, material.rho0)?;
    let mut sim = Simulation::new(sys, *material, *numerics)?;
    info!("slope: {} particles, {}", sim.system.len(), numerics.method.name());
    let report = geostatic_initialize(&mut sim, &setup.geostatic)?;
    Ok((sim, report))
}

/// Factors `fs_start, fs_start + fs_step, …` up to `fs_max`.
pub fn factor_schedule<T: Real>(setup: &SlopeSetup<T>) -> Vec<T> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let f = setup.fs_start + setup.fs_step * T::from_usize(k).unwrap();
        if f > setup.fs_max + setup.fs_step * lit(1e-6) {
            break;
        }
        // round to the step grid so 1.0 + 8·0.1 prints as 1.8
        out.push(lit((to_f64(f) * 1e9).round() / 1e9));
        k += 1;
    }
    out
}

/// Strength-reduction search: geostatic equilibrium once, then one trial per
/// scheduled factor until the first unstable one and one more to confirm it.
pub fn safety_factor_sweep<T: Real>(
    setup: &SlopeSetup<T>,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
    observer_for: impl FnMut(T) -> Result<Box<dyn Observer<T>>>,
) -> Result<SafetyReport<T>> {
    if !(setup.fs_start >= T::one()) || !(setup.fs_step > T::zero()) {
        return Err(Error::config("scenario.fs_start", "need fs_start >= 1 and fs_step > 0"));
    }
    strength_reduction_trials(setup, material, numerics, &factor_schedule(setup), true, observer_for)
}

/// Trials at the given factors, all started from one geostatic state. With
/// `stop_early` the run ends one factor after the first unstable one.
pub fn strength_reduction_trials<T: Real>(
    setup: &SlopeSetup<T>,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
    factors: &[T],
    stop_early: bool,
    mut observer_for: impl FnMut(T) -> Result<Box<dyn Observer<T>>>,
) -> Result<SafetyReport<T>> {
    let (base, geostatic) = slope_equilibrium(setup, material, numerics)?;
    let mut trials: Vec<Trial<T>> = Vec::new();
    let mut first: Option<T> = None;
    let mut status = SweepStatus::NoFailure;
    for &factor in factors {
        let mut obs = observer_for(factor)?;
        let trial = run_trial(&base, setup, factor, obs.as_mut())?;
        let class = trial.class;
        trials.push(trial);
        match (first, class) {
            (None, CurveClass::Unstable) => {
                first = Some(factor);
                status = SweepStatus::Found;
            }
            (Some(_), CurveClass::Unstable) => {
                if stop_early {
                    break;
                }
            }
            (Some(_), _) => {
                status = SweepStatus::NonMonotone;
                if stop_early {
                    break;
                }
            }
            (None, _) => {}
        }
    }
    match status {
        SweepStatus::NoFailure => info!(
            "no failure found up to f_s = {}",
            factors.last().map(|f| to_f64(*f)).unwrap_or(f64::NAN)
        ),
        SweepStatus::NonMonotone => warn!("stable trial above the first unstable factor"),
        SweepStatus::Found => info!("safety factor {}", to_f64(first.unwrap())),
    }
    Ok(SafetyReport {
        geostatic,
        trials,
        factor: first,
        status,
    })
}

/// Block in a container, released from a stress-free state under gravity.
pub fn block_simulation<T: Real>(
    width: T,
    height: T,
    dp: T,
    material: &MaterialParams<T>,
    numerics: &Numerics<T>,
) -> Result<Simulation<T>> {
    let walls = Walls::container(boundary_layers(numerics.h, dp));
    let sys = build_block(width, height, dp, material.rho0, &walls)?;
    Simulation::new(sys, *material, *numerics)
}

/// Runs `sim` for `span` seconds of simulated time.
pub fn run_for<T: Real>(sim: &mut Simulation<T>, span: T, metric_interval: T, observer: &mut dyn Observer<T>) -> Result<RunSummary<T>> {
    let steps = step_count(span, sim.numerics.dt);
    let every = step_count(metric_interval, sim.numerics.dt).max(1);
    drive(sim, steps, every, observer)
}
