//! Run configuration: TOML with `[material]`, `[numerics]`, `[scenario]`
//! and `[output]` sections.
//!
//! Every key missing from the file is filled with its default and the
//! default is logged. [`RunConfig::to_toml`] writes the effective
//! configuration, which loads back to the same value.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::SlopeGeometry;
use crate::integrator::{GeostaticOptions, Method, Numerics};
use crate::material::{derive_material, MaterialParams};
use crate::scenarios::{CollapseSetup, SlopeSetup};
use crate::tensor::Vec2;
use crate::tlsph::Pk1Form;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    rho0: Option<f64>,
    youngs_modulus: Option<f64>,
    poisson_ratio: Option<f64>,
    cohesion: Option<f64>,
    /// Degrees.
    friction_angle: Option<f64>,
    /// Degrees.
    dilatancy_angle: Option<f64>,
    plastic: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    method: Option<String>,
    dt: Option<f64>,
    dp: Option<f64>,
    h: Option<f64>,
    t_end: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    gamma: Option<f64>,
    alpha_hg: Option<f64>,
    configuration_update: Option<bool>,
    k_update: Option<f64>,
    gradient_correction: Option<bool>,
    pk1_form: Option<String>,
    gravity: Option<[f64; 2]>,
    damping: Option<f64>,
    seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<String>,
    width: Option<f64>,
    height: Option<f64>,
    runout: Option<f64>,
    metric_interval: Option<f64>,
    /// Degrees.
    slope_angle: Option<f64>,
    foundation: Option<f64>,
    crest_length: Option<f64>,
    toe_length: Option<f64>,
    t_trial: Option<f64>,
    sample_interval: Option<f64>,
    fs_start: Option<f64>,
    fs_step: Option<f64>,
    fs_max: Option<f64>,
    geostatic_max_steps: Option<usize>,
    geostatic_ke_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    snapshot_interval: Option<f64>,
    progress_every: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    material: Option<RawMaterial>,
    numerics: Option<RawNumerics>,
    scenario: Option<RawScenario>,
    output: Option<RawOutput>,
}

/// Which experiment a configuration describes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scenario {
    Collapse(CollapseSetup<f64>),
    Slope(SlopeSetup<f64>),
    /// Block in a container, resting under gravity.
    Block { width: f64, height: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Collapse(_) => "collapse",
            Scenario::Slope(_) => "slope",
            Scenario::Block { .. } => "block",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPolicy {
    pub dir: PathBuf,
    /// Simulated time between snapshots (s); zero writes only the final state.
    pub snapshot_interval: f64,
    /// Steps between progress lines.
    pub progress_every: usize,
}

/// Fully validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub material: MaterialParams<f64>,
    pub numerics: Numerics<f64>,
    pub dp: f64,
    pub t_end: f64,
    pub seed: u64,
    pub scenario: Scenario,
    pub output: OutputPolicy,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Cesph => "cesph",
        Method::Tlsph => "tlsph",
    }
}

fn resolve<V: std::fmt::Debug + Clone>(slot: &mut Option<V>, key: &str, default: V) -> V {
    match slot {
        Some(v) => v.clone(),
        None => {
            info!("default {key} = {default:?}");
            *slot = Some(default.clone());
            default
        }
    }
}

fn required<V: Clone>(slot: &Option<V>, key: &str) -> Result<V> {
    slot.clone().ok_or_else(|| Error::config(key, "missing required key"))
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(v: f64, key: &str) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be non-negative, got {v}")))
    }
}

fn material_from(raw: &mut RawMaterial) -> Result<MaterialParams<f64>> {
    let rho0 = positive(resolve(&mut raw.rho0, "material.rho0", 1850.0), "material.rho0")?;
    let e = positive(required(&raw.youngs_modulus, "material.youngs_modulus")?, "material.youngs_modulus")?;
    let nu = resolve(&mut raw.poisson_ratio, "material.poisson_ratio", 0.3);
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::config("material.poisson_ratio", format!("{nu} outside (-1, 0.5)")));
    }
    let c = non_negative(required(&raw.cohesion, "material.cohesion")?, "material.cohesion")?;
    let phi = required(&raw.friction_angle, "material.friction_angle")?;
    if !(0.0..90.0).contains(&phi) {
        return Err(Error::config("material.friction_angle", format!("{phi}° outside [0°, 90°)")));
    }
    let psi = resolve(&mut raw.dilatancy_angle, "material.dilatancy_angle", 0.0);
    if !(0.0..=phi).contains(&psi) {
        return Err(Error::config("material.dilatancy_angle", format!("{psi}° outside [0°, friction_angle]")));
    }
    let plastic = resolve(&mut raw.plastic, "material.plastic", true);
    let mut m = derive_material(rho0, e, nu, c, phi.to_radians(), psi.to_radians())
        .map_err(|err| Error::config("material", err.to_string()))?;
    m.plastic = plastic;
    Ok(m)
}

fn numerics_from(raw: &mut RawNumerics) -> Result<(Numerics<f64>, f64, f64, u64)> {
    let method = match required(&raw.method, "numerics.method")?.to_ascii_lowercase().as_str() {
        "cesph" => Method::Cesph,
        "tlsph" => Method::Tlsph,
        other => {
            return Err(Error::config(
                "numerics.method",
                format!("unknown method `{other}`, expected CESPH or TLSPH"),
            ))
        }
    };
    raw.method = Some(method_name(method).into());
    let dt = positive(required(&raw.dt, "numerics.dt")?, "numerics.dt")?;
    let dp = positive(required(&raw.dp, "numerics.dp")?, "numerics.dp")?;
    let h = positive(resolve(&mut raw.h, "numerics.h", 1.5 * dp), "numerics.h")?;
    let t_end = positive(resolve(&mut raw.t_end, "numerics.t_end", 6.0), "numerics.t_end")?;
    let mut n = Numerics::new(method, dt, h);
    n.beta1 = non_negative(resolve(&mut raw.beta1, "numerics.beta1", n.beta1), "numerics.beta1")?;
    n.beta2 = non_negative(resolve(&mut raw.beta2, "numerics.beta2", n.beta2), "numerics.beta2")?;
    if method == Method::Tlsph && raw.gamma.is_some() {
        warn!("numerics.gamma is set but artificial pressure is ignored by TLSPH");
    }
    n.gamma = non_negative(resolve(&mut raw.gamma, "numerics.gamma", 0.0), "numerics.gamma")?;
    if method == Method::Tlsph {
        n.gamma = 0.0;
    }
    n.alpha_hg = non_negative(resolve(&mut raw.alpha_hg, "numerics.alpha_hg", n.alpha_hg), "numerics.alpha_hg")?;
    let update = resolve(&mut raw.configuration_update, "numerics.configuration_update", true);
    let k = positive(resolve(&mut raw.k_update, "numerics.k_update", 2.0), "numerics.k_update")?;
    n.k_update = update.then_some(k);
    n.gradient_correction = resolve(&mut raw.gradient_correction, "numerics.gradient_correction", true);
    n.pk1_form = match resolve(&mut raw.pk1_form, "numerics.pk1_form", "nominal".to_string()).as_str() {
        "nominal" => Pk1Form::Nominal,
        "standard" => Pk1Form::Standard,
        other => {
            return Err(Error::config(
                "numerics.pk1_form",
                format!("unknown form `{other}`, expected nominal or standard"),
            ))
        }
    };
    let g = resolve(&mut raw.gravity, "numerics.gravity", [0.0, -9.81]);
    n.gravity = Vec2::new(g[0], g[1]);
    n.damping = match raw.damping {
        Some(c) => Some(non_negative(c, "numerics.damping")?).filter(|c| *c > 0.0),
        None => None,
    };
    let seed = resolve(&mut raw.seed, "numerics.seed", 0);
    n.validate()?;
    Ok((n, dp, t_end, seed))
}

/// Geostatic defaults shared by the slope drivers.
pub fn default_geostatic() -> GeostaticOptions<f64> {
    GeostaticOptions::default()
}

fn scenario_from(raw: &mut RawScenario, t_end: f64, dp: f64) -> Result<Scenario> {
    let kind = required(&raw.kind, "scenario.kind")?.to_ascii_lowercase();
    raw.kind = Some(kind.clone());
    match kind.as_str() {
        "collapse" => {
            let width = positive(resolve(&mut raw.width, "scenario.width", 1.5), "scenario.width")?;
            let height = positive(resolve(&mut raw.height, "scenario.height", 1.5), "scenario.height")?;
            let runout = non_negative(resolve(&mut raw.runout, "scenario.runout", 3.0), "scenario.runout")?;
            let metric_interval = positive(
                resolve(&mut raw.metric_interval, "scenario.metric_interval", 0.05),
                "scenario.metric_interval",
            )?;
            Ok(Scenario::Collapse(CollapseSetup {
                width,
                height,
                runout,
                dp,
                t_end,
                metric_interval,
            }))
        }
        "slope" => {
            let height = positive(resolve(&mut raw.height, "scenario.height", 5.0), "scenario.height")?;
            let angle = resolve(&mut raw.slope_angle, "scenario.slope_angle", 45.0);
            let geometry = SlopeGeometry {
                height,
                angle: angle.to_radians(),
                foundation: non_negative(resolve(&mut raw.foundation, "scenario.foundation", 3.0), "scenario.foundation")?,
                crest_length: non_negative(
                    resolve(&mut raw.crest_length, "scenario.crest_length", 8.0),
                    "scenario.crest_length",
                )?,
                toe_length: non_negative(resolve(&mut raw.toe_length, "scenario.toe_length", 7.0), "scenario.toe_length")?,
            };
            geometry
                .validate()
                .map_err(|e| Error::config("scenario.slope_angle", e.to_string()))?;
            let mut geostatic = default_geostatic();
            geostatic.max_steps = resolve(
                &mut raw.geostatic_max_steps,
                "scenario.geostatic_max_steps",
                geostatic.max_steps,
            );
            geostatic.ke_tol = positive(
                resolve(&mut raw.geostatic_ke_tol, "scenario.geostatic_ke_tol", geostatic.ke_tol),
                "scenario.geostatic_ke_tol",
            )?;
            let fs_start = resolve(&mut raw.fs_start, "scenario.fs_start", 1.0);
            if !(fs_start >= 1.0) {
                return Err(Error::config("scenario.fs_start", format!("must be >= 1, got {fs_start}")));
            }
            let setup = SlopeSetup {
                geometry,
                dp,
                t_trial: positive(resolve(&mut raw.t_trial, "scenario.t_trial", 1.5), "scenario.t_trial")?,
                sample_interval: positive(
                    resolve(&mut raw.sample_interval, "scenario.sample_interval", 0.01),
                    "scenario.sample_interval",
                )?,
                fs_start,
                fs_step: positive(resolve(&mut raw.fs_step, "scenario.fs_step", 0.1), "scenario.fs_step")?,
                fs_max: positive(resolve(&mut raw.fs_max, "scenario.fs_max", 3.0), "scenario.fs_max")?,
                geostatic,
            };
            Ok(Scenario::Slope(setup))
        }
        "block" => Ok(Scenario::Block {
            width: positive(resolve(&mut raw.width, "scenario.width", 1.2), "scenario.width")?,
            height: positive(resolve(&mut raw.height, "scenario.height", 0.6), "scenario.height")?,
        }),
        other => Err(Error::config(
            "scenario.kind",
            format!("unknown scenario `{other}`, expected collapse, slope or block"),
        )),
    }
}

fn output_from(raw: &mut RawOutput) -> Result<OutputPolicy> {
    Ok(OutputPolicy {
        dir: PathBuf::from(resolve(&mut raw.dir, "output.dir", "runs".to_string())),
        snapshot_interval: non_negative(
            resolve(&mut raw.snapshot_interval, "output.snapshot_interval", 0.5),
            "output.snapshot_interval",
        )?,
        progress_every: resolve(&mut raw.progress_every, "output.progress_every", 100).max(1),
    })
}

/// A configuration together with the effective file text it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Input with every default written out.
    pub effective: String,
}

impl RunConfig {
    /// Effective TOML text; [`parse_config`] of it yields `self` again.
    pub fn to_toml(&self) -> String {
        let n = &self.numerics;
        let m = &self.material;
        let mut raw = RawConfig {
            material: Some(RawMaterial {
                rho0: Some(m.rho0),
                youngs_modulus: Some(m.youngs_modulus),
                poisson_ratio: Some(m.poisson_ratio),
                cohesion: Some(m.cohesion),
                friction_angle: Some(m.friction_angle.to_degrees()),
                dilatancy_angle: Some(m.dilatancy_angle.to_degrees()),
                plastic: Some(m.plastic),
            }),
            numerics: Some(RawNumerics {
                method: Some(method_name(n.method).into()),
                dt: Some(n.dt),
                dp: Some(self.dp),
                h: Some(n.h),
                t_end: Some(self.t_end),
                beta1: Some(n.beta1),
                beta2: Some(n.beta2),
                gamma: Some(n.gamma),
                alpha_hg: Some(n.alpha_hg),
                configuration_update: Some(n.k_update.is_some()),
                k_update: Some(n.k_update.unwrap_or(2.0)),
                gradient_correction: Some(n.gradient_correction),
                pk1_form: Some(
                    match n.pk1_form {
                        Pk1Form::Nominal => "nominal",
                        Pk1Form::Standard => "standard",
                    }
                    .into(),
                ),
                gravity: Some([n.gravity.x, n.gravity.y]),
                damping: n.damping,
                seed: Some(self.seed),
            }),
            scenario: Some(RawScenario {
                kind: Some(self.scenario.name().into()),
                ..RawScenario::default()
            }),
            output: Some(RawOutput {
                dir: Some(self.output.dir.display().to_string()),
                snapshot_interval: Some(self.output.snapshot_interval),
                progress_every: Some(self.output.progress_every),
            }),
        };
        if n.method == Method::Tlsph {
            if let Some(num) = raw.numerics.as_mut() {
                num.gamma = None;
            }
        }
        let s = raw.scenario.as_mut().unwrap();
        match &self.scenario {
            Scenario::Collapse(c) => {
                s.width = Some(c.width);
                s.height = Some(c.height);
                s.runout = Some(c.runout);
                s.metric_interval = Some(c.metric_interval);
            }
            Scenario::Slope(sl) => {
                s.height = Some(sl.geometry.height);
                s.slope_angle = Some(sl.geometry.angle.to_degrees());
                s.foundation = Some(sl.geometry.foundation);
                s.crest_length = Some(sl.geometry.crest_length);
                s.toe_length = Some(sl.geometry.toe_length);
                s.t_trial = Some(sl.t_trial);
                s.sample_interval = Some(sl.sample_interval);
                s.fs_start = Some(sl.fs_start);
                s.fs_step = Some(sl.fs_step);
                s.fs_max = Some(sl.fs_max);
                s.geostatic_max_steps = Some(sl.geostatic.max_steps);
                s.geostatic_ke_tol = Some(sl.geostatic.ke_tol);
            }
            Scenario::Block { width, height } => {
                s.width = Some(*width);
                s.height = Some(*height);
            }
        }
        toml::to_string(&raw).expect("configuration serializes")
    }

    /// Short hex digest of the effective configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..6])
    }
}

/// Parses and validates configuration text. Defaults are logged at info
/// level.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        Error::config(key_hint(text, &e).unwrap_or_else(|| "config".into()), msg)
    })?;
    let mut material_raw = raw.material.take().unwrap_or_default();
    let material = material_from(&mut material_raw)?;
    let mut num_raw = raw
        .numerics
        .take()
        .ok_or_else(|| Error::config("numerics", "missing required section"))?;
    let (numerics, dp, t_end, seed) = numerics_from(&mut num_raw)?;
    let mut scen_raw = raw
        .scenario
        .take()
        .ok_or_else(|| Error::config("scenario", "missing required section"))?;
    let scenario = scenario_from(&mut scen_raw, t_end, dp)?;
    let mut out_raw = raw.output.take().unwrap_or_default();
    let output = output_from(&mut out_raw)?;
    let config = RunConfig {
        material,
        numerics,
        dp,
        t_end,
        seed,
        scenario,
        output,
    };
    let effective = config.to_toml();
    Ok(LoadedConfig { config, effective })
}

/// Best-effort `section.key` label for a TOML error, from its span.
fn key_hint(text: &str, err: &toml::de::Error) -> Option<String> {
    let span = err.span()?;
    let before = &text[..span.start.min(text.len())];
    let section = before
        .lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')).map(str::to_string));
    let key: String = text[span.start.min(text.len())..span.end.min(text.len())]
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    match (section, key.is_empty()) {
        (Some(s), false) => Some(format!("{s}.{key}")),
        (Some(s), true) => Some(s),
        (None, false) => Some(key),
        (None, true) => None,
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
