//! Strict JSON run configuration. Angles are degrees here and radians everywhere else.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use ptpb_core::{
    ArmParams, ConstraintBox, ControlHold, DisturbanceSpec, GainSet, IntegrationMode, JointState,
    NoiseSpec, ReferenceSpec, Region, Scenario, TwoLinkArm,
};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    #[serde(default)]
    pub model: ModelConfig,
    pub constraints: ConstraintsConfig,
    pub gains: GainsConfig,
    pub timing: TimingConfig,
    pub reference: ReferenceConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default)]
    pub hold: Hold,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    /// A built-in model; only `"r2"` exists.
    Named(String),
    Params {
        params: ArmParamsConfig,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::Named("r2".into())
    }
}

/// Two-link arm parameters (SI units); omitted fields take the `r2` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmParamsConfig {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for ArmParamsConfig {
    fn default() -> Self {
        let p = ArmParams::default();
        Self {
            m1: p.m1,
            m2: p.m2,
            l1: p.l1,
            l2: p.l2,
            lc1: p.lc1,
            lc2: p.lc2,
            i1: p.i1,
            i2: p.i2,
            g: p.g,
            b1: p.b1,
            b2: p.b2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub theta_min_deg: Vec<f64>,
    pub theta_max_deg: Vec<f64>,
    pub nu_min_deg_s: Vec<f64>,
    pub nu_max_deg_s: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub kp: Vec<f64>,
    pub rho: f64,
    pub varpi: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// Band margin; defaults to `varpi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(default)]
    pub t0: f64,
    /// Prescribed time `T` (s).
    pub horizon: f64,
    pub duration: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum ReferenceConfig {
    SetPoint {
        q_deg: Vec<f64>,
    },
    /// `offset + amplitude sin(frequency t + phase)`, frequency in rad/s.
    Sinusoid {
        offset_deg: Vec<f64>,
        amplitude_deg: Vec<f64>,
        frequency: Vec<f64>,
        phase_deg: Vec<f64>,
    },
}

/// Initial state, either absolute or as an offset from the reference at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum InitialConfig {
    Absolute {
        q_deg: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dq_deg_s: Option<Vec<f64>>,
    },
    /// At rest, every joint displaced from `q_r(t0)` by the same angle.
    Offset { offset_deg: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum DisturbanceConfig {
    #[default]
    None,
    Uniform {
        max: Vec<f64>,
        seed: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum NoiseConfig {
    #[default]
    None,
    Snr {
        db: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    #[default]
    Xi,
    Upsilon,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    #[default]
    Continuous,
    Zoh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Relative paths resolve against the config file's directory.
    pub dir: PathBuf,
    pub csv: bool,
    pub metrics_json: bool,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: true,
            metrics_json: true,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeasibilityConfig {
    /// Prescribed times to analyse; empty means `timing.horizon`.
    pub horizons: Vec<f64>,
    /// Monte-Carlo samples for `viable_samples.csv`; 0 skips sampling.
    pub samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Overrides the input bound `u*` taken from the box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_star: Option<f64>,
    /// Target; defaults to `q_r(t0)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_star_deg: Option<Vec<f64>>,
    pub start: StartRegion,
    pub bounds: BoundsSource,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            horizons: Vec::new(),
            samples: 10_000,
            seed: 0,
            sigma: None,
            u_star: None,
            q_star_deg: None,
            start: StartRegion::Box { rest: true },
            bounds: BoundsSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum StartRegion {
    Box {
        rest: bool,
    },
    Ball {
        q_radius_deg: f64,
        dq_radius_deg_s: f64,
    },
    /// The configured initial state only.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum BoundsSource {
    Estimate {
        samples: usize,
        seed: u64,
        inflation: f64,
    },
    Given {
        m_lower: f64,
        m_upper: f64,
        c_bar: f64,
        g_bar: f64,
        f_bar: f64,
    },
}

impl Default for BoundsSource {
    fn default() -> Self {
        let o = ptpb_core::BoundsOptions::default();
        Self::Estimate {
            samples: o.samples,
            seed: o.seed,
            inflation: o.inflation,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets_deg: Option<Vec<f64>>,
    /// Replaces the disturbance and noise seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

fn rad(v: &[f64]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|x| x.to_radians()))
}

fn vec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(Failure::Parse(format!(
                "unsupported config_version {} (expected {CONFIG_VERSION})",
                cfg.config_version
            )));
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<TwoLinkArm, Failure> {
        match &self.model {
            ModelConfig::Named(name) if name == "r2" => Ok(TwoLinkArm::default()),
            ModelConfig::Named(name) => Err(Failure::Invalid(format!("unknown model {name:?}"))),
            ModelConfig::Params { params: p } => TwoLinkArm::new(ArmParams {
                m1: p.m1,
                m2: p.m2,
                l1: p.l1,
                l2: p.l2,
                lc1: p.lc1,
                lc2: p.lc2,
                i1: p.i1,
                i2: p.i2,
                g: p.g,
                b1: p.b1,
                b2: p.b2,
            })
            .map_err(|e| Failure::Invalid(e.to_string())),
        }
    }

    pub fn constraint_box(&self) -> Result<ConstraintBox, Failure> {
        let c = &self.constraints;
        ConstraintBox::new(
            (rad(&c.theta_min_deg), rad(&c.theta_max_deg)),
            (rad(&c.nu_min_deg_s), rad(&c.nu_max_deg_s)),
            (vec(&c.u_min), vec(&c.u_max)),
        )
        .map_err(|e| Failure::Invalid(e.to_string()))
    }

    pub fn gain_set(&self) -> GainSet {
        let g = &self.gains;
        let set = GainSet::new(vec(&g.kp), g.rho, g.varpi, g.gamma, g.alpha, g.kappa);
        match g.c {
            Some(c) => set.with_margin(c),
            None => set,
        }
    }

    pub fn reference_spec(&self) -> ReferenceSpec {
        match &self.reference {
            ReferenceConfig::SetPoint { q_deg } => ReferenceSpec::SetPoint(rad(q_deg)),
            ReferenceConfig::Sinusoid {
                offset_deg,
                amplitude_deg,
                frequency,
                phase_deg,
            } => ReferenceSpec::Sinusoid {
                offset: rad(offset_deg),
                amplitude: rad(amplitude_deg),
                frequency: vec(frequency),
                phase: rad(phase_deg),
            },
        }
    }

    fn initial_state(&self, reference: &ReferenceSpec) -> Result<JointState, Failure> {
        match &self.initial {
            InitialConfig::Absolute { q_deg, dq_deg_s } => {
                let dq = dq_deg_s
                    .as_deref()
                    .map_or_else(|| DVector::zeros(q_deg.len()), rad);
                JointState::new(rad(q_deg), dq).map_err(|e| Failure::Invalid(e.to_string()))
            }
            InitialConfig::Offset { offset_deg } => Ok(JointState::rest(
                reference
                    .at(self.timing.t0)
                    .q
                    .add_scalar(offset_deg.to_radians()),
            )),
        }
    }

    /// Builds the scenario; `validate` is left to the engine.
    pub fn scenario(&self) -> Result<Scenario, Failure> {
        let reference = self.reference_spec();
        let initial = self.initial_state(&reference)?;
        let t = &self.timing;
        Ok(Scenario {
            bx: self.constraint_box()?,
            gains: self.gain_set(),
            t0: t.t0,
            horizon: t.horizon,
            duration: t.duration,
            dt: t.dt,
            reference,
            disturbance: match &self.disturbance {
                DisturbanceConfig::None => DisturbanceSpec::None,
                DisturbanceConfig::Uniform { max, seed } => DisturbanceSpec::Uniform {
                    max: vec(max),
                    seed: *seed,
                },
            },
            noise: match &self.noise {
                NoiseConfig::None => NoiseSpec::None,
                NoiseConfig::Snr { db, seed } => NoiseSpec::Snr {
                    db: *db,
                    seed: *seed,
                },
            },
            initial,
            mode: match self.integration {
                Integration::Xi => IntegrationMode::Xi,
                Integration::Upsilon => IntegrationMode::Upsilon,
            },
            hold: match self.hold {
                Hold::Continuous => ControlHold::Continuous,
                Hold::Zoh => ControlHold::Zoh,
            },
            record_every: t.record_every,
        })
    }

    /// Replaces the disturbance and noise seeds.
    pub fn override_seed(&mut self, s: u64) {
        if let DisturbanceConfig::Uniform { seed, .. } = &mut self.disturbance {
            *seed = s;
        }
        if let NoiseConfig::Snr { seed, .. } = &mut self.noise {
            *seed = s;
        }
    }

    /// Output directory, resolved against `base` when relative.
    pub fn output_dir(&self, base: &Path) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            base.join(&self.output.dir)
        }
    }
}

impl StartRegion {
    pub fn region(&self, initial: &JointState) -> Region {
        match self {
            Self::Box { rest } => Region::StateBox { rest: *rest },
            Self::Ball {
                q_radius_deg,
                dq_radius_deg_s,
            } => Region::Ball {
                q_radius: q_radius_deg.to_radians(),
                dq_radius: dq_radius_deg_s.to_radians(),
            },
            Self::Initial => Region::Points(vec![initial.clone()]),
        }
    }
}
