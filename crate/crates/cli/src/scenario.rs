//! Scenario files: TOML schema, validation, and resolution into core types.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wavetrace_core::normal_form::ModeId;
use wavetrace_core::profile::{FlowSpec, Profile};
use wavetrace_core::quantize::MomentumMap;
use wavetrace_core::raytrace::RayConfig;
use wavetrace_core::sampler::BoxSampler;
use wavetrace_core::symbols::PhasePoint;

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    /// One of `linear`, `shifted_sine`, `tanh`.
    pub b: String,
    pub beta: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub k: Option<f64>,
    /// One of `zero`, `bump`.
    #[serde(default = "default_flow")]
    pub flow: String,
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub amplitude: Option<f64>,
}

fn default_flow() -> String {
    "zero".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    /// One of `rossby`, `poincare_plus`, `poincare_minus`.
    pub hamiltonian: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub point: Option<[f64; 4]>,
    pub points: Option<Vec<[f64; 4]>>,
    /// Bounds per coordinate, ordered (x1, x2, xi1, xi2).
    pub x1: Option<[f64; 2]>,
    pub x2: Option<[f64; 2]>,
    pub xi1: Option<[f64; 2]>,
    pub xi2: Option<[f64; 2]>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub t_max: Option<f64>,
    pub max_steps: Option<usize>,
    pub gap_tol: Option<f64>,
    /// Output sampling interval for trajectory CSVs (dense interpolation).
    pub sample_dt: Option<f64>,
    /// Interval for exit-time measurement; defaults to the flow support.
    pub exit_interval: Option<[f64; 2]>,
    /// Classify trapping (zero-flow Rossby ensembles only).
    #[serde(default)]
    pub classify_trapping: bool,
    pub tol_trap: Option<f64>,
    /// Admissible slope parameter for the gap floor report.
    pub eta: Option<f64>,
}

impl Default for RaySpec {
    fn default() -> Self {
        RaySpec {
            rtol: None,
            atol: None,
            t_max: None,
            max_steps: None,
            gap_tol: None,
            sample_dt: None,
            exit_interval: None,
            classify_trapping: false,
            tol_trap: None,
            eta: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub len: f64,
    pub eps_list: Vec<f64>,
    /// `compactified` (default) or `raw`.
    pub momentum_map: Option<String>,
    pub packet_x0: Option<[f64; 2]>,
    pub packet_xi0: Option<[f64; 2]>,
    /// Horizon for the propagator-stability check.
    pub t_max: Option<f64>,
    pub perturbation_seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub profile: ProfileSpec,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub ray: RaySpec,
    pub grid: Option<GridSpec>,
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config parse error: {e}")))
    }

    /// Apply command-line overrides; the hash is computed afterwards so it
    /// identifies the effective scenario.
    pub fn apply_overrides(&mut self, seed: Option<u64>, eps: Option<f64>) {
        if let Some(s) = seed {
            self.initial.seed = Some(s);
        }
        if let (Some(e), Some(grid)) = (eps, self.grid.as_mut()) {
            grid.eps_list = vec![e];
        }
    }

    pub fn hash(&self) -> String {
        let canon = toml::to_string(self).unwrap_or_default();
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn profile(&self) -> Result<Profile, CliError> {
        let flow = match self.profile.flow.as_str() {
            "zero" => FlowSpec::Zero,
            "bump" => {
                let center = self.profile.center.ok_or_else(|| {
                    CliError::Validation("profile.center required for flow = \"bump\"".into())
                })?;
                let radius = self.profile.radius.ok_or_else(|| {
                    CliError::Validation("profile.radius required for flow = \"bump\"".into())
                })?;
                let amplitude = self.profile.amplitude.ok_or_else(|| {
                    CliError::Validation("profile.amplitude required for flow = \"bump\"".into())
                })?;
                if radius <= 0.0 {
                    return Err(CliError::Validation(
                        "profile.radius must be positive".into(),
                    ));
                }
                FlowSpec::Bump {
                    center: (center[0], center[1]),
                    radius,
                    amplitude,
                }
            }
            other => {
                return Err(CliError::Validation(format!(
                    "unknown flow \"{other}\" (expected zero|bump)"
                )))
            }
        };
        match self.profile.b.as_str() {
            "linear" => {
                let beta = self.profile.beta.ok_or_else(|| {
                    CliError::Validation("profile.beta required for b = \"linear\"".into())
                })?;
                Ok(Profile::linear_b(beta, flow))
            }
            "shifted_sine" => {
                let c = self.profile.c.ok_or_else(|| {
                    CliError::Validation("profile.c required for b = \"shifted_sine\"".into())
                })?;
                let a = self.profile.a.ok_or_else(|| {
                    CliError::Validation("profile.a required for b = \"shifted_sine\"".into())
                })?;
                let k = self.profile.k.ok_or_else(|| {
                    CliError::Validation("profile.k required for b = \"shifted_sine\"".into())
                })?;
                Ok(Profile::shifted_sine_b(c, a, k, flow))
            }
            "tanh" => Ok(Profile::tanh_b(flow)),
            other => Err(CliError::Validation(format!(
                "unknown b profile \"{other}\" (expected linear|shifted_sine|tanh)"
            ))),
        }
    }

    pub fn mode(&self) -> Result<ModeId, CliError> {
        match self.mode.hamiltonian.as_deref() {
            None | Some("rossby") => Ok(ModeId::Rossby),
            Some("poincare_plus") => Ok(ModeId::PoincarePlus),
            Some("poincare_minus") => Ok(ModeId::PoincareMinus),
            Some(other) => Err(CliError::Validation(format!(
                "unknown hamiltonian \"{other}\" (expected rossby|poincare_plus|poincare_minus)"
            ))),
        }
    }

    pub fn ray_config(&self) -> Result<RayConfig, CliError> {
        let mut cfg = RayConfig {
            hamiltonian: self.mode()?,
            ..Default::default()
        };
        if let Some(v) = self.ray.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.ray.atol {
            cfg.atol = v;
        }
        if let Some(v) = self.ray.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.ray.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.ray.gap_tol {
            cfg.gap_tol = v;
        }
        if cfg.rtol <= 0.0 || cfg.atol <= 0.0 || cfg.t_max <= 0.0 {
            return Err(CliError::Validation(
                "ray.rtol, ray.atol and ray.t_max must be positive".into(),
            ));
        }
        Ok(cfg)
    }

    /// Initial data as an explicit point list or a sampler; samplers require
    /// a seed for reproducibility.
    pub fn initial_points(&self) -> Result<InitialData, CliError> {
        let ini = &self.initial;
        if let Some(p) = ini.point {
            return Ok(InitialData::Points(vec![PhasePoint::new(
                p[0], p[1], p[2], p[3],
            )]));
        }
        if let Some(pts) = &ini.points {
            if pts.is_empty() {
                return Err(CliError::Validation("initial.points is empty".into()));
            }
            return Ok(InitialData::Points(
                pts.iter()
                    .map(|p| PhasePoint::new(p[0], p[1], p[2], p[3]))
                    .collect(),
            ));
        }
        let (x1, x2, xi1, xi2) = match (ini.x1, ini.x2, ini.xi1, ini.xi2) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => {
                return Err(CliError::Validation(
                    "initial data required: point, points, or a box (x1, x2, xi1, xi2 ranges)"
                        .into(),
                ))
            }
        };
        let count = ini.count.ok_or_else(|| {
            CliError::Validation("initial.count required with a sampler box".into())
        })?;
        let seed = ini.seed.ok_or_else(|| {
            CliError::Validation("initial.seed required with a sampler box".into())
        })?;
        let sampler = BoxSampler::new(
            [x1[0], x2[0], xi1[0], xi2[0]],
            [x1[1], x2[1], xi1[1], xi2[1]],
            seed,
        );
        Ok(InitialData::Sampler { sampler, count })
    }

    pub fn momentum_map(&self) -> Result<MomentumMap, CliError> {
        match self.grid.as_ref().and_then(|g| g.momentum_map.as_deref()) {
            None | Some("compactified") => Ok(MomentumMap::Compactified),
            Some("raw") => Ok(MomentumMap::Raw),
            Some(other) => Err(CliError::Validation(format!(
                "unknown momentum_map \"{other}\" (expected compactified|raw)"
            ))),
        }
    }
}

pub enum InitialData {
    Points(Vec<PhasePoint>),
    Sampler { sampler: BoxSampler, count: usize },
}
