//! The experiment config document: one TOML file describes lattice, materials,
//! potential mode, profiles, fields, frame, mismatch, and per-command options.

use anyhow::{bail, Context, Result};
use nalgebra::Vector2;
use serde::Deserialize;

use film_lattice::continuum::ContinuumProfile;
use film_lattice::energy::MaterialParams;
use film_lattice::lattice::{DiscreteProfile, LatticeSpec};
use film_lattice::rigidity::RigidMotion;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub lattice: Option<LatticeSection>,
    pub materials: MaterialsSection,
    #[serde(default)]
    pub potential: PotentialMode,
    #[serde(default)]
    pub delta: f64,
    pub frame: Option<FrameSection>,
    pub profile: Option<ProfileSection>,
    pub continuum_profile: Option<ContinuumSection>,
    pub field: Option<FieldSection>,
    pub deformation: Option<DeformationSection>,
    pub surface_oracle: Option<SurfaceOracleSection>,
    pub recovery: Option<RecoverySection>,
    pub relax_options: Option<RelaxSection>,
    pub anneal: Option<AnnealSection>,
    pub yosida: Option<YosidaSection>,
    pub rebalance: Option<RebalanceSection>,
    pub probe: Option<ProbeSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub epsilon: f64,
    pub k: u32,
    pub substrate_depth: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub include_bottom_boundary: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSection {
    pub k_f: f64,
    pub k_s: f64,
    pub gamma_f: f64,
    pub gamma_s: f64,
}

#[derive(Debug, Default, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialMode {
    #[default]
    Harmonic,
    LennardJones,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub b: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub half_heights: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumSection {
    pub period: f64,
    pub breakpoints: Vec<(f64, f64)>,
    #[serde(default)]
    pub cuts: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub builtin: String,
    #[serde(default)]
    pub matrix: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub offset: Option<[f64; 2]>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub modes: Option<u32>,
    #[serde(default)]
    pub scale: Option<f64>,
    /// Node/value mesh import (deformation-field file written by `sample`).
    #[serde(default)]
    pub mesh_file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationSection {
    /// "identity" or a per-site CSV path.
    pub source: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceOracleSection {
    /// Physical integer normal (p, q).
    pub normal: Option<[i64; 2]>,
    /// Tangent in lattice-basis integers a*(sqrt3/2,1/2) + b*(0,1).
    pub normal_lattice: Option<[i64; 2]>,
    #[serde(default = "default_window")]
    pub window_columns: u32,
    #[serde(default)]
    pub eps_list: Vec<f64>,
}

fn default_window() -> u32 {
    10_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySection {
    pub k_list: Vec<u32>,
    #[serde(default)]
    pub volume: Option<f64>,
    #[serde(default)]
    pub mesh_resolution: Option<f64>,
}

fn default_beta() -> f64 {
    0.5
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RelaxSection {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSection {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub moves: usize,
    #[serde(default)]
    pub score_elastic: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YosidaSection {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RebalanceSection {
    pub target_volume: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub y_min: Option<f64>,
    #[serde(default)]
    pub y_max: Option<f64>,
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).context("parsing config")?;
        Ok(cfg)
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        let l = self
            .lattice
            .as_ref()
            .context("config needs a [lattice] section")?;
        let spec = LatticeSpec::new(l.epsilon, l.k, l.substrate_depth, l.lambda)?
            .with_bottom_boundary(l.include_bottom_boundary);
        Ok(spec)
    }

    pub fn materials(&self) -> Result<MaterialParams> {
        let m = &self.materials;
        Ok(MaterialParams::new(m.k_f, m.k_s, m.gamma_f, m.gamma_s)?)
    }

    pub fn frame(&self) -> RigidMotion {
        match &self.frame {
            Some(f) => RigidMotion::new(f.theta, Vector2::new(f.b[0], f.b[1])),
            None => RigidMotion::identity(),
        }
    }

    pub fn discrete_profile(&self) -> Result<DiscreteProfile> {
        let p = self
            .profile
            .as_ref()
            .context("config needs a [profile] section")?;
        let profile = DiscreteProfile::new(p.half_heights.clone());
        profile.check_admissible()?;
        Ok(profile)
    }

    pub fn continuum_profile(&self) -> Result<ContinuumProfile> {
        let c = self
            .continuum_profile
            .as_ref()
            .context("config needs a [continuum_profile] section")?;
        Ok(ContinuumProfile::new(
            c.period,
            c.breakpoints.clone(),
            c.cuts
                .iter()
                .map(|&(x, y_low, y_high)| film_lattice::continuum::Cut { x, y_low, y_high })
                .collect(),
        )?)
    }

    /// Displacement field: an analytic builtin, or a mesh imported as
    /// node/value lists.
    pub fn field_source(&self, l: f64) -> Result<FieldSource> {
        let Some(f) = &self.field else {
            return Ok(FieldSource::Analytic(Box::new(|_| Vector2::zeros())));
        };
        if let Some(path) = &f.mesh_file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading mesh field {path}"))?;
            let mesh: film_lattice::continuum::DisplacementField =
                toml::from_str(&text).context("parsing mesh field")?;
            return Ok(FieldSource::Mesh(mesh));
        }
        match f.builtin.as_str() {
            "zero" => Ok(FieldSource::Analytic(Box::new(|_| Vector2::zeros()))),
            "affine" => {
                let m = f.matrix.context("affine field needs `matrix`")?;
                let b = f.offset.unwrap_or([0.0, 0.0]);
                Ok(FieldSource::Analytic(Box::new(move |x| {
                    Vector2::new(
                        m[0][0] * x.x + m[0][1] * x.y + b[0],
                        m[1][0] * x.x + m[1][1] * x.y + b[1],
                    )
                })))
            }
            "trig" => {
                let amp = f.amplitude.unwrap_or(0.1);
                let modes = f.modes.unwrap_or(1) as f64;
                let scale = f.scale.unwrap_or(1.0);
                Ok(FieldSource::Analytic(Box::new(move |x| {
                    let phase = std::f64::consts::TAU * modes * x.x / l;
                    Vector2::new(
                        amp * phase.sin() * (x.y / scale).cos(),
                        amp * phase.cos() * (x.y / scale).sin(),
                    )
                })))
            }
            other => bail!("unknown field builtin `{other}` (zero | affine | trig)"),
        }
    }
}

/// A displacement field for recovery and continuum evaluation.
pub enum FieldSource {
    Analytic(Box<dyn Fn(Vector2<f64>) -> Vector2<f64>>),
    Mesh(film_lattice::continuum::DisplacementField),
}

impl FieldSource {
    /// Point evaluation; `None` outside a mesh field's domain.
    pub fn eval(&self, p: Vector2<f64>) -> Option<Vector2<f64>> {
        match self {
            FieldSource::Analytic(f) => Some(f(p)),
            FieldSource::Mesh(m) => m.eval(p),
        }
    }
}
