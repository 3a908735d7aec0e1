//! Run configuration. Everything a pipeline reads comes from here, so an emitted
//! `config.json` replays the run exactly.

use std::path::Path;

use curvlab::criterion::Target;
use curvlab::mesh::{generate, load_mesh, MeshFormat, TriangleMesh};
use curvlab::spectral::CSobMode;
use curvlab::sections::ScaleMode;
use curvlab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSource {
    Generator { name: String },
    /// Mesh text inlined so the config stays self-contained.
    Off { text: String },
    Intrinsic { text: String },
}

impl MeshSource {
    pub fn build(&self) -> Result<TriangleMesh> {
        match self {
            MeshSource::Generator { name } => generate(name),
            MeshSource::Off { text } => load_mesh(text, MeshFormat::Off),
            MeshSource::Intrinsic { text } => load_mesh(text, MeshFormat::EdgeLengths),
        }
    }
}

/// Data fields `f` on the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    /// Section norm with the configured zeros, rescaled to `sup = value`.
    SectionNorm { value: f64 },
    /// `value * (1 + amplitude * u)` with `u` uniform in `[-1, 1]`, drawn from the seed.
    Random { value: f64, amplitude: f64 },
    /// `value * (1 + amplitude * phi_1 / sup|phi_1|)` for the first eigenfield.
    Eigen { value: f64, amplitude: f64 },
}

/// Measured constants replaced by given values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub systole: Option<f64>,
    pub spectral_gap: Option<f64>,
    pub c_sob: Option<f64>,
    /// Balance lower bound `A`; defaults to `bal(f)`.
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub uniformization_tol: f64,
    pub gauss_tol: f64,
    pub volume_tol: f64,
    pub poisson_tol: f64,
    pub drift_tol: f64,
    pub max_iter: usize,
    pub eta: f64,
    pub r: f64,
    pub d: u64,
    pub g: u64,
    pub field: FieldSpec,
    pub zeros: Vec<(usize, u32)>,
    pub scale_mode: ScaleMode,
    /// Zone radius for the section-norm bounds; `None` uses a quarter of the systole.
    pub zone_radius: Option<f64>,
    pub k_list: Vec<usize>,
    /// Index into the cohomology basis used to cut covers.
    pub cocycle: usize,
    pub export_covers: bool,
    pub eigenpairs: usize,
    pub c_sob_mode: CSobMode,
    pub overrides: Overrides,
    pub target: Target,
    pub schedule: String,
    pub criterion_a: f64,
    pub criterion_c: f64,
    pub g_min: u64,
    pub g_max: Option<u64>,
    pub window_genera: Vec<u64>,
    pub ray_points: usize,
    pub poisson_batch: usize,
    pub seed: u64,
    pub override_hypothesis: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Generator { name: "regular-octagon-genus2(8)".into() },
            uniformization_tol: 1e-10,
            gauss_tol: 1e-10,
            volume_tol: 1e-8,
            poisson_tol: 1e-10,
            drift_tol: 1e-8,
            max_iter: 200,
            eta: 0.4,
            r: 0.005,
            d: 1,
            g: 3,
            field: FieldSpec::Constant { value: 0.01 },
            zeros: vec![(0, 1)],
            scale_mode: ScaleMode::Sup,
            zone_radius: None,
            k_list: vec![2, 3],
            cocycle: 0,
            export_covers: false,
            eigenpairs: 10,
            c_sob_mode: CSobMode::Empirical(20),
            overrides: Overrides::default(),
            target: Target::Pu21,
            schedule: "default".into(),
            criterion_a: 1.0,
            criterion_c: 1.0,
            g_min: 2,
            g_max: Some(100_000),
            window_genera: (2..=10).collect(),
            ray_points: curvlab::ray::RAY_POINTS,
            poisson_batch: 20,
            seed: 0,
            override_hypothesis: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("uniformization_tol", self.uniformization_tol),
            ("gauss_tol", self.gauss_tol),
            ("volume_tol", self.volume_tol),
            ("poisson_tol", self.poisson_tol),
            ("drift_tol", self.drift_tol),
            ("eta", self.eta),
            ("criterion_a", self.criterion_a),
            ("criterion_c", self.criterion_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Precondition(format!("config: {name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 || self.ray_points < 3 {
            return Err(Error::Precondition("config: max_iter >= 1 and ray_points >= 3 required".into()));
        }
        Ok(())
    }
}
