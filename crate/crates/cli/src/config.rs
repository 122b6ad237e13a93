//! Run configuration read from JSON. Every field is optional; `{}` runs the
//! default campaign on (n, k) = (2, 2).

use std::path::{Path, PathBuf};

use kenv_core::envelope::EnvelopeTolerances;
use kenv_core::{GridSpec, TestFamily, TupleShape};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AmSetting {
    Value(f64),
    Named(AmName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmName {
    Chern,
}

impl AmSetting {
    pub fn resolve(&self, shape: TupleShape) -> f64 {
        match *self {
            AmSetting::Value(v) => v,
            AmSetting::Named(AmName::Chern) => (shape.m() + 1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionConfig {
    #[serde(flatten)]
    pub family: TestFamily,
    /// Fixed scale; calibrated ε_max when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_functions() -> Vec<FunctionConfig> {
    vec![
        FunctionConfig {
            family: TestFamily::PowerRatio { degree: 2 },
            epsilon: None,
        },
        FunctionConfig {
            family: TestFamily::PowerRatio { degree: 3 },
            epsilon: None,
        },
        FunctionConfig {
            family: TestFamily::TupleNormMix {
                weights: vec![-1.0, 0.5],
            },
            epsilon: None,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivergenceConfig {
    pub alpha: f64,
    pub m: usize,
    pub cutoffs: Vec<f64>,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            alpha: 1.0,
            m: 1,
            cutoffs: vec![10.0, 100.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TianConfig {
    pub dims: Vec<usize>,
    /// Per-axis quadrature nodes; a per-dimension default when absent.
    pub nodes: Option<usize>,
    pub mc_samples: u64,
    pub quadrature_tol: f64,
    pub mc_tol: f64,
    /// Exponent for the test-function domination check.
    pub domination_alpha: f64,
    pub domination_samples: u64,
    pub divergence: DivergenceConfig,
}

impl Default for TianConfig {
    fn default() -> Self {
        TianConfig {
            dims: vec![1, 2, 3],
            nodes: None,
            mc_samples: 4_000_000,
            quadrature_tol: 1e-4,
            mc_tol: 1e-2,
            domination_alpha: 0.9,
            domination_samples: 1_000_000,
            divergence: DivergenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPoint {
    pub shape: TupleShape,
    /// Affine coordinates in chart 0, as [re, im] pairs.
    pub affine: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmConfig {
    pub shapes: Vec<TupleShape>,
    pub samples: usize,
    pub det_tol: f64,
    pub hessian_tol: f64,
    pub points: Vec<ExplicitPoint>,
}

impl Default for GmConfig {
    fn default() -> Self {
        GmConfig {
            shapes: vec![
                TupleShape::new(2, 2).expect("valid shape"),
                TupleShape::new(1, 3).expect("valid shape"),
            ],
            samples: 50,
            det_tol: 1e-5,
            hessian_tol: 1e-5,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub shape: TupleShape,
    pub a_m: AmSetting,
    /// Envelope verification grid.
    pub grid: GridSpec,
    pub calibration_grid: GridSpec,
    pub sup_grid: GridSpec,
    pub tolerances: EnvelopeTolerances,
    /// Orbit samples per function for the invariance check.
    pub orbit_samples: usize,
    pub invariance_tol: f64,
    pub alpha_list: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_path: Option<PathBuf>,
    pub functions: Vec<FunctionConfig>,
    pub tian: TianConfig,
    pub gm: GmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shape: TupleShape::new(2, 2).expect("valid shape"),
            a_m: AmSetting::Named(AmName::Chern),
            grid: GridSpec::default(),
            calibration_grid: GridSpec::linear(0.0, 11),
            sup_grid: GridSpec::linear(0.0, 21),
            tolerances: EnvelopeTolerances::default(),
            orbit_samples: 100,
            invariance_tol: 1e-10,
            alpha_list: vec![0.25, 0.5, 0.75],
            seeds: vec![20240601],
            output_path: None,
            functions: default_functions(),
            tian: TianConfig::default(),
            gm: GmConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn a_m(&self) -> f64 {
        self.a_m.resolve(self.shape)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let a_m = self.a_m();
        if !(a_m > 0.0 && a_m.is_finite()) {
            return bad(format!("a_m = {a_m} must be positive"));
        }
        for g in [&self.grid, &self.calibration_grid, &self.sup_grid] {
            g.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !self.grid.log_spacing && self.grid.delta == 0.0 {
            return bad("envelope grid needs delta > 0".into());
        }
        if let Some(a) = self.alpha_list.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
            return bad(format!("alpha_list entry {a} outside (0, 1)"));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.orbit_samples == 0 {
            return bad("orbit_samples must be at least 1".into());
        }
        if self.tian.dims.contains(&0) {
            return bad("tian.dims entries must be at least 1".into());
        }
        let d = self.tian.domination_alpha;
        if !(d > 0.0 && d < 1.0) {
            return bad(format!("tian.domination_alpha = {d} outside (0, 1)"));
        }
        if self.tian.mc_samples < 2 || self.tian.domination_samples < 2 {
            return bad("Monte Carlo sample counts must be at least 2".into());
        }
        if self.tian.divergence.alpha < 1.0 {
            return bad(format!(
                "tian.divergence.alpha = {} must be at least 1",
                self.tian.divergence.alpha
            ));
        }
        if self.gm.shapes.is_empty() && self.gm.points.is_empty() {
            return bad("gm needs at least one shape or explicit point".into());
        }
        Ok(())
    }
}
