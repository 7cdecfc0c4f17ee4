//! Experiment configuration, read from TOML with unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Scenario {
    Constant1d,
    RiemannShock1d,
    RiemannRarefaction1d,
    AdvectionStep1d,
    Shear2d,
    Rotation2d,
    Kk1d,
    Kk2d,
    Regularize1d,
    Regularize2d,
    StabilityShear2d,
}

impl TryFrom<String> for Scenario {
    type Error = String;

    fn try_from(name: String) -> Result<Self, String> {
        Scenario::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            format!("unknown scenario `{name}`, expected one of {}", known.join(", "))
        })
    }
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::Constant1d,
        Scenario::RiemannShock1d,
        Scenario::RiemannRarefaction1d,
        Scenario::AdvectionStep1d,
        Scenario::Shear2d,
        Scenario::Rotation2d,
        Scenario::Kk1d,
        Scenario::Kk2d,
        Scenario::Regularize1d,
        Scenario::Regularize2d,
        Scenario::StabilityShear2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Constant1d => "constant-1d",
            Scenario::RiemannShock1d => "riemann-shock-1d",
            Scenario::RiemannRarefaction1d => "riemann-rarefaction-1d",
            Scenario::AdvectionStep1d => "advection-step-1d",
            Scenario::Shear2d => "shear-2d",
            Scenario::Rotation2d => "rotation-2d",
            Scenario::Kk1d => "kk-1d",
            Scenario::Kk2d => "kk-2d",
            Scenario::Regularize1d => "regularize-1d",
            Scenario::Regularize2d => "regularize-2d",
            Scenario::StabilityShear2d => "stability-shear-2d",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Constant1d => "constant density and data; every residual vanishes",
            Scenario::RiemannShock1d => "Riemann shock for G = rho^2 against the exact solution",
            Scenario::RiemannRarefaction1d => "Riemann rarefaction for G = rho^2 against the exact solution",
            Scenario::AdvectionStep1d => "step profile advected at unit speed with inflow fill",
            Scenario::Shear2d => "transport by the shear b = (y, 0) against exact characteristics",
            Scenario::Rotation2d => "transport by a rigid rotation about the box center",
            Scenario::Kk1d => "three-component Keyfitz-Kranzer splitting with vacuum, 1-d",
            Scenario::Kk2d => "three-component Keyfitz-Kranzer splitting, 2-d",
            Scenario::Regularize1d => "mollification defect of a compressible 1-d record",
            Scenario::Regularize2d => "mollification defect of a 2-d stream-function record",
            Scenario::StabilityShear2d => "stability ladder for a mollified step shear",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Scenario::Shear2d
            | Scenario::Rotation2d
            | Scenario::Kk2d
            | Scenario::Regularize2d
            | Scenario::StabilityShear2d => 2,
            _ => 1,
        }
    }
}

/// A scalar or a list of components.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Values::One(v) => vec![*v],
            Values::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluxPreset {
    /// Constant velocities, one per axis.
    Linear { velocity: Vec<f64> },
    /// `f(rho) = rho` on every axis.
    Burgers {},
    /// `f(rho) = (cos rho, sin rho)`.
    Rotational {},
    /// Polynomial velocity per axis, coefficients in increasing degree.
    Polynomial { coefficients: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataPreset {
    Constant {
        value: Values,
    },
    Step {
        left: Values,
        right: Values,
        at: f64,
        #[serde(default)]
        axis: usize,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: Values,
        #[serde(default)]
        base: Option<Values>,
    },
    /// Independent uniform values in `[-amplitude, amplitude]`; the seed
    /// defaults to the experiment seed.
    Random {
        amplitude: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Cells per axis.
    pub cells: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cfl: Option<f64>,
    pub final_time: Option<f64>,
    /// Every how many steps a snapshot is written.
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub initial: Option<DataPreset>,
    pub boundary: Option<DataPreset>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Cells per axis of each refinement level.
    pub refinements: Option<Vec<usize>>,
    /// Regularization indices `m`.
    pub regularization: Option<Vec<usize>>,
    /// Kernel scale at `m = 1`.
    pub eps0: Option<f64>,
    /// Number of rungs of a stability ladder.
    pub ladder: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub flux: Option<FluxPreset>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub study: StudySection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// A configuration with every setting at the scenario default.
    pub fn for_scenario(scenario: Scenario) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection { scenario: Some(scenario), ..Default::default() },
            ..Default::default()
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.experiment.scenario.expect("validated")
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: String| Err(HarnessError::Config(msg));
        let Some(scenario) = self.experiment.scenario else {
            return err("missing `scenario` in [experiment]".into());
        };
        let dim = scenario.dim();
        if let Some(cells) = &self.grid.cells {
            if cells.len() != dim || cells.iter().any(|&n| n < 2) {
                return err(format!("[grid] cells must list {dim} counts of at least 2"));
            }
        }
        if let Some(cfl) = self.solver.cfl {
            if !(cfl > 0.0 && cfl <= 1.0) {
                return err(format!("[solver] cfl = {cfl} must lie in (0, 1]"));
            }
        }
        if let Some(t) = self.solver.final_time {
            if !(t >= 0.0 && t.is_finite()) {
                return err(format!("[solver] final_time = {t} must be finite and non-negative"));
            }
        }
        if self.solver.snapshot_stride == Some(0) {
            return err("[solver] snapshot_stride must be at least 1".into());
        }
        if let Some(refs) = &self.study.refinements {
            if refs.is_empty() || refs.iter().any(|&n| n < 2) {
                return err("[study] refinements must list cell counts of at least 2".into());
            }
        }
        if let Some(ms) = &self.study.regularization {
            if ms.is_empty() || ms.contains(&0) {
                return err("[study] regularization indices must be at least 1".into());
            }
        }
        if let Some(eps0) = self.study.eps0 {
            if !(eps0 > 0.0 && eps0.is_finite()) {
                return err(format!("[study] eps0 = {eps0} must be positive"));
            }
        }
        if self.study.ladder == Some(0) {
            return err("[study] ladder must have at least one rung".into());
        }
        match &self.flux {
            Some(FluxPreset::Linear { velocity }) if velocity.len() != dim => {
                return err(format!("[flux] linear velocity needs {dim} entries"));
            }
            Some(FluxPreset::Polynomial { coefficients }) if coefficients.len() != dim || coefficients.iter().any(Vec::is_empty) => {
                return err(format!("[flux] polynomial needs {dim} non-empty coefficient lists"));
            }
            Some(FluxPreset::Rotational {}) if dim != 2 => {
                return err("[flux] the rotational preset is 2-d only".into());
            }
            _ => {}
        }
        for preset in [&self.data.initial, &self.data.boundary].into_iter().flatten() {
            match preset {
                DataPreset::Step { axis, .. } if *axis >= dim => return err(format!("[data] step axis {axis} out of range")),
                DataPreset::Bump { center, radius, .. } if center.len() != dim || !(*radius > 0.0) => {
                    return err(format!("[data] bump needs a {dim}-d center and a positive radius"));
                }
                DataPreset::Random { amplitude, .. } if !(*amplitude >= 0.0 && amplitude.is_finite()) => {
                    return err("[data] random amplitude must be finite and non-negative".into());
                }
                _ => {}
            }
        }
        Ok(())
    }
}
