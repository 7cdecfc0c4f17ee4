//! Canned problems: flux records, transport data and splitting data for the
//! registered scenarios.

use std::f64::consts::PI;
use std::sync::Arc;

use fvlab_core::claw::{FluxFamily, ScalarIBVP, Velocity};
use fvlab_core::grid::{CellField, Grid, MAX_DIM};
use fvlab_core::kk::KKData;
use fvlab_core::regularize::SpaceTimePair;
use fvlab_core::transport::{DensityFluxRecord, RecordStep};
use fvlab_core::FaceData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DataPreset, ExperimentConfig, FluxPreset, Scenario, Values};
use crate::error::HarnessError;

pub type PointFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Every setting of a run, with scenario defaults filled in.
#[derive(Debug, Clone)]
pub struct Settings {
    pub scenario: Scenario,
    pub seed: u64,
    pub cells: Vec<usize>,
    pub cfl: f64,
    pub final_time: f64,
    pub stride: Option<usize>,
    pub flux: FluxPreset,
    pub initial: Option<DataPreset>,
    pub boundary: Option<DataPreset>,
    pub refinements: Vec<usize>,
    pub regularization: Vec<usize>,
    pub eps0: f64,
    pub ladder: usize,
}

struct Defaults {
    cells: usize,
    final_time: f64,
    refinements: &'static [usize],
}

fn defaults(s: Scenario) -> Defaults {
    let d = |cells, final_time, refinements| Defaults { cells, final_time, refinements };
    match s {
        Scenario::Constant1d => d(32, 0.5, &[]),
        Scenario::RiemannShock1d | Scenario::RiemannRarefaction1d => d(512, 0.5, &[64, 128, 256, 512]),
        Scenario::AdvectionStep1d => d(256, 0.4, &[64, 128, 256, 512]),
        Scenario::Shear2d => d(64, 0.5, &[32, 64, 128]),
        Scenario::Rotation2d => d(64, 1.0, &[32, 64, 128]),
        Scenario::Kk1d => d(256, 0.4, &[64, 128, 256]),
        Scenario::Kk2d => d(64, 0.25, &[64, 128, 256]),
        Scenario::Regularize1d => d(256, 0.5, &[]),
        Scenario::Regularize2d => d(64, 0.125, &[]),
        Scenario::StabilityShear2d => d(64, 0.5, &[]),
    }
}

impl Settings {
    /// Resolves `config`, scaling every cell count by `2^refine`.
    pub fn resolve(config: &ExperimentConfig, refine: u32) -> Settings {
        let scenario = config.scenario();
        let d = defaults(scenario);
        let scale = 1usize << refine;
        let cells = config.grid.cells.clone().unwrap_or_else(|| vec![d.cells; scenario.dim()]);
        let mut refinements = config.study.refinements.clone().unwrap_or_else(|| d.refinements.to_vec());
        if refinements.is_empty() {
            refinements.push(cells[0]);
        }
        Settings {
            scenario,
            seed: config.experiment.seed,
            cells: cells.iter().map(|n| n * scale).collect(),
            cfl: config.solver.cfl.unwrap_or(0.45),
            final_time: config.solver.final_time.unwrap_or(d.final_time),
            stride: config.solver.snapshot_stride,
            flux: config.flux.clone().unwrap_or(FluxPreset::Burgers {}),
            initial: config.data.initial.clone(),
            boundary: config.data.boundary.clone(),
            refinements: refinements.iter().map(|n| n * scale).collect(),
            regularization: config.study.regularization.clone().unwrap_or_else(|| vec![4, 8, 16, 32]),
            eps0: config.study.eps0.unwrap_or(1.0),
            ladder: config.study.ladder.unwrap_or(5),
        }
    }

    pub fn grid(&self) -> Result<Grid, HarnessError> {
        grid_with(self.scenario.dim(), self.cells[0], self.cells.get(1).copied())
    }
}

pub fn grid_with(dim: usize, nx: usize, ny: Option<usize>) -> Result<Grid, HarnessError> {
    Ok(if dim == 1 { Grid::unit_interval(nx)? } else { Grid::unit_square(nx, ny.unwrap_or(nx))? })
}

pub fn flux_family(preset: &FluxPreset, dim: usize) -> Result<FluxFamily, HarnessError> {
    let velocities = match preset {
        FluxPreset::Linear { velocity } => velocity.iter().map(|&c| Velocity::constant(c)).collect(),
        FluxPreset::Burgers {} => (0..dim).map(|_| Velocity::polynomial(vec![0.0, 1.0])).collect(),
        FluxPreset::Rotational {} => vec![
            Velocity::new("cos", f64::cos, |r: f64| -r.sin()),
            Velocity::new("sin", f64::sin, f64::cos),
        ],
        FluxPreset::Polynomial { coefficients } => coefficients.iter().map(|c| Velocity::polynomial(c.clone())).collect(),
    };
    let family = FluxFamily::new(velocities)?;
    if family.dim() != dim {
        return Err(HarnessError::Config(format!("flux preset has {} axes, scenario needs {dim}", family.dim())));
    }
    Ok(family)
}

/// Mass of the 1-d bump `(1 - z^2)^4` on `[-1, 1]`.
const BUMP_MASS: f64 = 256.0 / 315.0;

/// Distribution function of the normalized 1-d bump, 0 below -1 and 1 above 1.
pub fn bump_cdf(z: f64) -> f64 {
    let p = |z: f64| z - 4.0 * z.powi(3) / 3.0 + 6.0 * z.powi(5) / 5.0 - 4.0 * z.powi(7) / 7.0 + z.powi(9) / 9.0;
    (p(z.clamp(-1.0, 1.0)) - p(-1.0)) / BUMP_MASS
}

/// Side length of the lattice carrying random data.
const RANDOM_LATTICE: usize = 16;

/// Point function of a data preset and its component count.
pub fn preset_fn(preset: &DataPreset, dim: usize, seed: u64) -> Result<(usize, PointFn), HarnessError> {
    Ok(match preset {
        DataPreset::Constant { value } => {
            let v = value.to_vec();
            (v.len(), Arc::new(move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&v)))
        }
        DataPreset::Step { left, right, at, axis } => {
            let (l, r, at, axis) = (left.to_vec(), right.to_vec(), *at, *axis);
            if l.len() != r.len() {
                return Err(HarnessError::Config("step sides have different component counts".into()));
            }
            (l.len(), Arc::new(move |x: &[f64], out: &mut [f64]| out.copy_from_slice(if x[axis] < at { &l } else { &r })))
        }
        DataPreset::Bump { center, radius, height, base } => {
            let h = height.to_vec();
            let b = base.as_ref().map(Values::to_vec).unwrap_or_else(|| vec![0.0; h.len()]);
            if b.len() != h.len() {
                return Err(HarnessError::Config("bump height and base have different component counts".into()));
            }
            let (c, r) = (center.clone(), *radius);
            (
                h.len(),
                Arc::new(move |x: &[f64], out: &mut [f64]| {
                    let z2: f64 = c.iter().zip(x).map(|(c, x)| ((x - c) / r).powi(2)).sum();
                    let w = if z2 < 1.0 { (1.0 - z2).powi(4) } else { 0.0 };
                    for j in 0..out.len() {
                        out[j] = b[j] + h[j] * w;
                    }
                }),
            )
        }
        DataPreset::Random { amplitude, seed: own } => {
            let mut rng = ChaCha8Rng::seed_from_u64(own.unwrap_or(seed));
            let amp = *amplitude;
            let count = RANDOM_LATTICE.pow(dim as u32);
            let values: Vec<f64> = (0..count).map(|_| rng.gen_range(-amp..=amp)).collect();
            (
                1,
                Arc::new(move |x: &[f64], out: &mut [f64]| {
                    let mut k = 0;
                    for a in (0..x.len()).rev() {
                        let i = ((x[a].clamp(0.0, 1.0) * RANDOM_LATTICE as f64) as usize).min(RANDOM_LATTICE - 1);
                        k = k * RANDOM_LATTICE + i;
                    }
                    out[0] = values[k];
                }),
            )
        }
    })
}

pub fn cell_field(f: &PointFn, grid: Grid, m: usize) -> Result<CellField, HarnessError> {
    let f = f.clone();
    Ok(CellField::from_vector_fn(grid, m, move |x, out| f(x, out))?)
}

/// Face data sampled at face centers, constant in time.
pub fn face_data(f: &PointFn, dim: usize, m: usize) -> FaceData {
    let f = f.clone();
    FaceData::new(m, move |face, _, out| f(&face.center[..dim], out))
}

/// Resolves an optional preset, checking its component count.
pub fn data_or(
    preset: &Option<DataPreset>,
    fallback: DataPreset,
    dim: usize,
    seed: u64,
    components: usize,
) -> Result<PointFn, HarnessError> {
    let (m, f) = preset_fn(preset.as_ref().unwrap_or(&fallback), dim, seed)?;
    if m != components {
        return Err(HarnessError::Config(format!("data preset has {m} components, scenario needs {components}")));
    }
    Ok(f)
}

pub fn uniform_times(final_time: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| final_time * k as f64 / steps as f64).collect()
}

/// Uniform levels with `dt <= cfl * dx / speed`.
pub fn cfl_times(grid: &Grid, final_time: f64, cfl: f64, speed: f64) -> Vec<f64> {
    let dt = cfl * grid.min_dx() / speed.max(1e-300);
    uniform_times(final_time, ((final_time / dt).ceil() as usize).max(1))
}

/// Unit density moved at unit speed along the axis.
pub fn advection_record(n: usize, final_time: f64, cfl: f64) -> Result<DensityFluxRecord, HarnessError> {
    let grid = Grid::unit_interval(n)?;
    let times = cfl_times(&grid, final_time, cfl, 1.0);
    Ok(DensityFluxRecord::from_momentum(CellField::constant(grid, &[1.0]), times, |_, _, _| 1.0)?)
}

/// Unit density sheared by `b = (y, 0)`.
pub fn shear_record(n: usize, final_time: f64, cfl: f64) -> Result<DensityFluxRecord, HarnessError> {
    let grid = Grid::unit_square(n, n)?;
    let times = cfl_times(&grid, final_time, cfl, 1.0);
    Ok(DensityFluxRecord::from_stream_function(CellField::constant(grid, &[1.0]), times, |_, x| 0.5 * x[1] * x[1])?)
}

/// Unit density in rigid rotation `b = (-(y - 1/2), x - 1/2)`.
pub fn rotation_record(n: usize, final_time: f64, cfl: f64) -> Result<DensityFluxRecord, HarnessError> {
    let grid = Grid::unit_square(n, n)?;
    // each velocity component is at most 1/2, so dt <= dx keeps upwinding positive
    let times = cfl_times(&grid, final_time, cfl, 1.0);
    Ok(DensityFluxRecord::from_stream_function(CellField::constant(grid, &[1.0]), times, |_, x| {
        -0.5 * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))
    })?)
}

/// Compressible 1-d record: a travelling momentum wave over a modulated density.
pub fn regularize_1d_record(n: usize, final_time: f64, cfl: f64) -> Result<DensityFluxRecord, HarnessError> {
    let grid = Grid::unit_interval(n)?;
    let rho0 = CellField::from_fn(grid, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin())?;
    let times = cfl_times(&grid, final_time, cfl, 1.0);
    Ok(DensityFluxRecord::from_momentum(rho0, times, |t, x, _| 0.6 + 0.1 * (2.0 * PI * (x[0] - t)).cos())?)
}

/// 2-d record from a time-dependent stream function mixing rotation and a cellular mode.
pub fn regularize_2d_record(n: usize, final_time: f64, cfl: f64) -> Result<DensityFluxRecord, HarnessError> {
    let grid = Grid::unit_square(n, n)?;
    let times = cfl_times(&grid, final_time, cfl, 1.0);
    Ok(DensityFluxRecord::from_stream_function(CellField::constant(grid, &[1.0]), times, |t, x| {
        0.5 * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) + 0.1 * (PI * x[0]).sin() * (PI * x[1]).sin() * (1.0 + t)
    })?)
}

/// A density that oscillates in time with no flux at all: continuity fails everywhere.
pub fn negative_control_pair(grid: Grid, times: &[f64]) -> Result<SpaceTimePair, HarnessError> {
    let dim = grid.dim();
    let densities = times
        .iter()
        .map(|&t| CellField::from_fn(grid, |x| 1.0 + 0.5 * (2.0 * PI * (x[0] + t)).sin() * if dim > 1 { (PI * x[1]).cos() } else { 1.0 }))
        .collect::<Result<Vec<_>, _>>()?;
    let faces = grid.interior_face_count();
    let bfaces = grid.boundary_faces().len();
    let steps = (1..times.len()).map(|_| RecordStep { interior_flux: vec![0.0; faces], boundary_flux: vec![0.0; bfaces] }).collect();
    Ok(SpaceTimePair::from_fields(times.to_vec(), densities, steps)?)
}

/// Density/boundary data of the scalar Riemann scenarios.
pub fn riemann_problem(n: usize, flux: &FluxFamily, left: f64, right: f64, at: f64, final_time: f64) -> Result<ScalarIBVP, HarnessError> {
    let grid = Grid::unit_interval(n)?;
    let initial = CellField::from_fn(grid, |x| if x[0] < at { left } else { right })?;
    let boundary = FaceData::scalar(move |f, _| if f.center[0] < at { left } else { right });
    Ok(ScalarIBVP::new(flux.clone(), initial, boundary, final_time)?)
}

/// Three-component 1-d data: two directions separated by a vacuum gap.
pub fn kk_1d_data(n: usize, flux: &FluxFamily, final_time: f64) -> Result<KKData, HarnessError> {
    let grid = Grid::unit_interval(n)?;
    let initial = CellField::from_vector_fn(grid, 3, |x, out| {
        let v = if x[0] < 0.3 {
            [0.6, 0.8, 0.0]
        } else if x[0] < 0.45 {
            [0.0, 0.0, 0.0]
        } else {
            [0.0, 0.3, -0.4]
        };
        out.copy_from_slice(&v);
    })?;
    let boundary = FaceData::new(3, |f, _, out| {
        let v = if f.center[0] < 0.5 { [0.8, 0.0, 0.6] } else { [0.0, 0.3, -0.4] };
        out.copy_from_slice(&v);
    });
    Ok(KKData::new(flux.clone(), initial, boundary, final_time)?)
}

/// Three-component 2-d data: a rotating direction field over a bump modulus.
pub fn kk_2d_data(n: usize, flux: &FluxFamily, final_time: f64) -> Result<KKData, HarnessError> {
    let grid = Grid::unit_square(n, n)?;
    let modulus = |x: &[f64]| {
        let z2 = ((x[0] - 0.4).powi(2) + (x[1] - 0.4).powi(2)) / 0.09;
        0.2 + if z2 < 1.0 { 0.8 * (1.0 - z2).powi(4) } else { 0.0 }
    };
    let initial = CellField::from_vector_fn(grid, 3, move |x, out| {
        let r = modulus(x);
        let a = 2.0 * PI * x[0];
        let c = if x[1] < 0.5 { 0.6 } else { -0.6 };
        out[0] = r * 0.8 * a.cos();
        out[1] = r * 0.8 * a.sin();
        out[2] = r * c;
    })?;
    let boundary = FaceData::new(3, |_, _, out| out.copy_from_slice(&[0.12, 0.0, 0.16]));
    Ok(KKData::new(flux.clone(), initial, boundary, final_time)?)
}

/// The velocity profile of the stability shear, mollified at scale `eps`
/// (`eps = 0` gives the step itself).
pub fn shear_profile(y: f64, eps: f64) -> f64 {
    let (low, high) = (0.25, 1.0);
    let w = if eps > 0.0 { bump_cdf((y - 0.5) / eps) } else if y < 0.5 { 0.0 } else { 1.0 };
    low + (high - low) * w
}

/// The initial profile of the stability study, mollified at scale `eps`.
pub fn stability_initial(x: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        1.0 - bump_cdf((x - 0.5) / eps)
    } else if x < 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Unit density driven by the shear `(profile(y), 0)` on the given levels.
pub fn profile_record(n: usize, times: Vec<f64>, eps: f64) -> Result<DensityFluxRecord, HarnessError> {
    let grid = Grid::unit_square(n, n)?;
    Ok(DensityFluxRecord::from_momentum(CellField::constant(grid, &[1.0]), times, move |_, x, axis| {
        if axis == 0 {
            shear_profile(x[1], eps)
        } else {
            0.0
        }
    })?)
}

/// Point of `[0, 1]^d` as an array.
pub fn point(x: &[f64]) -> [f64; MAX_DIM] {
    let mut p = [0.0; MAX_DIM];
    p[..x.len()].copy_from_slice(x);
    p
}
