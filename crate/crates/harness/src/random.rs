//! Seeded random problems for the property suites.

use fvlab_core::claw::{solve_claw, FluxFamily, ScalarIBVP, Velocity};
use fvlab_core::grid::{CellField, Grid};
use fvlab_core::{FaceData, Result};
use fvlab_core::transport::DensityFluxRecord;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random grid: 1-d with up to 128 cells, 2-d with up to 24 per axis.
pub fn grid(rng: &mut ChaCha8Rng, dim: usize) -> Grid {
    if dim == 1 {
        Grid::unit_interval(rng.gen_range(8..=128)).expect("valid grid")
    } else {
        Grid::unit_square(rng.gen_range(4..=24), rng.gen_range(4..=24)).expect("valid grid")
    }
}

fn velocity(rng: &mut ChaCha8Rng) -> Velocity {
    let degree = rng.gen_range(0..=2);
    Velocity::polynomial((0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

pub fn flux_family(rng: &mut ChaCha8Rng, dim: usize) -> FluxFamily {
    FluxFamily::new((0..dim).map(|_| velocity(rng)).collect()).expect("one or two axes")
}

/// Piecewise-constant non-negative density with a few vacuum pieces.
pub fn density(rng: &mut ChaCha8Rng, grid: Grid) -> CellField {
    let dim = grid.dim();
    let pieces = rng.gen_range(1..=4);
    let cuts: Vec<[f64; 2]> = (0..pieces).map(|_| [rng.gen(), rng.gen()]).collect();
    let values: Vec<f64> =
        (0..pieces).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.1..2.0) }).collect();
    CellField::from_fn(grid, |x| {
        // nearest cut point decides the piece
        let mut best = (f64::INFINITY, 0);
        for (k, c) in cuts.iter().enumerate() {
            let d: f64 = (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum();
            if d < best.0 {
                best = (d, k);
            }
        }
        values[best.1]
    })
    .expect("finite density")
}

/// Bounded data with `m` components in `[-amp, amp]`, one value per cell.
pub fn cell_data(rng: &mut ChaCha8Rng, grid: Grid, m: usize, amp: f64) -> CellField {
    let values = (0..m * grid.cell_count()).map(|_| rng.gen_range(-amp..=amp)).collect();
    CellField::new(grid, m, values).expect("finite data")
}

/// Time-dependent face data `a_f + b_f sin(w t)` with `|a_f| + |b_f| <= amp`.
pub fn face_data(rng: &mut ChaCha8Rng, grid: Grid, m: usize, amp: f64) -> FaceData {
    let faces = grid.boundary_faces().len();
    let coeffs: Vec<(f64, f64)> = (0..faces * m)
        .map(|_| {
            let a = rng.gen_range(-amp..=amp);
            let b = rng.gen_range(0.0..=amp - a.abs());
            (a, b)
        })
        .collect();
    let w = rng.gen_range(1.0..10.0);
    FaceData::new(m, move |face, t, out| {
        for (j, o) in out.iter_mut().enumerate() {
            let (a, b) = coeffs[face.id * m + j];
            *o = a + b * (w * t).sin();
        }
    })
}

/// Flux record of a random scalar solve, possibly with vacuum.
pub fn claw_record(rng: &mut ChaCha8Rng, dim: usize) -> Result<DensityFluxRecord> {
    let grid = grid(rng, dim);
    let flux = flux_family(rng, dim);
    let initial = density(rng, grid);
    let faces = grid.boundary_faces().len();
    let states: Vec<f64> = (0..faces).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..2.0) }).collect();
    let boundary = FaceData::scalar(move |face, _| states[face.id]);
    let final_time = rng.gen_range(0.05..0.4);
    let cfl = rng.gen_range(0.2..0.9);
    let problem = ScalarIBVP::new(flux, initial, boundary, final_time)?;
    DensityFluxRecord::from_claw(&solve_claw(&problem, cfl)?)
}

/// Divergence-free record on a constant density from a random stream function.
pub fn stream_record(rng: &mut ChaCha8Rng) -> Result<DensityFluxRecord> {
    let grid = grid(rng, 2);
    let modes: Vec<(f64, f64, f64, f64)> =
        (0..3).map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0), rng.gen_range(0.0..6.3))).collect();
    let psi = move |t: f64, x: &[f64]| -> f64 {
        modes.iter().map(|(a, kx, ky, ph)| a * (kx * x[0] + ph + t).sin() * (ky * x[1]).cos()).sum()
    };
    // each velocity component is at most sum |a| k <= 6
    let rho = rng.gen_range(0.5..2.0);
    let dt = 0.4 * rho * grid.min_dx() / 24.0;
    let steps = rng.gen_range(4..40);
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    DensityFluxRecord::from_stream_function(CellField::constant(grid, &[rho]), times, psi)
}

/// One of the record families above; 2-d records alternate between them.
pub fn record(rng: &mut ChaCha8Rng, dim: usize) -> Result<DensityFluxRecord> {
    if dim == 2 && rng.gen_bool(0.5) {
        stream_record(rng)
    } else {
        claw_record(rng, dim)
    }
}
