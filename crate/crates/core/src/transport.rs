//! Conservative upwind transport `d/dt (rho u) + div(rho u b) = 0` driven by a
//! recorded set of density face fluxes.
//!
//! The transport never sees `b` itself. Every face carries
//! `u_upwind * (mass flux)`, where the mass flux is the one that evolved the
//! density. Because the density update closes exactly on those fluxes,
//! constants are preserved, the scheme is a convex combination of upwind
//! values, and `rho u` obeys the maximum and comparison principles.

use crate::boundary::FaceData;
use crate::claw::ClawSolution;
use crate::error::{invalid, Error, Result};
use crate::grid::{CellField, FaceTopology, Grid, MAX_DIM};

/// Relative tolerance of the per-cell discrete continuity check.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// Vacuum threshold relative to the largest density in a record.
pub const VACUUM_REL: f64 = 1e-12;

/// Dead band, relative to the largest face flux, under which a face counts as characteristic.
pub const SIGN_BAND_REL: f64 = 1e-14;

/// Partition of boundary face-steps by the sign of the outward mass flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceClass {
    /// Mass enters the domain.
    Inflow,
    /// Mass leaves the domain.
    Outflow,
    /// No mass crosses the face (within the dead band).
    Characteristic,
}

impl FaceClass {
    pub fn of(flux: f64, band: f64) -> FaceClass {
        if flux < -band {
            FaceClass::Inflow
        } else if flux > band {
            FaceClass::Outflow
        } else {
            FaceClass::Characteristic
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FaceClass::Inflow => "inflow",
            FaceClass::Outflow => "outflow",
            FaceClass::Characteristic => "characteristic",
        }
    }
}

/// Face-integrated mass fluxes of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordStep {
    /// Oriented along `+axis`.
    pub interior_flux: Vec<f64>,
    /// Oriented along the outward normal.
    pub boundary_flux: Vec<f64>,
}

/// Densities at every time level together with the mass fluxes that advance
/// them, validated so that discrete continuity holds cell by cell.
#[derive(Debug, Clone)]
pub struct DensityFluxRecord {
    grid: Grid,
    topo: FaceTopology,
    times: Vec<f64>,
    densities: Vec<CellField>,
    steps: Vec<RecordStep>,
    flux_scale: f64,
    density_scale: f64,
}

impl DensityFluxRecord {
    /// Validates and wraps a record. Rejects records that break discrete
    /// continuity, carry negative densities, or drain a cell of more mass
    /// than it holds within one step.
    pub fn new(times: Vec<f64>, densities: Vec<CellField>, steps: Vec<RecordStep>) -> Result<Self> {
        if densities.is_empty() || times.len() != densities.len() || steps.len() + 1 != densities.len() {
            return invalid(format!(
                "record needs levels = steps + 1 (got {} times, {} densities, {} steps)",
                times.len(),
                densities.len(),
                steps.len()
            ));
        }
        let grid = *densities[0].grid();
        let topo = FaceTopology::new(&grid);
        let mut flux_scale: f64 = 0.0;
        let mut density_scale: f64 = 0.0;
        for (n, rho) in densities.iter().enumerate() {
            if rho.grid() != &grid || rho.components() != 1 {
                return invalid(format!("density {n} does not live on the record grid"));
            }
            if rho.min() < 0.0 {
                return invalid(format!("negative density {} at level {n}", rho.min()));
            }
            density_scale = density_scale.max(rho.max());
        }
        for (n, step) in steps.iter().enumerate() {
            if !(times[n + 1] > times[n]) {
                return invalid(format!("time levels must increase strictly (level {n})"));
            }
            if step.interior_flux.len() != topo.interior.len() || step.boundary_flux.len() != topo.boundary.len() {
                return invalid(format!("step {n} has the wrong number of face fluxes"));
            }
            for v in step.interior_flux.iter().chain(&step.boundary_flux) {
                if !v.is_finite() {
                    return invalid(format!("non-finite mass flux in step {n}"));
                }
                flux_scale = flux_scale.max(v.abs());
            }
        }
        let record = DensityFluxRecord { grid, topo, times, densities, steps, flux_scale, density_scale };
        for n in 0..record.steps.len() {
            record.check_step(n)?;
        }
        Ok(record)
    }

    fn check_step(&self, n: usize) -> Result<()> {
        let cells = self.grid.cell_count();
        let vol = self.grid.cell_volume();
        let dt = self.dt(n);
        let step = &self.steps[n];
        let net = self.topo.net_outflow(cells, &step.interior_flux, &step.boundary_flux);
        let mut outflow = vec![0.0; cells];
        let mut touched = vec![0.0; cells];
        for (f, &flux) in self.topo.interior.iter().zip(&step.interior_flux) {
            touched[f.low] += flux.abs();
            touched[f.high] += flux.abs();
            if flux > 0.0 {
                outflow[f.low] += flux;
            } else {
                outflow[f.high] -= flux;
            }
        }
        for (f, &flux) in self.topo.boundary.iter().zip(&step.boundary_flux) {
            touched[f.cell] += flux.abs();
            outflow[f.cell] += flux.max(0.0);
        }
        let old = self.densities[n].values();
        let new = self.densities[n + 1].values();
        for c in 0..cells {
            let scale = vol * (old[c].abs() + new[c].abs()) + dt * touched[c];
            let defect = (new[c] - old[c]) * vol + dt * net[c];
            if defect.abs() > CONTINUITY_TOL * scale {
                return invalid(format!(
                    "discrete continuity fails in cell {c} of step {n}: defect {defect:e}, scale {scale:e}"
                ));
            }
            if dt * outflow[c] > old[c] * vol + CONTINUITY_TOL * scale {
                return invalid(format!(
                    "step {n} drains cell {c} of more mass than it holds (outflow {:e}, mass {:e})",
                    dt * outflow[c],
                    old[c] * vol
                ));
            }
        }
        Ok(())
    }

    /// Wraps the face fluxes of a scalar solve; `F(rho) rho` is the mass flux.
    pub fn from_claw(sol: &ClawSolution) -> Result<Self> {
        let steps = sol
            .interior_flux
            .iter()
            .zip(&sol.boundary_flux)
            .map(|(i, b)| RecordStep { interior_flux: i.clone(), boundary_flux: b.clone() })
            .collect();
        Self::new(sol.times.clone(), sol.snapshots.clone(), steps)
    }

    /// Builds a record from a prescribed momentum field `m(t, x, axis) = (rho b)_axis`,
    /// sampled at face centers at step midpoints; the density is advanced from
    /// `rho0` by the resulting fluxes.
    pub fn from_momentum(rho0: CellField, times: Vec<f64>, momentum: impl Fn(f64, &[f64], usize) -> f64) -> Result<Self> {
        let grid = *rho0.grid();
        let dim = grid.dim();
        let topo = FaceTopology::new(&grid);
        Self::integrate(rho0, times, |t| {
            let interior = topo.interior.iter().map(|f| momentum(t, &f.center[..dim], f.axis) * f.area).collect();
            let boundary = topo
                .boundary
                .iter()
                .map(|f| momentum(t, &f.center[..dim], f.axis) * f.side.sign() * f.area)
                .collect();
            RecordStep { interior_flux: interior, boundary_flux: boundary }
        })
    }

    /// Divergence-free record in 2D from a stream function `psi(t, x)`, with
    /// `rho b = (d psi / dy, -d psi / dx)`. Face fluxes are differences of
    /// `psi` at face corners, so every cell balance telescopes.
    pub fn from_stream_function(rho0: CellField, times: Vec<f64>, psi: impl Fn(f64, &[f64]) -> f64) -> Result<Self> {
        let grid = *rho0.grid();
        if grid.dim() != 2 {
            return invalid("stream functions need a 2-d grid");
        }
        let topo = FaceTopology::new(&grid);
        let corner = |i: usize, j: usize| [grid.lo(0) + i as f64 * grid.dx(0), grid.lo(1) + j as f64 * grid.dx(1)];
        // corner indices (i, j) spanned by a face normal to `axis` whose high side is node (i, j)
        let face_flux = |t: f64, axis: usize, i: usize, j: usize| -> f64 {
            if axis == 0 {
                psi(t, &corner(i, j + 1)) - psi(t, &corner(i, j))
            } else {
                -(psi(t, &corner(i + 1, j)) - psi(t, &corner(i, j)))
            }
        };
        Self::integrate(rho0, times, |t| {
            let interior = topo
                .interior
                .iter()
                .map(|f| {
                    let idx = grid.multi_index(f.high);
                    face_flux(t, f.axis, idx[0], idx[1])
                })
                .collect();
            let boundary = topo
                .boundary
                .iter()
                .map(|f| {
                    let mut idx = grid.multi_index(f.cell);
                    if f.side == crate::grid::Side::High {
                        idx[f.axis] += 1;
                    }
                    face_flux(t, f.axis, idx[0], idx[1]) * f.side.sign()
                })
                .collect();
            RecordStep { interior_flux: interior, boundary_flux: boundary }
        })
    }

    fn integrate(rho0: CellField, times: Vec<f64>, mut fluxes: impl FnMut(f64) -> RecordStep) -> Result<Self> {
        if times.len() < 2 {
            return invalid("a record needs at least two time levels");
        }
        let grid = *rho0.grid();
        let topo = FaceTopology::new(&grid);
        let mut densities = vec![rho0];
        let mut steps = Vec::with_capacity(times.len() - 1);
        for w in times.windows(2) {
            let step = fluxes(0.5 * (w[0] + w[1]));
            let old = densities.last().expect("non-empty").values();
            let new = topo.apply(&grid, old, &step.interior_flux, &step.boundary_flux, w[1] - w[0]);
            densities.push(CellField::new(grid, 1, new)?);
            steps.push(step);
        }
        Self::new(times, densities, steps)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn topology(&self) -> &FaceTopology {
        &self.topo
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, n: usize) -> &RecordStep {
        &self.steps[n]
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn density(&self, n: usize) -> &CellField {
        &self.densities[n]
    }

    pub fn densities(&self) -> &[CellField] {
        &self.densities
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Largest face flux magnitude over the record.
    pub fn flux_scale(&self) -> f64 {
        self.flux_scale
    }

    /// Faces with `|flux|` at or below this value are characteristic.
    pub fn sign_band(&self) -> f64 {
        SIGN_BAND_REL * self.flux_scale
    }

    /// Densities below this value are vacuum; `u` is undefined there.
    pub fn vacuum_threshold(&self) -> f64 {
        VACUUM_REL * self.density_scale
    }

    pub fn classify(&self, n: usize) -> Vec<FaceClass> {
        let band = self.sign_band();
        self.steps[n].boundary_flux.iter().map(|&f| FaceClass::of(f, band)).collect()
    }

    pub fn same_as(&self, other: &DensityFluxRecord) -> bool {
        self.grid == other.grid && self.times == other.times && self.steps == other.steps
    }
}

/// Transport problem: initial datum `u0` (m components) and inflow datum `g`
/// on a density-flux record.
#[derive(Debug, Clone)]
pub struct TransportIBVP<'a> {
    pub record: &'a DensityFluxRecord,
    pub initial: CellField,
    pub inflow: FaceData,
}

impl<'a> TransportIBVP<'a> {
    pub fn new(record: &'a DensityFluxRecord, initial: CellField, inflow: FaceData) -> Result<Self> {
        if initial.grid() != record.grid() {
            return invalid("initial datum does not live on the record grid");
        }
        if inflow.components() != initial.components() {
            return invalid(format!(
                "initial datum has {} components but inflow datum has {}",
                initial.components(),
                inflow.components()
            ));
        }
        Ok(TransportIBVP { record, initial, inflow })
    }

    pub fn components(&self) -> usize {
        self.initial.components()
    }
}

/// Result of one transport step.
#[derive(Debug, Clone)]
pub struct TransportStep {
    pub q: CellField,
    /// Transported boundary flux `Tr(rho u b)`, face-major (`face * m + j`).
    pub boundary_flux: Vec<f64>,
    pub classes: Vec<FaceClass>,
}

/// `u` of a cell at the start of a step; vacuum cells carry no mass out, so
/// their value is never used and is pinned to zero.
fn cell_value(q: &[f64], rho: &[f64], c: usize) -> f64 {
    if rho[c] > 0.0 {
        q[c] / rho[c]
    } else {
        0.0
    }
}

fn interior_transport_flux(record: &DensityFluxRecord, n: usize, q: &CellField, j: usize) -> Vec<f64> {
    let rho = record.density(n).values();
    let qj = q.component(j);
    record
        .topology()
        .interior
        .iter()
        .zip(&record.step(n).interior_flux)
        .map(|(f, &flux)| {
            if flux > 0.0 {
                flux * cell_value(qj, rho, f.low)
            } else if flux < 0.0 {
                flux * cell_value(qj, rho, f.high)
            } else {
                0.0
            }
        })
        .collect()
}

/// One upwind step of `q = rho u` over record step `n`. `inflow` holds the
/// inflow datum on every boundary face, face-major.
pub fn step_transport(q: &CellField, record: &DensityFluxRecord, n: usize, inflow: &[f64]) -> Result<TransportStep> {
    let grid = *record.grid();
    let m = q.components();
    let topo = record.topology();
    if q.grid() != &grid {
        return invalid("transported field does not live on the record grid");
    }
    if n >= record.steps() {
        return invalid(format!("record has {} steps, asked for step {n}", record.steps()));
    }
    if inflow.len() != topo.boundary.len() * m {
        return invalid("inflow datum has the wrong length");
    }
    record.check_step(n)?;

    let rho_old = record.density(n).values();
    let rho_new = record.density(n + 1).values();
    let classes = record.classify(n);
    let mass = &record.step(n).boundary_flux;
    let mut boundary_flux = vec![0.0; topo.boundary.len() * m];
    let mut values = Vec::with_capacity(q.values().len());
    for j in 0..m {
        let qj = q.component(j);
        let interior = interior_transport_flux(record, n, q, j);
        let mut boundary = vec![0.0; topo.boundary.len()];
        for (b, f) in topo.boundary.iter().enumerate() {
            boundary[b] = match classes[b] {
                FaceClass::Inflow => inflow[b * m + j] * mass[b],
                FaceClass::Outflow => cell_value(qj, rho_old, f.cell) * mass[b],
                FaceClass::Characteristic => 0.0,
            };
            boundary_flux[b * m + j] = boundary[b];
        }
        let mut new = topo.apply(&grid, qj, &interior, &boundary, record.dt(n));
        for (v, &r) in new.iter_mut().zip(rho_new) {
            if r == 0.0 {
                *v = 0.0;
            }
        }
        values.extend(new);
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Fault(format!("non-finite transported value at position {pos} in step {n}")));
    }
    Ok(TransportStep { q: CellField::new(grid, m, values)?, boundary_flux, classes })
}

/// Snapshots of `q = rho u` and the boundary traces produced by the scheme.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub times: Vec<f64>,
    pub q: Vec<CellField>,
    /// Per step, `Tr(rho u b)` face-major (`face * m + j`), integrated over face area.
    pub boundary_flux: Vec<Vec<f64>>,
    pub classes: Vec<Vec<FaceClass>>,
    /// Per step, the inflow datum evaluated on every face, face-major.
    pub inflow: Vec<Vec<f64>>,
    /// Bound `max(|u0|_inf, |g|_inf)` over the data actually used.
    pub data_bound: f64,
}

impl TransportSolution {
    pub fn components(&self) -> usize {
        self.q[0].components()
    }

    pub fn grid(&self) -> &Grid {
        self.q[0].grid()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// `(rho u)_0`, the initial trace.
    pub fn initial_trace(&self) -> &CellField {
        &self.q[0]
    }

    pub fn final_state(&self) -> &CellField {
        self.q.last().expect("non-empty")
    }

    /// `u = q / rho` at level `n` where `rho >= eps_vac`; `None` marks vacuum.
    pub fn recovered(&self, record: &DensityFluxRecord, n: usize) -> Vec<Option<f64>> {
        let eps = record.vacuum_threshold();
        let rho = record.density(n).values();
        let cells = rho.len();
        let q = self.q[n].values();
        (0..q.len())
            .map(|k| {
                let r = rho[k % cells];
                if r >= eps && r > 0.0 {
                    Some(q[k] / r)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Largest `|u|` over all levels and non-vacuum cells.
    pub fn recovered_linf(&self, record: &DensityFluxRecord) -> f64 {
        (0..self.q.len())
            .flat_map(|n| self.recovered(record, n))
            .flatten()
            .fold(0.0, |m, u| m.max(u.abs()))
    }

    /// Interior transported fluxes of step `n`, recomputed from the snapshot
    /// exactly as the scheme computed them; layout `j * faces + f`.
    pub fn interior_flux(&self, record: &DensityFluxRecord, n: usize) -> Vec<f64> {
        (0..self.components()).flat_map(|j| interior_transport_flux(record, n, &self.q[n], j)).collect()
    }

    /// Largest relative mass-closure defect of `q` over all steps and components.
    pub fn mass_defect(&self, record: &DensityFluxRecord) -> f64 {
        let faces = record.topology().boundary.len();
        let m = self.components();
        let mut worst: f64 = 0.0;
        for n in 0..self.steps() {
            for j in 0..m {
                let flux: Vec<f64> = (0..faces).map(|b| self.boundary_flux[n][b * m + j]).collect();
                worst = worst.max(crate::grid::mass_closure_defect(
                    self.grid(),
                    self.q[n].component(j),
                    self.q[n + 1].component(j),
                    &flux,
                    record.dt(n),
                ));
            }
        }
        worst
    }

    fn matches(&self, record: &DensityFluxRecord) -> bool {
        self.grid() == record.grid() && self.times == record.times()
    }
}

/// Iterates [`step_transport`] over the whole record. The initial trace is
/// `(rho u)_0 = u0 rho_0`, and inflow data are evaluated at the start of each step.
pub fn solve_transport(problem: &TransportIBVP<'_>) -> Result<TransportSolution> {
    let record = problem.record;
    let grid = *record.grid();
    let m = problem.components();
    let cells = grid.cell_count();
    let rho0 = record.density(0).values();
    let mut q0 = vec![0.0; cells * m];
    for j in 0..m {
        for c in 0..cells {
            if rho0[c] != 0.0 {
                q0[j * cells + c] = problem.initial.get(j, c) * rho0[c];
            }
        }
    }
    let mut sol = TransportSolution {
        times: record.times().to_vec(),
        q: vec![CellField::new(grid, m, q0)?],
        boundary_flux: Vec::with_capacity(record.steps()),
        classes: Vec::with_capacity(record.steps()),
        inflow: Vec::with_capacity(record.steps()),
        data_bound: problem.initial.linf_norm(),
    };
    for n in 0..record.steps() {
        let g = problem.inflow.eval_all(&record.topology().boundary, record.times()[n]);
        let classes = record.classify(n);
        for (b, class) in classes.iter().enumerate() {
            if *class == FaceClass::Inflow {
                for j in 0..m {
                    let v = g[b * m + j];
                    if !v.is_finite() {
                        return invalid(format!("inflow datum {v} on face {b} at step {n} is not finite"));
                    }
                    sol.data_bound = sol.data_bound.max(v.abs());
                }
            }
        }
        let step = step_transport(sol.final_state(), record, n, &g)?;
        sol.q.push(step.q);
        sol.boundary_flux.push(step.boundary_flux);
        sol.classes.push(step.classes);
        sol.inflow.push(g);
    }
    Ok(sol)
}

/// Smallest `q1 - q2` over all levels, cells and components.
///
/// Both solutions must come from the same record; with ordered data the
/// result is non-negative up to round-off.
pub fn comparison_check(sol1: &TransportSolution, sol2: &TransportSolution) -> Result<f64> {
    if sol1.times != sol2.times || sol1.grid() != sol2.grid() || sol1.components() != sol2.components() {
        return invalid("solutions were not computed on the same record");
    }
    Ok(sol1
        .q
        .iter()
        .zip(&sol2.q)
        .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| x - y))
        .fold(f64::INFINITY, f64::min))
}

/// A smooth test function with its derivatives.
pub trait TestFunction {
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64;
    fn gradient(&self, t: f64, x: &[f64]) -> [f64; MAX_DIM];
}

/// Quadrature of the weak identity
/// `int int rho u (psi_t + b . grad psi) - int_Gamma Tr(rho u b) psi + int psi(0) (rho u)_0`,
/// returning the largest magnitude over components. The flux term uses the
/// scheme's face fluxes; it vanishes as the grid is refined.
pub fn weak_residual(sol: &TransportSolution, record: &DensityFluxRecord, psi: &dyn TestFunction) -> Result<f64> {
    if !sol.matches(record) {
        return invalid("solution was not computed on this record");
    }
    let grid = *record.grid();
    let dim = grid.dim();
    let cells = grid.cell_count();
    let vol = grid.cell_volume();
    let topo = record.topology();
    let m = sol.components();
    let faces = topo.interior.len();
    let mut residual = vec![0.0; m];
    for c in 0..cells {
        let x = grid.cell_center(c);
        let p = psi.value(0.0, &x[..dim]);
        for (j, r) in residual.iter_mut().enumerate() {
            *r += vol * sol.q[0].get(j, c) * p;
        }
    }
    for n in 0..record.steps() {
        let t = record.times()[n];
        let dt = record.dt(n);
        let q = &sol.q[n];
        let interior = sol.interior_flux(record, n);
        for c in 0..cells {
            let x = grid.cell_center(c);
            let pt = psi.time_derivative(t, &x[..dim]);
            for (j, r) in residual.iter_mut().enumerate() {
                *r += dt * vol * q.get(j, c) * pt;
            }
        }
        for (k, f) in topo.interior.iter().enumerate() {
            let g = psi.gradient(t, &f.center[..dim])[f.axis] * grid.dx(f.axis);
            for (j, r) in residual.iter_mut().enumerate() {
                *r += dt * interior[j * faces + k] * g;
            }
        }
        for (b, f) in topo.boundary.iter().enumerate() {
            let x = &f.center[..dim];
            let g = psi.gradient(t, x)[f.axis] * 0.5 * grid.dx(f.axis) * f.side.sign();
            let p = psi.value(t, x);
            for (j, r) in residual.iter_mut().enumerate() {
                let tr = sol.boundary_flux[n][b * m + j];
                *r += dt * tr * (g - p);
            }
        }
    }
    Ok(residual.iter().fold(0.0, |a, r| a.max(r.abs())))
}

/// Discrete residual of the quadratic entropy inequality
/// `d/dt (rho |u|^2) + div(rho b |u|^2) <= 0` tested against `psi >= 0`.
///
/// Upwinding makes every cell update a convex combination, so by Jensen the
/// cellwise inequality holds exactly and the residual is non-negative up to
/// round-off.
pub fn quadratic_entropy_residual(
    sol: &TransportSolution,
    record: &DensityFluxRecord,
    psi: impl Fn(f64, &[f64]) -> f64,
) -> Result<f64> {
    if !sol.matches(record) {
        return invalid("solution was not computed on this record");
    }
    let grid = *record.grid();
    let dim = grid.dim();
    let cells = grid.cell_count();
    let vol = grid.cell_volume();
    let topo = record.topology();
    let m = sol.components();
    let levels = sol.q.len();
    let psi_at: Vec<Vec<f64>> = sol
        .times
        .iter()
        .map(|&t| (0..cells).map(|c| psi(t, &grid.cell_center(c)[..dim])).collect())
        .collect();
    if let Some(v) = psi_at.iter().flatten().find(|v| !(**v >= 0.0)) {
        return invalid(format!("test function takes the value {v}"));
    }
    let energy = |n: usize, c: usize| -> f64 {
        let r = record.density(n).values()[c];
        if r > 0.0 {
            (0..m).map(|j| sol.q[n].get(j, c).powi(2)).sum::<f64>() / r
        } else {
            0.0
        }
    };
    let last = levels - 1;
    let mut total = 0.0;
    for c in 0..cells {
        total += vol * (psi_at[0][c] * energy(0, c) - psi_at[last][c] * energy(last, c));
    }
    for n in 1..levels {
        for c in 0..cells {
            total += vol * energy(n, c) * (psi_at[n][c] - psi_at[n - 1][c]);
        }
    }
    for n in 0..record.steps() {
        let rho = record.density(n).values();
        let step = record.step(n);
        let p = &psi_at[n];
        let mut spatial = 0.0;
        for (f, &flux) in topo.interior.iter().zip(&step.interior_flux) {
            let up = if flux > 0.0 { f.low } else { f.high };
            let u2: f64 = (0..m).map(|j| cell_value(sol.q[n].component(j), rho, up).powi(2)).sum();
            spatial += flux * u2 * (p[f.high] - p[f.low]);
        }
        for (b, f) in topo.boundary.iter().enumerate() {
            let flux = step.boundary_flux[b];
            let u2: f64 = match sol.classes[n][b] {
                FaceClass::Inflow => (0..m).map(|j| sol.inflow[n][b * m + j].powi(2)).sum(),
                FaceClass::Outflow => (0..m).map(|j| cell_value(sol.q[n].component(j), rho, f.cell).powi(2)).sum(),
                FaceClass::Characteristic => 0.0,
            };
            spatial -= p[f.cell] * flux * u2;
        }
        total += record.dt(n) * spatial;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_times(t_end: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect()
    }

    fn advection_record(n: usize, t_end: f64) -> DensityFluxRecord {
        let grid = Grid::unit_interval(n).unwrap();
        let steps = (t_end / (0.45 / n as f64)).ceil() as usize;
        DensityFluxRecord::from_momentum(CellField::constant(grid, &[1.0]), uniform_times(t_end, steps), |_, _, _| 1.0)
            .unwrap()
    }

    #[test]
    fn constants_are_preserved() {
        let record = advection_record(20, 0.5);
        let p = TransportIBVP::new(&record, CellField::constant(*record.grid(), &[0.7]), FaceData::constant(&[0.7]))
            .unwrap();
        let sol = solve_transport(&p).unwrap();
        for q in &sol.q {
            assert!(q.values().iter().all(|&v| (v - 0.7).abs() < 1e-14));
        }
    }

    #[test]
    fn no_flux_freezes_data() {
        let grid = Grid::unit_square(6, 5).unwrap();
        let record = DensityFluxRecord::from_momentum(CellField::constant(grid, &[1.0]), uniform_times(1.0, 7), |_, _, _| 0.0)
            .unwrap();
        let u0 = CellField::from_fn(grid, |x| x[0] - 2.0 * x[1]).unwrap();
        let sol = solve_transport(&TransportIBVP::new(&record, u0.clone(), FaceData::constant(&[5.0])).unwrap()).unwrap();
        for q in &sol.q {
            assert_eq!(q, &u0);
        }
        assert!(sol.classes.iter().flatten().all(|c| *c == FaceClass::Characteristic));
    }

    #[test]
    fn vacuum_carries_nothing() {
        let grid = Grid::unit_interval(10).unwrap();
        let rho0 = CellField::from_fn(grid, |x| if x[0] < 0.5 { 0.0 } else { 1.0 }).unwrap();
        // fluxes pointing right, zero in the vacuum half
        let record = DensityFluxRecord::from_momentum(rho0, uniform_times(0.05, 10), |_, x, _| if x[0] > 0.5 { 1.0 } else { 0.0 })
            .unwrap();
        let u0 = CellField::from_fn(grid, |x| 3.0 + x[0]).unwrap();
        let sol = solve_transport(&TransportIBVP::new(&record, u0, FaceData::constant(&[1.0])).unwrap()).unwrap();
        for q in &sol.q {
            for c in 0..5 {
                assert_eq!(q.values()[c].to_bits(), 0.0f64.to_bits());
            }
        }
    }

    #[test]
    fn rejects_broken_continuity() {
        let grid = Grid::unit_interval(4).unwrap();
        let rho = CellField::constant(grid, &[1.0]);
        let step = RecordStep { interior_flux: vec![0.0, 0.1, 0.0], boundary_flux: vec![0.0, 0.0] };
        let err = DensityFluxRecord::new(vec![0.0, 0.1], vec![rho.clone(), rho], vec![step]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_draining_step() {
        let grid = Grid::unit_interval(4).unwrap();
        // a huge step empties cells past zero
        let res = DensityFluxRecord::from_momentum(CellField::constant(grid, &[1.0]), vec![0.0, 1.0], |_, _, _| 1.0);
        assert!(res.is_err());
    }

    #[test]
    fn inflow_trace_is_datum_times_mass_flux() {
        let record = advection_record(16, 0.3);
        let u0 = CellField::constant(*record.grid(), &[0.0]);
        let sol = solve_transport(&TransportIBVP::new(&record, u0, FaceData::constant(&[2.5])).unwrap()).unwrap();
        for n in 0..record.steps() {
            assert_eq!(sol.classes[n][0], FaceClass::Inflow);
            assert_eq!(sol.boundary_flux[n][0], 2.5 * record.step(n).boundary_flux[0]);
        }
    }

    #[test]
    fn comparison_rejects_mismatched_records() {
        let r1 = advection_record(8, 0.2);
        let r2 = advection_record(8, 0.3);
        let s1 = solve_transport(&TransportIBVP::new(&r1, CellField::constant(*r1.grid(), &[0.0]), FaceData::constant(&[0.0])).unwrap())
            .unwrap();
        let s2 = solve_transport(&TransportIBVP::new(&r2, CellField::constant(*r2.grid(), &[0.0]), FaceData::constant(&[0.0])).unwrap())
            .unwrap();
        assert!(comparison_check(&s1, &s2).is_err());
        assert_eq!(comparison_check(&s1, &s1).unwrap(), 0.0);
    }

    #[test]
    fn stream_function_record_is_divergence_free() {
        let grid = Grid::unit_square(8, 8).unwrap();
        let record = DensityFluxRecord::from_stream_function(CellField::constant(grid, &[1.0]), uniform_times(0.1, 5), |_, x| {
            (3.0 * x[0]).sin() * (2.0 * x[1]).cos()
        })
        .unwrap();
        for rho in record.densities() {
            assert!(rho.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        }
    }
}
