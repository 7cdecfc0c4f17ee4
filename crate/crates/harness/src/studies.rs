//! Convergence, regularization and stability studies over the canned scenarios.

use fvlab_core::claw::{entropy_residual, exact_riemann, solve_claw, ClawSolution, FluxFamily, ScalarFlux, ScalarIBVP};
use fvlab_core::grid::{CellField, MAX_DIM};
use fvlab_core::kk::{entropy_pair_check, solve_kk, split_data, KKData, KKState, RadialEntropy};
use fvlab_core::regularize::{
    characteristics_solve, indicator_convergence_study, mollify_pair, FaceLabels, MollifierSpec, Sample, SpaceTimePair,
};
use fvlab_core::trace::{extract_traces, hyperplane_trace};
use fvlab_core::transport::{
    quadratic_entropy_residual, solve_transport, weak_residual, DensityFluxRecord, FaceClass, TestFunction, TransportIBVP, TransportSolution,
};
use fvlab_core::FaceData;

use crate::error::HarnessError;
use crate::scenarios::{self, PointFn};

/// Mass, maximum-principle and entropy diagnostics of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub mass_residual: f64,
    /// `max(0, -margin)` of the relevant maximum principle.
    pub max_principle_violation: f64,
    pub entropy_residual: f64,
    /// `max(0, -entropy_residual)`.
    pub entropy_violation: f64,
}

impl Diagnostics {
    fn new(mass_residual: f64, margin: f64, entropy_residual: f64) -> Self {
        Diagnostics {
            mass_residual,
            max_principle_violation: (-margin).max(0.0),
            entropy_residual,
            entropy_violation: (-entropy_residual).max(0.0),
        }
    }

    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("mass_residual", self.mass_residual),
            ("max_principle_violation", self.max_principle_violation),
            ("entropy_residual", self.entropy_residual),
            ("entropy_violation", self.entropy_violation),
        ]
    }
}

/// Space-time weight `(1 - (t/T)^2)^2` times a bump on the middle of the domain.
fn interior_weight(final_time: f64) -> impl Fn(f64, &[f64]) -> f64 + Copy {
    move |t: f64, x: &[f64]| {
        let z2: f64 = x.iter().map(|x| ((x - 0.5) / 0.4).powi(2)).sum();
        let s = if z2 < 1.0 { (1.0 - z2).powi(4) } else { 0.0 };
        let tau = if final_time > 0.0 { (t / final_time).min(1.0) } else { 0.0 };
        s * (1.0 - tau * tau).powi(2)
    }
}

pub fn claw_diagnostics(problem: &ScalarIBVP, sol: &ClawSolution) -> Result<Diagnostics, HarnessError> {
    let (lo, hi) = sol.data_range();
    let ks: Vec<f64> = (0..=16).map(|i| lo - 0.1 + (hi - lo + 0.2) * i as f64 / 16.0).collect();
    let entropy = entropy_residual(sol, problem, &ks, interior_weight(problem.final_time))?;
    Ok(Diagnostics::new(sol.mass_defect(), sol.max_principle_margin(), entropy))
}

pub fn transport_diagnostics(record: &DensityFluxRecord, sol: &TransportSolution) -> Result<Diagnostics, HarnessError> {
    let entropy = quadratic_entropy_residual(sol, record, |_, _| 1.0)?;
    let margin = sol.data_bound - sol.recovered_linf(record);
    Ok(Diagnostics::new(sol.mass_defect(record), margin, entropy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiemannRow {
    pub n: usize,
    pub dx: f64,
    pub l1_error: f64,
    /// Distance of the computed front to the exact shock, shocks only.
    pub front_error: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// The finest problem of a study with its solution.
pub type RiemannRun = (ScalarIBVP, ClawSolution);

/// Refinement study of a 1-d Riemann problem against the exact solution.
pub fn riemann_study(
    flux: &FluxFamily,
    left: f64,
    right: f64,
    at: f64,
    final_time: f64,
    cfl: f64,
    refinements: &[usize],
) -> Result<(Vec<RiemannRow>, Option<RiemannRun>), HarnessError> {
    let g = flux.axis(0);
    // characteristics collide, so for a convex flux the exact solution is a single shock
    let shock = g.derivative(left) > g.derivative(right);
    let mut rows = Vec::with_capacity(refinements.len());
    let mut finest = None;
    for &n in refinements {
        let problem = scenarios::riemann_problem(n, flux, left, right, at, final_time)?;
        let sol = solve_claw(&problem, cfl)?;
        let grid = *sol.grid();
        let dx = grid.dx(0);
        let rho = sol.final_state().values();
        let mut l1 = 0.0;
        for (c, &r) in rho.iter().enumerate() {
            let x = grid.cell_center(c)[0];
            l1 += dx * (r - exact_riemann(&g, left, right, (x - at) / final_time)?).abs();
        }
        let front_error = shock.then(|| {
            let speed = (g.value(left) - g.value(right)) / (left - right);
            let exact = at + speed * final_time;
            let mid = 0.5 * (left + right);
            let crossing = rho.windows(2).position(|w| (w[0] - mid) * (w[1] - mid) <= 0.0 && w[0] != w[1]);
            match crossing {
                Some(i) => {
                    let (x0, x1) = (grid.cell_center(i)[0], grid.cell_center(i + 1)[0]);
                    let w = (mid - rho[i]) / (rho[i + 1] - rho[i]);
                    (x0 + w * (x1 - x0) - exact).abs()
                }
                None => f64::INFINITY,
            }
        });
        rows.push(RiemannRow { n, dx, l1_error: l1, front_error, diagnostics: claw_diagnostics(&problem, &sol)? });
        finest = Some((problem, sol));
    }
    Ok((rows, finest))
}

/// `(1 - (t/T)^2)^4 (1 - |(x - c)/R|^2)^4`, with derivatives.
#[derive(Debug, Clone, Copy)]
pub struct BumpTest {
    pub final_time: f64,
    pub center: [f64; MAX_DIM],
    pub radius: f64,
}

impl BumpTest {
    fn parts(&self, t: f64, x: &[f64]) -> (f64, f64, f64, f64) {
        let tau = t / self.final_time;
        let a = 1.0 - tau * tau;
        let (time, dtime) = if a > 0.0 { (a.powi(4), 4.0 * a.powi(3) * (-2.0 * tau / self.final_time)) } else { (0.0, 0.0) };
        let z2: f64 = x.iter().zip(&self.center).map(|(x, c)| ((x - c) / self.radius).powi(2)).sum();
        let b = 1.0 - z2;
        let (space, dspace) = if b > 0.0 { (b.powi(4), 4.0 * b.powi(3)) } else { (0.0, 0.0) };
        (time, dtime, space, dspace)
    }
}

impl TestFunction for BumpTest {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let (time, _, space, _) = self.parts(t, x);
        time * space
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        let (_, dtime, space, _) = self.parts(t, x);
        dtime * space
    }

    fn gradient(&self, t: f64, x: &[f64]) -> [f64; MAX_DIM] {
        let (time, _, _, dspace) = self.parts(t, x);
        let mut g = [0.0; MAX_DIM];
        for (a, gx) in g.iter_mut().enumerate().take(x.len()) {
            *gx = time * dspace * (-2.0 * (x[a] - self.center[a]) / (self.radius * self.radius));
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportRow {
    pub n: usize,
    pub l1_error: f64,
    pub weak_residual: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Transport on a record against an exact solution `exact(x)` at the final
/// time, with the error summed over cells where it is defined.
pub fn transport_run(
    record: &DensityFluxRecord,
    initial: &PointFn,
    inflow: &PointFn,
    exact: &dyn Fn(&[f64]) -> Option<f64>,
    test: Option<&BumpTest>,
) -> Result<(TransportSolution, TransportRow), HarnessError> {
    let grid = *record.grid();
    let dim = grid.dim();
    let u0 = scenarios::cell_field(initial, grid, 1)?;
    let problem = TransportIBVP::new(record, u0, scenarios::face_data(inflow, dim, 1))?;
    let sol = solve_transport(&problem)?;
    let rho = record.density(record.steps()).values();
    let q = sol.final_state().values();
    let vol = grid.cell_volume();
    let mut l1 = 0.0;
    for c in 0..grid.cell_count() {
        if let Some(u) = exact(&grid.cell_center(c)[..dim]) {
            l1 += vol * (q[c] - rho[c] * u).abs();
        }
    }
    let weak = test.map(|psi| weak_residual(&sol, record, psi)).transpose()?;
    let row = TransportRow { n: grid.n(0), l1_error: l1, weak_residual: weak, diagnostics: transport_diagnostics(record, &sol)? };
    Ok((sol, row))
}

fn eval(f: &PointFn, x: &[f64]) -> f64 {
    let mut v = [0.0];
    f(x, &mut v);
    v[0]
}

pub fn advection_test(final_time: f64) -> BumpTest {
    BumpTest { final_time, center: [0.5, 0.0], radius: 0.8 }
}

/// Rows of a transport refinement study with the finest record and solution.
pub struct TransportStudy {
    pub rows: Vec<TransportRow>,
    pub finest: Option<(DensityFluxRecord, TransportSolution)>,
}

fn transport_study(
    refinements: &[usize],
    record: impl Fn(usize) -> Result<DensityFluxRecord, HarnessError>,
    initial: &PointFn,
    inflow: &PointFn,
    exact: &dyn Fn(&[f64]) -> Option<f64>,
    test: Option<&BumpTest>,
) -> Result<TransportStudy, HarnessError> {
    let mut study = TransportStudy { rows: Vec::with_capacity(refinements.len()), finest: None };
    for &n in refinements {
        let record = record(n)?;
        let (sol, row) = transport_run(&record, initial, inflow, exact, test)?;
        study.rows.push(row);
        study.finest = Some((record, sol));
    }
    Ok(study)
}

/// Unit-speed advection: `u(T, x) = u0(x - T)`, or the inflow value behind the front.
pub fn advection_study(initial: &PointFn, inflow: &PointFn, final_time: f64, cfl: f64, refinements: &[usize]) -> Result<TransportStudy, HarnessError> {
    let exact = |x: &[f64]| {
        let foot = x[0] - final_time;
        Some(if foot >= 0.0 { eval(initial, &[foot]) } else { eval(inflow, &[0.0]) })
    };
    let test = advection_test(final_time);
    transport_study(refinements, |n| scenarios::advection_record(n, final_time, cfl), initial, inflow, &exact, Some(&test))
}

/// Shear `b = (y, 0)`: `u(T, x, y) = u0(x - T y, y)`, or the inflow value at `x = 0`.
pub fn shear_study(initial: &PointFn, inflow: &PointFn, final_time: f64, cfl: f64, refinements: &[usize]) -> Result<TransportStudy, HarnessError> {
    let exact = |x: &[f64]| {
        let foot = x[0] - final_time * x[1];
        Some(if foot >= 0.0 { eval(initial, &[foot, x[1]]) } else { eval(inflow, &[0.0, x[1]]) })
    };
    transport_study(refinements, |n| scenarios::shear_record(n, final_time, cfl), initial, inflow, &exact, None)
}

/// Radius of the disk on which rotation errors are measured; characteristics
/// starting inside it never reach the boundary.
pub const ROTATION_DISK: f64 = 0.45;

/// Rigid rotation by angle `T` about the box center, error measured on the disk.
pub fn rotation_study(initial: &PointFn, inflow: &PointFn, final_time: f64, cfl: f64, refinements: &[usize]) -> Result<TransportStudy, HarnessError> {
    let exact = |x: &[f64]| {
        let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
        if dx * dx + dy * dy > ROTATION_DISK * ROTATION_DISK {
            return None;
        }
        let (s, c) = final_time.sin_cos();
        Some(eval(initial, &[0.5 + c * dx + s * dy, 0.5 - s * dx + c * dy]))
    };
    transport_study(refinements, |n| scenarios::rotation_record(n, final_time, cfl), initial, inflow, &exact, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneRow {
    /// Signed plane offset from the reference plane.
    pub offset: i64,
    pub position: f64,
    pub l1_distance: f64,
}

/// Distances of the plane traces at `r0 +- k dx`, `k = 1..=reach`, to the trace at `r0`.
pub fn hyperplane_study(
    record: &DensityFluxRecord,
    sol: &TransportSolution,
    axis: usize,
    r0: f64,
    reach: usize,
) -> Result<Vec<HyperplaneRow>, HarnessError> {
    let grid = record.grid();
    let reference = hyperplane_trace(record, sol, axis, r0)?;
    let dx = grid.dx(axis);
    let mut rows = Vec::new();
    for k in (1..=reach as i64).rev().flat_map(|k| [-k, k]) {
        let r = reference.position + k as f64 * dx;
        let trace = hyperplane_trace(record, sol, axis, r)?;
        rows.push(HyperplaneRow { offset: k, position: trace.position, l1_distance: trace.l1_distance(&reference)? });
    }
    Ok(rows)
}

/// True when distances shrink toward the reference plane on both sides.
pub fn hyperplane_monotone(rows: &[HyperplaneRow]) -> bool {
    [-1i64, 1].iter().all(|&side| {
        let mut d: Vec<(i64, f64)> = rows.iter().filter(|r| r.offset.signum() == side).map(|r| (r.offset.abs(), r.l1_distance)).collect();
        d.sort_by_key(|r| r.0);
        d.windows(2).all(|w| w[0].1 <= w[1].1)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KkRow {
    pub n: usize,
    pub modulus_min: f64,
    pub modulus_max: f64,
    pub modulus_bound: f64,
    pub direction_max: f64,
    pub unit_defect: f64,
    pub entropy_pair: f64,
    pub modulus: Diagnostics,
    pub direction: Diagnostics,
}

pub fn kk_row(data: &KKData, state: &KKState, seed: u64) -> Result<KkRow, HarnessError> {
    let (lo, hi) = state.modulus_range();
    let grid = *state.record.grid();
    let final_time = data.final_time;
    let pair = RadialEntropy::quadratic(data.flux.clone());
    let inner = interior_weight(final_time);
    let phi = move |t: f64, x: &[f64]| t * inner(t, x);
    let problem = split_data(data)?.modulus;
    Ok(KkRow {
        n: grid.n(0),
        modulus_min: lo,
        modulus_max: hi,
        modulus_bound: state.modulus_bound(),
        direction_max: state.max_direction_norm(),
        unit_defect: state.unit_defect(state.record.steps()),
        entropy_pair: entropy_pair_check(state, &data.flux, &pair, phi, seed)?,
        modulus: claw_diagnostics(&problem, &state.modulus)?,
        direction: transport_diagnostics(&state.record, &state.direction)?,
    })
}

/// Solves the splitting at every refinement, keeping the finest state.
pub fn kk_study(
    build: impl Fn(usize) -> Result<KKData, HarnessError>,
    cfl: f64,
    refinements: &[usize],
    seed: u64,
) -> Result<(Vec<KkRow>, Option<KKState>), HarnessError> {
    let mut rows = Vec::with_capacity(refinements.len());
    let mut finest = None;
    for &n in refinements {
        let data = build(n)?;
        let state = solve_kk(&data, cfl)?;
        rows.push(kk_row(&data, &state, seed)?);
        finest = Some(state);
    }
    Ok((rows, finest))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizeRow {
    pub m: usize,
    pub scale: f64,
    pub under_resolved: bool,
    pub defect_l1: f64,
    pub control_l1: f64,
    pub momentum_ratio: f64,
    /// `min rho_m - 1/m`; the floor keeps the mollified velocity bounded.
    pub floor_margin: f64,
    pub inflow_disagreement: f64,
    pub outflow_disagreement: f64,
    /// Mean `|u_char - u_upwind|` at the final time over non-vacuum cells.
    pub characteristics_gap: f64,
}

/// Mollifies `record` at every `m`, reporting the continuity defect next to
/// a non-conservative control pair on the same levels.
pub fn regularize_study(
    record: &DensityFluxRecord,
    initial: &PointFn,
    inflow: &PointFn,
    eps0: f64,
    indices: &[usize],
) -> Result<(Vec<RegularizeRow>, TransportSolution), HarnessError> {
    let grid = *record.grid();
    let dim = grid.dim();
    let pair = SpaceTimePair::from_record(record);
    let control = scenarios::negative_control_pair(grid, record.times())?;
    let u0 = scenarios::cell_field(initial, grid, 1)?;
    let g = scenarios::face_data(inflow, dim, 1);
    let problem = TransportIBVP::new(record, u0.clone(), g.clone())?;
    let upwind = solve_transport(&problem)?;
    let reference = FaceLabels::from_record(record);
    let final_time = record.final_time();
    let samples: Vec<Sample> = (0..grid.cell_count()).map(|c| Sample { t: final_time, x: grid.cell_center(c) }).collect();
    let rho = record.density(record.steps()).values();
    let q = upwind.final_state().values();

    let mut rows = Vec::with_capacity(indices.len());
    for &m in indices {
        let spec = MollifierSpec::new(eps0, m)?;
        let smooth = mollify_pair(&pair, spec)?;
        let defect = smooth.defect()?;
        let control_defect = mollify_pair(&control, spec)?.defect()?;
        let floor = (0..=smooth.steps()).map(|n| smooth.density(n).min()).fold(f64::INFINITY, f64::min);
        let labels = smooth.labels();
        let disagreement = indicator_convergence_study(std::slice::from_ref(&labels), &reference)?[0];
        let chars = characteristics_solve(&smooth, &u0, &g, final_time, &samples)?;
        let (mut gap, mut count) = (0.0, 0usize);
        for (c, v) in chars.iter().enumerate() {
            if rho[c] > record.vacuum_threshold() {
                gap += (v[0] - q[c] / rho[c]).abs();
                count += 1;
            }
        }
        rows.push(RegularizeRow {
            m,
            scale: spec.scale(),
            under_resolved: smooth.under_resolved(),
            defect_l1: defect.l1,
            control_l1: control_defect.l1,
            momentum_ratio: smooth.momentum_ratio(),
            floor_margin: floor - spec.floor(),
            inflow_disagreement: disagreement.inflow,
            outflow_disagreement: disagreement.outflow,
            characteristics_gap: if count > 0 { gap / count as f64 } else { 0.0 },
        });
    }
    Ok((rows, upwind))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// Unperturbed data at every rung.
    None,
    /// The shear profile and the initial step mollified at `2^-n`.
    Mollify,
    /// The inflow datum shifted so that its `L1(inflow x time)` distance is `2^-n`.
    BoundaryShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub rung: usize,
    pub eps: f64,
    /// `sum_n dt |rho_n u_n - rho u|_L1`.
    pub solution_l1: f64,
    /// `L1(Gamma x time)` distance of the boundary traces.
    pub trace_l1: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub reference: (DensityFluxRecord, TransportSolution),
    /// `max_n solution_l1 / 2^-n`, for boundary shifts.
    pub fitted_constant: Option<f64>,
}

const STABILITY_INFLOW: f64 = 0.5;

/// Perturbation ladder on the step shear: every rung shares the reference's
/// grid and time levels.
pub fn stability_study(n: usize, final_time: f64, cfl: f64, ladder: usize, mode: Perturbation) -> Result<StabilityReport, HarnessError> {
    let grid = fvlab_core::grid::Grid::unit_square(n, n)?;
    let times = scenarios::cfl_times(&grid, final_time, cfl, 1.0);
    let solve = |eps: f64, shift: f64| -> Result<(DensityFluxRecord, TransportSolution), HarnessError> {
        let record = scenarios::profile_record(n, times.clone(), eps)?;
        let u0 = CellField::from_fn(grid, |x| scenarios::stability_initial(x[0], eps))?;
        let problem = TransportIBVP::new(&record, u0, FaceData::constant(&[STABILITY_INFLOW + shift]))?;
        let sol = solve_transport(&problem)?;
        Ok((record, sol))
    };
    let (ref_record, reference) = solve(0.0, 0.0)?;
    let ref_trace = extract_traces(&ref_record, &reference)?;
    let inflow_area: f64 = ref_record
        .topology()
        .boundary
        .iter()
        .zip(ref_record.classify(0))
        .filter(|(_, c)| *c == FaceClass::Inflow)
        .map(|(f, _)| f.area)
        .sum();
    let vol = grid.cell_volume();
    let mut rows = Vec::with_capacity(ladder);
    for rung in 1..=ladder {
        let eps = 0.5f64.powi(rung as i32);
        let (record, sol) = match mode {
            Perturbation::None => solve(0.0, 0.0)?,
            Perturbation::Mollify => solve(eps, 0.0)?,
            Perturbation::BoundaryShift => solve(0.0, eps / (inflow_area * final_time))?,
        };
        let solution_l1: f64 = (0..record.steps())
            .map(|k| record.dt(k) * vol * sol.q[k + 1].values().iter().zip(reference.q[k + 1].values()).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .sum();
        let trace_l1 = extract_traces(&record, &sol)?.l1_distance(&ref_trace)?;
        rows.push(StabilityRow { rung, eps, solution_l1, trace_l1 });
    }
    let fitted_constant = (mode == Perturbation::BoundaryShift).then(|| rows.iter().map(|r| r.solution_l1 / r.eps).fold(0.0, f64::max));
    Ok(StabilityReport { rows, reference: (ref_record, reference), fitted_constant })
}

pub fn non_increasing(values: impl IntoIterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.into_iter().collect();
    v.windows(2).all(|w| w[1] <= w[0])
}

pub fn strictly_decreasing(values: impl IntoIterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.into_iter().collect();
    v.windows(2).all(|w| w[1] < w[0])
}
