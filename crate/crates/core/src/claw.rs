//! Explicit Godunov solver for `d/dt rho + div(F(rho) rho) = 0` on a box with
//! boundary data imposed through ghost states (the discrete
//! Bardos-le Roux-Nedelec condition), plus a Kruzhkov entropy-residual
//! checker and an exact Riemann solver used as a test oracle.

use std::fmt;
use std::sync::Arc;

use crate::boundary::FaceData;
use crate::error::{invalid, Error, Result};
use crate::grid::{mass_closure_defect, CellField, FaceTopology, Grid};

/// Number of samples used for wavespeed bounds and critical-point search.
pub const WAVESPEED_SAMPLES: usize = 1025;

/// Default CFL number; the time step also carries a factor `1 / dim`.
pub const DEFAULT_CFL: f64 = 0.45;

/// A scalar flux with an evaluable derivative.
pub trait ScalarFlux {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
}

/// Flux built from a pair of closures.
pub struct FnFlux<F, D> {
    pub f: F,
    pub df: D,
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> ScalarFlux for FnFlux<F, D> {
    fn value(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    fn derivative(&self, r: f64) -> f64 {
        (self.df)(r)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One velocity law `f^i(rho)` of the flux family.
#[derive(Clone)]
pub struct Velocity {
    label: String,
    f: RealFn,
    df: RealFn,
}

impl Velocity {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Velocity { label: label.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c, |_| 0.0)
    }

    /// `f(r) = sum_k coeffs[k] r^k`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let label = format!("poly{coeffs:?}");
        let deriv: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        Self::new(label, move |r| horner(&coeffs, r), move |r| horner(&deriv, r))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        (self.df)(r)
    }
}

fn horner(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

impl fmt::Debug for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// `F = (f^1, ..., f^d)`; the conserved flux along axis `i` is `G^i(rho) = f^i(rho) rho`.
#[derive(Clone, Debug)]
pub struct FluxFamily {
    velocities: Vec<Velocity>,
}

impl FluxFamily {
    pub fn new(velocities: Vec<Velocity>) -> Result<Self> {
        if velocities.is_empty() || velocities.len() > crate::grid::MAX_DIM {
            return invalid(format!("flux family needs 1 or 2 components, got {}", velocities.len()));
        }
        Ok(FluxFamily { velocities })
    }

    pub fn dim(&self) -> usize {
        self.velocities.len()
    }

    pub fn velocity(&self, axis: usize) -> &Velocity {
        &self.velocities[axis]
    }

    pub fn axis(&self, axis: usize) -> AxisFlux<'_> {
        AxisFlux { velocity: &self.velocities[axis] }
    }

    /// `max_i max_{r in [lo, hi]} |G^i'(r)|`, by dense sampling.
    pub fn max_wavespeed(&self, lo: f64, hi: f64) -> f64 {
        (0..self.dim()).map(|i| scan(&self.axis(i), lo, hi).max_speed).fold(0.0, f64::max)
    }
}

/// `G(r) = f(r) r` for one axis.
#[derive(Clone, Copy)]
pub struct AxisFlux<'a> {
    velocity: &'a Velocity,
}

impl ScalarFlux for AxisFlux<'_> {
    fn value(&self, r: f64) -> f64 {
        self.velocity.value(r) * r
    }

    fn derivative(&self, r: f64) -> f64 {
        self.velocity.derivative(r) * r + self.velocity.value(r)
    }
}

struct Scan {
    max_speed: f64,
    critical: Vec<f64>,
}

/// Samples `G'` on `[lo, hi]`, returning the largest `|G'|` and the roots of `G'`.
fn scan(flux: &dyn ScalarFlux, lo: f64, hi: f64) -> Scan {
    if hi <= lo {
        return Scan { max_speed: flux.derivative(lo).abs(), critical: Vec::new() };
    }
    let h = (hi - lo) / (WAVESPEED_SAMPLES - 1) as f64;
    let mut critical = Vec::new();
    let mut x_prev = lo;
    let mut d_prev = flux.derivative(lo);
    let mut max_speed = d_prev.abs();
    for i in 1..WAVESPEED_SAMPLES {
        let x = if i == WAVESPEED_SAMPLES - 1 { hi } else { lo + i as f64 * h };
        let d = flux.derivative(x);
        max_speed = max_speed.max(d.abs());
        if d_prev == 0.0 {
            critical.push(x_prev);
        } else if d_prev * d < 0.0 {
            critical.push(bisect_root(|r| flux.derivative(r), x_prev, x, d_prev));
        }
        x_prev = x;
        d_prev = d;
    }
    if d_prev == 0.0 {
        critical.push(hi);
    }
    Scan { max_speed, critical }
}

fn bisect_root(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, ga: f64) -> f64 {
    let sign_a = ga.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// A flux with its critical points precomputed over a state range, so the
/// Godunov flux reduces to comparing a handful of candidate values.
struct CompiledFlux<'a> {
    flux: AxisFlux<'a>,
    lo: f64,
    hi: f64,
    critical: Vec<f64>,
}

impl<'a> CompiledFlux<'a> {
    fn new(flux: AxisFlux<'a>, lo: f64, hi: f64) -> (Self, f64) {
        let s = scan(&flux, lo, hi);
        (CompiledFlux { flux, lo, hi, critical: s.critical }, s.max_speed)
    }

    fn godunov(&self, left: f64, right: f64) -> f64 {
        let (a, b) = if left <= right { (left, right) } else { (right, left) };
        if a < self.lo || b > self.hi {
            return godunov_with(&self.flux, left, right, &scan(&self.flux, a, b).critical);
        }
        let start = self.critical.partition_point(|&r| r <= a);
        let end = self.critical.partition_point(|&r| r < b);
        godunov_with(&self.flux, left, right, &self.critical[start..end.max(start)])
    }

    /// State of the boundary Riemann fan at the face itself, preferring the
    /// interior state on ties; `inner_left` tells which side the cell is on.
    fn face_state(&self, inner: f64, ghost: f64, inner_left: bool) -> f64 {
        let (a, b) = if inner <= ghost { (inner, ghost) } else { (ghost, inner) };
        let critical = if a < self.lo || b > self.hi {
            scan(&self.flux, a, b).critical
        } else {
            let start = self.critical.partition_point(|&r| r <= a);
            let end = self.critical.partition_point(|&r| r < b);
            self.critical[start..end.max(start)].to_vec()
        };
        let (left, right) = if inner_left { (inner, ghost) } else { (ghost, inner) };
        let minimize = left <= right;
        let mut best = (self.flux.value(inner), inner);
        for r in critical.into_iter().filter(|&r| r > a && r < b).chain([ghost]) {
            let g = self.flux.value(r);
            if (minimize && g < best.0) || (!minimize && g > best.0) {
                best = (g, r);
            }
        }
        best.1
    }
}

fn godunov_with(flux: &dyn ScalarFlux, left: f64, right: f64, critical: &[f64]) -> f64 {
    let (a, b) = if left <= right { (left, right) } else { (right, left) };
    let candidates = critical.iter().copied().filter(|&r| r > a && r < b);
    let ga = flux.value(a);
    let gb = flux.value(b);
    if left <= right {
        candidates.map(|r| flux.value(r)).fold(ga.min(gb), f64::min)
    } else {
        candidates.map(|r| flux.value(r)).fold(ga.max(gb), f64::max)
    }
}

/// Godunov flux: `min G` over `[left, right]` when `left <= right`, else `max G` over `[right, left]`.
pub fn godunov_flux(left: f64, right: f64, flux: &dyn ScalarFlux) -> Result<f64> {
    if !left.is_finite() || !right.is_finite() {
        return invalid(format!("non-finite Riemann states ({left}, {right})"));
    }
    let (a, b) = if left <= right { (left, right) } else { (right, left) };
    Ok(godunov_with(flux, left, right, &scan(flux, a, b).critical))
}

/// Kruzhkov numerical entropy flux `H(a v k, b v k) - H(a ^ k, b ^ k)`.
fn entropy_flux(flux: &CompiledFlux<'_>, left: f64, right: f64, k: f64) -> f64 {
    flux.godunov(left.max(k), right.max(k)) - flux.godunov(left.min(k), right.min(k))
}

/// Full statement of a scalar initial-boundary value problem.
#[derive(Clone, Debug)]
pub struct ScalarIBVP {
    pub flux: FluxFamily,
    pub initial: CellField,
    pub boundary: FaceData,
    pub final_time: f64,
}

impl ScalarIBVP {
    pub fn new(flux: FluxFamily, initial: CellField, boundary: FaceData, final_time: f64) -> Result<Self> {
        if flux.dim() != initial.grid().dim() {
            return invalid(format!("flux has {} components on a {}-d grid", flux.dim(), initial.grid().dim()));
        }
        if initial.components() != 1 || boundary.components() != 1 {
            return invalid("density data must be scalar");
        }
        if !(final_time >= 0.0 && final_time.is_finite()) {
            return invalid(format!("final time {final_time} must be finite and non-negative"));
        }
        if initial.min() < 0.0 {
            return invalid(format!("initial density has negative value {}", initial.min()));
        }
        Ok(ScalarIBVP { flux, initial, boundary, final_time })
    }

    pub fn grid(&self) -> &Grid {
        self.initial.grid()
    }
}

/// Result of one explicit step. Fluxes are integrated over face area.
#[derive(Debug, Clone)]
pub struct ClawStep {
    pub rho: CellField,
    /// Time at the end of the step.
    pub t_end: f64,
    /// `t_end - t`, exactly the difference of the two levels.
    pub dt: f64,
    /// Interior face fluxes, oriented along `+axis`.
    pub interior_flux: Vec<f64>,
    /// Boundary face fluxes, oriented along the outward normal.
    pub boundary_flux: Vec<f64>,
    /// Ghost states (boundary datum) used on each boundary face.
    pub boundary_state: Vec<f64>,
}

struct Stepper<'a> {
    problem: &'a ScalarIBVP,
    topo: FaceTopology,
    cfl: f64,
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a ScalarIBVP, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return invalid(format!("cfl {cfl} not in (0, 1]"));
        }
        Ok(Stepper { problem, topo: FaceTopology::new(problem.grid()), cfl })
    }

    fn step(&self, rho: &CellField, t: f64) -> Result<ClawStep> {
        let grid = *self.problem.grid();
        if rho.grid() != &grid || rho.components() != 1 {
            return invalid("density field does not match the problem grid");
        }
        if rho.min() < 0.0 {
            return invalid(format!("negative density {}", rho.min()));
        }
        let ghosts = self.problem.boundary.eval_all(&self.topo.boundary, t);
        if let Some(bad) = ghosts.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return invalid(format!("boundary density {bad} at t = {t} is not a finite non-negative value"));
        }
        let lo = ghosts.iter().copied().fold(rho.min(), f64::min);
        let hi = ghosts.iter().copied().fold(rho.max(), f64::max);

        let dim = grid.dim();
        let compiled: Vec<CompiledFlux> =
            (0..dim).map(|axis| CompiledFlux::new(self.problem.flux.axis(axis), lo, hi).0).collect();
        // wave speeds over the states that can enter a cell: interior values
        // and the face states of the boundary fans, never an outflow datum
        let values = rho.values();
        let (mut reach_lo, mut reach_hi) = (rho.min(), rho.max());
        for (f, &ghost) in self.topo.boundary.iter().zip(&ghosts) {
            let w = compiled[f.axis].face_state(values[f.cell], ghost, f.side == crate::grid::Side::High);
            reach_lo = reach_lo.min(w);
            reach_hi = reach_hi.max(w);
        }
        let speed = (0..dim).map(|axis| scan(&compiled[axis].flux, reach_lo, reach_hi).max_speed).fold(0.0, f64::max);
        let remaining = self.problem.final_time - t;
        let dt = if speed > 0.0 {
            let stable = self.cfl * grid.min_dx() / (dim as f64 * speed);
            if remaining <= stable * (1.0 + 1e-9) {
                remaining
            } else {
                stable
            }
        } else {
            remaining
        };
        let t_end = if dt == remaining { self.problem.final_time } else { t + dt };
        let dt = t_end - t;

        let interior_flux: Vec<f64> = self
            .topo
            .interior
            .iter()
            .map(|f| compiled[f.axis].godunov(values[f.low], values[f.high]) * f.area)
            .collect();
        let boundary_flux: Vec<f64> = self
            .topo
            .boundary
            .iter()
            .zip(&ghosts)
            .map(|(f, &ghost)| {
                let inner = values[f.cell];
                let g = match f.side {
                    crate::grid::Side::High => compiled[f.axis].godunov(inner, ghost),
                    crate::grid::Side::Low => -compiled[f.axis].godunov(ghost, inner),
                };
                g * f.area
            })
            .collect();

        let new = self.topo.apply(&grid, values, &interior_flux, &boundary_flux, dt);
        if let Some(pos) = new.iter().position(|v| !v.is_finite()) {
            return Err(Error::Fault(format!("non-finite density in cell {pos} at t = {t}")));
        }
        Ok(ClawStep {
            rho: CellField::new(grid, 1, new)?,
            t_end,
            dt,
            interior_flux,
            boundary_flux,
            boundary_state: ghosts,
        })
    }
}

/// Advances `rho` from time `t` by one step (capped at the final time).
pub fn step_claw(rho: &CellField, problem: &ScalarIBVP, t: f64, cfl: f64) -> Result<ClawStep> {
    Stepper::new(problem, cfl)?.step(rho, t)
}

/// Snapshots and per-step face fluxes of a scalar solve.
#[derive(Debug, Clone)]
pub struct ClawSolution {
    pub times: Vec<f64>,
    pub snapshots: Vec<CellField>,
    /// Per step, interior face fluxes (integrated, oriented along `+axis`).
    pub interior_flux: Vec<Vec<f64>>,
    /// Per step, boundary face fluxes (integrated, outward).
    pub boundary_flux: Vec<Vec<f64>>,
    /// Per step, boundary datum at the start of the step.
    pub boundary_state: Vec<Vec<f64>>,
}

impl ClawSolution {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, step: usize) -> f64 {
        self.times[step + 1] - self.times[step]
    }

    pub fn final_state(&self) -> &CellField {
        self.snapshots.last().expect("a solution has at least one snapshot")
    }

    /// Largest relative mass-closure defect over all steps.
    pub fn mass_defect(&self) -> f64 {
        (0..self.steps())
            .map(|n| {
                mass_closure_defect(
                    self.grid(),
                    self.snapshots[n].values(),
                    self.snapshots[n + 1].values(),
                    &self.boundary_flux[n],
                    self.dt(n),
                )
            })
            .fold(0.0, f64::max)
    }

    /// Range of the initial and boundary data.
    pub fn data_range(&self) -> (f64, f64) {
        let mut lo = self.snapshots[0].min();
        let mut hi = self.snapshots[0].max();
        for v in self.boundary_state.iter().flatten() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        (lo, hi)
    }

    /// Smallest distance of any snapshot to the bounds `[inf data, sup data]`;
    /// negative when the maximum principle is violated.
    pub fn max_principle_margin(&self) -> f64 {
        let (lo, hi) = self.data_range();
        self.snapshots.iter().map(|s| (s.min() - lo).min(hi - s.max())).fold(f64::INFINITY, f64::min)
    }
}

/// Iterates [`step_claw`] up to the final time.
pub fn solve_claw(problem: &ScalarIBVP, cfl: f64) -> Result<ClawSolution> {
    let stepper = Stepper::new(problem, cfl)?;
    let mut sol = ClawSolution {
        times: vec![0.0],
        snapshots: vec![problem.initial.clone()],
        interior_flux: Vec::new(),
        boundary_flux: Vec::new(),
        boundary_state: Vec::new(),
    };
    let mut t = 0.0;
    while t < problem.final_time {
        let step = stepper.step(sol.final_state(), t)?;
        if step.dt <= 0.0 {
            return Err(Error::Fault(format!("non-positive time step at t = {t}")));
        }
        t = step.t_end;
        sol.times.push(t);
        sol.snapshots.push(step.rho);
        sol.interior_flux.push(step.interior_flux);
        sol.boundary_flux.push(step.boundary_flux);
        sol.boundary_state.push(step.boundary_state);
    }
    Ok(sol)
}

/// Discrete left-hand side of the Kruzhkov inequality with boundary term,
/// minimized over `k_samples`.
///
/// Time derivatives and gradients of `psi` are taken by summation by parts
/// against the scheme's own data: interior faces carry the numerical entropy
/// flux `H(a v k, b v k) - H(a ^ k, b ^ k)` and boundary faces carry
/// `sgn(rho_b - k) (G(rho_c) - G(k)) . n`, with the adjacent cell value
/// standing in for the boundary trace. A non-negative result certifies the
/// inequality for this test function.
pub fn entropy_residual(
    sol: &ClawSolution,
    problem: &ScalarIBVP,
    k_samples: &[f64],
    psi: impl Fn(f64, &[f64]) -> f64,
) -> Result<f64> {
    let grid = *sol.grid();
    if k_samples.is_empty() {
        return invalid("at least one entropy level k is required");
    }
    let dim = grid.dim();
    let cells = grid.cell_count();
    let vol = grid.cell_volume();
    let topo = FaceTopology::new(&grid);

    let mut psi_levels = Vec::with_capacity(sol.times.len());
    for &t in &sol.times {
        let level: Vec<f64> = (0..cells).map(|c| psi(t, &grid.cell_center(c)[..dim])).collect();
        if let Some(v) = level.iter().find(|v| !(**v >= 0.0)) {
            return invalid(format!("test function takes the value {v} at t = {t}"));
        }
        psi_levels.push(level);
    }

    let (mut lo, mut hi) = sol.data_range();
    for s in &sol.snapshots {
        lo = lo.min(s.min());
        hi = hi.max(s.max());
    }
    for &k in k_samples {
        lo = lo.min(k);
        hi = hi.max(k);
    }
    let compiled: Vec<CompiledFlux<'_>> =
        (0..dim).map(|a| CompiledFlux::new(problem.flux.axis(a), lo, hi).0).collect();

    let mut worst = f64::INFINITY;
    for &k in k_samples {
        let last = sol.steps();
        let energy = |n: usize, c: usize| (sol.snapshots[n].values()[c] - k).abs();
        let mut total = 0.0;
        for c in 0..cells {
            total += vol * psi_levels[0][c] * energy(0, c);
            total -= vol * psi_levels[last][c] * energy(last, c);
        }
        for n in 1..=last {
            for c in 0..cells {
                total += vol * energy(n, c) * (psi_levels[n][c] - psi_levels[n - 1][c]);
            }
        }
        let at_k: Vec<f64> = compiled.iter().map(|c| c.flux.value(k)).collect();
        for n in 0..last {
            let rho = sol.snapshots[n].values();
            let dt = sol.dt(n);
            let psi_n = &psi_levels[n];
            let scheme = &sol.interior_flux[n];
            let mut spatial = 0.0;
            for (i, f) in topo.interior.iter().enumerate() {
                let dpsi = psi_n[f.high] - psi_n[f.low];
                if dpsi == 0.0 {
                    continue;
                }
                let (a, b) = (rho[f.low], rho[f.high]);
                // on one side of k the entropy flux is the scheme's own flux shifted by G(k)
                let q = if a >= k && b >= k {
                    scheme[i] - at_k[f.axis] * f.area
                } else if a <= k && b <= k {
                    at_k[f.axis] * f.area - scheme[i]
                } else {
                    entropy_flux(&compiled[f.axis], a, b, k) * f.area
                };
                spatial += q * dpsi;
            }
            for (f, &rho_b) in topo.boundary.iter().zip(&sol.boundary_state[n]) {
                let g = &compiled[f.axis].flux;
                let sgn = sign(rho_b - k);
                let b = sgn * (g.value(rho[f.cell]) - g.value(k)) * f.side.sign() * f.area;
                spatial -= psi_n[f.cell] * b;
            }
            total += dt * spatial;
        }
        worst = worst.min(total);
    }
    Ok(worst)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Curvature {
    Convex,
    Concave,
}

fn curvature(flux: &dyn ScalarFlux, lo: f64, hi: f64) -> Option<Curvature> {
    const N: usize = 257;
    let d: Vec<f64> = (0..N).map(|i| flux.derivative(lo + (hi - lo) * i as f64 / (N - 1) as f64)).collect();
    let scale = d.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    if d.windows(2).all(|w| w[1] >= w[0] - tol) {
        Some(Curvature::Convex)
    } else if d.windows(2).all(|w| w[1] <= w[0] + tol) {
        Some(Curvature::Concave)
    } else {
        None
    }
}

/// Entropy solution of the Riemann problem for a convex or concave flux,
/// evaluated at the self-similar coordinate `xi = (x - x0) / t`.
pub fn exact_riemann(flux: &dyn ScalarFlux, left: f64, right: f64, xi: f64) -> Result<f64> {
    if !left.is_finite() || !right.is_finite() || !xi.is_finite() {
        return invalid("non-finite Riemann data");
    }
    if left == right {
        return Ok(left);
    }
    let (lo, hi) = if left < right { (left, right) } else { (right, left) };
    let shape = curvature(flux, lo, hi)
        .ok_or_else(|| Error::Unsupported("exact Riemann solver needs a convex or concave flux".into()))?;
    let dl = flux.derivative(left);
    let dr = flux.derivative(right);
    let shock = match shape {
        Curvature::Convex => left > right,
        Curvature::Concave => left < right,
    } || dl == dr;
    if shock {
        let speed = (flux.value(left) - flux.value(right)) / (left - right);
        return Ok(if xi < speed { left } else { right });
    }
    // rarefaction fan: G' runs monotonically from dl to dr along [left, right]
    if xi <= dl {
        return Ok(left);
    }
    if xi >= dr {
        return Ok(right);
    }
    Ok(bisect_root(|r| flux.derivative(r) - xi, left, right, dl - xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn burgers_like() -> FluxFamily {
        FluxFamily::new(vec![Velocity::polynomial(vec![0.0, 1.0])]).unwrap()
    }

    #[test]
    fn godunov_increasing_flux_picks_left() {
        let g = FnFlux { f: |r: f64| r, df: |_| 1.0 };
        assert_eq!(godunov_flux(2.0, 5.0, &g).unwrap(), 2.0);
    }

    #[test]
    fn godunov_consistency() {
        let g = FnFlux { f: |r: f64| r * r, df: |r: f64| 2.0 * r };
        assert_eq!(godunov_flux(0.0, 0.0, &g).unwrap(), 0.0);
        assert_eq!(godunov_flux(0.7, 0.7, &g).unwrap(), 0.7 * 0.7);
    }

    #[test]
    fn godunov_interior_minimum() {
        // oracle: dense sampling of r^2 - r over [0, 1]
        let oracle = (0..=1_000_000).map(|i| i as f64 * 1e-6).map(|r| r * r - r).fold(f64::INFINITY, f64::min);
        assert!((oracle + 0.25).abs() < 1e-12);
        let g = FnFlux { f: |r: f64| r * r - r, df: |r: f64| 2.0 * r - 1.0 };
        let h = godunov_flux(0.0, 1.0, &g).unwrap();
        assert!((h - oracle).abs() < 1e-12, "{h}");
        // reversed states take the maximum instead
        assert_eq!(godunov_flux(1.0, 0.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn godunov_rejects_nan() {
        let g = FnFlux { f: |r: f64| r, df: |_| 1.0 };
        assert!(godunov_flux(f64::NAN, 1.0, &g).is_err());
    }

    #[test]
    fn wavespeed_of_quadratic() {
        assert_eq!(burgers_like().max_wavespeed(0.0, 1.0), 2.0);
    }

    #[test]
    fn constant_state_is_exact() {
        let grid = Grid::unit_interval(32).unwrap();
        let p = ScalarIBVP::new(burgers_like(), CellField::constant(grid, &[0.3]), FaceData::constant(&[0.3]), 0.5)
            .unwrap();
        let sol = solve_claw(&p, DEFAULT_CFL).unwrap();
        assert!(sol.steps() > 1);
        for s in &sol.snapshots {
            assert!(s.values().iter().all(|&v| v == 0.3));
        }
    }

    #[test]
    fn time_step_respects_cfl() {
        let grid = Grid::unit_interval(10).unwrap();
        let p = ScalarIBVP::new(burgers_like(), CellField::constant(grid, &[1.0]), FaceData::constant(&[1.0]), 1.0)
            .unwrap();
        let step = step_claw(&p.initial, &p, 0.0, 0.5).unwrap();
        assert!((step.dt - 0.5 * 0.1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_wavespeed_takes_remaining_time() {
        let grid = Grid::unit_interval(10).unwrap();
        let flux = FluxFamily::new(vec![Velocity::constant(0.0)]).unwrap();
        let p = ScalarIBVP::new(flux, CellField::constant(grid, &[1.0]), FaceData::constant(&[1.0]), 0.7).unwrap();
        let sol = solve_claw(&p, 0.5).unwrap();
        assert_eq!(sol.times, vec![0.0, 0.7]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = Grid::unit_interval(10).unwrap();
        let neg = CellField::constant(grid, &[-1.0]);
        assert!(ScalarIBVP::new(burgers_like(), neg, FaceData::constant(&[1.0]), 1.0).is_err());
        let p = ScalarIBVP::new(burgers_like(), CellField::constant(grid, &[1.0]), FaceData::constant(&[-1.0]), 1.0)
            .unwrap();
        assert!(matches!(solve_claw(&p, 0.45), Err(Error::InvalidInput(_))));
        assert!(step_claw(&p.initial, &p, 0.0, 1.5).is_err());
    }

    #[test]
    fn exact_riemann_linear_contact() {
        let g = FnFlux { f: |r: f64| r, df: |_| 1.0 };
        assert_eq!(exact_riemann(&g, 1.0, 0.0, 0.5).unwrap(), 1.0);
        assert_eq!(exact_riemann(&g, 1.0, 0.0, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn exact_riemann_quadratic() {
        let g = FnFlux { f: |r: f64| r * r, df: |r: f64| 2.0 * r };
        // shock at the Rankine-Hugoniot speed (1 - 0) / (1 - 0) = 1
        assert_eq!(exact_riemann(&g, 1.0, 0.0, 0.999).unwrap(), 1.0);
        assert_eq!(exact_riemann(&g, 1.0, 0.0, 1.001).unwrap(), 0.0);
        // rarefaction fan r = xi / 2
        assert!((exact_riemann(&g, 0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(exact_riemann(&g, 0.0, 1.0, -0.1).unwrap(), 0.0);
        assert_eq!(exact_riemann(&g, 0.0, 1.0, 2.5).unwrap(), 1.0);
    }

    #[test]
    fn exact_riemann_rejects_nonconvex() {
        let g = FnFlux { f: |r: f64| r * r * r, df: |r: f64| 3.0 * r * r };
        assert!(matches!(exact_riemann(&g, -1.0, 1.0, 0.0), Err(Error::Unsupported(_))));
    }
}
