//! The Keyfitz-Kranzer system `d/dt U + sum_i d/dx_i (f_i(|U|) U) = 0`, solved by
//! splitting into a scalar law for `rho = |U|` and transport of `theta = U / |U|`
//! along the mass fluxes of that scalar solve.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::FaceData;
use crate::claw::{solve_claw, ClawSolution, FluxFamily, ScalarIBVP};
use crate::error::{invalid, Error, Result};
use crate::grid::{CellField, FaceTopology, Grid};
use crate::transport::{solve_transport, DensityFluxRecord, TransportIBVP, TransportSolution, VACUUM_REL};

/// Data of the system: initial state `U0` and boundary state `U_b`, both with
/// `N` components.
#[derive(Debug, Clone)]
pub struct KKData {
    pub flux: FluxFamily,
    pub initial: CellField,
    pub boundary: FaceData,
    pub final_time: f64,
}

impl KKData {
    pub fn new(flux: FluxFamily, initial: CellField, boundary: FaceData, final_time: f64) -> Result<Self> {
        if flux.dim() != initial.grid().dim() {
            return invalid(format!("flux family has {} axes, grid has {}", flux.dim(), initial.grid().dim()));
        }
        if boundary.components() != initial.components() {
            return invalid("initial and boundary states have different component counts");
        }
        if !(final_time >= 0.0 && final_time.is_finite()) {
            return invalid(format!("final time {final_time} must be finite and non-negative"));
        }
        Ok(KKData { flux, initial, boundary, final_time })
    }

    pub fn components(&self) -> usize {
        self.initial.components()
    }

    pub fn grid(&self) -> &Grid {
        self.initial.grid()
    }

    /// Discrete total variation of `|U0|` (sum over interior faces of jump times area).
    pub fn modulus_variation(&self) -> f64 {
        let rho = initial_modulus(&self.initial);
        FaceTopology::new(self.grid()).interior.iter().map(|f| (rho[f.high] - rho[f.low]).abs() * f.area).sum()
    }
}

fn modulus(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn direction(v: &[f64], eps: f64, out: &mut [f64]) {
    let r = modulus(v);
    if r < eps || r == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
    } else {
        for (o, x) in out.iter_mut().zip(v) {
            *o = x / r;
        }
    }
}

fn initial_modulus(u: &CellField) -> Vec<f64> {
    let m = u.components();
    let mut buf = vec![0.0; m];
    (0..u.grid().cell_count())
        .map(|c| {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = u.get(j, c);
            }
            modulus(&buf)
        })
        .collect()
}

/// Modulus problem and direction data.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub modulus: ScalarIBVP,
    /// `U0 / |U0|`, `e1` on vacuum cells.
    pub direction: CellField,
    /// `U_b / |U_b|`, `e1` where the boundary state vanishes.
    pub direction_inflow: FaceData,
}

/// Splits `U = rho theta`. Directions are `e1` wherever the modulus is below
/// the vacuum threshold of the initial state.
pub fn split_data(data: &KKData) -> Result<SplitData> {
    let grid = *data.grid();
    let n = data.components();
    let rho = initial_modulus(&data.initial);
    let eps = VACUUM_REL * rho.iter().fold(0.0, |a: f64, &b| a.max(b));
    let cells = grid.cell_count();
    let mut theta = vec![0.0; n * cells];
    let (mut u, mut d) = (vec![0.0; n], vec![0.0; n]);
    for c in 0..cells {
        for (j, v) in u.iter_mut().enumerate() {
            *v = data.initial.get(j, c);
        }
        direction(&u, eps, &mut d);
        for j in 0..n {
            theta[j * cells + c] = d[j];
        }
    }
    let boundary = data.boundary.clone();
    let modulus_boundary = FaceData::scalar(move |face, t| {
        let mut v = vec![0.0; boundary.components()];
        boundary.eval(face, t, &mut v);
        modulus(&v)
    });
    let boundary = data.boundary.clone();
    let direction_inflow = FaceData::new(n, move |face, t, out| {
        let mut v = vec![0.0; out.len()];
        boundary.eval(face, t, &mut v);
        direction(&v, eps, out);
    });
    Ok(SplitData {
        modulus: ScalarIBVP::new(data.flux.clone(), CellField::new(grid, 1, rho)?, modulus_boundary, data.final_time)?,
        direction: CellField::new(grid, n, theta)?,
        direction_inflow,
    })
}

/// Modulus solve, its flux record, direction transport and `U = rho theta`.
#[derive(Debug, Clone)]
pub struct KKState {
    pub modulus: ClawSolution,
    pub record: DensityFluxRecord,
    pub direction: TransportSolution,
    /// `U` at every time level; zero on vacuum cells.
    pub u: Vec<CellField>,
}

pub fn solve_kk(data: &KKData, cfl: f64) -> Result<KKState> {
    solve_split(&split_data(data)?, cfl)
}

/// Runs the split solve from already split data, so direction data may be
/// redefined on vacuum before solving.
pub fn solve_split(split: &SplitData, cfl: f64) -> Result<KKState> {
    let modulus = solve_claw(&split.modulus, cfl)?;
    let record = DensityFluxRecord::from_claw(&modulus)?;
    let problem = TransportIBVP::new(&record, split.direction.clone(), split.direction_inflow.clone())?;
    let direction = solve_transport(&problem)?;
    let eps = record.vacuum_threshold();
    let u = direction
        .q
        .iter()
        .zip(record.densities())
        .map(|(q, rho)| {
            let cells = rho.values().len();
            let values =
                q.values().iter().enumerate().map(|(k, &v)| {
                    let r = rho.values()[k % cells];
                    if r >= eps && r > 0.0 {
                        v
                    } else {
                        0.0
                    }
                });
            CellField::new(*rho.grid(), q.components(), values.collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KKState { modulus, record, direction, u })
}

impl KKState {
    pub fn final_state(&self) -> &CellField {
        self.u.last().expect("non-empty")
    }

    pub fn components(&self) -> usize {
        self.direction.components()
    }

    /// `max(sup |U0|, sup |U_b|)` over the data the modulus solve used.
    pub fn modulus_bound(&self) -> f64 {
        let (_, hi) = self.modulus.data_range();
        hi.max(0.0)
    }

    /// Smallest and largest modulus over all levels.
    pub fn modulus_range(&self) -> (f64, f64) {
        self.modulus.snapshots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.min()), hi.max(s.max())))
    }

    /// Largest `|theta|` over all levels and non-vacuum cells.
    pub fn max_direction_norm(&self) -> f64 {
        let m = self.components();
        let mut worst: f64 = 0.0;
        for n in 0..self.u.len() {
            let theta = self.direction.recovered(&self.record, n);
            let cells = theta.len() / m;
            for c in 0..cells {
                if theta[c].is_some() {
                    let s: f64 = (0..m).map(|j| theta[j * cells + c].unwrap_or(0.0).powi(2)).sum();
                    worst = worst.max(s.sqrt());
                }
            }
        }
        worst
    }

    /// `|| rho |theta|^2 - rho ||_L1` at level `n`, over non-vacuum cells.
    pub fn unit_defect(&self, n: usize) -> f64 {
        let m = self.components();
        let grid = self.record.grid();
        let theta = self.direction.recovered(&self.record, n);
        let rho = self.record.density(n).values();
        let cells = rho.len();
        (0..cells)
            .filter(|&c| theta[c].is_some())
            .map(|c| {
                let s: f64 = (0..m).map(|j| theta[j * cells + c].unwrap_or(0.0).powi(2)).sum();
                (rho[c] * s - rho[c]).abs()
            })
            .sum::<f64>()
            * grid.cell_volume()
    }
}

/// An entropy `eta(U)` with its flux `Q(U)`.
pub trait EntropyPair {
    fn entropy(&self, u: &[f64]) -> f64;
    fn flux(&self, u: &[f64], axis: usize) -> f64;
}

type Radial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Width of the quadrature panels behind radial entropy fluxes.
const PANEL: f64 = 1.0 / 64.0;
/// Beyond this many panels the table is not grown.
const MAX_PANELS: usize = 1 << 16;

/// Entropies of the modulus, `eta(U) = e(|U|)`, with fluxes
/// `Q_i(U) = int_0^|U| e'(s) (s f_i(s))' ds`.
#[derive(Clone)]
pub struct RadialEntropy {
    flux: FluxFamily,
    e: Radial,
    de: Radial,
    modulus: bool,
    /// Per axis, the flux integral up to `k * PANEL`, grown on demand.
    cumulative: Arc<Mutex<Vec<Vec<f64>>>>,
}

impl RadialEntropy {
    pub fn new(
        flux: FluxFamily,
        e: impl Fn(f64) -> f64 + Send + Sync + 'static,
        de: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let axes = flux.dim();
        RadialEntropy { flux, e: Arc::new(e), de: Arc::new(de), modulus: false, cumulative: Arc::new(Mutex::new(vec![vec![0.0]; axes])) }
    }

    /// `eta = |U|`, `Q_i = f_i(|U|) |U|`.
    pub fn modulus(flux: FluxFamily) -> Self {
        RadialEntropy { modulus: true, ..Self::new(flux, |r| r, |_| 1.0) }
    }

    /// `eta = |U|^2`.
    pub fn quadratic(flux: FluxFamily) -> Self {
        Self::new(flux, |r| r * r, |r| 2.0 * r)
    }

    /// Five-point Gauss-Legendre rule for the flux integrand on `[a, b]`.
    fn segment(&self, axis: usize, a: f64, b: f64) -> f64 {
        let v = self.flux.velocity(axis);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GAUSS
            .iter()
            .map(|&(x, w)| {
                let s = mid + half * x;
                half * w * (self.de)(s) * (v.value(s) + s * v.derivative(s))
            })
            .sum()
    }
}

impl std::fmt::Debug for RadialEntropy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialEntropy").field("modulus", &self.modulus).finish_non_exhaustive()
    }
}

// five-point Gauss-Legendre nodes and weights on [-1, 1]
const GAUSS: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

impl EntropyPair for RadialEntropy {
    fn entropy(&self, u: &[f64]) -> f64 {
        (self.e)(modulus(u))
    }

    fn flux(&self, u: &[f64], axis: usize) -> f64 {
        let r = modulus(u);
        if self.modulus {
            return self.flux.velocity(axis).value(r) * r;
        }
        if !r.is_finite() {
            return f64::NAN;
        }
        let k = (r / PANEL).floor() as usize;
        if k > MAX_PANELS {
            let h = r / MAX_PANELS as f64;
            return (0..MAX_PANELS).map(|j| self.segment(axis, j as f64 * h, (j + 1) as f64 * h)).sum();
        }
        let base = {
            let mut tables = self.cumulative.lock().unwrap_or_else(|e| e.into_inner());
            let table = &mut tables[axis];
            while table.len() <= k {
                let j = table.len() - 1;
                let next = table[j] + self.segment(axis, j as f64 * PANEL, (j + 1) as f64 * PANEL);
                table.push(next);
            }
            table[k]
        };
        base + self.segment(axis, k as f64 * PANEL, r)
    }
}

/// Number of sample points of the compatibility check.
pub const COMPATIBILITY_SAMPLES: usize = 100;

fn derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

/// Verifies `grad eta . D f_i = grad Q_i` at seeded points with
/// `|U| in [radius / 10, radius]`, by central differences.
pub fn check_compatibility(pair: &dyn EntropyPair, flux: &FluxFamily, components: usize, radius: f64, seed: u64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) || components == 0 {
        return invalid("compatibility check needs a positive radius and at least one component");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-3 * radius;
    let n = components;
    let field = |u: &[f64], axis: usize, l: usize| flux.velocity(axis).value(modulus(u)) * u[l];
    for _ in 0..COMPATIBILITY_SAMPLES {
        let mut u: Vec<f64> = loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if modulus(&v) > 0.1 {
                break v;
            }
        };
        let scale = rng.gen_range(0.1 * radius..=radius) / modulus(&u);
        u.iter_mut().for_each(|v| *v *= scale);
        let shifted = |k: usize, s: f64| {
            let mut w = u.clone();
            w[k] += s;
            w
        };
        let grad: Vec<f64> = (0..n).map(|l| derivative(|s| pair.entropy(&shifted(l, s)), h)).collect();
        for axis in 0..flux.dim() {
            for k in 0..n {
                let lhs: f64 = (0..n).map(|l| grad[l] * derivative(|s| field(&shifted(k, s), axis, l), h)).sum();
                let rhs = derivative(|s| pair.flux(&shifted(k, s), axis), h);
                if (lhs - rhs).abs() > 1e-8 * (1.0 + lhs.abs().max(rhs.abs())) {
                    return invalid(format!(
                        "entropy pair is incompatible with the flux at U = {u:?} (axis {axis}, direction {k}): {lhs} vs {rhs}"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Discrete `int int eta(U) d/dt phi + Q(U) . grad phi` for `phi >= 0`
/// vanishing at `t = 0`, `t = T` and on the boundary cells. Faces carry the
/// mean of the two adjacent entropy fluxes, so a constant state gives zero.
pub fn entropy_pair_check(
    state: &KKState,
    flux: &FluxFamily,
    pair: &dyn EntropyPair,
    phi: impl Fn(f64, &[f64]) -> f64,
    seed: u64,
) -> Result<f64> {
    let grid = *state.record.grid();
    let dim = grid.dim();
    let cells = grid.cell_count();
    let vol = grid.cell_volume();
    let m = state.components();
    let radius = state.u.iter().map(CellField::linf_norm).fold(state.modulus_bound(), f64::max);
    check_compatibility(pair, flux, m, if radius > 0.0 { radius } else { 1.0 }, seed)?;

    let times = state.record.times();
    let levels = times.len();
    let topo = state.record.topology();
    let mut boundary_cell = vec![false; cells];
    for f in &topo.boundary {
        boundary_cell[f.cell] = true;
    }
    let mut phi_at = Vec::with_capacity(levels);
    for (n, &t) in times.iter().enumerate() {
        let level: Vec<f64> = (0..cells).map(|c| phi(t, &grid.cell_center(c)[..dim])).collect();
        for (c, &v) in level.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("test function takes the value {v} at t = {t}"));
            }
            if v != 0.0 && (n == 0 || n + 1 == levels || boundary_cell[c]) {
                return invalid(format!("test function must vanish near the boundary of the cylinder (t = {t}, cell {c})"));
            }
        }
        phi_at.push(level);
    }
    let mut buf = vec![0.0; m];
    let values = |n: usize, c: usize, buf: &mut Vec<f64>| {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = state.u[n].get(j, c);
        }
    };
    let mut total = 0.0;
    for n in 0..levels - 1 {
        let dt = times[n + 1] - times[n];
        for c in 0..cells {
            values(n, c, &mut buf);
            total += vol * pair.entropy(&buf) * (phi_at[n + 1][c] - phi_at[n][c]);
        }
        let mut fluxes = vec![[0.0; 2]; cells];
        for (c, q) in fluxes.iter_mut().enumerate() {
            values(n, c, &mut buf);
            for a in 0..dim {
                q[a] = pair.flux(&buf, a);
            }
        }
        let mut spatial = 0.0;
        for f in &topo.interior {
            let q = 0.5 * (fluxes[f.low][f.axis] + fluxes[f.high][f.axis]);
            spatial += q * f.area * (phi_at[n][f.high] - phi_at[n][f.low]);
        }
        total += dt * spatial;
    }
    if !total.is_finite() {
        return Err(Error::Fault("entropy residual is not finite".into()));
    }
    Ok(total)
}
