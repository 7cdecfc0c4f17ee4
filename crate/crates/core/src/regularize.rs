//! Space-time mollification of a density/flux pair, the continuity defect of
//! the mollified pair, and a method-of-characteristics solver for smooth
//! velocity fields.
//!
//! Densities live at time levels and cells; fluxes live at steps and faces.
//! Both are mollified in index space with one kernel table, so wherever the
//! whole stencil fits inside the data the mollified pair inherits discrete
//! continuity exactly. Near the spatial and temporal edges the kernel is
//! truncated and renormalized, and the defect concentrates in a layer whose
//! width shrinks with the mollification scale.

use crate::boundary::FaceData;
use crate::error::{invalid, Error, Result};
use crate::grid::{CellField, FaceTopology, Grid, Side, MAX_DIM};
use crate::transport::{DensityFluxRecord, FaceClass, RecordStep, SIGN_BAND_REL};

/// Kernel scale `eps0 / m` for regularization index `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub eps0: f64,
    pub m: usize,
}

impl MollifierSpec {
    pub fn new(eps0: f64, m: usize) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) || m == 0 {
            return invalid(format!("mollifier needs eps0 > 0 and m >= 1 (got {eps0}, {m})"));
        }
        Ok(MollifierSpec { eps0, m })
    }

    pub fn scale(&self) -> f64 {
        self.eps0 / self.m as f64
    }

    /// Lower bound added to the mollified density.
    pub fn floor(&self) -> f64 {
        1.0 / self.m as f64
    }
}

/// The bump `(1 - |z|^2)^4` sampled on integer offsets `(time, x, y)` and
/// normalized to unit sum, stored as contiguous rows along `x`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    rows: Vec<KernelRow>,
}

#[derive(Debug, Clone)]
struct KernelRow {
    kt: isize,
    ky: isize,
    /// Weights for `kx = -half..=half`.
    half: isize,
    weights: Vec<f64>,
    /// `prefix[i] = weights[..i].sum()`.
    prefix: Vec<f64>,
}

impl KernelTable {
    /// `steps` are the index spacings `(dt, dx, dy)` in physical units; a zero
    /// spacing freezes that direction.
    pub fn new(scale: f64, steps: [f64; 3]) -> Self {
        let radius: Vec<isize> =
            steps.iter().map(|&h| if h > 0.0 { (scale / h).floor() as isize } else { 0 }).collect();
        let z = |k: isize, a: usize| (k as f64 * steps[a] / scale).powi(2);
        let mut rows = Vec::new();
        for kt in -radius[0]..=radius[0] {
            for ky in -radius[2]..=radius[2] {
                let rest = z(kt, 0) + z(ky, 2);
                if rest >= 1.0 {
                    continue;
                }
                let half = (-radius[1]..=radius[1]).filter(|&kx| rest + z(kx, 1) < 1.0).map(isize::abs).max().unwrap_or(0);
                let weights: Vec<f64> = (-half..=half).map(|kx| (1.0 - rest - z(kx, 1)).max(0.0).powi(4)).collect();
                rows.push(KernelRow { kt, ky, half, weights, prefix: Vec::new() });
            }
        }
        let total: f64 = rows.iter().flat_map(|r| r.weights.iter()).sum();
        for row in &mut rows {
            let mut acc = 0.0;
            row.prefix.push(0.0);
            for w in &mut row.weights {
                *w /= total;
                acc += *w;
                row.prefix.push(acc);
            }
        }
        KernelTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.weights.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.weights.iter()).sum()
    }

    /// Convolution over a `(t, x, y)` index box; entries outside the box are
    /// dropped and the remaining weights renormalized.
    pub fn apply(&self, values: &[f64], dims: [usize; 3]) -> Vec<f64> {
        let [nt, nx, ny] = dims;
        debug_assert_eq!(values.len(), nt * nx * ny);
        let mut out = vec![0.0; values.len()];
        for t in 0..nt {
            for y in 0..ny {
                for x in 0..nx {
                    let mut acc = 0.0;
                    let mut norm = 0.0;
                    for row in &self.rows {
                        let (st, sy) = (t as isize - row.kt, y as isize - row.ky);
                        if st < 0 || sy < 0 || st >= nt as isize || sy >= ny as isize {
                            continue;
                        }
                        // source x = x - kx for kx in [-half, half], clipped to [0, nx)
                        let kx_lo = (x as isize - (nx as isize - 1)).max(-row.half);
                        let kx_hi = (x as isize).min(row.half);
                        if kx_lo > kx_hi {
                            continue;
                        }
                        let (i0, i1) = ((kx_lo + row.half) as usize, (kx_hi + row.half) as usize + 1);
                        let w = &row.weights[i0..i1];
                        let base = (st as usize * ny + sy as usize) * nx;
                        // kx increases while the source index decreases
                        let src = &values[base + (x as isize - kx_hi) as usize..=base + (x as isize - kx_lo) as usize];
                        acc += w.iter().zip(src.iter().rev()).map(|(a, b)| a * b).sum::<f64>();
                        norm += row.prefix[i1] - row.prefix[i0];
                    }
                    out[(t * ny + y) * nx + x] = acc / norm;
                }
            }
        }
        out
    }
}

/// Face slot of a per-axis face lattice.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Interior(usize),
    Boundary(usize, f64),
}

/// Faces normal to each axis arranged as a lattice with `n_axis + 1` positions
/// along the axis, boundary faces at both ends.
#[derive(Debug, Clone)]
struct FaceLattice {
    dims: [[usize; 2]; MAX_DIM],
    slots: Vec<Vec<Slot>>,
}

impl FaceLattice {
    fn new(grid: &Grid, topo: &FaceTopology) -> Self {
        let dim = grid.dim();
        let mut dims = [[1, 1]; MAX_DIM];
        let mut slots = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut d = [1, 1];
            for b in 0..dim {
                d[b] = grid.n(b) + usize::from(a == b);
            }
            dims[a] = d;
            slots.push(vec![Slot::Interior(usize::MAX); d[0] * d[1]]);
        }
        let at = |d: [usize; 2], idx: [usize; 2]| idx[0] + d[0] * idx[1];
        for (k, f) in topo.interior.iter().enumerate() {
            let mut idx = grid.multi_index(f.low);
            idx[f.axis] += 1;
            slots[f.axis][at(dims[f.axis], idx)] = Slot::Interior(k);
        }
        for (b, f) in topo.boundary.iter().enumerate() {
            let mut idx = grid.multi_index(f.cell);
            if f.side == Side::High {
                idx[f.axis] += 1;
            }
            slots[f.axis][at(dims[f.axis], idx)] = Slot::Boundary(b, f.side.sign());
        }
        FaceLattice { dims, slots }
    }

    /// Lattice values oriented along `+axis`.
    fn gather(&self, axis: usize, step: &RecordStep) -> Vec<f64> {
        self.slots[axis]
            .iter()
            .map(|s| match *s {
                Slot::Interior(k) => step.interior_flux[k],
                Slot::Boundary(b, sign) => step.boundary_flux[b] * sign,
            })
            .collect()
    }

    fn scatter(&self, axis: usize, values: &[f64], step: &mut RecordStep) {
        for (s, &v) in self.slots[axis].iter().zip(values) {
            match *s {
                Slot::Interior(k) => step.interior_flux[k] = v,
                Slot::Boundary(b, sign) => step.boundary_flux[b] = v * sign,
            }
        }
    }
}

/// A density sequence and the face fluxes between its levels, not
/// necessarily satisfying continuity.
#[derive(Debug, Clone)]
pub struct SpaceTimePair {
    grid: Grid,
    times: Vec<f64>,
    densities: Vec<CellField>,
    steps: Vec<RecordStep>,
}

impl SpaceTimePair {
    pub fn from_record(record: &DensityFluxRecord) -> Self {
        SpaceTimePair {
            grid: *record.grid(),
            times: record.times().to_vec(),
            densities: record.densities().to_vec(),
            steps: (0..record.steps()).map(|n| record.step(n).clone()).collect(),
        }
    }

    /// Arbitrary bounded fields; only shapes are checked.
    pub fn from_fields(times: Vec<f64>, densities: Vec<CellField>, steps: Vec<RecordStep>) -> Result<Self> {
        if densities.is_empty() || times.len() != densities.len() || steps.len() + 1 != densities.len() {
            return invalid("pair needs levels = steps + 1");
        }
        let grid = *densities[0].grid();
        let topo = FaceTopology::new(&grid);
        if densities.iter().any(|d| d.grid() != &grid || d.components() != 1) {
            return invalid("densities must be scalar fields on one grid");
        }
        if densities.iter().any(|d| d.min() < 0.0) {
            return invalid("densities must be non-negative");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("time levels must increase strictly");
        }
        for s in &steps {
            if s.interior_flux.len() != topo.interior.len() || s.boundary_flux.len() != topo.boundary.len() {
                return invalid("flux step has the wrong number of faces");
            }
            if s.interior_flux.iter().chain(&s.boundary_flux).any(|v| !v.is_finite()) {
                return invalid("fluxes must be finite");
            }
        }
        Ok(SpaceTimePair { grid, times, densities, steps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    fn momentum_bound(&self) -> f64 {
        let topo = FaceTopology::new(&self.grid);
        let mut bound: f64 = 0.0;
        for s in &self.steps {
            for (f, v) in topo.interior.iter().zip(&s.interior_flux) {
                bound = bound.max(v.abs() / f.area);
            }
            for (f, v) in topo.boundary.iter().zip(&s.boundary_flux) {
                bound = bound.max(v.abs() / f.area);
            }
        }
        bound
    }
}

/// Mollified pair: densities `1/m + rho~` at time levels and mollified face
/// fluxes at steps.
#[derive(Debug, Clone)]
pub struct SmoothFields {
    grid: Grid,
    topo: FaceTopology,
    spec: MollifierSpec,
    times: Vec<f64>,
    density: Vec<CellField>,
    flux: Vec<RecordStep>,
    under_resolved: bool,
    source_momentum_bound: f64,
    kernel_total: f64,
    velocities: Vec<CellField>,
    midpoints: Vec<f64>,
    speed: f64,
}

/// Mollifies `pair` at scale `spec.scale()`. A scale below twice the largest
/// cell width is still processed but flagged as under-resolved.
pub fn mollify_pair(pair: &SpaceTimePair, spec: MollifierSpec) -> Result<SmoothFields> {
    let grid = pair.grid;
    let dim = grid.dim();
    let levels = pair.densities.len();
    let steps = pair.steps.len();
    let scale = spec.scale();
    let mean_dt = if steps > 0 { (pair.times[steps] - pair.times[0]) / steps as f64 } else { 0.0 };
    let mut spacing = [mean_dt, 0.0, 0.0];
    for a in 0..dim {
        spacing[a + 1] = grid.dx(a);
    }
    let kernel = KernelTable::new(scale, spacing);

    let cells = grid.cell_count();
    let cell_dims = [levels, grid.n(0), if dim > 1 { grid.n(1) } else { 1 }];
    let stacked: Vec<f64> = pair.densities.iter().flat_map(|d| d.values().iter().copied()).collect();
    let smoothed = kernel.apply(&stacked, cell_dims);
    let density = smoothed
        .chunks(cells)
        .map(|c| CellField::new(grid, 1, c.iter().map(|v| spec.floor() + v).collect()))
        .collect::<Result<Vec<_>>>()?;

    let topo = FaceTopology::new(&grid);
    let lattice = FaceLattice::new(&grid, &topo);
    let mut flux: Vec<RecordStep> = (0..steps)
        .map(|_| RecordStep { interior_flux: vec![0.0; topo.interior.len()], boundary_flux: vec![0.0; topo.boundary.len()] })
        .collect();
    for a in 0..dim {
        let d = lattice.dims[a];
        // integrated over each step, so interior continuity survives uneven steps
        let stacked: Vec<f64> = (0..steps)
            .flat_map(|n| {
                let dt = pair.times[n + 1] - pair.times[n];
                lattice.gather(a, &pair.steps[n]).into_iter().map(move |v| v * dt)
            })
            .collect();
        let smoothed = kernel.apply(&stacked, [steps, d[0], d[1]]);
        for (n, chunk) in smoothed.chunks(d[0] * d[1]).enumerate() {
            let dt = pair.times[n + 1] - pair.times[n];
            let rate: Vec<f64> = chunk.iter().map(|v| v / dt).collect();
            lattice.scatter(a, &rate, &mut flux[n]);
        }
    }
    let mut smooth = SmoothFields {
        grid,
        topo,
        spec,
        times: pair.times.clone(),
        density,
        flux,
        under_resolved: scale < 2.0 * grid.max_dx(),
        source_momentum_bound: pair.momentum_bound(),
        kernel_total: kernel.total(),
        velocities: Vec::new(),
        midpoints: pair.times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        speed: 0.0,
    };
    smooth.velocities = (0..steps).map(|n| smooth.compute_velocity(n)).collect();
    smooth.speed = smooth.velocities.iter().map(CellField::linf_norm).fold(0.0, f64::max);
    Ok(smooth)
}

/// The continuity defect `h_m` per step and its space-time L1 norm.
#[derive(Debug, Clone)]
pub struct Defect {
    pub values: Vec<CellField>,
    pub l1: f64,
}

impl SmoothFields {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> MollifierSpec {
        self.spec
    }

    pub fn under_resolved(&self) -> bool {
        self.under_resolved
    }

    pub fn kernel_total(&self) -> f64 {
        self.kernel_total
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.flux.len()
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    /// `rho_m` at time level `n`.
    pub fn density(&self, n: usize) -> &CellField {
        &self.density[n]
    }

    pub fn flux(&self, n: usize) -> &RecordStep {
        &self.flux[n]
    }

    /// Cell-centered `rho_m b_m` over step `n`: the mean of the two face
    /// flux densities along each axis.
    pub fn momentum(&self, n: usize) -> CellField {
        let dim = self.grid.dim();
        let cells = self.grid.cell_count();
        let mut values = vec![0.0; dim * cells];
        let step = &self.flux[n];
        for (f, &v) in self.topo.interior.iter().zip(&step.interior_flux) {
            let density = 0.5 * v / f.area;
            values[f.axis * cells + f.low] += density;
            values[f.axis * cells + f.high] += density;
        }
        for (f, &v) in self.topo.boundary.iter().zip(&step.boundary_flux) {
            values[f.axis * cells + f.cell] += 0.5 * v * f.side.sign() / f.area;
        }
        CellField::new(self.grid, dim, values).expect("finite momentum")
    }

    /// `b_m` over step `n`, the momentum divided by the step-averaged `rho_m`.
    pub fn velocity(&self, n: usize) -> &CellField {
        &self.velocities[n]
    }

    fn compute_velocity(&self, n: usize) -> CellField {
        let mut b = self.momentum(n);
        let cells = self.grid.cell_count();
        let (r0, r1) = (self.density[n].values(), self.density[n + 1].values());
        for j in 0..b.components() {
            for (c, v) in b.component_mut(j).iter_mut().enumerate() {
                *v /= 0.5 * (r0[c] + r1[c]);
            }
        }
        debug_assert_eq!(b.values().len(), cells * self.grid.dim());
        b
    }

    /// `linf(rho_m b_m) / linf(rho b)`; bounded by 4.
    pub fn momentum_ratio(&self) -> f64 {
        if self.source_momentum_bound == 0.0 {
            return 0.0;
        }
        let m = (0..self.steps()).map(|n| self.momentum(n).linf_norm()).fold(0.0, f64::max);
        m / self.source_momentum_bound
    }

    /// `h_m = d/dt rho_m + div(rho_m b_m)` per step, from the staggered pair.
    pub fn defect(&self) -> Result<Defect> {
        if self.density.len() < 3 {
            return invalid(format!("defect needs at least 3 time levels, got {}", self.density.len()));
        }
        let vol = self.grid.cell_volume();
        let cells = self.grid.cell_count();
        let mut values = Vec::with_capacity(self.steps());
        let mut l1 = 0.0;
        for n in 0..self.steps() {
            let dt = self.dt(n);
            let net = self.topo.net_outflow(cells, &self.flux[n].interior_flux, &self.flux[n].boundary_flux);
            let (r0, r1) = (self.density[n].values(), self.density[n + 1].values());
            let h: Vec<f64> = (0..cells).map(|c| (r1[c] - r0[c]) / dt + net[c] / vol).collect();
            l1 += dt * vol * h.iter().map(|v| v.abs()).sum::<f64>();
            values.push(CellField::new(self.grid, 1, h)?);
        }
        Ok(Defect { values, l1 })
    }

    pub fn max_speed(&self) -> f64 {
        self.speed
    }

    pub fn labels(&self) -> FaceLabels {
        let scale = self.flux.iter().flat_map(|s| s.boundary_flux.iter().chain(&s.interior_flux)).fold(0.0, |m: f64, v| m.max(v.abs()));
        let band = SIGN_BAND_REL * scale;
        FaceLabels {
            grid: self.grid,
            dts: (0..self.steps()).map(|n| self.dt(n)).collect(),
            classes: self.flux.iter().map(|s| s.boundary_flux.iter().map(|&f| FaceClass::of(f, band)).collect()).collect(),
        }
    }
}

/// A time-dependent velocity field for characteristic tracing.
pub trait VelocityField {
    fn velocity(&self, t: f64, x: &[f64], out: &mut [f64; MAX_DIM]);
    /// Upper bound on `|b|` over the space-time domain.
    fn max_speed(&self) -> f64;
}

/// A velocity given in closed form.
pub struct AnalyticVelocity<F> {
    pub f: F,
    pub max_speed: f64,
}

impl<F: Fn(f64, &[f64], &mut [f64; MAX_DIM])> VelocityField for AnalyticVelocity<F> {
    fn velocity(&self, t: f64, x: &[f64], out: &mut [f64; MAX_DIM]) {
        (self.f)(t, x, out)
    }

    fn max_speed(&self) -> f64 {
        self.max_speed
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    let v = a + w * (b - a);
    v.clamp(a.min(b), a.max(b))
}

/// Multilinear interpolation of component `j` on the cell-center lattice,
/// with positions clamped to the outermost centers.
fn interpolate(field: &CellField, j: usize, x: &[f64]) -> f64 {
    let grid = field.grid();
    let dim = grid.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for a in 0..dim {
        let n = grid.n(a);
        let s = ((x[a] - grid.lo(a)) / grid.dx(a) - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        base[a] = i;
        frac[a] = s - i as f64;
    }
    let v = field.component(j);
    let at = |i0: usize, i1: usize| v[grid.linear_index([i0, i1])];
    if dim == 1 {
        lerp(at(base[0], 0), at(base[0] + 1, 0), frac[0])
    } else {
        let lo = lerp(at(base[0], base[1]), at(base[0] + 1, base[1]), frac[0]);
        let hi = lerp(at(base[0], base[1] + 1), at(base[0] + 1, base[1] + 1), frac[0]);
        lerp(lo, hi, frac[1])
    }
}

impl VelocityField for SmoothFields {
    fn velocity(&self, t: f64, x: &[f64], out: &mut [f64; MAX_DIM]) {
        // step-centered samples, linear in time between step midpoints
        let mids = &self.midpoints;
        let k = mids.partition_point(|&m| m <= t);
        let (n0, n1, w) = if k == 0 {
            (0, 0, 0.0)
        } else if k == mids.len() {
            (k - 1, k - 1, 0.0)
        } else {
            (k - 1, k, (t - mids[k - 1]) / (mids[k] - mids[k - 1]))
        };
        for a in 0..self.grid.dim() {
            out[a] = lerp(interpolate(&self.velocities[n0], a, x), interpolate(&self.velocities[n1], a, x), w);
        }
    }

    fn max_speed(&self) -> f64 {
        SmoothFields::max_speed(self)
    }
}

/// Where a backward characteristic leaves the space-time cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Foot {
    /// Reached `t = 0` at this point.
    Initial([f64; MAX_DIM]),
    /// Crossed the lateral boundary at this time, point and boundary face.
    Lateral { t: f64, x: [f64; MAX_DIM], face: usize },
}

struct Tracer<'a, V: ?Sized> {
    field: &'a V,
    grid: Grid,
    faces: Vec<Option<usize>>,
}

impl<'a, V: VelocityField + ?Sized> Tracer<'a, V> {
    fn new(field: &'a V, grid: Grid) -> Self {
        let topo = FaceTopology::new(&grid);
        let cells = grid.cell_count();
        let mut faces = vec![None; 2 * MAX_DIM * cells];
        for f in &topo.boundary {
            faces[(2 * f.axis + usize::from(f.side == Side::High)) * cells + f.cell] = Some(f.id);
        }
        Tracer { field, grid, faces }
    }

    fn rk4(&self, tau: f64, x: [f64; MAX_DIM], h: f64) -> [f64; MAX_DIM] {
        let dim = self.grid.dim();
        let eval = |t: f64, p: &[f64; MAX_DIM]| {
            let mut v = [0.0; MAX_DIM];
            self.field.velocity(t, &p[..dim], &mut v);
            v
        };
        let shift = |p: &[f64; MAX_DIM], k: &[f64; MAX_DIM], s: f64| {
            let mut q = *p;
            for a in 0..dim {
                q[a] -= s * k[a];
            }
            q
        };
        let k1 = eval(tau, &x);
        let k2 = eval(tau - 0.5 * h, &shift(&x, &k1, 0.5 * h));
        let k3 = eval(tau - 0.5 * h, &shift(&x, &k2, 0.5 * h));
        let k4 = eval(tau - h, &shift(&x, &k3, h));
        let mut out = x;
        for a in 0..dim {
            out[a] -= h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        out
    }

    fn outside(&self, x: &[f64; MAX_DIM]) -> bool {
        (0..self.grid.dim()).any(|a| x[a] < self.grid.lo(a) || x[a] > self.grid.hi(a))
    }

    fn backtrack(&self, t: f64, x: [f64; MAX_DIM]) -> Result<Foot> {
        let grid = &self.grid;
        let speed = self.field.max_speed();
        if !(speed.is_finite()) {
            return Err(Error::Fault("velocity field is not bounded".into()));
        }
        let max_ds = if speed > 0.0 { grid.min_dx() / (2.0 * speed) } else { f64::INFINITY };
        let count = if t > 0.0 { (t / max_ds).ceil().max(1.0) as usize } else { 0 };
        let h = if count > 0 { t / count as f64 } else { 0.0 };
        let mut pos = x;
        for k in 0..count {
            let tau = t - k as f64 * h;
            let next = self.rk4(tau, pos, h);
            if !self.outside(&next) {
                pos = next;
                continue;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut hit = next;
            for _ in 0..200 {
                let inner = self.rk4(tau, pos, lo * h);
                let dist = (0..grid.dim()).map(|a| (hit[a] - inner[a]).abs()).fold(0.0, f64::max);
                if dist <= 1e-10 * grid.min_dx() {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let p = self.rk4(tau, pos, mid * h);
                if self.outside(&p) {
                    hi = mid;
                    hit = p;
                } else {
                    lo = mid;
                }
            }
            return Ok(self.lateral(tau - hi * h, hit));
        }
        if count as f64 * h > 2.0 * t.max(f64::MIN_POSITIVE) {
            return Err(Error::Fault("characteristic did not leave the domain within its budget".into()));
        }
        Ok(Foot::Initial(pos))
    }

    fn lateral(&self, t: f64, mut x: [f64; MAX_DIM]) -> Foot {
        let grid = &self.grid;
        let dim = grid.dim();
        let mut exit = (0, Side::Low, -1.0);
        for a in 0..dim {
            let below = grid.lo(a) - x[a];
            let above = x[a] - grid.hi(a);
            if below > exit.2 {
                exit = (a, Side::Low, below);
            }
            if above > exit.2 {
                exit = (a, Side::High, above);
            }
        }
        for a in 0..dim {
            x[a] = x[a].clamp(grid.lo(a), grid.hi(a));
        }
        let mut idx = [0usize; MAX_DIM];
        for a in 0..dim {
            idx[a] = (((x[a] - grid.lo(a)) / grid.dx(a)).floor().max(0.0) as usize).min(grid.n(a) - 1);
        }
        let cell = grid.linear_index(idx);
        let cells = grid.cell_count();
        let face = self.faces[(2 * exit.0 + usize::from(exit.1 == Side::High)) * cells + cell]
            .expect("every boundary cell side has a face");
        Foot::Lateral { t, x, face }
    }
}

/// Traces the backward characteristic through `(t, x)` with fixed-step RK4,
/// `ds <= dx / (2 |b|_inf)`, refining lateral hits by bisection.
pub fn backtrack(field: &(impl VelocityField + ?Sized), grid: &Grid, t: f64, x: &[f64]) -> Result<Foot> {
    let mut p = [0.0; MAX_DIM];
    p[..grid.dim()].copy_from_slice(&x[..grid.dim()]);
    Tracer::new(field, *grid).backtrack(t, p)
}

/// A space-time sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: [f64; MAX_DIM],
}

/// Solves `d/dt u + b . grad u = 0` at the samples by characteristics: `u0`
/// interpolated at the foot on `t = 0`, or the inflow datum where the path
/// leaves through the lateral boundary. Returns `m` values per sample.
pub fn characteristics_solve(
    field: &(impl VelocityField + ?Sized),
    initial: &CellField,
    inflow: &FaceData,
    final_time: f64,
    samples: &[Sample],
) -> Result<Vec<Vec<f64>>> {
    let grid = *initial.grid();
    let m = initial.components();
    if inflow.components() != m {
        return invalid("initial and inflow data have different component counts");
    }
    let tracer = Tracer::new(field, grid);
    let topo = FaceTopology::new(&grid);
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        if !(s.t >= 0.0 && s.t <= final_time) || !grid.contains(&s.x[..grid.dim()]) {
            return invalid(format!("sample ({}, {:?}) lies outside the space-time domain", s.t, &s.x[..grid.dim()]));
        }
        let values = match tracer.backtrack(s.t, s.x)? {
            Foot::Initial(x) => (0..m).map(|j| interpolate(initial, j, &x[..grid.dim()])).collect(),
            Foot::Lateral { t, face, .. } => {
                let mut v = vec![0.0; m];
                inflow.eval(&topo.boundary[face], t, &mut v);
                v
            }
        };
        out.push(values);
    }
    Ok(out)
}

/// Inflow/outflow/characteristic labels of every boundary face-step.
#[derive(Debug, Clone)]
pub struct FaceLabels {
    grid: Grid,
    dts: Vec<f64>,
    classes: Vec<Vec<FaceClass>>,
}

impl FaceLabels {
    pub fn new(grid: Grid, dts: Vec<f64>, classes: Vec<Vec<FaceClass>>) -> Result<Self> {
        let faces = FaceTopology::new(&grid).boundary.len();
        if dts.len() != classes.len() || classes.iter().any(|c| c.len() != faces) {
            return invalid("labels need one class per boundary face and step");
        }
        Ok(FaceLabels { grid, dts, classes })
    }

    pub fn from_record(record: &DensityFluxRecord) -> Self {
        FaceLabels {
            grid: *record.grid(),
            dts: (0..record.steps()).map(|n| record.dt(n)).collect(),
            classes: (0..record.steps()).map(|n| record.classify(n)).collect(),
        }
    }

    pub fn classes(&self) -> &[Vec<FaceClass>] {
        &self.classes
    }

    pub fn classes_mut(&mut self) -> &mut [Vec<FaceClass>] {
        &mut self.classes
    }
}

/// Measure (area x time) of the symmetric differences of the inflow and the
/// outflow sets against the reference, counted only where the reference face
/// is inflow or outflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorDisagreement {
    pub inflow: f64,
    pub outflow: f64,
}

pub fn indicator_convergence_study(candidates: &[FaceLabels], reference: &FaceLabels) -> Result<Vec<IndicatorDisagreement>> {
    let topo = FaceTopology::new(&reference.grid);
    candidates
        .iter()
        .map(|c| {
            if c.grid != reference.grid || c.classes.len() != reference.classes.len() {
                return invalid("labels were not computed on the same grid and steps");
            }
            let mut d = IndicatorDisagreement { inflow: 0.0, outflow: 0.0 };
            for (n, (cand, refc)) in c.classes.iter().zip(&reference.classes).enumerate() {
                for (f, (a, b)) in topo.boundary.iter().zip(cand.iter().zip(refc)) {
                    if *b == FaceClass::Characteristic {
                        continue;
                    }
                    let w = f.area * reference.dts[n];
                    if (*a == FaceClass::Inflow) != (*b == FaceClass::Inflow) {
                        d.inflow += w;
                    }
                    if (*a == FaceClass::Outflow) != (*b == FaceClass::Outflow) {
                        d.outflow += w;
                    }
                }
            }
            Ok(d)
        })
        .collect()
}
