//! Normal traces read off the schemes' own face fluxes.

use crate::boundary::FaceData;
use crate::error::{invalid, Result};
use crate::grid::{CellField, FaceTopology, Grid, Side, MAX_DIM};
use crate::transport::{solve_transport, DensityFluxRecord, FaceClass, TransportIBVP, TransportSolution};

/// Boundary traces of one transport solve, integrated over face area.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    grid: Grid,
    times: Vec<f64>,
    components: usize,
    /// Per step and face, `Tr(rho b)` (outward).
    pub mass: Vec<Vec<f64>>,
    /// Per step, `Tr(rho u b)` face-major (`face * m + j`).
    pub transported: Vec<Vec<f64>>,
    pub classes: Vec<Vec<FaceClass>>,
    pub rho0: CellField,
    pub q0: CellField,
    band: f64,
}

/// Copies the fluxes the schemes actually used.
pub fn extract_traces(record: &DensityFluxRecord, sol: &TransportSolution) -> Result<BoundaryTrace> {
    if sol.grid() != record.grid() || sol.times != record.times() {
        return invalid("transport solution was not computed on this record");
    }
    Ok(BoundaryTrace {
        grid: *record.grid(),
        times: record.times().to_vec(),
        components: sol.components(),
        mass: (0..record.steps()).map(|n| record.step(n).boundary_flux.clone()).collect(),
        transported: sol.boundary_flux.clone(),
        classes: sol.classes.clone(),
        rho0: record.density(0).clone(),
        q0: sol.initial_trace().clone(),
        band: record.sign_band(),
    })
}

impl BoundaryTrace {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn steps(&self) -> usize {
        self.mass.len()
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn sign_band(&self) -> f64 {
        self.band
    }

    /// Largest `|Tr(rho u b)| - bound |Tr(rho b)|` over all face-steps.
    pub fn bound_excess(&self, bound: f64) -> f64 {
        let m = self.components;
        let mut worst = f64::NEG_INFINITY;
        for (mass, tr) in self.mass.iter().zip(&self.transported) {
            for (b, f) in mass.iter().enumerate() {
                for j in 0..m {
                    worst = worst.max(tr[b * m + j].abs() - bound * f.abs());
                }
            }
        }
        worst
    }

    /// Face-steps whose label disagrees with the sign of the mass trace.
    pub fn mislabeled(&self) -> usize {
        self.mass
            .iter()
            .zip(&self.classes)
            .map(|(mass, classes)| mass.iter().zip(classes).filter(|(f, c)| FaceClass::of(**f, self.band) != **c).count())
            .sum()
    }

    /// `sum_n dt sum_faces Tr(rho u b)` for component `j`.
    pub fn net_outflow(&self, j: usize) -> f64 {
        let m = self.components;
        self.transported
            .iter()
            .enumerate()
            .map(|(n, tr)| self.dt(n) * tr.iter().skip(j).step_by(m).sum::<f64>())
            .sum()
    }

    /// `L1(Gamma x time)` distance of the transported traces.
    pub fn l1_distance(&self, other: &BoundaryTrace) -> Result<f64> {
        if self.grid != other.grid || self.times != other.times || self.components != other.components {
            return invalid("traces live on different records");
        }
        Ok(self
            .transported
            .iter()
            .zip(&other.transported)
            .enumerate()
            .map(|(n, (a, b))| self.dt(n) * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum())
    }
}

/// Outcome of comparing `h(Tr(rho u b) / Tr(rho b)) Tr(rho b)` against traces of
/// the `h`-renormalized solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormalizationReport {
    /// Worst deviation on inflow faces, against the renormalized solve.
    pub inflow: f64,
    /// Worst deviation on all non-characteristic faces, against `h` of the
    /// upwind value the scheme transported across the face.
    pub upwind: f64,
    /// Worst gap on outflow faces between the renormalized solve and `h` of
    /// the transported trace. Diagnostic only: upwind mixing does not commute
    /// with nonlinear `h` inside the domain.
    pub outflow_gap: f64,
    /// Largest `|h(Tr / Tr(rho b)) Tr(rho b)|`, at least 1.
    pub scale: f64,
}

impl RenormalizationReport {
    pub fn deviation(&self) -> f64 {
        self.inflow.max(self.upwind)
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.deviation() <= rel_tol * self.scale
    }
}

/// Checks the trace renormalization identity on every face-step with
/// `|Tr(rho b)| > eps_sign`.
pub fn renormalization_check(
    record: &DensityFluxRecord,
    problem: &TransportIBVP<'_>,
    sol: &TransportSolution,
    h: impl Fn(f64) -> f64 + Copy + Send + Sync + 'static,
) -> Result<RenormalizationReport> {
    let trace = extract_traces(record, sol)?;
    let renormalized_initial = CellField::new(
        *problem.initial.grid(),
        problem.components(),
        problem.initial.values().iter().map(|&v| h(v)).collect(),
    )?;
    let renormalized: FaceData = problem.inflow.map(h);
    let renorm_problem = TransportIBVP::new(record, renormalized_initial, renormalized)?;
    let renorm_trace = extract_traces(record, &solve_transport(&renorm_problem)?)?;

    let m = trace.components;
    let topo = record.topology();
    let mut report = RenormalizationReport { inflow: 0.0, upwind: 0.0, outflow_gap: 0.0, scale: 1.0 };
    for n in 0..trace.steps() {
        let rho = record.density(n).values();
        for (b, face) in topo.boundary.iter().enumerate() {
            let mass = trace.mass[n][b];
            if mass.abs() <= trace.band {
                continue;
            }
            for j in 0..m {
                let lhs = h(trace.transported[n][b * m + j] / mass) * mass;
                report.scale = report.scale.max(lhs.abs());
                let upwind = match trace.classes[n][b] {
                    FaceClass::Inflow => sol.inflow[n][b * m + j],
                    _ => {
                        let r = rho[face.cell];
                        if r > 0.0 {
                            sol.q[n].get(j, face.cell) / r
                        } else {
                            0.0
                        }
                    }
                };
                report.upwind = report.upwind.max((lhs - h(upwind) * mass).abs());
                let gap = (lhs - renorm_trace.transported[n][b * m + j]).abs();
                match trace.classes[n][b] {
                    FaceClass::Inflow => report.inflow = report.inflow.max(gap),
                    FaceClass::Outflow => report.outflow_gap = report.outflow_gap.max(gap),
                    FaceClass::Characteristic => {}
                }
            }
        }
    }
    Ok(report)
}

/// Fluxes of `(rho, rho u)` across the face plane `{x_axis = position}`, per
/// step and transverse cell, oriented along `+axis` and integrated over face area.
#[derive(Debug, Clone)]
pub struct HyperplaneTrace {
    pub axis: usize,
    /// Index of the face plane, `0..=n_axis`.
    pub plane: usize,
    /// Location of the plane actually used.
    pub position: f64,
    pub components: usize,
    pub dts: Vec<f64>,
    /// Per step, per transverse cell.
    pub mass: Vec<Vec<f64>>,
    /// Per step, transverse-cell-major (`cell * m + j`).
    pub transported: Vec<Vec<f64>>,
}

enum PlaneFace {
    Interior(usize),
    Boundary(usize, f64),
}

fn plane_faces(grid: &Grid, topo: &FaceTopology, axis: usize, plane: usize) -> Vec<PlaneFace> {
    let n = grid.n(axis);
    let transverse: Vec<usize> = (0..grid.cell_count()).filter(|&c| grid.multi_index(c)[axis] == 0).collect();
    transverse
        .iter()
        .map(|&c0| {
            let mut idx = grid.multi_index(c0);
            if plane == 0 || plane == n {
                let side = if plane == 0 { Side::Low } else { Side::High };
                idx[axis] = if plane == 0 { 0 } else { n - 1 };
                let cell = grid.linear_index(idx);
                let b = topo
                    .boundary
                    .iter()
                    .position(|f| f.cell == cell && f.axis == axis && f.side == side)
                    .expect("boundary face exists");
                PlaneFace::Boundary(b, side.sign())
            } else {
                idx[axis] = plane - 1;
                PlaneFace::Interior(grid.interior_face_index(axis, grid.linear_index(idx)))
            }
        })
        .collect()
}

/// Snaps `r` to the nearest face plane normal to `axis` and reads the fluxes
/// the schemes used there. Boundary planes are read from the boundary traces.
pub fn hyperplane_trace(record: &DensityFluxRecord, sol: &TransportSolution, axis: usize, r: f64) -> Result<HyperplaneTrace> {
    let grid = *record.grid();
    if sol.grid() != &grid || sol.times != record.times() {
        return invalid("transport solution was not computed on this record");
    }
    if axis >= grid.dim() {
        return invalid(format!("axis {axis} out of range for a {}-d grid", grid.dim()));
    }
    if !(r >= grid.lo(axis) && r <= grid.hi(axis)) {
        return invalid(format!("plane position {r} lies outside [{}, {}]", grid.lo(axis), grid.hi(axis)));
    }
    let plane = (((r - grid.lo(axis)) / grid.dx(axis)).round() as usize).min(grid.n(axis));
    let faces = plane_faces(&grid, record.topology(), axis, plane);
    let m = sol.components();
    let mut out = HyperplaneTrace {
        axis,
        plane,
        position: grid.lo(axis) + plane as f64 * grid.dx(axis),
        components: m,
        dts: (0..record.steps()).map(|n| record.dt(n)).collect(),
        mass: Vec::with_capacity(record.steps()),
        transported: Vec::with_capacity(record.steps()),
    };
    let nf = record.topology().interior.len();
    for n in 0..record.steps() {
        let step = record.step(n);
        let interior = if faces.iter().any(|f| matches!(f, PlaneFace::Interior(_))) {
            sol.interior_flux(record, n)
        } else {
            Vec::new()
        };
        let mut mass = Vec::with_capacity(faces.len());
        let mut transported = Vec::with_capacity(faces.len() * m);
        for f in &faces {
            match *f {
                PlaneFace::Interior(k) => {
                    mass.push(step.interior_flux[k]);
                    transported.extend((0..m).map(|j| interior[j * nf + k]));
                }
                PlaneFace::Boundary(b, sign) => {
                    mass.push(step.boundary_flux[b] * sign);
                    transported.extend((0..m).map(|j| sol.boundary_flux[n][b * m + j] * sign));
                }
            }
        }
        out.mass.push(mass);
        out.transported.push(transported);
    }
    Ok(out)
}

impl HyperplaneTrace {
    /// `L1(time x plane)` distance of the transported fluxes.
    pub fn l1_distance(&self, other: &HyperplaneTrace) -> Result<f64> {
        if self.axis != other.axis || self.dts != other.dts || self.transported.first().map(Vec::len) != other.transported.first().map(Vec::len) {
            return invalid("hyperplane traces are not comparable");
        }
        Ok(self
            .transported
            .iter()
            .zip(&other.transported)
            .zip(&self.dts)
            .map(|((a, b), dt)| dt * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum())
    }

    /// `sum_n dt sum_cells` of the transported flux, component `j`.
    pub fn total(&self, j: usize) -> f64 {
        self.transported.iter().zip(&self.dts).map(|(t, dt)| dt * t.iter().skip(j).step_by(self.components).sum::<f64>()).sum()
    }
}

/// Largest mismatch between the flux an interior plane removes from the
/// cells below it and the flux it adds to the cells above it, recomputed
/// independently from each side's cell update.
pub fn plane_jump(record: &DensityFluxRecord, sol: &TransportSolution, axis: usize, plane: usize) -> Result<f64> {
    let grid = *record.grid();
    if plane == 0 || plane >= grid.n(axis) {
        return invalid("jumps are defined on interior planes only");
    }
    let topo = record.topology();
    let faces = plane_faces(&grid, topo, axis, plane);
    let m = sol.components();
    let nf = topo.interior.len();
    let mut worst: f64 = 0.0;
    for n in 0..record.steps() {
        let flux = sol.interior_flux(record, n);
        for f in &faces {
            let PlaneFace::Interior(k) = *f else { continue };
            let face = &topo.interior[k];
            for j in 0..m {
                let mut single = vec![0.0; nf];
                single[k] = flux[j * nf + k];
                let net = topo.net_outflow(grid.cell_count(), &single, &vec![0.0; topo.boundary.len()]);
                worst = worst.max((net[face.low] + net[face.high]).abs());
            }
        }
    }
    Ok(worst)
}

/// Center of the transverse cell `k` of a plane normal to `axis`.
pub fn transverse_center(grid: &Grid, axis: usize, k: usize) -> [f64; MAX_DIM] {
    let cells: Vec<usize> = (0..grid.cell_count()).filter(|&c| grid.multi_index(c)[axis] == 0).collect();
    grid.cell_center(cells[k])
}
