//! Box domains, uniform Cartesian grids, face enumeration and cell fields.
//!
//! Cells are indexed row-major with axis 0 varying fastest, so the linear
//! index of cell `(i, j)` is `i + n[0] * j`. Interior faces are enumerated
//! axis by axis in the linear order of their low-side cell; boundary faces
//! axis by axis, low side before high side, in the linear order of the
//! adjacent cell.

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    n: [usize; MAX_DIM],
    dx: [f64; MAX_DIM],
}

impl Grid {
    /// Builds a grid on the box `[lo, hi]` with `n[i]` cells along axis `i`.
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        if hi.len() != dim || n.len() != dim {
            return Err(Error::InvalidGrid("lo, hi and n must have the same length".into()));
        }
        let mut grid = Grid { dim, lo: [0.0; MAX_DIM], hi: [1.0; MAX_DIM], n: [1; MAX_DIM], dx: [1.0; MAX_DIM] };
        for axis in 0..dim {
            if !lo[axis].is_finite() || !hi[axis].is_finite() || lo[axis] >= hi[axis] {
                return Err(Error::InvalidGrid(format!(
                    "degenerate box on axis {axis}: lo = {}, hi = {}",
                    lo[axis], hi[axis]
                )));
            }
            if n[axis] < 2 {
                return Err(Error::InvalidGrid(format!("axis {axis} needs at least 2 cells, got {}", n[axis])));
            }
            grid.lo[axis] = lo[axis];
            grid.hi[axis] = hi[axis];
            grid.n[axis] = n[axis];
            grid.dx[axis] = (hi[axis] - lo[axis]) / n[axis] as f64;
        }
        Ok(grid)
    }

    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::new(&[0.0], &[1.0], &[n])
    }

    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[0.0, 0.0], &[1.0, 1.0], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.dx[axis]
    }

    pub fn min_dx(&self) -> f64 {
        (0..self.dim).map(|a| self.dx[a]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_dx(&self) -> f64 {
        (0..self.dim).map(|a| self.dx[a]).fold(0.0, f64::max)
    }

    pub fn cell_count(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx[..self.dim].iter().product()
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    /// Area of a face normal to `axis`.
    pub fn face_area(&self, axis: usize) -> f64 {
        (0..self.dim).filter(|&a| a != axis).map(|a| self.dx[a]).product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n[..axis].iter().product()
    }

    pub fn multi_index(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = cell;
        for (axis, slot) in idx.iter_mut().enumerate().take(self.dim) {
            *slot = rest % self.n[axis];
            rest /= self.n[axis];
        }
        idx
    }

    pub fn linear_index(&self, idx: [usize; MAX_DIM]) -> usize {
        (0..self.dim).map(|a| idx[a] * self.stride(a)).sum()
    }

    pub fn cell_center(&self, cell: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(cell);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.lo[axis] + (idx[axis] as f64 + 0.5) * self.dx[axis];
        }
        x
    }

    /// Cell containing `x`, with points on the far boundary assigned to the last cell.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0; MAX_DIM];
        for axis in 0..self.dim {
            if x[axis] < self.lo[axis] || x[axis] > self.hi[axis] {
                return None;
            }
            let i = ((x[axis] - self.lo[axis]) / self.dx[axis]).floor() as usize;
            idx[axis] = i.min(self.n[axis] - 1);
        }
        Some(self.linear_index(idx))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    pub fn interior_face_count(&self) -> usize {
        (0..self.dim).map(|a| self.interior_faces_on_axis(a)).sum()
    }

    fn interior_faces_on_axis(&self, axis: usize) -> usize {
        (0..self.dim).map(|a| if a == axis { self.n[a] - 1 } else { self.n[a] }).product()
    }

    /// Position in [`Grid::interior_faces`] of the face whose low-side cell is `low` on `axis`.
    pub fn interior_face_index(&self, axis: usize, low: usize) -> usize {
        let idx = self.multi_index(low);
        debug_assert!(idx[axis] + 1 < self.n[axis]);
        let base: usize = (0..axis).map(|a| self.interior_faces_on_axis(a)).sum();
        let mut offset = 0;
        let mut stride = 1;
        for a in 0..self.dim {
            let extent = if a == axis { self.n[a] - 1 } else { self.n[a] };
            offset += idx[a] * stride;
            stride *= extent;
        }
        base + offset
    }

    pub fn interior_faces(&self) -> Vec<InteriorFace> {
        let mut faces = Vec::with_capacity(self.interior_face_count());
        for axis in 0..self.dim {
            let stride = self.stride(axis);
            let area = self.face_area(axis);
            for low in 0..self.cell_count() {
                let idx = self.multi_index(low);
                if idx[axis] + 1 >= self.n[axis] {
                    continue;
                }
                let mut center = self.cell_center(low);
                center[axis] += 0.5 * self.dx[axis];
                faces.push(InteriorFace { axis, low, high: low + stride, area, center });
            }
        }
        faces
    }

    pub fn boundary_faces(&self) -> BoundaryFaceSet {
        let mut faces = Vec::new();
        for axis in 0..self.dim {
            let area = self.face_area(axis);
            for side in [Side::Low, Side::High] {
                let wanted = match side {
                    Side::Low => 0,
                    Side::High => self.n[axis] - 1,
                };
                for cell in 0..self.cell_count() {
                    if self.multi_index(cell)[axis] != wanted {
                        continue;
                    }
                    let mut center = self.cell_center(cell);
                    let mut normal = [0.0; MAX_DIM];
                    match side {
                        Side::Low => {
                            center[axis] = self.lo[axis];
                            normal[axis] = -1.0;
                        }
                        Side::High => {
                            center[axis] = self.hi[axis];
                            normal[axis] = 1.0;
                        }
                    }
                    faces.push(BoundaryFace { id: faces.len(), cell, axis, side, normal, area, center });
                }
            }
        }
        BoundaryFaceSet { faces }
    }
}

/// Interior and boundary faces of a grid, enumerated once.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTopology {
    pub interior: Vec<InteriorFace>,
    pub boundary: BoundaryFaceSet,
}

impl FaceTopology {
    pub fn new(grid: &Grid) -> Self {
        FaceTopology { interior: grid.interior_faces(), boundary: grid.boundary_faces() }
    }

    /// Net outflow per cell from face-integrated fluxes.
    ///
    /// Interior fluxes are oriented along `+axis`, boundary fluxes along the
    /// outward normal. Faces are visited in enumeration order, interior
    /// faces first, so the accumulation order is fixed.
    pub fn net_outflow(&self, cells: usize, interior_flux: &[f64], boundary_flux: &[f64]) -> Vec<f64> {
        let mut net = vec![0.0; cells];
        for (face, &flux) in self.interior.iter().zip(interior_flux) {
            net[face.low] += flux;
            net[face.high] -= flux;
        }
        for (face, &flux) in self.boundary.iter().zip(boundary_flux) {
            net[face.cell] += flux;
        }
        net
    }

    /// Conservative update `new = old - dt / vol * net outflow`.
    pub fn apply(&self, grid: &Grid, old: &[f64], interior_flux: &[f64], boundary_flux: &[f64], dt: f64) -> Vec<f64> {
        let net = self.net_outflow(old.len(), interior_flux, boundary_flux);
        let ratio = dt / grid.cell_volume();
        old.iter().zip(&net).map(|(o, n)| o - ratio * n).collect()
    }
}

/// Relative defect of `sum (new - old) vol + dt * sum boundary flux = 0`.
pub fn mass_closure_defect(grid: &Grid, old: &[f64], new: &[f64], boundary_flux: &[f64], dt: f64) -> f64 {
    let vol = grid.cell_volume();
    let change: f64 = old.iter().zip(new).map(|(o, n)| (n - o) * vol).sum();
    let outflow: f64 = boundary_flux.iter().sum::<f64>() * dt;
    let scale = old.iter().chain(new).map(|v| v.abs() * vol).sum::<f64>()
        + boundary_flux.iter().map(|f| f.abs() * dt).sum::<f64>();
    if scale == 0.0 {
        0.0
    } else {
        (change + outflow).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

impl Side {
    /// Sign of the outward normal component along the face axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }
}

/// Face shared by two cells; fluxes across it are oriented along `+axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorFace {
    pub axis: usize,
    pub low: usize,
    pub high: usize,
    pub area: f64,
    pub center: [f64; MAX_DIM],
}

/// Face on the domain boundary; fluxes across it are oriented along the outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub id: usize,
    pub cell: usize,
    pub axis: usize,
    pub side: Side,
    pub normal: [f64; MAX_DIM],
    pub area: f64,
    pub center: [f64; MAX_DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFaceSet {
    faces: Vec<BoundaryFace>,
}

impl BoundaryFaceSet {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BoundaryFace> {
        self.faces.iter()
    }

    pub fn as_slice(&self) -> &[BoundaryFace] {
        &self.faces
    }
}

impl std::ops::Index<usize> for BoundaryFaceSet {
    type Output = BoundaryFace;

    fn index(&self, i: usize) -> &BoundaryFace {
        &self.faces[i]
    }
}

impl<'a> IntoIterator for &'a BoundaryFaceSet {
    type Item = &'a BoundaryFace;
    type IntoIter = std::slice::Iter<'a, BoundaryFace>;

    fn into_iter(self) -> Self::IntoIter {
        self.faces.iter()
    }
}

/// Cell averages of a scalar or vector quantity at one time level.
///
/// Values are stored component-major: the block for component `j` is
/// `values[j * cells..(j + 1) * cells]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidInput("a field needs at least one component".into()));
        }
        if values.len() != grid.cell_count() * components {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                grid.cell_count() * components,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at position {pos}")));
        }
        Ok(CellField { grid, components, values })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        CellField { grid, components, values: vec![0.0; grid.cell_count() * components] }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let cells = grid.cell_count();
        let values = value.iter().flat_map(|&v| std::iter::repeat_n(v, cells)).collect();
        CellField { grid, components: value.len(), values }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.cell_count()).map(|c| f(&grid.cell_center(c)[..grid.dim()])).collect();
        Self::new(grid, 1, values)
    }

    /// Samples a vector-valued `f` at cell centers; `f` writes `components` values.
    pub fn from_vector_fn(grid: Grid, components: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let cells = grid.cell_count();
        let mut values = vec![0.0; cells * components];
        let mut buf = vec![0.0; components];
        for c in 0..cells {
            f(&grid.cell_center(c)[..grid.dim()], &mut buf);
            for (j, v) in buf.iter().enumerate() {
                values[j * cells + c] = *v;
            }
        }
        Self::new(grid, components, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, j: usize) -> &[f64] {
        let cells = self.grid.cell_count();
        &self.values[j * cells..(j + 1) * cells]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [f64] {
        let cells = self.grid.cell_count();
        &mut self.values[j * cells..(j + 1) * cells]
    }

    pub fn get(&self, j: usize, cell: usize) -> f64 {
        self.values[j * self.grid.cell_count() + cell]
    }

    pub fn set(&mut self, j: usize, cell: usize, value: f64) {
        let cells = self.grid.cell_count();
        self.values[j * cells + cell] = value;
    }

    /// Sum over cells and components of `|value| * cell volume`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Integral of component `j` over the domain.
    pub fn integral(&self, j: usize) -> f64 {
        self.component(j).iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(pos) => Err(Error::Fault(format!("non-finite value at position {pos}"))),
            None => Ok(()),
        }
    }

    /// `L1` distance between two fields on the same grid.
    pub fn l1_distance(&self, other: &CellField) -> Result<f64> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        let sum: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(sum * self.grid.cell_volume())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_spacing() {
        let g = Grid::new(&[0.0], &[1.0], &[4]).unwrap();
        assert_eq!(g.dx(0), 0.25);
        assert_eq!(g.cell_count(), 4);
    }

    #[test]
    fn two_dimensional_spacing() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 2.0], &[2, 4]).unwrap();
        assert_eq!(g.dx(0), 0.5);
        assert_eq!(g.dx(1), 0.5);
        assert_eq!(g.cell_count(), 8);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(matches!(Grid::new(&[1.0], &[1.0], &[4]), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(&[0.0], &[1.0], &[1]).is_err());
        assert!(Grid::new(&[2.0, 0.0], &[1.0, 1.0], &[4, 4]).is_err());
        assert!(Grid::new(&[0.0; 3], &[1.0; 3], &[4; 3]).is_err());
    }

    #[test]
    fn boundary_faces_1d() {
        let g = Grid::unit_interval(4).unwrap();
        let faces = g.boundary_faces();
        assert_eq!(faces.len(), 2);
        assert_eq!(faces[0].normal[0], -1.0);
        assert_eq!(faces[1].normal[0], 1.0);
        assert_eq!(faces[0].cell, 0);
        assert_eq!(faces[1].cell, 3);
    }

    #[test]
    fn boundary_faces_2d() {
        let g = Grid::unit_square(2, 2).unwrap();
        assert_eq!(g.boundary_faces().len(), 8);
        let g = Grid::new(&[0.0, 0.0], &[1.0, 3.0], &[4, 6]).unwrap();
        let faces = g.boundary_faces();
        assert_eq!(faces.len(), 2 * (6 + 4));
        for f in &faces {
            assert_eq!(f.area, g.dx(1 - f.axis));
        }
    }

    #[test]
    fn closed_surface() {
        let g = Grid::new(&[0.0, -1.0], &[2.0, 1.0], &[5, 7]).unwrap();
        let mut sum = [0.0; 2];
        for f in &g.boundary_faces() {
            for a in 0..2 {
                sum[a] += f.area * f.normal[a];
            }
        }
        assert!(sum.iter().all(|s| s.abs() < 1e-14));
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[3, 5]).unwrap();
        for c in 0..g.cell_count() {
            assert_eq!(g.linear_index(g.multi_index(c)), c);
            assert_eq!(g.locate(&g.cell_center(c)[..2]), Some(c));
        }
    }

    #[test]
    fn interior_face_index_matches_enumeration() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[4, 3]).unwrap();
        let faces = g.interior_faces();
        assert_eq!(faces.len(), g.interior_face_count());
        for (k, f) in faces.iter().enumerate() {
            assert_eq!(g.interior_face_index(f.axis, f.low), k);
        }
    }

    #[test]
    fn norms() {
        let g = Grid::unit_interval(10).unwrap();
        let f = CellField::constant(g, &[2.0]);
        assert!((f.l1_norm() - 2.0).abs() < 1e-15);
        assert_eq!(f.linf_norm(), 2.0);

        let z = CellField::zeros(g, 1);
        assert_eq!(z.l1_norm(), 0.0);
        assert_eq!(z.linf_norm(), 0.0);

        let half = CellField::from_fn(g, |x| if x[0] < 0.5 { 3.0 } else { 0.0 }).unwrap();
        assert!((half.l1_norm() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = Grid::unit_interval(2).unwrap();
        assert!(CellField::new(g, 1, vec![1.0, f64::NAN]).is_err());
        assert!(CellField::new(g, 1, vec![1.0]).is_err());
    }
}
