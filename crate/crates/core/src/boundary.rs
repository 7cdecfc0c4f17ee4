use std::fmt;
use std::sync::Arc;

use crate::grid::BoundaryFace;

type FaceFn = dyn Fn(&BoundaryFace, f64, &mut [f64]) + Send + Sync;

/// Time-dependent data prescribed on boundary faces, with a fixed number of components.
#[derive(Clone)]
pub struct FaceData {
    components: usize,
    f: Arc<FaceFn>,
}

impl FaceData {
    pub fn new(components: usize, f: impl Fn(&BoundaryFace, f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        FaceData { components, f: Arc::new(f) }
    }

    pub fn scalar(f: impl Fn(&BoundaryFace, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, move |face, t, out| out[0] = f(face, t))
    }

    pub fn constant(values: &[f64]) -> Self {
        let values = values.to_vec();
        Self::new(values.len(), move |_, _, out| out.copy_from_slice(&values))
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn eval(&self, face: &BoundaryFace, t: f64, out: &mut [f64]) {
        (self.f)(face, t, out)
    }

    /// Values on every face at time `t`, face-major (`face * components + j`).
    pub fn eval_all<'a>(&self, faces: impl IntoIterator<Item = &'a BoundaryFace>, t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut buf = vec![0.0; self.components];
        for face in faces {
            self.eval(face, t, &mut buf);
            out.extend_from_slice(&buf);
        }
        out
    }

    /// Componentwise composition `h(data)`.
    pub fn map(&self, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> FaceData {
        let inner = self.clone();
        FaceData::new(self.components, move |face, t, out| {
            inner.eval(face, t, out);
            for v in out.iter_mut() {
                *v = h(*v);
            }
        })
    }
}

impl fmt::Debug for FaceData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FaceData").field("components", &self.components).finish_non_exhaustive()
    }
}
