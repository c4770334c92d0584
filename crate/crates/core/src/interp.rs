//! Piecewise affine interpolation of nodal data.
//!
//! A [`NodalField`] stores one value (scalar or vector) per mesh vertex and
//! evaluates anywhere in the domain through barycentric weights of the
//! containing simplex. This is the projection onto the space of continuous
//! piecewise affine functions; interpolation never overshoots the nodal
//! range, so sup norms are stable.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BarycentricLocation, SimplicialMesh};

/// Values attached to the vertices of a simplicial mesh.
///
/// `width` is 1 for scalar fields and d for fields of d-vectors (dynamics
/// samples use `width = dim`). Immutable after construction and safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct NodalField {
    mesh: Arc<SimplicialMesh>,
    width: usize,
    /// Vertex-major flat storage: `values[v * width .. (v+1) * width]`.
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Arc<SimplicialMesh>, width: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("field width must be positive".into()));
        }
        if values.len() != mesh.n_vertices() * width {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices() * width,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            let vertex = bad / width;
            return Err(Error::NonFinite {
                vertex,
                coords: mesh.vertex(vertex).to_vec(),
                context: "nodal value".into(),
            });
        }
        Ok(Self { mesh, width, values })
    }

    /// Scalar field from one value per vertex.
    pub fn from_scalars(mesh: Arc<SimplicialMesh>, values: Vec<f64>) -> Result<Self> {
        Self::new(mesh, 1, values)
    }

    /// Field holding the same value at every vertex.
    pub fn constant(mesh: Arc<SimplicialMesh>, width: usize, value: f64) -> Result<Self> {
        let n = mesh.n_vertices() * width;
        Self::new(mesh, width, vec![value; n])
    }

    /// Tabulates `f` at every vertex. Errors name the first vertex where a
    /// non-finite value appears.
    pub fn sample<F>(mesh: &Arc<SimplicialMesh>, width: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        if width == 0 {
            return Err(Error::InvalidArgument("field width must be positive".into()));
        }
        let mut values = vec![0.0; mesh.n_vertices() * width];
        for v in 0..mesh.n_vertices() {
            let point = mesh.vertex(v);
            let out = &mut values[v * width..(v + 1) * width];
            f(point, out);
            if out.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    vertex: v,
                    coords: point.to_vec(),
                    context: "sampled function value".into(),
                });
            }
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            width,
            values,
        })
    }

    /// Scalar convenience wrapper around [`NodalField::sample`].
    pub fn sample_scalar<F>(mesh: &Arc<SimplicialMesh>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        Self::sample(mesh, 1, |p, out| out[0] = f(p))
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }

    /// Value attached to vertex `i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    /// Scalar value at vertex `i` (width-1 fields).
    pub fn scalar(&self, i: usize) -> f64 {
        debug_assert_eq!(self.width, 1);
        self.values[i]
    }

    /// All values of a scalar field, vertex order.
    pub fn scalars(&self) -> &[f64] {
        debug_assert_eq!(self.width, 1);
        &self.values
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    /// Evaluates the piecewise affine interpolant at `point`.
    pub fn interpolate(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width];
        self.interpolate_into(point, &mut out)?;
        Ok(out)
    }

    /// Interpolates into a caller-provided buffer of length `width`.
    pub fn interpolate_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: out.len(),
            });
        }
        let mut coords = vec![0.0; self.mesh.dim() + 1];
        let simplex = self.mesh.locate_into(point, &mut coords)?;
        self.eval_in_simplex(simplex, &coords, out);
        Ok(())
    }

    /// Interpolates a scalar field at `point`.
    pub fn interpolate_scalar(&self, point: &[f64]) -> Result<f64> {
        debug_assert_eq!(self.width, 1);
        let mut coords = vec![0.0; self.mesh.dim() + 1];
        let simplex = self.mesh.locate_into(point, &mut coords)?;
        Ok(self.scalar_in_simplex(simplex, &coords))
    }

    /// Evaluates at a previously located point.
    pub fn at_location(&self, loc: &BarycentricLocation) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.eval_in_simplex(loc.simplex_index, &loc.coords, &mut out);
        out
    }

    pub(crate) fn eval_in_simplex(&self, simplex: usize, coords: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let verts = self.mesh.simplex_vertices(simplex);
        for (&v, &w) in verts.iter().zip(coords) {
            let vals = self.value(v);
            for (o, &x) in out.iter_mut().zip(vals) {
                *o += w * x;
            }
        }
    }

    pub(crate) fn scalar_in_simplex(&self, simplex: usize, coords: &[f64]) -> f64 {
        let verts = self.mesh.simplex_vertices(simplex);
        verts
            .iter()
            .zip(coords)
            .map(|(&v, &w)| w * self.values[v])
            .sum()
    }

    /// Largest absolute nodal value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute nodal difference against another field on the same
    /// mesh.
    pub fn sup_diff(&self, other: &NodalField) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}
