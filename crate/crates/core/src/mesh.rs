//! Regular simplicial triangulations of axis-aligned boxes.
//!
//! A box domain is gridded into uniform cells and every cell is split into
//! n! simplices by the Kuhn (Freudenthal) subdivision. The resulting
//! triangulation is conforming, covers the closed box exactly and admits
//! O(1) point location: the containing cell follows from coordinate
//! division, the simplex within the cell from sorting the fractional
//! coordinates.

use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest vertex or simplex count accepted by the mesh builder.
const MAX_ENTITIES: usize = 50_000_000;

/// Coordinates this far below zero indicate a broken point location.
const BARYCENTRIC_SLACK: f64 = 1e-12;

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_n, upper_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidArgument(
                "domain must have at least one dimension".into(),
            ));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "domain bounds must be finite (dimension {i})"
                )));
            }
            if lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "domain requires lower < upper, got [{lo}, {hi}] in dimension {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Membership in the closed box.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&p, &lo), &hi)| p >= lo && p <= hi)
    }

    /// Componentwise projection onto the closed box. Identity on interior
    /// points and idempotent.
    pub fn clamp(&self, point: &[f64]) -> Vec<f64> {
        let mut out = point.to_vec();
        self.clamp_in_place(&mut out);
        out
    }

    /// Projects in place; returns true when any coordinate was moved.
    pub fn clamp_in_place(&self, point: &mut [f64]) -> bool {
        let mut moved = false;
        for ((p, &lo), &hi) in point.iter_mut().zip(&self.lower).zip(&self.upper) {
            if *p < lo {
                *p = lo;
                moved = true;
            } else if *p > hi {
                *p = hi;
                moved = true;
            }
        }
        moved
    }
}

impl fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "[{}, {}]", self.lower[i], self.upper[i])?;
        }
        Ok(())
    }
}

/// A point expressed in barycentric coordinates of its containing simplex.
///
/// `coords[j]` weights the j-th vertex of the simplex; the weights are
/// nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricLocation {
    pub simplex_index: usize,
    pub coords: Vec<f64>,
}

/// Uniform Kuhn triangulation of a box domain.
///
/// Immutable after construction; all queries are read-only and safe to run
/// concurrently.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    domain: BoxDomain,
    cells_per_dim: Vec<usize>,
    cell_size: Vec<f64>,
    /// Row-major strides over the cell lattice (last dimension fastest).
    cell_strides: Vec<usize>,
    /// Flat vertex coordinates, `dim` entries per vertex.
    vertices: Vec<f64>,
    /// Flat vertex indices, `dim + 1` entries per simplex. Simplices of one
    /// cell are stored contiguously, ordered by the lexicographic rank of
    /// their axis permutation.
    simplices: Vec<usize>,
    n_vertices: usize,
    n_simplices: usize,
    factorials: Vec<usize>,
    /// Maximum simplex diameter.
    k: f64,
}

impl SimplicialMesh {
    /// Builds the uniform triangulation with `cells_per_dim[d]` cells along
    /// dimension `d`; every cell is split into n! Kuhn simplices.
    pub fn uniform(domain: BoxDomain, cells_per_dim: &[usize]) -> Result<Self> {
        let n = domain.dim();
        if cells_per_dim.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: cells_per_dim.len(),
            });
        }
        if let Some(d) = cells_per_dim.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!(
                "cells_per_dim must be at least 1 in every dimension (dimension {d} is 0)"
            )));
        }

        let mut factorials = vec![1usize; n + 1];
        for i in 1..=n {
            factorials[i] = factorials[i - 1]
                .checked_mul(i)
                .ok_or_else(|| Error::InvalidArgument("dimension too large".into()))?;
        }

        let n_vertices = cells_per_dim
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c + 1))
            .filter(|&v| v <= MAX_ENTITIES)
            .ok_or_else(|| Error::InvalidArgument("mesh too large".into()))?;
        let n_cells = cells_per_dim.iter().product::<usize>();
        let n_simplices = n_cells
            .checked_mul(factorials[n])
            .filter(|&v| v <= MAX_ENTITIES)
            .ok_or_else(|| Error::InvalidArgument("mesh too large".into()))?;

        let cell_size: Vec<f64> = (0..n)
            .map(|d| (domain.upper[d] - domain.lower[d]) / cells_per_dim[d] as f64)
            .collect();

        // Row-major strides, last dimension fastest.
        let mut vertex_strides = vec![1usize; n];
        let mut cell_strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            vertex_strides[d] = vertex_strides[d + 1] * (cells_per_dim[d + 1] + 1);
            cell_strides[d] = cell_strides[d + 1] * cells_per_dim[d + 1];
        }

        let mut vertices = vec![0.0; n_vertices * n];
        let mut lattice = vec![0usize; n];
        for v in 0..n_vertices {
            for d in 0..n {
                vertices[v * n + d] = if lattice[d] == cells_per_dim[d] {
                    domain.upper[d]
                } else {
                    domain.lower[d] + lattice[d] as f64 * cell_size[d]
                };
            }
            // Advance the lattice multi-index (last dimension fastest).
            for d in (0..n).rev() {
                lattice[d] += 1;
                if lattice[d] <= cells_per_dim[d] {
                    break;
                }
                lattice[d] = 0;
            }
        }

        // Kuhn subdivision: the simplex of permutation p has vertices
        // c, c+e_{p(0)}, c+e_{p(0)}+e_{p(1)}, ... starting at cell corner c.
        let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
        let mut simplices = Vec::with_capacity(n_simplices * (n + 1));
        let mut cell = vec![0usize; n];
        for _ in 0..n_cells {
            let corner: usize = (0..n).map(|d| cell[d] * vertex_strides[d]).sum();
            for perm in &perms {
                let mut idx = corner;
                simplices.push(idx);
                for &axis in perm {
                    idx += vertex_strides[axis];
                    simplices.push(idx);
                }
            }
            for d in (0..n).rev() {
                cell[d] += 1;
                if cell[d] < cells_per_dim[d] {
                    break;
                }
                cell[d] = 0;
            }
        }

        let mut mesh = Self {
            domain,
            cells_per_dim: cells_per_dim.to_vec(),
            cell_size,
            cell_strides,
            vertices,
            simplices,
            n_vertices,
            n_simplices,
            factorials,
            k: 0.0,
        };
        mesh.k = mesh.max_simplex_diameter();
        Ok(mesh)
    }

    fn max_simplex_diameter(&self) -> f64 {
        let n = self.dim();
        let mut k = 0.0f64;
        for s in 0..self.n_simplices {
            let verts = self.simplex_vertices(s);
            for a in 0..verts.len() {
                for b in (a + 1)..verts.len() {
                    let pa = self.vertex(verts[a]);
                    let pb = self.vertex(verts[b]);
                    let d2: f64 = (0..n).map(|d| (pa[d] - pb[d]).powi(2)).sum();
                    k = k.max(d2.sqrt());
                }
            }
        }
        k
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    /// Maximum simplex diameter (the spatial resolution of the mesh).
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_simplices(&self) -> usize {
        self.n_simplices
    }

    /// Coordinates of vertex `i`.
    pub fn vertex(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.vertices[i * n..(i + 1) * n]
    }

    /// Vertex indices of simplex `j`, corner first.
    pub fn simplex_vertices(&self, j: usize) -> &[usize] {
        let m = self.dim() + 1;
        &self.simplices[j * m..(j + 1) * m]
    }

    /// Locates `point` and returns its barycentric representation.
    ///
    /// Points on shared faces are assigned deterministically (stable sort of
    /// the fractional coordinates). Errors when the point lies outside the
    /// closed box; callers that want projection clamp first.
    pub fn locate(&self, point: &[f64]) -> Result<BarycentricLocation> {
        let mut coords = vec![0.0; self.dim() + 1];
        let simplex_index = self.locate_into(point, &mut coords)?;
        Ok(BarycentricLocation {
            simplex_index,
            coords,
        })
    }

    /// Allocation-light variant of [`SimplicialMesh::locate`]; writes the
    /// barycentric coordinates into `coords` (length dim+1) and returns the
    /// simplex index.
    pub fn locate_into(&self, point: &[f64], coords: &mut [f64]) -> Result<usize> {
        let n = self.dim();
        if point.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: point.len(),
            });
        }
        if !self.domain.contains(point) {
            return Err(Error::OutOfDomain {
                point: point.to_vec(),
            });
        }
        if coords.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                actual: coords.len(),
            });
        }

        let mut cell_flat = 0usize;
        let mut frac = vec![0.0f64; n];
        for d in 0..n {
            let raw = (point[d] - self.domain.lower[d]) / self.cell_size[d];
            let cell = (raw.floor() as usize).min(self.cells_per_dim[d] - 1);
            frac[d] = (raw - cell as f64).clamp(0.0, 1.0);
            cell_flat += cell * self.cell_strides[d];
        }

        // Kuhn simplex: order the axes by descending fractional coordinate;
        // stable sort keeps face points deterministic.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap());

        coords[0] = 1.0 - frac[order[0]];
        for j in 1..n {
            coords[j] = frac[order[j - 1]] - frac[order[j]];
        }
        coords[n] = frac[order[n - 1]];

        let mut negative = false;
        for c in coords.iter_mut() {
            if *c < 0.0 {
                if *c < -BARYCENTRIC_SLACK {
                    return Err(Error::Internal(format!(
                        "negative barycentric coordinate {c} for point {point:?}"
                    )));
                }
                *c = 0.0;
                negative = true;
            }
        }
        if negative {
            let sum: f64 = coords.iter().sum();
            for c in coords.iter_mut() {
                *c /= sum;
            }
        }

        Ok(cell_flat * self.factorials[n] + permutation_rank(&order, &self.factorials))
    }
}

/// Lexicographic rank of a permutation of 0..n (Lehmer code).
fn permutation_rank(perm: &[usize], factorials: &[usize]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller_after = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        rank += smaller_after * factorials[n - 1 - i];
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_interval(cells: usize) -> SimplicialMesh {
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        SimplicialMesh::uniform(domain, &[cells]).unwrap()
    }

    #[test]
    fn uniform_1d_counts_and_diameter() {
        let mesh = unit_interval(4);
        assert_eq!(mesh.n_vertices(), 5);
        assert_eq!(mesh.n_simplices(), 4);
        assert_eq!(mesh.k(), 0.25);
        let xs: Vec<f64> = (0..5).map(|i| mesh.vertex(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn uniform_2d_kuhn_split() {
        // 2x2 cells on the unit square: 9 vertices, 2 triangles per cell.
        let domain = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mesh = SimplicialMesh::uniform(domain, &[2, 2]).unwrap();
        assert_eq!(mesh.n_vertices(), 9);
        assert_eq!(mesh.n_simplices(), 8);
        assert!((mesh.k() - (2.0f64).sqrt() / 2.0).abs() < 1e-15);

        // Every triangle carries half a cell of area.
        for s in 0..mesh.n_simplices() {
            let v = mesh.simplex_vertices(s);
            let a = mesh.vertex(v[0]);
            let b = mesh.vertex(v[1]);
            let c = mesh.vertex(v[2]);
            let area = 0.5
                * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
            assert!((area - 0.125).abs() < 1e-15);
        }

        // Every vertex appears in at least one simplex.
        let mut seen = vec![false; mesh.n_vertices()];
        for s in 0..mesh.n_simplices() {
            for &v in mesh.simplex_vertices(s) {
                seen[v] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn zero_cells_is_rejected() {
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let err = SimplicialMesh::uniform(domain, &[0]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn degenerate_domain_is_rejected() {
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn locate_at_vertex_is_sharp() {
        let mesh = unit_interval(4);
        let loc = mesh.locate(&[0.5]).unwrap();
        let verts = mesh.simplex_vertices(loc.simplex_index);
        let weights: Vec<(usize, f64)> = verts
            .iter()
            .copied()
            .zip(loc.coords.iter().copied())
            .collect();
        let hot: Vec<_> = weights.iter().filter(|(_, w)| *w > 0.0).collect();
        assert_eq!(hot.len(), 1);
        assert_eq!(hot[0].1, 1.0);
        assert_eq!(mesh.vertex(hot[0].0), &[0.5]);
    }

    #[test]
    fn locate_1d_midpoint() {
        let mesh = unit_interval(4);
        let loc = mesh.locate(&[0.125]).unwrap();
        assert_eq!(loc.simplex_index, 0);
        assert_eq!(mesh.simplex_vertices(0), &[0, 1]);
        assert!((loc.coords[0] - 0.5).abs() < 1e-15);
        assert!((loc.coords[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn locate_outside_errors() {
        let domain = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mesh = SimplicialMesh::uniform(domain, &[2, 2]).unwrap();
        let err = mesh.locate(&[2.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. }));
    }

    #[test]
    fn locate_upper_boundary() {
        let domain = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mesh = SimplicialMesh::uniform(domain, &[3, 3]).unwrap();
        let loc = mesh.locate(&[1.0, 1.0]).unwrap();
        let verts = mesh.simplex_vertices(loc.simplex_index);
        let rebuilt = reconstruct(&mesh, verts, &loc.coords);
        assert!((rebuilt[0] - 1.0).abs() < 1e-14);
        assert!((rebuilt[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn clamp_examples() {
        let line = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(line.clamp(&[0.5]), vec![0.5]);
        assert_eq!(line.clamp(&[1.3]), vec![1.0]);
        let square = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(square.clamp(&[-0.2, 0.5]), vec![0.0, 0.5]);
        // Idempotent.
        let once = square.clamp(&[3.0, -4.0]);
        assert_eq!(square.clamp(&once), once);
    }

    fn reconstruct(mesh: &SimplicialMesh, verts: &[usize], coords: &[f64]) -> Vec<f64> {
        let n = mesh.dim();
        let mut out = vec![0.0; n];
        for (&v, &w) in verts.iter().zip(coords) {
            for (o, &x) in out.iter_mut().zip(mesh.vertex(v)) {
                *o += w * x;
            }
        }
        out
    }

    #[test]
    fn partition_of_unity_on_random_points() {
        let domain = BoxDomain::new(vec![-1.0, 0.5, 2.0], vec![1.0, 2.5, 5.0]).unwrap();
        let mesh = SimplicialMesh::uniform(domain.clone(), &[3, 4, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let p: Vec<f64> = (0..3)
                .map(|d| rng.gen_range(domain.lower()[d]..=domain.upper()[d]))
                .collect();
            let loc = mesh.locate(&p).unwrap();
            assert!(loc.coords.iter().all(|&c| c >= 0.0));
            let sum: f64 = loc.coords.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
            let verts = mesh.simplex_vertices(loc.simplex_index);
            let rebuilt = reconstruct(&mesh, verts, &loc.coords);
            for d in 0..3 {
                assert!((rebuilt[d] - p[d]).abs() <= 1e-10 * mesh.k());
            }
        }
    }

    #[test]
    fn mesh_diameter_matches_cell_diagonal() {
        let domain = BoxDomain::new(vec![0.0, -2.0], vec![3.0, 2.0]).unwrap();
        let mesh = SimplicialMesh::uniform(domain, &[6, 8]).unwrap();
        let expected = ((3.0f64 / 6.0).powi(2) + (4.0f64 / 8.0).powi(2)).sqrt();
        assert!((mesh.k() - expected).abs() < 1e-13);
    }

    #[test]
    fn face_points_are_deterministic() {
        let domain = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mesh = SimplicialMesh::uniform(domain, &[2, 2]).unwrap();
        // Point on the diagonal face shared by the two Kuhn triangles of a
        // cell: equal fractions, so the stable sort keeps axis order 0,1.
        let a = mesh.locate(&[0.25, 0.25]).unwrap();
        let b = mesh.locate(&[0.25, 0.25]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.simplex_index % 2, 0);
    }
}
