//! Conforming triangular meshes with facet connectivity.
//!
//! Facets are stored once and oriented from their lower-indexed owner `K1`
//! towards the higher-indexed owner `K2`; boundary facets carry the outward
//! normal of their single owner. Element `k` has local edges `e = 0, 1, 2`
//! joining its vertices `e` and `(e + 1) % 3`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm2, sub, Point, Real};

/// Geometry and adjacency of one facet.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetGeom<T> {
    /// Endpoint vertex indices, ascending.
    pub vertices: [usize; 2],
    /// Lower-indexed owner.
    pub k1: usize,
    /// Higher-indexed owner; `None` on the boundary.
    pub k2: Option<usize>,
    /// Local edge index of this facet inside `k1` and (if present) `k2`.
    pub local: [usize; 2],
    /// Unit normal pointing out of `k1`.
    pub normal: Point<T>,
    /// Length `|Λ|`.
    pub measure: T,
    /// Diameter `h_Λ`; equals the length for straight segments.
    pub diameter: T,
    pub midpoint: Point<T>,
}

impl<T: Real> FacetGeom<T> {
    pub fn is_boundary(&self) -> bool {
        self.k2.is_none()
    }

    /// Owner on side 1 or 2.
    pub fn owner(&self, side: usize) -> Option<usize> {
        match side {
            1 => Some(self.k1),
            2 => self.k2,
            _ => None,
        }
    }

    /// Point at arclength fraction `s ∈ [0, 1]` from `vertices[0]`.
    pub fn point_at(&self, mesh_vertices: &[Point<T>], s: T) -> Point<T> {
        let a = mesh_vertices[self.vertices[0]];
        let b = mesh_vertices[self.vertices[1]];
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }
}

/// Facet table produced by [`extract_facets`].
#[derive(Debug, Clone, PartialEq)]
pub struct FacetTable<T> {
    pub facets: Vec<FacetGeom<T>>,
    /// Facet index of each local edge of each element.
    pub element_facets: Vec<[usize; 3]>,
}

impl<T: Real> FacetTable<T> {
    pub fn interior(&self) -> impl Iterator<Item = (usize, &FacetGeom<T>)> {
        self.facets.iter().enumerate().filter(|(_, f)| !f.is_boundary())
    }

    pub fn boundary(&self) -> impl Iterator<Item = (usize, &FacetGeom<T>)> {
        self.facets.iter().enumerate().filter(|(_, f)| f.is_boundary())
    }
}

/// A conforming triangulation of a polygonal domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    /// Spatial dimension used by the general-`d` exponents (always 2 here).
    pub dim: usize,
    pub vertices: Vec<Point<T>>,
    /// Counterclockwise vertex triples.
    pub elements: Vec<[usize; 3]>,
    pub facets: Vec<FacetGeom<T>>,
    pub element_facets: Vec<[usize; 3]>,
    /// `|K|`.
    pub areas: Vec<T>,
    /// `h_K`, the longest edge.
    pub diameters: Vec<T>,
    pub centroids: Vec<Point<T>>,
}

fn signed_area<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    let ab = sub(b, a);
    let ac = sub(c, a);
    T::half() * (ab[0] * ac[1] - ab[1] * ac[0])
}

/// Builds the facet table of a triangle list.
///
/// Facets come out sorted by their (ascending) endpoint pair, so the table is
/// a pure function of the element list.
pub fn extract_facets<T: Real>(
    vertices: &[Point<T>],
    elements: &[[usize; 3]],
) -> Result<FacetTable<T>> {
    let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (k, tri) in elements.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            if a == b {
                return Err(Error::MeshTopology(format!(
                    "element {k} repeats vertex {a}"
                )));
            }
            edges.entry((a.min(b), a.max(b))).or_default().push((k, e));
        }
    }

    let mut facets = Vec::with_capacity(edges.len());
    let mut element_facets = vec![[usize::MAX; 3]; elements.len()];
    for (&(a, b), owners) in &edges {
        if owners.len() > 2 {
            return Err(Error::MeshTopology(format!(
                "edge ({a}, {b}) is shared by {} elements",
                owners.len()
            )));
        }
        if owners.len() == 2 && owners[0].0 == owners[1].0 {
            return Err(Error::MeshTopology(format!(
                "edge ({a}, {b}) appears twice in element {}",
                owners[0].0
            )));
        }
        let (k1, e1) = owners[0];
        let k2 = owners.get(1).copied();
        // The counterclockwise traversal of k1 has the domain on its left.
        let tri = elements[k1];
        let p = vertices[tri[e1]];
        let q = vertices[tri[(e1 + 1) % 3]];
        let d = sub(q, p);
        let len = norm2(d);
        if len <= T::zero() {
            return Err(Error::MeshTopology(format!("edge ({a}, {b}) has zero length")));
        }
        let id = facets.len();
        element_facets[k1][e1] = id;
        if let Some((k, e)) = k2 {
            element_facets[k][e] = id;
        }
        facets.push(FacetGeom {
            vertices: [a, b],
            k1,
            k2: k2.map(|(k, _)| k),
            local: [e1, k2.map_or(usize::MAX, |(_, e)| e)],
            normal: [d[1] / len, -d[0] / len],
            measure: len,
            diameter: len,
            midpoint: [T::half() * (p[0] + q[0]), T::half() * (p[1] + q[1])],
        });
    }
    Ok(FacetTable {
        facets,
        element_facets,
    })
}

impl<T: Real> Mesh<T> {
    /// Validates the element list and builds geometry and connectivity.
    pub fn new(vertices: Vec<Point<T>>, elements: Vec<[usize; 3]>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidArgument("mesh has no elements".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        let mut diameters = Vec::with_capacity(elements.len());
        let mut centroids = Vec::with_capacity(elements.len());
        for (k, tri) in elements.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "element {k} references missing vertex {bad}"
                )));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if !(area > T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "element {k} is degenerate or clockwise (signed area {area})"
                )));
            }
            areas.push(area);
            diameters.push(norm2(sub(b, a)).max(norm2(sub(c, b))).max(norm2(sub(a, c))));
            let third = T::lit(1.0 / 3.0);
            centroids.push([
                (a[0] + b[0] + c[0]) * third,
                (a[1] + b[1] + c[1]) * third,
            ]);
        }
        let FacetTable {
            facets,
            element_facets,
        } = extract_facets(&vertices, &elements)?;
        Ok(Self {
            dim: 2,
            vertices,
            elements,
            facets,
            element_facets,
            areas,
            diameters,
            centroids,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_interior_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    /// Largest element diameter `h`.
    pub fn h(&self) -> T {
        self.diameters.iter().copied().fold(T::zero(), T::max)
    }

    /// `Σ |K|`.
    pub fn total_area(&self) -> T {
        self.areas.iter().copied().sum()
    }

    /// `|∂K|`.
    pub fn perimeter(&self, k: usize) -> T {
        self.element_facets[k]
            .iter()
            .map(|&f| self.facets[f].measure)
            .sum()
    }

    /// Outward unit normal of element `k` on facet `f`.
    pub fn outward_normal(&self, k: usize, f: usize) -> Point<T> {
        let facet = &self.facets[f];
        if facet.k1 == k {
            facet.normal
        } else {
            [-facet.normal[0], -facet.normal[1]]
        }
    }

    pub fn vertex_coords(&self, k: usize) -> [Point<T>; 3] {
        self.elements[k].map(|v| self.vertices[v])
    }

    /// Serializable `{vertices, elements}` document.
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            vertices: self
                .vertices
                .iter()
                .map(|p| [p[0].as_f64(), p[1].as_f64()])
                .collect(),
            elements: self.elements.clone(),
        }
    }

    pub fn from_document(doc: &MeshDocument) -> Result<Self> {
        let vertices = doc
            .vertices
            .iter()
            .map(|p| [T::lit(p[0]), T::lit(p[1])])
            .collect();
        Self::new(vertices, doc.elements.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeshDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

/// JSON mesh exchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> Rectangle<T> {
    pub fn unit() -> Self {
        Self {
            x0: T::zero(),
            x1: T::one(),
            y0: T::zero(),
            y1: T::one(),
        }
    }

    pub fn area(&self) -> T {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Uniform `n × n` grid of the rectangle, each cell split along its
/// lower-left to upper-right diagonal into two triangles.
pub fn build_structured_triangular<T: Real>(n: usize, domain: Rectangle<T>) -> Result<Mesh<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("subdivision count must be at least 1".into()));
    }
    if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
        return Err(Error::InvalidArgument("degenerate rectangle".into()));
    }
    let nf = T::from_count(n);
    let dx = (domain.x1 - domain.x0) / nf;
    let dy = (domain.y1 - domain.y0) / nf;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Pin the last row/column to the exact rectangle edge.
            let x = if i == n { domain.x1 } else { domain.x0 + T::from_count(i) * dx };
            let y = if j == n { domain.y1 } else { domain.y0 + T::from_count(j) * dy };
            vertices.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| i + j * (n + 1);
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            elements.push([v00, v10, v11]);
            elements.push([v00, v11, v01]);
        }
    }
    Mesh::new(vertices, elements)
}

/// Per-element mesh regularity ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport<T> {
    /// `|∂K| h_K / |K|`.
    pub shape: Vec<T>,
    /// `max_{Λ ⊂ ∂K} |Λ|^{(d-2)/(d-1)} h_K² / |K|`.
    pub nonconformity: Vec<T>,
    pub max_shape: T,
    pub max_nonconformity: T,
}

pub fn mesh_quality_report<T: Real>(mesh: &Mesh<T>) -> QualityReport<T> {
    let d = T::from_count(mesh.dim);
    let exponent = (d - T::two()) / (d - T::one());
    let mut shape = Vec::with_capacity(mesh.num_elements());
    let mut nonconformity = Vec::with_capacity(mesh.num_elements());
    for k in 0..mesh.num_elements() {
        let hk = mesh.diameters[k];
        let area = mesh.areas[k];
        shape.push(mesh.perimeter(k) * hk / area);
        let worst = mesh.element_facets[k]
            .iter()
            .map(|&f| mesh.facets[f].measure.powf(exponent) * hk * hk / area)
            .fold(T::zero(), T::max);
        nonconformity.push(worst);
    }
    let max_shape = shape.iter().copied().fold(T::zero(), T::max);
    let max_nonconformity = nonconformity.iter().copied().fold(T::zero(), T::max);
    QualityReport {
        shape,
        nonconformity,
        max_shape,
        max_nonconformity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh<f64> {
        build_structured_triangular(n, Rectangle::unit()).unwrap()
    }

    #[test]
    fn one_cell_has_diagonal_interior_facet() {
        let m = unit(1);
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.num_facets(), 5);
        assert_eq!(m.num_interior_facets(), 1);
        let (_, diag) = m
            .facets
            .iter()
            .enumerate()
            .find(|(_, f)| !f.is_boundary())
            .unwrap();
        assert_eq!(diag.vertices, [0, 3]);
        assert_eq!((diag.k1, diag.k2), (0, Some(1)));
    }

    #[test]
    fn two_by_two_counts() {
        let m = unit(2);
        assert_eq!(m.num_elements(), 8);
        assert_eq!(m.num_facets(), 16);
        assert_eq!(m.num_interior_facets(), 8);
        assert_eq!(m.num_boundary_facets(), 8);
        for f in m.facets.iter().filter(|f| f.is_boundary()) {
            assert!((f.measure - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn fan_of_three_triangles() {
        // Three triangles around the origin sharing two interior spokes.
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let elements = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4]];
        let m = Mesh::new(vertices, elements).unwrap();
        assert_eq!(m.num_interior_facets(), 2);
        assert_eq!(m.num_boundary_facets(), 5);
    }

    #[test]
    fn non_manifold_edge_rejected() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -1.0]];
        let elements = vec![[0, 1, 2], [1, 3, 2], [1, 0, 4], [0, 1, 3]];
        let err = extract_facets(&vertices, &elements).unwrap_err();
        assert!(matches!(err, Error::MeshTopology(_)));
    }

    #[test]
    fn invalid_generator_arguments() {
        assert!(build_structured_triangular::<f64>(0, Rectangle::unit()).is_err());
        let flat = Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 1.0,
            y1: 1.0,
        };
        assert!(build_structured_triangular(3, flat).is_err());
    }

    #[test]
    fn clockwise_element_rejected() {
        let err = Mesh::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn areas_partition_the_domain() {
        let m = unit(4);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        let r = Rectangle {
            x0: -1.0,
            x1: 2.0,
            y0: 0.5,
            y1: 1.5,
        };
        let m: Mesh<f64> = build_structured_triangular(7, r).unwrap();
        assert!((m.total_area() - 3.0).abs() < 3e-12);
    }

    #[test]
    fn normals_are_unit_and_point_out_of_k1() {
        let m = unit(5);
        for f in &m.facets {
            assert!((f.normal[0].hypot(f.normal[1]) - 1.0).abs() < 1e-14);
            let c = m.centroids[f.k1];
            let v = sub(f.midpoint, c);
            assert!(v[0] * f.normal[0] + v[1] * f.normal[1] > 0.0);
            if let Some(k2) = f.k2 {
                let c2 = m.centroids[k2];
                let w = sub(f.midpoint, c2);
                assert!(w[0] * f.normal[0] + w[1] * f.normal[1] < 0.0);
                let n2 = m.outward_normal(k2, m.element_facets[k2][f.local[1]]);
                assert!((n2[0] + f.normal[0]).abs() < 1e-14 && (n2[1] + f.normal[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn every_edge_in_exactly_one_facet_and_h_lambda_bounded() {
        let m = unit(3);
        let mut seen = vec![0usize; m.num_facets()];
        for (k, fs) in m.element_facets.iter().enumerate() {
            for &f in fs {
                seen[f] += 1;
                assert!(m.facets[f].diameter <= m.diameters[k] + 1e-15);
            }
        }
        for (f, &count) in seen.iter().enumerate() {
            let expected = if m.facets[f].is_boundary() { 1 } else { 2 };
            assert_eq!(count, expected);
        }
    }

    #[test]
    fn refinement_quarters_areas() {
        let coarse = unit(3);
        let fine = unit(6);
        for (a, b) in coarse.areas.iter().zip(&fine.areas) {
            assert!((a / 4.0 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quality_of_unit_right_triangle() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let q = mesh_quality_report(&m);
        let expected = (2.0 + 2f64.sqrt()) * 2f64.sqrt() / 0.5;
        assert!((q.shape[0] - expected).abs() < 1e-12);
        assert!((q.nonconformity[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quality_is_scale_invariant() {
        let a = mesh_quality_report(&unit(4));
        let b = mesh_quality_report(&unit(8));
        assert!((a.max_shape - b.max_shape).abs() < 1e-10);
        assert!((a.max_nonconformity - b.max_nonconformity).abs() < 1e-10);
    }

    #[test]
    fn extraction_is_deterministic() {
        let m = unit(4);
        let again = extract_facets(&m.vertices, &m.elements).unwrap();
        assert_eq!(again.facets, m.facets);
        assert_eq!(again.element_facets, m.element_facets);
    }

    #[test]
    fn json_round_trip() {
        let m = unit(2);
        let back: Mesh<f64> = Mesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn works_in_single_precision() {
        let m = build_structured_triangular::<f32>(4, Rectangle::unit()).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-6);
    }
}
