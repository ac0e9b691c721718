//! Triangle meshes of level sets in dimension 3: extraction by 256-case
//! marching cubes, surface areas and integrals, Euler characteristic and
//! connected components.
//!
//! Vertices are welded by grid-edge identity (cell coordinates plus edge
//! axis), never by coordinate proximity, so the mesh topology is exact and
//! resolution-independent. Cell processing is data-parallel with results
//! merged in cell order, yielding deterministic vertex numbering.

mod tables;

use std::collections::HashMap;
use std::io::Write;

use thiserror::Error;

use crate::curvature::DEFAULT_GRAD_FLOOR;
use crate::exec;
use crate::field::{BoundingBox, FieldError, Jet2, Point, ScalarField};

/// Triangles with relative area below this fraction of the mean are pruned
/// as degenerate marching-cubes output.
const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

/// Edge crossings whose interpolation fraction lies within this distance of
/// 0 or 1 snap to the grid corner and weld there. Keeps slivers produced by
/// (near-)exact level hits either collapsed or large enough to survive
/// area pruning, so pruning cannot open the surface.
const CORNER_SNAP_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Error)]
pub enum MeshError {
    #[error("level-set meshing needs dimension 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("invalid grid: {0}")]
    Config(String),
    #[error("non-manifold edge ({a}, {b}) shared by {count} triangles; the grid resolution is likely too coarse near a critical point")]
    NonManifoldEdge { a: u32, b: u32, count: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Sampling grid for level-set extraction.
#[derive(Debug, Clone)]
pub struct GridSpec {
    box_: BoundingBox,
    resolution: u32,
}

impl GridSpec {
    pub fn new(box_: BoundingBox, resolution: u32) -> Result<Self, MeshError> {
        if box_.dim() != 3 {
            return Err(MeshError::UnsupportedDimension(box_.dim()));
        }
        if resolution < 16 {
            return Err(MeshError::Config(format!(
                "resolution must be at least 16 cells per axis, got {resolution}"
            )));
        }
        Ok(Self { box_, resolution })
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.box_
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    fn cell_sizes(&self) -> [f64; 3] {
        let w = self.box_.widths();
        let r = f64::from(self.resolution);
        [w[0] / r, w[1] / r, w[2] / r]
    }

    fn vertex_position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let lo = self.box_.lo();
        let cs = self.cell_sizes();
        [
            lo[0] + i as f64 * cs[0],
            lo[1] + j as f64 * cs[1],
            lo[2] + k as f64 * cs[2],
        ]
    }
}

/// An indexed triangle mesh with cached per-triangle areas.
#[derive(Debug, Clone, Default)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
    areas: Vec<f64>,
}

impl TriangleMesh {
    fn from_parts(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Self {
        let areas = triangles
            .iter()
            .map(|t| triangle_area(&vertices[t[0] as usize], &vertices[t[1] as usize], &vertices[t[2] as usize]))
            .collect();
        Self {
            vertices,
            triangles,
            areas,
        }
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn centroid(&self, triangle: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[triangle];
        let (va, vb, vc) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        [
            (va[0] + vb[0] + vc[0]) / 3.0,
            (va[1] + vb[1] + vc[1]) / 3.0,
            (va[2] + vb[2] + vc[2]) / 3.0,
        ]
    }

    /// Counts how many triangles share each undirected edge.
    fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += 1;
            }
        }
        edges
    }

    /// True when every edge belongs to exactly two triangles.
    pub fn is_closed(&self) -> bool {
        !self.is_empty() && self.edge_counts().values().all(|c| *c == 2)
    }
}

fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

/// Local corner offsets matching the table convention in [`tables`].
const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// For each cell edge: the corner at its low end and the axis it runs along.
const EDGE_CANONICAL: [(usize, usize); 12] = [
    (0, 0),
    (1, 1),
    (3, 0),
    (0, 1),
    (4, 0),
    (5, 1),
    (7, 0),
    (4, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

/// Extracts the level set `f = t` as a triangle mesh on the given grid.
///
/// Standard single-table marching cubes with linear interpolation along
/// grid edges. Requires `t` to be a regular value; meshing a critical level
/// typically surfaces later as a non-manifold edge error. An empty mesh is
/// returned when the level set misses the grid box.
pub fn extract_level_set(
    field: &ScalarField,
    t: f64,
    grid: &GridSpec,
) -> Result<TriangleMesh, MeshError> {
    if field.dim() != 3 {
        return Err(MeshError::UnsupportedDimension(field.dim()));
    }
    let res = grid.resolution as usize;
    let nv = res + 1;

    // sample f on grid vertices, parallel over z-slabs
    let slabs = exec::map_indexed(nv, |k| -> Result<Vec<f64>, MeshError> {
        let mut slab = Vec::with_capacity(nv * nv);
        for j in 0..nv {
            for i in 0..nv {
                let pos = grid.vertex_position(i, j, k);
                slab.push(field.value(&Point::from(pos))?);
            }
        }
        Ok(slab)
    });
    let mut values = Vec::with_capacity(nv * nv * nv);
    for slab in slabs {
        values.extend(slab?);
    }
    let value_at = |i: usize, j: usize, k: usize| values[(k * nv + j) * nv + i];

    // weld key: grid vertex id of the edge's low end plus the edge axis
    // (0-2); code 3 marks a crossing that lands exactly on a grid corner,
    // which is welded by the corner itself so that coincident crossings on
    // different edges share one mesh vertex
    let edge_key = |i: usize, j: usize, k: usize, axis: usize| -> u64 {
        (((k * nv + j) * nv + i) * 4 + axis) as u64
    };
    let corner_key = |i: usize, j: usize, k: usize| -> u64 {
        (((k * nv + j) * nv + i) * 4 + 3) as u64
    };

    // marching cubes per z-layer of cells, parallel, merged in layer order
    let layer_triangles = exec::map_indexed(res, |k| {
        let mut tris: Vec<[u64; 3]> = Vec::new();
        for j in 0..res {
            for i in 0..res {
                let mut case = 0usize;
                for (c, off) in CORNER_OFFSETS.iter().enumerate() {
                    if value_at(i + off[0], j + off[1], k + off[2]) < t {
                        case |= 1 << c;
                    }
                }
                if tables::EDGE_TABLE[case] == 0 {
                    continue;
                }
                let row = &tables::TRIANGLE_TABLE[case];
                let mut m = 0;
                while row[m] >= 0 {
                    let mut keys = [0u64; 3];
                    for (slot, key) in keys.iter_mut().enumerate() {
                        let edge = row[m + slot] as usize;
                        let (corner, axis) = EDGE_CANONICAL[edge];
                        let off = CORNER_OFFSETS[corner];
                        let (i0, j0, k0) = (i + off[0], j + off[1], k + off[2]);
                        let (i1, j1, k1) = match axis {
                            0 => (i0 + 1, j0, k0),
                            1 => (i0, j0 + 1, k0),
                            _ => (i0, j0, k0 + 1),
                        };
                        let f0 = value_at(i0, j0, k0);
                        let f1 = value_at(i1, j1, k1);
                        let frac = (t - f0) / (f1 - f0);
                        *key = if frac <= CORNER_SNAP_FRACTION {
                            corner_key(i0, j0, k0)
                        } else if frac >= 1.0 - CORNER_SNAP_FRACTION {
                            corner_key(i1, j1, k1)
                        } else {
                            edge_key(i0, j0, k0, axis)
                        };
                    }
                    // crossings welded into the same grid corner collapse
                    // the triangle; drop it here so its neighbors stitch
                    // directly to each other
                    if keys[0] != keys[1] && keys[1] != keys[2] && keys[0] != keys[2] {
                        tris.push(keys);
                    }
                    m += 3;
                }
            }
        }
        tris
    });

    // weld vertices by edge key in first-use order
    let mut key_to_index: HashMap<u64, u32> = HashMap::new();
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for layer in layer_triangles {
        for keys in layer {
            let mut tri = [0u32; 3];
            for (slot, key) in keys.iter().enumerate() {
                let next = vertices.len() as u32;
                let idx = *key_to_index.entry(*key).or_insert_with(|| {
                    let code = (key % 4) as usize;
                    let vid = (key / 4) as usize;
                    let i = vid % nv;
                    let j = (vid / nv) % nv;
                    let k = vid / (nv * nv);
                    let mut pos = grid.vertex_position(i, j, k);
                    if code < 3 {
                        let f0 = value_at(i, j, k);
                        let (i1, j1, k1) = match code {
                            0 => (i + 1, j, k),
                            1 => (i, j + 1, k),
                            _ => (i, j, k + 1),
                        };
                        let f1 = value_at(i1, j1, k1);
                        let frac = (t - f0) / (f1 - f0);
                        pos[code] += frac * grid.cell_sizes()[code];
                    }
                    vertices.push(pos);
                    next
                });
                tri[slot] = idx;
            }
            triangles.push(tri);
        }
    }

    Ok(prune_degenerate(TriangleMesh::from_parts(vertices, triangles)))
}

/// Drops zero-area triangles and the vertices they orphan.
fn prune_degenerate(mesh: TriangleMesh) -> TriangleMesh {
    if mesh.is_empty() {
        return mesh;
    }
    let mean_area = mesh.areas.iter().sum::<f64>() / mesh.areas.len() as f64;
    let threshold = DEGENERATE_AREA_FRACTION * mean_area;
    let keep: Vec<bool> = mesh.areas.iter().map(|a| *a > threshold).collect();
    if keep.iter().all(|k| *k) {
        return mesh;
    }
    let mut remap = vec![u32::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (tri, kept) in mesh.triangles.iter().zip(&keep) {
        if !kept {
            continue;
        }
        let mut new_tri = [0u32; 3];
        for (slot, v) in tri.iter().enumerate() {
            let vi = *v as usize;
            if remap[vi] == u32::MAX {
                remap[vi] = vertices.len() as u32;
                vertices.push(mesh.vertices[vi]);
            }
            new_tri[slot] = remap[vi];
        }
        triangles.push(new_tri);
    }
    TriangleMesh::from_parts(vertices, triangles)
}

/// Sum of triangle areas, the discrete level-set volume `nu(t)`.
pub fn surface_area(mesh: &TriangleMesh) -> f64 {
    mesh.areas.iter().sum()
}

/// Result of a centroid-rule surface integral.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceIntegral {
    pub value: f64,
    /// Fraction of the total area skipped because a centroid was
    /// numerically critical or on an excluded set.
    pub skipped_area_fraction: f64,
}

/// One-point (centroid) quadrature of `g` over the mesh:
/// `sum g(centroid) * area`.
pub fn surface_integral(
    mesh: &TriangleMesh,
    field: &ScalarField,
    g: impl Fn(&Jet2) -> f64,
) -> Result<SurfaceIntegral, MeshError> {
    let mut value = 0.0;
    let mut skipped_area = 0.0;
    for (idx, area) in mesh.areas.iter().enumerate() {
        let centroid = Point::from(mesh.centroid(idx));
        match field.jet(&centroid) {
            Ok(jet) => {
                if jet.grad_norm() <= DEFAULT_GRAD_FLOOR {
                    skipped_area += area;
                } else {
                    value += g(&jet) * area;
                }
            }
            Err(FieldError::ExcludedSet { .. }) => skipped_area += area,
            Err(e) => return Err(e.into()),
        }
    }
    let total = surface_area(mesh);
    Ok(SurfaceIntegral {
        value,
        skipped_area_fraction: if total > 0.0 { skipped_area / total } else { 0.0 },
    })
}

/// `V - E + F` over the welded mesh. Fails on edges shared by more than
/// two triangles.
pub fn euler_characteristic(mesh: &TriangleMesh) -> Result<i64, MeshError> {
    let edges = mesh.edge_counts();
    for ((a, b), count) in &edges {
        if *count > 2 {
            return Err(MeshError::NonManifoldEdge {
                a: *a,
                b: *b,
                count: *count,
            });
        }
    }
    Ok(mesh.vertices.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64)
}

/// Number of vertex-connectivity components.
pub fn connected_components(mesh: &TriangleMesh) -> usize {
    let n = mesh.vertices.len();
    if n == 0 {
        return 0;
    }
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut root = x;
        while parent[root as usize] != root {
            root = parent[root as usize];
        }
        let mut cur = x;
        while parent[cur as usize] != root {
            let next = parent[cur as usize];
            parent[cur as usize] = root;
            cur = next;
        }
        root
    }
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2])] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra as usize] = rb;
            }
        }
    }
    let mut roots: Vec<u32> = (0..n as u32).map(|v| find(&mut parent, v)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// Writes the mesh in OFF format, with metadata echoed as `#` comments.
pub fn write_off(
    mesh: &TriangleMesh,
    mut out: impl Write,
    comments: &[String],
) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{} {} 0", mesh.vertices.len(), mesh.triangles.len())?;
    for v in &mesh.vertices {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::builtin_field;
    use std::f64::consts::PI;

    fn sphere_grid(res: u32) -> GridSpec {
        GridSpec::new(BoundingBox::centered_cube(3, 1.5), res).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(BoundingBox::centered_cube(3, 1.0), 8).is_err());
        assert!(GridSpec::new(BoundingBox::centered_cube(4, 1.0), 32).is_err());
    }

    #[test]
    fn sphere_mesh_area_and_topology() {
        let f = builtin_field("sphere", 3).unwrap();
        let mesh = extract_level_set(&f, 1.0, &sphere_grid(64)).unwrap();
        assert!(mesh.is_closed());
        let area = surface_area(&mesh);
        let truth = 4.0 * PI;
        assert!(
            (area - truth).abs() / truth < 0.005,
            "area {area} vs {truth}"
        );
        assert_eq!(euler_characteristic(&mesh).unwrap(), 2);
        assert_eq!(connected_components(&mesh), 1);
    }

    #[test]
    fn missing_level_set_gives_empty_mesh() {
        let f = builtin_field("sphere", 3).unwrap();
        let mesh = extract_level_set(&f, -1.0, &sphere_grid(32)).unwrap();
        assert!(mesh.is_empty());
        assert_eq!(surface_area(&mesh), 0.0);
        assert_eq!(connected_components(&mesh), 0);
    }

    #[test]
    fn non_3d_fields_are_rejected() {
        let f = builtin_field("sphere", 4).unwrap();
        let grid = sphere_grid(32);
        assert!(matches!(
            extract_level_set(&f, 1.0, &grid),
            Err(MeshError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn double_well_splits_below_saddle() {
        let f = builtin_field("double_well", 3).unwrap();
        let grid = GridSpec::new(BoundingBox::centered_cube(3, 2.5), 96).unwrap();
        let below = extract_level_set(&f, 0.5, &grid).unwrap();
        assert_eq!(connected_components(&below), 2);
        assert_eq!(euler_characteristic(&below).unwrap(), 4);
        let above = extract_level_set(&f, 1.5, &grid).unwrap();
        assert_eq!(connected_components(&above), 1);
    }

    #[test]
    fn torus_mesh_characteristic_is_zero() {
        let f = builtin_field("torus(2)", 3).unwrap();
        let grid = GridSpec::new(
            BoundingBox::new(vec![-3.2, -3.2, -1.2], vec![3.2, 3.2, 1.2]).unwrap(),
            96,
        )
        .unwrap();
        let mesh = extract_level_set(&f, 0.25, &grid).unwrap();
        assert!(mesh.is_closed());
        assert_eq!(euler_characteristic(&mesh).unwrap(), 0);
        let area = surface_area(&mesh);
        let truth = 4.0 * PI * PI * 2.0 * 0.5; // 4 pi^2 R rho
        assert!((area - truth).abs() / truth < 0.01, "area {area} vs {truth}");
    }

    #[test]
    fn surface_integral_of_curvature_quotients() {
        use crate::curvature::{gaussian_curvature, mean_curvature};
        let f = builtin_field("sphere", 3).unwrap();
        let mesh = extract_level_set(&f, 1.0, &sphere_grid(96)).unwrap();
        // int H/|grad f| over the unit sphere: (1/1)/(2) * 4 pi = 2 pi
        let si = surface_integral(&mesh, &f, |jet| {
            mean_curvature(jet, 2).unwrap_or(0.0) / jet.grad_norm()
        })
        .unwrap();
        let truth = 2.0 * PI;
        assert!(
            (si.value - truth).abs() / truth < 0.01,
            "H/|grad| integral {} vs {truth}",
            si.value
        );
        assert_eq!(si.skipped_area_fraction, 0.0);
        // int K * (df/dx)/|grad f| vanishes by antipodal symmetry
        let flux = surface_integral(&mesh, &f, |jet| {
            gaussian_curvature(jet, 2).unwrap_or(0.0) * jet.gradient[0] / jet.grad_norm()
        })
        .unwrap();
        assert!(
            flux.value.abs() < 0.01 * 4.0 * PI,
            "flux integral {} not near zero",
            flux.value
        );
    }

    #[test]
    fn surface_integral_of_one_is_area() {
        let f = builtin_field("sphere", 3).unwrap();
        let mesh = extract_level_set(&f, 1.0, &sphere_grid(48)).unwrap();
        let si = surface_integral(&mesh, &f, |_| 1.0).unwrap();
        assert_eq!(si.value, surface_area(&mesh));
        assert_eq!(si.skipped_area_fraction, 0.0);
    }

    #[test]
    fn off_export_shape() {
        let f = builtin_field("sphere", 3).unwrap();
        let mesh = extract_level_set(&f, 1.0, &sphere_grid(16)).unwrap();
        let mut buf = Vec::new();
        write_off(&mesh, &mut buf, &["test artifact".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(lines.next(), Some("# test artifact"));
        let counts: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(counts[0], mesh.vertices().len());
        assert_eq!(counts[1], mesh.triangles().len());
    }

    #[test]
    fn extraction_is_deterministic() {
        let f = builtin_field("sphere", 3).unwrap();
        let a = extract_level_set(&f, 1.0, &sphere_grid(32)).unwrap();
        let b = extract_level_set(&f, 1.0, &sphere_grid(32)).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.triangles(), b.triangles());
    }
}
