//! Triangle surface meshes: loading/saving, synthetic geometry generators,
//! and midpoint subdivision with vertex correspondence.
//!
//! Meshes are triangle-only. Faces are stored counter-clockwise so the
//! right-hand rule gives the outward normal. Each face carries one PID
//! (part identifier) label used for per-part load reporting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Faces with area below this are rejected as degenerate (square meters).
const MIN_FACE_AREA: f64 = 1e-20;

/// Largest icosphere subdivision level the generators accept.
pub const MAX_ICOSPHERE_LEVEL: usize = 7;

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Formats a float with 17 significant digits, enough to round-trip f64.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A triangle surface mesh with per-face PID labels.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    face_pids: Vec<String>,
    spherical: bool,
    closed: bool,
}

impl SurfaceMesh {
    /// Builds a mesh and validates its invariants: in-range vertex indices,
    /// three distinct vertices per face, nonzero area, one PID per face.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        face_pids: Vec<String>,
    ) -> Result<Self> {
        if faces.len() != face_pids.len() {
            return Err(Error::InvalidParameter(format!(
                "{} faces but {} pid labels",
                faces.len(),
                face_pids.len()
            )));
        }
        for (k, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(Error::VertexIndex {
                        face: k,
                        vertex: v,
                        vertex_count: vertices.len(),
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace {
                    face: k,
                    msg: "repeated vertex index".into(),
                });
            }
            let area = triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            if !(area > MIN_FACE_AREA) {
                return Err(Error::DegenerateFace {
                    face: k,
                    msg: format!("zero area ({area:e} m^2)"),
                });
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_pids,
            spherical: false,
            closed: false,
        })
    }

    /// Marks the mesh as a unit-sphere triangulation; subdivision midpoints
    /// are then re-projected onto the sphere.
    pub(crate) fn mark_spherical(mut self) -> Self {
        self.spherical = true;
        self
    }

    /// Marks the mesh closed after verifying every edge is shared by
    /// exactly two faces.
    pub fn mark_closed(mut self) -> Result<Self> {
        for ((a, b), count) in self.edge_face_counts() {
            if count != 2 {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) is shared by {count} faces; a closed mesh requires 2"
                )));
            }
        }
        self.closed = true;
        Ok(self)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_pids(&self) -> &[String] {
        &self.face_pids
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_spherical(&self) -> bool {
        self.spherical
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Distinct PID labels in order of first appearance.
    pub fn pid_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for pid in &self.face_pids {
            if !out.iter().any(|p| p == pid) {
                out.push(pid.clone());
            }
        }
        out
    }

    /// Map from undirected edge to the number of incident faces.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn face_area(&self, k: usize) -> f64 {
        let f = self.faces[k];
        triangle_area(self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]])
    }

    /// Unit outward normal from the counter-clockwise orientation.
    pub fn face_unit_normal(&self, k: usize) -> [f64; 3] {
        let f = self.faces[k];
        let n = cross(
            sub(self.vertices[f[1]], self.vertices[f[0]]),
            sub(self.vertices[f[2]], self.vertices[f[0]]),
        );
        scale(n, 1.0 / norm(n))
    }

    pub fn face_centroid(&self, k: usize) -> [f64; 3] {
        let f = self.faces[k];
        scale(
            add(add(self.vertices[f[0]], self.vertices[f[1]]), self.vertices[f[2]]),
            1.0 / 3.0,
        )
    }
}

fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Area-weighted outward vertex normals, normalized per vertex.
///
/// On two-sided sheets the boundary-ring vertices see cancelling normals;
/// those come back as the zero vector.
pub fn vertex_normals(mesh: &SurfaceMesh) -> Vec<[f64; 3]> {
    let mut acc = vec![[0.0f64; 3]; mesh.vertex_count()];
    for (k, f) in mesh.faces().iter().enumerate() {
        let n = mesh.face_unit_normal(k);
        let w = mesh.face_area(k);
        for &v in f {
            acc[v] = add(acc[v], scale(n, w));
        }
    }
    for n in &mut acc {
        let len = norm(*n);
        *n = if len > 1e-12 { scale(*n, 1.0 / len) } else { [0.0; 3] };
    }
    acc
}

// ---------------------------------------------------------------------------
// Mesh file format (Wavefront-style text)
// ---------------------------------------------------------------------------

/// Parses the Wavefront-style mesh format: `v x y z`, `g <pid>`, `f i j k`
/// with 1-based indices. Faces before any `g` line get PID "default".
/// Blank lines and `#` comments are ignored.
pub fn load_mesh(text: &str) -> Result<SurfaceMesh> {
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut face_pids: Vec<String> = Vec::new();
    let mut current_pid = String::from("default");

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap();
        match keyword {
            "v" => {
                let coords: Vec<&str> = parts.collect();
                if coords.len() != 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected 3 coordinates, found {}", coords.len()),
                    });
                }
                let mut v = [0.0f64; 3];
                for (i, c) in coords.iter().enumerate() {
                    v[i] = c.parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad coordinate {c:?}: {e}"),
                    })?;
                }
                vertices.push(v);
            }
            "g" => {
                let name: Vec<&str> = parts.collect();
                if name.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "group line without a name".into(),
                    });
                }
                current_pid = name.join(" ");
            }
            "f" => {
                let ids: Vec<&str> = parts.collect();
                if ids.len() != 3 {
                    return Err(Error::UnsupportedElement {
                        line: line_no,
                        msg: format!("only triangles are supported, face has {} vertices", ids.len()),
                    });
                }
                let mut f = [0usize; 3];
                for (i, s) in ids.iter().enumerate() {
                    let one_based = s.parse::<usize>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad vertex index {s:?}: {e}"),
                    })?;
                    if one_based == 0 || one_based > vertices.len() {
                        return Err(Error::VertexIndex {
                            face: faces.len(),
                            vertex: one_based.wrapping_sub(1),
                            vertex_count: vertices.len(),
                        });
                    }
                    f[i] = one_based - 1;
                }
                faces.push(f);
                face_pids.push(current_pid.clone());
            }
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown keyword {other:?}"),
                });
            }
        }
    }

    SurfaceMesh::new(vertices, faces, face_pids)
}

/// Serializes a mesh: vertices first, then faces grouped by PID in order of
/// first appearance, `\n` line endings, 17 significant digits.
pub fn save_mesh(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]));
    }
    for pid in mesh.pid_names() {
        let _ = writeln!(out, "g {pid}");
        for (f, p) in mesh.faces().iter().zip(mesh.face_pids()) {
            if *p == pid {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    out
}

pub fn load_mesh_file(path: &Path) -> Result<SurfaceMesh> {
    let text = std::fs::read_to_string(path)?;
    load_mesh(&text)
}

pub fn save_mesh_file(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    std::fs::write(path, save_mesh(mesh))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Subdivision
// ---------------------------------------------------------------------------

/// Maps each coarse-mesh vertex index to the identical vertex in the
/// refined mesh.
#[derive(Debug, Clone)]
pub struct CorrespondenceMap {
    map: Vec<usize>,
}

impl CorrespondenceMap {
    pub fn coarse_count(&self) -> usize {
        self.map.len()
    }

    pub fn fine_index(&self, coarse: usize) -> usize {
        self.map[coarse]
    }

    /// Composes `self` (coarse -> mid) with `next` (mid -> fine).
    pub fn compose(&self, next: &CorrespondenceMap) -> CorrespondenceMap {
        CorrespondenceMap {
            map: self.map.iter().map(|&m| next.fine_index(m)).collect(),
        }
    }
}

/// Splits each triangle into four via edge midpoints. Original vertices are
/// retained (the correspondence map records their indices: here the identity
/// prefix). Midpoints are projected back onto the unit sphere when the input
/// is flagged spherical. Child faces inherit the parent PID.
pub fn subdivide(mesh: &SurfaceMesh) -> (SurfaceMesh, CorrespondenceMap) {
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.face_count() * 4);
    let mut face_pids = Vec::with_capacity(mesh.face_count() * 4);
    let spherical = mesh.is_spherical();

    let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&idx) = midpoint.get(&key) {
            return idx;
        }
        let mut m = scale(add(verts[a], verts[b]), 0.5);
        if spherical {
            m = scale(m, 1.0 / norm(m));
        }
        let idx = verts.len();
        verts.push(m);
        midpoint.insert(key, idx);
        idx
    };

    for (f, pid) in mesh.faces().iter().zip(mesh.face_pids()) {
        let [a, b, c] = *f;
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        for child in [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]] {
            faces.push(child);
            face_pids.push(pid.clone());
        }
    }

    let corr = CorrespondenceMap {
        map: (0..mesh.vertex_count()).collect(),
    };
    let mut fine = SurfaceMesh::new(vertices, faces, face_pids)
        .expect("subdivision of a valid mesh stays valid");
    if spherical {
        fine = fine.mark_spherical();
    }
    if mesh.is_closed() {
        fine = fine
            .mark_closed()
            .expect("subdivision of a closed mesh stays closed");
    }
    (fine, corr)
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Unit-sphere triangulation. Level 0 is the regular icosahedron; each level
/// quadruples the face count (vertices: 10*4^n + 2, faces: 20*4^n).
pub fn gen_icosphere(level: usize) -> Result<SurfaceMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::SizeLimit(format!(
            "icosphere level {level} exceeds cap {MAX_ICOSPHERE_LEVEL}"
        )));
    }
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let s = 1.0 / (1.0 + phi * phi).sqrt();
    let (a, b) = (s, phi * s);
    let vertices = vec![
        [-a, b, 0.0],
        [a, b, 0.0],
        [-a, -b, 0.0],
        [a, -b, 0.0],
        [0.0, -a, b],
        [0.0, a, b],
        [0.0, -a, -b],
        [0.0, a, -b],
        [b, 0.0, -a],
        [b, 0.0, a],
        [-b, 0.0, -a],
        [-b, 0.0, a],
    ];
    let faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let pids = vec![String::from("sphere"); faces.len()];
    let mut mesh = SurfaceMesh::new(vertices, faces, pids)?
        .mark_spherical()
        .mark_closed()?;
    for _ in 0..level {
        mesh = subdivide(&mesh).0;
    }
    Ok(mesh)
}

/// Vertex index inside a thin-plate sheet grid (`sheet` 0 = lower, 1 = upper).
pub fn thin_plate_vertex(nx: usize, ny: usize, sheet: usize, i: usize, j: usize) -> usize {
    sheet * nx * ny + j * nx + i
}

/// Two parallel unit-side sheets of nx x ny vertices separated by `gap`
/// along z, joined along the x=0 edge so the graph stays connected.
/// PIDs: "sheet_lower", "sheet_upper", "joint".
pub fn gen_thin_plate(gap: f64, nx: usize, ny: usize) -> Result<SurfaceMesh> {
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thin-plate gap must be positive, got {gap}"
        )));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParameter(format!(
            "thin-plate grid must be at least 2x2, got {nx}x{ny}"
        )));
    }

    let mut vertices = Vec::with_capacity(2 * nx * ny);
    for &z in &[0.0, gap] {
        for j in 0..ny {
            for i in 0..nx {
                vertices.push([
                    i as f64 / (nx - 1) as f64,
                    j as f64 / (ny - 1) as f64,
                    z,
                ]);
            }
        }
    }

    let mut faces = Vec::new();
    let mut face_pids = Vec::new();
    // Lower sheet faces down (-z outward), upper faces up.
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v00 = thin_plate_vertex(nx, ny, 0, i, j);
            let v10 = thin_plate_vertex(nx, ny, 0, i + 1, j);
            let v01 = thin_plate_vertex(nx, ny, 0, i, j + 1);
            let v11 = thin_plate_vertex(nx, ny, 0, i + 1, j + 1);
            faces.push([v00, v11, v10]);
            faces.push([v00, v01, v11]);
            face_pids.push("sheet_lower".to_string());
            face_pids.push("sheet_lower".to_string());

            let u00 = thin_plate_vertex(nx, ny, 1, i, j);
            let u10 = thin_plate_vertex(nx, ny, 1, i + 1, j);
            let u01 = thin_plate_vertex(nx, ny, 1, i, j + 1);
            let u11 = thin_plate_vertex(nx, ny, 1, i + 1, j + 1);
            faces.push([u00, u10, u11]);
            faces.push([u00, u11, u01]);
            face_pids.push("sheet_upper".to_string());
            face_pids.push("sheet_upper".to_string());
        }
    }
    // Joint strip along x = 0 (outward -x).
    for j in 0..ny - 1 {
        let l0 = thin_plate_vertex(nx, ny, 0, 0, j);
        let l1 = thin_plate_vertex(nx, ny, 0, 0, j + 1);
        let u0 = thin_plate_vertex(nx, ny, 1, 0, j);
        let u1 = thin_plate_vertex(nx, ny, 1, 0, j + 1);
        faces.push([l0, u0, u1]);
        faces.push([l0, u1, l1]);
        face_pids.push("joint".to_string());
        face_pids.push("joint".to_string());
    }

    SurfaceMesh::new(vertices, faces, face_pids)
}

/// Flap angle limits for [`gen_wing_flap`], degrees.
pub const WING_FLAP_ALPHA_RANGE: (f64, f64) = (-3.0, 5.0);

/// Chord of the flap portion of the wing, meters.
pub const WING_FLAP_CHORD: f64 = 0.4;

/// Grid layout of a wing-flap mesh; shared by the generator and the
/// manufactured-field evaluator.
#[derive(Debug, Clone, Copy)]
pub struct WingFlapLayout {
    pub main_cells: usize,
    pub flap_cells: usize,
    pub span_cells: usize,
}

impl WingFlapLayout {
    pub fn for_resolution(resolution: usize) -> Self {
        Self {
            main_cells: resolution,
            flap_cells: ((WING_FLAP_CHORD * resolution as f64).round() as usize).max(2),
            span_cells: (resolution / 2).max(2),
        }
    }
}

/// Zero-thickness wing: a flat main plate (x in [0,1], y in [0,0.5], PID
/// "main") plus a flap of chord 0.4 hinged at x=1 and rotated by `alpha_deg`
/// about the hinge line (PID "flap"). Upper and lower copies share the outer
/// boundary ring, making a closed two-sided surface with outward normals.
/// Positive alpha rotates the trailing edge up (z = 0.4 sin(alpha)).
pub fn gen_wing_flap(alpha_deg: f64, resolution: usize) -> Result<SurfaceMesh> {
    let (lo, hi) = WING_FLAP_ALPHA_RANGE;
    if !(alpha_deg >= lo && alpha_deg <= hi) {
        return Err(Error::InvalidParameter(format!(
            "flap angle {alpha_deg} deg outside [{lo}, {hi}]"
        )));
    }
    if resolution < 4 {
        return Err(Error::InvalidParameter(format!(
            "wing-flap resolution must be >= 4, got {resolution}"
        )));
    }

    let layout = WingFlapLayout::for_resolution(resolution);
    let (mx, fx, my) = (layout.main_cells, layout.flap_cells, layout.span_cells);
    let cols = mx + fx + 1;
    let rows = my + 1;
    let alpha = alpha_deg.to_radians();

    let grid_pos = |i: usize, j: usize| -> [f64; 3] {
        let y = 0.5 * j as f64 / my as f64;
        if i <= mx {
            [i as f64 / mx as f64, y, 0.0]
        } else {
            let s = (i - mx) as f64 / fx as f64;
            let c = WING_FLAP_CHORD * s;
            [1.0 + c * alpha.cos(), y, c * alpha.sin()]
        }
    };

    // Upper sheet holds the full grid; the lower sheet duplicates interior
    // vertices and shares the boundary ring so the surface closes.
    let mut vertices = Vec::with_capacity(2 * cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            vertices.push(grid_pos(i, j));
        }
    }
    let upper = |i: usize, j: usize| j * cols + i;
    let mut lower_index = vec![usize::MAX; cols * rows];
    for j in 0..rows {
        for i in 0..cols {
            let boundary = i == 0 || i == cols - 1 || j == 0 || j == rows - 1;
            lower_index[j * cols + i] = if boundary {
                upper(i, j)
            } else {
                let idx = vertices.len();
                vertices.push(grid_pos(i, j));
                idx
            };
        }
    }
    let lower = |i: usize, j: usize| lower_index[j * cols + i];

    let on_ring = |i: usize, j: usize| i == 0 || i == cols - 1 || j == 0 || j == rows - 1;

    let mut faces = Vec::new();
    let mut face_pids = Vec::new();
    for j in 0..my {
        for i in 0..cols - 1 {
            let pid = if i < mx { "main" } else { "flap" };
            // Split each quad along a diagonal with at least one interior
            // endpoint, otherwise the upper and lower copies of a
            // ring-to-ring diagonal would coincide and the edge would be
            // shared by four faces.
            let main_diag = !(on_ring(i, j) && on_ring(i + 1, j + 1));

            let (a, b, c, d) = (upper(i, j), upper(i + 1, j), upper(i + 1, j + 1), upper(i, j + 1));
            let (t1, t2) = if main_diag {
                ([a, b, c], [a, c, d])
            } else {
                ([a, b, d], [b, c, d])
            };
            faces.push(t1);
            faces.push(t2);
            face_pids.push(pid.to_string());
            face_pids.push(pid.to_string());

            let (a, b, c, d) = (lower(i, j), lower(i + 1, j), lower(i + 1, j + 1), lower(i, j + 1));
            let (t1, t2) = if main_diag {
                ([a, c, b], [a, d, c])
            } else {
                ([a, d, b], [b, d, c])
            };
            faces.push(t1);
            faces.push(t2);
            face_pids.push(pid.to_string());
            face_pids.push(pid.to_string());
        }
    }

    SurfaceMesh::new(vertices, faces, face_pids)?.mark_closed()
}

/// Axis-aligned unit cube, closed, outward normals, PID "cube".
pub fn gen_unit_cube() -> SurfaceMesh {
    let vertices = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let faces: Vec<[usize; 3]> = vec![
        // bottom (-z)
        [0, 2, 1],
        [0, 3, 2],
        // top (+z)
        [4, 5, 6],
        [4, 6, 7],
        // front (-y)
        [0, 1, 5],
        [0, 5, 4],
        // right (+x)
        [1, 2, 6],
        [1, 6, 5],
        // back (+y)
        [2, 3, 7],
        [2, 7, 6],
        // left (-x)
        [3, 0, 4],
        [3, 4, 7],
    ];
    let pids = vec![String::from("cube"); faces.len()];
    SurfaceMesh::new(vertices, faces, pids)
        .expect("cube is valid")
        .mark_closed()
        .expect("cube is closed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_obj_with_group() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\ng front_wing\nf 1 2 3\n";
        let mesh = load_mesh(text).unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert_eq!(mesh.face_count(), 1);
        assert_eq!(mesh.face_pids()[0], "front_wing");
    }

    #[test]
    fn faces_before_group_get_default_pid() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let mesh = load_mesh(text).unwrap();
        assert_eq!(mesh.face_pids()[0], "default");
    }

    #[test]
    fn missing_vertex_is_index_error() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n";
        match load_mesh(text) {
            Err(Error::VertexIndex { vertex, .. }) => assert_eq!(vertex, 4),
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn quad_face_is_unsupported() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        match load_mesh(text) {
            Err(Error::UnsupportedElement { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected unsupported-element error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "v 0 0 0\nv 1 0 x\n";
        match load_mesh(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_area_face_rejected_with_index() {
        let text = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n";
        match load_mesh(text) {
            Err(Error::DegenerateFace { face, .. }) => assert_eq!(face, 0),
            other => panic!("expected degenerate-face error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_exact() {
        let mesh = gen_icosphere(1).unwrap();
        let text = save_mesh(&mesh);
        let back = load_mesh(&text).unwrap();
        assert_eq!(back.vertex_count(), mesh.vertex_count());
        assert_eq!(back.face_count(), mesh.face_count());
        for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
            assert_eq!(a, b, "vertex positions must round-trip bit-exactly");
        }
        // Face order may be regrouped by PID; single-PID meshes keep order.
        assert_eq!(mesh.faces(), back.faces());
        assert_eq!(mesh.face_pids(), back.face_pids());
    }

    #[test]
    fn icosphere_counts() {
        let m0 = gen_icosphere(0).unwrap();
        assert_eq!(m0.vertex_count(), 12);
        assert_eq!(m0.face_count(), 20);
        let m2 = gen_icosphere(2).unwrap();
        assert_eq!(m2.vertex_count(), 162);
        assert_eq!(m2.face_count(), 320);
        for level in 0..4 {
            let m = gen_icosphere(level).unwrap();
            let pow = 4usize.pow(level as u32);
            assert_eq!(m.vertex_count(), 10 * pow + 2);
            assert_eq!(m.face_count(), 20 * pow);
        }
    }

    #[test]
    fn icosphere_vertices_on_unit_sphere() {
        let m = gen_icosphere(2).unwrap();
        for v in m.vertices() {
            assert!((norm(*v) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn icosphere_normals_point_outward() {
        let m = gen_icosphere(1).unwrap();
        for k in 0..m.face_count() {
            let n = m.face_unit_normal(k);
            let c = m.face_centroid(k);
            assert!(dot(n, c) > 0.0, "face {k} normal points inward");
        }
    }

    #[test]
    fn icosphere_level_above_cap_errors() {
        assert!(matches!(gen_icosphere(8), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn subdivide_counts_and_correspondence() {
        let m = gen_icosphere(0).unwrap();
        let (fine, corr) = subdivide(&m);
        assert_eq!(fine.vertex_count(), 42);
        assert_eq!(fine.face_count(), 80);
        assert_eq!(corr.coarse_count(), 12);
        for i in 0..12 {
            let j = corr.fine_index(i);
            assert_eq!(m.vertices()[i], fine.vertices()[j]);
        }
    }

    #[test]
    fn double_subdivision_matches_level_two_positions() {
        let (once, _) = subdivide(&gen_icosphere(0).unwrap());
        let (twice, _) = subdivide(&once);
        let direct = gen_icosphere(2).unwrap();
        assert_eq!(twice.vertex_count(), direct.vertex_count());
        let mut a: Vec<[i64; 3]> = twice
            .vertices()
            .iter()
            .map(|v| [quant(v[0]), quant(v[1]), quant(v[2])])
            .collect();
        let mut b: Vec<[i64; 3]> = direct
            .vertices()
            .iter()
            .map(|v| [quant(v[0]), quant(v[1]), quant(v[2])])
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b, "vertex position multisets differ beyond 1e-12");
    }

    fn quant(x: f64) -> i64 {
        (x / 1e-12).round() as i64
    }

    #[test]
    fn subdivision_preserves_closedness() {
        let m = gen_icosphere(0).unwrap();
        let (fine, _) = subdivide(&m);
        assert!(fine.is_closed());
        assert!(fine.edge_face_counts().values().all(|&c| c == 2));
    }

    #[test]
    fn flat_subdivision_correspondence_bit_identical() {
        let plate = gen_thin_plate(0.01, 3, 3).unwrap();
        let (fine, corr) = subdivide(&plate);
        for i in 0..plate.vertex_count() {
            assert_eq!(plate.vertices()[i], fine.vertices()[corr.fine_index(i)]);
        }
    }

    #[test]
    fn thin_plate_minimal_counts() {
        let m = gen_thin_plate(0.01, 2, 2).unwrap();
        assert_eq!(m.vertex_count(), 8);
        // 2 faces per sheet cell + 2 joint faces
        assert_eq!(m.face_count(), 2 + 2 + 2);
        let lower = thin_plate_vertex(2, 2, 0, 1, 1);
        let upper = thin_plate_vertex(2, 2, 1, 1, 1);
        let d = sub(m.vertices()[upper], m.vertices()[lower]);
        assert!((norm(d) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn thin_plate_rejects_bad_gap() {
        assert!(matches!(
            gen_thin_plate(0.0, 4, 4),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            gen_thin_plate(-1.0, 4, 4),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn wing_flap_zero_alpha_is_flat() {
        let m = gen_wing_flap(0.0, 8).unwrap();
        assert!(m.is_closed());
        for k in 0..m.face_count() {
            let n = m.face_unit_normal(k);
            assert!(n[0].abs() < 1e-12 && n[1].abs() < 1e-12);
            assert!((n[2].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wing_flap_trailing_edge_offset() {
        let m = gen_wing_flap(2.0, 8).unwrap();
        let max_z = m
            .vertices()
            .iter()
            .map(|v| v[2])
            .fold(f64::NEG_INFINITY, f64::max);
        let expected = WING_FLAP_CHORD * 2.0f64.to_radians().sin();
        assert!((max_z - expected).abs() < 1e-12);
        assert!((expected - 0.013962).abs() < 1e-5);
    }

    #[test]
    fn wing_flap_face_count_scales_quadratically() {
        let f8 = gen_wing_flap(1.0, 8).unwrap().face_count() as f64;
        let f16 = gen_wing_flap(1.0, 16).unwrap().face_count() as f64;
        let ratio = f16 / f8;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn wing_flap_alpha_out_of_range() {
        assert!(matches!(
            gen_wing_flap(5.5, 8),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            gen_wing_flap(-3.5, 8),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn wing_flap_has_expected_pids() {
        let m = gen_wing_flap(1.0, 8).unwrap();
        let pids = m.pid_names();
        assert!(pids.contains(&"main".to_string()));
        assert!(pids.contains(&"flap".to_string()));
        assert_eq!(pids.len(), 2);
    }

    #[test]
    fn unit_cube_is_closed_with_outward_normals() {
        let m = gen_unit_cube();
        assert!(m.is_closed());
        let center = [0.5, 0.5, 0.5];
        for k in 0..m.face_count() {
            let n = m.face_unit_normal(k);
            let c = m.face_centroid(k);
            assert!(dot(n, sub(c, center)) > 0.0);
        }
        let total: f64 = (0..m.face_count()).map(|k| m.face_area(k)).sum();
        assert!((total - 6.0).abs() < 1e-12);
    }
}
