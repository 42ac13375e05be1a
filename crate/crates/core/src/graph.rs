//! Mesh connectivity graphs and the row-stochastic random-walk operator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;

/// Undirected vertex-adjacency graph of a mesh (1-ring connectivity).
#[derive(Debug, Clone)]
pub struct MeshGraph {
    neighbors: Vec<Vec<usize>>,
}

impl MeshGraph {
    /// Builds a graph from an explicit edge list. Self-loops are rejected;
    /// duplicate edges collapse.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); vertex_count];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::IndexOutOfRange(format!(
                    "edge ({a}, {b}) with only {vertex_count} vertices"
                )));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Breadth-first graph distances from `start`; `usize::MAX` marks
    /// unreachable vertices.
    pub fn bfs_distances(&self, start: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &w in &self.neighbors[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count() == 0 {
            return true;
        }
        self.bfs_distances(0).iter().all(|&d| d != usize::MAX)
    }
}

/// Graph from the union of face edges of a mesh, deduplicated.
pub fn build_graph(mesh: &SurfaceMesh) -> MeshGraph {
    let mut edges = Vec::with_capacity(mesh.face_count() * 3);
    for f in mesh.faces() {
        edges.push((f[0], f[1]));
        edges.push((f[1], f[2]));
        edges.push((f[2], f[0]));
    }
    MeshGraph::from_edges(mesh.vertex_count(), &edges)
        .expect("a valid mesh yields a valid graph")
}

/// Path graph 0-1-...-(n-1).
pub fn path_graph(n: usize) -> MeshGraph {
    let edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    MeshGraph::from_edges(n, &edges).unwrap()
}

/// Cycle graph C_n.
pub fn cycle_graph(n: usize) -> MeshGraph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    MeshGraph::from_edges(n, &edges).unwrap()
}

/// Complete graph K_n.
pub fn complete_graph(n: usize) -> MeshGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j));
        }
    }
    MeshGraph::from_edges(n, &edges).unwrap()
}

/// Row-compressed sparse random-walk matrix. Row i holds degree(i) entries
/// of value 1/degree(i), so every row sums to one.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// P = D^-1 A from the graph adjacency. Errors on isolated vertices.
pub fn random_walk_matrix(graph: &MeshGraph) -> Result<SparseOperator> {
    let n = graph.vertex_count();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let deg = graph.degree(i);
        if deg == 0 {
            return Err(Error::ZeroDegree(i));
        }
        let w = 1.0 / deg as f64;
        for &j in graph.neighbors(i) {
            cols.push(j);
            vals.push(w);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator { n, row_ptr, cols, vals })
}

impl SparseOperator {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(pos) => self.vals[s + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// Dense product P * X, one sparse pass per column.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n, "operand row count must match dimension");
        let mut out = DMatrix::<f64>::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut oc = out.column_mut(c);
            for i in 0..self.n {
                let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
                let mut acc = 0.0;
                for t in s..e {
                    acc += self.vals[t] * xc[self.cols[t]];
                }
                oc[i] = acc;
            }
        }
        out
    }

    /// Dense copy, for oracle-scale comparisons in tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[t])] = self.vals[t];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_icosphere, gen_thin_plate, load_mesh, thin_plate_vertex};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_triangle_is_k3() {
        let mesh = load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let g = build_graph(&mesh);
        assert_eq!(g.edge_count(), 3);
        for i in 0..3 {
            assert_eq!(g.degree(i), 2);
        }
    }

    #[test]
    fn two_triangles_sharing_an_edge() {
        let mesh = load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n").unwrap();
        let g = build_graph(&mesh);
        assert_eq!(g.edge_count(), 5);
        let mut degs: Vec<usize> = (0..4).map(|i| g.degree(i)).collect();
        degs.sort_unstable();
        assert_eq!(degs, vec![2, 2, 3, 3]);
    }

    #[test]
    fn icosahedron_satisfies_euler_formula() {
        let mesh = gen_icosphere(0).unwrap();
        let g = build_graph(&mesh);
        assert_eq!(g.edge_count(), 30);
        for i in 0..12 {
            assert_eq!(g.degree(i), 5);
        }
        let (v, e, f) = (mesh.vertex_count() as i64, g.edge_count() as i64, mesh.face_count() as i64);
        assert_eq!(v - e + f, 2);
    }

    #[test]
    fn path_graph_random_walk_rows() {
        let p = random_walk_matrix(&path_graph(3)).unwrap();
        let expected = [[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p.entry(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn k3_random_walk_entries() {
        let p = random_walk_matrix(&complete_graph(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 0.5 };
                assert_eq!(p.entry(i, j), expected);
            }
        }
    }

    #[test]
    fn isolated_vertex_errors() {
        let g = MeshGraph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(matches!(random_walk_matrix(&g), Err(Error::ZeroDegree(2))));
    }

    #[test]
    fn rows_sum_to_one_on_generated_meshes() {
        for mesh in [
            gen_icosphere(2).unwrap(),
            gen_thin_plate(0.01, 5, 4).unwrap(),
            crate::mesh::gen_wing_flap(1.5, 8).unwrap(),
        ] {
            let p = random_walk_matrix(&build_graph(&mesh)).unwrap();
            for s in p.row_sums() {
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn thin_plate_topology_separates_sheets() {
        let (nx, ny) = (16, 16);
        let mesh = gen_thin_plate(0.01, nx, ny).unwrap();
        let g = build_graph(&mesh);
        assert!(g.is_connected());
        let lower = thin_plate_vertex(nx, ny, 0, nx / 2, ny / 2);
        let upper = thin_plate_vertex(nx, ny, 1, nx / 2, ny / 2);
        let d = g.bfs_distances(lower)[upper];
        assert!(d >= nx, "graph distance {d} < nx = {nx}");
        let dv = crate::mesh::sub(mesh.vertices()[upper], mesh.vertices()[lower]);
        assert!((crate::mesh::norm(dv) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn permutation_equivariance_of_random_walk() {
        let mesh = gen_icosphere(1).unwrap();
        let g = build_graph(&mesh);
        let n = g.vertex_count();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut edges = Vec::new();
            for i in 0..n {
                for &j in g.neighbors(i) {
                    if i < j {
                        edges.push((perm[i], perm[j]));
                    }
                }
            }
            let gp = MeshGraph::from_edges(n, &edges).unwrap();
            let p = random_walk_matrix(&g).unwrap();
            let pp = random_walk_matrix(&gp).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(p.entry(i, j), pp.entry(perm[i], perm[j]));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn random_walk_rows_always_stochastic(n in 3usize..20, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            // random connected-ish graph: a path plus random chords
            for i in 0..n - 1 {
                edges.push((i, i + 1));
            }
            for _ in 0..n {
                let a = rand::Rng::random_range(&mut rng, 0..n);
                let b = rand::Rng::random_range(&mut rng, 0..n);
                if a != b {
                    edges.push((a, b));
                }
            }
            let g = MeshGraph::from_edges(n, &edges).unwrap();
            let p = random_walk_matrix(&g).unwrap();
            for s in p.row_sums() {
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }
}
