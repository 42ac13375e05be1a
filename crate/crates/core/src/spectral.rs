//! Gauge-invariant spectral machinery: polynomial filters evaluated by
//! sparse power iteration, randomly projected embeddings, exact dense
//! kernel oracles, and the discretization-mismatch and scaling studies.
//!
//! The embedding of vertex i is row i of f(P) * R, where R has i.i.d.
//! Gaussian entries of variance 1/r. Row inner products are unbiased
//! estimates of K(i, j) = [f(P) f(P)^T]_ij, which depends only on the
//! operator and never on an eigenbasis choice.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_graph, random_walk_matrix, MeshGraph, SparseOperator};
use crate::mesh::{fmt_f64, gen_icosphere, subdivide};

/// Highest supported polynomial degree of a spectral filter.
pub const MAX_FILTER_DEGREE: usize = 16;

/// Dense-oracle size caps.
pub const EXACT_KERNEL_CAP: usize = 5000;
pub const EIGEN_KERNEL_CAP: usize = 500;

/// Columns generated per independent RNG stream; fixed so the embedding is
/// identical for every thread count.
const EMBED_BLOCK_COLS: usize = 64;

/// Polynomial spectral filter f(P) = sum_k c_k P^k.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    coefficients: Vec<f64>,
}

impl FilterSpec {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().all(|c| *c == 0.0) {
            return Err(Error::InvalidParameter(
                "filter needs at least one nonzero coefficient".into(),
            ));
        }
        if coefficients.len() > MAX_FILTER_DEGREE + 1 {
            return Err(Error::InvalidParameter(format!(
                "filter degree {} exceeds cap {MAX_FILTER_DEGREE}",
                coefficients.len() - 1
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("filter coefficients must be finite".into()));
        }
        Ok(Self { coefficients })
    }

    /// Low-pass default: 0.25 + 0.5 P + 0.25 P^2.
    pub fn low_pass() -> Self {
        Self {
            coefficients: vec![0.25, 0.5, 0.25],
        }
    }

    pub fn identity() -> Self {
        Self {
            coefficients: vec![1.0],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Scalar evaluation f(x), Horner scheme.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// Evaluates f(P) * X with repeated sparse products (Horner scheme); never
/// forms a dense power of P.
pub fn apply_filter(p: &SparseOperator, filter: &FilterSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != p.dimension() {
        return Err(Error::ShapeMismatch(format!(
            "operand has {} rows, operator dimension is {}",
            x.nrows(),
            p.dimension()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::ShapeMismatch("operand needs at least one column".into()));
    }
    let coeffs = filter.coefficients();
    let mut acc = x * coeffs[coeffs.len() - 1];
    for &c in coeffs.iter().rev().skip(1) {
        acc = p.mul_dense(&acc);
        if c != 0.0 {
            acc += x * c;
        }
    }
    Ok(acc)
}

/// N x r spectral embedding with its provenance (seed and filter).
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    phi: DMatrix<f64>,
    seed: u64,
    filter: FilterSpec,
}

impl SpectralEmbedding {
    pub fn vertex_count(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.phi.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.filter
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Inner product of embedding rows i and j; an unbiased estimate of the
    /// kernel K(i, j). Symmetric in (i, j) bit-for-bit.
    pub fn kernel_estimate(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.vertex_count();
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange(format!(
                "kernel estimate at ({i}, {j}) with {n} vertices"
            )));
        }
        Ok(self.phi.row(i).dot(&self.phi.row(j)))
    }

    /// Applies an orthogonal right-rotation; used by gauge-invariance tests.
    pub fn rotated(&self, q: &DMatrix<f64>) -> SpectralEmbedding {
        assert_eq!(q.nrows(), self.dimension());
        SpectralEmbedding {
            phi: &self.phi * q,
            seed: self.seed,
            filter: self.filter.clone(),
        }
    }
}

fn gaussian_block(n: usize, cols: usize, scale: f64, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut block = DMatrix::<f64>::zeros(n, cols);
    // Column-major fill matches storage order.
    for c in 0..cols {
        for i in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            block[(i, c)] = g * scale;
        }
    }
    block
}

/// Computes the embedding f(P) * R for a Gaussian R with variance-1/r
/// entries (so E[R R^T] = I). Columns are generated in fixed blocks with
/// per-block RNG streams derived from (seed, block index); the result is
/// bit-identical for any worker count.
pub fn spectral_embed(
    p: &SparseOperator,
    filter: &FilterSpec,
    r: usize,
    seed: u64,
) -> Result<SpectralEmbedding> {
    if r == 0 {
        return Err(Error::InvalidParameter("embedding dimension r must be >= 1".into()));
    }
    let n = p.dimension();
    let scale = 1.0 / (r as f64).sqrt();
    let mut phi = DMatrix::<f64>::zeros(n, r);

    let blocks: Vec<(usize, usize)> = (0..r)
        .step_by(EMBED_BLOCK_COLS)
        .map(|start| (start, (start + EMBED_BLOCK_COLS).min(r) - start))
        .collect();

    // DMatrix storage is column-major, so each block owns a contiguous
    // slice of the output and blocks can be filled in parallel.
    let mut slices: Vec<&mut [f64]> = Vec::with_capacity(blocks.len());
    let mut rest = phi.as_mut_slice();
    for &(_, width) in &blocks {
        let (head, tail) = rest.split_at_mut(width * n);
        slices.push(head);
        rest = tail;
    }

    slices
        .into_par_iter()
        .zip(blocks.par_iter())
        .try_for_each(|(out, &(start, width))| -> Result<()> {
            let block_index = (start / EMBED_BLOCK_COLS) as u64;
            let r_block = gaussian_block(n, width, scale, seed, block_index);
            let y = apply_filter(p, filter, &r_block)?;
            out.copy_from_slice(y.as_slice());
            Ok(())
        })?;

    Ok(SpectralEmbedding {
        phi,
        seed,
        filter: filter.clone(),
    })
}

/// Dense symmetric kernel matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    m: DMatrix<f64>,
    filter: FilterSpec,
}

impl KernelMatrix {
    pub fn dimension(&self) -> usize {
        self.m.nrows()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.filter
    }

    pub fn max_abs_diff(&self, other: &KernelMatrix) -> f64 {
        (&self.m - &other.m).abs().max()
    }
}

/// Exact kernel K = f(P) f(P)^T computed by sparse products against the
/// identity. No eigendecomposition is involved, so the result is gauge-free
/// by construction.
pub fn exact_kernel(p: &SparseOperator, filter: &FilterSpec) -> Result<KernelMatrix> {
    let n = p.dimension();
    if n > EXACT_KERNEL_CAP {
        return Err(Error::SizeLimit(format!(
            "exact kernel needs N <= {EXACT_KERNEL_CAP}, got {n}"
        )));
    }
    let f = apply_filter(p, filter, &DMatrix::identity(n, n))?;
    let k = &f * f.transpose();
    Ok(KernelMatrix {
        m: k,
        filter: filter.clone(),
    })
}

/// Dense symmetric normalization D^-1/2 A D^-1/2.
pub fn sym_normalized_dense(graph: &MeshGraph) -> Result<DMatrix<f64>> {
    let n = graph.vertex_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if graph.degree(i) == 0 {
            return Err(Error::ZeroDegree(i));
        }
    }
    for i in 0..n {
        let di = (graph.degree(i) as f64).sqrt();
        for &j in graph.neighbors(i) {
            let dj = (graph.degree(j) as f64).sqrt();
            m[(i, j)] = 1.0 / (di * dj);
        }
    }
    Ok(m)
}

struct EigenBasis {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

fn eigen_basis(graph: &MeshGraph) -> Result<EigenBasis> {
    let n = graph.vertex_count();
    if n > EIGEN_KERNEL_CAP {
        return Err(Error::SizeLimit(format!(
            "eigen-expansion kernel needs N <= {EIGEN_KERNEL_CAP}, got {n}"
        )));
    }
    let p_sym = sym_normalized_dense(graph)?;
    let eig = nalgebra::SymmetricEigen::new(p_sym);
    Ok(EigenBasis {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

fn kernel_from_basis(basis: &EigenBasis, filter: &FilterSpec) -> KernelMatrix {
    let weights: Vec<f64> = basis.values.iter().map(|&mu| filter.eval(mu).powi(2)).collect();
    let mut scaled = basis.vectors.clone();
    for (c, w) in weights.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*w);
    }
    KernelMatrix {
        m: &scaled * basis.vectors.transpose(),
        filter: filter.clone(),
    }
}

/// Eigen-expansion oracle: sum_l f(mu_l)^2 u_l u_l^T from the full
/// eigendecomposition of the symmetrically normalized operator.
pub fn symmetric_eigen_kernel(graph: &MeshGraph, filter: &FilterSpec) -> Result<KernelMatrix> {
    Ok(kernel_from_basis(&eigen_basis(graph)?, filter))
}

/// Eigenvalues within this spacing are treated as one degenerate group.
const DEGENERACY_TOL: f64 = 1e-8;

/// Same expansion, but with the eigenbasis deliberately re-gauged first:
/// every eigenvector gets a random sign and each degenerate eigenspace a
/// random orthogonal rotation. The output must not change.
pub fn symmetric_eigen_kernel_rotated(
    graph: &MeshGraph,
    filter: &FilterSpec,
    seed: u64,
) -> Result<KernelMatrix> {
    let mut basis = eigen_basis(graph)?;
    let n = basis.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| basis.values[a].total_cmp(&basis.values[b]));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (basis.values[order[end]] - basis.values[order[end - 1]]).abs() <= DEGENERACY_TOL
        {
            end += 1;
        }
        let group: Vec<usize> = order[start..end].to_vec();
        let g = group.len();
        let q = random_orthogonal(g, &mut rng);
        let old: Vec<DVector<f64>> = group.iter().map(|&c| basis.vectors.column(c).into_owned()).collect();
        for (gi, &c) in group.iter().enumerate() {
            let mut new_col = DVector::<f64>::zeros(n);
            for (gj, col) in old.iter().enumerate() {
                new_col += col * q[(gj, gi)];
            }
            basis.vectors.set_column(c, &new_col);
        }
        start = end;
    }
    Ok(kernel_from_basis(&basis, filter))
}

/// Haar-ish random orthogonal matrix via QR of a Gaussian matrix, with the
/// sign convention fixed so Q is uniquely determined by the sample.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// How [`mismatch_curve`] measures kernels on each refinement level.
#[derive(Debug, Clone, Copy)]
pub enum MismatchMode {
    /// Exact dense kernels; isolates the discretization term.
    Oracle,
    /// Monte Carlo embeddings averaged over `seeds` seeds at dimension `r`.
    Estimate { r: usize, seeds: u64 },
}

/// Mean absolute kernel mismatch between consecutive icosphere levels,
/// evaluated at corresponding coarse vertex pairs. Returns one
/// (coarse vertex count, mean mismatch) entry per consecutive level pair.
pub fn mismatch_curve(levels: &[usize], filter: &FilterSpec, mode: MismatchMode) -> Result<Vec<(usize, f64)>> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter(
            "mismatch curve needs at least 2 levels".into(),
        ));
    }
    for w in levels.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter("levels must be strictly increasing".into()));
        }
    }

    let mut out = Vec::new();
    for w in levels.windows(2) {
        let coarse_mesh = gen_icosphere(w[0])?;
        // Refine the coarse mesh itself so the correspondence map is exact.
        let mut fine_mesh = coarse_mesh.clone();
        let mut corr: Option<crate::mesh::CorrespondenceMap> = None;
        for _ in w[0]..w[1] {
            let (next, step) = subdivide(&fine_mesh);
            corr = Some(match corr {
                None => step,
                Some(prev) => prev.compose(&step),
            });
            fine_mesh = next;
        }
        let corr = corr.unwrap();

        let pc = random_walk_matrix(&build_graph(&coarse_mesh))?;
        let pf = random_walk_matrix(&build_graph(&fine_mesh))?;
        let nc = coarse_mesh.vertex_count();

        let mean = match mode {
            MismatchMode::Oracle => {
                let kc = exact_kernel(&pc, filter)?;
                let kf = exact_kernel(&pf, filter)?;
                mean_pair_mismatch(nc, |i, j| {
                    (kc.value(i, j) - kf.value(corr.fine_index(i), corr.fine_index(j))).abs()
                })
            }
            MismatchMode::Estimate { r, seeds } => {
                if seeds == 0 {
                    return Err(Error::InvalidParameter("estimate mode needs seeds >= 1".into()));
                }
                let mut acc = 0.0;
                for s in 0..seeds {
                    let ec = spectral_embed(&pc, filter, r, s)?;
                    let ef = spectral_embed(&pf, filter, r, s)?;
                    acc += mean_pair_mismatch(nc, |i, j| {
                        (ec.kernel_estimate(i, j).unwrap()
                            - ef
                                .kernel_estimate(corr.fine_index(i), corr.fine_index(j))
                                .unwrap())
                        .abs()
                    });
                }
                acc / seeds as f64
            }
        };
        out.push((nc, mean));
    }
    Ok(out)
}

fn mean_pair_mismatch(n: usize, diff: impl Fn(usize, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in i..n {
            acc += diff(i, j);
            count += 1;
        }
    }
    acc / count as f64
}

/// One row of a scaling benchmark.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub n: usize,
    pub seconds: f64,
}

/// Times `spectral_embed` (only) on icosphere graphs at the given levels.
/// Each timing is the median of `reps` runs.
pub fn scaling_bench(levels: &[usize], filter: &FilterSpec, r: usize, reps: usize) -> Result<Vec<BenchRow>> {
    let reps = reps.max(1);
    let mut rows = Vec::new();
    for &level in levels {
        let mesh = gen_icosphere(level)?;
        let p = random_walk_matrix(&build_graph(&mesh))?;
        // untimed warmup
        let _ = spectral_embed(&p, filter, r, 0)?;
        let mut times = Vec::with_capacity(reps);
        for rep in 0..reps {
            let t0 = Instant::now();
            let emb = spectral_embed(&p, filter, r, rep as u64)?;
            let dt = t0.elapsed().as_secs_f64();
            assert!(emb.matrix()[(0, 0)].is_finite());
            times.push(dt);
        }
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            n: p.dimension(),
            seconds: times[times.len() / 2],
        });
    }
    Ok(rows)
}

/// Least-squares slope of log(seconds) against log(n).
pub fn loglog_slope(rows: &[BenchRow]) -> f64 {
    fit_slope(
        &rows.iter().map(|r| (r.n as f64).ln()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.seconds.ln()).collect::<Vec<_>>(),
    )
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

// ---------------------------------------------------------------------------
// Embedding text format
// ---------------------------------------------------------------------------

/// Serializes an embedding: header `GIST-EMB N r seed`, then N lines of r
/// decimals.
pub fn write_embedding(emb: &SpectralEmbedding) -> String {
    let (n, r) = (emb.vertex_count(), emb.dimension());
    let mut out = String::new();
    let _ = writeln!(out, "GIST-EMB {n} {r} {}", emb.seed());
    for i in 0..n {
        let row: Vec<String> = (0..r).map(|c| fmt_f64(emb.matrix()[(i, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Parses the text format produced by [`write_embedding`]. The filter is not
/// part of the format; the caller must supply it.
pub fn read_embedding(text: &str, filter: FilterSpec) -> Result<SpectralEmbedding> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty embedding file".into(),
    })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "GIST-EMB" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `GIST-EMB N r seed`".into(),
        });
    }
    let parse_usize = |s: &str| -> Result<usize> {
        s.parse().map_err(|e| Error::Parse {
            line: 1,
            msg: format!("bad header field {s:?}: {e}"),
        })
    };
    let n = parse_usize(parts[1])?;
    let r = parse_usize(parts[2])?;
    let seed: u64 = parts[3].parse().map_err(|e| Error::Parse {
        line: 1,
        msg: format!("bad seed {:?}: {e}", parts[3]),
    })?;

    let mut phi = DMatrix::<f64>::zeros(n, r);
    for i in 0..n {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: i + 2,
            msg: format!("expected {n} rows"),
        })?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != r {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {r} values, found {}", vals.len()),
            });
        }
        for (c, s) in vals.iter().enumerate() {
            phi[(i, c)] = s.parse().map_err(|e| Error::Parse {
                line: idx + 1,
                msg: format!("bad value {s:?}: {e}"),
            })?;
        }
    }
    Ok(SpectralEmbedding { phi, seed, filter })
}

pub fn write_embedding_file(emb: &SpectralEmbedding, path: &Path) -> Result<()> {
    std::fs::write(path, write_embedding(emb))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, cycle_graph, path_graph};

    fn path3_op() -> SparseOperator {
        random_walk_matrix(&path_graph(3)).unwrap()
    }

    #[test]
    fn identity_filter_returns_operand() {
        let p = path3_op();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = apply_filter(&p, &FilterSpec::identity(), &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn filter_p_on_path_graph() {
        let p = path3_op();
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let f = FilterSpec::new(vec![0.0, 1.0]).unwrap();
        let y = apply_filter(&p, &f, &x).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn filter_p_squared_on_path_graph() {
        let p = path3_op();
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let f = FilterSpec::new(vec![0.0, 0.0, 1.0]).unwrap();
        let y = apply_filter(&p, &f, &x).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn filter_shape_mismatch() {
        let p = path3_op();
        let x = DMatrix::zeros(4, 1);
        assert!(matches!(
            apply_filter(&p, &FilterSpec::identity(), &x),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn filter_rejects_all_zero_and_overlong() {
        assert!(FilterSpec::new(vec![0.0, 0.0]).is_err());
        assert!(FilterSpec::new(vec![]).is_err());
        assert!(FilterSpec::new(vec![1.0; MAX_FILTER_DEGREE + 2]).is_err());
    }

    #[test]
    fn embed_rejects_zero_r() {
        let p = path3_op();
        assert!(matches!(
            spectral_embed(&p, &FilterSpec::identity(), 0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn embedding_deterministic_across_thread_counts() {
        let p = random_walk_matrix(&build_graph(&gen_icosphere(2).unwrap())).unwrap();
        let f = FilterSpec::low_pass();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| spectral_embed(&p, &f, 200, 42).unwrap())
        };
        let a = run(1);
        let b = run(8);
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
    }

    #[test]
    fn identity_filter_kernel_estimates_concentrate() {
        // With f = identity the embedding is R itself: E<phi_i, phi_i> = 1,
        // E<phi_i, phi_j> = 0.
        let p = path3_op();
        let f = FilterSpec::identity();
        let (mut diag, mut off) = (0.0, 0.0);
        let seeds = 200;
        for s in 0..seeds {
            let e = spectral_embed(&p, &f, 256, s).unwrap();
            diag += e.kernel_estimate(1, 1).unwrap();
            off += e.kernel_estimate(0, 1).unwrap();
        }
        diag /= seeds as f64;
        off /= seeds as f64;
        assert!((diag - 1.0).abs() <= 0.05, "diag mean {diag}");
        assert!(off.abs() <= 0.05, "off-diag mean {off}");
    }

    #[test]
    fn path_graph_estimate_matches_exact_kernel() {
        // exact K = P P^T on the path graph has K(0,2) = 1 and K(0,1) = 0.
        let p = path3_op();
        let f = FilterSpec::new(vec![0.0, 1.0]).unwrap();
        let k = exact_kernel(&p, &f).unwrap();
        assert_eq!(k.value(0, 2), 1.0);
        assert_eq!(k.value(0, 1), 0.0);
        let seeds = 200;
        let mut m02 = 0.0;
        let mut m01 = 0.0;
        for s in 0..seeds {
            let e = spectral_embed(&p, &f, 256, s).unwrap();
            m02 += e.kernel_estimate(0, 2).unwrap();
            m01 += e.kernel_estimate(0, 1).unwrap();
        }
        m02 /= seeds as f64;
        m01 /= seeds as f64;
        assert!((m02 - 1.0).abs() <= 0.05, "mean {m02}");
        assert!(m01.abs() <= 0.05, "mean {m01}");
    }

    #[test]
    fn estimate_std_shrinks_with_r() {
        let p = path3_op();
        let f = FilterSpec::new(vec![0.0, 1.0]).unwrap();
        let sample_std = |r: usize| {
            let seeds = 120;
            let vals: Vec<f64> = (0..seeds)
                .map(|s| {
                    spectral_embed(&p, &f, r, 1000 + s)
                        .unwrap()
                        .kernel_estimate(0, 2)
                        .unwrap()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        };
        let ratio = sample_std(256) / sample_std(1024);
        assert!((ratio - 2.0).abs() <= 0.6, "std ratio {ratio}");
    }

    #[test]
    fn exact_kernel_examples() {
        let p = path3_op();
        let f = FilterSpec::new(vec![0.0, 1.0]).unwrap();
        let k = exact_kernel(&p, &f).unwrap();
        let expected = [[1.0, 0.0, 1.0], [0.0, 0.5, 0.0], [1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.value(i, j) - expected[i][j]).abs() <= 1e-15);
            }
        }

        let k3 = exact_kernel(&random_walk_matrix(&complete_graph(3)).unwrap(), &f).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let exp = if i == j { 0.5 } else { 0.25 };
                assert!((k3.value(i, j) - exp).abs() <= 1e-15);
            }
        }

        let ki = exact_kernel(&p, &FilterSpec::identity()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let exp = if i == j { 1.0 } else { 0.0 };
                assert_eq!(ki.value(i, j), exp);
            }
        }
    }

    #[test]
    fn exact_kernel_is_symmetric() {
        let p = random_walk_matrix(&build_graph(&gen_icosphere(1).unwrap())).unwrap();
        let k = exact_kernel(&p, &FilterSpec::low_pass()).unwrap();
        let d = (k.matrix() - k.matrix().transpose()).abs().max();
        assert!(d <= 1e-10);
    }

    #[test]
    fn eigen_kernel_identity_filter_is_identity() {
        let g = cycle_graph(5);
        let k = symmetric_eigen_kernel(&g, &FilterSpec::identity()).unwrap();
        let d = (k.matrix() - DMatrix::<f64>::identity(5, 5)).abs().max();
        assert!(d <= 1e-10, "max deviation {d}");
    }

    #[test]
    fn eigen_kernel_gauge_invariant_on_degenerate_spectra() {
        // C4 has a degenerate eigenvalue pair; rotating within the
        // eigenspace must not change the kernel.
        for (g, name) in [
            (cycle_graph(4), "C4"),
            (cycle_graph(6), "C6"),
            (build_graph(&gen_icosphere(0).unwrap()), "icosahedron"),
        ] {
            let f = FilterSpec::low_pass();
            let base = symmetric_eigen_kernel(&g, &f).unwrap();
            for seed in 0..5 {
                let rot = symmetric_eigen_kernel_rotated(&g, &f, seed).unwrap();
                let d = base.max_abs_diff(&rot);
                assert!(d <= 1e-10, "{name} seed {seed}: max diff {d}");
            }
        }
    }

    #[test]
    fn eigen_kernel_matches_exact_kernel_on_regular_graph() {
        // On a regular graph P_sym == P, so the two routes agree.
        let g = complete_graph(3);
        let f = FilterSpec::new(vec![0.0, 1.0]).unwrap();
        let via_eigen = symmetric_eigen_kernel(&g, &f).unwrap();
        let via_products = exact_kernel(&random_walk_matrix(&g).unwrap(), &f).unwrap();
        assert!(via_eigen.max_abs_diff(&via_products) <= 1e-10);
    }

    #[test]
    fn exact_kernel_permutation_equivariant() {
        use rand::seq::SliceRandom;
        let g = build_graph(&gen_icosphere(1).unwrap());
        let n = g.vertex_count();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
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
        let f = FilterSpec::low_pass();
        let k = exact_kernel(&random_walk_matrix(&g).unwrap(), &f).unwrap();
        let kp = exact_kernel(&random_walk_matrix(&gp).unwrap(), &f).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((k.value(i, j) - kp.value(perm[i], perm[j])).abs());
            }
        }
        assert!(worst <= 1e-12, "max diff {worst}");
    }

    #[test]
    fn mismatch_identity_filter_is_zero() {
        let rows = mismatch_curve(&[1, 2], &FilterSpec::identity(), MismatchMode::Oracle).unwrap();
        for (_, m) in rows {
            assert!(m.abs() <= 1e-12);
        }
    }

    #[test]
    fn mismatch_needs_two_levels() {
        assert!(matches!(
            mismatch_curve(&[1], &FilterSpec::low_pass(), MismatchMode::Oracle),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn embedding_text_round_trip() {
        let p = path3_op();
        let f = FilterSpec::low_pass();
        let e = spectral_embed(&p, &f, 7, 99).unwrap();
        let text = write_embedding(&e);
        assert!(text.starts_with("GIST-EMB 3 7 99\n"));
        let back = read_embedding(&text, f).unwrap();
        assert_eq!(back.seed(), 99);
        assert_eq!(back.matrix().as_slice(), e.matrix().as_slice());
    }

    #[test]
    fn kernel_estimate_index_error() {
        let p = path3_op();
        let e = spectral_embed(&p, &FilterSpec::identity(), 4, 0).unwrap();
        assert!(matches!(
            e.kernel_estimate(0, 3),
            Err(Error::IndexOutOfRange(_))
        ));
    }
}
