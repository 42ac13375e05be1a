//! C ABI for the gist pipeline.
//!
//! All types cross the boundary as opaque handles created and destroyed by
//! this library; every function returns a [`GistStatus`] code and writes
//! results through out-pointers. The most recent error message is kept in
//! thread-local storage and can be fetched with
//! [`gist_last_error_message`]. The generated header lives in
//! `include/gist.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gist::graph::{build_graph, random_walk_matrix};
use gist::loads::{integrate_fields, FlowConstants};
use gist::mesh::SurfaceMesh;
use gist::model::Checkpoint;
use gist::spectral::{exact_kernel, spectral_embed, FilterSpec, SpectralEmbedding};

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GistStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    IndexError = 4,
    SizeError = 5,
    IoError = 6,
    Utf8Error = 7,
    InternalError = 8,
}

/// Wind-frame aerodynamic coefficients, units of square meters.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GistAeroCoefficients {
    pub cxs: f64,
    pub cys: f64,
    pub czs: f64,
    pub cmxs: f64,
    pub cmys: f64,
    pub cmzs: f64,
}

/// Opaque mesh handle.
pub struct GistMesh {
    inner: SurfaceMesh,
}

/// Opaque embedding handle.
pub struct GistEmbedding {
    inner: SpectralEmbedding,
}

/// Opaque trained-model handle.
pub struct GistModel {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn status_of(err: &gist::Error) -> GistStatus {
    use gist::Error as E;
    match err {
        E::Parse { .. } | E::UnsupportedElement { .. } => GistStatus::ParseError,
        E::VertexIndex { .. } | E::IndexOutOfRange(_) => GistStatus::IndexError,
        E::SizeLimit(_) => GistStatus::SizeError,
        E::Io(_) => GistStatus::IoError,
        E::Json(_) => GistStatus::ParseError,
        _ => GistStatus::InvalidArgument,
    }
}

fn capture<T>(out: *mut T, f: impl FnOnce() -> Result<T, (GistStatus, String)>) -> GistStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return GistStatus::NullPointer;
    }
    let result = catch_unwind(AssertUnwindSafe(f));
    match result {
        Ok(Ok(value)) => {
            unsafe { ptr::write(out, value) };
            GistStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GistStatus::InternalError
        }
    }
}

fn lift<T>(r: gist::Result<T>) -> Result<T, (GistStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, (GistStatus, String)> {
    if ptr.is_null() {
        return Err((GistStatus::NullPointer, "string argument is null".into()));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|e| (GistStatus::Utf8Error, format!("invalid utf-8: {e}")))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], (GistStatus, String)> {
    if ptr.is_null() {
        return Err((GistStatus::NullPointer, "array argument is null".into()));
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

macro_rules! deref_handle {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(h) => h,
            None => {
                set_error("handle is null");
                return GistStatus::NullPointer;
            }
        }
    };
}

/// Copies the last error message into `buf` (truncated to `cap` bytes
/// including the terminator) and returns the full message length.
#[no_mangle]
pub extern "C" fn gist_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len() - 1
    })
}

// ---------------------------------------------------------------------------
// Meshes
// ---------------------------------------------------------------------------

/// Parses mesh text (`v`/`g`/`f` lines) into a new mesh handle.
#[no_mangle]
pub extern "C" fn gist_mesh_from_text(text: *const c_char, out: *mut *mut GistMesh) -> GistStatus {
    capture(out, || {
        let text = unsafe { str_arg(text) }?;
        let mesh = lift(gist::mesh::load_mesh(text))?;
        Ok(Box::into_raw(Box::new(GistMesh { inner: mesh })))
    })
}

/// Loads a mesh file from disk.
#[no_mangle]
pub extern "C" fn gist_mesh_load(path: *const c_char, out: *mut *mut GistMesh) -> GistStatus {
    capture(out, || {
        let path = unsafe { str_arg(path) }?;
        let mesh = lift(gist::mesh::load_mesh_file(Path::new(path)))?;
        Ok(Box::into_raw(Box::new(GistMesh { inner: mesh })))
    })
}

/// Unit-sphere triangulation at the given subdivision level.
#[no_mangle]
pub extern "C" fn gist_mesh_icosphere(level: usize, out: *mut *mut GistMesh) -> GistStatus {
    capture(out, || {
        let mesh = lift(gist::mesh::gen_icosphere(level))?;
        Ok(Box::into_raw(Box::new(GistMesh { inner: mesh })))
    })
}

/// Closed two-sided wing with a flap rotated by `alpha_deg`.
#[no_mangle]
pub extern "C" fn gist_mesh_wing_flap(
    alpha_deg: f64,
    resolution: usize,
    out: *mut *mut GistMesh,
) -> GistStatus {
    capture(out, || {
        let mesh = lift(gist::mesh::gen_wing_flap(alpha_deg, resolution))?;
        Ok(Box::into_raw(Box::new(GistMesh { inner: mesh })))
    })
}

/// Two sheets separated by `gap`, joined along one edge.
#[no_mangle]
pub extern "C" fn gist_mesh_thin_plate(
    gap: f64,
    nx: usize,
    ny: usize,
    out: *mut *mut GistMesh,
) -> GistStatus {
    capture(out, || {
        let mesh = lift(gist::mesh::gen_thin_plate(gap, nx, ny))?;
        Ok(Box::into_raw(Box::new(GistMesh { inner: mesh })))
    })
}

#[no_mangle]
pub extern "C" fn gist_mesh_vertex_count(mesh: *const GistMesh, out: *mut usize) -> GistStatus {
    let handle = deref_handle!(mesh);
    capture(out, || Ok(handle.inner.vertex_count()))
}

#[no_mangle]
pub extern "C" fn gist_mesh_face_count(mesh: *const GistMesh, out: *mut usize) -> GistStatus {
    let handle = deref_handle!(mesh);
    capture(out, || Ok(handle.inner.face_count()))
}

/// Copies vertex positions into `buf` (x,y,z per vertex; `len` must be at
/// least 3 * vertex count).
#[no_mangle]
pub extern "C" fn gist_mesh_vertices(
    mesh: *const GistMesh,
    buf: *mut f64,
    len: usize,
) -> GistStatus {
    let handle = deref_handle!(mesh);
    if buf.is_null() {
        set_error("buffer is null");
        return GistStatus::NullPointer;
    }
    let needed = handle.inner.vertex_count() * 3;
    if len < needed {
        set_error(&format!("buffer holds {len} values, need {needed}"));
        return GistStatus::SizeError;
    }
    let out = unsafe { std::slice::from_raw_parts_mut(buf, needed) };
    for (i, v) in handle.inner.vertices().iter().enumerate() {
        out[3 * i..3 * i + 3].copy_from_slice(v);
    }
    GistStatus::Ok
}

/// Frees a mesh handle; a null pointer is ignored.
#[no_mangle]
pub extern "C" fn gist_mesh_free(mesh: *mut GistMesh) {
    if !mesh.is_null() {
        drop(unsafe { Box::from_raw(mesh) });
    }
}

// ---------------------------------------------------------------------------
// Embeddings and kernels
// ---------------------------------------------------------------------------

/// Computes the spectral embedding of a mesh: filter coefficients
/// `coeffs[0..n_coeffs]`, embedding dimension `r`, RNG `seed`.
#[no_mangle]
pub extern "C" fn gist_embedding_compute(
    mesh: *const GistMesh,
    coeffs: *const f64,
    n_coeffs: usize,
    r: usize,
    seed: u64,
    out: *mut *mut GistEmbedding,
) -> GistStatus {
    let handle = deref_handle!(mesh);
    capture(out, || {
        let coeffs = unsafe { slice_arg(coeffs, n_coeffs) }?;
        let filter = lift(FilterSpec::new(coeffs.to_vec()))?;
        let p = lift(random_walk_matrix(&build_graph(&handle.inner)))?;
        let emb = lift(spectral_embed(&p, &filter, r, seed))?;
        Ok(Box::into_raw(Box::new(GistEmbedding { inner: emb })))
    })
}

#[no_mangle]
pub extern "C" fn gist_embedding_dims(
    emb: *const GistEmbedding,
    out_n: *mut usize,
    out_r: *mut usize,
) -> GistStatus {
    let handle = deref_handle!(emb);
    if out_n.is_null() || out_r.is_null() {
        set_error("output pointer is null");
        return GistStatus::NullPointer;
    }
    unsafe {
        *out_n = handle.inner.vertex_count();
        *out_r = handle.inner.dimension();
    }
    GistStatus::Ok
}

/// Inner product of embedding rows i and j: the kernel estimate K(i, j).
#[no_mangle]
pub extern "C" fn gist_embedding_kernel_estimate(
    emb: *const GistEmbedding,
    i: usize,
    j: usize,
    out: *mut f64,
) -> GistStatus {
    let handle = deref_handle!(emb);
    capture(out, || lift(handle.inner.kernel_estimate(i, j)))
}

/// Copies the embedding row-major into `buf` (`len` >= N * r values).
#[no_mangle]
pub extern "C" fn gist_embedding_copy(
    emb: *const GistEmbedding,
    buf: *mut f64,
    len: usize,
) -> GistStatus {
    let handle = deref_handle!(emb);
    if buf.is_null() {
        set_error("buffer is null");
        return GistStatus::NullPointer;
    }
    let (n, r) = (handle.inner.vertex_count(), handle.inner.dimension());
    if len < n * r {
        set_error(&format!("buffer holds {len} values, need {}", n * r));
        return GistStatus::SizeError;
    }
    let out = unsafe { std::slice::from_raw_parts_mut(buf, n * r) };
    let m = handle.inner.matrix();
    for i in 0..n {
        for c in 0..r {
            out[i * r + c] = m[(i, c)];
        }
    }
    GistStatus::Ok
}

#[no_mangle]
pub extern "C" fn gist_embedding_free(emb: *mut GistEmbedding) {
    if !emb.is_null() {
        drop(unsafe { Box::from_raw(emb) });
    }
}

/// Dense exact kernel K = f(P) f(P)^T, written row-major into `buf`
/// (`len` >= N * N). Subject to the library's dense-size cap.
#[no_mangle]
pub extern "C" fn gist_exact_kernel(
    mesh: *const GistMesh,
    coeffs: *const f64,
    n_coeffs: usize,
    buf: *mut f64,
    len: usize,
) -> GistStatus {
    let handle = deref_handle!(mesh);
    if buf.is_null() {
        set_error("buffer is null");
        return GistStatus::NullPointer;
    }
    let n = handle.inner.vertex_count();
    if len < n * n {
        set_error(&format!("buffer holds {len} values, need {}", n * n));
        return GistStatus::SizeError;
    }
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<(), (GistStatus, String)> {
        let coeffs = unsafe { slice_arg(coeffs, n_coeffs) }?;
        let filter = lift(FilterSpec::new(coeffs.to_vec()))?;
        let p = lift(random_walk_matrix(&build_graph(&handle.inner)))?;
        let kernel = lift(exact_kernel(&p, &filter))?;
        let out = unsafe { std::slice::from_raw_parts_mut(buf, n * n) };
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = kernel.value(i, j);
            }
        }
        Ok(())
    }));
    match result {
        Ok(Ok(())) => GistStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GistStatus::InternalError
        }
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Loads a trained checkpoint from disk.
#[no_mangle]
pub extern "C" fn gist_model_load(path: *const c_char, out: *mut *mut GistModel) -> GistStatus {
    capture(out, || {
        let path = unsafe { str_arg(path) }?;
        let ck = lift(Checkpoint::load(Path::new(path)))?;
        Ok(Box::into_raw(Box::new(GistModel { inner: ck })))
    })
}

/// Predicts surface fields for a mesh at a map point
/// (heave, pitch, yaw, roll, steer). Fields are written row-major
/// (p, taux, tauy, tauz per vertex); `len` must be at least 4 * N.
#[no_mangle]
pub extern "C" fn gist_model_predict(
    model: *const GistModel,
    mesh: *const GistMesh,
    map: *const f64,
    buf: *mut f64,
    len: usize,
) -> GistStatus {
    let model = deref_handle!(model);
    let mesh = deref_handle!(mesh);
    if buf.is_null() {
        set_error("buffer is null");
        return GistStatus::NullPointer;
    }
    let n = mesh.inner.vertex_count();
    if len < 4 * n {
        set_error(&format!("buffer holds {len} values, need {}", 4 * n));
        return GistStatus::SizeError;
    }
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<(), (GistStatus, String)> {
        let map = unsafe { slice_arg(map, 5) }?;
        let fields = lift(gist::cli::predict_with_checkpoint(
            &model.inner,
            &mesh.inner,
            [map[0], map[1], map[2], map[3], map[4]],
        ))?;
        let out = unsafe { std::slice::from_raw_parts_mut(buf, 4 * n) };
        for i in 0..n {
            for c in 0..4 {
                out[i * 4 + c] = fields[(i, c)];
            }
        }
        Ok(())
    }));
    match result {
        Ok(Ok(())) => GistStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GistStatus::InternalError
        }
    }
}

#[no_mangle]
pub extern "C" fn gist_model_free(model: *mut GistModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

// ---------------------------------------------------------------------------
// Load integration
// ---------------------------------------------------------------------------

/// Integrates per-vertex fields (row-major p, taux, tauy, tauz; `len` =
/// 4 * N) into wind-frame coefficients. The wind frame is the body frame
/// yawed by `yaw_deg`.
#[no_mangle]
pub extern "C" fn gist_integrate(
    mesh: *const GistMesh,
    fields: *const f64,
    len: usize,
    yaw_deg: f64,
    out: *mut GistAeroCoefficients,
) -> GistStatus {
    let mesh = deref_handle!(mesh);
    let n = mesh.inner.vertex_count();
    capture(out, || {
        let fields = unsafe { slice_arg(fields, len) }?;
        if fields.len() != 4 * n {
            return Err((
                GistStatus::SizeError,
                format!("field buffer holds {len} values, need {}", 4 * n),
            ));
        }
        let m = nalgebra::DMatrix::from_fn(n, 4, |i, c| fields[i * 4 + c]);
        let constants = FlowConstants::with_yaw(yaw_deg);
        let coeffs = lift(integrate_fields(&mesh.inner, &m, &constants))?;
        Ok(GistAeroCoefficients {
            cxs: coeffs.total[0],
            cys: coeffs.total[1],
            czs: coeffs.total[2],
            cmxs: coeffs.total[3],
            cmys: coeffs.total[4],
            cmzs: coeffs.total[5],
        })
    })
}
