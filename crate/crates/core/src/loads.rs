//! Surface load integration: element forces and torques, wind-frame
//! aerodynamic coefficients with per-PID breakdowns, field error metrics,
//! and threshold reporting.
//!
//! Element force follows F_k = (p_k n_k + tau_k) A_k with the outward
//! normal n_k; torques are taken about a configurable origin. Coefficients
//! are normalized by the dynamic pressure q = 0.5 rho V^2 (and by a
//! reference length for torques), so they carry units of area.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{add, cross, dot, fmt_f64, norm, scale, sub, SurfaceMesh};

/// Freestream constants and the wind-aligned frame.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FlowConstants {
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Freestream speed, m/s.
    pub v_inf: f64,
    /// Reference length for torque coefficients, m.
    pub l_ref: f64,
    /// Moment origin, m.
    pub moment_origin: [f64; 3],
    pub wind_x: [f64; 3],
    pub wind_y: [f64; 3],
    pub wind_z: [f64; 3],
}

impl Default for FlowConstants {
    fn default() -> Self {
        Self {
            rho: 1.225,
            v_inf: 50.0,
            l_ref: 1.0,
            moment_origin: [0.0; 3],
            wind_x: [1.0, 0.0, 0.0],
            wind_y: [0.0, 1.0, 0.0],
            wind_z: [0.0, 0.0, 1.0],
        }
    }
}

impl FlowConstants {
    /// Body axes rotated about z by the yaw angle.
    pub fn with_yaw(yaw_deg: f64) -> Self {
        let a = yaw_deg.to_radians();
        Self {
            wind_x: [a.cos(), a.sin(), 0.0],
            wind_y: [-a.sin(), a.cos(), 0.0],
            wind_z: [0.0, 0.0, 1.0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.v_inf > 0.0 && self.l_ref > 0.0) {
            return Err(Error::InvalidParameter(
                "rho, v_inf and l_ref must be positive".into(),
            ));
        }
        let basis = [self.wind_x, self.wind_y, self.wind_z];
        for (i, e) in basis.iter().enumerate() {
            if (norm(*e) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "wind basis vector {i} is not unit length"
                )));
            }
            for f in basis.iter().skip(i + 1) {
                if dot(*e, *f).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("wind basis is not orthogonal".into()));
                }
            }
        }
        Ok(())
    }

    /// Dynamic pressure q = 0.5 rho V^2, Pa.
    pub fn dynamic_pressure(&self) -> f64 {
        0.5 * self.rho * self.v_inf * self.v_inf
    }
}

/// Per-face integrated load.
#[derive(Debug, Clone)]
pub struct ElementLoad {
    pub pressure: f64,
    pub shear: [f64; 3],
    pub normal: [f64; 3],
    pub area: f64,
    pub centroid: [f64; 3],
    pub force: [f64; 3],
    pub moment: [f64; 3],
}

/// Integrates per-vertex fields (columns p, taux, tauy, tauz) into per-face
/// loads. Face values are the arithmetic mean of the three vertex values.
pub fn element_loads(
    mesh: &SurfaceMesh,
    fields: &DMatrix<f64>,
    constants: &FlowConstants,
) -> Result<Vec<ElementLoad>> {
    constants.validate()?;
    if fields.nrows() != mesh.vertex_count() || fields.ncols() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "fields are {}x{}, expected {}x4",
            fields.nrows(),
            fields.ncols(),
            mesh.vertex_count()
        )));
    }

    let mut out = Vec::with_capacity(mesh.face_count());
    for (k, f) in mesh.faces().iter().enumerate() {
        let area = mesh.face_area(k);
        if !(area > 0.0) {
            return Err(Error::DegenerateFace {
                face: k,
                msg: "zero area during integration".into(),
            });
        }
        let normal = mesh.face_unit_normal(k);
        let centroid = mesh.face_centroid(k);
        let pressure = (fields[(f[0], 0)] + fields[(f[1], 0)] + fields[(f[2], 0)]) / 3.0;
        let mut shear = [0.0f64; 3];
        for (c, s) in shear.iter_mut().enumerate() {
            *s = (fields[(f[0], c + 1)] + fields[(f[1], c + 1)] + fields[(f[2], c + 1)]) / 3.0;
        }
        let force = scale(add(scale(normal, pressure), shear), area);
        let moment = cross(sub(centroid, constants.moment_origin), force);
        out.push(ElementLoad {
            pressure,
            shear,
            normal,
            area,
            centroid,
            force,
            moment,
        });
    }
    Ok(out)
}

/// Six aerodynamic coefficients (CxS, CyS, CzS, CmxS, CmyS, CmzS) with a
/// per-PID breakdown. All values carry units of m^2.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AeroCoefficients {
    pub total: [f64; 6],
    pub per_pid: BTreeMap<String, [f64; 6]>,
}

impl AeroCoefficients {
    pub fn cxs(&self) -> f64 {
        self.total[0]
    }

    pub fn czs(&self) -> f64 {
        self.total[2]
    }

    pub fn pid_names(&self) -> Vec<String> {
        self.per_pid.keys().cloned().collect()
    }
}

/// Sums element loads into wind-frame coefficients, per PID and total.
/// The total is accumulated independently over all faces in face order.
pub fn integrate_coefficients(
    loads: &[ElementLoad],
    face_pids: &[String],
    constants: &FlowConstants,
) -> Result<AeroCoefficients> {
    constants.validate()?;
    if loads.len() != face_pids.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} loads but {} pid labels",
            loads.len(),
            face_pids.len()
        )));
    }
    let q = constants.dynamic_pressure();
    let ql = q * constants.l_ref;
    let basis = [constants.wind_x, constants.wind_y, constants.wind_z];

    let mut total = [0.0f64; 6];
    let mut per_pid: BTreeMap<String, [f64; 6]> = BTreeMap::new();
    for (load, pid) in loads.iter().zip(face_pids) {
        let entry = per_pid.entry(pid.clone()).or_insert([0.0; 6]);
        for (a, e) in basis.iter().enumerate() {
            let fc = dot(load.force, *e) / q;
            let mc = dot(load.moment, *e) / ql;
            entry[a] += fc;
            entry[a + 3] += mc;
            total[a] += fc;
            total[a + 3] += mc;
        }
    }
    Ok(AeroCoefficients { total, per_pid })
}

/// Convenience wrapper: fields -> element loads -> coefficients.
pub fn integrate_fields(
    mesh: &SurfaceMesh,
    fields: &DMatrix<f64>,
    constants: &FlowConstants,
) -> Result<AeroCoefficients> {
    let loads = element_loads(mesh, fields, constants)?;
    integrate_coefficients(&loads, mesh.face_pids(), constants)
}

// ---------------------------------------------------------------------------
// Field error metrics
// ---------------------------------------------------------------------------

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "metric over {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// R^2 = 1 - SS_res / SS_tot. Errors when the truth vector is constant.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "metric over {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::RSquaredUndefined);
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// (MSE, R^2) together; fails when R^2 is undefined (use [`mse`] alone then).
pub fn field_metrics(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    Ok((mse(pred, truth)?, r_squared(pred, truth)?))
}

// ---------------------------------------------------------------------------
// Per-PID threshold report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PidReportRow {
    pub pid: String,
    pub cxs_pred: f64,
    pub cxs_true: f64,
    pub abs_err: f64,
    pub usable: bool,
    pub replace: bool,
}

#[derive(Debug, Clone)]
pub struct PidReport {
    pub rows: Vec<PidReportRow>,
    pub usable_count: usize,
    pub replace_count: usize,
}

/// Compares per-PID drag coefficients against two absolute-error bars:
/// the looser usability threshold and the stricter CFD-replacement one.
pub fn pid_report(
    pred: &AeroCoefficients,
    truth: &AeroCoefficients,
    usability: f64,
    cfd_replacement: f64,
) -> Result<PidReport> {
    if !(cfd_replacement > 0.0 && cfd_replacement <= usability) {
        return Err(Error::InvalidParameter(format!(
            "thresholds must satisfy 0 < replacement ({cfd_replacement}) <= usability ({usability})"
        )));
    }
    let missing: Vec<String> = truth
        .per_pid
        .keys()
        .filter(|p| !pred.per_pid.contains_key(*p))
        .cloned()
        .collect();
    let unexpected: Vec<String> = pred
        .per_pid
        .keys()
        .filter(|p| !truth.per_pid.contains_key(*p))
        .cloned()
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() {
        return Err(Error::PidMismatch { missing, unexpected });
    }

    let mut rows = Vec::new();
    for (pid, t) in &truth.per_pid {
        let p = pred.per_pid[pid];
        let abs_err = (p[0] - t[0]).abs();
        rows.push(PidReportRow {
            pid: pid.clone(),
            cxs_pred: p[0],
            cxs_true: t[0],
            abs_err,
            usable: abs_err <= usability,
            replace: abs_err <= cfd_replacement,
        });
    }
    let usable_count = rows.iter().filter(|r| r.usable).count();
    let replace_count = rows.iter().filter(|r| r.replace).count();
    Ok(PidReport {
        rows,
        usable_count,
        replace_count,
    })
}

pub fn write_pid_report_csv(report: &PidReport) -> String {
    let mut out = String::from("pid,cxs_pred,cxs_true,abs_err,usable,replace\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.pid,
            fmt_f64(r.cxs_pred),
            fmt_f64(r.cxs_true),
            fmt_f64(r.abs_err),
            r.usable,
            r.replace
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Field file format
// ---------------------------------------------------------------------------

/// Writes per-vertex fields as CSV `vertex_id,p,taux,tauy,tauz`.
pub fn write_fields_csv(fields: &DMatrix<f64>) -> String {
    let mut out = String::from("vertex_id,p,taux,tauy,tauz\n");
    for i in 0..fields.nrows() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i,
            fmt_f64(fields[(i, 0)]),
            fmt_f64(fields[(i, 1)]),
            fmt_f64(fields[(i, 2)]),
            fmt_f64(fields[(i, 3)])
        );
    }
    out
}

pub fn read_fields_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "vertex_id,p,taux,tauy,tauz" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header `vertex_id,p,taux,tauy,tauz`".into(),
            })
        }
    }
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected 5 columns, found {}", parts.len()),
            });
        }
        let id: usize = parts[0].trim().parse().map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("bad vertex id {:?}: {e}", parts[0]),
        })?;
        if id != rows.len() {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("vertex ids must be consecutive from 0, found {id}"),
            });
        }
        let mut row = [0.0f64; 4];
        for (c, s) in parts[1..].iter().enumerate() {
            row[c] = s.trim().parse().map_err(|e| Error::Parse {
                line: idx + 1,
                msg: format!("bad value {s:?}: {e}"),
            })?;
        }
        rows.push(row);
    }
    let mut m = DMatrix::<f64>::zeros(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        for c in 0..4 {
            m[(i, c)] = row[c];
        }
    }
    Ok(m)
}

pub fn read_fields_csv_file(path: &Path) -> Result<DMatrix<f64>> {
    read_fields_csv(&std::fs::read_to_string(path)?)
}

pub fn write_fields_csv_file(fields: &DMatrix<f64>, path: &Path) -> Result<()> {
    std::fs::write(path, write_fields_csv(fields))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Quadrature oracle
// ---------------------------------------------------------------------------

/// Independent integration route for analytic fields: per-face three-point
/// (edge midpoint) quadrature, exact for quadratic integrands. The caller
/// passes a refined mesh; the field is sampled as a function of (pid,
/// position, face normal) rather than interpolated from vertices.
pub fn integrate_quadrature(
    mesh: &SurfaceMesh,
    field_at: &dyn Fn(&str, [f64; 3], [f64; 3]) -> (f64, [f64; 3]),
    constants: &FlowConstants,
) -> Result<AeroCoefficients> {
    constants.validate()?;
    let mut loads = Vec::with_capacity(mesh.face_count());
    for (k, f) in mesh.faces().iter().enumerate() {
        let area = mesh.face_area(k);
        let normal = mesh.face_unit_normal(k);
        let pid = mesh.face_pids()[k].as_str();
        let (a, b, c) = (
            mesh.vertices()[f[0]],
            mesh.vertices()[f[1]],
            mesh.vertices()[f[2]],
        );
        let points = [
            scale(add(a, b), 0.5),
            scale(add(b, c), 0.5),
            scale(add(c, a), 0.5),
        ];
        let mut force = [0.0f64; 3];
        let mut moment = [0.0f64; 3];
        for pt in points {
            let (p, tau) = field_at(pid, pt, normal);
            let df = scale(add(scale(normal, p), tau), area / 3.0);
            force = add(force, df);
            moment = add(moment, cross(sub(pt, constants.moment_origin), df));
        }
        loads.push(ElementLoad {
            pressure: 0.0,
            shear: [0.0; 3],
            normal,
            area,
            centroid: mesh.face_centroid(k),
            force,
            moment,
        });
    }
    integrate_coefficients(&loads, mesh.face_pids(), constants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_unit_cube, load_mesh};
    use proptest::prelude::*;

    fn constant_fields(n: usize, p: f64, tau: [f64; 3]) -> DMatrix<f64> {
        DMatrix::from_fn(n, 4, |_, c| match c {
            0 => p,
            _ => tau[c - 1],
        })
    }

    #[test]
    fn dynamic_pressure_default_constants() {
        let fc = FlowConstants::default();
        assert!((fc.dynamic_pressure() - 1531.25).abs() <= 1e-9);
    }

    #[test]
    fn unit_right_triangle_load() {
        let mesh = load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let fields = constant_fields(3, 10.0, [1.0, 0.0, 0.0]);
        let loads = element_loads(&mesh, &fields, &FlowConstants::default()).unwrap();
        assert_eq!(loads.len(), 1);
        let l = &loads[0];
        assert!((l.area - 0.5).abs() <= 1e-15);
        assert!((l.force[0] - 0.5).abs() <= 1e-15);
        assert!(l.force[1].abs() <= 1e-15);
        assert!((l.force[2] - 5.0).abs() <= 1e-15);
    }

    #[test]
    fn square_panel_total_force() {
        // two triangles covering [0,sqrt2]x[0,sqrt2] => area 2
        let s = 2.0f64.sqrt();
        let text = format!("v 0 0 0\nv {s} 0 0\nv {s} {s} 0\nv 0 {s} 0\nf 1 2 3\nf 1 3 4\n");
        let mesh = load_mesh(&text).unwrap();
        let fields = constant_fields(4, 10.0, [1.0, 0.0, 0.0]);
        let loads = element_loads(&mesh, &fields, &FlowConstants::default()).unwrap();
        let total: [f64; 3] = loads.iter().fold([0.0; 3], |acc, l| add(acc, l.force));
        assert!((total[0] - 2.0).abs() <= 1e-12);
        assert!(total[1].abs() <= 1e-12);
        assert!((total[2] - 20.0).abs() <= 1e-12);
    }

    #[test]
    fn moment_of_offset_panel() {
        // force (0,0,20) applied at centroid offset (1,0,0) => M = (0,-20,0)
        let m = cross([1.0, 0.0, 0.0], [0.0, 0.0, 20.0]);
        assert_eq!(m, [0.0, -20.0, 0.0]);
    }

    #[test]
    fn closed_cube_constant_pressure_zero_force() {
        let mesh = gen_unit_cube();
        let p = 300.0;
        let fields = constant_fields(mesh.vertex_count(), p, [0.0; 3]);
        let fc = FlowConstants::default();
        let loads = element_loads(&mesh, &fields, &fc).unwrap();
        let force: [f64; 3] = loads.iter().fold([0.0; 3], |acc, l| add(acc, l.force));
        let moment: [f64; 3] = loads.iter().fold([0.0; 3], |acc, l| add(acc, l.moment));
        let bound = 1e-9 * p * 6.0;
        assert!(norm(force) <= bound, "net force {force:?}");
        assert!(norm(moment) <= bound, "net moment {moment:?}");
        let coeffs = integrate_coefficients(&loads, mesh.face_pids(), &fc).unwrap();
        for c in coeffs.total {
            assert!(c.abs() <= 1e-9);
        }
    }

    #[test]
    fn czs_of_known_force() {
        // total vertical force 3062.5 N over q = 1531.25 Pa => CzS = 2
        let s = 2.0f64.sqrt();
        let text = format!("v 0 0 0\nv {s} 0 0\nv {s} {s} 0\nv 0 {s} 0\nf 1 2 3\nf 1 3 4\n");
        let mesh = load_mesh(&text).unwrap();
        let fields = constant_fields(4, 3062.5 / 2.0, [0.0; 3]);
        let fc = FlowConstants::default();
        let coeffs = integrate_fields(&mesh, &fields, &fc).unwrap();
        assert!((coeffs.czs() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn doubling_speed_quarters_coefficients() {
        let mesh = gen_unit_cube();
        let mut fields = constant_fields(mesh.vertex_count(), 0.0, [3.0, 0.0, 0.0]);
        for i in 0..mesh.vertex_count() {
            fields[(i, 0)] = mesh.vertices()[i][2] * 40.0;
        }
        let base = FlowConstants::default();
        let fast = FlowConstants {
            v_inf: 100.0,
            ..FlowConstants::default()
        };
        let a = integrate_fields(&mesh, &fields, &base).unwrap();
        let b = integrate_fields(&mesh, &fields, &fast).unwrap();
        for i in 0..6 {
            assert!((a.total[i] - 4.0 * b.total[i]).abs() <= 1e-12 * a.total[i].abs().max(1.0));
        }
    }

    #[test]
    fn wind_frame_rotation_invariance() {
        // rotating geometry, fields and basis together leaves coefficients
        // unchanged
        let mesh = crate::mesh::gen_wing_flap(2.0, 6).unwrap();
        let n = mesh.vertex_count();
        let mut fields = DMatrix::<f64>::zeros(n, 4);
        for i in 0..n {
            let v = mesh.vertices()[i];
            fields[(i, 0)] = 100.0 * (v[0] + 0.3 * v[1]);
            fields[(i, 1)] = 2.0 + v[2];
            fields[(i, 2)] = 0.5 * v[0];
            fields[(i, 3)] = 0.1;
        }
        let fc = FlowConstants::default();
        let base = integrate_fields(&mesh, &fields, &fc).unwrap();

        let ang = 0.7f64;
        let rot = |v: [f64; 3]| -> [f64; 3] {
            [
                ang.cos() * v[0] - ang.sin() * v[1],
                ang.sin() * v[0] + ang.cos() * v[1],
                v[2],
            ]
        };
        let verts: Vec<[f64; 3]> = mesh.vertices().iter().map(|v| rot(*v)).collect();
        let rmesh = SurfaceMesh::new(verts, mesh.faces().to_vec(), mesh.face_pids().to_vec()).unwrap();
        let mut rfields = fields.clone();
        for i in 0..n {
            let tau = rot([fields[(i, 1)], fields[(i, 2)], fields[(i, 3)]]);
            for c in 0..3 {
                rfields[(i, c + 1)] = tau[c];
            }
        }
        let rfc = FlowConstants {
            wind_x: rot(fc.wind_x),
            wind_y: rot(fc.wind_y),
            wind_z: rot(fc.wind_z),
            moment_origin: rot(fc.moment_origin),
            ..fc
        };
        let rotated = integrate_fields(&rmesh, &rfields, &rfc).unwrap();
        for i in 0..6 {
            assert!(
                (base.total[i] - rotated.total[i]).abs() <= 1e-9,
                "component {i}: {} vs {}",
                base.total[i],
                rotated.total[i]
            );
        }
    }

    #[test]
    fn pid_totals_add_up() {
        let mesh = crate::mesh::gen_wing_flap(1.0, 6).unwrap();
        let fields = constant_fields(mesh.vertex_count(), 50.0, [1.0, 0.5, 0.0]);
        let coeffs = integrate_fields(&mesh, &fields, &FlowConstants::default()).unwrap();
        for i in 0..6 {
            let sum: f64 = coeffs.per_pid.values().map(|v| v[i]).sum();
            let denom = coeffs.total[i].abs().max(1e-30);
            assert!(((coeffs.total[i] - sum) / denom).abs() <= 1e-9);
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(field_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), (0.0, 1.0));
        let (m, r2) = field_metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m - 2.0 / 3.0).abs() <= 1e-15);
        assert!(r2.abs() <= 1e-15);
        let (m, r2) = field_metrics(&[0.0, 1.0, 3.0], &[0.0, 0.0, 4.0]).unwrap();
        assert!((m - 2.0 / 3.0).abs() <= 1e-15);
        assert!((r2 - 0.8125).abs() <= 1e-15);
    }

    #[test]
    fn constant_truth_r2_is_error_but_mse_works() {
        let pred = [1.0, 2.0];
        let truth = [3.0, 3.0];
        assert!(matches!(r_squared(&pred, &truth), Err(Error::RSquaredUndefined)));
        assert!((mse(&pred, &truth).unwrap() - 2.5).abs() <= 1e-15);
    }

    fn coeffs_for(pids: &[(&str, f64)]) -> AeroCoefficients {
        let mut per_pid = BTreeMap::new();
        let mut total = [0.0; 6];
        for (pid, cxs) in pids {
            per_pid.insert(pid.to_string(), [*cxs, 0.0, 0.0, 0.0, 0.0, 0.0]);
            total[0] += cxs;
        }
        AeroCoefficients { total, per_pid }
    }

    #[test]
    fn pid_report_pass_fail() {
        let truth = coeffs_for(&[("wing", 1.0)]);
        let pred = coeffs_for(&[("wing", 1.5)]);
        let rep = pid_report(&pred, &truth, 1.0, 0.3).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(rep.rows[0].usable);
        assert!(!rep.rows[0].replace);
        assert_eq!(rep.usable_count, 1);
        assert_eq!(rep.replace_count, 0);
    }

    #[test]
    fn pid_report_identical_passes_everything() {
        let truth = coeffs_for(&[("a", 1.0), ("b", -0.5)]);
        let rep = pid_report(&truth, &truth, 0.5, 0.1).unwrap();
        assert_eq!(rep.usable_count, 2);
        assert_eq!(rep.replace_count, 2);
        assert!(rep.rows.iter().all(|r| r.abs_err == 0.0));
    }

    #[test]
    fn pid_report_set_mismatch() {
        let truth = coeffs_for(&[("a", 1.0), ("b", 2.0)]);
        let pred = coeffs_for(&[("a", 1.0), ("c", 2.0)]);
        match pid_report(&pred, &truth, 1.0, 0.5) {
            Err(Error::PidMismatch { missing, unexpected }) => {
                assert_eq!(missing, vec!["b".to_string()]);
                assert_eq!(unexpected, vec!["c".to_string()]);
            }
            other => panic!("expected pid mismatch, got {other:?}"),
        }
    }

    #[test]
    fn pid_report_rejects_bad_thresholds() {
        let t = coeffs_for(&[("a", 1.0)]);
        assert!(pid_report(&t, &t, 0.3, 1.0).is_err());
        assert!(pid_report(&t, &t, 1.0, 0.0).is_err());
    }

    #[test]
    fn fields_csv_round_trip() {
        let fields = DMatrix::from_row_slice(2, 4, &[1.5, 0.25, -3.0, 0.0, 2.0, 1.0, 0.5, -0.125]);
        let text = write_fields_csv(&fields);
        let back = read_fields_csv(&text).unwrap();
        assert_eq!(back.as_slice(), fields.as_slice());
    }

    #[test]
    fn fields_csv_rejects_bad_header() {
        assert!(read_fields_csv("id,p\n0,1\n").is_err());
    }

    proptest! {
        #[test]
        fn report_counts_match_row_flags(errors in proptest::collection::vec(0.0f64..2.0, 1..10)) {
            let truth = coeffs_for(&errors.iter().enumerate()
                .map(|(i, _)| (Box::leak(format!("pid{i}").into_boxed_str()) as &str, 0.0))
                .collect::<Vec<_>>());
            let mut pred = truth.clone();
            for (i, e) in errors.iter().enumerate() {
                pred.per_pid.get_mut(&format!("pid{i}")).unwrap()[0] = *e;
            }
            let rep = pid_report(&pred, &truth, 1.0, 0.5).unwrap();
            prop_assert_eq!(rep.usable_count, rep.rows.iter().filter(|r| r.usable).count());
            prop_assert_eq!(rep.replace_count, rep.rows.iter().filter(|r| r.replace).count());
            prop_assert_eq!(rep.usable_count, errors.iter().filter(|e| **e <= 1.0).count());
            prop_assert_eq!(rep.replace_count, errors.iter().filter(|e| **e <= 0.5).count());
        }

        #[test]
        fn pid_sums_invariant_under_reordering(seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mesh = crate::mesh::gen_wing_flap(1.5, 5).unwrap();
            let n = mesh.vertex_count();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fields = DMatrix::<f64>::from_fn(n, 4, |i, c| ((i * 7 + c * 13) % 17) as f64 - 8.0);
            let fc = FlowConstants::default();
            let loads = element_loads(&mesh, &fields, &fc).unwrap();
            let base = integrate_coefficients(&loads, mesh.face_pids(), &fc).unwrap();

            let mut order: Vec<usize> = (0..loads.len()).collect();
            order.shuffle(&mut rng);
            let shuffled_loads: Vec<ElementLoad> = order.iter().map(|&k| loads[k].clone()).collect();
            let shuffled_pids: Vec<String> = order.iter().map(|&k| mesh.face_pids()[k].clone()).collect();
            let shuffled = integrate_coefficients(&shuffled_loads, &shuffled_pids, &fc).unwrap();
            for i in 0..6 {
                let denom = base.total[i].abs().max(1.0);
                prop_assert!(((base.total[i] - shuffled.total[i]) / denom).abs() <= 1e-12);
            }
        }
    }
}
