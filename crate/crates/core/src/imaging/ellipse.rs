//! Direct least-squares ellipse fitting (ellipse-specific constraint
//! `4AC - B^2 = 1`, numerically stable block formulation).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub center_x: f64,
    pub center_y: f64,
    /// Full axis lengths in pixels, `major_axis >= minor_axis`.
    pub major_axis: f64,
    pub minor_axis: f64,
    /// Direction of the major axis from +x, radians in `[0, pi)`.
    pub orientation: f64,
}

pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<EllipseFit> {
    if points.len() < 5 {
        return Err(Error::FitFailed(format!("need at least 5 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::FitFailed("non-finite contour point".into()));
    }

    // Centre and scale the data for conditioning.
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (mx / n, my / n);
    let rms = (points.iter().map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2)).sum::<f64>() / n).sqrt();
    if !(rms > 0.0) {
        return Err(Error::FitFailed("all points coincide".into()));
    }
    let scale = rms / std::f64::consts::SQRT_2;

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let (x, y) = ((p.0 - mx) / scale, (p.1 - my) / scale);
        let quad = Vector3::new(x * x, x * y, y * y);
        let lin = Vector3::new(x, y, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    let s3_inv = s3.try_inverse().ok_or_else(|| Error::FitFailed("points are collinear".into()))?;
    let t = -(s3_inv * s2.transpose());
    let reduced = s1 + s2 * t;
    // Premultiply by the inverse of the 3x3 constraint block.
    let m = Matrix3::from_rows(&[reduced.row(2) / 2.0, -reduced.row(1), reduced.row(0) / 2.0]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in m.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(m - Matrix3::identity() * lambda.re)) else { continue };
        if 4.0 * v[0] * v[2] - v[1] * v[1] <= 0.0 {
            continue;
        }
        if best.is_none_or(|(l, _)| lambda.re.abs() < l) {
            best = Some((lambda.re.abs(), v));
        }
    }
    let (_, quad) = best.ok_or_else(|| Error::FitFailed("no elliptical solution".into()))?;
    let lin = t * quad;
    let conic = [quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]];

    let e = conic_to_ellipse(conic)?;
    Ok(EllipseFit {
        center_x: mx + e.center_x * scale,
        center_y: my + e.center_y * scale,
        major_axis: e.major_axis * scale,
        minor_axis: e.minor_axis * scale,
        orientation: e.orientation,
    })
}

/// Kernel direction of a rank-2 3x3 matrix from the best-conditioned cross
/// product of its rows.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    let candidates = [rows[0].cross(&rows[1]), rows[0].cross(&rows[2]), rows[1].cross(&rows[2])];
    let v = candidates.into_iter().max_by(|p, q| p.norm_squared().total_cmp(&q.norm_squared()))?;
    let norm = v.norm();
    (norm > 0.0 && norm.is_finite()).then(|| v / norm)
}

/// Geometric parameters of `A x^2 + B xy + C y^2 + D x + E y + F = 0`.
fn conic_to_ellipse(c: [f64; 6]) -> Result<EllipseFit> {
    let [mut a, mut b, mut cc, mut d, mut e, mut f] = c;
    if a + cc < 0.0 {
        for v in [&mut a, &mut b, &mut cc, &mut d, &mut e, &mut f] {
            *v = -*v;
        }
    }
    let det = 4.0 * a * cc - b * b;
    if !(det > 0.0) {
        return Err(Error::FitFailed("conic is not an ellipse".into()));
    }
    let cx = (b * e - 2.0 * cc * d) / det;
    let cy = (b * d - 2.0 * a * e) / det;
    let f0 = f + (d * cx + e * cy) / 2.0;

    let mean = (a + cc) / 2.0;
    let radius = ((a - cc) / 2.0).hypot(b / 2.0);
    let (l_small, l_large) = (mean - radius, mean + radius);
    if !(l_small > 0.0 && f0 < 0.0) {
        return Err(Error::FitFailed("degenerate conic".into()));
    }
    let major = 2.0 * (-f0 / l_small).sqrt();
    let minor = 2.0 * (-f0 / l_large).sqrt();

    // 0.5 * atan2(B, A - C) points along the larger-eigenvalue (minor) axis.
    let orientation = (0.5 * b.atan2(a - cc) + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
    Ok(EllipseFit { center_x: cx, center_y: cy, major_axis: major, minor_axis: minor, orientation })
}
