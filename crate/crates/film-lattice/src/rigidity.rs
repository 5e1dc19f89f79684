//! Rotation distance, the three-edge comparison potential, rigid-motion
//! fitting, and the empirical rigidity probe.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::energy::{triangle_gradient, Deformation, Displacement};
use crate::error::{Error, Result};
use crate::lattice::OccupiedRegion;

/// A proper rigid motion `x -> R(theta) x + b`, exact in `SO(2)` by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub theta: f64,
    pub translation: Vector2<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            translation: Vector2::zeros(),
        }
    }

    pub fn new(theta: f64, translation: Vector2<f64>) -> Self {
        Self { theta, translation }
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn apply(&self, x: Vector2<f64>) -> Vector2<f64> {
        self.rotation() * x + self.translation
    }
}

/// Frobenius distance from `f` to `SO(2)` and, for `det f > 0`, the unique
/// nearest rotation. Closed form via the 2x2 polar decomposition:
/// `max_{R in SO(2)} tr(R^T F) = sqrt((a+d)^2 + (c-b)^2)`.
pub fn rotation_distance(f: &Matrix2<f64>) -> (f64, Option<Matrix2<f64>>) {
    let (a, b, c, d) = (f[(0, 0)], f[(0, 1)], f[(1, 0)], f[(1, 1)]);
    if f.determinant() > 0.0 {
        let s2 = (a + d).powi(2) + (c - b).powi(2);
        if s2 > 0.0 {
            let theta = (c - b).atan2(a + d);
            let (sn, cs) = theta.sin_cos();
            let r = Matrix2::new(cs, -sn, sn, cs);
            return ((f - r).norm(), Some(r));
        }
    }
    let s = ((a + d).powi(2) + (c - b).powi(2)).sqrt();
    let dist2 = (f.norm_squared() + 2.0 - 2.0 * s).max(0.0);
    (dist2.sqrt(), None)
}

/// Squared Frobenius distance from `f` to the scaled rotations `lambda SO(2)`.
pub fn dist2_scaled_so2(f: &Matrix2<f64>, lambda: f64) -> f64 {
    let (a, b, c, d) = (f[(0, 0)], f[(0, 1)], f[(1, 0)], f[(1, 1)]);
    let s = ((a + d).powi(2) + (c - b).powi(2)).sqrt();
    (f.norm_squared() + 2.0 * lambda * lambda - 2.0 * lambda * s).max(0.0)
}

/// Unit edge directions of the reference triangle: `e`, `v`, `v - e`.
pub const TRIANGLE_EDGES: [Vector2<f64>; 3] = [
    Vector2::new(1.0, 0.0),
    Vector2::new(0.5, crate::lattice::SQRT3 * 0.5),
    Vector2::new(-0.5, crate::lattice::SQRT3 * 0.5),
];

/// Comparison potential of the rigidity estimate: the summed squared
/// deviations of the three unit-edge images from length `lambda`, infinite on
/// orientation-reversing matrices.
pub fn edge_misfit_energy(f: &Matrix2<f64>, lambda: f64) -> f64 {
    if f.determinant() < 0.0 {
        return f64::INFINITY;
    }
    TRIANGLE_EDGES
        .iter()
        .map(|xi| ((f * xi).norm() - lambda).powi(2))
        .sum()
}

/// Least-squares proper rigid motion (Procrustes restricted to `det = +1`)
/// minimizing `sum |values_i - (R sites_i + b)|^2`. Returns the fit and the
/// residual sum of squares.
pub fn fit_rigid_motion(
    sites: &[Vector2<f64>],
    values: &[Vector2<f64>],
) -> Result<(RigidMotion, f64)> {
    if sites.len() != values.len() || sites.len() < 2 {
        return Err(Error::UnderdeterminedFit);
    }
    let n = sites.len() as f64;
    let mean_x: Vector2<f64> = sites.iter().sum::<Vector2<f64>>() / n;
    let mean_y: Vector2<f64> = values.iter().sum::<Vector2<f64>>() / n;
    let mut m = Matrix2::zeros();
    let mut spread = 0.0;
    for (x, y) in sites.iter().zip(values) {
        let xc = x - mean_x;
        let yc = y - mean_y;
        m += yc * xc.transpose();
        spread += xc.norm_squared();
    }
    if spread == 0.0 {
        return Err(Error::UnderdeterminedFit);
    }
    let theta = (m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]);
    let motion = RigidMotion::new(theta, mean_y - RigidMotion::new(theta, Vector2::zeros()).rotation() * mean_x);
    let residual = sites
        .iter()
        .zip(values)
        .map(|(x, y)| (y - motion.apply(*x)).norm_squared())
        .sum();
    Ok((motion, residual))
}

/// Rescaled displacement `u(i) = (y(i) - (R i + b)) / sqrt(eps)`.
pub fn extract_displacement(
    region: &OccupiedRegion,
    y: &Deformation,
    frame: RigidMotion,
) -> Result<Displacement> {
    y.check(region)?;
    let scale = region.spec().epsilon.sqrt();
    let values = region
        .sites()
        .iter()
        .enumerate()
        .map(|(i, site)| (y.values[i] - frame.apply(site.position(region.spec()))) / scale)
        .collect();
    Ok(Displacement {
        values,
        frame,
        epsilon: region.spec().epsilon,
    })
}

/// Exact inverse of [`extract_displacement`].
pub fn reconstruct_deformation(region: &OccupiedRegion, u: &Displacement) -> Deformation {
    let scale = u.epsilon.sqrt();
    let values = region
        .sites()
        .iter()
        .enumerate()
        .map(|(i, site)| u.frame.apply(site.position(region.spec())) + scale * u.values[i])
        .collect();
    Deformation { values }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `int |grad y - R|^2 / int dist^2(grad y, SO(2))` over the subregion,
    /// with the best single rotation `R`; 1 by convention when both vanish.
    pub fitted_constant: f64,
    /// Largest per-triangle ratio of the two integrands.
    pub sup_ratio: f64,
    pub triangle_count: u64,
    pub dist2_integral: f64,
    pub deviation_integral: f64,
}

/// Axis-aligned probe window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Numerical companion to the rigidity estimate: integrates
/// `dist^2(grad y, SO(2))` triangle-wise, fits the best single rotation, and
/// reports `int |grad y - R|^2` against it. Wrap triangles are skipped (their
/// gradient has no frame-free unwrapping), so the probe window is the open
/// strip.
pub fn rigidity_probe(
    region: &OccupiedRegion,
    y: &Deformation,
    subregion: Option<Rect>,
) -> Result<ProbeReport> {
    y.check(region)?;
    let area = crate::lattice::SQRT3 / 4.0 * region.spec().epsilon * region.spec().epsilon;
    let mut grads = Vec::new();
    for tri in region.triangles() {
        if tri.shift != [0, 0, 0] {
            continue;
        }
        let centroid = region.triangle_centroid(tri);
        if let Some(r) = &subregion {
            if !r.contains(centroid) {
                continue;
            }
        }
        grads.push(triangle_gradient(region, y, tri));
    }
    if grads.is_empty() {
        return Err(Error::EmptySubregion);
    }
    let mut mean = Matrix2::zeros();
    for g in &grads {
        mean += g;
    }
    let theta = (mean[(1, 0)] - mean[(0, 1)]).atan2(mean[(0, 0)] + mean[(1, 1)]);
    let (sn, cs) = theta.sin_cos();
    let r = Matrix2::new(cs, -sn, sn, cs);

    let mut dist2_integral = 0.0;
    let mut deviation_integral = 0.0;
    let mut sup_ratio: f64 = 1.0;
    for g in &grads {
        let (d, _) = rotation_distance(g);
        let d2 = d * d;
        let dev = (g - r).norm_squared();
        dist2_integral += area * d2;
        deviation_integral += area * dev;
        if d2 > 1e-30 {
            sup_ratio = sup_ratio.max(dev / d2);
        }
    }
    let floor = 1e-20 * area * grads.len() as f64;
    let fitted_constant = if dist2_integral <= floor && deviation_integral <= floor {
        1.0
    } else if dist2_integral <= floor {
        f64::INFINITY
    } else {
        deviation_integral / dist2_integral
    };
    Ok(ProbeReport {
        fitted_constant,
        sup_ratio,
        triangle_count: grads.len() as u64,
        dist2_integral,
        deviation_integral,
    })
}
