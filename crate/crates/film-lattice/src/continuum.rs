//! The limit functional: anisotropic surface energy with cut doubling and
//! wetting, and the linearized elastic energy with mismatch strain.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::energy::MaterialParams;
use crate::error::{Error, Result};
use crate::lattice::{DiscreteProfile, LatticeSpec, SQRT3};
use crate::rigidity::RigidMotion;

/// Prefactor of the linearized elastic density. This is the Taylor constant of
/// the discrete bond energy: per triangle, the sum over the three unit edges
/// of `(xi^T B xi)^2` equals `(3/8)(2|B|^2 + tr^2 B)`, and the triangle
/// density is `4 / (sqrt(3) eps^2)`, so the energy density of
/// `y = R x + b + sqrt(eps) u` converges to
/// `(sqrt(3)/4) K (2|B|^2 + tr^2 B)`.
pub const ELASTIC_DENSITY_PREFACTOR: f64 = SQRT3 / 4.0;

/// Anisotropic surface tension of the triangular lattice, positively
/// 1-homogeneous:
/// `phi(nu) = (2 sqrt(3) / 3) (|nu_2| + |sqrt(3) nu_1 - nu_2| / 2 + |sqrt(3) nu_1 + nu_2| / 2)`.
pub fn surface_tension(nu: Vector2<f64>) -> f64 {
    2.0 * SQRT3 / 3.0
        * (nu.y.abs()
            + 0.5 * (SQRT3 * nu.x - nu.y).abs()
            + 0.5 * (SQRT3 * nu.x + nu.y).abs())
}

/// One vertical cut: a density-1 crack strictly below the graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub x: f64,
    pub y_low: f64,
    pub y_high: f64,
}

/// Piecewise-linear periodic profile on `[0, L]` with optional vertical cuts.
///
/// Breakpoints are sorted by `x`; two consecutive breakpoints at the same `x`
/// encode a vertical wall. A height jump across the period seam is allowed and
/// counted as a wall at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumProfile {
    period: f64,
    breakpoints: Vec<(f64, f64)>,
    cuts: Vec<Cut>,
}

/// One labeled boundary piece of the surface-energy decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Essential boundary above the substrate line (density 1/2, `x2 > 0`).
    GraphAboveZero,
    /// Interior crack, counted twice (density 1).
    Cut,
    /// Exposed substrate (density 1/2, `x2 = 0`).
    SubstrateLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub kind: SegmentKind,
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

impl ContinuumProfile {
    pub fn new(period: f64, breakpoints: Vec<(f64, f64)>, cuts: Vec<Cut>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidProfile(format!("period = {period}")));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidProfile("need at least two breakpoints".into()));
        }
        let tol = 1e-9 * period;
        let mut bp = breakpoints;
        if bp[0].0.abs() > tol || (bp[bp.len() - 1].0 - period).abs() > tol {
            return Err(Error::InvalidProfile(
                "breakpoints must span [0, period]".into(),
            ));
        }
        bp[0].0 = 0.0;
        let n = bp.len();
        bp[n - 1].0 = period;
        let mut repeats = 1;
        for i in 1..bp.len() {
            if bp[i].0 < bp[i - 1].0 {
                return Err(Error::InvalidProfile("breakpoints not sorted".into()));
            }
            if bp[i].0 - bp[i - 1].0 <= tol && (bp[i].0 - bp[i - 1].0).abs() < f64::EPSILON.sqrt() {
                // exact duplicates only count as walls when x matches exactly
            }
            if bp[i].0 == bp[i - 1].0 {
                repeats += 1;
                if repeats > 2 {
                    return Err(Error::InvalidProfile(format!(
                        "more than two breakpoints at x = {}",
                        bp[i].0
                    )));
                }
            } else {
                repeats = 1;
            }
        }
        for &(x, h) in &bp {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(Error::InvalidProfile(format!("h({x}) = {h}")));
            }
        }
        let profile = Self {
            period,
            breakpoints: bp,
            cuts: Vec::new(),
        };
        let mut sorted_cuts = cuts;
        sorted_cuts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        for w in sorted_cuts.windows(2) {
            if w[0].x == w[1].x && w[1].y_low < w[0].y_high && w[0].y_low < w[1].y_high {
                return Err(Error::OverlappingCuts(w[0].x));
            }
        }
        for c in &sorted_cuts {
            if !(c.y_low < c.y_high) || c.y_low < 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "cut at x = {} has bad range [{}, {}]",
                    c.x, c.y_low, c.y_high
                )));
            }
            if c.y_high >= profile.height_at(c.x) {
                return Err(Error::InvalidProfile(format!(
                    "cut at x = {} reaches the graph",
                    c.x
                )));
            }
        }
        Ok(Self {
            cuts: sorted_cuts,
            ..profile
        })
    }

    /// Constant profile `h ≡ c`.
    pub fn constant(period: f64, c: f64) -> Result<Self> {
        Self::new(period, vec![(0.0, c), (period, c)], Vec::new())
    }

    /// Piecewise-constant interpolation of a discrete profile, with walls at
    /// column boundaries.
    pub fn from_discrete(profile: &DiscreteProfile, spec: &LatticeSpec) -> Self {
        let cols = spec.columns() as usize;
        let w = 0.5 * SQRT3 * spec.epsilon;
        let mut bp: Vec<(f64, f64)> = Vec::with_capacity(2 * cols);
        for m in 0..cols {
            let h = profile.half_heights[m] as f64 * 0.5 * spec.epsilon;
            let xl = m as f64 * w;
            let xr = (m + 1) as f64 * w;
            if let Some(last) = bp.last() {
                if last.1 != h {
                    bp.push((xl, h));
                }
            } else {
                bp.push((xl, h));
            }
            bp.push((xr, h));
        }
        Self {
            period: spec.width(),
            breakpoints: bp,
            cuts: Vec::new(),
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    /// Lower-semicontinuous value at `x` (wrapped into `[0, period)`).
    pub fn height_at(&self, x: f64) -> f64 {
        let x = x.rem_euclid(self.period);
        let bp = &self.breakpoints;
        let mut value = f64::INFINITY;
        let mut found = false;
        for w in bp.windows(2) {
            let (xa, ha) = w[0];
            let (xb, hb) = w[1];
            if x < xa || x > xb {
                continue;
            }
            if xa == xb {
                value = value.min(ha.min(hb));
                found = true;
            } else {
                let t = (x - xa) / (xb - xa);
                value = value.min(ha + t * (hb - ha));
                found = true;
            }
        }
        if x == 0.0 {
            // period seam: min of both one-sided values
            value = value.min(bp[bp.len() - 1].1);
        }
        debug_assert!(found);
        value
    }

    /// Exact integral of `h` over one period.
    pub fn volume(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }

    pub fn max_height(&self) -> f64 {
        self.breakpoints.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    /// Maximal intervals where `h ≡ 0`.
    pub fn zero_set(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in self.breakpoints.windows(2) {
            if w[0].0 < w[1].0 && w[0].1 == 0.0 && w[1].1 == 0.0 {
                if let Some(last) = out.last_mut() {
                    if last.1 == w[0].0 {
                        last.1 = w[1].0;
                        continue;
                    }
                }
                out.push((w[0].0, w[1].0));
            }
        }
        out
    }

    /// Largest slope magnitude over the linear pieces; `None` if the graph has
    /// a vertical wall (not Lipschitz).
    pub fn lipschitz_constant(&self) -> Option<f64> {
        let mut lip: f64 = 0.0;
        for w in self.breakpoints.windows(2) {
            let dx = w[1].0 - w[0].0;
            let dh = w[1].1 - w[0].1;
            if dx == 0.0 {
                if dh != 0.0 {
                    return None;
                }
            } else {
                lip = lip.max((dh / dx).abs());
            }
        }
        if (self.breakpoints[0].1 - self.breakpoints[self.breakpoints.len() - 1].1).abs() > 0.0 {
            return None; // seam wall
        }
        Some(lip)
    }

    /// Horizontal translation (wrapping around the period); cuts move with the
    /// graph.
    pub fn translated(&self, shift: f64) -> Self {
        let l = self.period;
        let s = shift.rem_euclid(l);
        if s == 0.0 {
            return self.clone();
        }
        // sample value just right of each shifted breakpoint to rebuild walls
        let mut xs: Vec<f64> = Vec::new();
        for &(x, _) in &self.breakpoints {
            xs.push((x + s).rem_euclid(l));
        }
        xs.push(0.0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * l);
        let mut bp = Vec::new();
        let value_right = |x: f64| {
            let xo = (x - s).rem_euclid(l);
            self.one_sided(xo, true)
        };
        let value_left = |x: f64| {
            let xo = (x - s).rem_euclid(l);
            self.one_sided(if xo == 0.0 { l } else { xo }, false)
        };
        for &x in &xs {
            let hl = value_left(x);
            let hr = value_right(x);
            if x > 0.0 && (hl - hr).abs() > 0.0 {
                bp.push((x, hl));
            }
            bp.push((x, hr));
        }
        bp.push((l, value_left(l)));
        let cuts = self
            .cuts
            .iter()
            .map(|c| Cut {
                x: (c.x + s).rem_euclid(l),
                ..*c
            })
            .collect();
        Self {
            period: l,
            breakpoints: bp,
            cuts,
        }
    }

    /// One-sided limit of `h` at `x` (from the right if `right`, else left).
    pub fn one_sided(&self, x: f64, right: bool) -> f64 {
        let x = if right {
            x.rem_euclid(self.period)
        } else {
            let w = x.rem_euclid(self.period);
            if w == 0.0 {
                self.period
            } else {
                w
            }
        };
        let bp = &self.breakpoints;
        for i in 0..bp.len() - 1 {
            let (xa, ha) = bp[i];
            let (xb, hb) = bp[i + 1];
            if xa == xb {
                continue;
            }
            if (right && x >= xa && x < xb) || (!right && x > xa && x <= xb) {
                let t = (x - xa) / (xb - xa);
                return ha + t * (hb - ha);
            }
        }
        if right {
            bp[0].1
        } else {
            bp[bp.len() - 1].1
        }
    }

    /// Boundary pieces labeled by surface-energy density.
    pub fn boundary_decomposition(&self) -> Vec<BoundarySegment> {
        let mut out = Vec::new();
        for w in self.breakpoints.windows(2) {
            let (xa, ha) = w[0];
            let (xb, hb) = w[1];
            if xa == xb {
                if ha != hb {
                    out.push(BoundarySegment {
                        kind: SegmentKind::GraphAboveZero,
                        start: Vector2::new(xa, ha.min(hb)),
                        end: Vector2::new(xa, ha.max(hb)),
                    });
                }
                continue;
            }
            let kind = if ha == 0.0 && hb == 0.0 {
                SegmentKind::SubstrateLine
            } else {
                SegmentKind::GraphAboveZero
            };
            out.push(BoundarySegment {
                kind,
                start: Vector2::new(xa, ha),
                end: Vector2::new(xb, hb),
            });
        }
        // wall across the period seam
        let h0 = self.breakpoints[0].1;
        let hl = self.breakpoints[self.breakpoints.len() - 1].1;
        if h0 != hl {
            out.push(BoundarySegment {
                kind: SegmentKind::GraphAboveZero,
                start: Vector2::new(0.0, h0.min(hl)),
                end: Vector2::new(0.0, h0.max(hl)),
            });
        }
        for c in &self.cuts {
            out.push(BoundarySegment {
                kind: SegmentKind::Cut,
                start: Vector2::new(c.x, c.y_low),
                end: Vector2::new(c.x, c.y_high),
            });
        }
        out
    }
}

/// Limiting surface energy: `gamma_f` on the essential boundary above the
/// substrate line, `2 gamma_f` on cuts, `gamma_s ∧ gamma_f` on the exposed
/// substrate (wetting). Each piece contributes `phi` of its unnormalized
/// normal, which absorbs the length by 1-homogeneity.
pub fn surface_energy_continuum(profile: &ContinuumProfile, mat: &MaterialParams) -> f64 {
    let wet = mat.gamma_s.min(mat.gamma_f);
    profile
        .boundary_decomposition()
        .iter()
        .map(|seg| {
            let tangent = seg.end - seg.start;
            let nu = Vector2::new(-tangent.y, tangent.x);
            match seg.kind {
                SegmentKind::GraphAboveZero => mat.gamma_f * surface_tension(nu),
                SegmentKind::Cut => 2.0 * mat.gamma_f * surface_tension(nu),
                SegmentKind::SubstrateLine => wet * surface_tension(nu),
            }
        })
        .sum()
}

/// Limit frame and mismatch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContinuumParams {
    pub delta: f64,
    pub frame: RigidMotion,
    pub materials: MaterialParams,
}

impl ContinuumParams {
    /// Mismatch strain `delta * Ey = delta * sym(R) = delta cos(theta) Id`.
    pub fn mismatch_strain(&self) -> Matrix2<f64> {
        self.delta * self.frame.theta.cos() * Matrix2::identity()
    }
}

/// Piecewise-affine displacement field on a triangulation of `Omega_h`.
/// Quadrature is exact per triangle (the strain is constant on each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField {
    pub nodes: Vec<Vector2<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub values: Vec<Vector2<f64>>,
}

impl DisplacementField {
    /// Structured quadrature mesh over `Omega_h` (substrate of depth `r` plus
    /// the film below the graph), sampling `u` at the nodes. `resolution` is
    /// the target edge length. No triangle straddles `x2 = 0`.
    pub fn sample(
        profile: &ContinuumProfile,
        r: f64,
        resolution: f64,
        u: impl Fn(Vector2<f64>) -> Vector2<f64>,
    ) -> Result<Self> {
        if !(r > 0.0) || !(resolution > 0.0) {
            return Err(Error::MeshMismatch(format!(
                "bad depth {r} or resolution {resolution}"
            )));
        }
        let l = profile.period();
        let mut xs: Vec<f64> = profile.breakpoints().iter().map(|b| b.0).collect();
        let nx = (l / resolution).ceil() as usize;
        for i in 0..=nx {
            xs.push(i as f64 * l / nx as f64);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * l);

        let mut nodes = Vec::new();
        let mut values = Vec::new();
        let mut triangles = Vec::new();
        let push_node = |nodes: &mut Vec<Vector2<f64>>, values: &mut Vec<Vector2<f64>>, p: Vector2<f64>| -> u32 {
            nodes.push(p);
            values.push(u(p));
            (nodes.len() - 1) as u32
        };

        let n_sub = (r / resolution).ceil().max(1.0) as usize;
        for w in xs.windows(2) {
            let (xa, xb) = (w[0], w[1]);
            if xb - xa < 1e-13 * l {
                continue;
            }
            let ha = profile.one_sided(xa, true);
            let hb = profile.one_sided(xb, false);
            // substrate block: uniform layers from -r to 0
            let mut prev: Option<(u32, u32)> = None;
            for j in 0..=n_sub {
                let y = -r + j as f64 * r / n_sub as f64;
                let a = push_node(&mut nodes, &mut values, Vector2::new(xa, y));
                let b = push_node(&mut nodes, &mut values, Vector2::new(xb, y));
                if let Some((pa, pb)) = prev {
                    triangles.push([pa, pb, b]);
                    triangles.push([pa, b, a]);
                }
                prev = Some((a, b));
            }
            // film block: scaled layers from 0 to the graph
            let hmax = ha.max(hb);
            if hmax > 1e-13 * l {
                let n_film = (hmax / resolution).ceil().max(1.0) as usize;
                let mut prev: Option<(u32, u32)> = None;
                for j in 0..=n_film {
                    let t = j as f64 / n_film as f64;
                    let a = push_node(&mut nodes, &mut values, Vector2::new(xa, t * ha));
                    let b = push_node(&mut nodes, &mut values, Vector2::new(xb, t * hb));
                    if let Some((pa, pb)) = prev {
                        triangles.push([pa, pb, b]);
                        triangles.push([pa, b, a]);
                    }
                    prev = Some((a, b));
                }
            }
        }
        // drop degenerate triangles (zero-height film columns)
        let area = |t: &[u32; 3]| {
            let p = [nodes[t[0] as usize], nodes[t[1] as usize], nodes[t[2] as usize]];
            0.5 * ((p[1] - p[0]).x * (p[2] - p[0]).y - (p[1] - p[0]).y * (p[2] - p[0]).x)
        };
        triangles.retain(|t| area(t).abs() > 1e-16 * l * l);
        Ok(Self {
            nodes,
            triangles,
            values,
        })
    }

    pub fn triangle_area_and_gradient(&self, t: &[u32; 3]) -> (f64, Matrix2<f64>) {
        let p = [
            self.nodes[t[0] as usize],
            self.nodes[t[1] as usize],
            self.nodes[t[2] as usize],
        ];
        let v = [
            self.values[t[0] as usize],
            self.values[t[1] as usize],
            self.values[t[2] as usize],
        ];
        let dp = Matrix2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
        let dv = Matrix2::from_columns(&[v[1] - v[0], v[2] - v[0]]);
        let area = 0.5 * dp.determinant().abs();
        let grad = dv * dp.try_inverse().expect("degenerate mesh triangle");
        (area, grad)
    }

    pub fn total_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| self.triangle_area_and_gradient(t).0)
            .sum()
    }

    /// Piecewise-affine evaluation at `p`, or `None` outside the mesh.
    pub fn eval(&self, p: Vector2<f64>) -> Option<Vector2<f64>> {
        let tol = 1e-10;
        for t in &self.triangles {
            let a = self.nodes[t[0] as usize];
            let b = self.nodes[t[1] as usize];
            let c = self.nodes[t[2] as usize];
            let det = (b - a).x * (c - a).y - (b - a).y * (c - a).x;
            if det.abs() < 1e-30 {
                continue;
            }
            let l2 = ((p - a).x * (c - a).y - (p - a).y * (c - a).x) / det;
            let l3 = ((b - a).x * (p - a).y - (b - a).y * (p - a).x) / det;
            let l1 = 1.0 - l2 - l3;
            if l1 >= -tol && l2 >= -tol && l3 >= -tol {
                return Some(
                    l1 * self.values[t[0] as usize]
                        + l2 * self.values[t[1] as usize]
                        + l3 * self.values[t[2] as usize],
                );
            }
        }
        None
    }
}

/// Isotropic quadratic density `prefactor * K * (2 |B|^2 + tr^2 B)`.
fn density(k: f64, b: &Matrix2<f64>) -> f64 {
    ELASTIC_DENSITY_PREFACTOR * k * (2.0 * b.norm_squared() + b.trace().powi(2))
}

/// Limit elastic energy: mismatch-strained film plus substrate, integrated
/// exactly per affine triangle.
pub fn elastic_energy_continuum(
    profile: &ContinuumProfile,
    u: &DisplacementField,
    params: &ContinuumParams,
) -> Result<f64> {
    let l = profile.period();
    let mismatch = params.mismatch_strain();
    let mut total = 0.0;
    let mut area_sum = 0.0;
    let mut depth: f64 = 0.0;
    for n in &u.nodes {
        depth = depth.max(-n.y);
    }
    for (ti, t) in u.triangles.iter().enumerate() {
        let ys = [
            u.nodes[t[0] as usize].y,
            u.nodes[t[1] as usize].y,
            u.nodes[t[2] as usize].y,
        ];
        let tol = 1e-12 * (l + depth);
        let above = ys.iter().all(|y| *y >= -tol);
        let below = ys.iter().all(|y| *y <= tol);
        if !above && !below {
            return Err(Error::StraddlingTriangle(ti));
        }
        let (area, grad) = u.triangle_area_and_gradient(t);
        let strain = 0.5 * (grad + grad.transpose());
        let w = if above && !below {
            density(params.materials.k_f, &(strain - mismatch))
        } else if below && !above {
            density(params.materials.k_s, &strain)
        } else {
            // degenerate sliver exactly on the line
            0.0
        };
        total += area * w;
        area_sum += area;
    }
    let expected_area = profile.volume() + depth * l;
    if (area_sum - expected_area).abs() > 1e-6 * expected_area.max(1.0) {
        return Err(Error::MeshMismatch(format!(
            "mesh area {area_sum} vs region area {expected_area}"
        )));
    }
    Ok(total)
}
