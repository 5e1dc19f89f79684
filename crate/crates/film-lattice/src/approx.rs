//! Profile approximation and constraint matching: Yosida transforms, volume
//! rebalancing, recovery sequences, lattice volume matching, Hausdorff
//! distance, and convergence diagnostics.

use nalgebra::Vector2;

use crate::continuum::ContinuumProfile;
use crate::energy::{Deformation, MaterialParams};
use crate::error::{Error, Result};
use crate::lattice::{build_region, DiscreteProfile, LatticeSpec, OccupiedRegion};
use crate::rigidity::RigidMotion;

fn circle_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Yosida transform `h_lam(x) = inf_y { h(y) + lam * d(x, y) }` on the circle,
/// computed exactly for piecewise-linear input. The result is `lam`-Lipschitz,
/// below `h`, and increases pointwise in `lam`.
pub fn yosida_transform(profile: &ContinuumProfile, lam: f64) -> Result<ContinuumProfile> {
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::NonPositiveSlope(lam));
    }
    let l = profile.period();
    let bp = profile.breakpoints();

    // candidate minimizers: breakpoint values (both wall values) and y = x
    let cones: Vec<(f64, f64)> = bp.iter().copied().collect();
    let value = |x: f64| -> f64 {
        let mut best = profile.height_at(x);
        for &(xb, hb) in &cones {
            best = best.min(hb + lam * circle_distance(x, xb, l));
        }
        best
    };

    // partition: breakpoints, their antipodes, and all pairwise crossings of
    // the candidate linear pieces inside every base cell
    let mut xs: Vec<f64> = Vec::new();
    for &(x, _) in bp {
        xs.push(x.rem_euclid(l));
        xs.push((x + 0.5 * l).rem_euclid(l));
    }
    xs.push(0.0);
    xs.push(l);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * l);
    if *xs.last().unwrap() < l {
        xs.push(l);
    }

    let mut refined: Vec<f64> = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        refined.push(a);
        if b - a < 1e-13 * l {
            continue;
        }
        // linear candidates on (a, b): each cone is linear here (antipodes are
        // cell boundaries), and h is linear (breakpoints are cell boundaries)
        let mid = 0.5 * (a + b);
        let mut lines: Vec<(f64, f64)> = Vec::new(); // (value at a, value at b)
        let ha = profile.one_sided(a, true);
        let hb = profile.one_sided(b, false);
        let _ = mid;
        lines.push((ha, hb));
        for &(xb, v) in &cones {
            let ca = v + lam * circle_distance(a, xb, l);
            let cb = v + lam * circle_distance(b, xb, l);
            lines.push((ca, cb));
        }
        let dx = b - a;
        for i in 0..lines.len() {
            for j in (i + 1)..lines.len() {
                let (a1, b1) = lines[i];
                let (a2, b2) = lines[j];
                let denom = (b1 - a1) - (b2 - a2);
                if denom.abs() < 1e-30 {
                    continue;
                }
                let t = (a2 - a1) / denom * dx;
                if t > 1e-13 * l && t < dx - 1e-13 * l {
                    refined.push(a + t);
                }
            }
        }
    }
    refined.push(l);
    refined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    refined.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * l);

    let mut out: Vec<(f64, f64)> = refined.iter().map(|&x| (x, value(x))).collect();
    if (out[0].0).abs() > 1e-13 * l {
        out.insert(0, (0.0, value(0.0)));
    }
    // drop collinear interior points
    let mut simplified: Vec<(f64, f64)> = Vec::with_capacity(out.len());
    for p in out {
        while simplified.len() >= 2 {
            let a = simplified[simplified.len() - 2];
            let b = simplified[simplified.len() - 1];
            let dx1 = b.0 - a.0;
            let dx2 = p.0 - a.0;
            if dx1 > 0.0 && dx2 > 0.0 {
                let interp = a.1 + (b.1 - a.1) / dx1 * dx2;
                if (interp - p.1).abs() <= 1e-12 * (1.0 + p.1.abs()) {
                    simplified.pop();
                    continue;
                }
            }
            break;
        }
        simplified.push(p);
    }
    ContinuumProfile::new(l, simplified, Vec::new())
}

/// Exact-volume lift of a Lipschitz approximant lying below the target
/// volume: `+eps_n` above the level `lam_n = deficit^beta`, scaled by
/// `(1 + eps_n/lam_n)` below it, pinned at zero, with `eps_n` chosen so the
/// output volume is exactly the target.
pub fn volume_rebalance(
    approximant: &ContinuumProfile,
    target_volume: f64,
    beta: f64,
) -> Result<ContinuumProfile> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidProfile(format!("beta = {beta} not in (0,1)")));
    }
    if approximant.lipschitz_constant().is_none() {
        return Err(Error::NotLipschitz(f64::NAN));
    }
    let vol = approximant.volume();
    if vol > target_volume * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::VolumeExceedsTarget {
            have: vol,
            target: target_volume,
        });
    }
    let deficit = target_volume - vol;
    let scale = target_volume.abs().max(1.0);
    if deficit <= 1e-14 * scale {
        return Ok(approximant.clone());
    }
    let lam = deficit.powf(beta);

    // refine: insert crossings of h with the level lam
    let l = approximant.period();
    let mut bp: Vec<(f64, f64)> = Vec::new();
    for w in approximant.breakpoints().windows(2) {
        let (xa, ha) = w[0];
        let (xb, hb) = w[1];
        bp.push((xa, ha));
        if xa < xb && (ha - lam) * (hb - lam) < 0.0 {
            let t = (lam - ha) / (hb - ha);
            bp.push((xa + t * (xb - xa), lam));
        }
    }
    bp.push(*approximant.breakpoints().last().unwrap());

    // mu = |{h >= lam}| + (1/lam) * int_{h < lam} h
    let mut mu = 0.0;
    for w in bp.windows(2) {
        let (xa, ha) = w[0];
        let (xb, hb) = w[1];
        let dx = xb - xa;
        if dx <= 0.0 {
            continue;
        }
        let mid = 0.5 * (ha + hb);
        if ha >= lam - 1e-15 * scale && hb >= lam - 1e-15 * scale {
            mu += dx;
        } else {
            mu += mid * dx / lam;
        }
    }
    if mu <= 1e-300 {
        return Err(Error::DegenerateMass);
    }
    let eps_n = deficit / mu;

    let lifted: Vec<(f64, f64)> = bp
        .iter()
        .map(|&(x, h)| {
            let nh = if h == 0.0 {
                0.0
            } else if h >= lam - 1e-15 * scale {
                h + eps_n
            } else {
                (1.0 + eps_n / lam) * h
            };
            (x, nh)
        })
        .collect();
    ContinuumProfile::new(l, lifted, Vec::new())
}

/// Lift parameters of [`volume_rebalance`] for diagnostics.
pub fn rebalance_parameters(
    approximant: &ContinuumProfile,
    target_volume: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    let out = volume_rebalance(approximant, target_volume, beta)?;
    let deficit = target_volume - approximant.volume();
    if deficit <= 1e-14 * target_volume.abs().max(1.0) {
        return Ok((0.0, 0.0));
    }
    let lam = deficit.powf(beta);
    // recover eps from the max lift over breakpoints above lam
    let mut eps = 0.0f64;
    for &(x, h) in approximant.breakpoints() {
        if h >= lam {
            eps = eps.max(out.height_at(x) - h);
        }
    }
    Ok((lam, eps))
}

/// Discretize a Lipschitz profile into an admissible lattice profile: each
/// column takes the largest admissible height whose top atom lies at or below
/// `h` (the lattice floor of the graph, parity-aware so sloped graphs cost no
/// extra riser bonds). In the dewetting regime (`gamma_s < gamma_f`) columns
/// where `h = 0` stay empty; in the wetting regime every column gains one
/// extra monolayer so the substrate is never exposed.
pub fn recovery_profile(
    h: &ContinuumProfile,
    spec: &LatticeSpec,
    mat: &MaterialParams,
) -> Result<DiscreteProfile> {
    if h.lipschitz_constant().is_none() {
        return Err(Error::NotLipschitz(f64::NAN));
    }
    let eps = spec.epsilon;
    let wetting = mat.wetting();
    let mut heights = Vec::with_capacity(spec.columns() as usize);
    for m in 0..spec.columns() {
        let hv = h.height_at(spec.column_x(m));
        // largest full/half level of this column's sublattice at or below h
        let n_floor = if m % 2 == 0 {
            2 * ((hv / eps + 1e-9).floor().max(0.0) as u32) + 1
        } else {
            2 * ((hv / eps + 0.5 + 1e-9).floor().max(0.0) as u32)
        };
        let n = if wetting {
            n_floor + 2
        } else if hv <= 1e-12 * (1.0 + h.max_height()) {
            0
        } else {
            n_floor
        };
        heights.push(n);
    }
    let out = DiscreteProfile::new(heights);
    out.check_admissible()?;
    Ok(out)
}

/// Sample the recovery deformation `y(i) = R i + b + sqrt(eps) u(i)` at the
/// lattice sites. `u` must cover every site (`None` is a domain error).
pub fn recovery_deformation(
    region: &OccupiedRegion,
    u: impl Fn(Vector2<f64>) -> Option<Vector2<f64>>,
    frame: RigidMotion,
) -> Result<Deformation> {
    let scale = region.spec().epsilon.sqrt();
    let mut values = Vec::with_capacity(region.site_count());
    for site in region.sites() {
        let p = site.position(region.spec());
        let uv = u(p).ok_or(Error::FieldDomain(p.x, p.y))?;
        values.push(frame.apply(p) + scale * uv);
    }
    Ok(Deformation { values })
}

/// Adjust a profile to an exact integer volume target (in `(sqrt(3)/4) eps^2`
/// half-step units) by adding or removing a near-square block of full steps:
/// with `N` full steps of change and `B = floor(sqrt(|N|))`, `|N| div B`
/// consecutive columns change by `B` full steps and one remainder column
/// absorbs `|N| mod B`. Parity-preserving edits reach only even half-step
/// deltas. The host is the longest cyclic run of positive-height columns
/// whose two column sublattices have affine tops with a common slope
/// (tie-break leftmost).
pub fn lattice_volume_match(
    profile: &DiscreteProfile,
    target_units: u64,
    spec: &LatticeSpec,
) -> Result<DiscreteProfile> {
    let current = profile.volume_units();
    let delta = target_units as i64 - current as i64;
    if delta == 0 {
        return Ok(profile.clone());
    }
    if delta.rem_euclid(2) != 0 {
        return Err(Error::OddVolumeDelta(delta));
    }
    let n_full = delta / 2;
    let sign = n_full.signum();
    let b = ((n_full.unsigned_abs() as f64).sqrt().floor() as i64).max(1);
    let q = (n_full.unsigned_abs() as i64) / b;
    let r = (n_full.unsigned_abs() as i64) % b;
    let block_cols = (q + if r > 0 { 1 } else { 0 }) as usize;

    // host: longest cyclic run of positive-height columns whose full-step
    // tops are affine per sublattice with a common slope
    let cols = spec.columns() as usize;
    debug_assert_eq!(profile.half_heights.len(), cols);
    let f: Vec<i64> = profile.half_heights.iter().map(|&n| (n / 2) as i64).collect();
    let positive: Vec<bool> = profile.half_heights.iter().map(|&n| n > 0).collect();
    let mut best: Option<(usize, usize)> = None; // (start, len)
    for start in 0..cols {
        if !positive[start] {
            continue;
        }
        let mut len = 1usize;
        let mut slope: Option<i64> = None;
        while len < cols {
            let j = (start + len) % cols;
            if !positive[j] {
                break;
            }
            if len >= 2 {
                let i = (start + len - 2) % cols;
                let d = f[j] - f[i];
                match slope {
                    None => slope = Some(d),
                    Some(s) if s == d => {}
                    _ => break,
                }
            }
            len += 1;
        }
        if best.map_or(true, |(_, bl)| len > bl) {
            best = Some((start, len));
        }
    }
    let (start, run_len) = best.ok_or(Error::NoHostInterval(block_cols))?;
    if run_len < block_cols {
        return Err(Error::NoHostInterval(block_cols));
    }

    let mut heights = profile.half_heights.clone();
    for j in 0..block_cols {
        let col = (start + j) % cols;
        let steps = if (j as i64) < q { b } else { r };
        let change = 2 * sign * steps;
        let new = heights[col] as i64 + change;
        if new < 0 {
            return Err(Error::InsufficientHeight {
                column: col as u32,
                remove: (-change) as u32,
                have: heights[col],
            });
        }
        heights[col] = new as u32;
    }
    let out = DiscreteProfile::new(heights);
    debug_assert_eq!(out.volume_units(), target_units);
    out.check_admissible()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Hausdorff distance between complements
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Vector2<f64>,
    b: Vector2<f64>,
}

impl Segment {
    fn point_distance(&self, p: Vector2<f64>) -> f64 {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return (p - self.a).norm();
        }
        let t = ((p - self.a).dot(&d) / len2).clamp(0.0, 1.0);
        (p - (self.a + t * d)).norm()
    }
}

/// Boundary features of the closed epigraph `{x1 in [0, L], x2 >= h(x1)}`:
/// the graph polyline (walls included) plus the two lateral rays above the
/// one-sided boundary values, truncated at `top`.
fn epigraph_features(p: &ContinuumProfile, top: f64) -> Vec<Segment> {
    let l = p.period();
    let mut out = Vec::new();
    for w in p.breakpoints().windows(2) {
        let (xa, ha) = w[0];
        let (xb, hb) = w[1];
        if xa == xb && ha == hb {
            continue;
        }
        out.push(Segment {
            a: Vector2::new(xa, ha),
            b: Vector2::new(xb, hb),
        });
    }
    let h0 = p.one_sided(0.0, true);
    let hl = p.one_sided(l, false);
    out.push(Segment {
        a: Vector2::new(0.0, h0),
        b: Vector2::new(0.0, top),
    });
    out.push(Segment {
        a: Vector2::new(l, hl),
        b: Vector2::new(l, top),
    });
    out
}

fn inside_epigraph(p: Vector2<f64>, target: &ContinuumProfile) -> bool {
    p.x >= 0.0 && p.x <= target.period() && p.y >= target.height_at(p.x)
}

fn distance_to_epigraph(p: Vector2<f64>, target: &ContinuumProfile, features: &[Segment]) -> f64 {
    if inside_epigraph(p, target) {
        return 0.0;
    }
    features
        .iter()
        .map(|s| s.point_distance(p))
        .fold(f64::INFINITY, f64::min)
}

/// Parameter subintervals of `seg` lying outside the target epigraph:
/// crossings of `p_y(t) - h(p_x(t))` are linear per target piece, so the
/// partition is exact.
fn outside_intervals(seg: &Segment, target: &ContinuumProfile) -> Vec<(f64, f64)> {
    let d = seg.b - seg.a;
    let mut ts = vec![0.0f64, 1.0];
    if d.x.abs() > 0.0 {
        for w in target.breakpoints().windows(2) {
            let (xa, ha) = w[0];
            let (xb, hb) = w[1];
            // t at the piece's x-extent
            for x in [xa, xb] {
                let t = (x - seg.a.x) / d.x;
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
            if xb > xa {
                // linear crossing p_y(t) = line(p_x(t))
                let slope = (hb - ha) / (xb - xa);
                // seg.a.y + t d.y = ha + slope (seg.a.x + t d.x - xa)
                let denom = d.y - slope * d.x;
                if denom.abs() > 0.0 {
                    let t = (ha + slope * (seg.a.x - xa) - seg.a.y) / denom;
                    if t > 0.0 && t < 1.0 {
                        let x = seg.a.x + t * d.x;
                        if x >= xa && x <= xb {
                            ts.push(t);
                        }
                    }
                }
            }
        }
    } else {
        // vertical segment: single threshold at h(x)
        let h = target.height_at(seg.a.x);
        if d.y.abs() > 0.0 {
            let t = (h - seg.a.y) / d.y;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut out = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 < 1e-15 {
            continue;
        }
        let mid = seg.a + 0.5 * (t0 + t1) * d;
        if !inside_epigraph(mid, target) {
            out.push((t0, t1));
        }
    }
    out
}

/// Supremum of `dist(., target-epigraph)` over one source segment. On
/// outside subintervals the distance is a minimum of per-feature convex
/// functions, so `min_j max(d_j(t0), d_j(t1))` bounds the subinterval and the
/// bisection prunes geometrically.
fn directed_sup_on_segment(
    seg: &Segment,
    target: &ContinuumProfile,
    features: &[Segment],
    tol: f64,
) -> f64 {
    let point = |t: f64| seg.a + t * (seg.b - seg.a);
    let g = |t: f64| distance_to_epigraph(point(t), target, features);
    let convex_bound = |t0: f64, t1: f64| -> f64 {
        let p0 = point(t0);
        let p1 = point(t1);
        features
            .iter()
            .map(|s| s.point_distance(p0).max(s.point_distance(p1)))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = g(0.0).max(g(1.0));
    for (a, b) in outside_intervals(seg, target) {
        let mut stack = vec![(a, b)];
        let mut guard = 0usize;
        while let Some((t0, t1)) = stack.pop() {
            guard += 1;
            if guard > 100_000 {
                break;
            }
            best = best.max(g(t0)).max(g(t1));
            if t1 - t0 < 1e-14 || convex_bound(t0, t1) <= best + tol {
                continue;
            }
            let tm = 0.5 * (t0 + t1);
            best = best.max(g(tm));
            stack.push((t0, tm));
            stack.push((tm, t1));
        }
    }
    best
}

/// Hausdorff distance between the complements `Q \ Omega_h` of two profiles
/// (their closed epigraphs over `[0, L]`), exact to 1e-12 of the domain scale.
pub fn hausdorff_distance(p1: &ContinuumProfile, p2: &ContinuumProfile) -> f64 {
    let top = p1.max_height().max(p2.max_height()) + p1.period().max(p2.period()) + 1.0;
    let f1 = epigraph_features(p1, top);
    let f2 = epigraph_features(p2, top);
    let scale = p1.period().max(top);
    let tol = 1e-12 * scale;
    let directed = |src: &ContinuumProfile,
                    src_feats: &[Segment],
                    dst: &ContinuumProfile,
                    dst_feats: &[Segment]| {
        let mut sup: f64 = 0.0;
        // sources: the graph polyline (lateral rays are dominated by their
        // bottom endpoints, which are polyline endpoints)
        for seg in src_feats.iter().take(src_feats.len() - 2) {
            sup = sup.max(directed_sup_on_segment(seg, dst, dst_feats, tol));
        }
        let _ = src;
        sup
    };
    directed(p1, &f1, p2, &f2).max(directed(p2, &f2, p1, &f1))
}

/// Hausdorff distance between discrete profiles, computed on their
/// piecewise-constant interpolations.
pub fn hausdorff_distance_discrete(
    p1: &DiscreteProfile,
    s1: &LatticeSpec,
    p2: &DiscreteProfile,
    s2: &LatticeSpec,
) -> f64 {
    hausdorff_distance(
        &ContinuumProfile::from_discrete(p1, s1),
        &ContinuumProfile::from_discrete(p2, s2),
    )
}

// ---------------------------------------------------------------------------
// Convergence diagnostics
// ---------------------------------------------------------------------------

/// One member of a discrete sequence.
pub struct ConvergenceItem {
    pub spec: LatticeSpec,
    pub profile: DiscreteProfile,
    pub deformation: Deformation,
}

/// One row of the convergence report.
#[derive(Debug, Clone, Copy)]
pub struct ReportRow {
    pub epsilon: f64,
    pub hausdorff: f64,
    pub l2_y: f64,
    pub l2_u: f64,
    pub e_surface: f64,
    pub e_elastic: f64,
    pub e_total: f64,
    /// False when the probe window was not compactly contained in the item's
    /// region; the distance columns are NaN in that case.
    pub omega_ok: bool,
}

/// Per-epsilon diagnostics of a sequence against a limit triple: Hausdorff
/// distance of complements, `L^2` distances of the interpolated deformation
/// and displacement on a fixed compact window `Omega'` (chosen via a Yosida
/// level set of the limit profile), and the discrete energies.
pub fn convergence_report(
    items: &[ConvergenceItem],
    limit_profile: &ContinuumProfile,
    limit_frame: RigidMotion,
    limit_u: &dyn Fn(Vector2<f64>) -> Vector2<f64>,
    mat: &MaterialParams,
) -> Result<Vec<ReportRow>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let l = limit_profile.period();
    let max_eps = items.iter().map(|it| it.spec.epsilon).fold(0.0, f64::max);
    let depth = items
        .iter()
        .map(|it| it.spec.substrate_depth)
        .fold(f64::INFINITY, f64::min);
    let lip = limit_profile.lipschitz_constant().unwrap_or(0.0);
    let smooth = yosida_transform(limit_profile, 2.0 * lip + 1.0)?;
    let margin = (3.0 * max_eps).max(0.02 * (smooth.max_height() + depth));

    // fixed quadrature grid on Omega'
    let nx = 96usize;
    let dy = (smooth.max_height() + depth) / 96.0;
    let mut grid = Vec::new();
    for i in 0..nx {
        let x = (i as f64 + 0.5) / nx as f64 * l;
        let ytop = smooth.height_at(x) - margin;
        let mut y = -depth + margin;
        while y < ytop {
            grid.push(Vector2::new(x, y));
            y += dy;
        }
    }
    let cell = l / nx as f64 * dy;

    let mut rows = Vec::with_capacity(items.len());
    for item in items {
        let region = build_region(&item.spec, &item.profile)?;
        item.deformation.check(&region)?;
        let locator = TriangleLocator::new(&region);
        let haus = hausdorff_distance(
            &ContinuumProfile::from_discrete(&item.profile, &item.spec),
            limit_profile,
        );
        let energy = crate::energy::total_energy(&region, &item.deformation, mat)?;
        let sqrt_eps = item.spec.epsilon.sqrt();
        let mut l2y = 0.0;
        let mut l2u = 0.0;
        let mut ok = true;
        for p in &grid {
            match locator.interpolate(&region, &item.deformation, *p) {
                Some(y_interp) => {
                    let y_lim = limit_frame.apply(*p);
                    let u_interp = (y_interp - y_lim) / sqrt_eps;
                    let u_lim = limit_u(*p);
                    l2y += (y_interp - y_lim).norm_squared() * cell;
                    l2u += (u_interp - u_lim).norm_squared() * cell;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        rows.push(ReportRow {
            epsilon: item.spec.epsilon,
            hausdorff: haus,
            l2_y: if ok { l2y.sqrt() } else { f64::NAN },
            l2_u: if ok { l2u.sqrt() } else { f64::NAN },
            e_surface: energy.surface(),
            e_elastic: energy.elastic(),
            e_total: energy.total(),
            omega_ok: ok,
        });
    }
    Ok(rows)
}

/// Uniform-bucket point location over a region's triangles (wrapped copies
/// registered on both sides of the seam).
pub struct TriangleLocator {
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<(u32, f64)>>,
}

impl TriangleLocator {
    pub fn new(region: &OccupiedRegion) -> Self {
        let eps = region.spec().epsilon;
        let l = region.spec().width();
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<(u32, f64)>> =
            std::collections::HashMap::new();
        for (t, tri) in region.triangles().iter().enumerate() {
            let c = region.triangle_centroid(tri);
            for shift in [0.0, -l] {
                let x = c.x + shift;
                if x < -eps || x > l + eps {
                    continue;
                }
                let key = ((x / eps).floor() as i64, (c.y / eps).floor() as i64);
                buckets.entry(key).or_default().push((t as u32, shift));
            }
        }
        Self { cell: eps, buckets }
    }

    /// Piecewise-affine value of the deformation at `p` (periodic unwrap on
    /// wrap triangles), or `None` when `p` is not covered.
    pub fn interpolate(
        &self,
        region: &OccupiedRegion,
        y: &Deformation,
        p: Vector2<f64>,
    ) -> Option<Vector2<f64>> {
        let l = region.spec().width();
        let kx = (p.x / self.cell).floor() as i64;
        let ky = (p.y / self.cell).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(list) = self.buckets.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &(t, shift) in list {
                    let tri = &region.triangles()[t as usize];
                    let mut pos = region.triangle_positions(tri);
                    for q in pos.iter_mut() {
                        q.x += shift;
                    }
                    let det =
                        (pos[1] - pos[0]).x * (pos[2] - pos[0]).y - (pos[1] - pos[0]).y * (pos[2] - pos[0]).x;
                    let l2 = ((p - pos[0]).x * (pos[2] - pos[0]).y
                        - (p - pos[0]).y * (pos[2] - pos[0]).x)
                        / det;
                    let l3 = ((pos[1] - pos[0]).x * (p - pos[0]).y
                        - (pos[1] - pos[0]).y * (p - pos[0]).x)
                        / det;
                    let l1 = 1.0 - l2 - l3;
                    let tol = -1e-10;
                    if l1 >= tol && l2 >= tol && l3 >= tol {
                        // unwrap values consistently with the reference shift
                        let val = |j: usize| {
                            y.values[tri.v[j] as usize]
                                + Vector2::new(tri.shift[j] as f64 * l + shift, 0.0)
                        };
                        return Some(l1 * val(0) + l2 * val(1) + l3 * val(2));
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SQRT3;
    use approx::assert_relative_eq;

    fn staircase() -> ContinuumProfile {
        // 4 steps up-down on [0, 4]
        ContinuumProfile::new(
            4.0,
            vec![
                (0.0, 0.5),
                (1.0, 0.5),
                (1.0, 1.5),
                (2.0, 1.5),
                (2.0, 1.0),
                (3.0, 1.0),
                (3.0, 0.5),
                (4.0, 0.5),
            ],
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn yosida_basics() {
        let flat = ContinuumProfile::constant(2.0, 0.7).unwrap();
        let y = yosida_transform(&flat, 1.0).unwrap();
        for i in 0..50 {
            let x = i as f64 / 50.0 * 2.0;
            assert_relative_eq!(y.height_at(x), 0.7, max_relative = 1e-12);
        }
        assert!(yosida_transform(&flat, 0.0).is_err());

        // Lipschitz input with lam above the max slope is unchanged
        let tent = ContinuumProfile::new(
            2.0,
            vec![(0.0, 0.2), (1.0, 1.0), (2.0, 0.2)],
            Vec::new(),
        )
        .unwrap();
        let same = yosida_transform(&tent, 2.0).unwrap();
        for i in 0..100 {
            let x = i as f64 / 100.0 * 2.0;
            assert_relative_eq!(same.height_at(x), tent.height_at(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn yosida_step_matches_grid_oracle() {
        // step 0 -> 1 at x = 4 on a long period
        let step = ContinuumProfile::new(
            8.0,
            vec![(0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (7.9, 1.0), (7.9, 0.0), (8.0, 0.0)],
            Vec::new(),
        )
        .unwrap();
        let lam = 2.5;
        let y = yosida_transform(&step, lam).unwrap();
        // fine-grid oracle for the infimum
        let oracle = |x: f64| {
            let mut best = f64::INFINITY;
            for j in 0..80000 {
                let yy = j as f64 / 80000.0 * 8.0;
                best = best.min(step.height_at(yy) + lam * circle_distance(x, yy, 8.0));
            }
            best
        };
        for i in 0..60 {
            let x = 3.0 + i as f64 / 60.0 * 3.0;
            assert_relative_eq!(y.height_at(x), oracle(x), epsilon = 2e-4);
        }
        // ramp shape near the jump
        assert_relative_eq!(y.height_at(4.2), (lam * 0.2f64).min(1.0), epsilon = 1e-9);
    }

    #[test]
    fn yosida_invariants() {
        let h = staircase();
        let lams = [0.5, 1.0, 2.0, 4.0, 8.0];
        let mut prev: Option<ContinuumProfile> = None;
        for &lam in &lams {
            let y = yosida_transform(&h, lam).unwrap();
            // below h and Lipschitz with constant lam
            for i in 0..200 {
                let x = i as f64 / 200.0 * 4.0;
                assert!(y.height_at(x) <= h.height_at(x) + 1e-12);
                if let Some(p) = &prev {
                    assert!(p.height_at(x) <= y.height_at(x) + 1e-12, "monotone in lam");
                }
            }
            let lip = y.lipschitz_constant().expect("transform is Lipschitz");
            assert!(lip <= lam * (1.0 + 1e-9), "lip = {lip} vs lam = {lam}");
            prev = Some(y);
        }
    }

    #[test]
    fn yosida_preserves_zero_set() {
        let h = ContinuumProfile::new(
            4.0,
            vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (3.0, 1.0), (3.5, 0.0), (4.0, 0.0)],
            Vec::new(),
        )
        .unwrap();
        let y = yosida_transform(&h, 1.5).unwrap();
        for &(a, b) in &[(0.0, 1.0), (3.5, 4.0)] {
            for i in 0..20 {
                let x = a + (b - a) * i as f64 / 20.0;
                assert!(y.height_at(x).abs() < 1e-12);
            }
        }
        // strictly positive where h > 0
        assert!(y.height_at(2.0) > 0.0);
    }

    #[test]
    fn rebalance_flat_example() {
        let h = ContinuumProfile::constant(1.0, 0.99).unwrap();
        let out = volume_rebalance(&h, 1.0, 0.5).unwrap();
        let (lam, eps) = rebalance_parameters(&h, 1.0, 0.5).unwrap();
        assert_relative_eq!(lam, 0.1, max_relative = 1e-12);
        assert_relative_eq!(eps, 0.01, max_relative = 1e-9);
        for i in 0..20 {
            let x = i as f64 / 20.0;
            assert_relative_eq!(out.height_at(x), 1.0, max_relative = 1e-12);
        }
        assert_relative_eq!(out.volume(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn rebalance_tent_exact_volume() {
        let tent = ContinuumProfile::new(
            2.0,
            vec![(0.0, 0.0), (0.5, 0.0), (1.0, 0.8), (1.5, 0.0), (2.0, 0.0)],
            Vec::new(),
        )
        .unwrap();
        let v = tent.volume() + 0.02;
        let out = volume_rebalance(&tent, v, 0.5).unwrap();
        assert_relative_eq!(out.volume(), v, max_relative = 1e-12);
        // zero set untouched
        assert!(out.height_at(0.25).abs() < 1e-15);
        // ratio bound eps/lam <= deficit^{1-beta} / mu
        let (lam, eps) = rebalance_parameters(&tent, v, 0.5).unwrap();
        assert!(eps / lam <= 0.02f64.powf(0.5) / 0.5 + 1e-9);
        // Hausdorff distance of complements within eps + lam
        assert!(hausdorff_distance(&tent, &out) <= eps + lam + 1e-9);
        // already balanced input returned unchanged
        let same = volume_rebalance(&tent, tent.volume(), 0.5).unwrap();
        assert_eq!(same.breakpoints(), tent.breakpoints());
        // overfull input rejected
        assert!(matches!(
            volume_rebalance(&tent, tent.volume() - 0.1, 0.5),
            Err(Error::VolumeExceedsTarget { .. })
        ));
        // no mass anywhere
        let zero = ContinuumProfile::constant(1.0, 0.0).unwrap();
        assert!(matches!(
            volume_rebalance(&zero, 0.5, 0.5),
            Err(Error::DegenerateMass)
        ));
    }

    #[test]
    fn recovery_profile_branches() {
        let spec = LatticeSpec::new(0.1, 2, 1.0, 1.0).unwrap();
        let h = ContinuumProfile::constant(spec.width(), 0.95).unwrap();
        let dewet = MaterialParams::new(1.0, 1.0, 1.0, 0.5).unwrap(); // gamma_s < gamma_f
        let wet = MaterialParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pd = recovery_profile(&h, &spec, &dewet).unwrap();
        // lattice floor of h = 0.95: even columns 0.95 (top atom 0.9), odd
        // columns 1.0 (top atom 0.95)
        assert!(pd.half_heights.iter().step_by(2).all(|&n| n == 19));
        assert!(pd.half_heights.iter().skip(1).step_by(2).all(|&n| n == 20));
        // top atoms never exceed h
        for (m, &n) in pd.half_heights.iter().enumerate() {
            let top = (n as f64 - 1.0) * 0.5 * spec.epsilon;
            assert!(top <= 0.95 + 1e-12, "column {m}");
        }
        let pw = recovery_profile(&h, &spec, &wet).unwrap();
        assert!(pw.half_heights.iter().step_by(2).all(|&n| n == 21)); // 1.05
        assert!(pw.half_heights.iter().skip(1).step_by(2).all(|&n| n == 22)); // 1.1
        // dewetting leaves h = 0 exposed
        let zero = ContinuumProfile::constant(spec.width(), 0.0).unwrap();
        let pz = recovery_profile(&zero, &spec, &dewet).unwrap();
        assert!(pz.half_heights.iter().all(|&n| n == 0));
        // wetting keeps a monolayer
        let pzw = recovery_profile(&zero, &spec, &wet).unwrap();
        assert!(pzw.half_heights.iter().all(|&n| n > 0));
        // uniform closeness |h_eps - h| <= 1.5 eps
        for (m, &n) in pw.half_heights.iter().enumerate() {
            let diff = (n as f64 * 0.5 * spec.epsilon
                - h.height_at(spec.column_x(m as u32)))
            .abs();
            assert!(diff <= 1.5 * spec.epsilon + 1e-12);
        }
        // non-Lipschitz input rejected
        let wall = ContinuumProfile::new(
            spec.width(),
            vec![(0.0, 0.1), (0.2, 0.1), (0.2, 0.4), (spec.width(), 0.1)],
            Vec::new(),
        )
        .unwrap();
        assert!(matches!(
            recovery_profile(&wall, &spec, &dewet),
            Err(Error::NotLipschitz(_))
        ));
    }

    #[test]
    fn volume_match_blocks() {
        let spec = LatticeSpec::new(0.5, 4, 1.0, 1.0).unwrap();
        let flat = DiscreteProfile::flat_zigzag(8, 5);
        let v0 = flat.volume_units();
        // deficit of 9 full steps = 18 half-units: 3x3 block
        let out = lattice_volume_match(&flat, v0 + 18, &spec).unwrap();
        assert_eq!(out.volume_units(), v0 + 18);
        let changed: Vec<usize> = (0..8)
            .filter(|&m| out.half_heights[m] != flat.half_heights[m])
            .collect();
        assert_eq!(changed.len(), 3);
        for &m in &changed {
            assert_eq!(out.half_heights[m] - flat.half_heights[m], 6);
        }
        // deficit of 10 full steps: 3x3 block plus one remainder column
        let out = lattice_volume_match(&flat, v0 + 20, &spec).unwrap();
        assert_eq!(out.volume_units(), v0 + 20);
        let deltas: Vec<u32> = (0..8)
            .map(|m| out.half_heights[m] - flat.half_heights[m])
            .filter(|&d| d > 0)
            .collect();
        assert_eq!(deltas.iter().sum::<u32>(), 20);
        assert_eq!(deltas, vec![6, 6, 6, 2]);
        // removal works and errors below zero
        let out = lattice_volume_match(&flat, v0 - 18, &spec).unwrap();
        assert_eq!(out.volume_units(), v0 - 18);
        assert!(lattice_volume_match(&flat, v0 + 1, &spec).is_err());
        // unchanged at the exact target
        assert_eq!(
            lattice_volume_match(&flat, v0, &spec).unwrap().half_heights,
            flat.half_heights
        );
        // no host interval on an empty profile
        assert!(matches!(
            lattice_volume_match(&DiscreteProfile::zero(8), 18, &spec),
            Err(Error::NoHostInterval(_))
        ));
    }

    #[test]
    fn hausdorff_examples() {
        let a = ContinuumProfile::constant(2.0, 0.4).unwrap();
        let b = ContinuumProfile::constant(2.0, 1.1).unwrap();
        assert_relative_eq!(hausdorff_distance(&a, &a), 0.0, epsilon = 1e-12);
        assert_relative_eq!(hausdorff_distance(&a, &b), 0.7, epsilon = 1e-9);
        assert_relative_eq!(
            hausdorff_distance(&b, &a),
            hausdorff_distance(&a, &b),
            epsilon = 1e-12
        );
        // a bump is seen at its full height from the flat profile's epigraph
        let bump = ContinuumProfile::new(
            2.0,
            vec![(0.0, 0.4), (0.9, 0.4), (1.0, 0.9), (1.1, 0.4), (2.0, 0.4)],
            Vec::new(),
        )
        .unwrap();
        let d = hausdorff_distance(&a, &bump);
        // the sup sits under the tip (1.0, 0.4): perpendicular distance to the
        // slanted side from (0.9, 0.4) to (1.0, 0.9) is 0.05 / sqrt(0.26)
        assert_relative_eq!(d, 0.05 / 0.26f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn hausdorff_discrete_rate() {
        let mat = MaterialParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
        let tent = ContinuumProfile::new(
            SQRT3,
            vec![
                (0.0, 0.4),
                (0.25 * SQRT3, 0.7),
                (0.75 * SQRT3, 0.3),
                (SQRT3, 0.4),
            ],
            Vec::new(),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for k in [8u32, 16, 32] {
            let spec = LatticeSpec::new(SQRT3 / (SQRT3 * k as f64), k, 0.5, 1.0).unwrap();
            let dp = recovery_profile(&tent, &spec, &mat).unwrap();
            let d = hausdorff_distance(&ContinuumProfile::from_discrete(&dp, &spec), &tent);
            assert!(d <= 2.0 * spec.epsilon + 1e-9, "d = {d}, eps = {}", spec.epsilon);
            assert!(d <= prev + 1e-12);
            prev = d;
        }
    }
}
