//! Discrete surface and elastic energies, cell energies, gradients,
//! orientation checks, and the renormalized Lennard-Jones form.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Material, OccupiedRegion, Triangle};
use crate::rigidity::RigidMotion;

/// Elastic constants and surface tensions of the two materials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub k_f: f64,
    pub k_s: f64,
    pub gamma_f: f64,
    pub gamma_s: f64,
}

impl MaterialParams {
    pub fn new(k_f: f64, k_s: f64, gamma_f: f64, gamma_s: f64) -> Result<Self> {
        for (name, v) in [
            ("k_f", k_f),
            ("k_s", k_s),
            ("gamma_f", gamma_f),
            ("gamma_s", gamma_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} = {v}")));
            }
        }
        Ok(Self {
            k_f,
            k_s,
            gamma_f,
            gamma_s,
        })
    }

    /// Wetting regime: covering the substrate with a film monolayer is
    /// favorable.
    pub fn wetting(&self) -> bool {
        self.gamma_s >= self.gamma_f
    }
}

/// Per-site deformed positions, aligned with the site order of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub values: Vec<Vector2<f64>>,
}

impl Deformation {
    pub fn identity(region: &OccupiedRegion) -> Self {
        Self {
            values: region
                .sites()
                .iter()
                .map(|s| s.position(region.spec()))
                .collect(),
        }
    }

    pub fn check(&self, region: &OccupiedRegion) -> Result<()> {
        if self.values.len() != region.site_count() {
            return Err(Error::DeformationLength {
                expected: region.site_count(),
                got: self.values.len(),
            });
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::NonFiniteValue(i));
            }
        }
        Ok(())
    }
}

/// Rescaled per-site displacement together with its frame:
/// `y(i) = R i + b + sqrt(eps) u(i)` reconstructs the deformation exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub values: Vec<Vector2<f64>>,
    pub frame: RigidMotion,
    pub epsilon: f64,
}

/// Surface and elastic components of an energy evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub surface_film: f64,
    pub surface_substrate: f64,
    pub elastic_film: f64,
    pub elastic_substrate: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.surface_film + self.surface_substrate + self.elastic_film + self.elastic_substrate
    }

    pub fn surface(&self) -> f64 {
        self.surface_film + self.surface_substrate
    }

    pub fn elastic(&self) -> f64 {
        self.elastic_film + self.elastic_substrate
    }
}

/// Bond potential mode. The harmonic mode is the model energy; the
/// Lennard-Jones mode backs the renormalized atomistic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialSpec {
    Harmonic,
    /// 12-6 shape `A ((w/r)^12 - 2 (w/r)^6 + 1) - gamma` with `A = K w^2 / 72`,
    /// pinned to value `-gamma`, minimum location `w`, and curvature `K`.
    LennardJones,
}

/// Missing-bond surface energy, split by material. The bottom substrate row is
/// handled per `LatticeSpec::include_bottom_boundary`.
pub fn surface_energy(region: &OccupiedRegion, mat: &MaterialParams) -> EnergyBreakdown {
    let eps = region.spec().epsilon;
    let mut out = EnergyBreakdown::default();
    for idx in 0..region.site_count() {
        let missing = region.missing_bonds(idx as u32) as f64;
        match region.materials()[idx] {
            Material::Film => out.surface_film += mat.gamma_f * eps * missing,
            Material::Substrate => out.surface_substrate += mat.gamma_s * eps * missing,
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct BondTerm {
    stiffness: f64,
    rest: f64,
    gamma: f64,
}

/// Potential parameters for the ordered pair (first endpoint `from`, wrap flag).
fn bond_term(
    from: Material,
    wrap: bool,
    mat: &MaterialParams,
    spec: &crate::lattice::LatticeSpec,
) -> BondTerm {
    match (from, wrap) {
        (Material::Substrate, false) => BondTerm {
            stiffness: mat.k_s,
            rest: 1.0,
            gamma: mat.gamma_s,
        },
        (Material::Substrate, true) => BondTerm {
            stiffness: mat.k_s,
            rest: spec.wrap_rest_substrate(),
            gamma: mat.gamma_s,
        },
        (Material::Film, false) => BondTerm {
            stiffness: mat.k_f,
            rest: spec.lambda,
            gamma: mat.gamma_f,
        },
        (Material::Film, true) => BondTerm {
            stiffness: mat.k_f,
            rest: spec.wrap_rest_film(),
            gamma: mat.gamma_f,
        },
    }
}

/// Harmonic elastic energy: the ordered-pair sum
/// `sum_i sum_{j in N(i)} eps V^eps_{i,j}(|y_i - y_j| / eps)`; every unordered
/// bond contributes twice, once per orientation, with the constants of the
/// first index. Wrap bonds use the raw Euclidean distance against the rest
/// lengths `r1` / `r2(lambda)`.
pub fn elastic_energy(
    region: &OccupiedRegion,
    y: &Deformation,
    mat: &MaterialParams,
) -> Result<EnergyBreakdown> {
    y.check(region)?;
    let spec = region.spec();
    let eps = spec.epsilon;
    let mut out = EnergyBreakdown::default();
    for bond in region.bonds() {
        let r = (y.values[bond.a as usize] - y.values[bond.b as usize]).norm() / eps;
        for (from, other) in [(bond.a, bond.b), (bond.b, bond.a)] {
            let _ = other;
            let m = region.materials()[from as usize];
            let term = bond_term(m, bond.wrap != 0, mat, spec);
            let v = 0.5 * term.stiffness * (r - term.rest).powi(2);
            match m {
                Material::Film => out.elastic_film += eps * v,
                Material::Substrate => out.elastic_substrate += eps * v,
            }
        }
    }
    Ok(out)
}

/// Full energy of the pair `(y, h)`: surface plus elastic parts.
pub fn total_energy(
    region: &OccupiedRegion,
    y: &Deformation,
    mat: &MaterialParams,
) -> Result<EnergyBreakdown> {
    let mut out = surface_energy(region, mat);
    let el = elastic_energy(region, y, mat)?;
    out.elastic_film = el.elastic_film;
    out.elastic_substrate = el.elastic_substrate;
    Ok(out)
}

/// Unit edge directions of the lattice triangles (one representative per
/// unordered pair); the comparison-potential frame `e, v, v - e` of
/// [`TRIANGLE_EDGES`] is this set rotated by 30 degrees.
pub const LATTICE_EDGES: [Vector2<f64>; 3] = [
    Vector2::new(crate::lattice::SQRT3 * 0.5, 0.5),
    Vector2::new(0.0, 1.0),
    Vector2::new(crate::lattice::SQRT3 * 0.5, -0.5),
];

/// Per-triangle cell energy `W_cell(F) = sum over the three unit edges of
/// V(|F xi|)`, the ordered-pair regrouping of the bond energies. Satisfies
/// `E_el = sum_T eps W_cell(grad y(x_T))` wherever every bond lies in two
/// triangles.
pub fn cell_energy(
    f: &Matrix2<f64>,
    kind: Material,
    spec: &crate::lattice::LatticeSpec,
    mat: &MaterialParams,
) -> f64 {
    let (k, rest) = match kind {
        Material::Film => (mat.k_f, spec.lambda),
        Material::Substrate => (mat.k_s, 1.0),
    };
    LATTICE_EDGES
        .iter()
        .map(|xi| 0.5 * k * ((f * xi).norm() - rest).powi(2))
        .sum()
}

/// Deformation gradient of the piecewise-affine interpolation on one
/// triangle. Wrap triangles are unwrapped by the lateral period on both the
/// reference positions and the values (exact for laterally periodic
/// deformations `y = R x + b + sqrt(eps) u` with `R = Id` and periodic `u`).
pub fn triangle_gradient(region: &OccupiedRegion, y: &Deformation, tri: &Triangle) -> Matrix2<f64> {
    let p = region.triangle_positions(tri);
    let l = region.spec().width();
    let mut q = [Vector2::zeros(); 3];
    for j in 0..3 {
        q[j] = y.values[tri.v[j] as usize] + Vector2::new(tri.shift[j] as f64 * l, 0.0);
    }
    let dp = Matrix2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
    let dq = Matrix2::from_columns(&[q[1] - q[0], q[2] - q[0]]);
    dq * dp.try_inverse().expect("reference triangle is nondegenerate")
}

/// Indices of triangles violating the orientation-preserving condition
/// `det(y_2 - y_1, y_3 - y_1) det(i_2 - i_1, i_3 - i_1) >= 0`. Only non-wrap
/// triangles are constrained (the condition applies to mutual nearest
/// neighbors at raw distance `eps`). Reference triangles are ordered
/// positively, so the check reduces to the sign of the deformed determinant.
pub fn orientation_violations(region: &OccupiedRegion, y: &Deformation) -> Vec<usize> {
    let mut out = Vec::new();
    for (t, tri) in region.triangles().iter().enumerate() {
        if tri.shift != [0, 0, 0] {
            continue;
        }
        let a = y.values[tri.v[0] as usize];
        let b = y.values[tri.v[1] as usize];
        let c = y.values[tri.v[2] as usize];
        let det = (b - a).x * (c - a).y - (b - a).y * (c - a).x;
        if det < 0.0 {
            out.push(t);
        }
    }
    out
}

/// Exact analytic gradient of [`elastic_energy`] with respect to each site
/// position.
pub fn elastic_gradient(
    region: &OccupiedRegion,
    y: &Deformation,
    mat: &MaterialParams,
) -> Result<Vec<Vector2<f64>>> {
    y.check(region)?;
    let spec = region.spec();
    let eps = spec.epsilon;
    let mut grad = vec![Vector2::zeros(); region.site_count()];
    for bond in region.bonds() {
        let diff = y.values[bond.a as usize] - y.values[bond.b as usize];
        let len = diff.norm();
        if len == 0.0 {
            continue; // subgradient 0 at the tip of the cone
        }
        let r = len / eps;
        let mut dv = 0.0;
        for from in [bond.a, bond.b] {
            let m = region.materials()[from as usize];
            let term = bond_term(m, bond.wrap != 0, mat, spec);
            dv += term.stiffness * (r - term.rest);
        }
        let force = dv / len * diff;
        grad[bond.a as usize] += force;
        grad[bond.b as usize] -= force;
    }
    Ok(grad)
}

fn lj_value(r: f64, gamma: f64, stiffness: f64, well: f64) -> f64 {
    let a = stiffness * well * well / 72.0;
    let q = (well / r).powi(6);
    a * (q * q - 2.0 * q + 1.0) - gamma
}

/// Renormalized interatomic energy `E_eps(y, h) - m_eps` with Lennard-Jones
/// pair potentials pinned to the harmonic data (value, minimum, curvature).
/// `m_eps = -eps (6 gamma_s #substrate + 6 gamma_f #film)` is the bonding
/// energy of a fully coordinated configuration. With the bottom boundary
/// excluded, the virtual below-floor bonds sit at their wells.
pub fn lj_renormalized_energy(
    region: &OccupiedRegion,
    y: &Deformation,
    mat: &MaterialParams,
) -> Result<f64> {
    y.check(region)?;
    let spec = region.spec();
    let eps = spec.epsilon;
    let mut acc = 0.0;
    for (i, bond) in region.bonds().iter().enumerate() {
        let len = (y.values[bond.a as usize] - y.values[bond.b as usize]).norm();
        if len == 0.0 {
            return Err(Error::ZeroBondLength(i));
        }
        let r = len / eps;
        for from in [bond.a, bond.b] {
            let m = region.materials()[from as usize];
            let term = bond_term(m, bond.wrap != 0, mat, spec);
            acc += eps * lj_value(r, term.gamma, term.stiffness, term.rest);
        }
    }
    // virtual bulk row below the substrate floor: bonds at their wells
    if !spec.include_bottom_boundary {
        for idx in 0..region.site_count() {
            let n_virtual = region.virtual_below_bonds(idx as u32) as f64;
            let gamma = match region.materials()[idx] {
                Material::Film => mat.gamma_f,
                Material::Substrate => mat.gamma_s,
            };
            acc += eps * n_virtual * (-gamma);
        }
    }
    let film = region.film_site_count() as f64;
    let substrate = (region.site_count() - region.film_site_count()) as f64;
    let m_eps = -eps * 6.0 * (mat.gamma_s * substrate + mat.gamma_f * film);
    Ok(acc - m_eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_region, DiscreteProfile, LatticeSpec};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn mat() -> MaterialParams {
        MaterialParams::new(1.3, 0.9, 0.7, 1.1).unwrap()
    }

    fn random_deformation(region: &OccupiedRegion, amp: f64, seed: u64) -> Deformation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Deformation {
            values: region
                .sites()
                .iter()
                .map(|s| {
                    s.position(region.spec())
                        + Vector2::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
                })
                .collect(),
        }
    }

    #[test]
    fn flat_zigzag_surface_identity() {
        let spec = LatticeSpec::new(0.5, 10, 2.0, 1.0).unwrap();
        let profile = DiscreteProfile::flat_zigzag(20, 4);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let s = surface_energy(&region, &m);
        // 40 missing bonds on the top zigzag; substrate fully covered
        assert_relative_eq!(s.surface_film, 40.0 * m.gamma_f * spec.epsilon, max_relative = 1e-14);
        assert_relative_eq!(s.surface_substrate, 0.0, epsilon = 1e-14);
        // equals gamma_f * phi((0,1)) * L
        let phi01 = 4.0 * crate::lattice::SQRT3 / 3.0;
        assert_relative_eq!(
            s.surface_film,
            m.gamma_f * phi01 * spec.width(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn exposed_substrate_surface() {
        let spec = LatticeSpec::new(0.5, 10, 2.0, 1.0).unwrap();
        let region = build_region(&spec, &DiscreteProfile::zero(20)).unwrap();
        let m = mat();
        let s = surface_energy(&region, &m);
        assert_relative_eq!(
            s.surface_substrate,
            40.0 * m.gamma_s * spec.epsilon,
            max_relative = 1e-14
        );
        assert_relative_eq!(s.surface_film, 0.0, epsilon = 1e-14);
        // inclusive mode adds the bottom-row counts
        let spec_incl = spec.clone().with_bottom_boundary(true);
        let region_incl = build_region(&spec_incl, &DiscreteProfile::zero(20)).unwrap();
        let s_incl = surface_energy(&region_incl, &m);
        assert!(s_incl.surface_substrate > s.surface_substrate);
    }

    #[test]
    fn identity_substrate_elastic_zero() {
        let spec = LatticeSpec::new(1.0, 5, 3.0, 1.0).unwrap();
        let region = build_region(&spec, &DiscreteProfile::zero(10)).unwrap();
        let y = Deformation::identity(&region);
        let e = elastic_energy(&region, &y, &mat()).unwrap();
        assert!(e.elastic_substrate.abs() < 1e-22, "{}", e.elastic_substrate);
        assert!(e.elastic_film.abs() < 1e-22);
    }

    #[test]
    fn film_mismatch_identity_energy() {
        let spec = LatticeSpec::new(0.5, 4, 2.0, 1.05).unwrap();
        let profile = DiscreteProfile::flat_zigzag(8, 4);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let y = Deformation::identity(&region);
        let e = elastic_energy(&region, &y, &m).unwrap();
        // expected: every film-origin ordered pair at rest mismatch (1 - lambda)
        // plus the film wrap bonds at |r1 - r2(lambda)|
        let mut expected = 0.0;
        for bond in region.bonds() {
            for from in [bond.a, bond.b] {
                if region.materials()[from as usize] != Material::Film {
                    continue;
                }
                let rest = if bond.wrap != 0 {
                    spec.wrap_rest_film()
                } else {
                    spec.lambda
                };
                let r = if bond.wrap != 0 {
                    spec.wrap_rest_substrate()
                } else {
                    1.0
                };
                expected += spec.epsilon * 0.5 * m.k_f * (r - rest).powi(2);
            }
        }
        assert_relative_eq!(e.elastic_film, expected, max_relative = 1e-12);
        // interior film bonds contribute eps K_f 0.00125 per unordered bond pair
        assert_relative_eq!(
            spec.epsilon * m.k_f * (0.05f64).powi(2) / 2.0 * 2.0,
            spec.epsilon * m.k_f * 0.00125 * 2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(e.elastic_substrate, 0.0, epsilon = 1e-20);
    }

    #[test]
    fn frame_indifference() {
        let spec = LatticeSpec::new(0.5, 3, 1.5, 1.02).unwrap();
        let profile = DiscreteProfile::new(vec![5, 4, 7, 2, 3, 6]);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let y = random_deformation(&region, 0.05, 42);
        let e1 = elastic_energy(&region, &y, &m).unwrap().elastic();
        let q = RigidMotion::new(1.1, Vector2::new(3.0, -2.0));
        let rotated = Deformation {
            values: y.values.iter().map(|v| q.apply(*v)).collect(),
        };
        let e2 = elastic_energy(&region, &rotated, &m).unwrap().elastic();
        assert_relative_eq!(e1, e2, max_relative = 1e-12);
    }

    #[test]
    fn orientation_check_examples() {
        let spec = LatticeSpec::new(1.0, 3, 2.0, 1.0).unwrap();
        let profile = DiscreteProfile::flat_zigzag(6, 3);
        let region = build_region(&spec, &profile).unwrap();
        let y = Deformation::identity(&region);
        assert!(orientation_violations(&region, &y).is_empty());

        let reflected = Deformation {
            values: y.values.iter().map(|v| Vector2::new(v.x, -v.y)).collect(),
        };
        let violations = orientation_violations(&region, &reflected);
        let nonwrap = region
            .triangles()
            .iter()
            .filter(|t| t.shift == [0, 0, 0])
            .count();
        assert_eq!(violations.len(), nonwrap);

        // displace one interior site across the opposite edge of its triangles
        let idx = region.site_index(2, 0).unwrap() as usize;
        let mut bad = y.clone();
        bad.values[idx] += Vector2::new(1.5 * spec.epsilon, 0.0);
        let flagged = orientation_violations(&region, &bad);
        assert!(!flagged.is_empty());
        for t in &flagged {
            assert!(region.triangles()[*t].v.contains(&(idx as u32)));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = LatticeSpec::new(0.5, 2, 1.5, 1.03).unwrap();
        let profile = DiscreteProfile::new(vec![5, 4, 3, 2]);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let y = random_deformation(&region, 0.04, 9);
        let grad = elastic_gradient(&region, &y, &m).unwrap();
        let step = 1e-6 * spec.epsilon;
        let mut worst: f64 = 0.0;
        let scale = grad.iter().map(|g| g.norm()).fold(0.0f64, f64::max);
        for i in 0..region.site_count() {
            for c in 0..2 {
                let mut plus = y.clone();
                plus.values[i][c] += step;
                let mut minus = y.clone();
                minus.values[i][c] -= step;
                let fd = (elastic_energy(&region, &plus, &m).unwrap().elastic()
                    - elastic_energy(&region, &minus, &m).unwrap().elastic())
                    / (2.0 * step);
                worst = worst.max((fd - grad[i][c]).abs());
            }
        }
        assert!(worst / scale < 1e-6, "relative error {}", worst / scale);
        // translation invariance
        let shifted = Deformation {
            values: y.values.iter().map(|v| v + Vector2::new(0.7, -0.3)).collect(),
        };
        let grad2 = elastic_gradient(&region, &shifted, &m).unwrap();
        for (a, b) in grad.iter().zip(&grad2) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        // zero at the global minimizer
        let flat = build_region(
            &LatticeSpec::new(0.5, 2, 1.5, 1.0).unwrap(),
            &DiscreteProfile::zero(4),
        )
        .unwrap();
        let g0 = elastic_gradient(&flat, &Deformation::identity(&flat), &m).unwrap();
        assert!(g0.iter().all(|g| g.norm() < 1e-12));
    }

    #[test]
    fn cell_energy_examples() {
        let spec = LatticeSpec::new(0.5, 3, 1.0, 1.05).unwrap();
        let m = mat();
        let (s, c) = 0.8f64.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        assert!(cell_energy(&rot, Material::Substrate, &spec, &m).abs() < 1e-20);
        // scaled isometry at the film rest length
        let f = spec.lambda * rot;
        assert!(cell_energy(&f, Material::Film, &spec, &m).abs() < 1e-20);
        // diag(1.1, 1): direct evaluation over the lattice edges, and the
        // comparison-potential frame is the same set rotated by 30 degrees
        let spec1 = LatticeSpec::new(0.5, 3, 1.0, 1.0).unwrap();
        let g = Matrix2::new(1.1, 0.0, 0.0, 1.0);
        let direct: f64 = LATTICE_EDGES
            .iter()
            .map(|xi| 0.5 * m.k_s * ((g * xi).norm() - 1.0).powi(2))
            .sum();
        assert_relative_eq!(
            cell_energy(&g, Material::Substrate, &spec1, &m),
            direct,
            max_relative = 1e-14
        );
        let (sn, cn) = (30f64.to_radians()).sin_cos();
        let r30 = Matrix2::new(cn, -sn, sn, cn);
        let w = crate::rigidity::edge_misfit_energy(&(g * r30), 1.0);
        assert_relative_eq!(
            cell_energy(&g, Material::Substrate, &spec1, &m),
            0.5 * m.k_s * w,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cell_decomposition_identity_on_bulk() {
        let spec = LatticeSpec::new(0.25, 4, 1.5, 1.0).unwrap();
        let profile = DiscreteProfile::flat_zigzag(8, 6);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        // smooth periodic displacement keeps the wrap convention exact
        let l = spec.width();
        let y = Deformation {
            values: region
                .sites()
                .iter()
                .map(|s| {
                    let p = s.position(region.spec());
                    let u = Vector2::new(
                        0.03 * (std::f64::consts::TAU * p.x / l).sin(),
                        0.02 * (std::f64::consts::TAU * p.x / l).cos() + 0.01 * p.y,
                    );
                    p + u
                })
                .collect(),
        };
        // count non-wrap triangle membership per bond; wrap bonds follow the
        // raw-distance convention and stay outside the identity
        use std::collections::HashMap;
        let mut tri_count: HashMap<(u32, u32), u32> = HashMap::new();
        let key = |a: u32, b: u32| if a < b { (a, b) } else { (b, a) };
        for tri in region.triangles() {
            if tri.shift != [0, 0, 0] {
                continue;
            }
            for (p, q) in [(0, 1), (1, 2), (0, 2)] {
                *tri_count.entry(key(tri.v[p], tri.v[q])).or_insert(0) += 1;
            }
        }
        // sum of eps * W_cell over the non-wrap triangles
        let mut cell_sum = 0.0;
        for tri in region.triangles() {
            if tri.shift != [0, 0, 0] {
                continue;
            }
            let f = triangle_gradient(&region, &y, tri);
            let kind = if region.materials()[tri.v[0] as usize] == Material::Film
                && region.materials()[tri.v[1] as usize] == Material::Film
                && region.materials()[tri.v[2] as usize] == Material::Film
            {
                Material::Film
            } else if region.materials()[tri.v[0] as usize] == Material::Substrate
                && region.materials()[tri.v[1] as usize] == Material::Substrate
                && region.materials()[tri.v[2] as usize] == Material::Substrate
            {
                Material::Substrate
            } else {
                // mixed triangle: accumulate edge by edge with the convention
                // of the first index
                let p = region.triangle_positions(tri);
                let mut acc = 0.0;
                for (a, b) in [(0usize, 1usize), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)] {
                    let term = bond_term(
                        region.materials()[tri.v[a] as usize],
                        false,
                        &m,
                        &spec,
                    );
                    let edge = (p[b] - p[a]) / spec.epsilon;
                    let img = (f * edge).norm();
                    acc += 0.5 * 0.5 * term.stiffness * (img - term.rest).powi(2);
                }
                cell_sum += spec.epsilon * acc;
                continue;
            };
            cell_sum += spec.epsilon * cell_energy(&f, kind, &spec, &m);
        }
        // combinatorial identity: each bond appears once per containing
        // triangle with half its ordered-pair energy; interior bonds carry
        // full weight (count 2)
        let eps = spec.epsilon;
        let mut bond_sum = 0.0;
        let mut interior_bonds = 0usize;
        for bond in region.bonds() {
            if bond.wrap != 0 {
                continue;
            }
            let count = tri_count.get(&key(bond.a, bond.b)).copied().unwrap_or(0);
            let r = (y.values[bond.a as usize] - y.values[bond.b as usize]).norm() / eps;
            let mut v = 0.0;
            for from in [bond.a, bond.b] {
                let term = bond_term(
                    region.materials()[from as usize],
                    false,
                    &m,
                    &spec,
                );
                v += eps * 0.5 * term.stiffness * (r - term.rest).powi(2);
            }
            bond_sum += 0.5 * count as f64 * v;
            if count == 2 {
                interior_bonds += 1;
            }
        }
        assert!(interior_bonds > 100, "test needs a real bulk");
        assert_relative_eq!(cell_sum, bond_sum, max_relative = 1e-12);
    }

    #[test]
    fn lj_identity_matches_surface_term_exactly() {
        let spec = LatticeSpec::new(0.5, 6, 2.0, 1.0).unwrap();
        let profile = DiscreteProfile::flat_zigzag(12, 3);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let y = Deformation::identity(&region);
        let renorm = lj_renormalized_energy(&region, &y, &m).unwrap();
        let s = surface_energy(&region, &m);
        // all bonds sit at their wells, so only the missing-bond term remains
        assert_relative_eq!(renorm, s.surface(), max_relative = 1e-10);
        // sites with full effective coordination contribute nothing: a deep
        // interior slab check
        let e = elastic_energy(&region, &y, &m).unwrap();
        assert!(e.elastic().abs() < 1e-20);
    }

    #[test]
    fn lj_zero_bond_length_rejected() {
        let spec = LatticeSpec::new(0.5, 2, 1.0, 1.0).unwrap();
        let region = build_region(&spec, &DiscreteProfile::zero(4)).unwrap();
        let mut y = Deformation::identity(&region);
        y.values[1] = y.values[0];
        assert!(matches!(
            lj_renormalized_energy(&region, &y, &mat()),
            Err(Error::ZeroBondLength(_))
        ));
    }

    #[test]
    fn lj_gross_violation_diverges_from_harmonic() {
        let spec = LatticeSpec::new(0.5, 4, 1.5, 1.0).unwrap();
        let region = build_region(&spec, &DiscreteProfile::zero(8)).unwrap();
        let m = mat();
        // stretch one bond threefold
        let mut y = Deformation::identity(&region);
        let b = region.bonds()[0];
        let dir = (y.values[b.b as usize] - y.values[b.a as usize]).normalize();
        y.values[b.b as usize] += 2.0 * spec.epsilon * dir;
        let renorm = lj_renormalized_energy(&region, &y, &m).unwrap();
        let harmonic = total_energy(&region, &y, &m).unwrap().total();
        assert!((renorm - harmonic).abs() > 0.1 * spec.epsilon * m.k_s);
    }
}
