//! Elastic relaxation at fixed profile and Metropolis profile annealing under
//! the exact volume constraint.

use nalgebra::Vector2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    elastic_energy, elastic_gradient, orientation_violations, surface_energy, total_energy,
    Deformation, EnergyBreakdown, MaterialParams,
};
use crate::error::{Error, Result};
use crate::lattice::{build_region, DiscreteProfile, LatticeSpec, OccupiedRegion};

#[derive(Debug, Clone)]
pub struct RelaxOptions {
    /// Gradient tolerance; defaults to `1e-10 * eps * max(K_f, K_s)`.
    /// Convergence is declared at `|g| <= tol * sqrt(#sites)`.
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub memory: usize,
    pub keep_trace: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iters: 2000,
            memory: 8,
            keep_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct RelaxOutcome {
    pub deformation: Deformation,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub trace: Vec<TraceRow>,
}

fn flat_norm(g: &[Vector2<f64>]) -> f64 {
    g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn dot(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// L-BFGS descent on the elastic energy with monotone Armijo line search.
/// Every accepted iterate passes the orientation check (the step backtracks on
/// violation); the translation null space is pinned by fixing the centroid of
/// the substrate bottom-row images.
pub fn minimize_elastic(
    region: &OccupiedRegion,
    y0: &Deformation,
    mat: &MaterialParams,
    options: &RelaxOptions,
) -> Result<RelaxOutcome> {
    y0.check(region)?;
    let violations = orientation_violations(region, y0);
    if !violations.is_empty() {
        return Err(Error::OrientationViolation(violations.len()));
    }
    let spec = region.spec();
    let tol = options
        .tol
        .unwrap_or(1e-10 * spec.epsilon * mat.k_f.max(mat.k_s));
    let threshold = tol * (region.site_count() as f64).sqrt();

    let pin_rows = region.bottom_row_indices();
    let pin_target = if pin_rows.is_empty() {
        None
    } else {
        Some(
            pin_rows
                .iter()
                .map(|&i| y0.values[i as usize])
                .sum::<Vector2<f64>>()
                / pin_rows.len() as f64,
        )
    };
    let repin = |y: &mut Deformation| {
        if let Some(target) = pin_target {
            let centroid = pin_rows
                .iter()
                .map(|&i| y.values[i as usize])
                .sum::<Vector2<f64>>()
                / pin_rows.len() as f64;
            let shift = target - centroid;
            for v in y.values.iter_mut() {
                *v += shift;
            }
        }
    };

    let mut y = y0.clone();
    let mut f = elastic_energy(region, &y, mat)?.elastic();
    let mut g = elastic_gradient(region, &y, mat)?;
    let mut gnorm = flat_norm(&g);
    let mut trace = Vec::new();
    let mut pairs: std::collections::VecDeque<(Vec<Vector2<f64>>, Vec<Vector2<f64>>, f64)> =
        std::collections::VecDeque::new();
    let mut iterations = 0usize;
    let mut converged = gnorm <= threshold;

    while !converged && iterations < options.max_iters {
        // two-loop recursion
        let mut q: Vec<Vector2<f64>> = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, yv, rho) in pairs.iter().rev() {
            let alpha = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(yv) {
                *qi -= alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some((s, yv, _)) = pairs.back() {
            let scale = dot(s, yv) / dot(yv, yv).max(1e-300);
            for qi in q.iter_mut() {
                *qi *= scale;
            }
        }
        for ((s, yv, rho), alpha) in pairs.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(yv, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (alpha - beta) * si;
            }
        }
        let mut direction: Vec<Vector2<f64>> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            pairs.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        // Armijo backtracking with orientation feasibility
        let mut step = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = Deformation {
                values: y
                    .values
                    .iter()
                    .zip(&direction)
                    .map(|(v, d)| v + step * d)
                    .collect(),
            };
            if orientation_violations(region, &candidate).is_empty() {
                let fc = elastic_energy(region, &candidate, mat)?.elastic();
                if fc <= f + 1e-4 * step * slope {
                    accepted = Some((candidate, fc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((mut next, fnext)) = accepted else {
            break; // line search exhausted; report partial result
        };
        repin(&mut next);
        let gnext = elastic_gradient(region, &next, mat)?;
        let s: Vec<Vector2<f64>> = next
            .values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| a - b)
            .collect();
        let dg: Vec<Vector2<f64>> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &dg);
        if sy > 1e-300 {
            if pairs.len() == options.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, dg, 1.0 / sy));
        }
        y = next;
        f = fnext;
        g = gnext;
        gnorm = flat_norm(&g);
        iterations += 1;
        if options.keep_trace {
            trace.push(TraceRow {
                iteration: iterations,
                energy: f,
                gradient_norm: gnorm,
                step,
            });
        }
        converged = gnorm <= threshold;
    }

    let energy = total_energy(region, &y, mat)?;
    Ok(RelaxOutcome {
        deformation: y,
        energy,
        iterations,
        converged,
        gradient_norm: gnorm,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct AnnealSchedule {
    pub temperatures: Vec<f64>,
    pub moves_per_temperature: usize,
    pub seed: u64,
    /// Score proposals by surface plus relaxed elastic energy instead of
    /// surface energy alone.
    pub score_elastic: bool,
}

impl AnnealSchedule {
    pub fn geometric(t0: f64, t1: f64, steps: usize, moves: usize, seed: u64) -> Self {
        let temperatures = (0..steps)
            .map(|i| {
                if steps == 1 {
                    t0
                } else {
                    t0 * (t1 / t0).powf(i as f64 / (steps - 1) as f64)
                }
            })
            .collect();
        Self {
            temperatures,
            moves_per_temperature: moves,
            seed,
            score_elastic: false,
        }
    }
}

/// Even columns have two encodings of "no film atoms" (`n = 0` and `n = 1`);
/// the annealer works on the canonical form `n = 1` so single-atom transfers
/// always change a column by exactly one full step.
pub fn canonicalize_empty_columns(profile: &DiscreteProfile) -> DiscreteProfile {
    let heights = profile
        .half_heights
        .iter()
        .enumerate()
        .map(|(m, &n)| if m % 2 == 0 && n == 0 { 1 } else { n })
        .collect();
    DiscreteProfile::new(heights)
}

fn score(
    spec: &LatticeSpec,
    mat: &MaterialParams,
    profile: &DiscreteProfile,
    elastic: bool,
) -> Result<(f64, EnergyBreakdown, Deformation)> {
    let region = build_region(spec, profile)?;
    let y = Deformation::identity(&region);
    if elastic {
        let outcome = minimize_elastic(&region, &y, mat, &RelaxOptions::default())?;
        Ok((
            outcome.energy.total(),
            outcome.energy,
            outcome.deformation,
        ))
    } else {
        let mut e = surface_energy(&region, mat);
        let el = elastic_energy(&region, &y, mat)?;
        e.elastic_film = el.elastic_film;
        e.elastic_substrate = el.elastic_substrate;
        Ok((e.surface(), e, y))
    }
}

/// Metropolis annealing over volume-preserving single-atom transfers between
/// columns. The proposal picks an ordered column pair uniformly, so the
/// proposal distribution is symmetric. Returns the lowest-score state visited.
pub fn anneal_profile(
    spec: &LatticeSpec,
    mat: &MaterialParams,
    initial: &DiscreteProfile,
    volume_units: u64,
    schedule: &AnnealSchedule,
) -> Result<(DiscreteProfile, Deformation, EnergyBreakdown)> {
    if schedule.temperatures.is_empty() {
        return Err(Error::EmptySchedule);
    }
    initial.check_admissible()?;
    let mut state = canonicalize_empty_columns(initial);
    if state.volume_units() != volume_units {
        return Err(Error::InvalidSpec(format!(
            "initial volume {} (canonical) does not match the target {volume_units}",
            state.volume_units()
        )));
    }
    let cols = spec.columns() as usize;
    if state.half_heights.len() != cols {
        return Err(Error::ProfileLength {
            expected: cols,
            got: state.half_heights.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let (mut current_score, mut current_energy, mut current_y) =
        score(spec, mat, &state, schedule.score_elastic)?;
    let mut best = (state.clone(), current_y.clone(), current_energy, current_score);

    let has_atom = |heights: &[u32], m: usize| -> bool {
        if m % 2 == 0 {
            heights[m] >= 3
        } else {
            heights[m] >= 2
        }
    };

    for &t in &schedule.temperatures {
        for _ in 0..schedule.moves_per_temperature {
            let src = rng.gen_range(0..cols);
            let mut dst = rng.gen_range(0..cols - 1);
            if dst >= src {
                dst += 1;
            }
            if !has_atom(&state.half_heights, src) {
                continue;
            }
            let mut proposal = state.clone();
            proposal.half_heights[src] -= 2;
            proposal.half_heights[dst] += 2;
            let (s, e, y) = score(spec, mat, &proposal, schedule.score_elastic)?;
            let delta = s - current_score;
            let accept = if delta < 0.0 {
                true
            } else if t > 0.0 {
                rng.gen::<f64>() < (-delta / t).exp()
            } else {
                false
            };
            if accept {
                state = proposal;
                current_score = s;
                current_energy = e;
                current_y = y;
                if current_score < best.3 {
                    best = (state.clone(), current_y.clone(), current_energy, current_score);
                }
            }
        }
    }
    Ok((best.0, best.1, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn mat() -> MaterialParams {
        MaterialParams::new(1.0, 1.2, 0.8, 1.0).unwrap()
    }

    #[test]
    fn substrate_identity_converges_immediately() {
        let spec = LatticeSpec::new(0.5, 3, 2.0, 1.0).unwrap();
        let region = build_region(&spec, &DiscreteProfile::zero(6)).unwrap();
        let y = Deformation::identity(&region);
        let out = minimize_elastic(&region, &y, &mat(), &RelaxOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert!(out.energy.elastic() < 1e-20);
    }

    #[test]
    fn relax_recovers_minimum_from_perturbation() {
        let spec = LatticeSpec::new(0.5, 3, 1.5, 1.0).unwrap();
        let profile = DiscreteProfile::flat_zigzag(6, 3);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut y = Deformation::identity(&region);
        for v in y.values.iter_mut() {
            *v += Vector2::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
        }
        let start = elastic_energy(&region, &y, &m).unwrap().elastic();
        let out = minimize_elastic(&region, &y, &m, &RelaxOptions::default()).unwrap();
        assert!(out.converged, "gradient norm {}", out.gradient_norm);
        assert!(out.energy.elastic() <= start);
        assert!(out.energy.elastic() < 1e-12, "residual {}", out.energy.elastic());
        // pinning: bottom-row centroid preserved
        let rows = region.bottom_row_indices();
        let c0: Vector2<f64> = rows.iter().map(|&i| y.values[i as usize]).sum::<Vector2<f64>>()
            / rows.len() as f64;
        let c1: Vector2<f64> = rows
            .iter()
            .map(|&i| out.deformation.values[i as usize])
            .sum::<Vector2<f64>>()
            / rows.len() as f64;
        assert_relative_eq!(c0, c1, epsilon = 1e-9);
    }

    #[test]
    fn relax_monotone_and_multistart_agree() {
        let eps = 0.25;
        let delta = 0.4;
        let spec = LatticeSpec::new(eps, 3, 1.0, 1.0 + delta * eps.sqrt()).unwrap();
        let profile = DiscreteProfile::flat_zigzag(6, 3);
        let region = build_region(&spec, &profile).unwrap();
        let m = mat();
        let opts = RelaxOptions {
            tol: Some(1e-8),
            keep_trace: true,
            ..Default::default()
        };
        let out1 = minimize_elastic(&region, &Deformation::identity(&region), &m, &opts).unwrap();
        for w in out1.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut y2 = Deformation::identity(&region);
        for v in y2.values.iter_mut() {
            *v += Vector2::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
        }
        let out2 = minimize_elastic(&region, &y2, &m, &opts).unwrap();
        assert!(out1.converged && out2.converged);
        assert_relative_eq!(
            out1.energy.elastic(),
            out2.energy.elastic(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn relax_rejects_bad_orientation() {
        let spec = LatticeSpec::new(0.5, 2, 1.0, 1.0).unwrap();
        let region = build_region(&spec, &DiscreteProfile::zero(4)).unwrap();
        let y = Deformation {
            values: region
                .sites()
                .iter()
                .map(|s| {
                    let p = s.position(&spec);
                    Vector2::new(p.x, -p.y)
                })
                .collect(),
        };
        assert!(matches!(
            minimize_elastic(&region, &y, &mat(), &RelaxOptions::default()),
            Err(Error::OrientationViolation(_))
        ));
    }

    #[test]
    fn anneal_preserves_volume_and_idles_at_zero_temperature() {
        let spec = LatticeSpec::new(0.5, 2, 1.0, 1.0).unwrap();
        let m = MaterialParams::new(1.0, 1.0, 1.0, 2.0).unwrap(); // wetting
        // 4 atoms stacked on one odd column
        let initial = DiscreteProfile::new(vec![1, 8, 1, 0]);
        let canonical = canonicalize_empty_columns(&initial);
        let v = canonical.volume_units();
        let schedule = AnnealSchedule::geometric(0.5, 1e-3, 6, 400, 42);
        let (out, _, _) = anneal_profile(&spec, &m, &initial, v, &schedule).unwrap();
        assert_eq!(out.volume_units(), v);
        out.check_admissible().unwrap();

        // zero temperature from the wetting ground layer: unchanged
        let layer = DiscreteProfile::new(vec![3, 2, 3, 2]);
        let vl = layer.volume_units();
        let zero = AnnealSchedule {
            temperatures: vec![0.0],
            moves_per_temperature: 300,
            seed: 7,
            score_elastic: false,
        };
        let (kept, _, _) = anneal_profile(&spec, &m, &layer, vl, &zero).unwrap();
        assert_eq!(kept.half_heights, layer.half_heights);

        let empty_schedule = AnnealSchedule {
            temperatures: vec![],
            moves_per_temperature: 1,
            seed: 0,
            score_elastic: false,
        };
        assert!(matches!(
            anneal_profile(&spec, &m, &layer, vl, &empty_schedule),
            Err(Error::EmptySchedule)
        ));
    }

    #[test]
    fn atom_move_is_reversible() {
        let mut a = DiscreteProfile::new(vec![3, 2, 1, 4]);
        let before = a.clone();
        a.half_heights[1] -= 2;
        a.half_heights[3] += 2;
        a.half_heights[3] -= 2;
        a.half_heights[1] += 2;
        assert_eq!(a.half_heights, before.half_heights);
    }
}
