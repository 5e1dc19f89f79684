//! Command implementations: each produces deterministic text artifacts.

use anyhow::{bail, Context, Result};
use nalgebra::Vector2;

use film_lattice::approx::{
    convergence_report, lattice_volume_match, rebalance_parameters,
    recovery_deformation, recovery_profile, volume_rebalance, yosida_transform, ConvergenceItem,
};
use film_lattice::continuum::{
    elastic_energy_continuum, surface_energy_continuum, surface_tension, ContinuumParams, DisplacementField,
};
use film_lattice::energy::{lj_renormalized_energy, total_energy, Deformation};
use film_lattice::lattice::{build_region, LatticeSpec, SQRT3};
use film_lattice::relax::{anneal_profile, minimize_elastic, AnnealSchedule, RelaxOptions};
use film_lattice::rigidity::{rigidity_probe, Rect};
use film_lattice::serialize;

use crate::config::{Config, FieldSource, PotentialMode};

/// Length of the shortest lattice vector parallel to `tau_hat`, searched over
/// small integer combinations of the two basis bonds.
fn lattice_face_period(eps: f64, tau_hat: Vector2<f64>) -> Option<f64> {
    let u1 = Vector2::new(0.5 * SQRT3, 0.5);
    let u2 = Vector2::new(0.0, 1.0);
    let mut best: Option<f64> = None;
    for a in -6i32..=6 {
        for b in -6i32..=6 {
            if a == 0 && b == 0 {
                continue;
            }
            let v = a as f64 * u1 + b as f64 * u2;
            let cross = (v.x * tau_hat.y - v.y * tau_hat.x).abs();
            if cross < 1e-12 * v.norm() && v.dot(&tau_hat) > 0.0 {
                let len = eps * v.norm();
                best = Some(best.map_or(len, |cur: f64| cur.min(len)));
            }
        }
    }
    best
}

/// Missing-bond energy density per unit boundary length of the exact
/// half-plane `{x . nu <= c}`, counted over a window of the requested width
/// along the face. Neighbor membership is decided by the half-plane predicate
/// itself, so the window has no end effects.
pub fn half_plane_missing_bond_density(eps: f64, nu: Vector2<f64>, window_columns: u32) -> f64 {
    let nu_hat = nu / nu.norm();
    let tau_hat = Vector2::new(-nu_hat.y, nu_hat.x);
    let mut span = window_columns as f64 * 0.5 * SQRT3 * eps;
    // snap the window to whole face periods when the tangent is a lattice
    // direction, so lattice-rational faces count exactly
    if let Some(period) = lattice_face_period(eps, tau_hat) {
        span = (span / period).round().max(1.0) * period;
    }
    let c = 0.3 * eps; // keep lattice points off the line

    let offsets = [
        Vector2::new(0.0, eps),
        Vector2::new(0.0, -eps),
        Vector2::new(0.5 * SQRT3 * eps, 0.5 * eps),
        Vector2::new(0.5 * SQRT3 * eps, -0.5 * eps),
        Vector2::new(-0.5 * SQRT3 * eps, 0.5 * eps),
        Vector2::new(-0.5 * SQRT3 * eps, -0.5 * eps),
    ];

    // bounding box of the band {c - 2.5 eps <= p.nu <= c, 0 <= t <= span}
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &t in &[0.0, span] {
        for &s in &[-2.5 * eps, 0.0] {
            let p = c * nu_hat + t * tau_hat + s * nu_hat;
            x_min = x_min.min(p.x);
            x_max = x_max.max(p.x);
            y_min = y_min.min(p.y);
            y_max = y_max.max(p.y);
        }
    }
    let margin = 2.0 * eps;
    let col_w = 0.5 * SQRT3 * eps;
    let m_lo = ((x_min - margin) / col_w - 0.5).floor() as i64;
    let m_hi = ((x_max + margin) / col_w - 0.5).ceil() as i64;

    let mut missing_total = 0u64;
    for m in m_lo..=m_hi {
        let x = col_w * (m as f64 + 0.5);
        let n_lo = ((y_min - margin) / eps - m as f64 / 2.0).floor() as i64;
        let n_hi = ((y_max + margin) / eps - m as f64 / 2.0).ceil() as i64;
        for n in n_lo..=n_hi {
            let p = Vector2::new(x, eps * (m as f64 / 2.0 + n as f64));
            let depth = p.dot(&nu_hat) - c;
            if depth > 0.0 || depth < -1.5 * eps {
                continue;
            }
            let t = p.dot(&tau_hat);
            if t < 0.0 || t >= span {
                continue;
            }
            for off in &offsets {
                if (p + off).dot(&nu_hat) > c {
                    missing_total += 1;
                }
            }
        }
    }
    eps * missing_total as f64 / span
}

fn resolve_normal(cfg: &Config) -> Result<Vector2<f64>> {
    let section = cfg
        .surface_oracle
        .as_ref()
        .context("config needs a [surface_oracle] section")?;
    match (&section.normal, &section.normal_lattice) {
        (Some(n), None) => {
            if n[0] == 0 && n[1] == 0 {
                bail!("normal must be nonzero");
            }
            Ok(Vector2::new(n[0] as f64, n[1] as f64))
        }
        (None, Some(ab)) => {
            if ab[0] == 0 && ab[1] == 0 {
                bail!("normal_lattice must be nonzero");
            }
            let tau = ab[0] as f64 * Vector2::new(0.5 * SQRT3, 0.5)
                + ab[1] as f64 * Vector2::new(0.0, 1.0);
            Ok(Vector2::new(-tau.y, tau.x))
        }
        (Some(_), Some(_)) => bail!("give either `normal` or `normal_lattice`, not both"),
        (None, None) => bail!("surface_oracle needs `normal` or `normal_lattice`"),
    }
}

pub fn cmd_surface_oracle(cfg: &Config, eps_override: Option<Vec<f64>>) -> Result<String> {
    let section = cfg
        .surface_oracle
        .as_ref()
        .context("config needs a [surface_oracle] section")?;
    let nu = resolve_normal(cfg)?;
    let eps_list = eps_override.unwrap_or_else(|| section.eps_list.clone());
    if eps_list.is_empty() {
        bail!("surface-oracle needs a nonempty eps list (config eps_list or --eps-list)");
    }
    let phi = surface_tension(nu / nu.norm());
    let mut out = String::from("epsilon,window_columns,density,phi,rel_error\n");
    for &eps in &eps_list {
        if !(eps > 0.0) {
            bail!("epsilon must be positive, got {eps}");
        }
        let density = half_plane_missing_bond_density(eps, nu, section.window_columns);
        let rel = (density - phi).abs() / phi;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            eps, section.window_columns, density, phi, rel
        ));
    }
    Ok(out)
}

fn load_deformation(
    cfg: &Config,
    region: &film_lattice::lattice::OccupiedRegion,
) -> Result<Deformation> {
    match cfg.deformation.as_ref().map(|d| d.source.as_str()) {
        None | Some("identity") => Ok(Deformation::identity(region)),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading deformation {path}"))?;
            Ok(serialize::deformation_from_csv(region, &text)?)
        }
    }
}

pub fn cmd_energy(cfg: &Config) -> Result<String> {
    let spec = cfg.lattice_spec()?;
    let profile = cfg.discrete_profile()?;
    let mat = cfg.materials()?;
    let region = build_region(&spec, &profile)?;
    let y = load_deformation(cfg, &region)?;
    let breakdown = total_energy(&region, &y, &mat)?;
    let mut out = serialize::breakdown_to_kv(&breakdown);
    if cfg.potential == PotentialMode::LennardJones {
        let renorm = lj_renormalized_energy(&region, &y, &mat)?;
        out.push_str(&format!("renormalized_lj = {renorm}\n"));
    }
    Ok(out)
}

pub struct RelaxArtifacts {
    pub report: String,
    pub deformation: String,
    pub trace: Option<String>,
}

pub fn cmd_relax(cfg: &Config) -> Result<RelaxArtifacts> {
    let spec = cfg.lattice_spec()?;
    let profile = cfg.discrete_profile()?;
    let mat = cfg.materials()?;
    let region = build_region(&spec, &profile)?;
    let y0 = load_deformation(cfg, &region)?;
    let section = cfg.relax_options.as_ref();
    let options = RelaxOptions {
        tol: section.and_then(|s| s.tol),
        max_iters: section.and_then(|s| s.max_iters).unwrap_or(2000),
        keep_trace: section.map(|s| s.trace).unwrap_or(false),
        ..Default::default()
    };
    let outcome = minimize_elastic(&region, &y0, &mat, &options)?;
    let mut report = serialize::breakdown_to_kv(&outcome.energy);
    report.push_str(&format!(
        "iterations = {}\nconverged = {}\ngradient_norm = {}\n",
        outcome.iterations, outcome.converged, outcome.gradient_norm
    ));
    let deformation = serialize::deformation_to_csv(&region, &outcome.deformation);
    let trace = options.keep_trace.then(|| {
        let mut t = String::from("iteration,energy,gradient_norm,step\n");
        for row in &outcome.trace {
            t.push_str(&format!(
                "{},{},{},{}\n",
                row.iteration, row.energy, row.gradient_norm, row.step
            ));
        }
        t
    });
    Ok(RelaxArtifacts {
        report,
        deformation,
        trace,
    })
}

pub fn cmd_rigidity_probe(cfg: &Config, seed: u64) -> Result<String> {
    let spec = cfg.lattice_spec()?;
    let profile = cfg.discrete_profile()?;
    let region = build_region(&spec, &profile)?;
    let y = if cfg.deformation.is_some() {
        load_deformation(cfg, &region)?
    } else {
        // y = frame + sqrt(eps) u with the configured field
        let field = cfg.field_source(spec.width())?;
        recovery_deformation(&region, |p| field.eval(p), cfg.frame())?
    };
    let rect = cfg.probe.as_ref().and_then(|p| {
        match (p.x_min, p.x_max, p.y_min, p.y_max) {
            (Some(x_min), Some(x_max), Some(y_min), Some(y_max)) => Some(Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            }),
            _ => None,
        }
    });
    let report = rigidity_probe(&region, &y, rect)?;
    Ok(format!(
        "sup_ratio = {}\nfitted_constant = {}\nsample_count = {}\nseed = {}\ndist2_integral = {}\ndeviation_integral = {}\n",
        report.sup_ratio,
        report.fitted_constant,
        report.triangle_count,
        seed,
        report.dist2_integral,
        report.deviation_integral
    ))
}

pub fn cmd_anneal(cfg: &Config, seed: u64) -> Result<String> {
    let spec = cfg.lattice_spec()?;
    let profile = cfg.discrete_profile()?;
    let mat = cfg.materials()?;
    let section = cfg.anneal.as_ref().context("config needs an [anneal] section")?;
    let mut schedule = AnnealSchedule::geometric(
        section.t0,
        section.t1,
        section.steps,
        section.moves,
        seed,
    );
    schedule.score_elastic = section.score_elastic;
    let canonical = film_lattice::relax::canonicalize_empty_columns(&profile);
    let target = canonical.volume_units();
    let (final_profile, _, energy) = anneal_profile(&spec, &mat, &profile, target, &schedule)?;
    let mut out = serialize::breakdown_to_kv(&energy);
    out.push_str(&format!(
        "volume_units = {}\natoms = {}\nseed = {}\nhalf_heights = {:?}\n",
        final_profile.volume_units(),
        final_profile.atom_count(),
        seed,
        final_profile.half_heights
    ));
    Ok(out)
}

pub fn cmd_yosida(cfg: &Config) -> Result<String> {
    let h = cfg.continuum_profile()?;
    let mat = cfg.materials()?;
    let section = cfg.yosida.as_ref().context("config needs a [yosida] section")?;
    let mut out = String::from("lambda,e_surface,volume,lipschitz\n");
    for &lam in &section.lambdas {
        let transformed = yosida_transform(&h, lam)?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            lam,
            surface_energy_continuum(&transformed, &mat),
            transformed.volume(),
            transformed.lipschitz_constant().unwrap_or(f64::NAN)
        ));
    }
    Ok(out)
}

pub fn cmd_rebalance(cfg: &Config) -> Result<String> {
    let h = cfg.continuum_profile()?;
    let section = cfg
        .rebalance
        .as_ref()
        .context("config needs a [rebalance] section")?;
    let out_profile = volume_rebalance(&h, section.target_volume, section.beta)?;
    let (lam, eps_n) = rebalance_parameters(&h, section.target_volume, section.beta)?;
    let mut out = serialize::continuum_profile_to_toml(&out_profile);
    out.push_str(&format!(
        "lambda_n = {}\neps_n = {}\nvolume_in = {}\nvolume_out = {}\n",
        lam,
        eps_n,
        h.volume(),
        out_profile.volume()
    ));
    Ok(out)
}

/// Round the target volume to representable half-step units with a reachable
/// (even) delta from the recovery profile.
fn representable_target(v: f64, unit: f64, current: u64) -> u64 {
    let raw = (v / unit).round().max(0.0) as i64;
    let delta = raw - current as i64;
    let raw = if delta.rem_euclid(2) != 0 {
        // choose the even-delta neighbor closest to v
        let lo = raw - 1;
        let hi = raw + 1;
        if (lo as f64 * unit - v).abs() <= (hi as f64 * unit - v).abs() && lo >= 0 {
            lo
        } else {
            hi
        }
    } else {
        raw
    };
    raw.max(0) as u64
}

pub fn cmd_recovery(cfg: &Config, k_override: Option<Vec<u32>>) -> Result<String> {
    let h = cfg.continuum_profile()?;
    let mat = cfg.materials()?;
    let frame = cfg.frame();
    let section = cfg
        .recovery
        .as_ref()
        .context("config needs a [recovery] section")?;
    let k_list = k_override.unwrap_or_else(|| section.k_list.clone());
    if k_list.is_empty() {
        bail!("recovery needs a nonempty k list");
    }
    let l = h.period();
    let depth = cfg
        .lattice
        .as_ref()
        .context("config needs a [lattice] section for the substrate depth")?
        .substrate_depth;
    let include_bottom = cfg.lattice.as_ref().map(|s| s.include_bottom_boundary).unwrap_or(false);

    let volume = h.volume();
    if let Some(v) = section.volume {
        if (v - volume).abs() > 1e-9 * v.abs().max(1.0) {
            bail!("config volume {v} does not match the profile volume {volume}");
        }
    }

    // continuum reference energy
    let field = cfg.field_source(l)?;
    let resolution = section.mesh_resolution.unwrap_or(l / 512.0);
    let mesh = match &field {
        FieldSource::Analytic(f) => DisplacementField::sample(&h, depth, resolution, f)?,
        FieldSource::Mesh(m) => m.clone(),
    };
    let params = ContinuumParams {
        delta: cfg.delta,
        frame,
        materials: mat,
    };
    let e_surface_c = surface_energy_continuum(&h, &mat);
    let e_elastic_c = elastic_energy_continuum(&h, &mesh, &params)?;
    let e_total_c = e_surface_c + e_elastic_c;

    let mut items = Vec::new();
    for &k in &k_list {
        if k == 0 {
            bail!("k must be positive");
        }
        let eps = l / (SQRT3 * k as f64);
        let lambda = 1.0 + cfg.delta * eps.sqrt();
        let spec = LatticeSpec::new(eps, k, depth, lambda)?.with_bottom_boundary(include_bottom);
        let recovered = recovery_profile(&h, &spec, &mat)?;
        let unit = SQRT3 / 4.0 * eps * eps;
        let target = representable_target(volume, unit, recovered.volume_units());
        let matched = lattice_volume_match(&recovered, target, &spec)?;
        let region = build_region(&spec, &matched)?;
        let deformation = recovery_deformation(&region, |p| field.eval(p), frame)?;
        items.push(ConvergenceItem {
            spec,
            profile: matched,
            deformation,
        });
    }
    let limit_u = |p| field.eval(p).unwrap_or_default();
    let rows = convergence_report(&items, &h, frame, &limit_u, &mat)?;

    let mut out = String::from(
        "epsilon,e_surface_discrete,e_elastic_discrete,e_total_discrete,e_surface_continuum,e_elastic_continuum,e_total_continuum,gap_abs,gap_rel,hausdorff,l2_y,l2_u\n",
    );
    for row in &rows {
        let gap = (row.e_total - e_total_c).abs();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.epsilon,
            row.e_surface,
            row.e_elastic,
            row.e_total,
            e_surface_c,
            e_elastic_c,
            e_total_c,
            gap,
            gap / e_total_c.abs().max(1e-300),
            row.hausdorff,
            row.l2_y,
            row.l2_u
        ));
    }
    Ok(out)
}
