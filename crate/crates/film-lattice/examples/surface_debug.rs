use film_lattice::approx::{lattice_volume_match, recovery_profile};
use film_lattice::continuum::{surface_energy_continuum, ContinuumProfile};
use film_lattice::energy::{surface_energy, MaterialParams};
use film_lattice::lattice::{build_region, LatticeSpec, Material, SQRT3};

fn main() {
    let l = SQRT3;
    let h = ContinuumProfile::new(
        l,
        vec![
            (0.0, 0.35),
            (0.35 * l, 0.55),
            (0.65 * l, 0.55),
            (l, 0.35),
        ],
        Vec::new(),
    )
    .unwrap();
    let mat = MaterialParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
    println!("continuum E_S = {}", surface_energy_continuum(&h, &mat));
    for k in [16u32, 32, 64] {
        let eps = l / (SQRT3 * k as f64);
        let spec = LatticeSpec::new(eps, k, 0.35, 1.0).unwrap();
        let rec = recovery_profile(&h, &spec, &mat).unwrap();
        let region = build_region(&spec, &rec).unwrap();
        let e = surface_energy(&region, &mat);
        // count missing bonds per column (film)
        let mut per_col = vec![0u32; spec.columns() as usize];
        for (i, site) in region.sites().iter().enumerate() {
            if region.materials()[i] == Material::Film {
                per_col[site.column as usize] += region.missing_bonds(i as u32) as u32;
            }
        }
        let total: u32 = per_col.iter().sum();
        println!(
            "k={k}: no-match E_S = {:.4} (bonds {total}, 4k = {}), per-col: {:?}",
            e.surface(),
            4 * k,
            &per_col[..per_col.len().min(40)]
        );
        // with volume matching
        let unit = SQRT3 / 4.0 * eps * eps;
        let target_raw = (h.volume() / unit).round() as i64;
        let cur = rec.volume_units() as i64;
        let target = if (target_raw - cur) % 2 != 0 { target_raw + 1 } else { target_raw } as u64;
        let matched = lattice_volume_match(&rec, target, &spec).unwrap();
        let region2 = build_region(&spec, &matched).unwrap();
        let e2 = surface_energy(&region2, &mat);
        println!("         matched E_S = {:.4}  (delta units = {})", e2.surface(), target as i64 - cur);
    }
}
