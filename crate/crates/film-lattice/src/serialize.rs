//! Text documents: profile files, deformation tables, and flat key-value
//! energy reports. Heights round-trip as integers; floats use the shortest
//! round-trip representation.

use serde::{Deserialize, Serialize};

use crate::continuum::{ContinuumProfile, Cut};
use crate::energy::{Deformation, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::lattice::{DiscreteProfile, LatticeSpec, OccupiedRegion, SiteId};

#[derive(Debug, Serialize, Deserialize)]
struct ProfileDocument {
    epsilon: f64,
    k: u32,
    substrate_depth: f64,
    lambda: f64,
    #[serde(default)]
    include_bottom_boundary: bool,
    half_heights: Vec<u32>,
}

pub fn profile_to_toml(spec: &LatticeSpec, profile: &DiscreteProfile) -> String {
    let doc = ProfileDocument {
        epsilon: spec.epsilon,
        k: spec.k,
        substrate_depth: spec.substrate_depth,
        lambda: spec.lambda,
        include_bottom_boundary: spec.include_bottom_boundary,
        half_heights: profile.half_heights.clone(),
    };
    toml::to_string(&doc).expect("profile document serializes")
}

pub fn profile_from_toml(text: &str) -> Result<(LatticeSpec, DiscreteProfile)> {
    let doc: ProfileDocument =
        toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    let spec = LatticeSpec::new(doc.epsilon, doc.k, doc.substrate_depth, doc.lambda)?
        .with_bottom_boundary(doc.include_bottom_boundary);
    let profile = DiscreteProfile::new(doc.half_heights);
    profile.check_admissible()?;
    if profile.half_heights.len() != spec.columns() as usize {
        return Err(Error::ProfileLength {
            expected: spec.columns() as usize,
            got: profile.half_heights.len(),
        });
    }
    Ok((spec, profile))
}

#[derive(Debug, Serialize, Deserialize)]
struct ContinuumDocument {
    period: f64,
    breakpoints: Vec<(f64, f64)>,
    #[serde(default)]
    cuts: Vec<(f64, f64, f64)>,
}

pub fn continuum_profile_to_toml(profile: &ContinuumProfile) -> String {
    let doc = ContinuumDocument {
        period: profile.period(),
        breakpoints: profile.breakpoints().to_vec(),
        cuts: profile
            .cuts()
            .iter()
            .map(|c| (c.x, c.y_low, c.y_high))
            .collect(),
    };
    toml::to_string(&doc).expect("continuum document serializes")
}

pub fn continuum_profile_from_toml(text: &str) -> Result<ContinuumProfile> {
    let doc: ContinuumDocument =
        toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    ContinuumProfile::new(
        doc.period,
        doc.breakpoints,
        doc.cuts
            .into_iter()
            .map(|(x, y_low, y_high)| Cut { x, y_low, y_high })
            .collect(),
    )
}

/// Per-site table `column,row,y1,y2` in region site order.
pub fn deformation_to_csv(region: &OccupiedRegion, y: &Deformation) -> String {
    let mut out = String::from("column,row,y1,y2\n");
    for (site, v) in region.sites().iter().zip(&y.values) {
        out.push_str(&format!("{},{},{},{}\n", site.column, site.row, v.x, v.y));
    }
    out
}

pub fn deformation_from_csv(region: &OccupiedRegion, text: &str) -> Result<Deformation> {
    let mut values = vec![None; region.site_count()];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (ln == 0 && line.starts_with("column")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Document(format!("line {}: expected 4 fields", ln + 1)));
        }
        let column: u32 = parts[0]
            .trim()
            .parse()
            .map_err(|e| Error::Document(format!("line {}: {e}", ln + 1)))?;
        let row: i64 = parts[1]
            .trim()
            .parse()
            .map_err(|e| Error::Document(format!("line {}: {e}", ln + 1)))?;
        let y1: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e| Error::Document(format!("line {}: {e}", ln + 1)))?;
        let y2: f64 = parts[3]
            .trim()
            .parse()
            .map_err(|e| Error::Document(format!("line {}: {e}", ln + 1)))?;
        let site = SiteId { column, row };
        let idx = region.index_of(site).ok_or(Error::SiteNotInRegion {
            column,
            row,
        })?;
        values[idx as usize] = Some(nalgebra::Vector2::new(y1, y2));
    }
    let values: Option<Vec<_>> = values.into_iter().collect();
    match values {
        Some(values) => Ok(Deformation { values }),
        None => Err(Error::Document("deformation table misses sites".into())),
    }
}

/// Flat key-value report (TOML-compatible).
pub fn breakdown_to_kv(e: &EnergyBreakdown) -> String {
    format!(
        "surface_film = {}\nsurface_substrate = {}\nelastic_film = {}\nelastic_substrate = {}\ntotal = {}\n",
        e.surface_film, e.surface_substrate, e.elastic_film, e.elastic_substrate, e.total()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_region;

    #[test]
    fn profile_roundtrip_exact() {
        let spec = LatticeSpec::new(0.125, 3, 1.75, 1.0125).unwrap();
        let profile = DiscreteProfile::new(vec![7, 4, 0, 2, 9, 8]);
        let text = profile_to_toml(&spec, &profile);
        let (spec2, profile2) = profile_from_toml(&text).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(profile, profile2);
    }

    #[test]
    fn profile_document_rejects_bad_parity() {
        let text = "epsilon = 1.0\nk = 1\nsubstrate_depth = 1.0\nlambda = 1.0\nhalf_heights = [2, 2]\n";
        assert!(matches!(
            profile_from_toml(text),
            Err(Error::ParityViolation { column: 0, .. })
        ));
    }

    #[test]
    fn deformation_roundtrip() {
        let spec = LatticeSpec::new(0.5, 2, 1.0, 1.0).unwrap();
        let profile = DiscreteProfile::new(vec![3, 2, 1, 0]);
        let region = build_region(&spec, &profile).unwrap();
        let y = Deformation::identity(&region);
        let text = deformation_to_csv(&region, &y);
        let back = deformation_from_csv(&region, &text).unwrap();
        assert_eq!(y, back);
    }

    #[test]
    fn continuum_roundtrip() {
        let p = ContinuumProfile::new(
            2.0,
            vec![(0.0, 0.5), (1.0, 1.0), (1.0, 0.2), (2.0, 0.5)],
            vec![Cut {
                x: 0.5,
                y_low: 0.1,
                y_high: 0.3,
            }],
        )
        .unwrap();
        let text = continuum_profile_to_toml(&p);
        let back = continuum_profile_from_toml(&text).unwrap();
        assert_eq!(p, back);
    }
}
