//! Exact success ceiling for indistinct descriptions.
//!
//! A planner that probes every object once per selected modality and picks
//! the maximum-a-posteriori target cannot be beaten with those probes. Its
//! success probability is `Σ_obs max_i P(obs, target = i)`, computed here by
//! enumerating scene layouts and observation classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{DescriptionTable, Modality};
use crate::scalar::Scalar;
use crate::world::{Distractors, Material, SceneParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration of {size} terms exceeds the cap of {cap}")]
    TooLarge { size: u128, cap: u128 },
    #[error("scene parameters: {0}")]
    Params(String),
    #[error("scene variant counts do not match the description table")]
    VariantMismatch,
}

/// Modalities probed once per object. Weight means the qualitative phrases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub sound: bool,
    pub haptics: bool,
    pub weight: bool,
}

impl ProbeSet {
    pub const SOUND_AND_HAPTICS: ProbeSet = ProbeSet {
        sound: true,
        haptics: true,
        weight: false,
    };

    pub fn modalities(&self) -> Vec<Modality> {
        let mut out = Vec::new();
        if self.sound {
            out.push(Modality::Sound);
        }
        if self.haptics {
            out.push(Modality::Haptics);
        }
        if self.weight {
            out.push(Modality::Weight);
        }
        out
    }
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 50_000_000;

fn permutations(items: &[Material]) -> Vec<Vec<Material>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn arrangements(items: &[Material], k: usize) -> Vec<Vec<Material>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in arrangements(&rest, k - 1) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Equally likely material layouts produced by scene generation, one entry
/// per layout (repeats carry multiplicity).
pub fn scene_layouts(params: &SceneParams) -> Result<Vec<Vec<Material>>, OracleError> {
    let n = params.n_objects;
    if n < 2 {
        return Err(OracleError::Params(format!("{n} objects")));
    }
    let distractor_seqs = match &params.distractors {
        Distractors::Fixed(list) => {
            if list.len() != n - 1 || list.contains(&params.target) {
                return Err(OracleError::Params(format!("bad distractors {list:?}")));
            }
            permutations(list)
        }
        Distractors::Sampled => {
            let others: Vec<Material> = Material::ALL
                .into_iter()
                .filter(|m| *m != params.target)
                .collect();
            let k = (n - 1).min(others.len());
            let mut seqs = arrangements(&others, k);
            for _ in k..n - 1 {
                seqs = seqs
                    .into_iter()
                    .flat_map(|s| {
                        others.iter().map(move |m| {
                            let mut s = s.clone();
                            s.push(*m);
                            s
                        })
                    })
                    .collect();
            }
            seqs
        }
    };
    let mut layouts = Vec::with_capacity(distractor_seqs.len() * n);
    for seq in &distractor_seqs {
        for pos in 0..n {
            let mut layout = seq.clone();
            layout.insert(pos, params.target);
            layouts.push(layout);
        }
    }
    Ok(layouts)
}

/// `P(phrase | material)` for one probe.
pub fn phrase_likelihood<T: Scalar>(
    table: &DescriptionTable,
    material: Material,
    modality: Modality,
    phrase: &str,
) -> T {
    let list = table.phrases(material, modality).unwrap_or(&[]);
    if list.is_empty() {
        return T::zero();
    }
    let hits = list.iter().filter(|p| p.as_str() == phrase).count();
    T::ratio(hits as u64, list.len() as u64)
}

/// Observation classes for one object: summed likelihood vectors of all
/// observations sharing the same vector.
fn observation_classes<T: Scalar>(table: &DescriptionTable, modalities: &[Modality]) -> Vec<Vec<T>> {
    let mut tuples: Vec<Vec<&str>> = vec![Vec::new()];
    for &modality in modalities {
        let mut phrases: Vec<&str> = Material::ALL
            .into_iter()
            .flat_map(|m| table.phrases(m, modality).unwrap_or(&[]).iter().map(String::as_str))
            .collect();
        phrases.sort_unstable();
        phrases.dedup();
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                phrases.iter().map(move |p| {
                    let mut t = t.clone();
                    t.push(*p);
                    t
                })
            })
            .collect();
    }

    let mut classes: Vec<(Vec<T>, u64)> = Vec::new();
    for tuple in tuples {
        let vector: Vec<T> = Material::ALL
            .into_iter()
            .map(|m| {
                modalities
                    .iter()
                    .zip(&tuple)
                    .fold(T::one(), |acc, (md, p)| acc * phrase_likelihood::<T>(table, m, *md, p))
            })
            .collect();
        if vector.iter().all(|x| x.is_zero()) {
            continue;
        }
        match classes.iter_mut().find(|(v, _)| *v == vector) {
            Some((_, count)) => *count += 1,
            None => classes.push((vector, 1)),
        }
    }
    classes
        .into_iter()
        .map(|(v, count)| v.into_iter().map(|x| x * T::ratio(count, 1)).collect())
        .collect()
}

/// Success probability of the MAP planner probing `probes` on every object.
pub fn indistinct_oracle_rate<T: Scalar>(
    table: &DescriptionTable,
    params: &SceneParams,
    probes: ProbeSet,
) -> Result<T, OracleError> {
    indistinct_oracle_rate_capped(table, params, probes, DEFAULT_ENUMERATION_CAP)
}

pub fn indistinct_oracle_rate_capped<T: Scalar>(
    table: &DescriptionTable,
    params: &SceneParams,
    probes: ProbeSet,
    cap: u128,
) -> Result<T, OracleError> {
    let modalities = probes.modalities();
    if (probes.haptics || probes.weight) && params.variants != table.variant_counts() {
        return Err(OracleError::VariantMismatch);
    }
    let layouts = scene_layouts(params)?;
    let classes = observation_classes::<T>(table, &modalities);
    let n = params.n_objects;

    let size = (classes.len() as u128)
        .checked_pow(n as u32)
        .and_then(|c| c.checked_mul(layouts.len() as u128 * n as u128))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(OracleError::TooLarge { size, cap });
    }

    let target = params.target;
    let by_position: Vec<Vec<&Vec<Material>>> = (0..n)
        .map(|i| layouts.iter().filter(|l| l[i] == target).collect())
        .collect();

    let mut combo = vec![0usize; n];
    let mut total = T::zero();
    loop {
        let mut best = T::zero();
        for group in &by_position {
            let score = group.iter().fold(T::zero(), |acc, layout| {
                let joint = combo
                    .iter()
                    .zip(layout.iter())
                    .fold(T::one(), |p, (c, m)| p * classes[*c][m.index()].clone());
                acc + joint
            });
            if score > best {
                best = score;
            }
        }
        total = total + best;

        // odometer over class assignments
        let mut digit = 0;
        loop {
            if digit == n {
                return Ok(total / T::ratio(layouts.len() as u64, 1));
            }
            combo[digit] += 1;
            if combo[digit] < classes.len() {
                break;
            }
            combo[digit] = 0;
            digit += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::MaterialPhrases;
    use num_rational::BigRational;
    use std::collections::BTreeMap;

    fn glass_with(distractors: Vec<Material>) -> SceneParams {
        SceneParams {
            n_objects: distractors.len() + 1,
            target: Material::Glass,
            distractors: Distractors::Fixed(distractors),
            ..Default::default()
        }
    }

    fn table_from(f: impl Fn(Material) -> MaterialPhrases) -> DescriptionTable {
        DescriptionTable::new(Material::ALL.into_iter().map(|m| (m, f(m))).collect::<BTreeMap<_, _>>())
            .unwrap()
    }

    #[test]
    fn layouts_cover_positions_uniformly() {
        let params = SceneParams::default();
        let layouts = scene_layouts(&params).unwrap();
        assert_eq!(layouts.len(), 3 * 4 * 3);
        for pos in 0..3 {
            let at = layouts.iter().filter(|l| l[pos] == Material::Glass).count();
            assert_eq!(at, 12);
        }
        let fixed = scene_layouts(&glass_with(vec![Material::Ceramic, Material::Metal])).unwrap();
        assert_eq!(fixed.len(), 6);
    }

    #[test]
    fn unique_sound_phrases_identify_everything() {
        let table = table_from(|m| MaterialPhrases {
            sound: vec![format!("sound of {m}")],
            haptics: vec!["same".into()],
            weight: vec!["weighs something".into()],
        });
        let params = SceneParams {
            variants: table.variant_counts(),
            ..SceneParams::default()
        };
        let r: BigRational = indistinct_oracle_rate(&table, &params, ProbeSet::SOUND_AND_HAPTICS).unwrap();
        assert_eq!(r, BigRational::ratio(1, 1));
    }

    #[test]
    fn identical_rows_give_chance() {
        let table = table_from(|_| MaterialPhrases {
            sound: vec!["thud".into(), "tap".into()],
            haptics: vec!["firm".into()],
            weight: vec!["weighs something".into()],
        });
        for n in [2, 3, 4] {
            let params = SceneParams {
                n_objects: n,
                variants: table.variant_counts(),
                ..Default::default()
            };
            let r: BigRational =
                indistinct_oracle_rate(&table, &params, ProbeSet::SOUND_AND_HAPTICS).unwrap();
            assert_eq!(r, BigRational::ratio(1, n as u64));
        }
    }

    #[test]
    fn glass_ceramic_metal_exact() {
        // Glass and ceramic only collide on ("tinkling and brittle", "hard"):
        // glass 1/2 * 1/3, ceramic 1/3 * 1/2. Both colliding is a coin flip,
        // so the ceiling is 1 - (1/6 * 1/6) / 2 = 71/72.
        let table = DescriptionTable::default();
        let params = glass_with(vec![Material::Ceramic, Material::Metal]);
        let r: BigRational = indistinct_oracle_rate(&table, &params, ProbeSet::SOUND_AND_HAPTICS).unwrap();
        assert_eq!(r, BigRational::ratio(71, 72));
        let f: f64 = indistinct_oracle_rate(&table, &params, ProbeSet::SOUND_AND_HAPTICS).unwrap();
        assert!((f - 71.0 / 72.0).abs() < 1e-12);
    }

    #[test]
    fn weight_phrases_separate_glass_and_ceramic() {
        let table = DescriptionTable::default();
        let params = glass_with(vec![Material::Ceramic, Material::Metal]);
        let all = ProbeSet {
            sound: true,
            haptics: true,
            weight: true,
        };
        let r: BigRational = indistinct_oracle_rate(&table, &params, all).unwrap();
        assert_eq!(r, BigRational::ratio(1, 1));
    }

    #[test]
    fn no_probes_is_chance() {
        let table = DescriptionTable::default();
        let none = ProbeSet {
            sound: false,
            haptics: false,
            weight: false,
        };
        let r: BigRational = indistinct_oracle_rate(&table, &SceneParams::default(), none).unwrap();
        assert_eq!(r, BigRational::ratio(1, 3));
    }

    #[test]
    fn default_tables_sampled_distractors_between_chance_and_one() {
        let table = DescriptionTable::default();
        let r: f64 =
            indistinct_oracle_rate(&table, &SceneParams::default(), ProbeSet::SOUND_AND_HAPTICS).unwrap();
        assert!(r > 1.0 / 3.0 && r < 1.0, "{r}");
    }

    #[test]
    fn cap_is_enforced() {
        let table = DescriptionTable::default();
        let err = indistinct_oracle_rate_capped::<f64>(&table, &SceneParams::default(), ProbeSet::SOUND_AND_HAPTICS, 10)
            .unwrap_err();
        assert!(matches!(err, OracleError::TooLarge { cap: 10, .. }));
    }
}
