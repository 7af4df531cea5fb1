//! Sensation-to-language translation.
//!
//! Each perceiving skill has a module that turns the ground-truth reading of
//! the world into one English sentence. Sound has two designs: an indistinct
//! one that only uses adjectives, and a distinct one that runs a noisy
//! classifier described by a confusion matrix and names the material.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Skill;
use crate::scalar::{self, Scalar};
use crate::world::{Material, Scene, SensationRecord, VariantCounts};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("description table is missing material {0}")]
    MissingMaterial(Material),
    #[error("material {material} has no {modality} phrases")]
    EmptyPhrases {
        material: Material,
        modality: &'static str,
    },
    #[error("confusion matrix must be {n}x{n}", n = Material::COUNT)]
    BadShape,
    #[error("confusion row {0} is not a probability distribution")]
    NotStochastic(Material),
    #[error("accuracy {0} outside [0, 1]")]
    BadAccuracy(f64),
    #[error("render threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("reading description table: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing description table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parsing description table: {0}")]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Vision,
    Sound,
    Haptics,
    Weight,
}

impl Modality {
    pub fn for_skill(skill: Skill) -> Option<Modality> {
        match skill {
            Skill::KnockOn => Some(Modality::Sound),
            Skill::Touch => Some(Modality::Haptics),
            Skill::Weigh => Some(Modality::Weight),
            Skill::PickUp | Skill::Done => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub modality: Modality,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialPhrases {
    pub sound: Vec<String>,
    pub haptics: Vec<String>,
    /// Qualitative weight phrases, verb included ("weighs heavy", "is lightweight").
    pub weight: Vec<String>,
}

/// Phrase banks per material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DescriptionTable {
    rows: BTreeMap<Material, MaterialPhrases>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for DescriptionTable {
    fn default() -> Self {
        let row = |sound: &[&str], haptics: &[&str], weight: &[&str]| MaterialPhrases {
            sound: strings(sound),
            haptics: strings(haptics),
            weight: strings(weight),
        };
        let rows = BTreeMap::from([
            (
                Material::Metal,
                row(
                    &["resonant and echoing", "metallic", "ringing"],
                    &["hard and cold", "rigid, cold, and smooth"],
                    &["weighs heavy"],
                ),
            ),
            (
                Material::Glass,
                row(
                    &["tinkling", "tinkling and brittle"],
                    &["hard", "hard and smooth", "cold and smooth"],
                    &["weighs a little bit heavy"],
                ),
            ),
            (
                Material::Ceramic,
                row(
                    &["clinking and rattling", "rattling", "tinkling and brittle"],
                    &["hard", "tough"],
                    &["is of average weight", "is not too light nor not too heavy"],
                ),
            ),
            (
                Material::Plastic,
                row(&["dull", "muffled"], &["hard", "soft"], &["weighs light"]),
            ),
            (
                Material::Fibre,
                row(
                    &["muted", "silent"],
                    &["soft", "flexible"],
                    &["is lightweight", "is underweight"],
                ),
            ),
        ]);
        DescriptionTable { rows }
    }
}

impl DescriptionTable {
    pub fn new(rows: BTreeMap<Material, MaterialPhrases>) -> Result<Self, PerceptionError> {
        let table = DescriptionTable { rows };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<(), PerceptionError> {
        for m in Material::ALL {
            let row = self
                .rows
                .get(&m)
                .ok_or(PerceptionError::MissingMaterial(m))?;
            for (modality, list) in [
                ("sound", &row.sound),
                ("haptics", &row.haptics),
                ("weight", &row.weight),
            ] {
                if list.is_empty() || list.iter().any(|p| p.trim().is_empty()) {
                    return Err(PerceptionError::EmptyPhrases {
                        material: m,
                        modality,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self, PerceptionError> {
        let table: DescriptionTable = serde_json::from_str(s)?;
        table.check()?;
        Ok(table)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, PerceptionError> {
        let table: DescriptionTable = toml::from_str(s)?;
        table.check()?;
        Ok(table)
    }

    /// Load `.toml` as TOML, anything else as JSON.
    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml_str(&text),
            _ => Self::from_json_str(&text),
        }
    }

    pub fn row(&self, material: Material) -> &MaterialPhrases {
        &self.rows[&material]
    }

    /// Phrase list for a modality; `None` for vision.
    pub fn phrases(&self, material: Material, modality: Modality) -> Option<&[String]> {
        let row = self.row(material);
        match modality {
            Modality::Sound => Some(&row.sound),
            Modality::Haptics => Some(&row.haptics),
            Modality::Weight => Some(&row.weight),
            Modality::Vision => None,
        }
    }

    pub fn variant_counts(&self) -> VariantCounts {
        let mut counts = VariantCounts::default();
        for m in Material::ALL {
            counts.haptics[m.index()] = self.row(m).haptics.len();
            counts.weight[m.index()] = self.row(m).weight.len();
        }
        counts
    }
}

/// Row-stochastic `P(predicted | true)` over materials.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix<T: Scalar> {
    rows: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusionShape {
    /// Errors spread evenly across the other four materials.
    Uniform,
    /// Every error on a non-target lands on the target material.
    WorstCase,
}

impl<T: Scalar> ConfusionMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, PerceptionError> {
        if rows.len() != Material::COUNT || rows.iter().any(|r| r.len() != Material::COUNT) {
            return Err(PerceptionError::BadShape);
        }
        for (i, r) in rows.iter().enumerate() {
            let total = scalar::sum(r.iter().cloned());
            if r.iter().any(|x| !scalar::is_probability(x)) || !total.near(&T::one()) {
                return Err(PerceptionError::NotStochastic(Material::ALL[i]));
            }
        }
        Ok(ConfusionMatrix { rows })
    }

    pub fn identity() -> Self {
        Self::uniform(T::one()).expect("1 is a valid accuracy")
    }

    pub fn uniform(accuracy: T) -> Result<Self, PerceptionError> {
        check_accuracy(&accuracy)?;
        let off = (T::one() - accuracy.clone()) / T::ratio(Material::COUNT as u64 - 1, 1);
        let rows = (0..Material::COUNT)
            .map(|i| {
                (0..Material::COUNT)
                    .map(|j| if i == j { accuracy.clone() } else { off.clone() })
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Non-target rows put all error mass on `target`; the target row spreads
    /// its errors evenly.
    pub fn worst_case(accuracy: T, target: Material) -> Result<Self, PerceptionError> {
        let mut m = Self::uniform(accuracy.clone())?;
        let t = target.index();
        for (i, row) in m.rows.iter_mut().enumerate() {
            if i == t {
                continue;
            }
            for (j, x) in row.iter_mut().enumerate() {
                *x = if j == i {
                    accuracy.clone()
                } else if j == t {
                    T::one() - accuracy.clone()
                } else {
                    T::zero()
                };
            }
        }
        Ok(m)
    }

    pub fn with_shape(
        shape: ConfusionShape,
        accuracy: T,
        target: Material,
    ) -> Result<Self, PerceptionError> {
        match shape {
            ConfusionShape::Uniform => Self::uniform(accuracy),
            ConfusionShape::WorstCase => Self::worst_case(accuracy, target),
        }
    }

    pub fn get(&self, truth: Material, predicted: Material) -> &T {
        &self.rows[truth.index()][predicted.index()]
    }

    pub fn row(&self, truth: Material) -> &[T] {
        &self.rows[truth.index()]
    }

    /// `P(true | predicted)` under a uniform prior over materials.
    pub fn posterior_given(&self, predicted: Material) -> Vec<T> {
        let column: Vec<T> = self
            .rows
            .iter()
            .map(|r| r[predicted.index()].clone())
            .collect();
        let total = scalar::sum(column.iter().cloned());
        if total.is_zero() {
            return column;
        }
        column.into_iter().map(|x| x / total.clone()).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ConfusionMatrix<U> {
        ConfusionMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(&f).collect())
                .collect(),
        }
    }
}

fn check_accuracy<T: Scalar>(accuracy: &T) -> Result<(), PerceptionError> {
    if scalar::is_probability(accuracy) {
        Ok(())
    } else {
        Err(PerceptionError::BadAccuracy(accuracy.as_f64()))
    }
}

/// `Σ_m prior(m) · P(m | m)`.
pub fn overall_accuracy<T: Scalar>(confusion: &ConfusionMatrix<T>, prior: &[T]) -> T {
    scalar::sum(
        Material::ALL
            .into_iter()
            .zip(prior)
            .map(|(m, w)| w.clone() * confusion.get(m, m).clone()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundMode {
    Distinct,
    Indistinct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightStyle {
    Numeric,
    Qualitative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundSensorModel<T: Scalar> {
    pub mode: SoundMode,
    pub confusion: ConfusionMatrix<T>,
    /// Top-1 sentence at or above this confidence, top-2 sentence below.
    pub render_threshold: f64,
}

impl<T: Scalar> SoundSensorModel<T> {
    pub fn new(
        mode: SoundMode,
        confusion: ConfusionMatrix<T>,
        render_threshold: f64,
    ) -> Result<Self, PerceptionError> {
        if !(render_threshold > 0.0 && render_threshold <= 1.0) {
            return Err(PerceptionError::BadThreshold(render_threshold));
        }
        Ok(SoundSensorModel {
            mode,
            confusion,
            render_threshold,
        })
    }

    pub fn indistinct() -> Self {
        SoundSensorModel {
            mode: SoundMode::Indistinct,
            confusion: ConfusionMatrix::identity(),
            render_threshold: 0.5,
        }
    }

    pub fn distinct(confusion: ConfusionMatrix<T>) -> Self {
        SoundSensorModel {
            mode: SoundMode::Distinct,
            confusion,
            render_threshold: 0.5,
        }
    }
}

/// Output of the distinct-mode classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundReading {
    pub predicted: Material,
    pub confidence: f64,
    pub runner_up: Option<(Material, f64)>,
}

fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in row.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Sample a prediction from the true material's confusion row. Confidence is
/// the calibrated probability of the predicted label given that prediction,
/// the runner-up the likeliest other material.
pub fn classify_sound<T: Scalar, R: Rng + ?Sized>(
    truth: Material,
    model: &SoundSensorModel<T>,
    rng: &mut R,
) -> SoundReading {
    let row: Vec<f64> = model.confusion.row(truth).iter().map(Scalar::as_f64).collect();
    let predicted = Material::ALL[sample_row(&row, rng)];
    let posterior: Vec<f64> = model
        .confusion
        .posterior_given(predicted)
        .iter()
        .map(Scalar::as_f64)
        .collect();
    let runner_up = Material::ALL
        .into_iter()
        .filter(|m| *m != predicted)
        .map(|m| (m, posterior[m.index()]))
        .fold(None, |best: Option<(Material, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .filter(|(_, p)| *p > 0.0);
    SoundReading {
        predicted,
        confidence: posterior[predicted.index()],
        runner_up,
    }
}

fn percent(p: f64) -> i64 {
    (p * 100.0).round() as i64
}

pub fn render_sound_reading(reading: &SoundReading, threshold: f64) -> String {
    if reading.confidence >= threshold {
        return format!("It is probably {}", reading.predicted);
    }
    let mut text = format!(
        "It could be {} with a {}% chance",
        reading.predicted,
        percent(reading.confidence)
    );
    if let Some((m, p)) = reading.runner_up {
        text.push_str(&format!(", or {m} with a {}% chance", percent(p)));
    }
    text
}

fn feedback(modality: Modality, text: String) -> Feedback {
    Feedback { modality, text }
}

pub fn describe_scene(scene: &Scene) -> Feedback {
    feedback(
        Modality::Vision,
        format!("The scene contains [{}]", scene.visible_labels().join(", ")),
    )
}

pub fn describe_sound<T: Scalar, R: Rng + ?Sized>(
    sensation: &SensationRecord,
    model: &SoundSensorModel<T>,
    table: &DescriptionTable,
    rng: &mut R,
) -> (Feedback, Option<SoundReading>) {
    match model.mode {
        SoundMode::Indistinct => {
            let list = &table.row(sensation.material).sound;
            let phrase = &list[rng.gen_range(0..list.len())];
            (feedback(Modality::Sound, format!("It sounds {phrase}")), None)
        }
        SoundMode::Distinct => {
            let reading = classify_sound(sensation.material, model, rng);
            let text = render_sound_reading(&reading, model.render_threshold);
            (feedback(Modality::Sound, text), Some(reading))
        }
    }
}

fn pick_variant(list: &[String], index: usize) -> &str {
    &list[index % list.len()]
}

pub fn describe_haptics(sensation: &SensationRecord, table: &DescriptionTable) -> Feedback {
    let list = &table.row(sensation.material).haptics;
    feedback(
        Modality::Haptics,
        format!("It feels {}", pick_variant(list, sensation.haptic_variant_index)),
    )
}

pub fn describe_weight(
    sensation: &SensationRecord,
    style: WeightStyle,
    table: &DescriptionTable,
) -> Feedback {
    let text = match style {
        WeightStyle::Numeric => format!("It weighs {}g", sensation.weight_g.round() as i64),
        WeightStyle::Qualitative => {
            let list = &table.row(sensation.material).weight;
            format!("It {}", pick_variant(list, sensation.weight_variant_index))
        }
    };
    feedback(Modality::Weight, text)
}

/// The full perception stack used by an episode.
#[derive(Debug, Clone)]
pub struct Perception {
    pub table: Arc<DescriptionTable>,
    pub sound: SoundSensorModel<f64>,
    pub weight_style: WeightStyle,
}

impl Perception {
    pub fn new(table: Arc<DescriptionTable>, sound: SoundSensorModel<f64>, weight_style: WeightStyle) -> Self {
        Perception {
            table,
            sound,
            weight_style,
        }
    }

    /// Route a sensation to the module of its modality.
    pub fn perceive<R: Rng + ?Sized>(
        &self,
        sensation: &SensationRecord,
        rng: &mut R,
    ) -> (Feedback, Option<SoundReading>) {
        match sensation.skill {
            Skill::KnockOn => describe_sound(sensation, &self.sound, &self.table, rng),
            Skill::Touch => (describe_haptics(sensation, &self.table), None),
            _ => (describe_weight(sensation, self.weight_style, &self.table), None),
        }
    }
}
