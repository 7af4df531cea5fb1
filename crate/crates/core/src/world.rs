//! Ground-truth tabletop: scene generation, action execution and task success.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Skill, ValidatedCommand};

/// Latent material of a block. Declaration order is the iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Metal,
    Glass,
    Ceramic,
    Plastic,
    Fibre,
}

impl Material {
    pub const ALL: [Material; 5] = [
        Material::Metal,
        Material::Glass,
        Material::Ceramic,
        Material::Plastic,
        Material::Fibre,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Material> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::Metal => "metal",
            Material::Glass => "glass",
            Material::Ceramic => "ceramic",
            Material::Plastic => "plastic",
            Material::Fibre => "fibre",
        }
    }

    /// Exemplar mass in grams.
    pub fn default_weight_g(self) -> f64 {
        match self {
            Material::Metal => 300.0,
            Material::Glass => 150.0,
            Material::Ceramic => 100.0,
            Material::Plastic => 30.0,
            Material::Fibre => 10.0,
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Material {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Material::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| WorldError::UnknownMaterial(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("scene needs at least 2 objects, got {0}")]
    TooFewObjects(usize),
    #[error("color pool has {available} labels but {needed} objects were requested")]
    ColorPoolExhausted { needed: usize, available: usize },
    #[error("duplicate color label {0:?}")]
    DuplicateLabel(String),
    #[error("fixed distractor list must have {expected} entries without the target, got {got:?}")]
    BadDistractors { expected: usize, got: Vec<Material> },
    #[error("material {0} has no phrase variants configured")]
    NoVariants(Material),
    #[error("unknown material {0:?}")]
    UnknownMaterial(String),
    #[error("object {0} is not on the table")]
    InvalidTarget(usize),
    #[error("{0:?} is not a physical action")]
    NotAnAction(Skill),
    #[error("task {0:?} is not achievable in this scene")]
    Unachievable(String),
    #[error("scene must contain at least one object")]
    EmptyScene,
}

/// One block on the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(rename = "color")]
    pub color_label: String,
    pub material: Material,
    pub weight_g: f64,
    #[serde(rename = "haptic_variant", default)]
    pub haptic_variant_index: usize,
    #[serde(rename = "weight_variant", default)]
    pub weight_variant_index: usize,
}

impl ObjectSpec {
    pub fn new(color_label: impl Into<String>, material: Material) -> Self {
        ObjectSpec {
            color_label: color_label.into(),
            material,
            weight_g: material.default_weight_g(),
            haptic_variant_index: 0,
            weight_variant_index: 0,
        }
    }

    pub fn with_variants(mut self, haptic: usize, weight: usize) -> Self {
        self.haptic_variant_index = haptic;
        self.weight_variant_index = weight;
        self
    }

    pub fn with_weight(mut self, grams: f64) -> Self {
        self.weight_g = grams;
        self
    }

    /// Rigid to the touch. Plastic blocks come in a hard (variant 0) and a
    /// soft flavour.
    pub fn is_hard(&self) -> bool {
        match self.material {
            Material::Metal | Material::Glass | Material::Ceramic => true,
            Material::Plastic => self.haptic_variant_index == 0,
            Material::Fibre => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub picked: BTreeSet<usize>,
}

impl Scene {
    pub fn new(objects: Vec<ObjectSpec>) -> Result<Self, WorldError> {
        if objects.is_empty() {
            return Err(WorldError::EmptyScene);
        }
        let mut seen = BTreeSet::new();
        for o in &objects {
            if !seen.insert(o.color_label.as_str()) {
                return Err(WorldError::DuplicateLabel(o.color_label.clone()));
            }
        }
        Ok(Scene {
            objects,
            picked: BTreeSet::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn is_picked(&self, index: usize) -> bool {
        self.picked.contains(&index)
    }

    /// Labels of objects still on the table, in scene order.
    pub fn visible_labels(&self) -> Vec<&str> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_picked(*i))
            .map(|(_, o)| o.color_label.as_str())
            .collect()
    }

    /// Index of the unpicked object carrying exactly this label.
    pub fn find_visible(&self, label: &str) -> Option<usize> {
        self.objects
            .iter()
            .enumerate()
            .find(|(i, o)| o.color_label == label && !self.is_picked(*i))
            .map(|(i, _)| i)
    }
}

/// Purpose an object may serve; each maps to the materials that fit it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    CrackNut,
    Cushion,
    ClinkToast,
}

impl Utility {
    pub fn materials(self) -> &'static [Material] {
        match self {
            Utility::CrackNut => &[Material::Metal],
            Utility::Cushion => &[Material::Fibre],
            Utility::ClinkToast => &[Material::Glass],
        }
    }
}

/// Success predicate over ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    MaterialIs(Material),
    MaterialIn(Vec<Material>),
    Hard,
    Soft,
    WeightAtLeast(f64),
    WeightAtMost(f64),
    Utility(Utility),
    All(Vec<Predicate>),
}

impl Predicate {
    pub fn holds(&self, object: &ObjectSpec) -> bool {
        match self {
            Predicate::MaterialIs(m) => object.material == *m,
            Predicate::MaterialIn(ms) => ms.contains(&object.material),
            Predicate::Hard => object.is_hard(),
            Predicate::Soft => !object.is_hard(),
            Predicate::WeightAtLeast(g) => object.weight_g >= *g,
            Predicate::WeightAtMost(g) => object.weight_g <= *g,
            Predicate::Utility(u) => u.materials().contains(&object.material),
            Predicate::All(ps) => ps.iter().all(|p| p.holds(object)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    SingleTarget,
    AllMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub instruction: String,
    pub predicate: Predicate,
    pub cardinality: Cardinality,
}

impl Task {
    /// Build a task and check it is achievable in `scene`.
    pub fn new(
        instruction: impl Into<String>,
        predicate: Predicate,
        cardinality: Cardinality,
        scene: &Scene,
    ) -> Result<Self, WorldError> {
        let task = Task {
            instruction: instruction.into(),
            predicate,
            cardinality,
        };
        let n = task.satisfying(scene).len();
        let ok = match cardinality {
            Cardinality::SingleTarget => n == 1,
            Cardinality::AllMatching => n >= 1,
        };
        if ok {
            Ok(task)
        } else {
            Err(WorldError::Unachievable(task.instruction))
        }
    }

    pub fn pick_material(material: Material, scene: &Scene) -> Result<Self, WorldError> {
        Task::new(
            format!("pick up the {material} block"),
            Predicate::MaterialIs(material),
            Cardinality::SingleTarget,
            scene,
        )
    }

    /// Indices of objects satisfying the predicate.
    pub fn satisfying(&self, scene: &Scene) -> BTreeSet<usize> {
        scene
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| self.predicate.holds(o))
            .map(|(i, _)| i)
            .collect()
    }

    /// Target material when the predicate is a plain material check.
    pub fn target_material(&self) -> Option<Material> {
        match self.predicate {
            Predicate::MaterialIs(m) => Some(m),
            _ => None,
        }
    }
}

/// Whether the final picked set completes the task.
pub fn evaluate_success(task: &Task, scene: &Scene) -> bool {
    let targets = task.satisfying(scene);
    match task.cardinality {
        Cardinality::SingleTarget => {
            scene.picked.len() == 1 && scene.picked.iter().all(|i| targets.contains(i))
        }
        Cardinality::AllMatching => scene.picked == targets,
    }
}

/// How non-target materials are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distractors {
    /// Drawn without replacement from the other materials, with replacement
    /// once those run out.
    Sampled,
    /// Exactly these materials, placed in random order.
    Fixed(Vec<Material>),
}

/// Number of phrase variants per material for haptics and qualitative weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCounts {
    pub haptics: [usize; Material::COUNT],
    pub weight: [usize; Material::COUNT],
}

impl Default for VariantCounts {
    fn default() -> Self {
        VariantCounts {
            haptics: [2, 3, 2, 2, 2],
            weight: [1, 1, 2, 1, 2],
        }
    }
}

pub fn default_color_pool() -> Vec<String> {
    [
        "red", "orange", "yellow", "green", "blue", "purple", "white", "black", "pink", "brown",
    ]
    .iter()
    .map(|c| format!("{c} block"))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub n_objects: usize,
    pub target: Material,
    pub color_pool: Vec<String>,
    pub distractors: Distractors,
    pub variants: VariantCounts,
    /// Relative half-width of uniform weight jitter; `None` keeps exemplar weights.
    pub weight_jitter: Option<f64>,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            n_objects: 3,
            target: Material::Glass,
            color_pool: default_color_pool(),
            distractors: Distractors::Sampled,
            variants: VariantCounts::default(),
            weight_jitter: None,
        }
    }
}

impl SceneParams {
    pub fn new(n_objects: usize, target: Material, color_pool: Vec<String>) -> Self {
        SceneParams {
            n_objects,
            target,
            color_pool,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), WorldError> {
        if self.n_objects < 2 {
            return Err(WorldError::TooFewObjects(self.n_objects));
        }
        if self.color_pool.len() < self.n_objects {
            return Err(WorldError::ColorPoolExhausted {
                needed: self.n_objects,
                available: self.color_pool.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for c in &self.color_pool {
            if !seen.insert(c) {
                return Err(WorldError::DuplicateLabel(c.clone()));
            }
        }
        if let Distractors::Fixed(list) = &self.distractors {
            if list.len() != self.n_objects - 1 || list.contains(&self.target) {
                return Err(WorldError::BadDistractors {
                    expected: self.n_objects - 1,
                    got: list.clone(),
                });
            }
        }
        for m in Material::ALL {
            if self.variants.haptics[m.index()] == 0 || self.variants.weight[m.index()] == 0 {
                return Err(WorldError::NoVariants(m));
            }
        }
        Ok(())
    }

    /// Non-target materials, before placement.
    fn draw_distractors(&self, rng: &mut ChaCha8Rng) -> Vec<Material> {
        match &self.distractors {
            Distractors::Fixed(list) => {
                let mut list = list.clone();
                list.shuffle(rng);
                list
            }
            Distractors::Sampled => {
                let mut others: Vec<Material> = Material::ALL
                    .into_iter()
                    .filter(|m| *m != self.target)
                    .collect();
                others.shuffle(rng);
                let need = self.n_objects - 1;
                let mut out: Vec<Material> = others.iter().copied().take(need).collect();
                while out.len() < need {
                    out.push(*others.choose(rng).expect("four other materials"));
                }
                out
            }
        }
    }

    /// Deterministic scene and single-target task for `seed`.
    pub fn generate(&self, seed: u64) -> Result<(Scene, Task), WorldError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_objects;

        let colors: Vec<String> = self
            .color_pool
            .choose_multiple(&mut rng, n)
            .cloned()
            .collect();
        let distractors = self.draw_distractors(&mut rng);
        let target_pos = rng.gen_range(0..n);
        let mut materials = distractors;
        materials.insert(target_pos, self.target);

        let objects = colors
            .into_iter()
            .zip(materials)
            .map(|(color, material)| {
                let mut weight_g = material.default_weight_g();
                if let Some(j) = self.weight_jitter.filter(|j| *j > 0.0) {
                    weight_g *= 1.0 + rng.gen_range(-j..=j);
                }
                ObjectSpec {
                    color_label: color,
                    material,
                    weight_g,
                    haptic_variant_index: rng.gen_range(0..self.variants.haptics[material.index()]),
                    weight_variant_index: rng.gen_range(0..self.variants.weight[material.index()]),
                }
            })
            .collect();

        let scene = Scene::new(objects)?;
        let task = Task::pick_material(self.target, &scene)?;
        Ok((scene, task))
    }
}

/// Convenience wrapper over [`SceneParams::generate`].
pub fn generate_scene(
    seed: u64,
    n_objects: usize,
    target: Material,
    color_pool: &[String],
) -> Result<(Scene, Task), WorldError> {
    SceneParams::new(n_objects, target, color_pool.to_vec()).generate(seed)
}

/// Ground-truth reading handed to the perception layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SensationRecord {
    pub skill: Skill,
    pub material: Material,
    pub weight_g: f64,
    pub haptic_variant_index: usize,
    pub weight_variant_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionEvent {
    Sensation(SensationRecord),
    PickedUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub object_index: usize,
    pub skill: Skill,
    pub event: ActionEvent,
}

/// Execute a validated physical command.
pub fn apply_action(
    scene: &mut Scene,
    command: &ValidatedCommand,
) -> Result<ActionOutcome, WorldError> {
    let index = match command.target {
        Some(i) if command.skill != Skill::Done => i,
        _ => return Err(WorldError::NotAnAction(command.skill)),
    };
    if index >= scene.len() || scene.is_picked(index) {
        return Err(WorldError::InvalidTarget(index));
    }
    let event = if command.skill == Skill::PickUp {
        scene.picked.insert(index);
        ActionEvent::PickedUp
    } else {
        let o = &scene.objects[index];
        ActionEvent::Sensation(SensationRecord {
            skill: command.skill,
            material: o.material,
            weight_g: o.weight_g,
            haptic_variant_index: o.haptic_variant_index,
            weight_variant_index: o.weight_variant_index,
        })
    };
    Ok(ActionOutcome {
        object_index: index,
        skill: command.skill,
        event,
    })
}

/// Serialized form of a scene with its instruction, used by logs and fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub objects: Vec<ObjectSpec>,
    pub instruction: String,
    pub predicate: Predicate,
    #[serde(default = "single_target")]
    pub cardinality: Cardinality,
}

fn single_target() -> Cardinality {
    Cardinality::SingleTarget
}

impl SceneDocument {
    pub fn new(scene: &Scene, task: &Task) -> Self {
        SceneDocument {
            objects: scene.objects.clone(),
            instruction: task.instruction.clone(),
            predicate: task.predicate.clone(),
            cardinality: task.cardinality,
        }
    }

    pub fn into_parts(self) -> Result<(Scene, Task), WorldError> {
        let scene = Scene::new(self.objects)?;
        let task = Task::new(self.instruction, self.predicate, self.cardinality, &scene)?;
        Ok((scene, task))
    }
}
