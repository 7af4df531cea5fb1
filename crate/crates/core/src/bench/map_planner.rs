use std::sync::Arc;

use super::oracle::{phrase_likelihood, ProbeSet};
use crate::grammar::{render_command, Command, Skill};
use crate::perception::{DescriptionTable, Modality};
use crate::planner::{Planner, PlannerError, StepView};
use crate::world::Material;

/// Probes every object once per modality, reads the feedback sentences back
/// into phrases, then picks the object with the highest posterior of being
/// the target. Ties go to the lowest index.
pub struct MapPlanner {
    labels: Vec<String>,
    table: Arc<DescriptionTable>,
    layouts: Arc<Vec<Vec<Material>>>,
    target: Material,
    plan: Vec<(usize, Skill)>,
    cursor: usize,
    // per object: (modality, phrase) heard so far
    heard: Vec<Vec<(Modality, String)>>,
}

fn phrase_of(modality: Modality, sentence: &str) -> Option<String> {
    let rest = match modality {
        Modality::Sound => sentence.strip_prefix("It sounds ")?,
        Modality::Haptics => sentence.strip_prefix("It feels ")?,
        Modality::Weight | Modality::Vision => sentence.strip_prefix("It ")?,
    };
    Some(rest.trim().to_string())
}

impl MapPlanner {
    pub fn new(
        labels: Vec<String>,
        table: Arc<DescriptionTable>,
        layouts: Arc<Vec<Vec<Material>>>,
        target: Material,
        probes: ProbeSet,
    ) -> Self {
        let skills: Vec<Skill> = probes
            .modalities()
            .into_iter()
            .map(|m| match m {
                Modality::Sound => Skill::KnockOn,
                Modality::Haptics => Skill::Touch,
                _ => Skill::Weigh,
            })
            .collect();
        let plan = (0..labels.len())
            .flat_map(|i| skills.iter().map(move |s| (i, *s)))
            .collect();
        let heard = vec![Vec::new(); labels.len()];
        MapPlanner {
            labels,
            table,
            layouts,
            target,
            plan,
            cursor: 0,
            heard,
        }
    }

    fn likelihood(&self, object: usize, material: Material) -> f64 {
        self.heard[object]
            .iter()
            .map(|(md, p)| phrase_likelihood::<f64>(&self.table, material, *md, p))
            .product()
    }

    /// Posterior weight (unnormalised) of each object being the target.
    pub fn scores(&self) -> Vec<f64> {
        let mut scores = vec![0.0; self.labels.len()];
        for layout in self.layouts.iter() {
            let Some(pos) = layout.iter().position(|m| *m == self.target) else {
                continue;
            };
            let joint: f64 = layout
                .iter()
                .enumerate()
                .map(|(j, m)| self.likelihood(j, *m))
                .product();
            scores[pos] += joint;
        }
        scores
    }
}

impl Planner for MapPlanner {
    fn next_command(&mut self, view: &StepView<'_>) -> Result<String, PlannerError> {
        if let Some(p) = view.last_percept {
            let Some(modality) = Modality::for_skill(p.skill) else {
                return Err(PlannerError::UnsupportedFeedback);
            };
            let phrase =
                phrase_of(modality, &p.feedback.text).ok_or(PlannerError::UnsupportedFeedback)?;
            self.heard[p.object_index].push((modality, phrase));
        }
        if let Some((object, skill)) = self.plan.get(self.cursor).copied() {
            self.cursor += 1;
            return Ok(render_command(&Command::on(skill, self.labels[object].clone())));
        }
        let scores = self.scores();
        let best = scores
            .iter()
            .enumerate()
            .fold(0, |best, (i, s)| if *s > scores[best] { i } else { best });
        Ok(render_command(&Command::on(Skill::PickUp, self.labels[best].clone())))
    }
}
