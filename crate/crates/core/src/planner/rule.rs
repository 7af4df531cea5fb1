use rand::seq::SliceRandom;
use rand::Rng;

use super::{Percept, Planner, PlannerError, StepView};
use crate::grammar::{render_command, Command, Skill};
use crate::world::Material;

/// Hard-coded sound-only baseline: knock objects in random order and pick the
/// first one classified as the target. When every object but one has been
/// classified as something else, pick the last one without knocking it.
#[derive(Debug, Clone)]
pub struct RulePlanner {
    labels: Vec<String>,
    order: Vec<usize>,
    cursor: usize,
    pending: Option<usize>,
    target: Material,
    last_prediction: Option<Material>,
}

impl RulePlanner {
    pub fn new<R: Rng + ?Sized>(labels: Vec<String>, target: Material, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(rng);
        RulePlanner {
            labels,
            order,
            cursor: 0,
            pending: None,
            target,
            last_prediction: None,
        }
    }

    pub fn knock_order(&self) -> &[usize] {
        &self.order
    }

    pub fn last_prediction(&self) -> Option<Material> {
        self.last_prediction
    }

    fn pick(&self, index: usize) -> String {
        render_command(&Command::on(Skill::PickUp, self.labels[index].clone()))
    }

    /// Next command given the percept produced by the previous one.
    pub fn step(&mut self, latest: Option<&Percept>) -> Result<String, PlannerError> {
        if let Some(knocked) = self.pending.take() {
            let reading = latest
                .filter(|p| p.object_index == knocked && p.skill == Skill::KnockOn)
                .and_then(|p| p.sound.as_ref())
                .ok_or(PlannerError::UnsupportedFeedback)?;
            self.last_prediction = Some(reading.predicted);
            if reading.predicted == self.target {
                return Ok(self.pick(knocked));
            }
        }
        let remaining = self.order.len() - self.cursor;
        let next = self.order[self.cursor.min(self.order.len() - 1)];
        if remaining <= 1 {
            return Ok(self.pick(next));
        }
        self.cursor += 1;
        self.pending = Some(next);
        Ok(render_command(&Command::on(
            Skill::KnockOn,
            self.labels[next].clone(),
        )))
    }
}

impl Planner for RulePlanner {
    fn next_command(&mut self, view: &StepView<'_>) -> Result<String, PlannerError> {
        self.step(view.last_percept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{Feedback, Modality, SoundReading};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels() -> Vec<String> {
        ["red block", "blue block", "green block"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn knock_result(planner: &RulePlanner, index: usize, predicted: Material) -> Percept {
        Percept {
            object_index: index,
            label: planner.labels[index].clone(),
            skill: Skill::KnockOn,
            feedback: Feedback {
                modality: Modality::Sound,
                text: format!("It is probably {predicted}"),
            },
            sound: Some(SoundReading {
                predicted,
                confidence: 0.9,
                runner_up: None,
            }),
        }
    }

    fn planner(n: usize) -> RulePlanner {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        RulePlanner::new(labels()[..n].to_vec(), Material::Glass, &mut rng)
    }

    #[test]
    fn first_knock_names_target() {
        let mut p = planner(3);
        let first = p.knock_order()[0];
        assert_eq!(p.step(None).unwrap(), format!("robot.knock_on({})", labels()[first]));
        let percept = knock_result(&p, first, Material::Glass);
        assert_eq!(
            p.step(Some(&percept)).unwrap(),
            format!("robot.pick_up({})", labels()[first])
        );
    }

    #[test]
    fn elimination_after_two_misses() {
        let mut p = planner(3);
        let order = p.knock_order().to_vec();
        assert_eq!(p.step(None).unwrap(), format!("robot.knock_on({})", labels()[order[0]]));
        let a = knock_result(&p, order[0], Material::Metal);
        assert_eq!(p.step(Some(&a)).unwrap(), format!("robot.knock_on({})", labels()[order[1]]));
        let b = knock_result(&p, order[1], Material::Fibre);
        assert_eq!(p.step(Some(&b)).unwrap(), format!("robot.pick_up({})", labels()[order[2]]));
        assert_eq!(p.last_prediction(), Some(Material::Fibre));
    }

    #[test]
    fn two_objects_eliminate_after_one_knock() {
        let mut p = planner(2);
        let order = p.knock_order().to_vec();
        p.step(None).unwrap();
        let a = knock_result(&p, order[0], Material::Ceramic);
        assert_eq!(p.step(Some(&a)).unwrap(), format!("robot.pick_up({})", labels()[order[1]]));
    }

    #[test]
    fn indistinct_feedback_unsupported() {
        let mut p = planner(3);
        let first = p.knock_order()[0];
        p.step(None).unwrap();
        let mut percept = knock_result(&p, first, Material::Glass);
        percept.sound = None;
        assert!(matches!(
            p.step(Some(&percept)),
            Err(PlannerError::UnsupportedFeedback)
        ));
    }

    #[test]
    fn never_knocks_twice() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = RulePlanner::new(labels(), Material::Glass, &mut rng);
            let mut knocked = Vec::new();
            let mut last = None;
            for _ in 0..3 {
                let cmd = p.step(last.as_ref()).unwrap();
                if cmd.starts_with("robot.pick_up") {
                    break;
                }
                let idx = p.pending.unwrap();
                assert!(!knocked.contains(&idx));
                knocked.push(idx);
                last = Some(knock_result(&p, idx, Material::Plastic));
            }
            assert!(knocked.len() <= 2);
        }
    }
}
