use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{Planner, PlannerError, StepView};
use crate::grammar::{render_command, Command, Skill};

/// Picks a uniformly random visible object straight away.
#[derive(Debug, Clone)]
pub struct RandomPlanner {
    rng: ChaCha8Rng,
}

impl RandomPlanner {
    pub fn new(rng: ChaCha8Rng) -> Self {
        RandomPlanner { rng }
    }
}

impl Planner for RandomPlanner {
    fn next_command(&mut self, view: &StepView<'_>) -> Result<String, PlannerError> {
        let label = view
            .visible
            .choose(&mut self.rng)
            .ok_or_else(|| PlannerError::Backend("no visible objects".into()))?;
        Ok(render_command(&Command::on(Skill::PickUp, *label)))
    }
}
