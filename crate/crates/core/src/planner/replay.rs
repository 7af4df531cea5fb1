use super::{Planner, PlannerError, StepView};

/// Returns pre-recorded planner outputs in order.
#[derive(Debug, Clone)]
pub struct ReplayPlanner {
    script: Vec<String>,
    cursor: usize,
}

impl ReplayPlanner {
    pub fn new(script: Vec<String>) -> Self {
        ReplayPlanner { script, cursor: 0 }
    }

    /// One entry per non-empty line.
    pub fn from_text(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn script(&self) -> &[String] {
        &self.script
    }

    pub fn next_entry(&mut self) -> Result<String, PlannerError> {
        let entry = self
            .script
            .get(self.cursor)
            .cloned()
            .ok_or(PlannerError::ScriptExhausted(self.cursor))?;
        self.cursor += 1;
        Ok(entry)
    }
}

impl Planner for ReplayPlanner {
    fn next_command(&mut self, _view: &StepView<'_>) -> Result<String, PlannerError> {
        self.next_entry()
    }
}
