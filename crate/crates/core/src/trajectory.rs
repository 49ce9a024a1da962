/// Time series of states, with optional per-step solver data.
///
/// `states[0]` is the initial state; `steps[n]` describes the transition
/// from `states[n]` to `states[n + 1]` when the producer records it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S, D = ()> {
    pub states: Vec<S>,
    pub steps: Vec<D>,
}

impl<S, D> Trajectory<S, D> {
    pub fn new(initial: S) -> Self {
        Self {
            states: vec![initial],
            steps: Vec::new(),
        }
    }

    /// Number of steps taken (`states.len() - 1`).
    pub fn num_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn initial(&self) -> &S {
        &self.states[0]
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory always holds its initial state")
    }
}
