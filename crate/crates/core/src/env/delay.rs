use std::time::{Duration, Instant};

use super::{ActionId, EnvError, Environment, StepOutcome};

/// How [`DelayWrapper`] spends its per-step delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DelayMode {
    /// `thread::sleep`; frees the core, so many workers can overlap on few cores.
    #[default]
    Sleep,
    /// Busy-wait; models CPU-bound simulators and needs one core per worker.
    Spin,
}

/// Adds a fixed wall-clock cost to every `step` of the inner environment.
#[derive(Clone, Debug)]
pub struct DelayWrapper<E> {
    inner: E,
    step_delay: Duration,
    mode: DelayMode,
}

impl<E: Environment> DelayWrapper<E> {
    pub fn new(inner: E, step_delay: Duration) -> Self {
        Self { inner, step_delay, mode: DelayMode::Sleep }
    }

    pub fn with_mode(mut self, mode: DelayMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn step_delay(&self) -> Duration {
        self.step_delay
    }

    fn pause(&self) {
        if self.step_delay.is_zero() {
            return;
        }
        match self.mode {
            DelayMode::Sleep => std::thread::sleep(self.step_delay),
            DelayMode::Spin => {
                let until = Instant::now() + self.step_delay;
                while Instant::now() < until {
                    std::hint::spin_loop();
                }
            }
        }
    }
}

impl<E: Environment> Environment for DelayWrapper<E> {
    type State = E::State;

    fn name(&self) -> &str {
        self.inner.name()
    }

    fn action_count(&self) -> usize {
        self.inner.action_count()
    }

    fn initial_state(&self) -> Self::State {
        self.inner.initial_state()
    }

    fn is_terminal(&self, state: &Self::State) -> bool {
        self.inner.is_terminal(state)
    }

    fn step(&self, state: &Self::State, action: ActionId) -> Result<StepOutcome<Self::State>, EnvError> {
        self.pause();
        self.inner.step(state, action)
    }

    fn value_estimate(&self, state: &Self::State) -> Option<f64> {
        self.inner.value_estimate(state)
    }

    fn encode_state(&self, state: &Self::State) -> Vec<u8> {
        self.inner.encode_state(state)
    }

    fn decode_state(&self, bytes: &[u8]) -> Result<Self::State, EnvError> {
        self.inner.decode_state(bytes)
    }
}
