//! Environment abstraction: deterministic, finite-action MDPs whose states can
//! be duplicated and handed to worker threads.
//!
//! Three environments ship with the crate:
//!
//! * [`SyntheticTreeEnv`] is a fixed-depth tree with seeded leaf rewards, small
//!   enough to be searched exhaustively.
//! * [`TilePuzzleEnv`] is a tap-to-eliminate grid puzzle.
//! * [`DelayWrapper`] adds a fixed wall-clock cost to every `step` of an
//!   inner environment without changing its outcomes.

mod delay;
mod synthetic;
mod tile;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delay::{DelayMode, DelayWrapper};
pub use synthetic::{SyntheticState, SyntheticTreeEnv};
pub use tile::{TilePuzzleEnv, TileState};

/// Version byte prefixed to every encoded state.
pub const STATE_FORMAT_VERSION: u8 = 1;

/// Largest number of action sequences the exhaustive solver will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

/// Index of an action in `[0, action_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of applying one action to a state.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<S> {
    pub next_state: S,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("action {action} out of range (action count {count})")]
    InvalidAction { action: usize, count: usize },
    #[error("cannot step a terminal state")]
    TerminalState,
    #[error("state encoding: {0}")]
    Decode(String),
    #[error("exhaustive search over {paths} paths exceeds the limit of {limit}")]
    SizeLimit { paths: u64, limit: u64 },
    #[error("invalid environment parameters: {0}")]
    Params(String),
}

/// A deterministic MDP with a fixed, finite action set.
///
/// States are plain values: `step` takes the state by reference and returns a
/// fresh successor, so the original is never modified. `Clone` on a state is
/// the duplication used by the master's state buffer.
pub trait Environment: Send + Sync + 'static {
    type State: Clone + Send + fmt::Debug + 'static;

    fn name(&self) -> &str;

    /// Number of actions; constant for the lifetime of the environment.
    fn action_count(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    fn is_terminal(&self, state: &Self::State) -> bool;

    fn step(&self, state: &Self::State, action: ActionId) -> Result<StepOutcome<Self::State>, EnvError>;

    /// Optional state-value estimate used to cut rollouts at a horizon and to
    /// blend with the rollout return. `None` means no estimator is configured.
    fn value_estimate(&self, _state: &Self::State) -> Option<f64> {
        None
    }

    /// Little-endian byte encoding: [`STATE_FORMAT_VERSION`] followed by an
    /// environment-specific payload.
    fn encode_state(&self, state: &Self::State) -> Vec<u8>;

    fn decode_state(&self, bytes: &[u8]) -> Result<Self::State, EnvError>;
}

/// Attaches a state-value estimator to an environment.
pub struct WithValueEstimate<E, F> {
    inner: E,
    estimator: F,
}

impl<E, F> WithValueEstimate<E, F>
where
    E: Environment,
    F: Fn(&E::State) -> f64 + Send + Sync + 'static,
{
    pub fn new(inner: E, estimator: F) -> Self {
        Self { inner, estimator }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E, F> Environment for WithValueEstimate<E, F>
where
    E: Environment,
    F: Fn(&E::State) -> f64 + Send + Sync + 'static,
{
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
        self.inner.step(state, action)
    }

    fn value_estimate(&self, state: &Self::State) -> Option<f64> {
        Some((self.estimator)(state))
    }

    fn encode_state(&self, state: &Self::State) -> Vec<u8> {
        self.inner.encode_state(state)
    }

    fn decode_state(&self, bytes: &[u8]) -> Result<Self::State, EnvError> {
        self.inner.decode_state(bytes)
    }
}

pub(crate) fn check_action(action: ActionId, count: usize) -> Result<(), EnvError> {
    if action.0 >= count {
        Err(EnvError::InvalidAction { action: action.0, count })
    } else {
        Ok(())
    }
}

/// Exact maximum discounted return from `state`, together with the first
/// action of an optimal sequence (lowest index among ties).
///
/// Enumerates every action sequence; fails with [`EnvError::SizeLimit`] once
/// more than `limit` transitions would be explored.
pub fn exhaustive_search<E: Environment>(
    env: &E,
    state: &E::State,
    gamma: f64,
    limit: u64,
) -> Result<(f64, Option<ActionId>), EnvError> {
    fn go<E: Environment>(
        env: &E,
        state: &E::State,
        gamma: f64,
        budget: &mut u64,
        limit: u64,
    ) -> Result<(f64, Option<ActionId>), EnvError> {
        if env.is_terminal(state) {
            return Ok((0.0, None));
        }
        let mut best: Option<(f64, ActionId)> = None;
        for a in 0..env.action_count() {
            if *budget == 0 {
                return Err(EnvError::SizeLimit { paths: limit + 1, limit });
            }
            *budget -= 1;
            let out = env.step(state, ActionId(a))?;
            let tail = if out.terminal {
                0.0
            } else {
                go(env, &out.next_state, gamma, budget, limit)?.0
            };
            let value = out.reward + gamma * tail;
            if best.is_none_or(|(v, _)| value > v) {
                best = Some((value, ActionId(a)));
            }
        }
        Ok(best.map_or((0.0, None), |(v, a)| (v, Some(a))))
    }
    let mut budget = limit;
    go(env, state, gamma, &mut budget, limit)
}

/// Splitmix64 finalizer; the building block of every seeded hash in this crate.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps a hash to a uniform value in `[0, 1)` using its top 53 bits.
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], tag: u8) -> Result<Self, EnvError> {
        match bytes {
            [STATE_FORMAT_VERSION, t, ..] if *t == tag => Ok(Self { bytes, pos: 2 }),
            [STATE_FORMAT_VERSION, t, ..] => Err(EnvError::Decode(format!("unexpected tag {t:#04x}"))),
            [v, ..] => Err(EnvError::Decode(format!("unsupported version {v}"))),
            [] => Err(EnvError::Decode("empty buffer".into())),
        }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], EnvError> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| EnvError::Decode("truncated buffer".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length checked"))
    }

    pub(crate) fn u16(&mut self) -> Result<u16, EnvError> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, EnvError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, EnvError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub(crate) fn rest(&mut self) -> &'a [u8] {
        let rest = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        rest
    }

    pub(crate) fn finish(&self) -> Result<(), EnvError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(EnvError::Decode("trailing bytes".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two actions, depth 3, every reward zero.
    struct ZeroEnv;

    impl Environment for ZeroEnv {
        type State = u32;
        fn name(&self) -> &str {
            "zero"
        }
        fn action_count(&self) -> usize {
            2
        }
        fn initial_state(&self) -> u32 {
            0
        }
        fn is_terminal(&self, s: &u32) -> bool {
            *s >= 3
        }
        fn step(&self, s: &u32, a: ActionId) -> Result<StepOutcome<u32>, EnvError> {
            check_action(a, 2)?;
            Ok(StepOutcome { next_state: s + 1, reward: 0.0, terminal: s + 1 >= 3 })
        }
        fn encode_state(&self, s: &u32) -> Vec<u8> {
            s.to_le_bytes().to_vec()
        }
        fn decode_state(&self, b: &[u8]) -> Result<u32, EnvError> {
            Ok(u32::from_le_bytes(b.try_into().map_err(|_| EnvError::Decode("len".into()))?))
        }
    }

    #[test]
    fn all_zero_rewards_give_zero_optimum() {
        let (v, _) = exhaustive_search(&ZeroEnv, &0, 0.9, EXHAUSTIVE_LIMIT).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn exhaustive_search_respects_limit() {
        let err = exhaustive_search(&ZeroEnv, &0, 1.0, 5).unwrap_err();
        assert!(matches!(err, EnvError::SizeLimit { .. }));
    }

    #[test]
    fn value_estimate_wrapper_is_transparent() {
        let env = WithValueEstimate::new(ZeroEnv, |s: &u32| *s as f64);
        assert_eq!(env.action_count(), 2);
        assert_eq!(env.value_estimate(&2), Some(2.0));
        assert_eq!(ZeroEnv.value_estimate(&2), None);
        assert_eq!(env.step(&0, ActionId(1)).unwrap(), ZeroEnv.step(&0, ActionId(1)).unwrap());
    }

    #[test]
    fn unit_interval_is_half_open() {
        assert_eq!(unit_interval(0), 0.0);
        assert!(unit_interval(u64::MAX) < 1.0);
    }
}
