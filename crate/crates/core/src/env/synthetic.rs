use super::{
    check_action, exhaustive_search, splitmix64, unit_interval, ActionId, EnvError, Environment,
    Reader, StepOutcome, EXHAUSTIVE_LIMIT, STATE_FORMAT_VERSION,
};

const TAG: u8 = 0x01;
const ACTION_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const LEAF_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// Complete `branching`-ary tree of fixed `depth`. Only the transition into a
/// leaf is rewarded; the reward is a uniform `[0, 1)` value hashed from the
/// seed and the root-to-leaf action string.
#[derive(Clone, Debug)]
pub struct SyntheticTreeEnv {
    branching: usize,
    depth: u32,
    seed: u64,
}

/// Position in the synthetic tree: depth plus a running hash of the actions taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SyntheticState {
    depth: u32,
    key: u64,
}

impl SyntheticState {
    pub fn depth(&self) -> u32 {
        self.depth
    }
}

impl SyntheticTreeEnv {
    pub fn new(branching: usize, depth: u32, seed: u64) -> Result<Self, EnvError> {
        if branching < 2 {
            return Err(EnvError::Params(format!("branching must be >= 2, got {branching}")));
        }
        if depth < 1 {
            return Err(EnvError::Params("depth must be >= 1".into()));
        }
        Ok(Self { branching, depth, seed })
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of root-to-leaf paths, saturating at `u64::MAX`.
    pub fn leaf_count(&self) -> u64 {
        (self.branching as u64).saturating_pow(self.depth)
    }

    /// State reached by following `actions` from the root.
    pub fn state_after(&self, actions: &[usize]) -> Result<SyntheticState, EnvError> {
        actions.iter().try_fold(self.initial_state(), |s, &a| {
            self.step(&s, ActionId(a)).map(|o| o.next_state)
        })
    }

    /// Exact maximum discounted return from the root over all leaves.
    pub fn optimal_return(&self, gamma: f64) -> Result<f64, EnvError> {
        self.optimal_plan(gamma).map(|(v, _)| v)
    }

    /// Optimal return and the first action of an optimal path.
    pub fn optimal_plan(&self, gamma: f64) -> Result<(f64, ActionId), EnvError> {
        let leaves = self.leaf_count();
        if leaves > EXHAUSTIVE_LIMIT {
            return Err(EnvError::SizeLimit { paths: leaves, limit: EXHAUSTIVE_LIMIT });
        }
        let (v, a) = exhaustive_search(self, &self.initial_state(), gamma, u64::MAX)?;
        Ok((v, a.expect("root is never terminal")))
    }

    fn child_key(key: u64, action: usize) -> u64 {
        splitmix64(key ^ (action as u64 + 1).wrapping_mul(ACTION_SALT))
    }

    fn leaf_reward(key: u64) -> f64 {
        unit_interval(splitmix64(key ^ LEAF_SALT))
    }
}

impl Environment for SyntheticTreeEnv {
    type State = SyntheticState;

    fn name(&self) -> &str {
        "synthetic"
    }

    fn action_count(&self) -> usize {
        self.branching
    }

    fn initial_state(&self) -> SyntheticState {
        SyntheticState { depth: 0, key: splitmix64(self.seed) }
    }

    fn is_terminal(&self, state: &SyntheticState) -> bool {
        state.depth >= self.depth
    }

    fn step(&self, state: &SyntheticState, action: ActionId) -> Result<StepOutcome<SyntheticState>, EnvError> {
        check_action(action, self.branching)?;
        if self.is_terminal(state) {
            return Err(EnvError::TerminalState);
        }
        let next = SyntheticState { depth: state.depth + 1, key: Self::child_key(state.key, action.0) };
        let terminal = next.depth >= self.depth;
        let reward = if terminal { Self::leaf_reward(next.key) } else { 0.0 };
        Ok(StepOutcome { next_state: next, reward, terminal })
    }

    fn encode_state(&self, state: &SyntheticState) -> Vec<u8> {
        let mut out = Vec::with_capacity(14);
        out.push(STATE_FORMAT_VERSION);
        out.push(TAG);
        out.extend_from_slice(&state.depth.to_le_bytes());
        out.extend_from_slice(&state.key.to_le_bytes());
        out
    }

    fn decode_state(&self, bytes: &[u8]) -> Result<SyntheticState, EnvError> {
        let mut r = Reader::new(bytes, TAG)?;
        let depth = r.u32()?;
        let key = r.u64()?;
        r.finish()?;
        if depth > self.depth {
            return Err(EnvError::Decode(format!("depth {depth} beyond tree depth {}", self.depth)));
        }
        Ok(SyntheticState { depth, key })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent leaf-reward oracle: hashes an explicit action string
    /// instead of following `step`.
    fn oracle_leaf(seed: u64, actions: &[usize]) -> f64 {
        let mut key = splitmix64(seed);
        for &a in actions {
            key = splitmix64(key ^ (a as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
        unit_interval(splitmix64(key ^ 0xD1B5_4A32_D192_ED03))
    }

    // Frozen from an out-of-tree Python splitmix64 run for seed 7.
    const LEAF_B2_D1_SEED7: [f64; 2] = [0.13170620676727351, 0.6155555286161208];
    const LEAF_B2_D2_SEED7: [f64; 4] =
        [0.1884980321352555, 0.7007842814185768, 0.47707760419085055, 0.21213169728574366];

    #[test]
    fn oracle_matches_frozen_fixture() {
        for (a, want) in LEAF_B2_D1_SEED7.iter().enumerate() {
            assert_eq!(oracle_leaf(7, &[a]), *want);
        }
        for (i, want) in LEAF_B2_D2_SEED7.iter().enumerate() {
            assert_eq!(oracle_leaf(7, &[i / 2, i % 2]), *want);
        }
    }

    #[test]
    fn depth_one_leaves_match_fixture() {
        let env = SyntheticTreeEnv::new(2, 1, 7).unwrap();
        let root = env.initial_state();
        for a in 0..2 {
            let out = env.step(&root, ActionId(a)).unwrap();
            assert!(out.terminal);
            assert_eq!(out.reward, LEAF_B2_D1_SEED7[a]);
            assert!((0.0..1.0).contains(&out.reward));
        }
    }

    #[test]
    fn optimal_return_depth_one_is_max_leaf() {
        let env = SyntheticTreeEnv::new(2, 1, 7).unwrap();
        let best = LEAF_B2_D1_SEED7[0].max(LEAF_B2_D1_SEED7[1]);
        assert_eq!(env.optimal_return(0.9).unwrap(), best);
    }

    #[test]
    fn optimal_return_depth_two_by_enumeration() {
        let env = SyntheticTreeEnv::new(2, 2, 7).unwrap();
        let gamma = 0.5;
        // One intermediate zero reward, then the leaf reward discounted once.
        let want = LEAF_B2_D2_SEED7.iter().map(|r| gamma * r).fold(f64::MIN, f64::max);
        assert_eq!(env.optimal_return(gamma).unwrap(), want);
        let (_, first) = env.optimal_plan(1.0).unwrap();
        assert_eq!(first, ActionId(0));
    }

    #[test]
    fn action_count_is_branching() {
        assert_eq!(SyntheticTreeEnv::new(4, 6, 0).unwrap().action_count(), 4);
    }

    #[test]
    fn errors() {
        let env = SyntheticTreeEnv::new(2, 1, 7).unwrap();
        let root = env.initial_state();
        assert_eq!(
            env.step(&root, ActionId(2)).unwrap_err(),
            EnvError::InvalidAction { action: 2, count: 2 }
        );
        let leaf = env.step(&root, ActionId(0)).unwrap().next_state;
        assert_eq!(env.step(&leaf, ActionId(0)).unwrap_err(), EnvError::TerminalState);
        assert!(SyntheticTreeEnv::new(1, 3, 0).is_err());
        assert!(SyntheticTreeEnv::new(2, 0, 0).is_err());
        let big = SyntheticTreeEnv::new(10, 7, 0).unwrap();
        assert!(matches!(big.optimal_return(1.0), Err(EnvError::SizeLimit { .. })));
    }

    #[test]
    fn encoding_layout() {
        let env = SyntheticTreeEnv::new(3, 4, 11).unwrap();
        let s = env.state_after(&[2, 1]).unwrap();
        let bytes = env.encode_state(&s);
        assert_eq!(bytes.len(), 14);
        assert_eq!(&bytes[..2], &[1, 0x01]);
        assert_eq!(&bytes[2..6], &2u32.to_le_bytes());
        assert_eq!(env.decode_state(&bytes).unwrap(), s);
        assert!(env.decode_state(&bytes[..10]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = 9;
        assert!(env.decode_state(&wrong).is_err());
    }
}
