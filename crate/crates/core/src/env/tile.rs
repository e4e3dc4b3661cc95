use super::{
    check_action, splitmix64, ActionId, EnvError, Environment, Reader, StepOutcome,
    STATE_FORMAT_VERSION,
};

const TAG: u8 = 0x02;
const EMPTY: u8 = 0;

/// Tap-to-eliminate grid puzzle.
///
/// Cells are stored row-major with row 0 at the bottom; colors are `1..=colors`
/// and `0` marks an empty cell. Tapping a cell removes its maximal 4-connected
/// same-color group when the group has at least two cells, after which every
/// column collapses toward row 0. Any other tap is a legal no-op that still
/// costs a step. The episode ends with reward 1 once `goal` cells have been
/// eliminated, or with reward 0 when the step budget runs out.
#[derive(Clone, Debug)]
pub struct TilePuzzleEnv {
    width: usize,
    height: usize,
    colors: u8,
    step_budget: u32,
    goal: u32,
    board: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TileState {
    cells: Vec<u8>,
    steps_used: u32,
    eliminated: u32,
}

impl TileState {
    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn steps_used(&self) -> u32 {
        self.steps_used
    }

    pub fn eliminated(&self) -> u32 {
        self.eliminated
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c != EMPTY).count()
    }
}

impl TilePuzzleEnv {
    /// Board drawn from `seed`: each cell gets a hashed color in `1..=colors`.
    pub fn generate(
        width: usize,
        height: usize,
        colors: u8,
        step_budget: u32,
        goal: u32,
        seed: u64,
    ) -> Result<Self, EnvError> {
        Self::check_params(width, height, colors)?;
        let base = splitmix64(seed);
        let board = (0..width * height)
            .map(|i| (splitmix64(base ^ i as u64) % colors as u64) as u8 + 1)
            .collect();
        Ok(Self { width, height, colors, step_budget, goal, board })
    }

    /// Board given explicitly, `rows[0]` being the bottom row.
    pub fn from_rows(rows: &[Vec<u8>], colors: u8, step_budget: u32, goal: u32) -> Result<Self, EnvError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        Self::check_params(width, height, colors)?;
        if rows.iter().any(|r| r.len() != width) {
            return Err(EnvError::Params("ragged board".into()));
        }
        let board: Vec<u8> = rows.iter().flatten().copied().collect();
        if board.iter().any(|&c| c == EMPTY || c > colors) {
            return Err(EnvError::Params(format!("cell colors must be in 1..={colors}")));
        }
        Ok(Self { width, height, colors, step_budget, goal, board })
    }

    fn check_params(width: usize, height: usize, colors: u8) -> Result<(), EnvError> {
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(EnvError::Params(format!("bad board size {width}x{height}")));
        }
        if colors < 2 {
            return Err(EnvError::Params("need at least 2 colors".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn colors(&self) -> u8 {
        self.colors
    }

    pub fn step_budget(&self) -> u32 {
        self.step_budget
    }

    pub fn goal(&self) -> u32 {
        self.goal
    }

    /// Action index for tapping `(row, col)`.
    pub fn tap(&self, row: usize, col: usize) -> ActionId {
        ActionId(row * self.width + col)
    }

    /// Cells of the 4-connected same-color group containing `idx`.
    pub fn group(&self, cells: &[u8], idx: usize) -> Vec<usize> {
        let color = cells[idx];
        if color == EMPTY {
            return Vec::new();
        }
        let mut seen = vec![false; cells.len()];
        let mut stack = vec![idx];
        let mut group = Vec::new();
        seen[idx] = true;
        while let Some(i) = stack.pop() {
            group.push(i);
            let (r, c) = (i / self.width, i % self.width);
            let mut visit = |j: usize| {
                if !seen[j] && cells[j] == color {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - self.width);
            }
            if r + 1 < self.height {
                visit(i + self.width);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < self.width {
                visit(i + 1);
            }
        }
        group
    }

    fn collapse(&self, cells: &mut [u8]) {
        for c in 0..self.width {
            let mut write = 0;
            for r in 0..self.height {
                let v = cells[r * self.width + c];
                if v != EMPTY {
                    cells[write * self.width + c] = v;
                    write += 1;
                }
            }
            for r in write..self.height {
                cells[r * self.width + c] = EMPTY;
            }
        }
    }
}

impl Environment for TilePuzzleEnv {
    type State = TileState;

    fn name(&self) -> &str {
        "tile"
    }

    fn action_count(&self) -> usize {
        self.width * self.height
    }

    fn initial_state(&self) -> TileState {
        TileState { cells: self.board.clone(), steps_used: 0, eliminated: 0 }
    }

    fn is_terminal(&self, state: &TileState) -> bool {
        state.eliminated >= self.goal || state.steps_used >= self.step_budget
    }

    fn step(&self, state: &TileState, action: ActionId) -> Result<StepOutcome<TileState>, EnvError> {
        check_action(action, self.action_count())?;
        if self.is_terminal(state) {
            return Err(EnvError::TerminalState);
        }
        let mut next = state.clone();
        next.steps_used += 1;
        let group = self.group(&next.cells, action.0);
        if group.len() >= 2 {
            for &i in &group {
                next.cells[i] = EMPTY;
            }
            self.collapse(&mut next.cells);
            next.eliminated += group.len() as u32;
        }
        let solved = next.eliminated >= self.goal;
        let terminal = solved || next.steps_used >= self.step_budget;
        Ok(StepOutcome { next_state: next, reward: if solved { 1.0 } else { 0.0 }, terminal })
    }

    fn encode_state(&self, state: &TileState) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + state.cells.len());
        out.push(STATE_FORMAT_VERSION);
        out.push(TAG);
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.extend_from_slice(&state.steps_used.to_le_bytes());
        out.extend_from_slice(&state.eliminated.to_le_bytes());
        out.extend_from_slice(&state.cells);
        out
    }

    fn decode_state(&self, bytes: &[u8]) -> Result<TileState, EnvError> {
        let mut r = Reader::new(bytes, TAG)?;
        let (w, h) = (r.u16()? as usize, r.u16()? as usize);
        if (w, h) != (self.width, self.height) {
            return Err(EnvError::Decode(format!("board {w}x{h} does not match {}x{}", self.width, self.height)));
        }
        let steps_used = r.u32()?;
        let eliminated = r.u32()?;
        let cells = r.rest().to_vec();
        if cells.len() != w * h || cells.iter().any(|&c| c > self.colors) {
            return Err(EnvError::Decode("bad cell payload".into()));
        }
        Ok(TileState { cells, steps_used, eliminated })
    }
}
