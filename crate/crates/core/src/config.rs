//! Structure configuration: the two relaxation dimensions plus shift split.

use thiserror::Error;

/// Progress guarantee implied by a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    LockFree,
    /// Coupled windows with `shift_up == shift_down == depth` can livelock
    /// against each other (a Get shifting down races a Put shifting up
    /// forever); the configuration is still accepted but only
    /// obstruction-free.
    ObstructionFree,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("width must be at least 1")]
    ZeroWidth,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("shift_up {0} outside 1..=depth")]
    ShiftUpRange(u64),
    #[error("shift_down {0} outside 1..=depth")]
    ShiftDownRange(u64),
}

/// Dimensions of a relaxed structure: `width` sub-structures, each allowed
/// `depth` operations per window, with the coupled window moving by
/// `shift_up`/`shift_down`. Decoupled windows always shift by `depth` and
/// ignore the shift fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructureConfig {
    pub width: usize,
    pub depth: u64,
    pub shift_up: u64,
    pub shift_down: u64,
    /// Random probes tried after an invalid start index before the search
    /// falls back to round-robin. Two is the usual power-of-two-choices pick.
    pub random_jumps: u32,
}

impl StructureConfig {
    /// Configuration with the default shift split
    /// `shift_up = shift_down = max(1, depth / 2)`, which keeps the coupled
    /// window away from full/empty states and stays lock-free for depth >= 2.
    pub fn new(width: usize, depth: u64) -> Result<Self, ConfigError> {
        let shift = (depth / 2).max(1);
        Self::with_shifts(width, depth, shift, shift)
    }

    /// Configuration with an explicit (possibly asymmetric) shift split.
    pub fn with_shifts(
        width: usize,
        depth: u64,
        shift_up: u64,
        shift_down: u64,
    ) -> Result<Self, ConfigError> {
        let cfg = StructureConfig {
            width,
            depth,
            shift_up,
            shift_down,
            random_jumps: 2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn random_jumps(mut self, jumps: u32) -> Self {
        self.random_jumps = jumps;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.width == 0 {
            return Err(ConfigError::ZeroWidth);
        }
        if self.depth == 0 {
            return Err(ConfigError::ZeroDepth);
        }
        if self.shift_up == 0 || self.shift_up > self.depth {
            return Err(ConfigError::ShiftUpRange(self.shift_up));
        }
        if self.shift_down == 0 || self.shift_down > self.depth {
            return Err(ConfigError::ShiftDownRange(self.shift_down));
        }
        Ok(())
    }

    /// Larger of the two shifts; the coupled stack bound is stated in terms
    /// of this when the split is asymmetric.
    pub fn max_shift(&self) -> u64 {
        self.shift_up.max(self.shift_down)
    }

    /// Progress guarantee of coupled-window structures under this
    /// configuration. Decoupled structures are lock-free regardless.
    pub fn coupled_progress(&self) -> Progress {
        if self.shift_up < self.depth || self.shift_down < self.depth {
            Progress::LockFree
        } else {
            Progress::ObstructionFree
        }
    }
}
