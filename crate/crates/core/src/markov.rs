//! Analytic and simulated model of the window dynamics.
//!
//! A sequential process applying put/get operations (put with probability
//! `p`) over `width` slots of active-region height `depth` is a Markov
//! chain over the total number of active items. The coupled chain has
//! states `0..=K` with `K = depth * width`: interior states step by one,
//! the full state jumps down on a put by `shift * width - 1` and the empty
//! state jumps up symmetrically on a get. The decoupled chain is the
//! put-only version: states `1..=K`, deterministic +1 with a wrap to 1,
//! whose stationary distribution is uniform.

use thiserror::Error;

use crate::rng::Rng64;

/// Dense solves above this state count are refused; the chain at desk
/// scale is tiny and the closed form covers the p = 1/2 family anyway.
pub const MAX_STATES: usize = 2048;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("width must be at least 1")]
    ZeroWidth,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("shift {0} outside 1..=depth")]
    ShiftRange(u64),
    #[error("put probability {0} outside the open interval (0, 1)")]
    PutProbabilityRange(f64),
    #[error("closed form is only proven for p = 1/2 (got {0})")]
    ClosedFormNeedsHalf(f64),
    #[error("state space K = {0} exceeds the dense-solve cap {MAX_STATES}")]
    TooLarge(u64),
    #[error("degenerate parameterization: solve residual {0}")]
    Degenerate(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainVariant {
    Coupled,
    Decoupled,
}

/// Chain parameters. `K = depth * width` items fit in the window;
/// `l = shift * width - 1` is the boundary jump distance.
#[derive(Clone, Copy, Debug)]
pub struct ChainModel {
    pub depth: u64,
    pub width: usize,
    pub shift: u64,
    pub p: f64,
    pub variant: ChainVariant,
}

impl ChainModel {
    pub fn coupled(depth: u64, width: usize, shift: u64, p: f64) -> Result<Self, ModelError> {
        let model = ChainModel {
            depth,
            width,
            shift,
            p,
            variant: ChainVariant::Coupled,
        };
        model.validate()?;
        Ok(model)
    }

    /// The put-only chain of the monotone windows; shift is pinned to depth.
    pub fn decoupled(depth: u64, width: usize) -> Result<Self, ModelError> {
        let model = ChainModel {
            depth,
            width,
            shift: depth,
            p: 1.0,
            variant: ChainVariant::Decoupled,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 {
            return Err(ModelError::ZeroWidth);
        }
        if self.depth == 0 {
            return Err(ModelError::ZeroDepth);
        }
        if self.shift == 0 || self.shift > self.depth {
            return Err(ModelError::ShiftRange(self.shift));
        }
        if self.variant == ChainVariant::Coupled && (self.p <= 0.0 || self.p >= 1.0) {
            return Err(ModelError::PutProbabilityRange(self.p));
        }
        Ok(())
    }

    pub fn k(&self) -> u64 {
        self.depth * self.width as u64
    }

    /// Boundary jump distance `shift * width - 1`.
    pub fn boundary_jump(&self) -> u64 {
        self.shift * self.width as u64 - 1
    }

    fn state_count(&self) -> usize {
        match self.variant {
            ChainVariant::Coupled => self.k() as usize + 1,
            ChainVariant::Decoupled => self.k() as usize,
        }
    }
}

/// A stationary distribution; entries sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryVector(pub Vec<f64>);

impl StationaryVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Total-variation distance to another distribution of equal length.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        assert_eq!(self.0.len(), other.len());
        0.5 * self
            .0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Closed-form stationary distribution of the coupled chain at p = 1/2.
/// With `l = shift * width - 1` (replaced by `K - l` when `l > K - l`, by
/// symmetry) the vector rises linearly for `i < l`, is flat on the middle
/// band and falls symmetrically past `K - l`.
pub fn stationary_closed_form(model: &ChainModel) -> Result<StationaryVector, ModelError> {
    model.validate()?;
    if model.p != 0.5 {
        return Err(ModelError::ClosedFormNeedsHalf(model.p));
    }
    let k = model.k();
    let mut l = model.boundary_jump();
    if l > k - l {
        l = k - l;
    }
    let denom = ((l + 1) * (k + 1 - l)) as f64;
    let pi = (0..=k)
        .map(|i| {
            let numer = if i < l {
                i + 1
            } else if i <= k - l {
                l + 1
            } else {
                k - i + 1
            };
            numer as f64 / denom
        })
        .collect();
    Ok(StationaryVector(pi))
}

fn transition_matrix(model: &ChainModel) -> Vec<Vec<f64>> {
    let n = model.state_count();
    let mut m = vec![vec![0.0; n]; n];
    match model.variant {
        ChainVariant::Coupled => {
            let k = model.k() as usize;
            let l = model.boundary_jump() as usize;
            let p = model.p;
            for i in 0..=k {
                if i == k {
                    m[k][k - l] += p;
                    m[k][k - 1] += 1.0 - p;
                } else if i == 0 {
                    m[0][1] += p;
                    m[0][l] += 1.0 - p;
                } else {
                    m[i][i + 1] += p;
                    m[i][i - 1] += 1.0 - p;
                }
            }
        }
        ChainVariant::Decoupled => {
            // States 1..=K stored at indices 0..K: deterministic +1, K -> 1.
            let k = model.k() as usize;
            for i in 0..k {
                m[i][(i + 1) % k] = 1.0;
            }
        }
    }
    m
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite matrix entries")
        })?;
        if a[pivot][col].abs() < 1e-302 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for idx in col..n {
                    a[row][idx] -= factor * a[col][idx];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for idx in row + 1..n {
            s -= a[row][idx] * x[idx];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Stationary distribution via a dense solve of `pi M = pi`, sum = 1: the
/// balance equations transposed, with one row replaced by normalization.
/// Works for any put probability in (0, 1) and for the decoupled chain.
pub fn stationary_solve(model: &ChainModel) -> Result<StationaryVector, ModelError> {
    model.validate()?;
    let n = model.state_count();
    if n > MAX_STATES {
        return Err(ModelError::TooLarge(model.k()));
    }
    let m = transition_matrix(model);
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in m.iter().enumerate() {
        for (j, &prob) in row.iter().enumerate() {
            a[j][i] += prob;
        }
        a[i][i] -= 1.0;
    }
    for entry in a[n - 1].iter_mut() {
        *entry = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let pi = solve_dense(a, b).ok_or(ModelError::Degenerate(f64::INFINITY))?;

    // Residual of the balance equations, excluding the normalization row.
    let mut residual: f64 = 0.0;
    for j in 0..n {
        let flow: f64 = (0..n).map(|i| pi[i] * m[i][j]).sum();
        residual = residual.max((flow - pi[j]).abs());
    }
    if residual > 1e-10 || pi.iter().any(|&x| x < -1e-9) {
        return Err(ModelError::Degenerate(residual));
    }
    Ok(StationaryVector(pi))
}

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Analytic upper bound on the expected extra steps (hops plus window
/// shifts) per operation for `shift = depth`:
/// `(ln width + gamma) / depth + 2 / (K + 1)`. With one slot hops cannot
/// happen and only the shift term remains. A conservative composition of
/// the per-operation hop and shift expectations.
pub fn extra_steps_bound(model: &ChainModel) -> f64 {
    let k = model.k();
    let hop_term = if model.width == 1 {
        0.0
    } else {
        ((model.width as f64).ln() + EULER_MASCHERONI) / model.depth as f64
    };
    hop_term + 2.0 / (k + 1) as f64
}

/// Empirical statistics of a simulated sequential run.
#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub ops: u64,
    pub hops: u64,
    pub shifts: u64,
    /// Visit frequency per chain state, normalized.
    pub histogram: Vec<f64>,
}

impl SimulationReport {
    pub fn hops_per_op(&self) -> f64 {
        self.hops as f64 / self.ops as f64
    }

    pub fn shifts_per_op(&self) -> f64 {
        self.shifts as f64 / self.ops as f64
    }

    pub fn extra_per_op(&self) -> f64 {
        (self.hops + self.shifts) as f64 / self.ops as f64
    }
}

/// Simulates the sequential process exactly: stick to the current slot
/// until its active region is full (put) or empty (get), then hop
/// uniformly at random among the remaining slots; shift the window when no
/// slot is valid. Every probe beyond the first is one hop.
pub fn simulate_sequential(model: &ChainModel, n_ops: u64, seed: u64) -> SimulationReport {
    assert!(n_ops >= 1);
    let width = model.width;
    let depth = model.depth;
    let shift = model.shift;
    let decoupled = model.variant == ChainVariant::Decoupled;
    let mut rng = Rng64::from_seed(seed, 0);
    let mut active = vec![0u64; width];
    let mut current = 0usize;
    let mut hops = 0u64;
    let mut shifts = 0u64;
    let mut histogram = vec![0u64; model.state_count()];
    let mut scratch: Vec<usize> = Vec::with_capacity(width.saturating_sub(1));
    let mut total: u64 = 0;

    for _ in 0..n_ops {
        let is_put = decoupled || rng.chance(model.p);
        let valid = |n: u64| -> bool {
            if is_put {
                n < depth
            } else {
                n > 0
            }
        };

        if !valid(active[current]) {
            // Hop through the remaining slots in random order.
            scratch.clear();
            scratch.extend((0..width).filter(|&i| i != current));
            let mut found = false;
            while !scratch.is_empty() {
                let pick = rng.below(scratch.len());
                let slot = scratch.swap_remove(pick);
                hops += 1;
                current = slot;
                if valid(active[slot]) {
                    found = true;
                    break;
                }
            }
            if !found {
                // Window full (put) or empty (get): shift and complete on
                // the slot the thread ended on.
                shifts += 1;
                if is_put {
                    debug_assert!(active.iter().all(|&n| n == depth));
                    for n in active.iter_mut() {
                        *n -= shift;
                    }
                    total -= shift * width as u64;
                } else {
                    debug_assert!(active.iter().all(|&n| n == 0));
                    for n in active.iter_mut() {
                        *n += shift;
                    }
                    total += shift * width as u64;
                }
            }
        }

        if is_put {
            active[current] += 1;
            total += 1;
        } else {
            active[current] -= 1;
            total -= 1;
        }
        debug_assert_eq!(total, active.iter().sum::<u64>());
        let state_index = if decoupled {
            debug_assert!(total >= 1);
            (total - 1) as usize
        } else {
            total as usize
        };
        histogram[state_index] += 1;
    }

    SimulationReport {
        ops: n_ops,
        hops,
        shifts,
        histogram: histogram
            .into_iter()
            .map(|c| c as f64 / n_ops as f64)
            .collect(),
    }
}
