//! Configuration families: lower-bound constructions, phase-2 worst cases and
//! seeded random configurations for property testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{Configuration, Direction};
use crate::estimates::{true_estimate, BorderEstimate, EstimateError, EstimatePair};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

fn param(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Param(msg.into())
}

/// Estimates of a start-together group, derived left to right from the
/// leftmost member: member `k` has `k` more drones on its left and `k` fewer
/// on its right.
pub fn group_estimates<T: Scalar>(
    leader: &EstimatePair<T>,
    size: usize,
) -> Result<Vec<EstimatePair<T>>, ScenarioError> {
    (0..size)
        .map(|k| {
            Ok(EstimatePair::new(
                leader.left.shift_count(k as i64)?,
                leader.right.shift_count(-(k as i64))?,
            ))
        })
        .collect()
}

fn push_group<T: Scalar>(
    states: &mut Vec<(T, Direction, EstimatePair<T>)>,
    pos: T,
    dir: Direction,
    leader: &EstimatePair<T>,
    size: usize,
) -> Result<(), ScenarioError> {
    for est in group_estimates(leader, size)? {
        states.push((pos.clone(), dir, est));
    }
    Ok(())
}

/// Three-drone phase-1 worst case with `delta = 1/big_n`.
pub fn gen_three_drone_worst<T: Scalar>(big_n: u64) -> Result<Configuration<T>, ScenarioError> {
    if big_n < 12 {
        return Err(param(format!("N = {big_n} must be at least 12")));
    }
    gen_n_drone_worst(3, big_n)
}

/// Drone 1 alone at 0 with estimate `((-2 + 4 delta, N), (1, N))`; drones
/// `2..=n` together at `delta`, the group led by `((0, N), (2 - 2 delta, N))`.
pub fn gen_n_drone_worst<T: Scalar>(n: usize, big_n: u64) -> Result<Configuration<T>, ScenarioError> {
    if n < 3 {
        return Err(param(format!("n = {n} must be at least 3")));
    }
    if big_n < 4 * n as u64 {
        return Err(param(format!("N = {big_n} must be at least 4n = {}", 4 * n)));
    }
    let delta = T::one() / T::from_count(big_n);
    let two = T::from_int(2);
    let four = T::from_int(4);
    let first = EstimatePair::from_parts(
        four * delta.clone() - two.clone(),
        big_n,
        T::one(),
        big_n,
    );
    let leader = EstimatePair::from_parts(T::zero(), big_n, two.clone() - two * delta.clone(), big_n);
    let mut states = vec![(T::zero(), Direction::Right, first)];
    push_group(&mut states, delta, Direction::Right, &leader, n - 1)?;
    Ok(Configuration::from_states(T::zero(), states))
}

/// Five drones in three start groups: `{1}` at 0, `{2, 3}` at `1/100`,
/// `{4, 5}` at `2/100`.
pub fn gen_five_drone_three_groups<T: Scalar>() -> Configuration<T> {
    let lit = |s: &str| T::parse_exact(s).expect("constant literal");
    let hundred_million = 100_000_000;
    let million = 1_000_000;
    let first = EstimatePair::from_parts(lit("-250098"), hundred_million, lit("1"), million);
    let second = EstimatePair::from_parts(lit("-249999"), hundred_million, lit("2501"), million);
    let fourth = EstimatePair::from_parts(lit("-232446"), hundred_million, lit("13.94"), 5569);
    let eps = T::ratio(1, 100);
    let mut states = vec![(T::zero(), Direction::Right, first)];
    push_group(&mut states, eps.clone(), Direction::Right, &second, 2).expect("counts are large");
    push_group(&mut states, eps.clone() + eps, Direction::Right, &fourth, 2).expect("counts are large");
    Configuration::from_states(T::zero(), states)
}

/// Phase-2 worst case: correct estimates, drone `i` at `i * eps / n`, all
/// moving right.
pub fn gen_phase2_sharp<T: Scalar>(n: usize, eps: &T) -> Result<Configuration<T>, ScenarioError> {
    if n == 0 {
        return Err(param("n must be positive"));
    }
    let bound = T::one() / T::from_count(2 * n as u64);
    if !eps.is_positive() || *eps >= bound {
        return Err(param(format!("eps = {eps} must lie in (0, 1/(2n))")));
    }
    let states = (1..=n)
        .map(|i| {
            let pos = T::from_count(i as u64) * eps.clone() / T::from_count(n as u64);
            Ok((pos, Direction::Right, true_estimate(i, n)?))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(Configuration::from_states(T::zero(), states))
}

/// Two drones together at `eps`, moving right, whose shared common endpoint
/// is `1 - eps`. Counts are fixed at `ℓ = m = ceil(1/eps)`, `a = 0`, and `b`
/// solves `R((0, ℓ), (b, m)) = 1 - eps`.
pub fn gen_two_drone_worst<T: Scalar>(eps: &T) -> Result<Configuration<T>, ScenarioError> {
    if !eps.is_positive() || *eps >= T::ratio(1, 4) {
        return Err(param(format!("eps = {eps} must lie in (0, 1/4)")));
    }
    let counts = (T::one() / eps.clone())
        .ceil_to_i64()
        .ok_or_else(|| param("eps too small"))? as u64;
    let l = T::from_count(counts);
    let m = T::from_count(counts);
    // R = b (l + 1) / (l + m + 1) when a = 0
    let b = (T::one() - eps.clone()) * (l.clone() + m + T::one()) / (l + T::one());
    let leader = EstimatePair::from_parts(T::zero(), counts, b, counts);
    let mut states = Vec::new();
    push_group(&mut states, eps.clone(), Direction::Right, &leader, 2)?;
    Ok(Configuration::from_states(T::zero(), states))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateMode {
    /// Every drone knows its true estimate.
    Correct,
    /// True estimates with both border positions pushed right by a small
    /// positive amount, so no drone starts correct.
    Incorrect,
    /// Arbitrary estimates with `a < x < b`.
    Unconstrained,
}

impl EstimateMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "correct" => Some(EstimateMode::Correct),
            "incorrect" => Some(EstimateMode::Incorrect),
            "unconstrained" => Some(EstimateMode::Unconstrained),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EstimateMode::Correct => "correct",
            EstimateMode::Incorrect => "incorrect",
            EstimateMode::Unconstrained => "unconstrained",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomOptions {
    pub mode: EstimateMode,
    /// Positions are multiples of `1 / grid`.
    pub grid: u64,
    /// Probability that a drone joins the group of its left neighbour.
    pub group_prob: f64,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self {
            mode: EstimateMode::Correct,
            grid: 1000,
            group_prob: 0.15,
        }
    }
}

const MAX_BORDER_OFFSET: i64 = 10_000;
const MAX_COUNT: u64 = 100_000_000;

/// Reproducible random configuration. Start-together groups are derived from
/// their leftmost member so that they share estimates.
pub fn gen_random<T: Scalar>(
    n: usize,
    seed: u64,
    opts: &RandomOptions,
) -> Result<Configuration<T>, ScenarioError> {
    if n == 0 {
        return Err(param("n must be positive"));
    }
    if opts.grid == 0 || !(0.0..=1.0).contains(&opts.group_prob) {
        return Err(param("grid must be positive and group_prob in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = opts.grid;

    let mut ticks: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=grid)).collect();
    ticks.sort_unstable();
    // Group membership is decided before estimates; a joiner copies its
    // neighbour's position and direction.
    let mut joins = vec![false; n];
    for k in 1..n {
        if rng.gen_bool(opts.group_prob) {
            joins[k] = true;
            ticks[k] = ticks[k - 1];
        }
    }
    let mut dirs: Vec<Direction> = (0..n)
        .map(|_| if rng.gen_bool(0.5) { Direction::Right } else { Direction::Left })
        .collect();
    for k in 1..n {
        if joins[k] {
            dirs[k] = dirs[k - 1];
        } else if ticks[k] == ticks[k - 1] && dirs[k] == dirs[k - 1] {
            // Coincident and travelling together means they share estimates.
            joins[k] = true;
        }
    }
    let pos = |k: usize| T::from_count(ticks[k]) / T::from_count(grid);

    let mut states: Vec<(T, Direction, EstimatePair<T>)> = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        let mut size = 1;
        while k + size < n && joins[k + size] {
            size += 1;
        }
        let x = pos(k);
        let leader = match opts.mode {
            EstimateMode::Correct => true_estimate(k + 1, n)?,
            EstimateMode::Incorrect => {
                let truth: EstimatePair<T> = true_estimate(k + 1, n)?;
                let bump = |rng: &mut ChaCha8Rng| T::ratio(rng.gen_range(1..=999), 100_000);
                EstimatePair::new(
                    BorderEstimate::new(truth.left.pos + bump(&mut rng), truth.left.count),
                    BorderEstimate::new(truth.right.pos + bump(&mut rng), truth.right.count),
                )
            }
            EstimateMode::Unconstrained => {
                let x_last = pos(k + size - 1);
                let offset = |rng: &mut ChaCha8Rng| {
                    // Log-uniform-ish magnitude between 1/1000 and 10^4.
                    let exp = rng.gen_range(-3i32..=4);
                    let scale = if exp >= 0 {
                        T::from_int(10i64.pow(exp as u32))
                    } else {
                        T::ratio(1, 10i64.pow((-exp) as u32))
                    };
                    scale * T::ratio(rng.gen_range(1..=1000), 1000)
                };
                let a = x.clone() - offset(&mut rng);
                let b = x_last + offset(&mut rng);
                let a = a.max(T::from_int(-MAX_BORDER_OFFSET));
                let b = b.min(T::from_int(MAX_BORDER_OFFSET));
                let l = rng.gen_range(0..=MAX_COUNT);
                let m = rng.gen_range((size as u64 - 1)..=MAX_COUNT);
                EstimatePair::from_parts(a, l, b, m)
            }
        };
        push_group(&mut states, x, dirs[k], &leader, size)?;
        k += size;
    }
    Ok(Configuration::from_states(T::zero(), states))
}
