//! Weighted-border calculus without the `+1` terms, the four-pairing
//! implication over it, and the same implication evaluated with the exact
//! endpoints (where it fails).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::Trace;
use crate::estimates::{BorderEstimate, EstimateError, EstimatePair, Side};
use crate::scalar::Scalar;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("count must be at least 1")]
    Count,
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

impl AlgebraError {
    pub fn name(&self) -> &'static str {
        match self {
            AlgebraError::Count => "CountError",
            AlgebraError::Estimate(_) => "EstimateError",
        }
    }
}

/// A border position with a positive drone count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightedBorder<T = Rational> {
    pub pos: T,
    pub count: u64,
}

impl<T: Scalar> WeightedBorder<T> {
    pub fn new(pos: T, count: u64) -> Result<Self, AlgebraError> {
        if count == 0 {
            return Err(AlgebraError::Count);
        }
        Ok(Self { pos, count })
    }

    fn weight(&self) -> T {
        T::from_count(self.count)
    }
}

impl<T: Scalar> TryFrom<BorderEstimate<T>> for WeightedBorder<T> {
    type Error = AlgebraError;

    fn try_from(e: BorderEstimate<T>) -> Result<Self, AlgebraError> {
        Self::new(e.pos, e.count)
    }
}

fn check<T: Scalar>(w: &WeightedBorder<T>) -> Result<(), AlgebraError> {
    if w.count == 0 {
        Err(AlgebraError::Count)
    } else {
        Ok(())
    }
}

/// `(a m + b l) / (l + m)`.
pub fn p_value<T: Scalar>(alpha: &WeightedBorder<T>, beta: &WeightedBorder<T>) -> Result<T, AlgebraError> {
    check(alpha)?;
    check(beta)?;
    let (l, m) = (alpha.weight(), beta.weight());
    Ok((alpha.pos.clone() * m.clone() + beta.pos.clone() * l.clone()) / (l + m))
}

/// `(b - a) / (l + m)`.
pub fn i_prime<T: Scalar>(alpha: &WeightedBorder<T>, beta: &WeightedBorder<T>) -> Result<T, AlgebraError> {
    check(alpha)?;
    check(beta)?;
    Ok((beta.pos.clone() - alpha.pos.clone()) / (alpha.weight() + beta.weight()))
}

/// `(c - a) / l`.
pub fn v<T: Scalar>(alpha: &WeightedBorder<T>, c: &T) -> Result<T, AlgebraError> {
    check(alpha)?;
    Ok((c.clone() - alpha.pos.clone()) / alpha.weight())
}

/// `(b - c) / m`.
pub fn w<T: Scalar>(beta: &WeightedBorder<T>, c: &T) -> Result<T, AlgebraError> {
    check(beta)?;
    Ok((beta.pos.clone() - c.clone()) / beta.weight())
}

/// Outcome of the four-pairing implication. Values are ordered
/// `(α1, β2), (α2, β3), (α2, β2), (α1, β3)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict<T = Rational> {
    HypothesisFails,
    ImplicationHolds,
    Violation { values: [T; 4], i_prime: Option<[T; 4]> },
}

impl<T> Verdict<T> {
    pub fn is_violation(&self) -> bool {
        matches!(self, Verdict::Violation { .. })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::HypothesisFails => "hypothesis_fails",
            Verdict::ImplicationHolds => "implication_holds",
            Verdict::Violation { .. } => "violation",
        }
    }
}

fn hypothesis<T: Scalar>(v: &[T; 4]) -> bool {
    let lo = std::cmp::max(&v[0], &v[1]);
    let hi = std::cmp::min(&v[2], &v[3]);
    lo <= hi
}

fn all_equal<T: Scalar>(v: &[T; 4]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// If `max(P(α1,β2), P(α2,β3)) <= min(P(α2,β2), P(α1,β3))` then all four
/// values, and the four matching interval sizes, coincide.
pub fn check_implication<T: Scalar>(
    a1: &WeightedBorder<T>,
    a2: &WeightedBorder<T>,
    b2: &WeightedBorder<T>,
    b3: &WeightedBorder<T>,
) -> Result<Verdict<T>, AlgebraError> {
    let pairs = [(a1, b2), (a2, b3), (a2, b2), (a1, b3)];
    let mut p = Vec::with_capacity(4);
    let mut ip = Vec::with_capacity(4);
    for (a, b) in pairs {
        p.push(p_value(a, b)?);
        ip.push(i_prime(a, b)?);
    }
    let p: [T; 4] = p.try_into().expect("four values");
    let ip: [T; 4] = ip.try_into().expect("four values");
    if !hypothesis(&p) {
        return Ok(Verdict::HypothesisFails);
    }
    if all_equal(&p) && all_equal(&ip) {
        Ok(Verdict::ImplicationHolds)
    } else {
        Ok(Verdict::Violation { values: p, i_prime: Some(ip) })
    }
}

/// How one pairing is evaluated once the `+1` terms are restored: which
/// endpoint of the interval, and count shifts applied to α and β first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairingRule {
    pub side: Side,
    pub alpha_shift: i64,
    pub beta_shift: i64,
}

impl PairingRule {
    pub const fn right() -> Self {
        Self { side: Side::Right, alpha_shift: 0, beta_shift: 0 }
    }

    pub const fn left() -> Self {
        Self { side: Side::Left, alpha_shift: 0, beta_shift: 0 }
    }
}

/// One rule per pairing, in the order used by [`Verdict`].
pub type PlusOnesPattern = [PairingRule; 4];

/// Every pairing read as a right endpoint without shifts. Since
/// `R(α, β) = P(α⁺, β)`, this is the `P` implication in disguise and can
/// never be violated.
pub const RIGHT_ENDPOINTS: PlusOnesPattern = [PairingRule::right(); 4];

/// Shifts produced by actual meetings: a left drone that has just met its
/// right neighbour holds `(α, β⁺)`, a drone that has not shared yet holds
/// `(α, β)`, and after two rounds of sharing the outermost borders appear
/// as `(α⁺, β⁺)`.
pub const MEET_PATTERN: PlusOnesPattern = [
    PairingRule { side: Side::Right, alpha_shift: 0, beta_shift: 1 },
    PairingRule { side: Side::Right, alpha_shift: 0, beta_shift: 1 },
    PairingRule { side: Side::Right, alpha_shift: 0, beta_shift: 0 },
    PairingRule { side: Side::Right, alpha_shift: 1, beta_shift: 1 },
];

fn endpoint<T: Scalar>(
    alpha: &BorderEstimate<T>,
    beta: &BorderEstimate<T>,
    rule: &PairingRule,
) -> Result<T, EstimateError> {
    let e = EstimatePair::new(alpha.shift_count(rule.alpha_shift)?, beta.shift_count(rule.beta_shift)?);
    Ok(match rule.side {
        Side::Left => e.left_endpoint(),
        Side::Right => e.right_endpoint(),
    })
}

/// The four-pairing implication evaluated with exact endpoints instead of `P`.
pub fn check_implication_with_plus_ones<T: Scalar>(
    a1: &BorderEstimate<T>,
    a2: &BorderEstimate<T>,
    b2: &BorderEstimate<T>,
    b3: &BorderEstimate<T>,
    pattern: &PlusOnesPattern,
) -> Result<Verdict<T>, AlgebraError> {
    let pairs = [(a1, b2), (a2, b3), (a2, b2), (a1, b3)];
    let mut vals = Vec::with_capacity(4);
    for ((a, b), rule) in pairs.into_iter().zip(pattern) {
        vals.push(endpoint(a, b, rule)?);
    }
    let vals: [T; 4] = vals.try_into().expect("four values");
    if !hypothesis(&vals) {
        Ok(Verdict::HypothesisFails)
    } else if all_equal(&vals) {
        Ok(Verdict::ImplicationHolds)
    } else {
        Ok(Verdict::Violation { values: vals, i_prime: None })
    }
}

/// A violating tuple, kept for regression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness<T = Rational> {
    pub alpha1: BorderEstimate<T>,
    pub alpha2: BorderEstimate<T>,
    pub beta2: BorderEstimate<T>,
    pub beta3: BorderEstimate<T>,
    pub pattern: PlusOnesPattern,
    pub values: [T; 4],
}

fn border_json<T: Scalar>(b: &BorderEstimate<T>) -> Value {
    json!([b.pos.to_exact_string(), b.count])
}

fn border_from_json<T: Scalar>(v: &Value) -> Option<BorderEstimate<T>> {
    let arr = v.as_array()?;
    if arr.len() != 2 {
        return None;
    }
    let pos = T::parse_exact(arr[0].as_str()?).ok()?;
    Some(BorderEstimate::new(pos, arr[1].as_u64()?))
}

fn side_str(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Right => "right",
    }
}

impl<T: Scalar> Witness<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "alpha1": border_json(&self.alpha1),
            "alpha2": border_json(&self.alpha2),
            "beta2": border_json(&self.beta2),
            "beta3": border_json(&self.beta3),
            "pattern": self.pattern.iter().map(|r| json!({
                "side": side_str(r.side),
                "alpha_shift": r.alpha_shift,
                "beta_shift": r.beta_shift,
            })).collect::<Vec<_>>(),
            "values": self.values.iter().map(|v| v.to_exact_string()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        let rules = v.get("pattern")?.as_array()?;
        if rules.len() != 4 {
            return None;
        }
        let mut pattern = RIGHT_ENDPOINTS;
        for (slot, r) in pattern.iter_mut().zip(rules) {
            slot.side = match r.get("side")?.as_str()? {
                "left" => Side::Left,
                "right" => Side::Right,
                _ => return None,
            };
            slot.alpha_shift = r.get("alpha_shift")?.as_i64()?;
            slot.beta_shift = r.get("beta_shift")?.as_i64()?;
        }
        let vals = v.get("values")?.as_array()?;
        let values: Vec<T> = vals
            .iter()
            .map(|x| T::parse_exact(x.as_str()?).ok())
            .collect::<Option<_>>()?;
        Some(Self {
            alpha1: border_from_json(v.get("alpha1")?)?,
            alpha2: border_from_json(v.get("alpha2")?)?,
            beta2: border_from_json(v.get("beta2")?)?,
            beta3: border_from_json(v.get("beta3")?)?,
            pattern,
            values: values.try_into().ok()?,
        })
    }

    /// Re-evaluates the tuple; true if it still violates the implication
    /// with exactly the stored values.
    pub fn replays(&self) -> bool {
        match check_implication_with_plus_ones(&self.alpha1, &self.alpha2, &self.beta2, &self.beta3, &self.pattern) {
            Ok(Verdict::Violation { values, .. }) => values == self.values,
            _ => false,
        }
    }
}

/// Tallies of a sweep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub tuples: u64,
    pub hypothesis_holds: u64,
    pub violations: u64,
}

impl SweepStats {
    fn add(mut self, o: SweepStats) -> SweepStats {
        self.tuples += o.tuples;
        self.hypothesis_holds += o.hypothesis_holds;
        self.violations += o.violations;
        self
    }

    fn of<T>(v: &Verdict<T>) -> SweepStats {
        SweepStats {
            tuples: 1,
            hypothesis_holds: u64::from(!matches!(v, Verdict::HypothesisFails)),
            violations: u64::from(v.is_violation()),
        }
    }
}

/// Positions `{0, ..., steps}/steps` for the four border positions and
/// counts from `counts` for the four counts. Also checks
/// `P = a + l I' = b - m I'` on every tuple; an identity failure is counted
/// as a violation.
pub fn implication_grid<T: Scalar>(steps: i64, counts: &[u64]) -> SweepStats {
    let positions: Vec<T> = (0..=steps).map(|k| T::ratio(k, steps)).collect();
    let mut tuples = Vec::new();
    for p1 in &positions {
        for p2 in &positions {
            for q2 in &positions {
                for q3 in &positions {
                    tuples.push([p1.clone(), p2.clone(), q2.clone(), q3.clone()]);
                }
            }
        }
    }
    let mut count_tuples = Vec::new();
    for &c1 in counts {
        for &c2 in counts {
            for &c3 in counts {
                for &c4 in counts {
                    count_tuples.push([c1, c2, c3, c4]);
                }
            }
        }
    }
    tuples
        .par_iter()
        .map(|pos| {
            count_tuples
                .iter()
                .map(|c| {
                    let wb = |k: usize| WeightedBorder { pos: pos[k].clone(), count: c[k] };
                    evaluate_with_identity(&wb(0), &wb(1), &wb(2), &wb(3))
                })
                .fold(SweepStats::default(), SweepStats::add)
        })
        .reduce(SweepStats::default, SweepStats::add)
}

fn evaluate_with_identity<T: Scalar>(
    a1: &WeightedBorder<T>,
    a2: &WeightedBorder<T>,
    b2: &WeightedBorder<T>,
    b3: &WeightedBorder<T>,
) -> SweepStats {
    let verdict = check_implication(a1, a2, b2, b3).expect("positive counts");
    let mut stats = SweepStats::of(&verdict);
    for (a, b) in [(a1, b2), (a2, b3), (a2, b2), (a1, b3)] {
        let p = p_value(a, b).expect("positive counts");
        let ip = i_prime(a, b).expect("positive counts");
        let ok = p == a.pos.clone() + a.weight() * ip.clone() && p == b.pos.clone() - b.weight() * ip;
        if !ok {
            stats.violations += 1;
        }
    }
    stats
}

/// Grid for random positions: multiples of 1/1000 in `[-2, 3]`.
const RANDOM_DENOM: i64 = 1000;
const RANDOM_MAX_COUNT: u64 = 10_000;

fn random_border<T: Scalar>(rng: &mut ChaCha8Rng) -> (T, u64) {
    let k = rng.gen_range(-2 * RANDOM_DENOM..=3 * RANDOM_DENOM);
    // Small counts are where the +1 terms matter most.
    let count = if rng.gen_bool(0.5) {
        rng.gen_range(1..=5)
    } else {
        rng.gen_range(1..=RANDOM_MAX_COUNT)
    };
    (T::ratio(k, RANDOM_DENOM), count)
}

/// Random tuples. A quarter share a border between two pairings, and
/// another quarter are balanced around a common point `c`
/// (`(c - a) / l = (b - c) / m` for all four pairings), half of those then
/// nudged by one grid step, so that the hypothesis is exercised.
fn random_tuple<T: Scalar>(seed: u64, k: u64) -> [(T, u64); 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut t: [(T, u64); 4] = std::array::from_fn(|_| random_border(&mut rng));
    match rng.gen_range(0..8) {
        0 => t[1] = t[0].clone(),
        1 => t[3] = t[2].clone(),
        2 | 3 => {
            let c = T::ratio(rng.gen_range(-2 * RANDOM_DENOM..=3 * RANDOM_DENOM), RANDOM_DENOM);
            let slope = T::ratio(rng.gen_range(1..=RANDOM_DENOM), RANDOM_DENOM * RANDOM_DENOM);
            for (i, b) in t.iter_mut().enumerate() {
                let reach = slope.clone() * T::from_count(b.1);
                b.0 = if i < 2 { c.clone() - reach } else { c.clone() + reach };
            }
            if rng.gen_bool(0.5) {
                let i = rng.gen_range(0..4);
                let step = T::ratio(if rng.gen_bool(0.5) { 1 } else { -1 }, RANDOM_DENOM);
                t[i].0 = t[i].0.clone() + step;
            }
        }
        _ => {}
    }
    t
}

pub fn implication_random<T: Scalar>(tuples: u64, seed: u64) -> SweepStats {
    (0..tuples)
        .into_par_iter()
        .map(|k| {
            let t = random_tuple::<T>(seed, k);
            let wb = |i: usize| WeightedBorder { pos: t[i].0.clone(), count: t[i].1 };
            evaluate_with_identity(&wb(0), &wb(1), &wb(2), &wb(3))
        })
        .reduce(SweepStats::default, SweepStats::add)
}

/// Random search for a violation of the restored-`+1` implication. Returns
/// the tallies and the violating tuple with the smallest index, if any.
pub fn plus_ones_random<T: Scalar>(
    tuples: u64,
    seed: u64,
    pattern: &PlusOnesPattern,
) -> (SweepStats, Option<Witness<T>>) {
    let results: Vec<(SweepStats, Option<Witness<T>>)> = (0..tuples)
        .into_par_iter()
        .map(|k| {
            let t = random_tuple::<T>(seed, k);
            let b = |i: usize| BorderEstimate::new(t[i].0.clone(), t[i].1);
            let (a1, a2, b2, b3) = (b(0), b(1), b(2), b(3));
            match check_implication_with_plus_ones(&a1, &a2, &b2, &b3, pattern) {
                Ok(verdict) => {
                    let stats = SweepStats::of(&verdict);
                    let witness = match verdict {
                        Verdict::Violation { values, .. } => Some(Witness {
                            alpha1: a1,
                            alpha2: a2,
                            beta2: b2,
                            beta3: b3,
                            pattern: *pattern,
                            values,
                        }),
                        _ => None,
                    };
                    (stats, witness)
                }
                // A negative shift below zero: not a valid tuple.
                Err(_) => (SweepStats::default(), None),
            }
        })
        .collect();
    let mut stats = SweepStats::default();
    let mut first = None;
    for (s, w) in results {
        stats = stats.add(s);
        if first.is_none() {
            first = w;
        }
    }
    (stats, first)
}

/// Distinct left and right border estimates held by any drone while the
/// estimates are still being corrected, in order of first appearance.
pub fn trace_borders<T: Scalar>(trace: &Trace<T>) -> (Vec<BorderEstimate<T>>, Vec<BorderEstimate<T>>) {
    let stop = crate::analysis::correct_estimates_time(trace).unwrap_or_else(|| trace.end_time.clone());
    let mut lefts: Vec<BorderEstimate<T>> = Vec::new();
    let mut rights: Vec<BorderEstimate<T>> = Vec::new();
    let mut push = |e: &EstimatePair<T>| {
        if !lefts.contains(&e.left) {
            lefts.push(e.left.clone());
        }
        if !rights.contains(&e.right) {
            rights.push(e.right.clone());
        }
    };
    for d in &trace.initial.drones {
        push(&d.est);
    }
    for ev in trace.events.iter().take_while(|e| e.time <= stop) {
        for s in &ev.after {
            push(&s.est);
        }
    }
    (lefts, rights)
}

/// Exhaustive search over `(α1, α2, β2, β3)` drawn from the border
/// estimates of a trace with positive counts. Among the violations, one with
/// `α1 != α2` and `β2 != β3` is preferred; ties go to the first in
/// lexicographic index order.
pub fn plus_ones_in_trace<T: Scalar>(
    trace: &Trace<T>,
    pattern: &PlusOnesPattern,
) -> (SweepStats, Option<Witness<T>>) {
    let (lefts, rights) = trace_borders(trace);
    let lefts: Vec<_> = lefts.into_iter().filter(|b| b.count > 0).collect();
    let rights: Vec<_> = rights.into_iter().filter(|b| b.count > 0).collect();
    let nl = lefts.len();
    let results: Vec<(SweepStats, Option<(u8, Witness<T>)>)> = (0..nl * nl)
        .into_par_iter()
        .map(|ij| {
            let (a1, a2) = (&lefts[ij / nl], &lefts[ij % nl]);
            let mut stats = SweepStats::default();
            let mut best: Option<(u8, Witness<T>)> = None;
            for b2 in &rights {
                for b3 in &rights {
                    let Ok(verdict) = check_implication_with_plus_ones(a1, a2, b2, b3, pattern) else {
                        continue;
                    };
                    stats = stats.add(SweepStats::of(&verdict));
                    let Verdict::Violation { values, .. } = verdict else {
                        continue;
                    };
                    let rank = u8::from(a1 == a2) + u8::from(b2 == b3);
                    if best.as_ref().map_or(true, |(r, _)| rank < *r) {
                        let witness = Witness {
                            alpha1: a1.clone(),
                            alpha2: a2.clone(),
                            beta2: b2.clone(),
                            beta3: b3.clone(),
                            pattern: *pattern,
                            values,
                        };
                        best = Some((rank, witness));
                    }
                }
            }
            (stats, best)
        })
        .collect();
    let mut stats = SweepStats::default();
    let mut best: Option<(u8, Witness<T>)> = None;
    for (s, w) in results {
        stats = stats.add(s);
        if let Some((rank, witness)) = w {
            if best.as_ref().map_or(true, |(r, _)| rank < *r) {
                best = Some((rank, witness));
            }
        }
    }
    (stats, best.map(|(_, w)| w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    fn wb(p: i64, d: i64, c: u64) -> WeightedBorder {
        WeightedBorder::new(q(p, d), c).unwrap()
    }

    #[test]
    fn p_and_i_prime_examples() {
        assert_eq!(p_value(&wb(0, 1, 1), &wb(1, 1, 1)).unwrap(), q(1, 2));
        assert_eq!(p_value(&wb(0, 1, 2), &wb(1, 1, 1)).unwrap(), q(2, 3));
        assert_eq!(p_value(&wb(3, 7, 5), &wb(3, 7, 11)).unwrap(), q(3, 7));
        assert_eq!(i_prime(&wb(0, 1, 1), &wb(1, 1, 1)).unwrap(), q(1, 2));
        assert_eq!(i_prime(&wb(0, 1, 2), &wb(1, 1, 2)).unwrap(), q(1, 4));
        assert_eq!(v(&wb(0, 1, 2), &q(1, 1)).unwrap(), q(1, 2));
        assert_eq!(w(&wb(1, 1, 2), &q(0, 1)).unwrap(), q(1, 2));
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert_eq!(WeightedBorder::new(q(0, 1), 0), Err(AlgebraError::Count));
        let bad = WeightedBorder { pos: q(0, 1), count: 0 };
        assert_eq!(p_value(&bad, &wb(1, 1, 1)), Err(AlgebraError::Count));
        assert_eq!(i_prime(&wb(1, 1, 1), &bad), Err(AlgebraError::Count));
        assert_eq!(v(&bad, &q(0, 1)), Err(AlgebraError::Count));
        assert_eq!(w(&bad, &q(0, 1)), Err(AlgebraError::Count));
    }

    #[test]
    fn degenerate_tuple_satisfies_the_implication() {
        let (a, b) = (wb(0, 1, 1), wb(1, 1, 1));
        assert_eq!(check_implication(&a, &a, &b, &b).unwrap(), Verdict::ImplicationHolds);
        let (a, b) = (BorderEstimate::new(q(0, 1), 1), BorderEstimate::new(q(1, 1), 1));
        assert_eq!(
            check_implication_with_plus_ones(&a, &a, &b, &b, &RIGHT_ENDPOINTS).unwrap(),
            Verdict::ImplicationHolds
        );
    }

    #[test]
    fn mixed_counts_fail_the_hypothesis() {
        // P(α1,β2) = 1/2, P(α2,β3) = 1/2, P(α2,β2) = 1/3, P(α1,β3) = 2/3.
        let v = check_implication(&wb(0, 1, 1), &wb(0, 1, 2), &wb(1, 1, 1), &wb(1, 1, 2)).unwrap();
        assert_eq!(v, Verdict::HypothesisFails);
    }

    #[test]
    fn small_grid_has_no_violation() {
        let stats = implication_grid::<Rational>(2, &[1, 2]);
        assert_eq!(stats.tuples, 81 * 16);
        assert_eq!(stats.violations, 0);
        assert!(stats.hypothesis_holds > 0);
    }

    #[test]
    fn restored_plus_ones_break_the_implication() {
        let (stats, witness) = plus_ones_random::<Rational>(2000, 7, &MEET_PATTERN);
        assert!(stats.violations > 0);
        let witness = witness.unwrap();
        assert!(witness.replays());
        let back = Witness::<Rational>::from_json(&witness.to_json()).unwrap();
        assert_eq!(back, witness);
    }

    fn arb_border() -> impl Strategy<Value = WeightedBorder> {
        (-2000i64..=3000, 1u64..=50).prop_map(|(k, c)| wb(k, 1000, c))
    }

    proptest! {
        #[test]
        fn p_is_a_weighted_mean(a in arb_border(), b in arb_border()) {
            let p = p_value(&a, &b).unwrap();
            let (lo, hi) = if a.pos <= b.pos { (&a.pos, &b.pos) } else { (&b.pos, &a.pos) };
            prop_assert!(lo <= &p && &p <= hi);
            if a.pos < b.pos {
                prop_assert!(lo < &p && &p < hi);
            }
        }

        #[test]
        fn p_identity_and_balance(a in arb_border(), b in arb_border()) {
            let p = p_value(&a, &b).unwrap();
            let ip = i_prime(&a, &b).unwrap();
            prop_assert_eq!(&p, &(a.pos.clone() + Rational::from_count(a.count) * ip.clone()));
            prop_assert_eq!(&p, &(b.pos.clone() - Rational::from_count(b.count) * ip));
            prop_assert_eq!(v(&a, &p).unwrap(), w(&b, &p).unwrap());
        }

        #[test]
        fn balance_only_at_p(a in arb_border(), b in arb_border(), k in -2000i64..=3000) {
            let c = q(k, 1000);
            let p = p_value(&a, &b).unwrap();
            prop_assert_eq!(v(&a, &c).unwrap() == w(&b, &c).unwrap(), c == p);
        }

        #[test]
        fn v_increases_and_w_decreases(a in arb_border(), k1 in -2000i64..=3000, k2 in -2000i64..=3000) {
            prop_assume!(k1 < k2);
            let (c1, c2) = (q(k1, 1000), q(k2, 1000));
            prop_assert!(v(&a, &c1).unwrap() < v(&a, &c2).unwrap());
            prop_assert!(w(&a, &c1).unwrap() > w(&a, &c2).unwrap());
        }

        #[test]
        fn monotone_comparisons(a in arb_border(), a2 in arb_border(), b in arb_border(), b2 in arb_border()) {
            if p_value(&a, &b).unwrap() <= p_value(&a, &b2).unwrap() {
                prop_assert!(i_prime(&a, &b).unwrap() <= i_prime(&a, &b2).unwrap());
            }
            if p_value(&a, &b).unwrap() <= p_value(&a2, &b).unwrap() {
                prop_assert!(i_prime(&a2, &b).unwrap() <= i_prime(&a, &b).unwrap());
            }
        }

        #[test]
        fn unshifted_right_endpoints_never_fail(
            a1 in arb_border(), a2 in arb_border(), b2 in arb_border(), b3 in arb_border()
        ) {
            let e = |w: &WeightedBorder| BorderEstimate::new(w.pos.clone(), w.count);
            let v = check_implication_with_plus_ones(&e(&a1), &e(&a2), &e(&b2), &e(&b3), &RIGHT_ENDPOINTS).unwrap();
            prop_assert!(!v.is_violation());
        }

        #[test]
        fn implication_never_fails(a1 in arb_border(), a2 in arb_border(), b2 in arb_border(), b3 in arb_border()) {
            prop_assert!(!check_implication(&a1, &a2, &b2, &b3).unwrap().is_violation());
        }
    }
}
