//! Phase-1 / synchronization times extracted from traces, and the upper-bound
//! lemmas checked as trace properties.

use thiserror::Error;

use crate::engine::{Direction, EventKind, Trace};
use crate::estimates::{true_estimate, EstimatePair};
use crate::scalar::Scalar;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("trace ends at {end} but sync times are only final from {needed}; rerun with a larger t_max")]
    Horizon { end: String, needed: String },
    #[error("estimates never become correct within the trace")]
    NoPhase1,
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl AnalysisError {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisError::Horizon { .. } => "HorizonError",
            AnalysisError::NoPhase1 => "NoPhase1Error",
            AnalysisError::Precondition(_) => "PreconditionError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncReport<T = Rational> {
    pub n: usize,
    /// Per drone: supremum of the times it is strictly left of its left endpoint.
    pub left_sync_time: Vec<T>,
    /// Per drone: supremum of the times it is strictly right of its right endpoint.
    pub right_sync_time: Vec<T>,
    pub full_sync_time: T,
    pub correct_estimates_time: Option<T>,
    /// Per adjacent pair `(j, j + 1)`.
    pub first_met_time: Vec<Option<T>>,
}

fn truth<T: Scalar>(n: usize) -> Vec<EstimatePair<T>> {
    (1..=n).map(|i| true_estimate(i, n).expect("index in range")).collect()
}

fn starts_correct<T: Scalar>(trace: &Trace<T>) -> bool {
    let t = truth::<T>(trace.n());
    trace.initial.drones.iter().zip(&t).all(|(d, e)| d.est == *e)
}

/// Earliest time from which every drone holds its true estimate.
pub fn correct_estimates_time<T: Scalar>(trace: &Trace<T>) -> Option<T> {
    let t = truth::<T>(trace.n());
    let mut since = starts_correct(trace).then(|| trace.initial.time.clone());
    for step in trace.timeline() {
        let ok = step.drones.iter().zip(&t).all(|(s, e)| s.est == *e);
        match (ok, &since) {
            (true, None) => since = Some(step.time.clone()),
            (false, Some(_)) => since = None,
            _ => {}
        }
    }
    since
}

/// Supremum of `{t : side * (pos(t) - edge) > 0}` over a drone's path, where
/// `side` is -1 for "strictly left of" and +1 for "strictly right of".
fn last_violation<T: Scalar>(trace: &Trace<T>, i: usize, edge: &T, side: i8) -> T {
    let beyond = |p: &T| match side {
        -1 => p < edge,
        _ => p > edge,
    };
    let mut last = trace.initial.time.clone();
    for w in trace.paths[i - 1].windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if beyond(&b.pos) {
            last = b.time.clone();
        } else if beyond(&a.pos) {
            // Unit speed: the crossing is |edge - start| after the segment start.
            last = a.time.clone() + (edge.clone() - a.pos.clone()).abs();
        }
    }
    last
}

fn first_met_times<T: Scalar>(trace: &Trace<T>) -> Vec<Option<T>> {
    let n = trace.n();
    let mut met: Vec<Option<T>> = (0..n.saturating_sub(1))
        .map(|j| {
            let (l, r) = (&trace.initial.drones[j], &trace.initial.drones[j + 1]);
            (l.pos == r.pos && l.dir == r.dir).then(|| trace.initial.time.clone())
        })
        .collect();
    for ev in &trace.events {
        if matches!(ev.kind, EventKind::Meet | EventKind::Bounce) && ev.drones.len() == 2 {
            let j = ev.drones[0] - 1;
            if met[j].is_none() {
                met[j] = Some(ev.time.clone());
            }
        }
    }
    met
}

/// Synchronization times. Requires the trace to extend two time units past
/// the moment estimates became correct, after which no drone can leave its
/// interval again.
pub fn sync_times<T: Scalar>(trace: &Trace<T>) -> Result<SyncReport<T>, AnalysisError> {
    let n = trace.n();
    let t0 = correct_estimates_time(trace).ok_or(AnalysisError::NoPhase1)?;
    let needed = t0.clone() + T::from_int(2);
    if trace.end_time < needed {
        return Err(AnalysisError::Horizon {
            end: trace.end_time.to_exact_string(),
            needed: needed.to_exact_string(),
        });
    }
    let nn = T::from_count(n as u64);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 1..=n {
        let lo = T::from_count(i as u64 - 1) / nn.clone();
        let hi = T::from_count(i as u64) / nn.clone();
        let l = last_violation(trace, i, &lo, -1);
        let r = last_violation(trace, i, &hi, 1);
        if l == trace.end_time || r == trace.end_time {
            return Err(AnalysisError::Horizon {
                end: trace.end_time.to_exact_string(),
                needed: format!("beyond {}", trace.end_time.to_exact_string()),
            });
        }
        left.push(l);
        right.push(r);
    }
    let full = left
        .iter()
        .chain(&right)
        .max()
        .cloned()
        .unwrap_or_else(|| trace.initial.time.clone());
    Ok(SyncReport {
        n,
        left_sync_time: left,
        right_sync_time: right,
        full_sync_time: full,
        correct_estimates_time: Some(t0),
        first_met_time: first_met_times(trace),
    })
}

/// Sync time bound for traces starting with correct estimates: `2 - 1/n`.
pub fn phase2_bound<T: Scalar>(n: usize) -> T {
    T::from_int(2) - T::one() / T::from_count(n as u64)
}

/// All drones start correct and are synchronized by `2 - 1/n`.
pub fn check_phase2_theorem<T: Scalar>(trace: &Trace<T>) -> Result<bool, AnalysisError> {
    if !starts_correct(trace) {
        return Err(AnalysisError::Precondition(
            "some drone starts with an incorrect estimate".into(),
        ));
    }
    let report = sync_times(trace)?;
    Ok(report.full_sync_time <= trace.initial.time.clone() + phase2_bound::<T>(trace.n()))
}

/// All drones start incorrect, become correct at `t`, and are synchronized
/// by `t + 1 - 1/n`.
pub fn check_combined_theorem<T: Scalar>(trace: &Trace<T>) -> Result<bool, AnalysisError> {
    let t = truth::<T>(trace.n());
    if let Some(d) = trace
        .initial
        .drones
        .iter()
        .zip(&t)
        .find(|(d, e)| d.est == **e)
    {
        return Err(AnalysisError::Precondition(format!(
            "drone {} starts with its true estimate",
            d.0.index
        )));
    }
    let report = sync_times(trace)?;
    let t0 = report.correct_estimates_time.clone().ok_or(AnalysisError::NoPhase1)?;
    let bound = t0 + T::one() - T::one() / T::from_count(trace.n() as u64);
    Ok(report.full_sync_time <= bound)
}

/// Outcome of one lemma over a trace; `violations` describe each failure.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LemmaOutcome {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl LemmaOutcome {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LemmaReport {
    /// Right-to-left turns at or right of the right endpoint, and vice versa.
    pub turn_location: LemmaOutcome,
    /// Every adjacent pair has met within one time unit.
    pub met_by_one: LemmaOutcome,
    /// A left-moving drone not travelling with its right neighbour has moved
    /// left ever since the two last parted.
    pub moving_left_since_parting: LemmaOutcome,
    /// Drones `1..=i` are left synchronized by `1 + (i - 1)/n`.
    pub induction_milestone: LemmaOutcome,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        self.turn_location.holds()
            && self.met_by_one.holds()
            && self.moving_left_since_parting.holds()
            && self.induction_milestone.holds()
    }
}

/// Checks the phase-2 lemmas on a trace whose drones all start correct.
pub fn check_lemma_properties<T: Scalar>(trace: &Trace<T>) -> Result<LemmaReport, AnalysisError> {
    if !starts_correct(trace) {
        return Err(AnalysisError::Precondition(
            "lemma checks need correct estimates at the start".into(),
        ));
    }
    let n = trace.n();
    let t0 = trace.initial.time.clone();
    let nn = T::from_count(n as u64);
    let mut report = LemmaReport::default();

    // Turns made at t0 itself come from the start-together exchange.
    for i in 1..=n {
        let lo = T::from_count(i as u64 - 1) / nn.clone();
        let hi = T::from_count(i as u64) / nn.clone();
        for (t, x, dir) in trace.turns(i) {
            if t <= t0 {
                continue;
            }
            report.turn_location.checked += 1;
            let ok = match dir {
                Direction::Left => x >= hi,
                Direction::Right => x <= lo,
            };
            if !ok {
                report.turn_location.violations.push(format!(
                    "drone {i} turned {dir:?} at {x} (t = {t}) outside [{lo}, {hi}]"
                ));
            }
        }
    }

    let met = first_met_times(trace);
    let limit = t0.clone() + T::one();
    for (j, m) in met.iter().enumerate() {
        report.met_by_one.checked += 1;
        match m {
            Some(t) if *t <= limit => {}
            Some(t) => report
                .met_by_one
                .violations
                .push(format!("drones {} and {} first met at {t}", j + 1, j + 2)),
            None => report
                .met_by_one
                .violations
                .push(format!("drones {} and {} never met", j + 1, j + 2)),
        }
    }

    check_moving_left(trace, &mut report.moving_left_since_parting);

    let sync = sync_times(trace)?;
    for (k, l) in sync.left_sync_time.iter().enumerate() {
        report.induction_milestone.checked += 1;
        let bound = t0.clone() + T::one() + T::from_count(k as u64) / nn.clone();
        if *l > bound {
            report.induction_milestone.violations.push(format!(
                "drone {} left synchronized only at {l} > {bound}",
                k + 1
            ));
        }
    }
    Ok(report)
}

fn check_moving_left<T: Scalar>(trace: &Trace<T>, out: &mut LemmaOutcome) {
    let n = trace.n();
    if n < 2 {
        return;
    }
    let init = &trace.initial.drones;
    let together = |a: (&T, Direction), b: (&T, Direction)| a.0 == b.0 && a.1 == b.1;
    let mut met: Vec<bool> = (0..n - 1)
        .map(|j| together((&init[j].pos, init[j].dir), (&init[j + 1].pos, init[j + 1].dir)))
        .collect();
    let mut parted: Vec<Option<T>> = vec![None; n - 1];
    let mut left_since: Vec<Option<T>> = init
        .iter()
        .map(|d| (d.dir == Direction::Left).then(|| trace.initial.time.clone()))
        .collect();

    for step in trace.timeline() {
        let s = &step.drones;
        for (k, snap) in s.iter().enumerate() {
            match snap.dir {
                Direction::Left => {
                    if left_since[k].is_none() {
                        left_since[k] = Some(step.time.clone());
                    }
                }
                Direction::Right => left_since[k] = None,
            }
        }
        for ev in &trace.events[step.events.clone()] {
            if ev.drones.len() != 2 {
                continue;
            }
            let j = ev.drones[0] - 1;
            if matches!(ev.kind, EventKind::Meet | EventKind::Bounce) {
                met[j] = true;
            }
            if !together((&s[j].pos, s[j].dir), (&s[j + 1].pos, s[j + 1].dir)) {
                parted[j] = Some(step.time.clone());
            }
        }
        for j in 0..n - 1 {
            let apart = !together((&s[j].pos, s[j].dir), (&s[j + 1].pos, s[j + 1].dir));
            if !(met[j] && apart && s[j].dir == Direction::Left) {
                continue;
            }
            out.checked += 1;
            let ok = matches!(
                (&parted[j], &left_since[j]),
                (Some(p), Some(since)) if since <= p
            );
            if !ok {
                out.violations.push(format!(
                    "drone {} moving left at {} without having moved left since last parting from drone {}",
                    j + 1,
                    step.time,
                    j + 2
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, validate, Configuration, SimOptions, ValidateOptions};
    use crate::scenarios::{gen_phase2_sharp, gen_three_drone_worst};
    use num_traits::Signed;
    use crate::Rational;

    fn q(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    fn run(cfg: &Configuration, t_max: Rational) -> Trace {
        let cfg = validate(cfg, &ValidateOptions::default()).unwrap();
        simulate(&cfg, &t_max, &SimOptions::default()).unwrap()
    }

    #[test]
    fn single_drone_is_always_synchronized() {
        for x in [q(0, 1), q(1, 3), q(1, 1)] {
            let cfg = Configuration::from_states(
                q(0, 1),
                vec![(x, Direction::Left, EstimatePair::from_parts(q(-1, 2), 3, q(4, 1), 2))],
            );
            let trace = run(&cfg, q(6, 1));
            let rep = sync_times(&trace).unwrap();
            assert_eq!(rep.full_sync_time, q(0, 1));
            assert!(rep.correct_estimates_time.unwrap() <= q(2, 1));
        }
    }

    #[test]
    fn horizon_and_phase1_errors() {
        let cfg: Configuration = gen_phase2_sharp(3, &q(1, 1000)).unwrap();
        let short = run(&cfg, q(3, 2));
        assert!(matches!(sync_times(&short), Err(AnalysisError::Horizon { .. })));

        let wrong = Configuration::from_states(
            q(0, 1),
            vec![
                (q(1, 2), Direction::Right, EstimatePair::from_parts(q(0, 1), 0, q(1, 1), 0)),
                (q(1, 1), Direction::Right, EstimatePair::from_parts(q(0, 1), 0, q(1, 1), 0)),
            ],
        );
        let trace = run(&wrong, q(1, 8));
        assert_eq!(sync_times(&trace), Err(AnalysisError::NoPhase1));
    }

    #[test]
    fn phase2_sharp_worst_case() {
        let eps = q(1, 1000);
        let cfg: Configuration = gen_phase2_sharp(5, &eps).unwrap();
        let trace = run(&cfg, q(6, 1));
        let rep = sync_times(&trace).unwrap();
        let bound: Rational = phase2_bound(5);
        assert!(rep.full_sync_time <= bound);
        assert!(rep.full_sync_time > bound - q(3, 1) * eps);
        assert!(check_phase2_theorem(&trace).unwrap());
        let lemmas = check_lemma_properties(&trace).unwrap();
        assert!(lemmas.all_hold(), "{lemmas:?}");
        // Drones 4 and 5 only meet after drone 5 bounces off the right border.
        let last = rep.first_met_time[3].clone().unwrap();
        assert!(last <= q(1, 1) && last > q(99, 100), "{last}");
    }

    #[test]
    fn head_on_pair_meets_early() {
        let cfg = Configuration::from_states(
            q(0, 1),
            vec![
                (q(0, 1), Direction::Right, true_estimate(1, 2).unwrap()),
                (q(1, 1), Direction::Left, true_estimate(2, 2).unwrap()),
            ],
        );
        let trace = run(&cfg, q(3, 1));
        let rep = sync_times(&trace).unwrap();
        assert_eq!(rep.first_met_time, vec![Some(q(1, 2))]);
        assert!(check_lemma_properties(&trace).unwrap().all_hold());
    }

    #[test]
    fn sync_crossings_land_on_endpoints() {
        let cfg: Configuration = gen_phase2_sharp(4, &q(1, 1000)).unwrap();
        let trace = run(&cfg, q(6, 1));
        let rep = sync_times(&trace).unwrap();
        for (k, t) in rep.left_sync_time.iter().enumerate() {
            if *t > q(0, 1) {
                assert_eq!(trace.position_at(k + 1, t).unwrap(), q(k as i64, 4));
            }
        }
        for (k, t) in rep.right_sync_time.iter().enumerate() {
            if *t > q(0, 1) {
                assert_eq!(trace.position_at(k + 1, t).unwrap(), q(k as i64 + 1, 4));
            }
        }
    }

    #[test]
    fn three_drone_worst_case_times() {
        let big_n = 1_000_000;
        let cfg: Configuration = gen_three_drone_worst(big_n).unwrap();
        let trace = run(&cfg, q(6, 1));
        let rep = sync_times(&trace).unwrap();
        let tol = q(100, big_n as i64);
        let t0 = rep.correct_estimates_time.clone().unwrap();
        assert!((t0.clone() - q(11, 3)).abs() <= tol, "{t0}");
        assert!((rep.full_sync_time.clone() - q(4, 1)).abs() <= tol);
        assert!((rep.full_sync_time.clone() - t0 - q(1, 3)).abs() <= tol);
        assert!(check_combined_theorem(&trace).unwrap());
    }

    #[test]
    fn preconditions_are_enforced() {
        let cfg: Configuration = gen_phase2_sharp(3, &q(1, 1000)).unwrap();
        let trace = run(&cfg, q(6, 1));
        assert!(matches!(check_combined_theorem(&trace), Err(AnalysisError::Precondition(_))));
        let cfg: Configuration = gen_three_drone_worst(100).unwrap();
        let trace = run(&cfg, q(6, 1));
        assert!(matches!(check_phase2_theorem(&trace), Err(AnalysisError::Precondition(_))));
        assert!(matches!(check_lemma_properties(&trace), Err(AnalysisError::Precondition(_))));
    }
}
