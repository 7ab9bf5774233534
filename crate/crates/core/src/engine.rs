//! Exact discrete-event simulation of the drone protocol.
//!
//! Between events every drone moves at unit speed. Events are border hits,
//! meetings of adjacent drones, and escorted pairs reaching their common
//! endpoint. Drones that end up at the same position without strictly moving
//! apart are regrouped at the same timestamp: they pool their estimates and
//! head for their common endpoints, escorting each other in chains.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimates::{meet_update, EstimatePair, Side};
use crate::scalar::{sign, Scalar};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("configuration has no drones")]
    Empty,
    #[error("drone ordering violated: {0}")]
    Ordering(String),
    #[error("drone {index} at position {pos} lies outside [0, 1]")]
    Range { index: usize, pos: String },
    #[error("drones {left} and {right} start together but do not share estimates")]
    GroupConsistency { left: usize, right: usize },
    #[error("drone {index} estimate {estimate} is inconsistent with its position {pos}")]
    Consistency {
        index: usize,
        pos: String,
        estimate: String,
    },
    #[error("no pending event")]
    Deadlock,
    #[error("coincidence cascade did not settle at time {time} after {steps} regroupings")]
    CascadeOverflow { time: String, steps: usize },
    #[error("event cap of {cap} exceeded at time {time}")]
    EventCap { cap: u64, time: String },
    #[error("time horizon {t_max} does not exceed the start time {start}")]
    BadHorizon { t_max: String, start: String },
    #[error("internal invariant broken: {0}")]
    Invariant(String),
}

impl EngineError {
    /// Stable short name used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            EngineError::Empty | EngineError::Range { .. } => "RangeError",
            EngineError::Ordering(_) => "OrderingError",
            EngineError::GroupConsistency { .. } => "GroupConsistencyError",
            EngineError::Consistency { .. } => "ConsistencyError",
            EngineError::Deadlock => "DeadlockError",
            EngineError::CascadeOverflow { .. } => "CascadeOverflowError",
            EngineError::EventCap { .. } => "EventCapError",
            EngineError::BadHorizon { .. } => "RangeError",
            EngineError::Invariant(_) => "InvariantError",
        }
    }

    /// Guards that indicate runaway event generation rather than bad input.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            EngineError::CascadeOverflow { .. }
                | EngineError::EventCap { .. }
                | EngineError::Deadlock
                | EngineError::Invariant(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn from_sign(d: i8) -> Option<Self> {
        match d {
            -1 => Some(Direction::Left),
            1 => Some(Direction::Right),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Direction::Left => -1,
            Direction::Right => 1,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    fn apply<T: Scalar>(self, pos: &T, dt: &T) -> T {
        match self {
            Direction::Left => pos.clone() - dt.clone(),
            Direction::Right => pos.clone() + dt.clone(),
        }
    }
}

/// Which neighbour a drone escorts when both want it in opposite directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscortPolicy {
    #[default]
    EscortLeft,
    EscortRight,
}

impl EscortPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            EscortPolicy::EscortLeft => "escort_left",
            EscortPolicy::EscortRight => "escort_right",
        }
    }
}

impl fmt::Display for EscortPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DroneState<T = Rational> {
    /// 1-based, left to right.
    pub index: usize,
    pub pos: T,
    pub dir: Direction,
    pub est: EstimatePair<T>,
}

/// An escorted pair `(j, j + 1)` heading together for `target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pairing<T = Rational> {
    pub partner: usize,
    pub target: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration<T = Rational> {
    pub time: T,
    pub drones: Vec<DroneState<T>>,
    /// `links[j]` is the escort target of drones `j + 1` and `j + 2` (1-based)
    /// when they travel together.
    links: Vec<Option<T>>,
}

impl<T: Scalar> Configuration<T> {
    /// Unlinked configuration; [`validate`] installs escorts for start-together
    /// groups.
    pub fn new(time: T, drones: Vec<DroneState<T>>) -> Self {
        let links = vec![None; drones.len().saturating_sub(1)];
        Self {
            time,
            drones,
            links,
        }
    }

    /// Builds drones with consecutive indices from `(pos, dir, est)` triples.
    pub fn from_states(time: T, states: Vec<(T, Direction, EstimatePair<T>)>) -> Self {
        let drones = states
            .into_iter()
            .enumerate()
            .map(|(k, (pos, dir, est))| DroneState {
                index: k + 1,
                pos,
                dir,
                est,
            })
            .collect();
        Self::new(time, drones)
    }

    pub fn n(&self) -> usize {
        self.drones.len()
    }

    /// Escort target shared by drones `j` and `j + 1` (1-based), if paired.
    pub fn escort_target(&self, j: usize) -> Option<&T> {
        if j == 0 {
            return None;
        }
        self.links.get(j - 1).and_then(Option::as_ref)
    }

    /// Pairings of drone `i` (1-based). Inside a travelling chain a drone is
    /// paired with both neighbours.
    pub fn pairings(&self, i: usize) -> Vec<Pairing<T>> {
        let mut out = Vec::new();
        if i >= 2 {
            if let Some(t) = self.escort_target(i - 1) {
                out.push(Pairing {
                    partner: i - 1,
                    target: t.clone(),
                });
            }
        }
        if let Some(t) = self.escort_target(i) {
            out.push(Pairing {
                partner: i + 1,
                target: t.clone(),
            });
        }
        out
    }

    fn diverging(&self, j: usize) -> bool {
        self.drones[j].dir == Direction::Left && self.drones[j + 1].dir == Direction::Right
    }

    fn coincident(&self, j: usize) -> bool {
        self.drones[j].pos == self.drones[j + 1].pos
    }

    /// A coincident pair needs a regroup unless it is strictly diverging or a
    /// consistent escort.
    fn settled(&self, j: usize) -> bool {
        if self.diverging(j) {
            return true;
        }
        let (l, r) = (&self.drones[j], &self.drones[j + 1]);
        match &self.links[j] {
            Some(target) => {
                l.dir == r.dir
                    && l.est.shares_with(&r.est)
                    && *target == l.est.right_endpoint()
                    && sign(&(target.clone() - l.pos.clone())) == l.dir.sign()
            }
            None => false,
        }
    }

    fn drop_broken_links(&mut self) {
        for j in 0..self.links.len() {
            if self.links[j].is_some() && self.drones[j].dir != self.drones[j + 1].dir {
                self.links[j] = None;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BorderLeft,
    BorderRight,
    Meet,
    #[serde(rename = "separate")]
    Separation,
    Bounce,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::BorderLeft => "border_left",
            EventKind::BorderRight => "border_right",
            EventKind::Meet => "meet",
            EventKind::Separation => "separate",
            EventKind::Bounce => "bounce",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "border_left" => EventKind::BorderLeft,
            "border_right" => EventKind::BorderRight,
            "meet" => EventKind::Meet,
            "separate" => EventKind::Separation,
            "bounce" => EventKind::Bounce,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Snapshot<T = Rational> {
    pub pos: T,
    pub dir: Direction,
    pub est: EstimatePair<T>,
}

impl<T: Scalar> From<&DroneState<T>> for Snapshot<T> {
    fn from(d: &DroneState<T>) -> Self {
        Snapshot {
            pos: d.pos.clone(),
            dir: d.dir,
            est: d.est.clone(),
        }
    }
}

/// A recorded event. `after` holds one snapshot per participant, taken once
/// every event at this step (including the coincidence cascade) is applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event<T = Rational> {
    pub time: T,
    pub kind: EventKind,
    /// 1-based drone indices.
    pub drones: Vec<usize>,
    pub after: Vec<Snapshot<T>>,
}

/// Event descriptor produced by [`next_event`]; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveEvent {
    BorderLeft(usize),
    BorderRight(usize),
    /// Drones `j` and `j + 1` meet head-on.
    Meet(usize),
    /// Escorted pair `j`, `j + 1` reaches its target.
    Separation(usize),
}

impl PrimitiveEvent {
    fn leftmost(&self) -> usize {
        match *self {
            PrimitiveEvent::BorderLeft(j)
            | PrimitiveEvent::BorderRight(j)
            | PrimitiveEvent::Meet(j)
            | PrimitiveEvent::Separation(j) => j,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Additionally require `a_i <= x_i <= b_i` for every drone.
    pub require_consistent: bool,
}

/// Checks ordering and ranges, verifies that start-together groups share
/// estimates, and installs their escorts.
pub fn validate<T: Scalar>(
    config: &Configuration<T>,
    opts: &ValidateOptions,
) -> Result<Configuration<T>, EngineError> {
    let n = config.n();
    if n == 0 {
        return Err(EngineError::Empty);
    }
    let mut out = Configuration::new(config.time.clone(), config.drones.clone());
    for (k, d) in out.drones.iter().enumerate() {
        if d.index != k + 1 {
            return Err(EngineError::Ordering(format!(
                "drone at slot {} has index {}",
                k + 1,
                d.index
            )));
        }
        if d.pos.is_negative() || d.pos > T::one() {
            return Err(EngineError::Range {
                index: d.index,
                pos: d.pos.to_exact_string(),
            });
        }
        if opts.require_consistent && (d.est.left.pos > d.pos || d.pos > d.est.right.pos) {
            return Err(EngineError::Consistency {
                index: d.index,
                pos: d.pos.to_exact_string(),
                estimate: d.est.to_string(),
            });
        }
    }
    for j in 0..n - 1 {
        let (l, r) = (&out.drones[j], &out.drones[j + 1]);
        if l.pos > r.pos {
            return Err(EngineError::Ordering(format!(
                "drone {} at {} is right of drone {} at {}",
                l.index, l.pos, r.index, r.pos
            )));
        }
        if l.pos == r.pos && l.dir == r.dir {
            if !l.est.shares_with(&r.est) {
                return Err(EngineError::GroupConsistency {
                    left: l.index,
                    right: r.index,
                });
            }
            let target = l.est.right_endpoint();
            if sign(&(target.clone() - l.pos.clone())) == l.dir.sign() {
                out.links[j] = Some(target);
            }
        }
    }
    Ok(out)
}

/// Earliest upcoming event time and every primitive event occurring then.
pub fn next_event<T: Scalar>(
    config: &Configuration<T>,
) -> Result<(T, Vec<PrimitiveEvent>), EngineError> {
    let n = config.n();
    let mut best: Option<T> = None;
    let mut batch = Vec::new();
    let mut offer = |dt: T, ev: PrimitiveEvent| match &best {
        Some(b) if dt > *b => {}
        Some(b) if dt == *b => batch.push(ev),
        _ => {
            best = Some(dt);
            batch.clear();
            batch.push(ev);
        }
    };

    if n == 0 {
        return Err(EngineError::Deadlock);
    }
    let first = &config.drones[0];
    if first.dir == Direction::Left {
        offer(first.pos.clone(), PrimitiveEvent::BorderLeft(0));
    }
    let last = &config.drones[n - 1];
    if last.dir == Direction::Right {
        offer(T::one() - last.pos.clone(), PrimitiveEvent::BorderRight(n - 1));
    }
    let two = T::one() + T::one();
    for j in 0..n.saturating_sub(1) {
        let (l, r) = (&config.drones[j], &config.drones[j + 1]);
        match &config.links[j] {
            Some(target) => {
                offer(
                    (target.clone() - l.pos.clone()).abs(),
                    PrimitiveEvent::Separation(j),
                );
            }
            None => {
                if l.dir == Direction::Right && r.dir == Direction::Left {
                    offer(
                        (r.pos.clone() - l.pos.clone()) / two.clone(),
                        PrimitiveEvent::Meet(j),
                    );
                }
            }
        }
    }
    let dt = best.ok_or(EngineError::Deadlock)?;
    batch.sort_by_key(|e| (e.leftmost(), *e));
    Ok((config.time.clone() + dt, batch))
}

impl<T: Scalar> Configuration<T> {
    fn advance_to(&mut self, time: &T) -> Result<(), EngineError> {
        let dt = time.clone() - self.time.clone();
        if dt.is_negative() {
            return Err(EngineError::Invariant("time moved backwards".into()));
        }
        for d in &mut self.drones {
            d.pos = d.dir.apply(&d.pos, &dt);
        }
        self.time = time.clone();
        for (k, d) in self.drones.iter().enumerate() {
            if d.pos.is_negative() || d.pos > T::one() {
                return Err(EngineError::Invariant(format!(
                    "drone {} left the interval at {}",
                    k + 1,
                    d.pos
                )));
            }
        }
        for j in 0..self.n().saturating_sub(1) {
            if self.drones[j].pos > self.drones[j + 1].pos {
                return Err(EngineError::Invariant(format!(
                    "drones {} and {} crossed",
                    j + 1,
                    j + 2
                )));
            }
        }
        Ok(())
    }

    fn apply_primitive(&mut self, ev: PrimitiveEvent, out: &mut Vec<(EventKind, Vec<usize>)>) {
        match ev {
            PrimitiveEvent::BorderLeft(j) => {
                let d = &mut self.drones[j];
                d.est = d.est.border_update(Side::Left);
                d.dir = Direction::Right;
                out.push((EventKind::BorderLeft, vec![j + 1]));
            }
            PrimitiveEvent::BorderRight(j) => {
                let d = &mut self.drones[j];
                d.est = d.est.border_update(Side::Right);
                d.dir = Direction::Left;
                out.push((EventKind::BorderRight, vec![j + 1]));
            }
            // Head-on meetings are resolved by the cascade once the pair
            // coincides.
            PrimitiveEvent::Meet(_) => {}
            PrimitiveEvent::Separation(j) => {
                if self.links[j].take().is_some() {
                    self.drones[j].dir = Direction::Left;
                    self.drones[j + 1].dir = Direction::Right;
                    out.push((EventKind::Separation, vec![j + 1, j + 2]));
                }
            }
        }
        self.drop_broken_links();
    }

    /// Pools estimates across the coincident segment `s..=e`, then sets
    /// directions and escorts from the shared common endpoints.
    fn regroup(&mut self, s: usize, e: usize, policy: EscortPolicy, out: &mut Vec<(EventKind, Vec<usize>)>) {
        let before: Vec<(EstimatePair<T>, Direction)> = self.drones[s..=e]
            .iter()
            .map(|d| (d.est.clone(), d.dir))
            .collect();
        let links_before: Vec<Option<T>> = self.links[s..e].to_vec();
        let settled_before: Vec<bool> = (s..e).map(|j| self.settled(j)).collect();

        for j in s..e {
            let (l, r) = meet_update(&self.drones[j].est, &self.drones[j + 1].est);
            self.drones[j].est = l;
            self.drones[j + 1].est = r;
        }
        for j in (s..e).rev() {
            let (l, r) = meet_update(&self.drones[j].est, &self.drones[j + 1].est);
            self.drones[j].est = l;
            self.drones[j + 1].est = r;
        }

        let x = self.drones[s].pos.clone();
        let targets: Vec<T> = (s..e).map(|j| self.drones[j].est.right_endpoint()).collect();
        let pulls: Vec<i8> = targets.iter().map(|c| sign(&(c.clone() - x.clone()))).collect();

        for k in s..=e {
            // Direction each adjacent pair asks of drone k. A pair whose
            // endpoint is right here splits: left member left, right member right.
            let from_left = (k > s).then(|| match pulls[k - 1 - s] {
                0 => 1,
                p => p,
            });
            let from_right = (k < e).then(|| match pulls[k - s] {
                0 => -1,
                p => p,
            });
            let want = match (from_left, from_right) {
                (Some(a), Some(b)) if a == b => a,
                (Some(a), Some(b)) => match policy {
                    EscortPolicy::EscortLeft => a,
                    EscortPolicy::EscortRight => b,
                },
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => self.drones[k].dir.sign(),
            };
            self.drones[k].dir = Direction::from_sign(want).expect("pull is nonzero");
        }

        for j in s..e {
            let p = pulls[j - s];
            let linked = p != 0
                && self.drones[j].dir.sign() == p
                && self.drones[j + 1].dir.sign() == p;
            self.links[j] = linked.then(|| targets[j - s].clone());
        }

        for j in s..e {
            let i = j - s;
            let changed = !settled_before[i]
                || links_before[i] != self.links[j]
                || before[i] != (self.drones[j].est.clone(), self.drones[j].dir)
                || before[i + 1] != (self.drones[j + 1].est.clone(), self.drones[j + 1].dir);
            if changed {
                let kind = if pulls[i] == 0 {
                    EventKind::Bounce
                } else {
                    EventKind::Meet
                };
                out.push((kind, vec![j + 1, j + 2]));
            }
        }
    }

    /// Regroups coincident, non-diverging drones until every such pair is a
    /// consistent escort or strictly diverging.
    fn cascade(&mut self, policy: EscortPolicy, out: &mut Vec<(EventKind, Vec<usize>)>) -> Result<(), EngineError> {
        let n = self.n();
        let cap = 4 * n;
        let mut rounds = 0;
        loop {
            let Some(j) = (0..n.saturating_sub(1)).find(|&j| self.coincident(j) && !self.settled(j)) else {
                return Ok(());
            };
            if rounds >= cap {
                return Err(EngineError::CascadeOverflow {
                    time: self.time.to_exact_string(),
                    steps: rounds,
                });
            }
            rounds += 1;
            let joined = |c: &Self, k: usize| c.coincident(k) && !c.diverging(k);
            let mut s = j;
            while s > 0 && joined(self, s - 1) {
                s -= 1;
            }
            let mut e = j + 1;
            while e + 1 < n && joined(self, e) {
                e += 1;
            }
            self.regroup(s, e, policy, out);
        }
    }

    fn finish_step(&self, raw: Vec<(EventKind, Vec<usize>)>) -> Vec<Event<T>> {
        raw.into_iter()
            .map(|(kind, drones)| Event {
                time: self.time.clone(),
                kind,
                after: drones
                    .iter()
                    .map(|&i| Snapshot::from(&self.drones[i - 1]))
                    .collect(),
                drones,
            })
            .collect()
    }

    /// Runs the coincidence cascade at the current time without advancing.
    pub fn settle(&mut self, policy: EscortPolicy) -> Result<Vec<Event<T>>, EngineError> {
        let mut raw = Vec::new();
        self.cascade(policy, &mut raw)?;
        Ok(self.finish_step(raw))
    }

    /// Advances to `time`, applies `batch` in order, then runs the cascade.
    pub fn apply_events(
        &mut self,
        time: &T,
        batch: &[PrimitiveEvent],
        policy: EscortPolicy,
    ) -> Result<Vec<Event<T>>, EngineError> {
        self.advance_to(time)?;
        let mut raw = Vec::new();
        for ev in batch {
            self.apply_primitive(*ev, &mut raw);
        }
        self.cascade(policy, &mut raw)?;
        Ok(self.finish_step(raw))
    }
}

/// Pure form of [`Configuration::apply_events`].
pub fn apply_events<T: Scalar>(
    config: &Configuration<T>,
    time: &T,
    batch: &[PrimitiveEvent],
    policy: EscortPolicy,
) -> Result<(Configuration<T>, Vec<Event<T>>), EngineError> {
    let mut next = config.clone();
    let events = next.apply_events(time, batch, policy)?;
    Ok((next, events))
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub policy: EscortPolicy,
    /// Overrides [`default_event_cap`].
    pub event_cap: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            policy: EscortPolicy::EscortLeft,
            event_cap: None,
        }
    }
}

/// `10^4 * n * (1 + ceil(t_max))`.
pub fn default_event_cap<T: Scalar>(n: usize, t_max: &T) -> u64 {
    let horizon = t_max.ceil_to_i64().unwrap_or(i64::MAX).max(0) as u64;
    10_000u64
        .saturating_mul(n as u64)
        .saturating_mul(horizon.saturating_add(1))
}

/// Breakpoint of a piecewise-linear drone path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Breakpoint<T = Rational> {
    pub time: T,
    pub pos: T,
}

/// State of every drone once all events at `time` are applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineStep<T = Rational> {
    pub time: T,
    pub drones: Vec<Snapshot<T>>,
    /// Indices into `Trace::events` of the events at this time.
    pub events: std::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace<T = Rational> {
    pub initial: Configuration<T>,
    pub policy: EscortPolicy,
    pub events: Vec<Event<T>>,
    pub end_time: T,
    /// Per drone, positions where the path bends, plus both ends.
    pub paths: Vec<Vec<Breakpoint<T>>>,
}

impl<T: Scalar> Trace<T> {
    /// Builds a trace, reconstructing the piecewise-linear paths by replaying
    /// the event snapshots over the initial configuration.
    pub fn new(
        initial: Configuration<T>,
        policy: EscortPolicy,
        events: Vec<Event<T>>,
        end_time: T,
    ) -> Result<Self, EngineError> {
        let mut trace = Trace {
            initial,
            policy,
            events,
            end_time,
            paths: Vec::new(),
        };
        let mut paths: Vec<Vec<Breakpoint<T>>> = trace
            .initial
            .drones
            .iter()
            .map(|d| {
                vec![Breakpoint {
                    time: trace.initial.time.clone(),
                    pos: d.pos.clone(),
                }]
            })
            .collect();
        let mut last_dir: Vec<Direction> = trace.initial.drones.iter().map(|d| d.dir).collect();
        for step in trace.timeline() {
            for (k, snap) in step.drones.iter().enumerate() {
                if snap.dir != last_dir[k] {
                    let bp = Breakpoint {
                        time: step.time.clone(),
                        pos: snap.pos.clone(),
                    };
                    if paths[k].last() != Some(&bp) {
                        paths[k].push(bp);
                    }
                    last_dir[k] = snap.dir;
                }
            }
        }
        let mut state: Vec<Snapshot<T>> = trace.initial.drones.iter().map(Snapshot::from).collect();
        let mut now = trace.initial.time.clone();
        for step in trace.timeline() {
            now = step.time.clone();
            state = step.drones;
        }
        let tail = trace.end_time.clone() - now;
        if tail.is_negative() {
            return Err(EngineError::Invariant("events after end of trace".into()));
        }
        for (k, snap) in state.iter().enumerate() {
            let bp = Breakpoint {
                time: trace.end_time.clone(),
                pos: snap.dir.apply(&snap.pos, &tail),
            };
            if paths[k].last() != Some(&bp) {
                paths[k].push(bp);
            }
        }
        trace.paths = paths;
        Ok(trace)
    }

    pub fn n(&self) -> usize {
        self.initial.n()
    }

    /// Replays events, grouping those with equal timestamps.
    pub fn timeline(&self) -> Vec<TimelineStep<T>> {
        let mut out: Vec<TimelineStep<T>> = Vec::new();
        let mut state: Vec<Snapshot<T>> = self.initial.drones.iter().map(Snapshot::from).collect();
        let mut now = self.initial.time.clone();
        let mut k = 0;
        while k < self.events.len() {
            let t = self.events[k].time.clone();
            let dt = t.clone() - now.clone();
            for s in &mut state {
                s.pos = s.dir.apply(&s.pos, &dt);
            }
            now = t.clone();
            let start = k;
            while k < self.events.len() && self.events[k].time == t {
                let ev = &self.events[k];
                for (i, snap) in ev.drones.iter().zip(&ev.after) {
                    state[i - 1] = snap.clone();
                }
                k += 1;
            }
            out.push(TimelineStep {
                time: t,
                drones: state.clone(),
                events: start..k,
            });
        }
        out
    }

    /// Exact position of drone `i` (1-based) at time `t`.
    pub fn position_at(&self, i: usize, t: &T) -> Result<T, EngineError> {
        let path = self
            .paths
            .get(i.wrapping_sub(1))
            .ok_or_else(|| EngineError::Ordering(format!("no drone {i}")))?;
        if *t < self.initial.time || *t > self.end_time {
            return Err(EngineError::Range {
                index: i,
                pos: t.to_exact_string(),
            });
        }
        let seg = path
            .windows(2)
            .find(|w| w[0].time <= *t && *t <= w[1].time)
            .ok_or_else(|| EngineError::Invariant("path does not cover time".into()))?;
        let (p0, p1) = (&seg[0], &seg[1]);
        if p1.time == p0.time {
            return Ok(p1.pos.clone());
        }
        let frac = (t.clone() - p0.time.clone()) / (p1.time.clone() - p0.time.clone());
        Ok(p0.pos.clone() + (p1.pos.clone() - p0.pos.clone()) * frac)
    }

    /// Direction changes of drone `i` (1-based): `(time, pos, new direction)`.
    pub fn turns(&self, i: usize) -> Vec<(T, T, Direction)> {
        let mut dir = self.initial.drones[i - 1].dir;
        let mut out = Vec::new();
        for step in self.timeline() {
            let s = &step.drones[i - 1];
            if s.dir != dir {
                out.push((step.time.clone(), s.pos.clone(), s.dir));
                dir = s.dir;
            }
        }
        out
    }
}

/// Runs the protocol from `config` until the next event would fall after
/// `t_max`, then extends all paths linearly to `t_max`.
pub fn simulate<T: Scalar>(
    config: &Configuration<T>,
    t_max: &T,
    opts: &SimOptions,
) -> Result<Trace<T>, EngineError> {
    if *t_max <= config.time {
        return Err(EngineError::BadHorizon {
            t_max: t_max.to_exact_string(),
            start: config.time.to_exact_string(),
        });
    }
    let n = config.n();
    let cap = opts
        .event_cap
        .unwrap_or_else(|| default_event_cap(n, t_max));
    let initial = config.clone();
    let mut cfg = config.clone();
    let mut events = cfg.settle(opts.policy)?;
    let mut same_time_steps = 0usize;
    loop {
        if events.len() as u64 > cap {
            return Err(EngineError::EventCap {
                cap,
                time: cfg.time.to_exact_string(),
            });
        }
        let (t, batch) = next_event(&cfg)?;
        if t > *t_max {
            break;
        }
        if t == cfg.time {
            same_time_steps += 1;
            if same_time_steps > 4 * n {
                return Err(EngineError::CascadeOverflow {
                    time: t.to_exact_string(),
                    steps: same_time_steps,
                });
            }
        } else {
            same_time_steps = 0;
        }
        let evs = cfg.apply_events(&t, &batch, opts.policy)?;
        events.extend(evs);
    }
    Trace::new(initial, opts.policy, events, t_max.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::true_estimate;
    use num_traits::Signed;
    use crate::Rational;

    fn q(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    fn correct(n: usize, spots: &[(Rational, Direction)]) -> Configuration {
        Configuration::from_states(
            q(0, 1),
            spots
                .iter()
                .enumerate()
                .map(|(k, (x, d))| (x.clone(), *d, true_estimate(k + 1, n).unwrap()))
                .collect(),
        )
    }

    fn run(cfg: &Configuration, t_max: Rational) -> Trace {
        let cfg = validate(cfg, &ValidateOptions::default()).unwrap();
        simulate(&cfg, &t_max, &SimOptions::default()).unwrap()
    }

    #[test]
    fn head_on_pair_meets_in_the_middle() {
        let cfg = correct(2, &[(q(0, 1), Direction::Right), (q(1, 1), Direction::Left)]);
        let cfg = validate(&cfg, &ValidateOptions::default()).unwrap();
        let (t, batch) = next_event(&cfg).unwrap();
        assert_eq!(t, q(1, 2));
        assert_eq!(batch, vec![PrimitiveEvent::Meet(0)]);
        let (after, events) = apply_events(&cfg, &t, &batch, EscortPolicy::EscortLeft).unwrap();
        assert_eq!(after.drones[0].pos, q(1, 2));
        // Meeting exactly on the common endpoint is a bounce.
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Bounce);
        assert_eq!(after.drones[0].dir, Direction::Left);
        assert_eq!(after.drones[1].dir, Direction::Right);
    }

    #[test]
    fn single_drone_hits_right_border() {
        let cfg = correct(1, &[(q(1, 2), Direction::Right)]);
        let (t, batch) = next_event(&cfg).unwrap();
        assert_eq!((t, batch), (q(1, 2), vec![PrimitiveEvent::BorderRight(0)]));
    }

    #[test]
    fn escorted_pair_separates_at_target() {
        // Drones 1 and 2 of three: common endpoint 1/3.
        let cfg = Configuration::from_states(
            q(0, 1),
            vec![
                (q(3, 5), Direction::Left, true_estimate(1, 3).unwrap()),
                (q(3, 5), Direction::Left, true_estimate(2, 3).unwrap()),
                (q(1, 1), Direction::Left, true_estimate(3, 3).unwrap()),
            ],
        );
        let cfg = validate(&cfg, &ValidateOptions::default()).unwrap();
        assert_eq!(cfg.escort_target(1), Some(&q(1, 3)));
        let (t, batch) = next_event(&cfg).unwrap();
        assert_eq!((t, batch), (q(4, 15), vec![PrimitiveEvent::Separation(0)]));

        // Target 1/2 from 3/5 takes 1/10.
        let mut cfg2 = cfg.clone();
        cfg2.links[0] = Some(q(1, 2));
        let (t, _) = next_event(&cfg2).unwrap();
        assert_eq!(t, q(1, 10));
    }

    #[test]
    fn correct_pair_escorts_to_common_endpoint() {
        // n = 3, drones 1 and 2 meet at 1/2 and head left to 1/3.
        let cfg = correct(
            3,
            &[(q(1, 4), Direction::Right), (q(3, 4), Direction::Left), (q(1, 1), Direction::Right)],
        );
        let trace = run(&cfg, q(1, 1));
        let meet = trace.events.iter().find(|e| e.kind == EventKind::Meet).unwrap();
        assert_eq!(meet.time, q(1, 4));
        assert_eq!(meet.drones, vec![1, 2]);
        assert!(meet.after.iter().all(|s| s.dir == Direction::Left && s.pos == q(1, 2)));
        let sep = trace
            .events
            .iter()
            .find(|e| e.kind == EventKind::Separation)
            .unwrap();
        assert_eq!(sep.time, q(1, 4) + q(1, 2) - q(1, 3));
        assert_eq!(sep.after[0].pos, q(1, 3));
        assert_eq!(sep.after[0].dir, Direction::Left);
        assert_eq!(sep.after[1].dir, Direction::Right);
    }

    #[test]
    fn border_hit_by_escorted_leader_triggers_same_time_meet() {
        // Drones 1 and 2 travel left together toward a target below 0.
        let e1 = EstimatePair::from_parts(q(-3, 1), 1, q(1, 1), 1);
        let e2 = EstimatePair::from_parts(q(-3, 1), 2, q(1, 1), 0);
        let cfg = Configuration::from_states(
            q(0, 1),
            vec![(q(1, 5), Direction::Left, e1), (q(1, 5), Direction::Left, e2)],
        );
        let cfg = validate(&cfg, &ValidateOptions::default()).unwrap();
        assert!(cfg.escort_target(1).unwrap().is_negative());
        let trace = simulate(&cfg, &q(1, 2), &SimOptions::default()).unwrap();
        let at: Vec<_> = trace.events.iter().filter(|e| e.time == q(1, 5)).collect();
        assert_eq!(at[0].kind, EventKind::BorderLeft);
        assert_eq!(at[1].kind, EventKind::Meet);
        assert_eq!(at[1].drones, vec![1, 2]);
        let after = &at[1].after;
        assert_eq!(after[0].est, EstimatePair::from_parts(q(0, 1), 0, q(1, 1), 1));
        assert_eq!(after[1].est, EstimatePair::from_parts(q(0, 1), 1, q(1, 1), 0));
        // Common endpoint 1/2 lies ahead: both now head right.
        assert!(after.iter().all(|s| s.dir == Direction::Right));
    }

    #[test]
    fn single_drone_sawtooth() {
        let cfg = correct(1, &[(q(0, 1), Direction::Right)]);
        let trace = run(&cfg, q(2, 1));
        let kinds: Vec<_> = trace.events.iter().map(|e| (e.kind, e.time.clone())).collect();
        assert_eq!(
            kinds,
            vec![(EventKind::BorderRight, q(1, 1)), (EventKind::BorderLeft, q(2, 1))]
        );
        assert_eq!(trace.position_at(1, &q(1, 2)).unwrap(), q(1, 2));
        assert_eq!(trace.position_at(1, &q(1, 1)).unwrap(), q(1, 1));
        assert_eq!(trace.position_at(1, &q(3, 2)).unwrap(), q(1, 2));
        assert!(trace.position_at(1, &q(3, 1)).is_err());
        assert!(trace.position_at(2, &q(1, 1)).is_err());
    }

    #[test]
    fn drone_at_border_moving_out_fires_immediately() {
        let cfg = correct(1, &[(q(0, 1), Direction::Left)]);
        let trace = run(&cfg, q(1, 2));
        assert_eq!(trace.events[0].kind, EventKind::BorderLeft);
        assert_eq!(trace.events[0].time, q(0, 1));
    }

    #[test]
    fn validation_errors() {
        let bad_range = correct(1, &[(q(3, 2), Direction::Right)]);
        assert!(matches!(
            validate(&bad_range, &ValidateOptions::default()),
            Err(EngineError::Range { .. })
        ));
        let bad_order = correct(2, &[(q(1, 2), Direction::Right), (q(1, 4), Direction::Right)]);
        assert!(matches!(
            validate(&bad_order, &ValidateOptions::default()),
            Err(EngineError::Ordering(_))
        ));
        let unshared = Configuration::from_states(
            q(0, 1),
            vec![
                (q(1, 2), Direction::Right, true_estimate(1, 2).unwrap()),
                (q(1, 2), Direction::Right, true_estimate(1, 2).unwrap()),
            ],
        );
        assert!(matches!(
            validate(&unshared, &ValidateOptions::default()),
            Err(EngineError::GroupConsistency { left: 1, right: 2 })
        ));
        let inconsistent = Configuration::from_states(
            q(0, 1),
            vec![(q(9, 10), Direction::Right, EstimatePair::from_parts(q(0, 1), 0, q(8, 10), 0))],
        );
        assert!(validate(&inconsistent, &ValidateOptions::default()).is_ok());
        assert!(matches!(
            validate(&inconsistent, &ValidateOptions { require_consistent: true }),
            Err(EngineError::Consistency { index: 1, .. })
        ));
        let empty: Configuration = Configuration::new(q(0, 1), vec![]);
        assert_eq!(validate(&empty, &ValidateOptions::default()), Err(EngineError::Empty));
    }

    #[test]
    fn event_cap_is_a_hard_error() {
        let cfg = correct(1, &[(q(0, 1), Direction::Right)]);
        let err = simulate(
            &cfg,
            &q(6, 1),
            &SimOptions {
                event_cap: Some(1),
                ..SimOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::EventCap { cap: 1, .. }));
        assert_eq!(err.name(), "EventCapError");
    }

    #[test]
    fn three_coincident_split_follows_policy() {
        // Drones 1..3 of three at 1/2: drone 2's interval contains the spot,
        // so it must pick a side.
        let spots = [
            (q(1, 2), Direction::Right),
            (q(1, 2), Direction::Right),
            (q(1, 2), Direction::Right),
        ];
        let cfg = correct(3, &spots);
        let mut left = validate(&cfg, &ValidateOptions::default()).unwrap();
        assert_eq!(left.escort_target(1), None);
        assert_eq!(left.escort_target(2), Some(&q(2, 3)));
        let mut right = left.clone();
        left.settle(EscortPolicy::EscortLeft).unwrap();
        right.settle(EscortPolicy::EscortRight).unwrap();
        let dirs = |c: &Configuration| c.drones.iter().map(|d| d.dir).collect::<Vec<_>>();
        use Direction::*;
        assert_eq!(dirs(&left), vec![Left, Left, Right]);
        assert_eq!(left.escort_target(1), Some(&q(1, 3)));
        assert_eq!(left.escort_target(2), None);
        assert_eq!(dirs(&right), vec![Left, Right, Right]);
        assert_eq!(right.escort_target(2), Some(&q(2, 3)));
    }

    #[test]
    fn default_cap_formula() {
        assert_eq!(default_event_cap(3, &q(6, 1)), 10_000 * 3 * 7);
        assert_eq!(default_event_cap(2, &q(11, 2)), 10_000 * 2 * 7);
    }
}
