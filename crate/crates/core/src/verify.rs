//! Verification suites. Each suite fans independent runs out over rayon and
//! collects named checks plus any failing configurations.

use num_traits::Signed;
use rayon::prelude::*;
use serde_json::Value;

use crate::algebra::{
    plus_ones_in_trace, plus_ones_random, implication_grid, implication_random, MEET_PATTERN, RIGHT_ENDPOINTS,
};
use crate::analysis::{
    check_combined_theorem, check_lemma_properties, check_phase2_theorem, phase2_bound, sync_times,
};
use crate::engine::{simulate, validate, Configuration, EngineError, EscortPolicy, SimOptions, Trace, ValidateOptions};
use crate::scalar::Scalar;
use crate::scenarios::{
    gen_five_drone_three_groups, gen_n_drone_worst, gen_phase2_sharp, gen_random, gen_three_drone_worst,
    gen_two_drone_worst, EstimateMode, RandomOptions,
};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Phase2,
    Combined,
    Lemmas,
    Algebra,
    AlgebraPlusOnes,
    LowerBounds,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Phase2,
        Suite::Combined,
        Suite::Lemmas,
        Suite::Algebra,
        Suite::AlgebraPlusOnes,
        Suite::LowerBounds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Phase2 => "phase2",
            Suite::Combined => "combined",
            Suite::Lemmas => "lemmas",
            Suite::Algebra => "algebra",
            Suite::AlgebraPlusOnes => "algebra-plus-ones",
            Suite::LowerBounds => "lower-bounds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Suite::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A configuration that broke a check, or a violating algebraic tuple.
#[derive(Debug, Clone)]
pub struct Failure {
    pub what: String,
    pub config: Option<Configuration>,
    pub policy: EscortPolicy,
    pub t_max: Rational,
    pub witness: Option<Value>,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub runs: u64,
    /// Engine guard errors (cascade overflow or event cap).
    pub guard_trips: u64,
    /// Largest `events / n` over all simulated runs.
    pub max_events_per_drone: u64,
    /// Regression witnesses found by the suite, even when finding one is the
    /// expected outcome.
    pub witnesses: Vec<Value>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn absorb(&mut self, outcome: RunOutcome) {
        self.runs += 1;
        self.guard_trips += u64::from(outcome.guard_trip);
        self.max_events_per_drone = self.max_events_per_drone.max(outcome.events_per_drone);
        if let Some(f) = outcome.failure {
            self.failures.push(f);
        }
    }
}

/// Parameters shared by the simulation suites.
#[derive(Debug, Clone)]
pub struct SimSuiteOptions {
    pub n_min: usize,
    pub n_max: usize,
    pub trials: u64,
    pub seed: u64,
    pub t_max: Rational,
    pub policy: EscortPolicy,
    pub event_cap: Option<u64>,
}

impl Default for SimSuiteOptions {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 8,
            trials: 1000,
            seed: 7,
            t_max: Rational::from_int(6),
            policy: EscortPolicy::EscortLeft,
            event_cap: None,
        }
    }
}

/// Seed for trial `k` with `n` drones, derived from the suite seed.
pub fn trial_seed(seed: u64, n: usize, k: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((n as u64) << 40) ^ k
}

struct RunOutcome {
    guard_trip: bool,
    events_per_drone: u64,
    failure: Option<Failure>,
}

/// Validates and simulates; engine errors become failures.
pub fn run_config(
    config: &Configuration,
    t_max: &Rational,
    policy: EscortPolicy,
    event_cap: Option<u64>,
) -> Result<Trace, EngineError> {
    let cfg = validate(config, &ValidateOptions::default())?;
    simulate(&cfg, t_max, &SimOptions { policy, event_cap })
}

fn run_checked(
    config: Configuration,
    opts: &SimSuiteOptions,
    check: impl Fn(&Trace) -> Result<(), String>,
) -> RunOutcome {
    let fail = |what: String| Failure {
        what,
        config: Some(config.clone()),
        policy: opts.policy,
        t_max: opts.t_max.clone(),
        witness: None,
    };
    match run_config(&config, &opts.t_max, opts.policy, opts.event_cap) {
        Err(e) => RunOutcome {
            guard_trip: e.is_guard(),
            events_per_drone: 0,
            failure: Some(fail(format!("{}: {e}", e.name()))),
        },
        Ok(trace) => RunOutcome {
            guard_trip: false,
            events_per_drone: (trace.events.len() / trace.n().max(1)) as u64,
            failure: check(&trace).err().map(fail),
        },
    }
}

fn random_configs(opts: &SimSuiteOptions, mode: EstimateMode) -> Vec<(usize, u64, Configuration)> {
    let ropts = RandomOptions { mode, ..Default::default() };
    (opts.n_min..=opts.n_max)
        .flat_map(|n| (0..opts.trials).map(move |k| (n, k)))
        .map(|(n, k)| {
            let s = trial_seed(opts.seed, n, k);
            (n, s, gen_random(n, s, &ropts).expect("valid generator parameters"))
        })
        .collect()
}

fn run_all(
    report: &mut SuiteReport,
    configs: Vec<(usize, u64, Configuration)>,
    opts: &SimSuiteOptions,
    check: impl Fn(&Trace) -> Result<(), String> + Sync,
) {
    let outcomes: Vec<RunOutcome> = configs
        .into_par_iter()
        .map(|(n, s, cfg)| {
            run_checked(cfg, opts, |t| check(t).map_err(|e| format!("n = {n}, seed = {s}: {e}")))
        })
        .collect();
    for o in outcomes {
        report.absorb(o);
    }
}

fn phase2_check(trace: &Trace) -> Result<(), String> {
    match check_phase2_theorem(trace) {
        Ok(true) => Ok(()),
        Ok(false) => Err(format!(
            "synchronized at {} > {}",
            sync_times(trace).map(|r| r.full_sync_time.to_string()).unwrap_or_default(),
            phase2_bound::<Rational>(trace.n())
        )),
        Err(e) => Err(e.to_string()),
    }
}

/// Sharp layouts `gen_phase2_sharp(n, eps)` for `n` in the suite range.
pub fn sharp_configs(opts: &SimSuiteOptions, eps: &Rational) -> Vec<(usize, u64, Configuration)> {
    (opts.n_min.max(1)..=opts.n_max)
        .map(|n| (n, 0, gen_phase2_sharp(n, eps).expect("eps below 1/(2n)")))
        .collect()
}

/// Random correct-estimate runs stay within `2 - 1/n`, and the sharp layouts
/// come within `3 eps` of it.
pub fn verify_phase2(opts: &SimSuiteOptions, eps: &Rational) -> SuiteReport {
    let mut report = SuiteReport::default();
    run_all(&mut report, random_configs(opts, EstimateMode::Correct), opts, phase2_check);
    let random_failures = report.failures.len();
    report.check(
        "random configurations within 2 - 1/n",
        random_failures == 0,
        format!("{} runs, {random_failures} failures", report.runs),
    );

    let sharp_min = opts.n_min.max(2);
    let before = report.failures.len();
    let mut sharp_opts = opts.clone();
    sharp_opts.n_min = sharp_min;
    let eps_c = eps.clone();
    run_all(&mut report, sharp_configs(&sharp_opts, eps), opts, move |trace| {
        let full = sync_times(trace).map_err(|e| e.to_string())?.full_sync_time;
        let bound: Rational = phase2_bound(trace.n());
        let floor = bound.clone() - Rational::from_int(3) * eps_c.clone();
        if full > floor && full <= bound {
            Ok(())
        } else {
            Err(format!("sharp layout synchronized at {full}, expected in ({floor}, {bound}]"))
        }
    });
    report.check(
        "sharp layouts approach 2 - 1/n",
        report.failures.len() == before,
        format!("n = {sharp_min}..={}, eps = {eps}", opts.n_max),
    );
    report
}

/// All-incorrect runs synchronize within `1 - 1/n` of their estimates
/// becoming correct.
pub fn verify_combined(opts: &SimSuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut o = opts.clone();
    o.n_min = opts.n_min.max(2);
    run_all(&mut report, random_configs(&o, EstimateMode::Incorrect), &o, |trace| {
        match check_combined_theorem(trace) {
            Ok(true) => Ok(()),
            Ok(false) => {
                let r = sync_times(trace).map_err(|e| e.to_string())?;
                Err(format!(
                    "correct at {:?}, synchronized at {}",
                    r.correct_estimates_time.map(|t| t.to_string()),
                    r.full_sync_time
                ))
            }
            Err(e) => Err(e.to_string()),
        }
    });
    report.check(
        "all-incorrect runs within t0 + 1 - 1/n",
        report.failures.is_empty(),
        format!("{} runs", report.runs),
    );
    report
}

/// Lemma properties on the random correct-estimate traces and the sharp
/// layouts.
pub fn verify_lemmas(opts: &SimSuiteOptions, eps: &Rational) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut configs = random_configs(opts, EstimateMode::Correct);
    configs.extend(sharp_configs(opts, eps));
    run_all(&mut report, configs, opts, |trace| {
        let lemmas = check_lemma_properties(trace).map_err(|e| e.to_string())?;
        if lemmas.all_hold() {
            Ok(())
        } else {
            let mut v = lemmas.turn_location.violations.clone();
            v.extend(lemmas.met_by_one.violations.iter().cloned());
            v.extend(lemmas.moving_left_since_parting.violations.iter().cloned());
            v.extend(lemmas.induction_milestone.violations.iter().cloned());
            Err(v.join("; "))
        }
    });
    report.check(
        "turn location, meeting by time 1, motion since parting, induction milestone",
        report.failures.is_empty(),
        format!("{} traces", report.runs),
    );
    report
}

/// Exhaustive grid plus random tuples for the `P` implication.
pub fn verify_algebra(trials: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::default();
    let grid = implication_grid::<Rational>(4, &[1, 2, 3]);
    report.check(
        "grid {0..4}/4 x counts {1,2,3}",
        grid.violations == 0,
        format!(
            "{} tuples, hypothesis held on {}, {} violations",
            grid.tuples, grid.hypothesis_holds, grid.violations
        ),
    );
    let random = implication_random::<Rational>(trials, seed);
    report.check(
        "random tuples",
        random.violations == 0,
        format!(
            "{} tuples, hypothesis held on {}, {} violations",
            random.tuples, random.hypothesis_holds, random.violations
        ),
    );
    report.runs = grid.tuples + random.tuples;
    report
}

/// Searches for violations of the implication once the `+1` terms are back.
/// Passing means a violation was found.
pub fn verify_algebra_plus_ones(trials: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::default();
    let five = gen_five_drone_three_groups::<Rational>();
    let trace = match run_config(&five, &Rational::from_int(6), EscortPolicy::EscortLeft, None) {
        Ok(t) => t,
        Err(e) => {
            report.check("five-drone trace", false, e.to_string());
            return report;
        }
    };
    let (stats, witness) = plus_ones_in_trace(&trace, &MEET_PATTERN);
    report.check(
        "violation among five-drone trace estimates",
        witness.is_some(),
        format!("{} tuples, {} violations", stats.tuples, stats.violations),
    );
    report.witnesses.extend(witness.map(|w| w.to_json()));

    let (plain, _) = plus_ones_in_trace(&trace, &RIGHT_ENDPOINTS);
    report.check(
        "unshifted right endpoints never violate",
        plain.violations == 0,
        format!("{} tuples, hypothesis held on {}", plain.tuples, plain.hypothesis_holds),
    );

    let (stats, witness) = plus_ones_random::<Rational>(trials, seed, &MEET_PATTERN);
    report.check(
        "violation among random tuples",
        witness.is_some(),
        format!("{} tuples, {} violations", stats.tuples, stats.violations),
    );
    report.witnesses.extend(witness.map(|w| w.to_json()));
    report.runs = stats.tuples + plain.tuples;
    report
}

fn within(x: &Rational, target: &Rational, tol: &Rational) -> bool {
    (x.clone() - target.clone()).abs() <= *tol
}

fn fmt_time(t: &Rational) -> String {
    format!("{:.6}", t.approx_f64())
}

/// One lower-bound construction: runs it and compares phase-1 and total
/// times with their targets.
fn lower_bound_case(
    report: &mut SuiteReport,
    name: &str,
    config: Configuration,
    targets: (Rational, Rational),
    tol: &Rational,
) -> Option<Trace> {
    let t_max = Rational::from_int(6);
    let trace = match run_config(&config, &t_max, EscortPolicy::EscortLeft, None) {
        Ok(t) => t,
        Err(e) => {
            report.guard_trips += u64::from(e.is_guard());
            report.check(name, false, format!("{}: {e}", e.name()));
            return None;
        }
    };
    report.runs += 1;
    report.max_events_per_drone = report
        .max_events_per_drone
        .max((trace.events.len() / trace.n()) as u64);
    match sync_times(&trace) {
        Ok(r) => {
            let t0 = r.correct_estimates_time.clone().expect("sync report has phase 1");
            let ok = within(&t0, &targets.0, tol) && within(&r.full_sync_time, &targets.1, tol);
            report.check(
                name,
                ok,
                format!(
                    "phase 1 {} (target {}), total {} (target {}), tolerance {}",
                    fmt_time(&t0),
                    targets.0,
                    fmt_time(&r.full_sync_time),
                    targets.1,
                    tol
                ),
            );
            if !ok {
                report.failures.push(Failure {
                    what: name.to_string(),
                    config: Some(config),
                    policy: EscortPolicy::EscortLeft,
                    t_max,
                    witness: None,
                });
            }
        }
        Err(e) => report.check(name, false, e.to_string()),
    }
    Some(trace)
}

/// Checks the turning points of the middle drone in the three-drone
/// construction: `1 - δ`, `δ`, `1 - 3δ`, then exactly `1/3`.
pub fn three_drone_turns(trace: &Trace, big_n: u64) -> (bool, String) {
    let delta = Rational::new(1.into(), big_n.into());
    let tol = Rational::from_int(100) * delta.clone();
    let turns = trace.turns(2);
    if turns.len() < 4 {
        return (false, format!("only {} turns", turns.len()));
    }
    let expect = [
        Rational::from_int(1) - delta.clone(),
        delta.clone(),
        Rational::from_int(1) - Rational::from_int(3) * delta,
    ];
    let mut ok = turns[..3].iter().zip(&expect).all(|((_, x, _), e)| within(x, e, &tol));
    ok &= turns[3].1 == Rational::new(1.into(), 3.into());
    let shown: Vec<String> = turns[..4].iter().map(|(_, x, _)| format!("{:.6}", x.approx_f64())).collect();
    (ok, format!("turn positions {}", shown.join(", ")))
}

/// The constructions for `n = 2`, `n = 3` (with turning points), `n` drones
/// in two groups, and five drones in three groups.
pub fn verify_lower_bounds(big_n: u64, ns: &[usize]) -> SuiteReport {
    let mut report = SuiteReport::default();
    let q = |p: i64, d: i64| Rational::ratio(p, d);

    let eps = q(1, 1000);
    if let Ok(cfg) = gen_two_drone_worst(&eps) {
        lower_bound_case(&mut report, "two drones, eps = 1/1000", cfg, (q(2, 1), q(5, 2)), &q(1, 100));
    }

    let tol3 = Rational::from_int(100) / Rational::from_count(big_n);
    match gen_three_drone_worst(big_n) {
        Ok(cfg) => {
            let name = format!("three drones, N = {big_n}");
            if let Some(trace) = lower_bound_case(&mut report, &name, cfg, (q(11, 3), q(4, 1)), &tol3) {
                let (ok, detail) = three_drone_turns(&trace, big_n);
                report.check("three drones, turning points of drone 2", ok, detail);
            }
        }
        Err(e) => report.check("three drones", false, e.to_string()),
    }

    let tol = Rational::from_int(1000) / Rational::from_count(big_n);
    for &n in ns {
        match gen_n_drone_worst(n, big_n) {
            Ok(cfg) => {
                let nn = Rational::from_count(n as u64);
                let targets = (
                    Rational::from_int(4) - Rational::from_int(1) / nn.clone(),
                    Rational::from_int(5) - Rational::from_int(3) / nn,
                );
                lower_bound_case(&mut report, &format!("{n} drones, N = {big_n}"), cfg, targets, &tol);
            }
            Err(e) => report.check(format!("{n} drones"), false, e.to_string()),
        }
    }

    lower_bound_case(
        &mut report,
        "five drones in three groups",
        gen_five_drone_three_groups(),
        (q(19, 5), q(22, 5)),
        &q(1, 100),
    );
    report
}
