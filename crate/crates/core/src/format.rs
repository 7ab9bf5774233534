//! File formats: JSON configurations, JSON-lines traces, JSON sync reports.
//!
//! Every rational is written as a canonical `"p/q"` string. Readers also
//! accept integers and finite decimals.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::SyncReport;
use crate::engine::{
    validate, Configuration, Direction, EngineError, EscortPolicy, Event, EventKind, Snapshot, Trace,
    ValidateOptions,
};
use crate::estimates::{BorderEstimate, EstimatePair};
use crate::scalar::{ParseRationalError, Scalar};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("field {field}: {source}")]
    Number {
        field: &'static str,
        #[source]
        source: ParseRationalError,
    },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl FormatError {
    pub fn name(&self) -> &'static str {
        match self {
            FormatError::Engine(e) => e.name(),
            _ => "FormatError",
        }
    }
}

/// One drone as it appears in files: position, direction `±1`, and the two
/// border estimates as `[pos, count]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroneRecord {
    pub x: String,
    pub d: i8,
    pub a: (String, u64),
    pub b: (String, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub n: usize,
    pub policy: EscortPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<String>,
    pub drones: Vec<DroneRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TraceHeader {
    n: usize,
    policy: EscortPolicy,
    t_max: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t0: Option<String>,
    initial: Vec<DroneRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EventRecord {
    t: String,
    kind: String,
    drones: Vec<usize>,
    after: Vec<DroneRecord>,
}

fn num<T: Scalar>(field: &'static str, s: &str) -> Result<T, FormatError> {
    T::parse_exact(s).map_err(|source| FormatError::Number { field, source })
}

fn record<T: Scalar>(pos: &T, dir: Direction, est: &EstimatePair<T>) -> DroneRecord {
    DroneRecord {
        x: pos.to_exact_string(),
        d: dir.sign(),
        a: (est.left.pos.to_exact_string(), est.left.count),
        b: (est.right.pos.to_exact_string(), est.right.count),
    }
}

fn snapshot<T: Scalar>(r: &DroneRecord) -> Result<Snapshot<T>, FormatError> {
    let dir = Direction::from_sign(r.d)
        .ok_or_else(|| FormatError::Shape(format!("direction must be 1 or -1, got {}", r.d)))?;
    Ok(Snapshot {
        pos: num("x", &r.x)?,
        dir,
        est: EstimatePair::new(
            BorderEstimate::new(num("a", &r.a.0)?, r.a.1),
            BorderEstimate::new(num("b", &r.b.0)?, r.b.1),
        ),
    })
}

fn start_time<T: Scalar>(t0: &Option<String>) -> Result<T, FormatError> {
    t0.as_deref().map_or(Ok(T::zero()), |s| num("t0", s))
}

fn t0_field<T: Scalar>(time: &T) -> Option<String> {
    (!time.is_zero()).then(|| time.to_exact_string())
}

fn configuration<T: Scalar>(time: T, n: usize, drones: &[DroneRecord]) -> Result<Configuration<T>, FormatError> {
    if n != drones.len() {
        return Err(FormatError::Shape(format!("n = {n} but {} drones listed", drones.len())));
    }
    let states = drones
        .iter()
        .map(|r| snapshot(r).map(|s| (s.pos, s.dir, s.est)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Configuration::from_states(time, states))
}

impl ConfigFile {
    pub fn from_configuration<T: Scalar>(config: &Configuration<T>, policy: EscortPolicy) -> Self {
        ConfigFile {
            n: config.n(),
            policy,
            t0: t0_field(&config.time),
            drones: config.drones.iter().map(|d| record(&d.pos, d.dir, &d.est)).collect(),
        }
    }

    /// The configuration as written; not yet validated.
    pub fn to_configuration<T: Scalar>(&self) -> Result<Configuration<T>, FormatError> {
        configuration(start_time(&self.t0)?, self.n, &self.drones)
    }
}

pub fn write_config<T: Scalar>(config: &Configuration<T>, policy: EscortPolicy) -> String {
    let mut s = serde_json::to_string_pretty(&ConfigFile::from_configuration(config, policy))
        .expect("config serializes");
    s.push('\n');
    s
}

pub fn read_config<T: Scalar>(text: &str) -> Result<(Configuration<T>, EscortPolicy), FormatError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|source| FormatError::Json { line: 1, source })?;
    Ok((file.to_configuration()?, file.policy))
}

pub fn write_trace<T: Scalar>(trace: &Trace<T>) -> String {
    let header = TraceHeader {
        n: trace.n(),
        policy: trace.policy,
        t_max: trace.end_time.to_exact_string(),
        t0: t0_field(&trace.initial.time),
        initial: trace
            .initial
            .drones
            .iter()
            .map(|d| record(&d.pos, d.dir, &d.est))
            .collect(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for ev in &trace.events {
        let rec = EventRecord {
            t: ev.time.to_exact_string(),
            kind: ev.kind.as_str().to_string(),
            drones: ev.drones.clone(),
            after: ev.after.iter().map(|s| record(&s.pos, s.dir, &s.est)).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Parses a trace. The initial configuration is validated structurally,
/// which also restores any escort links present at the start.
pub fn read_trace<T: Scalar>(text: &str) -> Result<Trace<T>, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| FormatError::Shape("empty trace".into()))?;
    let header: TraceHeader = serde_json::from_str(first).map_err(|source| FormatError::Json { line: 1, source })?;
    let raw = configuration(start_time(&header.t0)?, header.n, &header.initial)?;
    let initial = validate(&raw, &ValidateOptions::default())?;
    let t_max: T = num("t_max", &header.t_max)?;

    let mut events = Vec::new();
    for (k, line) in lines {
        let rec: EventRecord = serde_json::from_str(line).map_err(|source| FormatError::Json { line: k + 1, source })?;
        let kind = EventKind::parse(&rec.kind)
            .ok_or_else(|| FormatError::Shape(format!("line {}: unknown event kind {:?}", k + 1, rec.kind)))?;
        if rec.drones.len() != rec.after.len()
            || rec.drones.is_empty()
            || rec.drones.iter().any(|&i| i == 0 || i > header.n)
        {
            return Err(FormatError::Shape(format!("line {}: bad drone list", k + 1)));
        }
        let time: T = num("t", &rec.t)?;
        if events.last().is_some_and(|e: &Event<T>| e.time > time) {
            return Err(FormatError::Shape(format!("line {}: events out of order", k + 1)));
        }
        events.push(Event {
            time,
            kind,
            drones: rec.drones,
            after: rec.after.iter().map(snapshot).collect::<Result<_, _>>()?,
        });
    }
    Ok(Trace::new(initial, header.policy, events, t_max)?)
}

fn time_json<T: Scalar>(t: &T) -> Value {
    json!({ "exact": t.to_exact_string(), "approx": t.approx_f64() })
}

pub fn report_json<T: Scalar>(report: &SyncReport<T>) -> Value {
    json!({
        "n": report.n,
        "correct_estimates_time": report.correct_estimates_time.as_ref().map(time_json),
        "full_sync_time": time_json(&report.full_sync_time),
        "left_sync_time": report.left_sync_time.iter().map(time_json).collect::<Vec<_>>(),
        "right_sync_time": report.right_sync_time.iter().map(time_json).collect::<Vec<_>>(),
        "first_met_time": report
            .first_met_time
            .iter()
            .map(|t| t.as_ref().map(time_json))
            .collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, SimOptions};
    use crate::scenarios::{gen_five_drone_three_groups, gen_random, EstimateMode, RandomOptions};
    use crate::Rational;
    use proptest::prelude::*;

    #[test]
    fn decimal_literals_are_exact() {
        let text = r#"{"n":1,"policy":"escort_left","drones":[{"x":"0.5","d":-1,"a":["-0.25",0],"b":["13.94",5569]}]}"#;
        let (cfg, policy) = read_config::<Rational>(text).unwrap();
        assert_eq!(policy, EscortPolicy::EscortLeft);
        assert_eq!(cfg.drones[0].est.right.pos, Rational::ratio(697, 50));
        assert!(write_config(&cfg, policy).contains("\"697/50\""));
    }

    #[test]
    fn malformed_input_is_rejected() {
        let wrong_n = r#"{"n":2,"policy":"escort_left","drones":[{"x":"0","d":1,"a":["0",0],"b":["1",0]}]}"#;
        assert!(matches!(read_config::<Rational>(wrong_n), Err(FormatError::Shape(_))));
        let bad_dir = r#"{"n":1,"policy":"escort_left","drones":[{"x":"0","d":0,"a":["0",0],"b":["1",0]}]}"#;
        assert!(matches!(read_config::<Rational>(bad_dir), Err(FormatError::Shape(_))));
        let bad_num = r#"{"n":1,"policy":"escort_left","drones":[{"x":"1/0","d":1,"a":["0",0],"b":["1",0]}]}"#;
        assert!(matches!(read_config::<Rational>(bad_num), Err(FormatError::Number { field: "x", .. })));
        assert!(matches!(read_trace::<Rational>(""), Err(FormatError::Shape(_))));
    }

    #[test]
    fn trace_round_trip_and_determinism() {
        let cfg = validate(&gen_five_drone_three_groups::<Rational>(), &ValidateOptions::default()).unwrap();
        let t = Rational::from_int(6);
        let a = simulate(&cfg, &t, &SimOptions::default()).unwrap();
        let b = simulate(&cfg, &t, &SimOptions::default()).unwrap();
        let text = write_trace(&a);
        assert_eq!(text, write_trace(&b));
        let back = read_trace::<Rational>(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(write_trace(&back), text);
        assert!(text.lines().nth(1).unwrap().starts_with(r#"{"t":""#));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_configs_round_trip(n in 1usize..7, seed in any::<u64>(), mode in 0usize..3) {
            let mode = [EstimateMode::Correct, EstimateMode::Incorrect, EstimateMode::Unconstrained][mode];
            let cfg = gen_random::<Rational>(n, seed, &RandomOptions { mode, ..Default::default() }).unwrap();
            let text = write_config(&cfg, EscortPolicy::EscortRight);
            let (back, policy) = read_config::<Rational>(&text).unwrap();
            prop_assert_eq!(policy, EscortPolicy::EscortRight);
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(write_config(&back, policy), text);

            let valid = validate(&cfg, &ValidateOptions::default()).unwrap();
            let trace = simulate(&valid, &Rational::from_int(3), &SimOptions::default()).unwrap();
            let text = write_trace(&trace);
            prop_assert_eq!(read_trace::<Rational>(&text).unwrap(), trace);
        }
    }
}
