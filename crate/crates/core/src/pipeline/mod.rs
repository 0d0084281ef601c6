//! State enumeration, per-state scoring, arbitration and ranking.

mod evaluate;
mod manifest;

pub use evaluate::{evaluate, Evaluation};
pub use manifest::{
    load_manifest, load_objects, CandidateObject, ExperimentKind, GroundTruth, ManifestObject,
    ObjectSetManifest, Preferred,
};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::geometry::GeometryError;
use crate::models::ModelSet;
use crate::nn::NnError;
use crate::scoring::{
    AttachType, AttachmentScore, MaterialAggregation, ScoreBreakdown, ScoringError,
};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("missing model: {0}")]
    MissingModel(String),
    #[error("substitution-based arbitration needs joint shape scores for construction {0}")]
    MissingJointScores(String),
    #[error("no objects to rank")]
    NoObjects,
    #[error("tuple size m must be at least 2, got {0}")]
    InvalidM(usize),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which states a query considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Substitute,
    Construct,
    Macgyver,
}

impl FromStr for Mode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "substitute" => Ok(Mode::Substitute),
            "construct" => Ok(Mode::Construct),
            "macgyver" => Ok(Mode::Macgyver),
            _ => Err(PipelineError::Manifest(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Substitute => "substitute",
            Mode::Construct => "construct",
            Mode::Macgyver => "macgyver",
        })
    }
}

/// Arbitration value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rule,
    Direct,
    Subs,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Rule, Strategy::Direct, Strategy::Subs];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rule => "rule",
            Strategy::Direct => "direct",
            Strategy::Subs => "subs",
        }
    }
}

impl FromStr for Strategy {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PipelineError::Manifest(format!("unknown strategy {s:?}")))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rule-based arbitration constants.
pub const RULE_SUBSTITUTE_VALUE: f64 = 10.0;
pub const RULE_CONSTRUCTION_VALUE: f64 = 0.0;
pub const RULE_THRESHOLD: f64 = 1.0;

/// A state before scoring: indices into the candidate list. One index is a
/// substitute, more are an ordered tuple (action part first).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSpec {
    pub parts: Vec<usize>,
}

impl StateSpec {
    pub fn is_substitute(&self) -> bool {
        self.parts.len() == 1
    }

    pub fn key<S: AsRef<str>>(&self, ids: &[S]) -> String {
        let names: Vec<&str> = self.parts.iter().map(|&i| ids[i].as_ref()).collect();
        names.join("+")
    }
}

/// Every substitute (in id order) followed by every ordered `m`-tuple of
/// distinct objects, lexicographic in id order. `|S| = n + n!/(n−m)!`.
pub fn enumerate_states<S: AsRef<str>>(ids: &[S], m: usize) -> Vec<StateSpec> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].as_ref().cmp(ids[b].as_ref()));
    let mut out: Vec<StateSpec> = order.iter().map(|&i| StateSpec { parts: vec![i] }).collect();
    if m >= 2 && m <= ids.len() {
        let mut current = Vec::with_capacity(m);
        let mut used = vec![false; ids.len()];
        permutations(&order, m, &mut current, &mut used, &mut out);
    }
    out
}

fn permutations(
    order: &[usize],
    m: usize,
    current: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<StateSpec>,
) {
    if current.len() == m {
        out.push(StateSpec { parts: current.clone() });
        return;
    }
    for &i in order {
        if !used[i] {
            used[i] = true;
            current.push(i);
            permutations(order, m, current, used, out);
            current.pop();
            used[i] = false;
        }
    }
}

/// `enumerate_states` restricted to what `mode` considers.
pub fn enumerate_for_mode<S: AsRef<str>>(ids: &[S], m: usize, mode: Mode) -> Vec<StateSpec> {
    enumerate_states(ids, m)
        .into_iter()
        .filter(|s| match mode {
            Mode::Substitute => s.is_substitute(),
            Mode::Construct => !s.is_substitute(),
            Mode::Macgyver => true,
        })
        .collect()
}

/// A scored state. `value` and `rank` are filled in by arbitration and ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedState {
    /// Position in enumeration order.
    pub index: usize,
    pub key: String,
    pub parts: Vec<String>,
    pub scores: ScoreBreakdown,
    pub attach_type: Option<AttachType>,
    pub closest_points: Option<Vec<[f64; 3]>>,
    /// Joint shape score of the aligned, merged construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_shape: Option<f64>,
    pub value: Option<Value>,
    pub rank: Option<usize>,
}

impl EvaluatedState {
    pub fn is_substitute(&self) -> bool {
        self.parts.len() == 1
    }
}

/// Arbitration values, one per state.
pub fn arbitrate(strategy: Strategy, states: &[EvaluatedState]) -> Result<Vec<Value>, PipelineError> {
    states
        .iter()
        .map(|s| {
            let fin = s.scores.final_value;
            Ok(match strategy {
                Strategy::Direct => fin,
                Strategy::Rule => {
                    let above = fin > Value::finite(RULE_THRESHOLD);
                    match (s.is_substitute(), above) {
                        (true, true) => Value::finite(RULE_SUBSTITUTE_VALUE),
                        (false, true) => Value::finite(RULE_CONSTRUCTION_VALUE),
                        _ => Value::NegInfinity,
                    }
                }
                Strategy::Subs if s.is_substitute() => fin,
                Strategy::Subs => {
                    let joint = s
                        .joint_shape
                        .ok_or_else(|| PipelineError::MissingJointScores(s.key.clone()))?;
                    match s.scores.attachment {
                        Some(AttachmentScore::Score(a)) => Value::finite(joint + s.scores.material + a),
                        _ => Value::NegInfinity,
                    }
                }
            })
        })
        .collect()
}

/// Indices sorted by descending value, ties kept in input order.
pub fn rank_order(values: &[Value]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].cmp(&values[a]));
    idx
}

/// Attaches values and 1-based ranks and returns the states in rank order.
pub fn rank(states: Vec<EvaluatedState>, values: &[Value]) -> Vec<EvaluatedState> {
    assert_eq!(states.len(), values.len(), "one value per state");
    let order = rank_order(values);
    let mut slots: Vec<Option<EvaluatedState>> = states.into_iter().map(Some).collect();
    order
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let mut s = slots[i].take().expect("each index once");
            s.value = Some(values[i]);
            s.rank = Some(r + 1);
            s
        })
        .collect()
}

/// Result of trying ranked states in order against an oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    /// Key of the first successful state.
    pub success: Option<String>,
    pub attempts: usize,
}

/// Walks the ranking until the oracle reports success. Unknown keys count
/// as failures.
pub fn validate_loop(ranked: &[EvaluatedState], oracle: &BTreeMap<String, bool>) -> ValidationOutcome {
    for (i, s) in ranked.iter().enumerate() {
        if oracle.get(&s.key).copied().unwrap_or(false) {
            return ValidationOutcome {
                success: Some(s.key.clone()),
                attempts: i + 1,
            };
        }
    }
    ValidationOutcome {
        success: None,
        attempts: ranked.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryConfig {
    pub m: usize,
    pub mode: Mode,
    pub strategy: Strategy,
    /// Seeds reference sampling, descriptors and grasp sampling.
    pub seed: u64,
    pub esf_samples: usize,
    pub attach_order: Vec<AttachType>,
    pub material_aggregation: MaterialAggregation,
    /// Score merged constructions with the joint shape model even when the
    /// strategy does not need it.
    pub joint_constructions: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            m: 2,
            mode: Mode::Macgyver,
            strategy: Strategy::Direct,
            seed: 0,
            esf_samples: crate::geometry::DEFAULT_ESF_SAMPLES,
            attach_order: AttachType::PREFERENCE.to_vec(),
            material_aggregation: MaterialAggregation::default(),
            joint_constructions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub action: Action,
    pub mode: Mode,
    pub strategy: Strategy,
    pub seed: u64,
    /// Reference tool the constructions were aligned to.
    pub reference_id: Option<String>,
    /// States in rank order.
    pub states: Vec<EvaluatedState>,
}

/// Enumerate, evaluate, arbitrate, rank.
pub fn run_query(
    objects: &[CandidateObject],
    action: Action,
    models: &ModelSet,
    config: &QueryConfig,
) -> Result<QueryResult, PipelineError> {
    let eval = evaluate(objects, action, models, config)?;
    let values = arbitrate(config.strategy, &eval.states)?;
    Ok(QueryResult {
        action,
        mode: config.mode,
        strategy: config.strategy,
        seed: config.seed,
        reference_id: eval.reference_id,
        states: rank(eval.states, &values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, prop_oneof, proptest, Just};
    use proptest::strategy::Strategy as Strategy2;

    fn sub(index: usize, shape: f64, material: f64) -> EvaluatedState {
        EvaluatedState {
            index,
            key: format!("s{index}"),
            parts: vec![format!("s{index}")],
            scores: ScoreBreakdown::substitute(shape, material),
            attach_type: None,
            closest_points: None,
            joint_shape: None,
            value: None,
            rank: None,
        }
    }

    fn con(index: usize, shape: f64, material: f64, att: AttachmentScore) -> EvaluatedState {
        EvaluatedState {
            index,
            key: format!("c{index}+x"),
            parts: vec![format!("c{index}"), "x".into()],
            scores: ScoreBreakdown::construction(shape, material, att),
            attach_type: Some(AttachType::Magnetic),
            closest_points: Some(vec![]),
            joint_shape: Some(shape),
            value: None,
            rank: None,
        }
    }

    fn factorial_ratio(n: usize, m: usize) -> usize {
        ((n - m + 1)..=n).product()
    }

    #[test]
    fn state_counts() {
        let ids: Vec<String> = (0..10).map(|i| format!("o{i}")).collect();
        assert_eq!(enumerate_states(&ids, 2).len(), 100);
        assert_eq!(enumerate_states(&["a"], 2).len(), 1);
        let four = enumerate_states(&["d", "b", "a", "c"], 2);
        let keys: Vec<String> = four.iter().map(|s| s.key(&["d", "b", "a", "c"])).collect();
        let mut expected: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        for x in ["a", "b", "c", "d"] {
            for y in ["a", "b", "c", "d"] {
                if x != y {
                    expected.push(format!("{x}+{y}"));
                }
            }
        }
        assert_eq!(keys, expected);
    }

    #[test]
    fn cardinality_for_small_sets() {
        for n in 1..=8 {
            let ids: Vec<String> = (0..n).map(|i| format!("{i}")).collect();
            let states = enumerate_states(&ids, 2);
            let tuples = if n >= 2 { factorial_ratio(n, 2) } else { 0 };
            assert_eq!(states.len(), n + tuples);
            let distinct: std::collections::HashSet<_> = states.iter().collect();
            assert_eq!(distinct.len(), states.len());
        }
    }

    #[test]
    fn rule_based_values() {
        let states = vec![
            sub(0, 0.9, 0.8),
            con(1, 0.9, 1.0, AttachmentScore::Score(0.0)),
            sub(2, 0.5, 0.4),
        ];
        let v = arbitrate(Strategy::Rule, &states).unwrap();
        assert_eq!(v, vec![Value::finite(10.0), Value::finite(0.0), Value::NegInfinity]);
        let ranked = rank(states, &v);
        assert_eq!(ranked[0].key, "s0");
    }

    #[test]
    fn direct_prefers_higher_final() {
        let states = vec![sub(0, 0.7, 0.7), con(1, 0.8, 0.8, AttachmentScore::Score(0.0))];
        let v = arbitrate(Strategy::Direct, &states).unwrap();
        assert_eq!(rank(states, &v)[0].key, "c1+x");
    }

    #[test]
    fn subs_needs_joint_scores() {
        let mut c = con(0, 0.8, 0.8, AttachmentScore::Score(-0.5));
        c.joint_shape = None;
        assert!(matches!(
            arbitrate(Strategy::Subs, &[c]),
            Err(PipelineError::MissingJointScores(_))
        ));
        let mut c = con(0, 0.2, 0.8, AttachmentScore::Score(-0.5));
        c.joint_shape = Some(0.6);
        assert_eq!(arbitrate(Strategy::Subs, &[c]).unwrap(), vec![Value::finite(0.6 + 0.8 - 0.5)]);
    }

    #[test]
    fn ranking_examples() {
        let v = [Value::finite(2.0), Value::finite(1.0), Value::finite(3.0)];
        assert_eq!(rank_order(&v), vec![2, 0, 1]);
        let same = [Value::finite(1.0); 4];
        assert_eq!(rank_order(&same), vec![0, 1, 2, 3]);
    }

    #[test]
    fn validation_loop_counts_attempts() {
        let states: Vec<EvaluatedState> = (0..6).map(|i| sub(i, 0.5, 0.5)).collect();
        let v: Vec<Value> = (0..6).map(|i| Value::finite(-(i as f64))).collect();
        let ranked = rank(states, &v);
        let mut oracle = BTreeMap::new();
        oracle.insert("s4".to_string(), true);
        oracle.insert("s1".to_string(), false);
        assert_eq!(validate_loop(&ranked, &oracle).attempts, 5);
        oracle.insert("s0".to_string(), true);
        assert_eq!(validate_loop(&ranked, &oracle).attempts, 1);
        let none = validate_loop(&ranked, &BTreeMap::new());
        assert_eq!(none, ValidationOutcome { success: None, attempts: 6 });
    }

    fn arb_value() -> impl Strategy2<Value = Value> {
        prop_oneof![
            1 => Just(Value::NegInfinity),
            6 => (-3.0f64..3.0).prop_map(Value::finite),
            2 => (-2i32..3).prop_map(|v| Value::finite(v as f64)),
        ]
    }

    proptest! {
        #[test]
        fn ranking_matches_brute_force_sort(values in proptest::collection::vec(arb_value(), 1..100)) {
            let order = rank_order(&values);
            let mut pairs: Vec<(Value, usize)> = values.iter().copied().zip(0..).collect();
            // bubble sort as an independent oracle
            for i in 0..pairs.len() {
                for j in 0..pairs.len() - 1 - i {
                    let (a, b) = (pairs[j], pairs[j + 1]);
                    if a.0 < b.0 || (a.0 == b.0 && a.1 > b.1) {
                        pairs.swap(j, j + 1);
                    }
                }
            }
            let expected: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(order, expected);
        }

        #[test]
        fn raising_a_value_never_worsens_its_rank(
            values in proptest::collection::vec(arb_value(), 2..40),
            pick in any::<proptest::sample::Index>(),
            bump in 0.0f64..5.0,
        ) {
            let i = pick.index(values.len());
            let before = rank_order(&values).iter().position(|&k| k == i).unwrap();
            let mut raised = values.clone();
            raised[i] = match values[i] {
                Value::Finite(v) => Value::finite(v + bump),
                Value::NegInfinity => Value::finite(bump),
            };
            let after = rank_order(&raised).iter().position(|&k| k == i).unwrap();
            prop_assert!(after <= before);
        }

        #[test]
        fn rule_based_substitutes_dominate(
            subs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8),
            cons in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, -1.0f64..=0.0, any::<bool>()), 1..8),
        ) {
            let mut states = Vec::new();
            for (s, m) in &subs {
                states.push(sub(states.len(), *s, *m));
            }
            for (s, m, a, attachable) in &cons {
                let att = if *attachable { AttachmentScore::Score(*a) } else { AttachmentScore::Unattachable };
                states.push(con(states.len(), *s, *m, att));
            }
            let v = arbitrate(Strategy::Rule, &states).unwrap();
            let ranked = rank(states, &v);
            let last_good_sub = ranked
                .iter()
                .rposition(|s| s.is_substitute() && s.scores.final_value > Value::finite(1.0));
            let first_con = ranked.iter().position(|s| !s.is_substitute());
            if let (Some(a), Some(b)) = (last_good_sub, first_con) {
                prop_assert!(a < b);
            }
        }

        #[test]
        fn direct_is_a_sort_by_final_score(
            scores in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, -1.0f64..=0.0, 0u8..3), 1..30),
        ) {
            let states: Vec<EvaluatedState> = scores
                .iter()
                .enumerate()
                .map(|(i, (s, m, a, k))| match k {
                    0 => sub(i, *s, *m),
                    1 => con(i, *s, *m, AttachmentScore::Score(*a)),
                    _ => con(i, *s, *m, AttachmentScore::Unattachable),
                })
                .collect();
            let finals: Vec<Value> = states.iter().map(|s| s.scores.final_value).collect();
            let v = arbitrate(Strategy::Direct, &states).unwrap();
            let ranked = rank(states, &v);
            for w in ranked.windows(2) {
                prop_assert!(w[0].scores.final_value >= w[1].scores.final_value);
            }
            // unattachable constructions sit below every finite state
            let first_inf = ranked.iter().position(|s| !s.scores.final_value.is_finite());
            if let Some(p) = first_inf {
                prop_assert!(ranked[p..].iter().all(|s| !s.scores.final_value.is_finite()));
            }
            prop_assert_eq!(ranked.len(), finals.len());
        }
    }
}
