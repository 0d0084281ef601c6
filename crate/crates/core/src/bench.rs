//! Ranking metrics and the benchmark harnesses.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ModelSet;
use crate::pipeline::{
    arbitrate, evaluate, load_manifest, rank, validate_loop, CandidateObject, EvaluatedState, ExperimentKind, Mode,
    ObjectSetManifest, PipelineError, Preferred, QueryConfig, Strategy,
};

/// Reference numbers reported for the physical experiments. Used only to
/// annotate reports.
pub mod reference {
    pub const CONSTRUCTION_AVG_RANK: f64 = 5.84;
    pub const CONSTRUCTION_HITS5: f64 = 0.67;
    pub const CONSTRUCTION_COMPLETION: f64 = 0.9667;
    pub const RANDOM_RANK_PCT: f64 = 49.9;
    pub const SUBSTITUTION_HITS1: f64 = 0.53;
    pub const SUBSTITUTION_HITS5: f64 = 0.86;
    pub const DIRECT_PCT_CORRECT: f64 = 0.8333;
    pub const SUBS_PCT_CORRECT: f64 = 0.60;
    pub const RANDOM_PCT_CORRECT: f64 = 0.3667;
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no cases to aggregate")]
    EmptyCases,
    #[error("rank must be at least 1, got {0}")]
    InvalidRank(usize),
    #[error("{0}: {1}")]
    Case(String, String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub fn average_rank(ranks: &[usize]) -> Result<f64, BenchError> {
    if ranks.is_empty() {
        return Err(BenchError::EmptyCases);
    }
    if let Some(&r) = ranks.iter().find(|&&r| r == 0) {
        return Err(BenchError::InvalidRank(r));
    }
    Ok(ranks.iter().sum::<usize>() as f64 / ranks.len() as f64)
}

/// Fraction of cases ranked within the top `k`. Zero for no cases.
pub fn hits_at_k(ranks: &[usize], k: usize) -> f64 {
    fraction(ranks.iter().map(|&r| r >= 1 && r <= k))
}

pub fn completion_rate(found: &[bool]) -> f64 {
    fraction(found.iter().copied())
}

pub fn percent_correct(agreements: &[bool]) -> f64 {
    fraction(agreements.iter().copied())
}

/// Mean of `rank / |S|` as a percentage.
pub fn rank_percent(ranks: &[usize], sizes: &[usize]) -> Result<f64, BenchError> {
    if ranks.is_empty() || ranks.len() != sizes.len() {
        return Err(BenchError::EmptyCases);
    }
    let total: f64 = ranks.iter().zip(sizes).map(|(&r, &n)| r as f64 / n as f64).sum();
    Ok(100.0 * total / ranks.len() as f64)
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        hit += usize::from(f);
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// One manifest, loaded.
#[derive(Debug, Clone)]
pub struct BenchInput {
    pub name: String,
    pub manifest: ObjectSetManifest,
    pub objects: Vec<CandidateObject>,
}

pub fn load_inputs(paths: &[PathBuf]) -> Result<Vec<BenchInput>, BenchError> {
    paths
        .iter()
        .map(|p| {
            let (manifest, objects) = load_manifest(p)?;
            Ok(BenchInput {
                name: case_name(p),
                manifest,
                objects,
            })
        })
        .collect()
}

fn case_name(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub seed: u64,
    /// Strategies to report; arbitration evaluates each case once and
    /// ranks it under every strategy listed.
    pub strategies: Vec<Strategy>,
    pub k: usize,
    pub esf_samples: usize,
    /// Shuffles per case for the random baseline.
    pub random_trials: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            strategies: vec![Strategy::Direct],
            k: 5,
            esf_samples: crate::geometry::DEFAULT_ESF_SAMPLES,
            random_trials: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub manifest: String,
    /// Rank of the ground-truth state (the preferred option for arbitration).
    pub rank: usize,
    #[serde(rename = "|S|")]
    pub states: usize,
    /// Validation-loop tries until an oracle-true state.
    pub attempts: usize,
    /// A working solution was found: oracle-true, finite, material-appropriate.
    pub found: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub avg_rank: f64,
    pub rank_pct: f64,
    pub hits1: f64,
    pub hits5: f64,
    pub k: usize,
    pub hits_k: f64,
    pub completion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pct_correct: Option<f64>,
}

impl Aggregates {
    pub fn from_cases(cases: &[CaseResult], k: usize) -> Result<Self, BenchError> {
        let ranks: Vec<usize> = cases.iter().map(|c| c.rank).collect();
        let sizes: Vec<usize> = cases.iter().map(|c| c.states).collect();
        let correct: Vec<bool> = cases.iter().filter_map(|c| c.correct).collect();
        Ok(Self {
            avg_rank: average_rank(&ranks)?,
            rank_pct: rank_percent(&ranks, &sizes)?,
            hits1: hits_at_k(&ranks, 1),
            hits5: hits_at_k(&ranks, 5),
            k,
            hits_k: hits_at_k(&ranks, k),
            completion: completion_rate(&cases.iter().map(|c| c.found).collect::<Vec<_>>()),
            pct_correct: (!correct.is_empty()).then(|| percent_correct(&correct)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySection {
    pub strategy: Strategy,
    pub cases: Vec<CaseResult>,
    pub aggregates: Aggregates,
}

/// Uniformly shuffled rankings of the same cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub trials: usize,
    pub avg_rank: f64,
    pub rank_pct: f64,
    pub hits5: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pct_correct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// The first strategy's cases and aggregates.
    pub cases: Vec<CaseResult>,
    pub aggregates: Aggregates,
    pub random_baseline: RandomBaseline,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<StrategySection>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn section(&self, strategy: Strategy) -> Option<&StrategySection> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    /// Aligned text table. The first line carries the runtime and is the
    /// only line that varies between identical runs.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# runtime {:.1}s", self.runtime.as_secs_f64());
        let _ = writeln!(out, "{} benchmark, seed {}, {} cases", self.kind, self.seed, self.cases.len());
        let _ = writeln!(out);
        let sections: Vec<(String, &[CaseResult], &Aggregates)> = if self.strategies.is_empty() {
            vec![("-".into(), &self.cases, &self.aggregates)]
        } else {
            self.strategies
                .iter()
                .map(|s| (s.strategy.to_string(), s.cases.as_slice(), &s.aggregates))
                .collect()
        };
        for (name, cases, _) in &sections {
            if !self.strategies.is_empty() {
                let _ = writeln!(out, "strategy {name}");
            }
            let w = cases.iter().map(|c| c.manifest.len()).max().unwrap_or(8).max(8);
            let _ = writeln!(out, "{:<w$}  {:>5}  {:>4}  {:>8}  {:>5}  {:>7}", "manifest", "rank", "|S|", "attempts", "found", "correct");
            for c in *cases {
                let correct = c.correct.map_or("-", |b| if b { "yes" } else { "no" });
                let found = if c.found { "yes" } else { "no" };
                let _ = writeln!(
                    out,
                    "{:<w$}  {:>5}  {:>4}  {:>8}  {:>5}  {:>7}",
                    c.manifest, c.rank, c.states, c.attempts, found, correct
                );
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "{:<10}  {:>8}  {:>7}  {:>6}  {:>6}  {:>8}  {:>10}  {:>9}",
            "strategy", "avg rank", "rank%", "hits@1", "hits@5", "hits@k", "completion", "%correct"
        );
        for (name, _, a) in &sections {
            let pc = a.pct_correct.map_or("-".to_string(), |p| format!("{:.2}", 100.0 * p));
            let _ = writeln!(
                out,
                "{:<10}  {:>8.2}  {:>7.2}  {:>6.2}  {:>6.2}  {:>8}  {:>10.2}  {:>9}",
                name,
                a.avg_rank,
                a.rank_pct,
                100.0 * a.hits1,
                100.0 * a.hits5,
                format!("{:.2}@{}", 100.0 * a.hits_k, a.k),
                100.0 * a.completion,
                pc
            );
        }
        let r = &self.random_baseline;
        let pc = r.pct_correct.map_or("-".to_string(), |p| format!("{:.2}", 100.0 * p));
        let _ = writeln!(
            out,
            "{:<10}  {:>8.2}  {:>7.2}  {:>6}  {:>6.2}  {:>8}  {:>10}  {:>9}",
            "random", r.avg_rank, r.rank_pct, "-", 100.0 * r.hits5, "-", "-", pc
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "reference (physical objects, not a target):");
        use reference::*;
        let _ = match self.kind {
            ExperimentKind::Construction => writeln!(
                out,
                "  avg rank {CONSTRUCTION_AVG_RANK}, hits@5 {:.0}%, completion {:.2}%, random rank% {RANDOM_RANK_PCT}",
                100.0 * CONSTRUCTION_HITS5,
                100.0 * CONSTRUCTION_COMPLETION
            ),
            ExperimentKind::Substitution => writeln!(
                out,
                "  hits@1 {:.0}%, hits@5 {:.0}%",
                100.0 * SUBSTITUTION_HITS1,
                100.0 * SUBSTITUTION_HITS5
            ),
            ExperimentKind::Arbitration => writeln!(
                out,
                "  %correct direct {:.2}%, subs {:.0}%, random {:.2}%",
                100.0 * DIRECT_PCT_CORRECT,
                100.0 * SUBS_PCT_CORRECT,
                100.0 * RANDOM_PCT_CORRECT
            ),
        };
        out
    }
}

struct Truth {
    /// Key whose rank is reported.
    target: String,
    /// The alternative an arbitration case should beat.
    other: Option<String>,
}

fn truth(kind: ExperimentKind, input: &BenchInput) -> Result<Truth, BenchError> {
    let gt = &input.manifest.ground_truth;
    let missing = |what: &str| BenchError::Case(input.name.clone(), format!("ground truth lacks {what}"));
    let sub = gt.substitute_id.clone();
    let cons = input.manifest.construction_key();
    Ok(match kind {
        ExperimentKind::Construction => Truth {
            target: cons.ok_or_else(|| missing("construction"))?,
            other: None,
        },
        ExperimentKind::Substitution => Truth {
            target: sub.ok_or_else(|| missing("substitute_id"))?,
            other: None,
        },
        ExperimentKind::Arbitration => {
            let sub = sub.ok_or_else(|| missing("substitute_id"))?;
            let cons = cons.ok_or_else(|| missing("construction"))?;
            match gt.preferred.ok_or_else(|| missing("preferred"))? {
                Preferred::Substitute => Truth {
                    target: sub,
                    other: Some(cons),
                },
                Preferred::Construction => Truth {
                    target: cons,
                    other: Some(sub),
                },
            }
        }
    })
}

fn mode_for(kind: ExperimentKind) -> Mode {
    match kind {
        ExperimentKind::Construction => Mode::Construct,
        ExperimentKind::Substitution => Mode::Substitute,
        ExperimentKind::Arbitration => Mode::Macgyver,
    }
}

fn score_case(
    name: &str,
    truth: &Truth,
    manifest: &ObjectSetManifest,
    ranked: &[EvaluatedState],
) -> Result<CaseResult, BenchError> {
    let pos = |key: &str| {
        ranked
            .iter()
            .position(|s| s.key == key)
            .ok_or_else(|| BenchError::Case(name.to_string(), format!("state {key} not enumerated")))
    };
    let t = pos(&truth.target)?;
    let outcome = validate_loop(ranked, &manifest.oracle);
    let found = outcome.success.as_deref().is_some_and(|key| {
        ranked
            .iter()
            .find(|s| s.key == key)
            .is_some_and(|s| s.value.is_some_and(|v| v.is_finite()) && s.scores.material >= 0.5)
    });
    let correct = match &truth.other {
        Some(other) => {
            let o = pos(other)?;
            Some(ranked[t].value > ranked[o].value)
        }
        None => None,
    };
    Ok(CaseResult {
        manifest: name.to_string(),
        rank: t + 1,
        states: ranked.len(),
        attempts: outcome.attempts,
        found,
        correct,
    })
}

/// Runs the pipeline on every input and aggregates. Cases run in parallel;
/// the report does not depend on scheduling.
pub fn run_benchmark(
    kind: ExperimentKind,
    inputs: &[BenchInput],
    models: &ModelSet,
    opts: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    if inputs.is_empty() {
        return Err(BenchError::EmptyCases);
    }
    let strategies = if opts.strategies.is_empty() {
        vec![Strategy::Direct]
    } else {
        opts.strategies.clone()
    };
    let start = Instant::now();
    let needs_joint = strategies.contains(&Strategy::Subs);

    let per_case: Vec<(Vec<CaseResult>, usize, Truth, Vec<String>)> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            let truth = truth(kind, input)?;
            let config = QueryConfig {
                mode: mode_for(kind),
                strategy: strategies[0],
                seed: opts.seed.wrapping_add(i as u64),
                esf_samples: opts.esf_samples,
                joint_constructions: needs_joint,
                ..Default::default()
            };
            let eval = evaluate(&input.objects, input.manifest.action, models, &config)?;
            let keys: Vec<String> = eval.states.iter().map(|s| s.key.clone()).collect();
            let mut results = Vec::with_capacity(strategies.len());
            for &s in &strategies {
                let values = arbitrate(s, &eval.states)?;
                let ranked = rank(eval.states.clone(), &values);
                results.push(score_case(&input.name, &truth, &input.manifest, &ranked)?);
            }
            Ok((results, eval.states.len(), truth, keys))
        })
        .collect::<Result<_, BenchError>>()?;

    let mut sections = Vec::with_capacity(strategies.len());
    for (j, &s) in strategies.iter().enumerate() {
        let cases: Vec<CaseResult> = per_case.iter().map(|(r, ..)| r[j].clone()).collect();
        let aggregates = Aggregates::from_cases(&cases, opts.k)?;
        sections.push(StrategySection {
            strategy: s,
            cases,
            aggregates,
        });
    }
    let random_baseline = random_baseline(
        per_case.iter().map(|(_, _, t, keys)| (t, keys.as_slice())),
        opts.random_trials.max(1),
        opts.seed,
    );
    let first = sections[0].clone();
    Ok(BenchReport {
        kind,
        seed: opts.seed,
        cases: first.cases,
        aggregates: first.aggregates,
        random_baseline,
        strategies: if kind == ExperimentKind::Arbitration { sections } else { Vec::new() },
        runtime: start.elapsed(),
    })
}

fn random_baseline<'a>(cases: impl Iterator<Item = (&'a Truth, &'a [String])>, trials: usize, seed: u64) -> RandomBaseline {
    let (mut rank_sum, mut pct_sum, mut hits5, mut correct, mut pairs, mut n) = (0.0, 0.0, 0usize, 0usize, 0usize, 0usize);
    for (c, (truth, keys)) in cases.enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x7a2d_0000 + c as u64));
        let mut order: Vec<usize> = (0..keys.len()).collect();
        let t = keys.iter().position(|k| *k == truth.target);
        let o = truth.other.as_ref().and_then(|o| keys.iter().position(|k| k == o));
        for _ in 0..trials {
            order.shuffle(&mut rng);
            let r = t.and_then(|t| order.iter().position(|&i| i == t)).map_or(keys.len(), |p| p + 1);
            rank_sum += r as f64;
            pct_sum += r as f64 / keys.len() as f64;
            hits5 += usize::from(r <= 5);
            n += 1;
            if let (Some(t), Some(o)) = (t, o) {
                let pt = order.iter().position(|&i| i == t).unwrap_or(usize::MAX);
                let po = order.iter().position(|&i| i == o).unwrap_or(usize::MAX);
                correct += usize::from(pt < po);
                pairs += 1;
            }
        }
    }
    let n = n.max(1) as f64;
    RandomBaseline {
        trials,
        avg_rank: rank_sum / n,
        rank_pct: 100.0 * pct_sum / n,
        hits5: hits5 as f64 / n,
        pct_correct: (pairs > 0).then(|| correct as f64 / pairs as f64),
    }
}

/// Floors and ceilings a bench run is checked against. Absent fields are
/// not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub min_hits5: Option<f64>,
    #[serde(default)]
    pub min_hits_k: Option<f64>,
    #[serde(default)]
    pub max_rank_pct: Option<f64>,
    #[serde(default)]
    pub max_avg_rank: Option<f64>,
    #[serde(default)]
    pub min_completion: Option<f64>,
    #[serde(default)]
    pub min_pct_correct: Option<f64>,
    /// Percentage points by which %correct must beat the random baseline.
    #[serde(default)]
    pub min_margin_over_random: Option<f64>,
}

impl Thresholds {
    /// Human-readable violations for every strategy section in `report`.
    pub fn violations(&self, report: &BenchReport) -> Vec<String> {
        let sections: Vec<(String, &Aggregates)> = if report.strategies.is_empty() {
            vec![(report.kind.to_string(), &report.aggregates)]
        } else {
            report
                .strategies
                .iter()
                .map(|s| (format!("{} {}", report.kind, s.strategy), &s.aggregates))
                .collect()
        };
        let mut out = Vec::new();
        for (name, a) in sections {
            let mut floor = |what: &str, got: f64, min: Option<f64>| {
                if let Some(min) = min.filter(|&m| got < m) {
                    out.push(format!("{name}: {what} {got:.4} below {min}"));
                }
            };
            floor("hits@5", a.hits5, self.min_hits5);
            floor("hits@k", a.hits_k, self.min_hits_k);
            floor("completion", a.completion, self.min_completion);
            if let Some(pc) = a.pct_correct {
                floor("%correct", pc, self.min_pct_correct);
                if let (Some(m), Some(r)) = (self.min_margin_over_random, report.random_baseline.pct_correct) {
                    floor("margin over random (pp)", 100.0 * (pc - r), Some(m));
                }
            }
            if let Some(max) = self.max_rank_pct.filter(|&m| a.rank_pct > m) {
                out.push(format!("{name}: rank% {:.4} above {max}", a.rank_pct));
            }
            if let Some(max) = self.max_avg_rank.filter(|&m| a.avg_rank > m) {
                out.push(format!("{name}: avg rank {:.4} above {max}", a.avg_rank));
            }
        }
        out
    }
}
