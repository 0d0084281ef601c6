//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::{any, prop_oneof};
use proptest::strategy::{Just, Strategy as _};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use macgyver_core::bench::{run_benchmark, BenchInput, BenchOptions};
use macgyver_core::geometry::{
    compute_esf, AlignedAssembly, AlignedPart, EsfHistogram, PartRole, Point, PointCloud, RigidTransform,
    DEFAULT_ESF_SAMPLES, ESF_BINS, ESF_HISTOGRAMS,
};
use macgyver_core::models::{
    build_reference_library, split_by_object, train_joint_shape, train_material, train_part_networks, train_pierce,
    MaterialTrainingOptions, ModelSet, PierceTrainingOptions, ShapeCorpus, ShapeCorpusSpec, ShapeTrainingOptions,
};
use macgyver_core::nn::{
    numeric_gradient, relative_error, Activation, BinaryArchitecture, BinaryClassifier, DualArchitecture,
    DualNetworkModel, MetricExponent, TrainingPair,
};
use macgyver_core::pipeline::{
    arbitrate, enumerate_states, rank, EvaluatedState, ExperimentKind, Strategy, RULE_THRESHOLD,
};
use macgyver_core::scoring::{
    attachment_fit, infer_attachment, normalize_attachments, AttachPart, AttachType, AttachmentScore,
    ObjectCapabilities, ScoreBreakdown, PIERCE_ALPHA,
};
use macgyver_core::spectral::{ActionMaterialTable, MaterialClass, SpectralReading};
use macgyver_core::synth::{
    build_experiment_set, case_seed, default_class_models, gen_spectral_dataset, gen_tool_cloud, ToolPrototypeSpec,
};
use macgyver_core::{Action, Value};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Models and data shared between criteria, with the time spent making them.
#[derive(Default)]
struct Shared {
    data: Vec<(SpectralReading, MaterialClass)>,
    models: ModelSet,
    material_time: Vec<(Action, Duration)>,
    pierce_time: Duration,
    corpus: Option<(ShapeCorpus, Duration)>,
}

impl Shared {
    fn material_for(&self, actions: &[Action]) -> Duration {
        self.material_time
            .iter()
            .filter(|(a, _)| actions.contains(a))
            .map(|(_, d)| *d)
            .sum()
    }
}

// 1.
fn state_space() -> Check {
    let ids: Vec<String> = (0..10).map(|i| format!("o{i}")).collect();
    let n10 = enumerate_states(&ids, 2).len();
    ensure(n10 == 100, format!("n=10 gave {n10} states"))?;
    for n in 0..=8usize {
        let ids: Vec<String> = (0..n).map(|i| format!("o{i}")).collect();
        // Substitutes in order, then every ordered pair of distinct objects.
        let mut expected: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    expected.push(vec![a, b]);
                }
            }
        }
        let got: Vec<Vec<usize>> = enumerate_states(&ids, 2).into_iter().map(|s| s.parts).collect();
        ensure(got == expected, format!("n={n}: enumeration differs from exhaustive listing"))?;
        let keys: BTreeSet<String> = enumerate_states(&ids, 2).iter().map(|s| s.key(&ids)).collect();
        ensure(keys.len() == n * n, format!("n={n}: {} distinct keys", keys.len()))?;
    }
    Ok(format!("n=10 -> {n10} states; n<=8 match exhaustive listing"))
}

fn random_state(rng: &mut ChaCha8Rng, index: usize) -> EvaluatedState {
    let substitute = rng.random_bool(0.3);
    let coarse = |rng: &mut ChaCha8Rng| (rng.random_range(0..8) as f64) / 4.0;
    let shape = coarse(rng);
    let material = coarse(rng);
    let scores = if substitute {
        ScoreBreakdown::substitute(shape, material)
    } else if rng.random_bool(0.15) {
        ScoreBreakdown::construction(shape, material, AttachmentScore::Unattachable)
    } else {
        ScoreBreakdown::construction(shape, material, AttachmentScore::Score(-coarse(rng) / 2.0))
    };
    EvaluatedState {
        index,
        key: format!("s{index}"),
        parts: if substitute { vec!["a".into()] } else { vec!["a".into(), "b".into()] },
        scores,
        attach_type: None,
        closest_points: None,
        joint_shape: (!substitute).then(|| coarse(rng) / 2.0),
        value: None,
        rank: None,
    }
}

/// Ψ computed from the breakdown, without the pipeline.
fn oracle_value(strategy: Strategy, s: &EvaluatedState) -> f64 {
    let sub = s.scores.attachment.is_none();
    let att = s.scores.attachment.and_then(|a| a.as_finite());
    let fin = if sub {
        Some(s.scores.shape + s.scores.material)
    } else {
        att.map(|a| s.scores.shape + s.scores.material + a)
    };
    match strategy {
        Strategy::Direct => fin.unwrap_or(f64::NEG_INFINITY),
        Strategy::Rule => match fin {
            Some(v) if v > 1.0 && sub => 10.0,
            Some(v) if v > 1.0 => 0.0,
            _ => f64::NEG_INFINITY,
        },
        Strategy::Subs if sub => fin.unwrap(),
        Strategy::Subs => att.map_or(f64::NEG_INFINITY, |a| s.joint_shape.unwrap() + s.scores.material + a),
    }
}

// 2.
fn ranking_equivalence() -> Check {
    let mut mismatches = 0;
    for q in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa11ce + q);
        let n = rng.random_range(1..=120);
        let states: Vec<EvaluatedState> = (0..n).map(|i| random_state(&mut rng, i)).collect();
        let strategy = Strategy::ALL[q as usize % 3];
        let values = arbitrate(strategy, &states).map_err(|e| e.to_string())?;
        let ranked = rank(states.clone(), &values);
        // Bubble sort on (Ψ desc, index asc).
        let mut order: Vec<(f64, usize)> = states.iter().map(|s| (oracle_value(strategy, s), s.index)).collect();
        for i in 0..order.len() {
            for j in 0..order.len() - 1 - i {
                let (a, b) = (order[j], order[j + 1]);
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    order.swap(j, j + 1);
                }
            }
        }
        let got: Vec<usize> = ranked.iter().map(|s| s.index).collect();
        let want: Vec<usize> = order.iter().map(|o| o.1).collect();
        if got != want {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, format!("{mismatches} mismatching queries"))?;
    Ok("100 queries, 0 mismatches".into())
}

fn random_inputs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

// 3.
fn gradients() -> Check {
    let mut worst: f64 = 0.0;
    for c in 0..24u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e0 + c);
        let dim = rng.random_range(2..6);
        let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(2..=7)).collect();
        let activation = [Activation::Tanh, Activation::Sigmoid][c as usize % 2];
        let exponent = [MetricExponent::L1, MetricExponent::SquaredL1][(c as usize / 2) % 2];
        let arch = DualArchitecture {
            input_dim: dim,
            hidden: hidden.clone(),
            activation,
            exponent,
        };
        let mut model = DualNetworkModel::random(&arch, 0.0, c).map_err(|e| e.to_string())?;
        model.head_bias = rng.random_range(-0.5..0.5);
        let xs = random_inputs(&mut rng, 8, dim);
        let pairs: Vec<TrainingPair> = (0..4)
            .map(|i| TrainingPair {
                first: &xs[2 * i],
                second: &xs[2 * i + 1],
                label: i % 2 == 0,
            })
            .collect();
        let (_, grads) = model.loss_and_grad(&pairs, 0.01, None).map_err(|e| e.to_string())?;
        let mut probe = model.clone();
        let numeric = numeric_gradient(&model.flatten_params(), 1e-5, |p| {
            probe.set_params(p);
            probe.loss_and_grad(&pairs, 0.01, None).unwrap().0
        });
        worst = worst.max(relative_error(&grads.flatten(), &numeric));

        let arch = BinaryArchitecture {
            input_dim: dim,
            hidden,
            activation: [Activation::Tanh, Activation::Sigmoid][(c as usize / 2) % 2],
        };
        let clf = BinaryClassifier::random(&arch, 0.0, c).map_err(|e| e.to_string())?;
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<bool> = (0..refs.len()).map(|i| i % 3 != 0).collect();
        let (_, grads) = clf.loss_and_grad(&refs, &labels, 0.01, None).map_err(|e| e.to_string())?;
        let mut probe = clf.clone();
        let numeric = numeric_gradient(&clf.network.flatten_params(), 1e-5, |p| {
            probe.network.set_params(p);
            probe.loss_and_grad(&refs, &labels, 0.01, None).unwrap().0
        });
        worst = worst.max(relative_error(&grads.flatten(), &numeric));
    }
    ensure(worst < 1e-4, format!("worst relative error {worst:.3e}"))?;
    Ok(format!("24 dual + 24 binary configurations, worst relative error {worst:.2e} (< 1e-4)"))
}

/// Mann-Whitney AUC, ties counted half.
fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

// 4.
fn material(shared: &mut Shared) -> Check {
    let table = ActionMaterialTable::default();
    let (_, held) = split_by_object(&shared.data, 9);
    let objects: BTreeSet<&str> = held.iter().map(|&i| shared.data[i].0.object_id.as_str()).collect();
    ensure(objects.len() == 15, format!("{} held-out objects", objects.len()))?;
    let opts = MaterialTrainingOptions::default();
    let mut lines = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut failed = Vec::new();
    for action in Action::ALL {
        let start = Instant::now();
        let (t, _) = train_material(&shared.data, &table, action, &opts).map_err(|e| e.to_string())?;
        let ok = table.get(action).unwrap().clone();
        let (pos, neg): (Vec<usize>, Vec<usize>) = held.iter().partition(|&&i| ok.contains(&shared.data[i].1));
        let mut rng = ChaCha8Rng::seed_from_u64(0x4e1d + action as u64);
        let mut correct = 0;
        let pairs = 2000;
        for k in 0..pairs {
            let a = pos[rng.random_range(0..pos.len())];
            let b = if k % 2 == 0 {
                pos[rng.random_range(0..pos.len())]
            } else {
                neg[rng.random_range(0..neg.len())]
            };
            let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let p = t
                .model
                .pair_probability(shared.data[a].0.values(), shared.data[b].0.values())
                .map_err(|e| e.to_string())?;
            correct += usize::from((p > 0.5) == (k % 2 == 0));
        }
        let acc = correct as f64 / pairs as f64;
        let score = |i: &usize| t.score(shared.data[*i].0.values()).unwrap();
        let ps: Vec<f64> = pos.iter().map(score).collect();
        let ns: Vec<f64> = neg.iter().map(score).collect();
        let a = auc(&ps, &ns);
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        shared.material_time.push((action, elapsed));
        shared.models.material.insert(action, t);
        lines.push(format!("{action} acc {acc:.3} auc {a:.3}"));
        if acc < 0.90 || a < 0.95 || elapsed >= Duration::from_secs(300) {
            failed.push(format!("{action} acc {acc:.3} auc {a:.3} {:.0}s", elapsed.as_secs_f64()));
        }
    }
    ensure(failed.is_empty(), failed.join("; "))?;
    Ok(format!("{}; slowest action {:.0}s (< 300s)", lines.join(", "), slowest.as_secs_f64()))
}

// 5.
fn pierce(shared: &mut Shared) -> Check {
    let labels: Vec<MaterialClass> = MaterialClass::ALL.into_iter().filter(|m| m.is_pierceable()).collect();
    ensure(
        labels == [MaterialClass::Paper, MaterialClass::Foam] || labels == [MaterialClass::Foam, MaterialClass::Paper],
        format!("pierceable classes {labels:?}"),
    )?;
    let start = Instant::now();
    let opts = PierceTrainingOptions::default();
    let (clf, _) = train_pierce(&shared.data, &opts).map_err(|e| e.to_string())?;
    let (_, held) = split_by_object(&shared.data, opts.train_objects);
    let correct = held
        .iter()
        .filter(|&&i| {
            let want = matches!(shared.data[i].1, MaterialClass::Foam | MaterialClass::Paper);
            (clf.predict(shared.data[i].0.values()).unwrap() > 0.5) == want
        })
        .count();
    let acc = correct as f64 / held.len() as f64;
    shared.pierce_time = start.elapsed();
    shared.models.pierce = Some(clf);
    ensure(acc >= 0.95, format!("held-out accuracy {acc:.4}"))?;
    ensure(shared.pierce_time < Duration::from_secs(120), "took too long")?;
    Ok(format!("held-out accuracy {acc:.4} over {} readings", held.len()))
}

fn inputs(kind: ExperimentKind) -> Result<Vec<BenchInput>, String> {
    let mut out = Vec::new();
    for &action in &Action::CONSTRUCTION {
        for i in 0..5 {
            let set = build_experiment_set(kind, action, 10, case_seed(0, i)).map_err(|e| e.to_string())?;
            out.push(BenchInput {
                name: set.name.clone(),
                objects: set.candidates(),
                manifest: set.manifest,
            });
        }
    }
    Ok(out)
}

// 6.
fn construction(shared: &mut Shared) -> Check {
    ensure(
        Action::CONSTRUCTION.iter().all(|a| shared.models.material.contains_key(a)) && shared.models.pierce.is_some(),
        "material or pierce models missing",
    )?;
    let start = Instant::now();
    let corpus = ShapeCorpus::generate(&ShapeCorpusSpec::default()).map_err(|e| e.to_string())?;
    let corpus_time = start.elapsed();
    let opts = ShapeTrainingOptions::default();
    shared.models.parts = train_part_networks(&corpus, &Action::CONSTRUCTION, &opts.part).map_err(|e| e.to_string())?;
    shared.models.references = build_reference_library(&Action::CONSTRUCTION, 3, 0).map_err(|e| e.to_string())?;
    shared.corpus = Some((corpus, corpus_time));
    let cases = inputs(ExperimentKind::Construction)?;
    let report = run_benchmark(ExperimentKind::Construction, &cases, &shared.models, &BenchOptions::default())
        .map_err(|e| e.to_string())?;
    let total = start.elapsed() + shared.material_for(&Action::CONSTRUCTION) + shared.pierce_time;
    let a = &report.aggregates;
    let r = report.random_baseline.rank_pct;
    let summary = format!(
        "{} cases, hits@5 {:.3} (>= 0.60), rank% {:.2} (<= 15), random rank% {:.2} (50 +/- 10), {:.0}s incl. training (< 900s)",
        report.cases.len(),
        a.hits5,
        a.rank_pct,
        r,
        total.as_secs_f64()
    );
    ensure(report.cases.len() == 30, summary.clone())?;
    ensure(a.hits5 >= 0.60 && a.rank_pct <= 15.0, summary.clone())?;
    ensure((40.0..=60.0).contains(&r), summary.clone())?;
    ensure(total < Duration::from_secs(900), summary.clone())?;
    Ok(summary)
}

// 7.
fn arbitration(shared: &mut Shared) -> Check {
    // (a) rule-based dominance.
    let state = (
        any::<bool>(),
        -2.0f64..3.0,
        0.0f64..1.0,
        prop_oneof![Just(None), (-1.0f64..0.0).prop_map(Some)],
    );
    let mut runner = TestRunner::new(Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&proptest::collection::vec(state, 1..80), |raw| {
            let states: Vec<EvaluatedState> = raw
                .iter()
                .enumerate()
                .map(|(i, &(sub, shape, material, att))| EvaluatedState {
                    index: i,
                    key: format!("s{i}"),
                    parts: if sub { vec!["a".into()] } else { vec!["a".into(), "b".into()] },
                    scores: if sub {
                        ScoreBreakdown::substitute(shape, material)
                    } else {
                        ScoreBreakdown::construction(
                            shape,
                            material,
                            att.map_or(AttachmentScore::Unattachable, AttachmentScore::Score),
                        )
                    },
                    attach_type: None,
                    closest_points: None,
                    joint_shape: None,
                    value: None,
                    rank: None,
                })
                .collect();
            let values = arbitrate(Strategy::Rule, &states).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let ranked = rank(states, &values);
            let last_good_sub = ranked
                .iter()
                .rposition(|s| s.is_substitute() && s.scores.final_value > Value::finite(RULE_THRESHOLD));
            let first_cons = ranked.iter().position(|s| !s.is_substitute());
            if let (Some(s), Some(c)) = (last_good_sub, first_cons) {
                if s > c {
                    return Err(TestCaseError::fail(format!("substitute at {s} below construction at {c}")));
                }
            }
            Ok(())
        })
        .map_err(|e| format!("rule dominance: {e}"))?;

    // (b) direct comparison against random.
    let Some((corpus, corpus_time)) = shared.corpus.as_ref() else {
        return Err("shape corpus missing".into());
    };
    let start = Instant::now();
    let opts = ShapeTrainingOptions::default();
    for &action in &Action::CONSTRUCTION {
        let (t, _) = train_joint_shape(corpus, action, &opts).map_err(|e| e.to_string())?;
        shared.models.joint_shape.insert(action, t);
    }
    let cases = inputs(ExperimentKind::Arbitration)?;
    let report = run_benchmark(ExperimentKind::Arbitration, &cases, &shared.models, &BenchOptions::default())
        .map_err(|e| e.to_string())?;
    let total = start.elapsed() + *corpus_time;
    let direct = report.aggregates.pct_correct.ok_or("no %correct")?;
    let random = report.random_baseline.pct_correct.ok_or("no random %correct")?;
    let margin = 100.0 * (direct - random);
    let summary = format!(
        "rule dominance holds on 512 inputs; direct {:.2}% vs random {:.2}% on {} cases, margin {margin:.1}pp (>= 20), {:.0}s (< 600s)",
        100.0 * direct,
        100.0 * random,
        report.cases.len(),
        total.as_secs_f64()
    );
    ensure(margin >= 20.0 && report.cases.len() == 30, summary.clone())?;
    ensure(total < Duration::from_secs(600), summary.clone())?;
    Ok(summary)
}

fn two_part_assembly(p: Point) -> AlignedAssembly {
    let part = |id: &str, x: f64| AlignedPart {
        id: id.into(),
        role: PartRole::Whole,
        cloud: PointCloud::from_coords(id, &[[x, 0.0, 0.0]]).unwrap(),
        transform: RigidTransform::identity(),
    };
    AlignedAssembly {
        parts: vec![part("a", -1.0), part("b", 1.0)],
        reference_tool_id: "ref".into(),
        intersections: vec![p],
        degenerate: false,
    }
}

// 8.
fn attachment() -> Check {
    let none = |_: usize, _: f64| Vec::<Point>::new();
    let p = Point::new(0.25, -0.1, 0.4);
    let at_p = ObjectCapabilities {
        magnets: vec![[0.25, -0.1, 0.4], [1.0, 1.0, 1.0]],
        ..Default::default()
    };
    let parts = [
        AttachPart {
            capabilities: &at_p,
            pierceable: false,
        },
        AttachPart {
            capabilities: &at_p,
            pierceable: false,
        },
    ];
    let r = attachment_fit(AttachType::Magnetic, &parts, &two_part_assembly(p), none).map_err(|e| e.to_string())?;
    ensure(r.raw_score == Some(0.0), format!("magnets at P: raw {:?}", r.raw_score))?;

    ensure(PIERCE_ALPHA == 0.5, "pierce alpha")?;
    let tool = ObjectCapabilities {
        pierce_tool: true,
        ..Default::default()
    };
    let foam = ObjectCapabilities::default();
    let parts = [
        AttachPart {
            capabilities: &foam,
            pierceable: true,
        },
        AttachPart {
            capabilities: &tool,
            pierceable: false,
        },
    ];
    let r = infer_attachment(&AttachType::PREFERENCE, &parts, &two_part_assembly(p), none).map_err(|e| e.to_string())?;
    let dist: f64 = r
        .closest_points
        .iter()
        .map(|c| ((c[0] - p.x).powi(2) + (c[1] - p.y).powi(2) + (c[2] - p.z).powi(2)).sqrt())
        .sum();
    ensure(r.attach_type == AttachType::Pierce, "pierce not chosen first")?;
    ensure(r.raw_score == Some(0.5 + dist), format!("pierce raw {:?}, expected {}", r.raw_score, 0.5 + dist))?;

    let bare = ObjectCapabilities::default();
    let parts = [
        AttachPart {
            capabilities: &bare,
            pierceable: false,
        },
        AttachPart {
            capabilities: &bare,
            pierceable: false,
        },
    ];
    let r = infer_attachment(&AttachType::PREFERENCE, &parts, &two_part_assembly(p), none).map_err(|e| e.to_string())?;
    ensure(r.raw_score.is_none(), "bare parts attachable")?;
    let norm = normalize_attachments(&[r]).map_err(|e| e.to_string())?;
    let b = ScoreBreakdown::construction(5.0, 5.0, norm[0]);
    ensure(b.final_value == Value::NegInfinity, "unattachable final not -inf")?;

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for q in 0..200 {
        let states: Vec<EvaluatedState> = (0..rng.random_range(2..60)).map(|i| random_state(&mut rng, i)).collect();
        for strategy in Strategy::ALL {
            let values = arbitrate(strategy, &states).map_err(|e| e.to_string())?;
            let ranked = rank(states.clone(), &values);
            let unatt = ranked
                .iter()
                .position(|s| s.scores.attachment == Some(AttachmentScore::Unattachable));
            if let Some(u) = unatt {
                let finite_below = ranked[u..].iter().any(|s| s.value.is_some_and(|v| v.is_finite()));
                ensure(!finite_below, format!("query {q} {strategy}: finite state below unattachable"))?;
            }
        }
    }
    Ok("magnets at P -> 0; pierce -> 0.5 + sum of distances; unattachable -> -inf, never above finite".into())
}

// 9.
fn esf() -> Check {
    let mut worst_inv: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for (k, action) in Action::ALL.into_iter().enumerate() {
        let cloud = gen_tool_cloud(action, &ToolPrototypeSpec::default_for(action), k as u64).map_err(|e| e.to_string())?;
        let d = compute_esf(&cloud, DEFAULT_ESF_SAMPLES, 7).map_err(|e| e.to_string())?;
        let again = compute_esf(&cloud, DEFAULT_ESF_SAMPLES, 7).map_err(|e| e.to_string())?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(d.values()) == bits(again.values()), format!("{action}: not bit-deterministic"))?;
        let s = 0.3 + 4.0 * k as f64;
        let t = Point::new(-3.0 + k as f64, 12.5, 0.7 * k as f64);
        let moved = cloud.map_points(|q| Point::from(q.coords * s) + t.coords);
        let m = compute_esf(&moved, DEFAULT_ESF_SAMPLES, 7).map_err(|e| e.to_string())?;
        for (a, b) in d.values().iter().zip(m.values()) {
            worst_inv = worst_inv.max((a - b).abs());
        }
        for h in 0..ESF_HISTOGRAMS {
            let which = histogram(h);
            let sum: f64 = d.histogram(which).iter().sum();
            worst_norm = worst_norm.max((sum - 1.0).abs());
            ensure(d.histogram(which).len() == ESF_BINS, "bin count")?;
        }
    }
    ensure(worst_inv <= 1e-9, format!("invariance error {worst_inv:.3e}"))?;
    ensure(worst_norm <= 1e-9, format!("normalization error {worst_norm:.3e}"))?;
    Ok(format!("invariance {worst_inv:.1e}, normalization {worst_norm:.1e}, bit-exact repeats"))
}

fn histogram(i: usize) -> EsfHistogram {
    use EsfHistogram::*;
    [D2In, D2Out, D2Mixed, D2Ratio, A3In, A3Out, A3Mixed, D3In, D3Out, D3Mixed][i]
}

// 10.
fn persistence(shared: &Shared) -> Check {
    let m = &shared.models;
    ensure(
        !m.material.is_empty() && !m.joint_shape.is_empty() && !m.parts.action.is_empty() && m.pierce.is_some(),
        "some models were not trained",
    )?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    m.save(dir.path()).map_err(|e| e.to_string())?;
    let back = ModelSet::load(dir.path()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut checked = 0;
    let mut compare = |name: String, dim: usize, f: &dyn Fn(&[f64]) -> f64, g: &dyn Fn(&[f64]) -> f64| {
        for _ in 0..100 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..2.0)).collect();
            if f(&x).to_bits() != g(&x).to_bits() {
                return Err(format!("{name}: outputs differ after reload"));
            }
        }
        checked += 1;
        Ok(())
    };
    for (a, t) in &m.material {
        let u = back.material.get(a).ok_or(format!("material/{a} not reloaded"))?;
        let dim = t.model.input_dim();
        compare(format!("material/{a}"), dim, &|x| t.score(x).unwrap(), &|x| u.score(x).unwrap())?;
    }
    for (a, t) in &m.joint_shape {
        let u = back.joint_shape.get(a).ok_or(format!("joint-shape/{a} not reloaded"))?;
        compare(format!("joint-shape/{a}"), t.model.input_dim(), &|x| t.score(x).unwrap(), &|x| u.score(x).unwrap())?;
    }
    let mut binaries: Vec<(String, &BinaryClassifier, &BinaryClassifier)> = Vec::new();
    for (a, c) in &m.parts.action {
        binaries.push((format!("part-shape/{a}"), c, back.parts.action.get(a).ok_or("part net not reloaded")?));
    }
    if let (Some(h), Some(k)) = (&m.parts.handle, &back.parts.handle) {
        binaries.push(("part-shape/handle".into(), h, k));
    }
    if let (Some(p), Some(q)) = (&m.pierce, &back.pierce) {
        binaries.push(("pierce".into(), p, q));
    }
    for (name, c, d) in binaries {
        compare(name, c.input_dim(), &|x| c.predict(x).unwrap(), &|x| d.predict(x).unwrap())?;
    }
    ensure(back.references == m.references, "reference clouds differ")?;
    Ok(format!("{checked} models x 100 inputs bit-identical after reload"))
}

fn main() {
    let mut shared = Shared {
        data: gen_spectral_dataset(&default_class_models(), 12, 50, 0).expect("default spectral models"),
        ..Default::default()
    };
    let mut failures = 0;
    let mut run = |n: usize, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed >= l => Err(format!("took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), l.as_secs_f64())),
            (r, _) => r,
        };
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {n:>2} {name}: {detail} [{:.1}s]", elapsed.as_secs_f64());
    };
    let secs = |s| Some(Duration::from_secs(s));
    run(1, "state-space exactness", secs(1), &mut state_space);
    run(2, "oracle ranking equivalence", secs(60), &mut ranking_equivalence);
    run(3, "gradient correctness", secs(30), &mut gradients);
    run(4, "material scoring efficacy", None, &mut || material(&mut shared));
    run(5, "pierceability classifier", secs(120), &mut || pierce(&mut shared));
    run(6, "construction benchmark", None, &mut || construction(&mut shared));
    run(7, "arbitration properties", None, &mut || arbitration(&mut shared));
    run(8, "attachment scoring exactness", None, &mut attachment);
    run(9, "ESF invariants", secs(10), &mut esf);
    run(10, "persistence round-trip", None, &mut || persistence(&shared));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
