use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use macgyver_core::bench::{load_inputs, run_benchmark, BenchOptions, Thresholds};
use macgyver_core::models::{
    build_reference_library, train_joint_shape, train_material, train_part_networks, train_pierce,
    MaterialTrainingOptions, ModelSet, PierceTrainingOptions, ShapeCorpus, ShapeCorpusSpec, ShapeTrainingOptions,
};
use macgyver_core::nn::TrainLog;
use macgyver_core::pipeline::{load_manifest, run_query, ExperimentKind, Mode, QueryConfig, QueryResult, Strategy};
use macgyver_core::scoring::AttachmentScore;
use macgyver_core::synth::{
    generate_dataset, list_manifests, load_material_table, load_training_spectra, DatasetSpec, ExperimentContext,
};
use macgyver_core::Action;

#[derive(Parser, Debug)]
#[command(name = "macgyver", version, about = "Rank tool substitutes and constructions")]
struct Cli {
    /// Dataset root.
    #[arg(long, global = true, env = "MACGYVER_ROOT", default_value = "data")]
    root: PathBuf,
    /// Model directory [default: <root>/models].
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic clouds, spectra, tables and manifests under the root.
    GenData(GenDataArgs),
    /// Train and save one model component.
    Train(TrainArgs),
    /// Rank the states of one manifest.
    Rank(RankArgs),
    /// Run a benchmark over the manifests under the root.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Experiment kinds to generate [default: all].
    #[arg(long = "kind", value_enum)]
    kinds: Vec<KindArg>,
    #[arg(long, default_value_t = 5)]
    sets: usize,
    /// Objects per set.
    #[arg(long, default_value_t = 10)]
    objects: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Component {
    Material,
    JointShape,
    PartShape,
    Pierce,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(value_enum)]
    component: Component,
    /// Actions to train for [default: all].
    #[arg(long = "action")]
    actions: Vec<Action>,
    /// Material table JSON [default: <root>/tables/materials.json].
    #[arg(long)]
    material_table: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Substitute,
    Construct,
    Macgyver,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Construction,
    Substitution,
    Arbitration,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Construction => ExperimentKind::Construction,
            KindArg::Substitution => ExperimentKind::Substitution,
            KindArg::Arbitration => ExperimentKind::Arbitration,
        }
    }
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(value_enum)]
    mode: ModeArg,
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's action.
    #[arg(long)]
    action: Option<Action>,
    #[arg(long, default_value = "direct")]
    strategy: Strategy,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Rows to print; all by default.
    #[arg(long)]
    top: Option<usize>,
    /// Print the full result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(value_enum)]
    kind: KindArg,
    /// Strategies to compare [default: direct; all three for arbitration].
    #[arg(long = "strategy")]
    strategies: Vec<Strategy>,
    /// Only cases for this action.
    #[arg(long)]
    action: Option<Action>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    threshold_file: Option<PathBuf>,
    /// Report directory [default: <root>/reports].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad arguments that clap cannot catch itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(3)
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let models = cli.models.clone().unwrap_or_else(|| cli.root.join("models"));
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Train(a) => train(cli, &models, a),
        Command::Rank(a) => rank(cli, &models, a),
        Command::Bench(a) => bench(cli, &models, a),
    }
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<ExitCode> {
    let kinds = if a.kinds.is_empty() {
        ExperimentKind::ALL.to_vec()
    } else {
        a.kinds.iter().map(|&k| k.into()).collect()
    };
    let spec = DatasetSpec {
        seed: cli.seed,
        kinds,
        sets_per_action: a.sets,
        n_objects: a.objects,
        ..Default::default()
    };
    let s = generate_dataset(&cli.root, &spec, &ExperimentContext::default())?;
    println!(
        "{}: {} manifests, {} clouds, {} spectral files ({} training readings)",
        cli.root.display(),
        s.manifests,
        s.clouds,
        s.spectral_files,
        s.training_readings
    );
    Ok(ExitCode::SUCCESS)
}

fn write_log(models: &Path, name: &str, log: &TrainLog) -> Result<()> {
    let dir = models.join("logs");
    fs::create_dir_all(&dir)?;
    let mut text = String::from("epoch,loss\n");
    for (i, l) in log.epoch_losses.iter().enumerate() {
        let _ = writeln!(text, "{},{l}", i + 1);
    }
    fs::write(dir.join(format!("{name}.csv")), text)?;
    let last = log.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("{name}: {} epochs, final loss {last:.4}", log.epoch_losses.len());
    Ok(())
}

fn train(cli: &Cli, models: &Path, a: &TrainArgs) -> Result<ExitCode> {
    let actions: Vec<Action> = if a.actions.is_empty() {
        Action::ALL.to_vec()
    } else {
        a.actions.clone()
    };
    let mut out = ModelSet::default();
    match a.component {
        Component::Material | Component::Pierce => {
            let data = load_training_spectra(&cli.root)?;
            if matches!(a.component, Component::Pierce) {
                let mut opts = PierceTrainingOptions::default();
                opts.config.seed = cli.seed;
                if let Some(e) = a.epochs {
                    opts.config.epochs = e;
                }
                let (clf, log) = train_pierce(&data, &opts)?;
                write_log(models, "pierce", &log)?;
                out.pierce = Some(clf);
            } else {
                let table = match &a.material_table {
                    Some(p) => macgyver_core::spectral::ActionMaterialTable::from_json(
                        &fs::read_to_string(p).with_context(|| p.display().to_string())?,
                    )?,
                    None => load_material_table(&cli.root)?,
                };
                let mut opts = MaterialTrainingOptions::default();
                opts.config.seed = cli.seed;
                if let Some(e) = a.epochs {
                    opts.config.epochs = e;
                }
                for &action in &actions {
                    let (t, log) = train_material(&data, &table, action, &opts)?;
                    write_log(models, &format!("material-{action}"), &log)?;
                    out.material.insert(action, t);
                }
            }
        }
        Component::PartShape | Component::JointShape => {
            let corpus = ShapeCorpus::generate(&ShapeCorpusSpec {
                seed: cli.seed,
                ..Default::default()
            })?;
            let mut opts = ShapeTrainingOptions::default();
            opts.dual.seed = cli.seed;
            opts.part.seed = cli.seed;
            if let Some(e) = a.epochs {
                opts.dual.epochs = e;
                opts.part.epochs = e;
            }
            if matches!(a.component, Component::PartShape) {
                out.parts = train_part_networks(&corpus, &actions, &opts.part)?;
                out.references = build_reference_library(&actions, 3, cli.seed)?;
                println!("part-shape: {} action networks and a handle network", out.parts.action.len());
            } else {
                for &action in &actions {
                    let (t, log) = train_joint_shape(&corpus, action, &opts)?;
                    write_log(models, &format!("joint-shape-{action}"), &log)?;
                    out.joint_shape.insert(action, t);
                }
            }
        }
    }
    out.save(models)?;
    println!("saved to {}", models.display());
    Ok(ExitCode::SUCCESS)
}

fn fmt_points(points: &[[f64; 3]]) -> String {
    points
        .iter()
        .map(|p| format!("({:.3},{:.3},{:.3})", p[0], p[1], p[2]))
        .collect::<Vec<_>>()
        .join(" ")
}

fn rank_table(result: &QueryResult, top: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "action {}, mode {}, strategy {}, seed {}{}",
        result.action,
        result.mode,
        result.strategy,
        result.seed,
        result.reference_id.as_ref().map(|r| format!(", reference {r}")).unwrap_or_default()
    );
    let w = result.states.iter().map(|s| s.key.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(
        out,
        "{:>4}  {:<w$}  {:>9}  {:>9}  {:>6}  {:>8}  {:>7}  {:<8}  points",
        "rank", "state", "value", "final", "shape", "material", "attach", "type"
    );
    for s in result.states.iter().take(top.unwrap_or(usize::MAX)) {
        let attach = match s.scores.attachment {
            None => "-".to_string(),
            Some(AttachmentScore::Score(v)) => format!("{v:.4}"),
            Some(AttachmentScore::Unattachable) => "-inf".to_string(),
        };
        let _ = writeln!(
            out,
            "{:>4}  {:<w$}  {:>9}  {:>9}  {:>6.4}  {:>8.4}  {:>7}  {:<8}  {}",
            s.rank.unwrap_or(0),
            s.key,
            s.value.map_or("-".into(), |v| fmt_value(v.as_finite())),
            fmt_value(s.scores.final_value.as_finite()),
            s.scores.shape,
            s.scores.material,
            attach,
            s.attach_type.map_or("-".into(), |t| t.to_string()),
            s.closest_points.as_deref().map_or("-".into(), fmt_points)
        );
    }
    out
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or("-inf".into(), |v| format!("{v:.4}"))
}

fn rank(cli: &Cli, models: &Path, a: &RankArgs) -> Result<ExitCode> {
    if a.m < 2 {
        return Err(UsageError(format!("--m must be at least 2, got {}", a.m)).into());
    }
    let (manifest, objects) = load_manifest(&a.manifest)?;
    let action = a.action.unwrap_or(manifest.action);
    let set = ModelSet::load(models)?;
    let mode = match a.mode {
        ModeArg::Substitute => Mode::Substitute,
        ModeArg::Construct => Mode::Construct,
        ModeArg::Macgyver => Mode::Macgyver,
    };
    let config = QueryConfig {
        m: a.m,
        mode,
        strategy: a.strategy,
        seed: cli.seed,
        joint_constructions: a.strategy == Strategy::Subs,
        ..Default::default()
    };
    let result = run_query(&objects, action, &set, &config)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        print!("{}", rank_table(&result, a.top));
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(cli: &Cli, models: &Path, a: &BenchArgs) -> Result<ExitCode> {
    if a.k == 0 {
        return Err(UsageError("--k must be at least 1".into()).into());
    }
    let kind: ExperimentKind = a.kind.into();
    let thresholds: Thresholds = match &a.threshold_file {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| p.display().to_string())?)
            .with_context(|| format!("{}: invalid thresholds", p.display()))?,
        None => Thresholds::default(),
    };
    let mut paths = list_manifests(&cli.root, Some(kind))?;
    if let Some(action) = a.action {
        paths.retain(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&format!("{kind}-{action}-")))
        });
    }
    if paths.is_empty() {
        bail!("no {kind} manifests under {}", cli.root.join("manifests").display());
    }
    let inputs = load_inputs(&paths)?;
    let set = ModelSet::load(models)?;
    let strategies = match (a.strategies.is_empty(), kind) {
        (false, _) => a.strategies.clone(),
        (true, ExperimentKind::Arbitration) => Strategy::ALL.to_vec(),
        (true, _) => vec![Strategy::Direct],
    };
    let opts = BenchOptions {
        seed: cli.seed,
        strategies,
        k: a.k,
        ..Default::default()
    };
    let report = run_benchmark(kind, &inputs, &set, &opts)?;
    let out = a.out.clone().unwrap_or_else(|| cli.root.join("reports"));
    fs::create_dir_all(&out)?;
    fs::write(out.join(format!("{kind}.json")), report.to_json())?;
    let table = report.to_table();
    fs::write(out.join(format!("{kind}.txt")), &table)?;
    print!("{table}");
    let violations = thresholds.violations(&report);
    for v in &violations {
        eprintln!("threshold: {v}");
    }
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
