mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use catgan_core::classifier::ClassifierKind;
use catgan_core::data::{
    format_value, load_csv, pca_project_2d, synth_shift_task, to_csv_string, LabeledDataset, Shift,
};
use catgan_core::par::Execution;
use catgan_core::persist::SavedModel;
use catgan_core::trainer::{
    draw_few_shot, evaluate, prepare, train, Direction, OptimizerKind, Variant,
};

use config::Settings;
use output::Outputs;

#[derive(Parser, Debug)]
#[command(
    name = "catgan",
    version,
    about = "Coupled adversarial domain generation for few-shot adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic shifted-domain task as source.csv, target_train.csv, target_test.csv.
    Synth(SynthArgs),
    /// Train a model; writes model.json and report.json.
    Train(TrainArgs),
    /// Accuracy of a trained model against the source-only baselines.
    Eval(EvalArgs),
    /// Map a CSV through the generators.
    Generate(GenerateArgs),
    /// 2-D PCA projection of source, target and both generated sets.
    Project(ProjectArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    n_per_class: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Rotation of the first two features, degrees.
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    theta: f64,
    /// Comma-separated translation, zero-padded to the feature dimension.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "3,0",
        allow_negative_numbers = true
    )]
    translation: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

/// Settings shared by commands that train or evaluate.
#[derive(Args, Debug, Default)]
struct SettingsArgs {
    /// `key = value` file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    classifier: Option<ClassifierKind>,
    /// Frobenius sum instead of the mean inside the domain and content losses.
    #[arg(long)]
    raw_norm: bool,
    /// Drop the sigmoid around the domain and content losses.
    #[arg(long)]
    unwrapped: bool,
}

impl SettingsArgs {
    fn resolve(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        let t = &mut s.train;
        if let Some(v) = self.variant {
            t.variant = v;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr_g {
            t.lr_g = v;
        }
        if let Some(v) = self.lr_d {
            t.lr_d = v;
        }
        if let Some(v) = self.momentum {
            t.momentum = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.optimizer {
            t.optimizer = v;
        }
        if let Some(v) = self.classifier {
            s.classifier = v;
        }
        t.raw_norm |= self.raw_norm;
        t.unwrapped |= self.unwrapped;
        s.train.validate()?;
        Ok(s)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    source: PathBuf,
    /// Target training CSV; labels are used only for the few-shot subset.
    #[arg(long)]
    target: PathBuf,
    /// Optional target test CSV; adds an accuracy section to the report.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "lsq")]
    classifier: ClassifierKind,
    /// Also write the accuracy report here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// st, ts, sts or tst.
    #[arg(long)]
    direction: Direction,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn execution() -> Result<Execution> {
    match std::env::var("CATGAN_THREADS") {
        Ok(v) => Ok(Execution::parse_threads(&v).context("CATGAN_THREADS")?),
        Err(_) => Ok(Execution::Parallel),
    }
}

fn load(path: &Path) -> Result<LabeledDataset> {
    load_csv(path, None).with_context(|| format!("loading {}", path.display()))
}

fn labels_for(model: &SavedModel, ds: &LabeledDataset, what: &Path) -> Result<Option<Vec<usize>>> {
    if !model.model.needs_labels() {
        return Ok(None);
    }
    let labels = ds.class_labels().with_context(|| {
        format!(
            "{} model needs a label on every row of {}",
            model.model.variant(),
            what.display()
        )
    })?;
    Ok(Some(labels))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let shift = Shift::degrees(a.theta, a.translation.clone(), a.scale);
    let task = synth_shift_task(a.seed, a.n_per_class, a.dim, a.classes, &shift)?;
    let mut out = Outputs::new();
    out.stage(a.out.join("source.csv"), to_csv_string(&task.source));
    out.stage(
        a.out.join("target_train.csv"),
        to_csv_string(&task.target_train),
    );
    out.stage(
        a.out.join("target_test.csv"),
        to_csv_string(&task.target_test),
    );
    out.commit()?;
    println!(
        "wrote {} samples per domain to {}",
        task.source.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let settings = a.settings.resolve()?;
    let cfg = &settings.train;
    let exec = execution()?;
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    let test = a.test.as_deref().map(load).transpose()?;
    let class_count = source.class_count().max(target.class_count());

    let data = prepare(&source, &target, test.as_ref(), cfg)?;
    let (model, mut report) = train(
        &data.source,
        &data.target_train,
        &data.target_few,
        cfg,
        exec,
    )?;
    if let Some(test) = &data.target_test {
        report.accuracy = Some(evaluate(
            &model,
            &data.source,
            &data.target_few,
            test,
            settings.classifier,
        )?);
    }
    let saved = SavedModel::new(model, data.standardizer, class_count, cfg.clone());

    let mut out = Outputs::new();
    out.stage(a.out.join("model.json"), saved.to_json()?);
    out.stage(a.out.join("report.json"), report.to_json()?);
    out.commit()?;

    if let Some(last) = report.final_losses() {
        println!(
            "{} epochs: L_G {:.6} L_D {:.6} content_sts {:.6} content_tst {:.6}",
            report.trace.len(),
            last.generator_total(),
            last.discriminator_total(),
            last.content_sts,
            last.content_tst
        );
    }
    if let Some(acc) = report.accuracy {
        print_accuracy(&acc);
    }
    eprintln!("trained in {:.2}s", report.wall_clock_secs);
    Ok(())
}

fn print_accuracy(acc: &catgan_core::trainer::AccuracyReport) {
    println!(
        "accuracy: catgan {:.4} source-only {:.4} source+few {:.4}",
        acc.catgan, acc.source_only, acc.source_plus_few
    );
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let saved =
        SavedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let std = &saved.standardizer;
    let source = std.apply_dataset(&load(&a.source)?)?;
    let target = std.apply_dataset(&load(&a.target)?)?;
    let test = std.apply_dataset(&load(&a.test)?)?;
    let few = draw_few_shot(&target, &saved.config)?;
    let acc = evaluate(&saved.model, &source, &few, &test, a.classifier)?;
    if let Some(path) = &a.out {
        let mut out = Outputs::new();
        out.stage(path, serde_json::to_string_pretty(&acc)? + "\n");
        out.commit()?;
    }
    print_accuracy(&acc);
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let saved =
        SavedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let input = load(&a.input)?;
    let labels = labels_for(&saved, &input, &a.input)?;
    let generated = saved.generate_raw(input.features(), labels.as_deref(), a.direction)?;
    let result = input.with_features(generated)?;
    let mut out = Outputs::new();
    out.stage(&a.out, to_csv_string(&result));
    out.commit()?;
    Ok(())
}

fn cmd_project(a: &ProjectArgs) -> Result<()> {
    let saved =
        SavedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let source = saved.standardizer.apply_dataset(&load(&a.source)?)?;
    let target = saved.standardizer.apply_dataset(&load(&a.target)?)?;
    let s_labels = labels_for(&saved, &source, &a.source)?;
    let t_labels = labels_for(&saved, &target, &a.target)?;
    let x_st = saved
        .model
        .generate(source.features(), s_labels.as_deref(), Direction::St)?;
    let x_ts = saved
        .model
        .generate(target.features(), t_labels.as_deref(), Direction::Ts)?;
    let parts = [source.features(), target.features(), &x_st, &x_ts];
    let projected = pca_project_2d(&parts)?;

    let mut csv = String::from("domain,label,p0,p1\n");
    let groups = [
        ("S", source.labels()),
        ("T", target.labels()),
        ("ST", source.labels()),
        ("TS", target.labels()),
    ];
    for ((domain, labels), p) in groups.iter().zip(&projected) {
        for (i, row) in p.row_iter().enumerate() {
            csv.push_str(&format!(
                "{domain},{},{},{}\n",
                labels[i],
                format_value(row[0]),
                format_value(row[1])
            ));
        }
    }
    let mut out = Outputs::new();
    out.stage(&a.out, csv);
    out.commit()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Project(a) => cmd_project(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
