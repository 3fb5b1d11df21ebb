//! Alternating adversarial training of the coupled model and its plain,
//! class-wise and conditional variants.
//!
//! Each minibatch runs `d_steps_per_g_step` discriminator updates on the
//! discriminator objective (generated batches detached), then one joint
//! generator update on the generator objective. An epoch is one pass over
//! the source set; target batches are drawn independently each iteration.
//! Domain centers are fixed from the full training sets before training.

use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{accuracy, Classifier, ClassifierKind};
use crate::data::{fit_standardizer, LabeledDataset, Standardizer};
use crate::error::{config_err, shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::mlp::{Adam, Mlp, Optimizer, Sgd};
use crate::model::{
    critic_gradients, derive_seed, discriminator_gradients, generator_gradients, total_losses,
    Batch, CatganNets, Centers, GeneratorInit, GeneratorTermWeights, LossBreakdown, LossOptions,
    NetShape,
};
use crate::par::Execution;

pub const REPORT_SCHEMA: &str = "catgan-train-report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Plain,
    #[serde(rename = "classwise")]
    ClassWise,
    Conditional,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "classwise" => Ok(Variant::ClassWise),
            "conditional" => Ok(Variant::Conditional),
            other => config_err(format!(
                "unknown variant `{other}` (expected plain|classwise|conditional)"
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::ClassWise => "classwise",
            Variant::Conditional => "conditional",
        })
    }
}

/// Every training hyperparameter in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub momentum: f64,
    pub d_steps_per_g_step: usize,
    /// `None` uses the feature dimension.
    pub generator_hidden: Option<usize>,
    /// `None` uses `(max(d,4), max(⌈d/2⌉,4))`.
    pub discriminator_hidden: Option<(usize, usize)>,
    pub seed: u64,
    pub labeled_target_per_class: usize,
    pub raw_norm: bool,
    pub unwrapped: bool,
    pub sigmoid_generator_output: bool,
    #[serde(default)]
    pub generator_init: GeneratorInit,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Momentum SGD using `momentum`.
    Sgd,
    /// Adam with `beta1 = momentum`, `beta2 = 0.999`.
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => config_err(format!(
                "unknown optimizer `{other}` (expected sgd or adam)"
            )),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Plain,
            epochs: 200,
            batch_size: 64,
            lr_g: 0.005,
            lr_d: 0.02,
            momentum: 0.9,
            d_steps_per_g_step: 1,
            generator_hidden: None,
            discriminator_hidden: None,
            seed: 0,
            labeled_target_per_class: 10,
            raw_norm: false,
            unwrapped: false,
            sigmoid_generator_output: false,
            generator_init: GeneratorInit::default(),
            optimizer: OptimizerKind::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return config_err("batch size must be at least 1");
        }
        if !(self.lr_g > 0.0 && self.lr_g.is_finite() && self.lr_d > 0.0 && self.lr_d.is_finite()) {
            return config_err("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return config_err("momentum must lie in [0, 1)");
        }
        if self.d_steps_per_g_step == 0 {
            return config_err("d_steps_per_g_step must be at least 1");
        }
        if self.labeled_target_per_class == 0 {
            return config_err("labeled_target_per_class must be at least 1");
        }
        if self.generator_hidden == Some(0)
            || matches!(self.discriminator_hidden, Some((0, _)) | Some((_, 0)))
        {
            return config_err("hidden widths must be at least 1");
        }
        Ok(())
    }

    fn optimizer_for(&self, lr: f64) -> Result<Optimizer> {
        Ok(match self.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(lr, self.momentum)?),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(lr, self.momentum, 0.999)?),
        })
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions {
            raw_norm: self.raw_norm,
            unwrapped: self.unwrapped,
        }
    }

    pub fn net_shape(&self, feature_dim: usize, condition_dim: usize) -> NetShape {
        let mut shape = NetShape::with_default_widths(feature_dim, condition_dim);
        if let Some(h) = self.generator_hidden {
            shape.generator_hidden = h;
        }
        if let Some(h) = self.discriminator_hidden {
            shape.discriminator_hidden = h;
        }
        shape.sigmoid_generator_output = self.sigmoid_generator_output;
        shape.generator_init = self.generator_init;
        shape
    }
}

/// The trained networks of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum TrainedModel {
    Plain {
        nets: CatganNets,
    },
    /// One quartet per class, indexed by class label.
    #[serde(rename = "classwise")]
    ClassWise {
        nets: Vec<CatganNets>,
    },
    Conditional {
        nets: CatganNets,
        class_count: usize,
    },
}

/// Which generator chain to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    St,
    Ts,
    Sts,
    Tst,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "st" => Ok(Direction::St),
            "ts" => Ok(Direction::Ts),
            "sts" => Ok(Direction::Sts),
            "tst" => Ok(Direction::Tst),
            other => config_err(format!(
                "unknown direction `{other}` (expected st|ts|sts|tst)"
            )),
        }
    }
}

pub fn one_hot(labels: &[usize], class_count: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len().max(1), class_count);
    if labels.is_empty() {
        return shape_err("one-hot of an empty label set");
    }
    for (i, &l) in labels.iter().enumerate() {
        if l >= class_count {
            return config_err(format!("label {l} outside [0, {class_count})"));
        }
        m.set(i, l, 1.0);
    }
    Ok(m)
}

fn apply_chain(
    nets: &CatganNets,
    x: &Matrix,
    cond: Option<&Matrix>,
    direction: Direction,
) -> Result<Matrix> {
    let step = |net: &crate::mlp::Mlp, x: &Matrix| -> Result<Matrix> {
        match cond {
            Some(c) => net.predict(&x.hstack(c)?),
            None => net.predict(x),
        }
    };
    match direction {
        Direction::St => step(&nets.g_st, x),
        Direction::Ts => step(&nets.g_ts, x),
        Direction::Sts => step(&nets.g_ts, &step(&nets.g_st, x)?),
        Direction::Tst => step(&nets.g_st, &step(&nets.g_ts, x)?),
    }
}

impl TrainedModel {
    pub fn variant(&self) -> Variant {
        match self {
            TrainedModel::Plain { .. } => Variant::Plain,
            TrainedModel::ClassWise { .. } => Variant::ClassWise,
            TrainedModel::Conditional { .. } => Variant::Conditional,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            TrainedModel::Plain { nets } | TrainedModel::Conditional { nets, .. } => {
                nets.feature_dim()
            }
            TrainedModel::ClassWise { nets } => nets[0].feature_dim(),
        }
    }

    pub fn needs_labels(&self) -> bool {
        !matches!(self, TrainedModel::Plain { .. })
    }

    /// Runs the generator chain. Class-wise and conditional models need a
    /// label per row; plain models ignore labels.
    pub fn generate(
        &self,
        x: &Matrix,
        labels: Option<&[usize]>,
        direction: Direction,
    ) -> Result<Matrix> {
        match self {
            TrainedModel::Plain { nets } => apply_chain(nets, x, None, direction),
            TrainedModel::Conditional { nets, class_count } => {
                let labels =
                    labels.ok_or_else(|| Error::Config("conditional model needs labels".into()))?;
                let cond = one_hot(labels, *class_count)?;
                apply_chain(nets, x, Some(&cond), direction)
            }
            TrainedModel::ClassWise { nets } => {
                let labels =
                    labels.ok_or_else(|| Error::Config("class-wise model needs labels".into()))?;
                if labels.len() != x.rows() {
                    return shape_err(format!("{} labels for {} rows", labels.len(), x.rows()));
                }
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for (c, quartet) in nets.iter().enumerate() {
                    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
                    if idx.is_empty() {
                        continue;
                    }
                    let part = apply_chain(quartet, &x.select_rows(&idx)?, None, direction)?;
                    for (k, &i) in idx.iter().enumerate() {
                        for j in 0..x.cols() {
                            out.set(i, j, part.get(k, j));
                        }
                    }
                }
                if let Some(&l) = labels.iter().find(|&&l| l >= nets.len()) {
                    return config_err(format!("label {l} has no class-wise network"));
                }
                Ok(out)
            }
        }
    }
}

/// Per-epoch record plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema: String,
    pub schema_version: u32,
    pub variant: Variant,
    pub seed: u64,
    pub config: TrainConfig,
    /// One entry per epoch, evaluated on the full training sets after the
    /// epoch's updates. For class-wise runs this is the mean over classes.
    pub trace: Vec<LossBreakdown>,
    /// Class-wise runs only: one trace per class.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_traces: Vec<Vec<LossBreakdown>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyReport>,
    /// Not serialized so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl TrainReport {
    fn new(cfg: &TrainConfig) -> Self {
        TrainReport {
            schema: REPORT_SCHEMA.into(),
            schema_version: REPORT_SCHEMA_VERSION,
            variant: cfg.variant,
            seed: cfg.seed,
            config: cfg.clone(),
            trace: Vec::new(),
            class_traces: Vec::new(),
            accuracy: None,
            wall_clock_secs: 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn final_losses(&self) -> Option<&LossBreakdown> {
        self.trace.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub classifier: ClassifierKind,
    /// Classifier trained on generated co-target data plus labeled target samples.
    pub catgan: f64,
    /// Classifier fit on the source data alone.
    pub source_only: f64,
    /// Classifier fit on the source data plus the labeled target samples.
    pub source_plus_few: f64,
}

/// One domain's training data as seen by the networks.
struct DomainData {
    features: Matrix,
    condition: Option<Matrix>,
}

impl DomainData {
    fn batch(&self, idx: &[usize]) -> Result<(Matrix, Option<Matrix>)> {
        Ok((
            self.features.select_rows(idx)?,
            self.condition
                .as_ref()
                .map(|c| c.select_rows(idx))
                .transpose()?,
        ))
    }

    fn full(&self) -> Batch<'_> {
        Batch {
            features: &self.features,
            condition: self.condition.as_ref(),
        }
    }
}

fn check_finite(b: &LossBreakdown, epoch: usize) -> Result<()> {
    match b.first_non_finite() {
        Some(term) => Err(Error::NonFiniteLoss { epoch, term }),
        None => Ok(()),
    }
}

/// Full-batch training of a single discriminator with the configured
/// optimizer and `lr_d`. Returns the loss before each step.
pub fn fit_discriminator(
    critic: &mut Mlp,
    real: &Matrix,
    fake: &Matrix,
    steps: usize,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut opt = cfg.optimizer_for(cfg.lr_d)?;
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (loss, grads) = critic_gradients(critic, real, fake)?;
        losses.push(loss);
        opt.step(critic, &grads)?;
    }
    Ok(losses)
}

/// Trains one quartet. Returns the networks and the per-epoch trace.
fn train_quartet(
    source: &DomainData,
    target: &DomainData,
    shape: &NetShape,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(CatganNets, Vec<LossBreakdown>)> {
    let mut nets = CatganNets::init(shape, derive_seed(seed, 10))?;
    let centers = Centers::from_training(&source.features, &target.features)?;
    let opts = cfg.loss_options();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 11));

    let mut opt_g_st = cfg.optimizer_for(cfg.lr_g)?;
    let mut opt_g_ts = cfg.optimizer_for(cfg.lr_g)?;
    let mut opt_d_t = cfg.optimizer_for(cfg.lr_d)?;
    let mut opt_d_s = cfg.optimizer_for(cfg.lr_d)?;
    let weights = GeneratorTermWeights::default();

    let n_s = source.features.rows();
    let n_t = target.features.rows();
    let mut order: Vec<usize> = (0..n_s).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let t_idx = index::sample(&mut rng, n_t, cfg.batch_size.min(n_t)).into_vec();
            let (xs, cs) = source.batch(chunk)?;
            let (xt, ct) = target.batch(&t_idx)?;
            let sb = Batch {
                features: &xs,
                condition: cs.as_ref(),
            };
            let tb = Batch {
                features: &xt,
                condition: ct.as_ref(),
            };

            for _ in 0..cfg.d_steps_per_g_step {
                let (_, _, dg) = discriminator_gradients(&nets, sb, tb)?;
                opt_d_t.step(&mut nets.d_t, &dg.d_t)?;
                opt_d_s.step(&mut nets.d_s, &dg.d_s)?;
            }
            let (_, _, gg) = generator_gradients(&nets, sb, tb, &centers, opts, &weights)?;
            opt_g_st.step(&mut nets.g_st, &gg.g_st)?;
            opt_g_ts.step(&mut nets.g_ts, &gg.g_ts)?;
        }
        let losses = total_losses(&nets, source.full(), target.full(), &centers, opts)?;
        check_finite(&losses, epoch + 1)?;
        trace.push(losses);
    }
    Ok((nets, trace))
}

fn check_dims(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols() != b.cols() {
        return shape_err(format!(
            "source has {} features, target has {}",
            a.cols(),
            b.cols()
        ));
    }
    Ok(())
}

/// Unsupervised two-way training on a source set and unlabeled target features.
pub fn train_plain(
    source: &LabeledDataset,
    target: &Matrix,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainReport)> {
    cfg.validate()?;
    check_dims(source.features(), target)?;
    let start = Instant::now();
    let shape = cfg.net_shape(source.dim(), 0);
    let (nets, trace) = train_quartet(
        &DomainData {
            features: source.features().clone(),
            condition: None,
        },
        &DomainData {
            features: target.clone(),
            condition: None,
        },
        &shape,
        cfg,
        derive_seed(cfg.seed, 0),
    )?;
    let mut report = TrainReport::new(cfg);
    report.variant = Variant::Plain;
    report.trace = trace;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((TrainedModel::Plain { nets }, report))
}

fn check_few_shot(source: &LabeledDataset, target_few: &LabeledDataset) -> Result<usize> {
    check_dims(source.features(), target_few.features())?;
    let c = source.class_count();
    if target_few.class_count() != c {
        return config_err(format!(
            "source has {c} classes, labeled target set has {}",
            target_few.class_count()
        ));
    }
    for class in 0..c {
        if target_few.indices_of_class(class).is_empty() {
            return config_err(format!(
                "class {class} is missing from the labeled target samples"
            ));
        }
        if source.indices_of_class(class).is_empty() {
            return config_err(format!("class {class} is missing from the source samples"));
        }
    }
    Ok(c)
}

/// Trains the quartet of one class on the class-`class` subsets.
/// The result depends only on `(class, data, cfg)`, not on training order.
pub fn train_single_class(
    source: &LabeledDataset,
    target_few: &LabeledDataset,
    class: usize,
    cfg: &TrainConfig,
) -> Result<(CatganNets, Vec<LossBreakdown>)> {
    let s = source.class_subset(class)?;
    let t = target_few.class_subset(class).map_err(|_| {
        Error::Config(format!(
            "class {class} is missing from the labeled target samples"
        ))
    })?;
    let shape = cfg.net_shape(source.dim(), 0);
    train_quartet(
        &DomainData {
            features: s.features().clone(),
            condition: None,
        },
        &DomainData {
            features: t.features().clone(),
            condition: None,
        },
        &shape,
        cfg,
        derive_seed(cfg.seed, class as u64),
    )
}

/// One independent quartet per class.
pub fn train_classwise(
    source: &LabeledDataset,
    target_few: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainReport)> {
    train_classwise_with(source, target_few, cfg, Execution::from_env())
}

pub fn train_classwise_with(
    source: &LabeledDataset,
    target_few: &LabeledDataset,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<(TrainedModel, TrainReport)> {
    cfg.validate()?;
    let c = check_few_shot(source, target_few)?;
    let start = Instant::now();
    let results = exec.map((0..c).collect(), |class| {
        train_single_class(source, target_few, class, cfg)
    });
    let mut nets = Vec::with_capacity(c);
    let mut class_traces = Vec::with_capacity(c);
    for r in results {
        let (n, t) = r?;
        nets.push(n);
        class_traces.push(t);
    }
    let mut report = TrainReport::new(cfg);
    report.variant = Variant::ClassWise;
    report.trace = (0..cfg.epochs)
        .map(|e| mean_breakdown(class_traces.iter().map(|t| &t[e])))
        .collect();
    report.class_traces = class_traces;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((TrainedModel::ClassWise { nets }, report))
}

fn mean_breakdown<'a>(items: impl Iterator<Item = &'a LossBreakdown>) -> LossBreakdown {
    let mut acc = LossBreakdown::default();
    let mut n = 0.0;
    for b in items {
        acc.gan_t += b.gan_t;
        acc.gan_s += b.gan_s;
        acc.domain_t += b.domain_t;
        acc.domain_s += b.domain_s;
        acc.content_sts += b.content_sts;
        acc.content_tst += b.content_tst;
        acc.d_t_loss += b.d_t_loss;
        acc.d_s_loss += b.d_s_loss;
        n += 1.0;
    }
    LossBreakdown {
        gan_t: acc.gan_t / n,
        gan_s: acc.gan_s / n,
        domain_t: acc.domain_t / n,
        domain_s: acc.domain_s / n,
        content_sts: acc.content_sts / n,
        content_tst: acc.content_tst / n,
        d_t_loss: acc.d_t_loss / n,
        d_s_loss: acc.d_s_loss / n,
    }
}

/// A single quartet whose networks all receive a one-hot class code
/// appended to their input.
pub fn train_conditional(
    source: &LabeledDataset,
    target_few: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainReport)> {
    cfg.validate()?;
    let c = check_few_shot(source, target_few)?;
    let start = Instant::now();
    let shape = cfg.net_shape(source.dim(), c);
    let s = DomainData {
        features: source.features().clone(),
        condition: Some(one_hot(&source.class_labels()?, c)?),
    };
    let t = DomainData {
        features: target_few.features().clone(),
        condition: Some(one_hot(&target_few.class_labels()?, c)?),
    };
    let (nets, trace) = train_quartet(&s, &t, &shape, cfg, derive_seed(cfg.seed, 0))?;
    let mut report = TrainReport::new(cfg);
    report.variant = Variant::Conditional;
    report.trace = trace;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((
        TrainedModel::Conditional {
            nets,
            class_count: c,
        },
        report,
    ))
}

/// Dispatches on `cfg.variant`. The plain variant trains against all of
/// `target_train`; the others use only the labeled few-shot subset.
pub fn train(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    target_few: &LabeledDataset,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<(TrainedModel, TrainReport)> {
    match cfg.variant {
        Variant::Plain => train_plain(source, target_train.features(), cfg),
        Variant::ClassWise => train_classwise_with(source, target_few, cfg, exec),
        Variant::Conditional => train_conditional(source, target_few, cfg),
    }
}

/// Fits the downstream classifier on `[X_ST ; X_T_few]` and on the
/// source-only baseline `[X_S ; X_T_few]`, and scores both on the test set.
pub fn evaluate(
    model: &TrainedModel,
    source: &LabeledDataset,
    target_few: &LabeledDataset,
    target_test: &LabeledDataset,
    kind: ClassifierKind,
) -> Result<AccuracyReport> {
    let c = source.class_count().max(target_few.class_count());
    let s_labels = source.class_labels()?;
    let few_labels = target_few.class_labels()?;
    let test_labels = target_test.class_labels()?;

    let train_labels: Vec<usize> = s_labels.iter().chain(&few_labels).copied().collect();
    for class in 0..c {
        if !train_labels.contains(&class) {
            return config_err(format!("class {class} is absent from the training labels"));
        }
    }

    let x_st = model.generate(source.features(), Some(&s_labels), Direction::St)?;
    let augmented = Matrix::vstack(&[&x_st, target_few.features()])?;
    let baseline = Matrix::vstack(&[source.features(), target_few.features()])?;

    let clf = Classifier::fit(kind, &augmented, &train_labels, c)?;
    let catgan = accuracy(&clf.predict(target_test.features())?, &test_labels)?;
    let base = Classifier::fit(kind, &baseline, &train_labels, c)?;
    let source_plus_few = accuracy(&base.predict(target_test.features())?, &test_labels)?;
    let source_clf = Classifier::fit(kind, source.features(), &s_labels, c)?;
    let source_only = accuracy(&source_clf.predict(target_test.features())?, &test_labels)?;
    Ok(AccuracyReport {
        classifier: kind,
        catgan,
        source_only,
        source_plus_few,
    })
}

/// Datasets of one run after joint standardization.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub standardizer: Standardizer,
    pub source: LabeledDataset,
    pub target_train: LabeledDataset,
    pub target_few: LabeledDataset,
    pub target_test: Option<LabeledDataset>,
}

/// Fits one standardizer on source ∪ target-train features, applies it to
/// every set, and draws the labeled few-shot target subset.
pub fn prepare(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    target_test: Option<&LabeledDataset>,
    cfg: &TrainConfig,
) -> Result<PreparedData> {
    check_dims(source.features(), target_train.features())?;
    let standardizer = fit_standardizer(&Matrix::vstack(&[
        source.features(),
        target_train.features(),
    ])?);
    let source = standardizer.apply_dataset(source)?;
    let target_train = standardizer.apply_dataset(target_train)?;
    let target_test = target_test
        .map(|t| standardizer.apply_dataset(t))
        .transpose()?;
    let target_few = draw_few_shot(&target_train, cfg)?;
    Ok(PreparedData {
        standardizer,
        source,
        target_train,
        target_few,
        target_test,
    })
}

/// The labeled target subset a run with `cfg` uses.
pub fn draw_few_shot(target_train: &LabeledDataset, cfg: &TrainConfig) -> Result<LabeledDataset> {
    target_train.few_shot(cfg.labeled_target_per_class, derive_seed(cfg.seed, 7))
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub data: PreparedData,
    pub model: TrainedModel,
    pub report: TrainReport,
}

/// Standardize, train the configured variant, and evaluate on the test set.
pub fn run_experiment(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    target_test: &LabeledDataset,
    cfg: &TrainConfig,
    kind: ClassifierKind,
    exec: Execution,
) -> Result<Experiment> {
    let data = prepare(source, target_train, Some(target_test), cfg)?;
    let (model, mut report) = train(
        &data.source,
        &data.target_train,
        &data.target_few,
        cfg,
        exec,
    )?;
    let test = data.target_test.as_ref().expect("test set was provided");
    report.accuracy = Some(evaluate(
        &model,
        &data.source,
        &data.target_few,
        test,
        kind,
    )?);
    Ok(Experiment {
        data,
        model,
        report,
    })
}
