//! The coupled two-way model: generators `g_st: S → T` and `g_ts: T → S`,
//! discriminators `d_t` and `d_s`, and every term of the loss system.
//!
//! Way 1 maps source data to the target domain and back; way 2 mirrors it.
//! Each way contributes an adversarial term, a domain term pulling the
//! generated batch toward the opposite domain's feature center, and a cycle
//! content term. The two generators are single instances shared by both
//! ways, so the cycle of one way trains the generator of the other.
//!
//! Networks may be conditioned: an optional condition matrix (one-hot class
//! codes) is appended to the input of every network. Gradients flowing back
//! into a conditioned input are truncated to the feature columns.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::mlp::{init_mlp_with_output, sigmoid, Activation, Gradients, Mlp, NetKind};

/// Probabilities are clamped to this floor before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Variants of the squared-distance losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LossOptions {
    /// Use the raw squared Frobenius norm instead of the mean over entries.
    pub raw_norm: bool,
    /// Drop the sigmoid wrap and use the squared distance directly.
    pub unwrapped: bool,
}

impl LossOptions {
    fn aggregate_scale(self, x: &Matrix) -> f64 {
        if self.raw_norm {
            1.0
        } else {
            1.0 / (x.rows() * x.cols()) as f64
        }
    }

    /// Returns the wrapped value and its derivative with respect to the distance.
    fn wrap(self, m: f64) -> (f64, f64) {
        if self.unwrapped {
            (m, 1.0)
        } else {
            let s = sigmoid(m);
            (s, s * (1.0 - s))
        }
    }
}

/// Per-feature mean of a domain's training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCenter(pub Vec<f64>);

impl DomainCenter {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn domain_center(x: &Matrix) -> Result<DomainCenter> {
    let c = x.column_means();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("domain center is not finite".into()));
    }
    Ok(DomainCenter(c))
}

/// Centers of both domains, computed once from the full training sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centers {
    pub source: DomainCenter,
    pub target: DomainCenter,
}

impl Centers {
    pub fn from_training(x_s: &Matrix, x_t: &Matrix) -> Result<Self> {
        Ok(Centers {
            source: domain_center(x_s)?,
            target: domain_center(x_t)?,
        })
    }

    pub fn swapped(&self) -> Self {
        Centers {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

fn check_probabilities(p: &Matrix, what: &str) -> Result<()> {
    if p.cols() != 1 {
        return shape_err(format!(
            "{what} must be a column vector, got {:?}",
            p.shape()
        ));
    }
    if let Some(v) = p.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Numeric(format!(
            "{what} contains {v}, outside [0, 1]"
        )));
    }
    Ok(())
}

#[inline]
fn neg_log(p: f64) -> f64 {
    -p.max(LOG_FLOOR).ln()
}

/// d/dp of `-ln(max(p, floor))`.
#[inline]
fn neg_log_grad(p: f64) -> f64 {
    if p >= LOG_FLOOR {
        -1.0 / p
    } else {
        0.0
    }
}

/// `−mean(ln real) − mean(ln(1 − fake))`.
pub fn discriminator_loss(real_out: &Matrix, fake_out: &Matrix) -> Result<f64> {
    check_probabilities(real_out, "real discriminator output")?;
    check_probabilities(fake_out, "fake discriminator output")?;
    let real =
        real_out.as_slice().iter().map(|&p| neg_log(p)).sum::<f64>() / real_out.rows() as f64;
    let fake = fake_out
        .as_slice()
        .iter()
        .map(|&p| neg_log(1.0 - p))
        .sum::<f64>()
        / fake_out.rows() as f64;
    Ok(real + fake)
}

/// `−mean(ln fake)`.
pub fn generator_gan_loss(fake_out: &Matrix) -> Result<f64> {
    check_probabilities(fake_out, "fake discriminator output")?;
    Ok(fake_out.as_slice().iter().map(|&p| neg_log(p)).sum::<f64>() / fake_out.rows() as f64)
}

/// Wrapped squared distance between `x` and `reference` rows; returns the
/// loss and its gradient with respect to `x`.
fn wrapped_distance(x: &Matrix, diff: Matrix, opts: LossOptions) -> (f64, Matrix) {
    let scale = opts.aggregate_scale(x);
    let m = diff.frobenius_sq() * scale;
    let (value, dvalue) = opts.wrap(m);
    let grad = diff.scale(2.0 * scale * dvalue);
    (value, grad)
}

fn center_diff(x_gen: &Matrix, center: &DomainCenter) -> Result<Matrix> {
    if x_gen.cols() != center.len() {
        return shape_err(format!(
            "generated batch has {} features, center has {}",
            x_gen.cols(),
            center.len()
        ));
    }
    let neg: Vec<f64> = center.0.iter().map(|v| -v).collect();
    let mut diff = x_gen.clone();
    diff.add_row_vector(&neg)?;
    Ok(diff)
}

/// `σ(mean_ij (X_gen − center)²)`; lies in `[0.5, 1)`.
pub fn domain_loss(x_gen: &Matrix, center: &DomainCenter) -> Result<f64> {
    domain_loss_with(x_gen, center, LossOptions::default())
}

pub fn domain_loss_with(x_gen: &Matrix, center: &DomainCenter, opts: LossOptions) -> Result<f64> {
    let diff = center_diff(x_gen, center)?;
    Ok(wrapped_distance(x_gen, diff, opts).0)
}

/// `σ(mean_ij (X_cycle − X_orig)²)`; lies in `[0.5, 1)`.
pub fn content_loss(x_cycle: &Matrix, x_orig: &Matrix) -> Result<f64> {
    content_loss_with(x_cycle, x_orig, LossOptions::default())
}

pub fn content_loss_with(x_cycle: &Matrix, x_orig: &Matrix, opts: LossOptions) -> Result<f64> {
    let diff = x_cycle.sub(x_orig)?;
    Ok(wrapped_distance(x_cycle, diff, opts).0)
}

/// Pure forward pass of a generator.
pub fn generate(net: &Mlp, x: &Matrix) -> Result<Matrix> {
    net.predict(x)
}

/// Every loss term of the complete model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub gan_t: f64,
    pub gan_s: f64,
    pub domain_t: f64,
    pub domain_s: f64,
    pub content_sts: f64,
    pub content_tst: f64,
    pub d_t_loss: f64,
    pub d_s_loss: f64,
}

impl LossBreakdown {
    pub fn way1(&self) -> f64 {
        self.gan_t + self.domain_t + self.content_sts
    }

    pub fn way2(&self) -> f64 {
        self.gan_s + self.domain_s + self.content_tst
    }

    /// Generator objective `L_G`.
    pub fn generator_total(&self) -> f64 {
        self.way1() + self.way2()
    }

    /// Discriminator objective `L_D`.
    pub fn discriminator_total(&self) -> f64 {
        self.d_t_loss + self.d_s_loss
    }

    /// The result of relabeling source as target and vice versa.
    pub fn swapped(&self) -> Self {
        LossBreakdown {
            gan_t: self.gan_s,
            gan_s: self.gan_t,
            domain_t: self.domain_s,
            domain_s: self.domain_t,
            content_sts: self.content_tst,
            content_tst: self.content_sts,
            d_t_loss: self.d_s_loss,
            d_s_loss: self.d_t_loss,
        }
    }

    pub fn named_terms(&self) -> [(&'static str, f64); 8] {
        [
            ("gan_t", self.gan_t),
            ("gan_s", self.gan_s),
            ("domain_t", self.domain_t),
            ("domain_s", self.domain_s),
            ("content_sts", self.content_sts),
            ("content_tst", self.content_tst),
            ("d_t_loss", self.d_t_loss),
            ("d_s_loss", self.d_s_loss),
        ]
    }

    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.named_terms()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }
}

/// The three terms of one generator way.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WayTerms {
    pub gan: f64,
    pub domain: f64,
    pub content: f64,
}

impl WayTerms {
    pub fn total(&self) -> f64 {
        self.gan + self.domain + self.content
    }
}

/// Layer widths for a quartet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub feature_dim: usize,
    /// Width of the appended condition vector; 0 when unconditioned.
    pub condition_dim: usize,
    pub generator_hidden: usize,
    pub discriminator_hidden: (usize, usize),
    pub sigmoid_generator_output: bool,
    pub generator_init: GeneratorInit,
}

/// Starting point for the generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorInit {
    /// Uniform fan-in/fan-out weights, zero biases.
    Glorot,
    /// The linearized-sigmoid identity `x ↦ (4/a)(σ(a·x) − ½)` plus a tenth
    /// of the Glorot draw. Needs a linear output and hidden width ≥ d;
    /// otherwise falls back to `Glorot`.
    #[default]
    NearIdentity,
}

impl std::str::FromStr for GeneratorInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glorot" => Ok(GeneratorInit::Glorot),
            "near_identity" => Ok(GeneratorInit::NearIdentity),
            other => config_err(format!(
                "unknown generator init `{other}` (expected glorot|near_identity)"
            )),
        }
    }
}

/// Input gain `a` of the near-identity generator.
const IDENTITY_GAIN: f64 = 0.5;
const IDENTITY_NOISE: f64 = 0.1;

fn near_identity(mut net: Mlp, feature_dim: usize) -> Result<Mlp> {
    let hidden = net.layers()[0].d_out();
    if hidden < feature_dim || net.layers()[1].activation != Activation::Linear {
        return Ok(net);
    }
    let (gain, noise) = (IDENTITY_GAIN, IDENTITY_NOISE);
    let mut params = net.flat_params();
    params.iter_mut().for_each(|p| *p *= noise);
    net.set_flat_params(&params)?;
    let mut layers = net.layers().to_vec();
    for j in 0..feature_dim {
        let w = layers[0].weight.get(j, j);
        layers[0].weight.set(j, j, w + gain);
        let w = layers[1].weight.get(j, j);
        layers[1].weight.set(j, j, w + 4.0 / gain);
        layers[1].bias[j] = -2.0 / gain;
    }
    Mlp::from_layers(layers, NetKind::Generator)
}

impl NetShape {
    /// Generator hidden = d; discriminator hidden = (d, ⌈d/2⌉), both floored at 4.
    pub fn with_default_widths(feature_dim: usize, condition_dim: usize) -> Self {
        NetShape {
            feature_dim,
            condition_dim,
            generator_hidden: feature_dim,
            discriminator_hidden: (feature_dim.max(4), feature_dim.div_ceil(2).max(4)),
            sigmoid_generator_output: false,
            generator_init: GeneratorInit::default(),
        }
    }

    fn input_dim(&self) -> usize {
        self.feature_dim + self.condition_dim
    }
}

/// The four networks. One instance per generator: both ways use the same
/// `g_st` and the same `g_ts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatganNets {
    pub g_st: Mlp,
    pub g_ts: Mlp,
    pub d_t: Mlp,
    pub d_s: Mlp,
}

/// SplitMix64 step used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CatganNets {
    pub fn init(shape: &NetShape, seed: u64) -> Result<Self> {
        let d = shape.feature_dim;
        let input = shape.input_dim();
        let gen_out = if shape.sigmoid_generator_output {
            Activation::Sigmoid
        } else {
            Activation::Linear
        };
        let gen_dims = [input, shape.generator_hidden, d];
        let (h1, h2) = shape.discriminator_hidden;
        let disc_dims = [input, h1, h2, 1];
        let generator = |stream| -> Result<Mlp> {
            let net = init_mlp_with_output(
                &gen_dims,
                NetKind::Generator,
                gen_out,
                derive_seed(seed, stream),
            )?;
            match shape.generator_init {
                GeneratorInit::Glorot => Ok(net),
                GeneratorInit::NearIdentity => near_identity(net, d),
            }
        };
        Ok(CatganNets {
            g_st: generator(1)?,
            g_ts: generator(2)?,
            d_t: init_mlp_with_output(
                &disc_dims,
                NetKind::Discriminator,
                Activation::Sigmoid,
                derive_seed(seed, 3),
            )?,
            d_s: init_mlp_with_output(
                &disc_dims,
                NetKind::Discriminator,
                Activation::Sigmoid,
                derive_seed(seed, 4),
            )?,
        })
    }

    /// Exchange the roles of the two domains.
    pub fn swapped(&self) -> Self {
        CatganNets {
            g_st: self.g_ts.clone(),
            g_ts: self.g_st.clone(),
            d_t: self.d_s.clone(),
            d_s: self.d_t.clone(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.g_st.output_dim()
    }

    pub fn condition_dim(&self) -> usize {
        self.g_st.input_dim() - self.g_st.output_dim()
    }
}

/// A batch of one domain plus its optional condition codes.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub features: &'a Matrix,
    pub condition: Option<&'a Matrix>,
}

impl<'a> Batch<'a> {
    pub fn plain(features: &'a Matrix) -> Self {
        Batch {
            features,
            condition: None,
        }
    }

    pub fn conditioned(features: &'a Matrix, condition: &'a Matrix) -> Self {
        Batch {
            features,
            condition: Some(condition),
        }
    }

    /// `features` of another matrix with this batch's condition.
    fn input_for(&self, features: &Matrix) -> Result<Matrix> {
        match self.condition {
            Some(c) => features.hstack(c),
            None => Ok(features.clone()),
        }
    }
}

fn feature_part(dx: Matrix, d: usize) -> Result<Matrix> {
    if dx.cols() == d {
        Ok(dx)
    } else {
        dx.take_columns(d)
    }
}

/// Weights applied to the six generator terms when forming gradients.
/// All ones gives the gradient of `L_G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorTermWeights {
    pub gan_t: f64,
    pub domain_t: f64,
    pub content_sts: f64,
    pub gan_s: f64,
    pub domain_s: f64,
    pub content_tst: f64,
}

impl Default for GeneratorTermWeights {
    fn default() -> Self {
        Self::all(1.0)
    }
}

impl GeneratorTermWeights {
    pub fn all(w: f64) -> Self {
        GeneratorTermWeights {
            gan_t: w,
            domain_t: w,
            content_sts: w,
            gan_s: w,
            domain_s: w,
            content_tst: w,
        }
    }

    /// Only the named term (as in [`LossBreakdown::named_terms`]) is active.
    pub fn only(term: &str) -> Option<Self> {
        let mut w = Self::all(0.0);
        match term {
            "gan_t" => w.gan_t = 1.0,
            "domain_t" => w.domain_t = 1.0,
            "content_sts" => w.content_sts = 1.0,
            "gan_s" => w.gan_s = 1.0,
            "domain_s" => w.domain_s = 1.0,
            "content_tst" => w.content_tst = 1.0,
            _ => return None,
        }
        Some(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGradients {
    pub g_st: Gradients,
    pub g_ts: Gradients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorGradients {
    pub d_t: Gradients,
    pub d_s: Gradients,
}

/// Gradient contributions of one way, expressed for the (forward, backward)
/// generator pair of that way.
struct WayGrad {
    terms: WayTerms,
    forward: Gradients,
    backward: Gradients,
}

/// One generator way: `x → fwd → critic`, cycle `fwd → bwd`.
/// Way 1 is `(g_st, g_ts, d_t, target center)`; way 2 is the mirror.
#[allow(clippy::too_many_arguments)]
fn way_pass(
    fwd: &Mlp,
    bwd: &Mlp,
    critic: &Mlp,
    batch: Batch<'_>,
    opposite_center: &DomainCenter,
    opts: LossOptions,
    weights: (f64, f64, f64),
    want_grads: bool,
) -> Result<WayGrad> {
    let x = batch.features;
    let d = x.cols();
    let (w_gan, w_dom, w_con) = weights;

    let (x_gen, cache_fwd) = fwd.forward(&batch.input_for(x)?)?;
    let (x_cycle, cache_bwd) = bwd.forward(&batch.input_for(&x_gen)?)?;
    let (p_fake, cache_critic) = critic.forward(&batch.input_for(&x_gen)?)?;

    let gan = generator_gan_loss(&p_fake)?;
    let (domain, d_domain) = wrapped_distance(&x_gen, center_diff(&x_gen, opposite_center)?, opts);
    let (content, d_content) = wrapped_distance(&x_cycle, x_cycle.sub(x)?, opts);
    let terms = WayTerms {
        gan,
        domain,
        content,
    };

    if !want_grads {
        return Ok(WayGrad {
            terms,
            forward: Gradients::zeros_like(fwd),
            backward: Gradients::zeros_like(bwd),
        });
    }

    let n = p_fake.rows() as f64;
    let dp = p_fake.map(|p| w_gan * neg_log_grad(p) / n);
    let (_, dx_from_critic) = critic.backward(&cache_critic, &dp)?;

    let (grad_bwd, dx_from_cycle) = bwd.backward(&cache_bwd, &d_content.scale(w_con))?;

    let mut dx_gen = d_domain.scale(w_dom);
    dx_gen.add_assign(&feature_part(dx_from_critic, d)?)?;
    dx_gen.add_assign(&feature_part(dx_from_cycle, d)?)?;
    let (grad_fwd, _) = fwd.backward(&cache_fwd, &dx_gen)?;

    Ok(WayGrad {
        terms,
        forward: grad_fwd,
        backward: grad_bwd,
    })
}

/// Way-1 objective `gan_t + domain_t + content_sts` on a source batch.
pub fn generator_objective_way1(
    nets: &CatganNets,
    source: Batch<'_>,
    target_center: &DomainCenter,
    opts: LossOptions,
) -> Result<(f64, WayTerms)> {
    let w = way_pass(
        &nets.g_st,
        &nets.g_ts,
        &nets.d_t,
        source,
        target_center,
        opts,
        (1.0, 1.0, 1.0),
        false,
    )?;
    Ok((w.terms.total(), w.terms))
}

/// Way-2 objective `gan_s + domain_s + content_tst` on a target batch.
pub fn generator_objective_way2(
    nets: &CatganNets,
    target: Batch<'_>,
    source_center: &DomainCenter,
    opts: LossOptions,
) -> Result<(f64, WayTerms)> {
    let w = way_pass(
        &nets.g_ts,
        &nets.g_st,
        &nets.d_s,
        target,
        source_center,
        opts,
        (1.0, 1.0, 1.0),
        false,
    )?;
    Ok((w.terms.total(), w.terms))
}

/// Generator terms of both ways and the gradient of their weighted sum with
/// respect to both generators.
pub fn generator_gradients(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    centers: &Centers,
    opts: LossOptions,
    weights: &GeneratorTermWeights,
) -> Result<(WayTerms, WayTerms, GeneratorGradients)> {
    let w1 = way_pass(
        &nets.g_st,
        &nets.g_ts,
        &nets.d_t,
        source,
        &centers.target,
        opts,
        (weights.gan_t, weights.domain_t, weights.content_sts),
        true,
    )?;
    let w2 = way_pass(
        &nets.g_ts,
        &nets.g_st,
        &nets.d_s,
        target,
        &centers.source,
        opts,
        (weights.gan_s, weights.domain_s, weights.content_tst),
        true,
    )?;
    let mut g_st = w1.forward;
    g_st.add_assign(&w2.backward)?;
    let mut g_ts = w1.backward;
    g_ts.add_assign(&w2.forward)?;
    Ok((w1.terms, w2.terms, GeneratorGradients { g_st, g_ts }))
}

/// Loss of one discriminator on a real batch and a fixed generated batch,
/// with its gradient.
pub fn critic_gradients(critic: &Mlp, real: &Matrix, fake: &Matrix) -> Result<(f64, Gradients)> {
    critic_pass(critic, real, fake, true)
}

fn critic_pass(
    critic: &Mlp,
    real: &Matrix,
    fake: &Matrix,
    want_grads: bool,
) -> Result<(f64, Gradients)> {
    let (p_real, cache_real) = critic.forward(real)?;
    let (p_fake, cache_fake) = critic.forward(fake)?;
    let loss = discriminator_loss(&p_real, &p_fake)?;
    if !want_grads {
        return Ok((loss, Gradients::zeros_like(critic)));
    }
    let n_real = p_real.rows() as f64;
    let n_fake = p_fake.rows() as f64;
    let d_real = p_real.map(|p| neg_log_grad(p) / n_real);
    let d_fake = p_fake.map(|p| -neg_log_grad(1.0 - p) / n_fake);
    let (mut grads, _) = critic.backward(&cache_real, &d_real)?;
    let (g_fake, _) = critic.backward(&cache_fake, &d_fake)?;
    grads.add_assign(&g_fake)?;
    Ok((loss, grads))
}

/// Discriminator losses and gradients. Generated batches are produced by
/// the current generators and treated as constants.
pub fn discriminator_gradients(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
) -> Result<(f64, f64, DiscriminatorGradients)> {
    discriminator_pass(nets, source, target, true)
}

fn discriminator_pass(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    want_grads: bool,
) -> Result<(f64, f64, DiscriminatorGradients)> {
    let x_st = nets.g_st.predict(&source.input_for(source.features)?)?;
    let x_ts = nets.g_ts.predict(&target.input_for(target.features)?)?;
    let (d_t_loss, d_t) = critic_pass(
        &nets.d_t,
        &target.input_for(target.features)?,
        &source.input_for(&x_st)?,
        want_grads,
    )?;
    let (d_s_loss, d_s) = critic_pass(
        &nets.d_s,
        &source.input_for(source.features)?,
        &target.input_for(&x_ts)?,
        want_grads,
    )?;
    Ok((d_t_loss, d_s_loss, DiscriminatorGradients { d_t, d_s }))
}

/// All eight loss terms. `centers` should come from the full training sets.
pub fn total_losses(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    centers: &Centers,
    opts: LossOptions,
) -> Result<LossBreakdown> {
    let (_, w1) = generator_objective_way1(nets, source, &centers.target, opts)?;
    let (_, w2) = generator_objective_way2(nets, target, &centers.source, opts)?;
    let (d_t_loss, d_s_loss, _) = discriminator_pass(nets, source, target, false)?;
    Ok(LossBreakdown {
        gan_t: w1.gan,
        gan_s: w2.gan,
        domain_t: w1.domain,
        domain_s: w2.domain,
        content_sts: w1.content,
        content_tst: w2.content,
        d_t_loss,
        d_s_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Layer;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn center_is_column_mean() {
        let c = domain_center(&m(&[vec![1.0, 3.0], vec![3.0, 5.0]])).unwrap();
        assert_eq!(c.0, vec![2.0, 4.0]);
        let single = domain_center(&m(&[vec![-1.5, 7.0, 0.25]])).unwrap();
        assert_eq!(single.0, vec![-1.5, 7.0, 0.25]);
    }

    #[test]
    fn discriminator_loss_values() {
        let half = Matrix::filled(4, 1, 0.5);
        assert!((discriminator_loss(&half, &half).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        let near_perfect = discriminator_loss(
            &Matrix::filled(3, 1, 1.0 - 1e-12),
            &Matrix::filled(3, 1, 1e-12),
        )
        .unwrap();
        assert!(near_perfect < 1e-10);
        let v = discriminator_loss(
            &Matrix::column(&[0.9, 0.8]).unwrap(),
            &Matrix::column(&[0.1, 0.3]).unwrap(),
        )
        .unwrap();
        let hand = -(0.9f64.ln() + 0.8f64.ln()) / 2.0 - (0.9f64.ln() + 0.7f64.ln()) / 2.0;
        assert!((v - hand).abs() < 1e-15);
    }

    #[test]
    fn probability_validation() {
        let bad = Matrix::column(&[1.2]).unwrap();
        let ok = Matrix::column(&[0.5]).unwrap();
        assert!(matches!(
            discriminator_loss(&bad, &ok),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            generator_gan_loss(&Matrix::column(&[f64::NAN]).unwrap()),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            generator_gan_loss(&Matrix::filled(2, 2, 0.5)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn generator_gan_loss_values() {
        assert_eq!(generator_gan_loss(&Matrix::filled(3, 1, 1.0)).unwrap(), 0.0);
        assert!(
            (generator_gan_loss(&Matrix::filled(3, 1, 0.5)).unwrap() - 2f64.ln()).abs() < 1e-15
        );
        let v = generator_gan_loss(&Matrix::column(&[0.25, 0.75]).unwrap()).unwrap();
        assert!((v - 0.836988).abs() < 1e-6);
    }

    #[test]
    fn domain_loss_values() {
        let c = DomainCenter(vec![2.0, 4.0]);
        assert_eq!(
            domain_loss(&m(&[vec![2.0, 4.0], vec![2.0, 4.0]]), &c).unwrap(),
            0.5
        );
        let far = domain_loss(&m(&[vec![1e4, 4.0]]), &c).unwrap();
        assert!(far > 1.0 - 1e-12 && far < 1.0);
        let v = domain_loss(&m(&[vec![2.0, 4.0], vec![0.0, 4.0]]), &c).unwrap();
        assert!((v - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.7311).abs() < 1e-4);
        assert!(matches!(
            domain_loss(&m(&[vec![1.0]]), &c),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn domain_loss_options() {
        let c = DomainCenter(vec![0.0, 0.0]);
        let x = m(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let raw = domain_loss_with(
            &x,
            &c,
            LossOptions {
                raw_norm: true,
                unwrapped: true,
            },
        )
        .unwrap();
        assert_eq!(raw, 4.0);
        let mean_unwrapped = domain_loss_with(
            &x,
            &c,
            LossOptions {
                raw_norm: false,
                unwrapped: true,
            },
        )
        .unwrap();
        assert_eq!(mean_unwrapped, 1.0);
    }

    #[test]
    fn content_loss_values() {
        let x = m(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        assert_eq!(content_loss(&x, &x).unwrap(), 0.5);
        let shifted = x.map(|v| v + 1000.0);
        assert!(content_loss(&shifted, &x).unwrap() > 1.0 - 1e-12);
        let unit = x.map(|v| v + 1.0);
        assert!((content_loss(&unit, &x).unwrap() - 0.7310585786300049).abs() < 1e-12);
        assert!(content_loss(&x, &Matrix::zeros(1, 2)).is_err());
    }

    fn identity_generator(d: usize) -> Mlp {
        // linear hidden layer so the composition is exactly the identity
        let l1 = Layer::new(Matrix::identity(d), vec![0.0; d], Activation::Linear).unwrap();
        let l2 = Layer::new(Matrix::identity(d), vec![0.0; d], Activation::Linear).unwrap();
        Mlp::from_layers(vec![l1, l2], NetKind::Generator).unwrap()
    }

    #[test]
    fn way1_decomposition_with_identity_generators() {
        let shape = NetShape::with_default_widths(2, 0);
        let mut nets = CatganNets::init(&shape, 3).unwrap();
        nets.g_st = identity_generator(2);
        nets.g_ts = identity_generator(2);
        let center = DomainCenter(vec![1.0, -1.0]);
        let xs = m(&[vec![1.0, -1.0], vec![1.0, -1.0], vec![1.0, -1.0]]);
        let (total, terms) =
            generator_objective_way1(&nets, Batch::plain(&xs), &center, LossOptions::default())
                .unwrap();
        assert_eq!(terms.domain, 0.5);
        assert_eq!(terms.content, 0.5);
        let p = nets.d_t.predict(&xs).unwrap();
        assert!((terms.gan - generator_gan_loss(&p).unwrap()).abs() < 1e-15);
        assert!((total - (1.0 + terms.gan)).abs() < 1e-15);
    }

    #[test]
    fn breakdown_sums() {
        let b = LossBreakdown {
            gan_t: 0.7,
            domain_t: 0.5,
            content_sts: 0.5,
            gan_s: 0.2,
            domain_s: 0.5,
            content_tst: 0.9,
            d_t_loss: 1.0,
            d_s_loss: 2.0,
        };
        assert!((b.way1() - 1.7).abs() < 1e-12);
        assert!((b.way2() - 1.6).abs() < 1e-12);
        assert!((b.generator_total() - 3.3).abs() < 1e-12);
        assert_eq!(b.discriminator_total(), 3.0);
        assert_eq!(b.swapped().swapped(), b);
    }

    #[test]
    fn uninformative_discriminators_total() {
        let shape = NetShape::with_default_widths(2, 0);
        let mut nets = CatganNets::init(&shape, 1).unwrap();
        for d in [&mut nets.d_t, &mut nets.d_s] {
            let zeros = vec![0.0; d.param_count()];
            d.set_flat_params(&zeros).unwrap();
        }
        let xs = m(&[vec![0.1, 0.2], vec![0.3, -0.4]]);
        let xt = m(&[vec![1.1, 0.2], vec![-0.3, 0.9], vec![2.0, 2.0]]);
        let centers = Centers::from_training(&xs, &xt).unwrap();
        let b = total_losses(
            &nets,
            Batch::plain(&xs),
            Batch::plain(&xt),
            &centers,
            LossOptions::default(),
        )
        .unwrap();
        assert!((b.discriminator_total() - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!((b.gan_t - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn conditional_shapes() {
        let shape = NetShape::with_default_widths(10, 4);
        let nets = CatganNets::init(&shape, 0).unwrap();
        assert_eq!(nets.g_st.input_dim(), 14);
        assert_eq!(nets.g_st.output_dim(), 10);
        assert_eq!(nets.d_t.input_dim(), 14);
        assert_eq!(nets.condition_dim(), 4);
    }

    #[test]
    fn near_identity_generators_start_close_to_identity() {
        let shape = NetShape::with_default_widths(3, 0);
        let nets = CatganNets::init(&shape, 5).unwrap();
        let x = m(&[vec![0.5, -1.0, 0.2], vec![-0.3, 0.8, 1.5]]);
        let y = nets.g_st.predict(&x).unwrap();
        assert!(y.sub(&x).unwrap().as_slice().iter().all(|v| v.abs() < 0.5));

        let glorot = NetShape {
            generator_init: GeneratorInit::Glorot,
            ..shape
        };
        let plain = CatganNets::init(&glorot, 5).unwrap();
        assert_eq!(plain.d_t, nets.d_t);
        assert_ne!(plain.g_st, nets.g_st);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..4).map(|s| derive_seed(42, s)).collect();
        let mut b = a.clone();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }
}
