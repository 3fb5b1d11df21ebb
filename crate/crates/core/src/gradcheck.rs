//! Central finite-difference checks of the hand-written gradients.
//!
//! Every parameter of the relevant networks is perturbed by `±eps` and the
//! loss is recomputed through the forward pass only. Generator terms are
//! checked against both generators (this covers the composed cycle paths);
//! discriminator losses against their own discriminator.

use crate::error::{config_err, Result};
use crate::mlp::{Gradients, Mlp};
use crate::model::{
    discriminator_gradients, generator_gradients, generator_objective_way1,
    generator_objective_way2, total_losses, Batch, CatganNets, Centers, GeneratorTermWeights,
    LossOptions,
};

pub const GENERATOR_TERMS: [&str; 6] = [
    "gan_t",
    "domain_t",
    "content_sts",
    "gan_s",
    "domain_s",
    "content_tst",
];
pub const DISCRIMINATOR_TERMS: [&str; 2] = ["d_t_loss", "d_s_loss"];

/// Worst disagreement for one (loss term, network) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TermCheck {
    pub term: &'static str,
    pub net: &'static str,
    pub params: usize,
    pub max_rel_error: f64,
    pub max_abs_gradient: f64,
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps exact zeros from
/// producing 0/0.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const RELATIVE_FLOOR: f64 = 1e-6;

fn term_value(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    centers: &Centers,
    opts: LossOptions,
    term: &str,
) -> Result<f64> {
    match term {
        "gan_t" | "domain_t" | "content_sts" => {
            let (_, w) = generator_objective_way1(nets, source, &centers.target, opts)?;
            Ok(match term {
                "gan_t" => w.gan,
                "domain_t" => w.domain,
                _ => w.content,
            })
        }
        "gan_s" | "domain_s" | "content_tst" => {
            let (_, w) = generator_objective_way2(nets, target, &centers.source, opts)?;
            Ok(match term {
                "gan_s" => w.gan,
                "domain_s" => w.domain,
                _ => w.content,
            })
        }
        "d_t_loss" => Ok(total_losses(nets, source, target, centers, opts)?.d_t_loss),
        "d_s_loss" => Ok(total_losses(nets, source, target, centers, opts)?.d_s_loss),
        _ => config_err(format!("unknown loss term `{term}`")),
    }
}

type NetSlot = (&'static str, fn(&mut CatganNets) -> &mut Mlp);

const G_SLOTS: [NetSlot; 2] = [("g_st", |n| &mut n.g_st), ("g_ts", |n| &mut n.g_ts)];

fn compare(
    nets: &CatganNets,
    slot: NetSlot,
    analytic: &Gradients,
    eps: f64,
    mut f: impl FnMut(&CatganNets) -> Result<f64>,
    term: &'static str,
) -> Result<TermCheck> {
    let (name, pick) = slot;
    let mut work = nets.clone();
    let base = pick(&mut work).flat_params();
    let grad = analytic.flatten();
    let mut worst: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + eps;
        pick(&mut work).set_flat_params(&p)?;
        let up = f(&work)?;
        p[i] = base[i] - eps;
        pick(&mut work).set_flat_params(&p)?;
        let down = f(&work)?;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max(relative_error(grad[i], numeric, RELATIVE_FLOOR));
        largest = largest.max(grad[i].abs());
    }
    pick(&mut work).set_flat_params(&base)?;
    Ok(TermCheck {
        term,
        net: name,
        params: base.len(),
        max_rel_error: worst,
        max_abs_gradient: largest,
    })
}

/// Checks each of the six generator terms against both generators.
pub fn check_generator_terms(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    centers: &Centers,
    opts: LossOptions,
    eps: f64,
) -> Result<Vec<TermCheck>> {
    let mut out = Vec::new();
    for term in GENERATOR_TERMS {
        let weights = GeneratorTermWeights::only(term).expect("known term");
        let (_, _, grads) = generator_gradients(nets, source, target, centers, opts, &weights)?;
        for (slot, analytic) in G_SLOTS.into_iter().zip([&grads.g_st, &grads.g_ts]) {
            out.push(compare(
                nets,
                slot,
                analytic,
                eps,
                |n| term_value(n, source, target, centers, opts, term),
                term,
            )?);
        }
    }
    Ok(out)
}

/// Checks both discriminator losses against their discriminators.
pub fn check_discriminator_terms(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    eps: f64,
) -> Result<Vec<TermCheck>> {
    let (_, _, grads) = discriminator_gradients(nets, source, target)?;
    // Discriminator losses do not depend on the centers or loss options.
    let centers = Centers::from_training(source.features, target.features)?;
    let opts = LossOptions::default();
    let d_t: NetSlot = ("d_t", |n| &mut n.d_t);
    let d_s: NetSlot = ("d_s", |n| &mut n.d_s);
    Ok(vec![
        compare(
            nets,
            d_t,
            &grads.d_t,
            eps,
            |n| term_value(n, source, target, &centers, opts, "d_t_loss"),
            "d_t_loss",
        )?,
        compare(
            nets,
            d_s,
            &grads.d_s,
            eps,
            |n| term_value(n, source, target, &centers, opts, "d_s_loss"),
            "d_s_loss",
        )?,
    ])
}

/// Both checks together.
pub fn check_all(
    nets: &CatganNets,
    source: Batch<'_>,
    target: Batch<'_>,
    centers: &Centers,
    opts: LossOptions,
    eps: f64,
) -> Result<Vec<TermCheck>> {
    let mut out = check_generator_terms(nets, source, target, centers, opts, eps)?;
    out.extend(check_discriminator_terms(nets, source, target, eps)?);
    Ok(out)
}
