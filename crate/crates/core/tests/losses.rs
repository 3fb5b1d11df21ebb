use catgan_core::mlp::{Activation, Mlp};
use catgan_core::model::{
    generator_objective_way1, generator_objective_way2, total_losses, Batch, CatganNets, Centers,
    GeneratorInit, LossBreakdown, LossOptions, NetShape,
};
use catgan_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Instance {
    nets: CatganNets,
    xs: Matrix,
    xt: Matrix,
    centers: Centers,
    opts: LossOptions,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64, shift: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal) + shift)
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn instance(seed: u64, unwrapped: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=5);
    let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let shift = rng.random_range(-20.0..20.0);
    let (ns, nt) = (rng.random_range(1..12), rng.random_range(1..12));
    let xs = random_matrix(&mut rng, ns, d, scale, 0.0);
    let xt = random_matrix(&mut rng, nt, d, scale, shift);
    let shape = NetShape {
        generator_hidden: rng.random_range(1..=8),
        discriminator_hidden: (rng.random_range(1..=8), rng.random_range(1..=8)),
        sigmoid_generator_output: rng.random_bool(0.2),
        generator_init: if rng.random_bool(0.5) {
            GeneratorInit::Glorot
        } else {
            GeneratorInit::NearIdentity
        },
        ..NetShape::with_default_widths(d, 0)
    };
    let nets = CatganNets::init(&shape, rng.random()).unwrap();
    let centers = Centers::from_training(&xs, &xt).unwrap();
    let opts = LossOptions {
        raw_norm: rng.random_bool(0.5),
        unwrapped,
    };
    Instance {
        nets,
        xs,
        xt,
        centers,
        opts,
    }
}

fn breakdown(i: &Instance) -> LossBreakdown {
    total_losses(
        &i.nets,
        Batch::plain(&i.xs),
        Batch::plain(&i.xt),
        &i.centers,
        i.opts,
    )
    .unwrap()
}

#[test]
fn loss_ranges_and_recomposition() {
    for seed in 0..1000 {
        let inst = instance(seed, false);
        let b = breakdown(&inst);
        for (name, v) in [
            ("domain_t", b.domain_t),
            ("domain_s", b.domain_s),
            ("content_sts", b.content_sts),
            ("content_tst", b.content_tst),
        ] {
            assert!((0.5..1.0).contains(&v), "seed {seed}: {name} = {v}");
        }
        for (name, v) in [
            ("gan_t", b.gan_t),
            ("gan_s", b.gan_s),
            ("d_t", b.d_t_loss),
            ("d_s", b.d_s_loss),
        ] {
            assert!(v >= 0.0 && v.is_finite(), "seed {seed}: {name} = {v}");
        }
        let lg = b.gan_t + b.domain_t + b.content_sts + b.gan_s + b.domain_s + b.content_tst;
        assert!((b.generator_total() - lg).abs() <= 1e-12);
        assert!((b.discriminator_total() - (b.d_t_loss + b.d_s_loss)).abs() <= 1e-12);
        let (w1, _) = generator_objective_way1(
            &inst.nets,
            Batch::plain(&inst.xs),
            &inst.centers.target,
            inst.opts,
        )
        .unwrap();
        let (w2, _) = generator_objective_way2(
            &inst.nets,
            Batch::plain(&inst.xt),
            &inst.centers.source,
            inst.opts,
        )
        .unwrap();
        assert!((b.generator_total() - (w1 + w2)).abs() <= 1e-12);
    }
}

#[test]
fn unwrapped_losses_are_nonnegative() {
    for seed in 0..200 {
        let b = breakdown(&instance(seed, true));
        for (name, v) in b.named_terms() {
            assert!(v >= 0.0 && v.is_finite(), "seed {seed}: {name} = {v}");
        }
    }
}

#[test]
fn swapping_domains_permutes_the_breakdown() {
    for seed in 0..100 {
        let inst = instance(10_000 + seed, seed % 3 == 0);
        let b = breakdown(&inst);
        let s = total_losses(
            &inst.nets.swapped(),
            Batch::plain(&inst.xt),
            Batch::plain(&inst.xs),
            &inst.centers.swapped(),
            inst.opts,
        )
        .unwrap();
        let expected = b.swapped();
        for ((name, got), (_, want)) in s.named_terms().iter().zip(expected.named_terms()) {
            assert!(
                (got - want).abs() <= 1e-12,
                "seed {seed}: {name} {got} vs {want}"
            );
        }
    }
}

// Independent scalar forward pass and loss formulas.

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn forward_rows(net: &Mlp, x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|r| {
            let mut a: Vec<f64> = (0..x.cols()).map(|j| x.get(r, j)).collect();
            for layer in net.layers() {
                let mut next = vec![0.0; layer.d_out()];
                for (k, out) in next.iter_mut().enumerate() {
                    let mut z = layer.bias[k];
                    for (i, ai) in a.iter().enumerate() {
                        z += ai * layer.weight.get(i, k);
                    }
                    *out = match layer.activation {
                        Activation::Sigmoid => sig(z),
                        Activation::Linear => z,
                    };
                }
                a = next;
            }
            a
        })
        .collect()
}

fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn mean_sq(a: &[Vec<f64>], b: impl Fn(usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    let mut n = 0.0;
    for (r, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s += (v - b(r, j)).powi(2);
            n += 1.0;
        }
    }
    s / n
}

fn neg_mean_ln(p: &[Vec<f64>], f: impl Fn(f64) -> f64) -> f64 {
    -p.iter().map(|r| f(r[0]).ln()).sum::<f64>() / p.len() as f64
}

#[test]
fn forward_losses_match_scalar_oracle() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=4);
        let xs = random_matrix(&mut rng, 7, d, 1.0, 0.0);
        let xt = random_matrix(&mut rng, 5, d, 1.0, 1.5);
        let nets = CatganNets::init(
            &NetShape {
                generator_init: GeneratorInit::Glorot,
                ..NetShape::with_default_widths(d, 0)
            },
            seed,
        )
        .unwrap();
        let centers = Centers::from_training(&xs, &xt).unwrap();
        let b = total_losses(
            &nets,
            Batch::plain(&xs),
            Batch::plain(&xt),
            &centers,
            LossOptions::default(),
        )
        .unwrap();

        let ct: Vec<f64> = (0..d)
            .map(|j| (0..xt.rows()).map(|r| xt.get(r, j)).sum::<f64>() / xt.rows() as f64)
            .collect();
        let cs: Vec<f64> = (0..d)
            .map(|j| (0..xs.rows()).map(|r| xs.get(r, j)).sum::<f64>() / xs.rows() as f64)
            .collect();
        let x_st = forward_rows(&nets.g_st, &xs);
        let x_ts = forward_rows(&nets.g_ts, &xt);
        let x_sts = forward_rows(&nets.g_ts, &to_matrix(&x_st));
        let x_tst = forward_rows(&nets.g_st, &to_matrix(&x_ts));
        let p_fake_t = forward_rows(&nets.d_t, &to_matrix(&x_st));
        let p_fake_s = forward_rows(&nets.d_s, &to_matrix(&x_ts));
        let p_real_t = forward_rows(&nets.d_t, &xt);
        let p_real_s = forward_rows(&nets.d_s, &xs);

        let oracle = [
            ("gan_t", neg_mean_ln(&p_fake_t, |p| p)),
            ("gan_s", neg_mean_ln(&p_fake_s, |p| p)),
            ("domain_t", sig(mean_sq(&x_st, |_, j| ct[j]))),
            ("domain_s", sig(mean_sq(&x_ts, |_, j| cs[j]))),
            ("content_sts", sig(mean_sq(&x_sts, |r, j| xs.get(r, j)))),
            ("content_tst", sig(mean_sq(&x_tst, |r, j| xt.get(r, j)))),
            (
                "d_t_loss",
                neg_mean_ln(&p_real_t, |p| p) + neg_mean_ln(&p_fake_t, |p| 1.0 - p),
            ),
            (
                "d_s_loss",
                neg_mean_ln(&p_real_s, |p| p) + neg_mean_ln(&p_fake_s, |p| 1.0 - p),
            ),
        ];
        for ((name, got), (oname, want)) in b.named_terms().iter().zip(oracle) {
            assert_eq!(*name, oname);
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "seed {seed}: {name} {got} vs {want}"
            );
        }
    }
}

#[test]
fn raw_norm_and_unwrapped_options() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let xs = random_matrix(&mut rng, 4, 3, 1.0, 0.0);
    let xt = random_matrix(&mut rng, 4, 3, 1.0, 2.0);
    let nets = CatganNets::init(&NetShape::with_default_widths(3, 0), 5).unwrap();
    let centers = Centers::from_training(&xs, &xt).unwrap();
    let get =
        |opts| total_losses(&nets, Batch::plain(&xs), Batch::plain(&xt), &centers, opts).unwrap();
    let base = get(LossOptions::default());
    let raw = get(LossOptions {
        raw_norm: true,
        unwrapped: true,
    });
    let mean_unwrapped = get(LossOptions {
        raw_norm: false,
        unwrapped: true,
    });
    // sum over 12 entries vs mean over 12 entries
    assert!((raw.domain_t - 12.0 * mean_unwrapped.domain_t).abs() < 1e-10);
    assert!((sig(mean_unwrapped.content_sts) - base.content_sts).abs() < 1e-14);
    assert_eq!(raw.gan_t, base.gan_t);
}
