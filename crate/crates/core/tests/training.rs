use iadb::nn::{train, Activation, AdamConfig, LossKind, Mlp, NeuralDeblender, TrainConfig};
use iadb::{presets, Deblender, Density, Point, SeedStreams};

fn trained(p0: &Density, p1: &Density, config: TrainConfig, hidden: usize, width: usize) -> NeuralDeblender {
    let mut rng = SeedStreams::new(config.seed).stream("init");
    let net = Mlp::with_hidden(p0.dim(), hidden, width, Activation::Relu, &mut rng).unwrap();
    NeuralDeblender::new(train(net, p0, p1, &config).unwrap().net)
}

fn grid() -> Vec<Point> {
    (0..=16).map(|k| Point::scalar(-2.0 + 0.25 * k as f64)).collect()
}

/// RMS over the grid of `x + predicted difference` against `expected`,
/// at the source end of the blend.
fn source_end_error(d: &NeuralDeblender, expected: f64) -> f64 {
    let pts = grid();
    let sq: f64 = pts
        .iter()
        .map(|x| {
            let s = d.deblend(x, 0.0).unwrap();
            (s.xbar1[0] - expected).powi(2)
        })
        .sum();
    (sq / pts.len() as f64).sqrt()
}

#[test]
fn squared_loss_learns_mean_and_absolute_loss_learns_median() {
    // At the source end the posterior of x1 is p1 itself, so the two nets
    // must predict its mean and its median.
    let (g0, g1) = presets::normal_to_skewed();
    let (p0, p1) = (Density::Mixture(g0), Density::Mixture(g1.clone()));

    let mut draws: Vec<f64> = (0..200_001)
        .map({
            let mut rng = SeedStreams::new(3).stream("median-oracle");
            move |_| g1.sample_one(&mut rng)[0]
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    draws.sort_by(f64::total_cmp);
    let median = draws[draws.len() / 2];
    assert!(mean - median > 0.3, "setup must separate mean {mean} and median {median}");

    let config = |loss, seed| TrainConfig {
        iterations: 3000,
        batch_size: 2048,
        loss,
        seed,
        adam: AdamConfig {
            learning_rate: 5e-4,
            ..AdamConfig::default()
        },
    };
    let l2 = trained(&p0, &p1, config(LossKind::L2, 31), 3, 32);
    let l1 = trained(&p0, &p1, config(LossKind::L1, 32), 3, 32);
    let (l2_mean, l2_median) = (source_end_error(&l2, mean), source_end_error(&l2, median));
    let (l1_mean, l1_median) = (source_end_error(&l1, mean), source_end_error(&l1, median));
    assert!(l2_mean < 0.1, "l2 net vs mean {l2_mean}");
    assert!(l1_median < 0.1, "l1 net vs median {l1_median}");
    assert!(l2_mean < l2_median && l1_median < l1_mean);
}

#[test]
fn default_training_fits_the_source_end() {
    // Default budget and architecture on the Gaussian to bimodal pair; the
    // target mean is 0.
    let (g0, g1) = presets::normal_to_bimodal();
    let (p0, p1) = (Density::Mixture(g0), Density::Mixture(g1));
    let config = TrainConfig {
        seed: 91,
        ..TrainConfig::default()
    };
    let net = trained(&p0, &p1, config, 5, 64);
    let err = source_end_error(&net, 0.0);
    assert!(err < 0.1, "rms {err}");
}
