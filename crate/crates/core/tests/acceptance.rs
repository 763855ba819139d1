//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured value next to its pinned tolerance.
//!
//! All criteria run sequentially inside a single test so that the reported
//! runtimes are not inflated by other tests sharing the CPU.

use std::io::Write as _;
use std::time::{Duration, Instant};

use iadb::ddim::{beta_identity_residual, equivalence_check, DdimSchedule};
use iadb::densities::{Density, GaussianMixture};
use iadb::eval::{blended_reference, convergence_study, first_axis, sliced_wasserstein, wasserstein1_1d};
use iadb::nn::{train, Activation, LossKind, Mlp, NeuralDeblender, TrainConfig, TrainingTriple};
use iadb::oracle::{analytic_posterior_stats, mc_posterior_stats};
use iadb::samplers::{sample_stochastic, step_variant, transport_batch, Integrator, Schedule, VariantKind};
use iadb::{presets, AnalyticDeblender, Deblender, Point, Rng, SeedStreams};
use rand::Rng as _;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn line(text: &str) {
    // Written straight to the process stdout so it shows up without
    // `--nocapture`.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}

fn run(criterion: u32, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let pass = outcome.pass && in_time;
    line(&format!(
        "criterion {criterion:>2}: {} | {} | runtime {:.1}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    ));
    pass
}

fn random_gmm(rng: &mut Rng, dim: usize) -> GaussianMixture {
    let k = rng.random_range(1..=4);
    GaussianMixture::normalized((0..k).map(|_| {
        let mean = Point::new((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect());
        let std = (0..dim).map(|_| rng.random_range(0.05..2.0)).collect();
        (rng.random_range(0.1..1.0), mean, std)
    }))
    .expect("valid mixture")
}

/// Draws a blended point so that queries land where the blended density
/// has mass.
fn blended_query(g0: &GaussianMixture, g1: &GaussianMixture, alpha: f64, rng: &mut Rng) -> Point {
    g0.sample_one(rng).lincomb(1.0 - alpha, &g1.sample_one(rng), alpha)
}

fn criterion_1() -> Outcome {
    let mut rng = SeedStreams::new(101).stream("consistency");
    let mut worst: f64 = 0.0;
    for q in 0..10_000 {
        let dim = 1 + q % 3;
        let (g0, g1) = (random_gmm(&mut rng, dim), random_gmm(&mut rng, dim));
        let alpha = if q % 50 == 0 { (q / 50 % 2) as f64 } else { rng.random::<f64>() };
        let x = blended_query(&g0, &g1, alpha, &mut rng);
        let s = analytic_posterior_stats(&g0, &g1, &x, alpha).expect("analytic stats");
        worst = worst.max(s.xbar0.lincomb(1.0 - alpha, &s.xbar1, alpha).max_abs_diff(&x));
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!("max |(1-a)xbar0 + a xbar1 - x| = {worst:.3e} over 10^4 queries (tol 1e-9)"),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = SeedStreams::new(102).stream("variants");
    let mut worst: f64 = 0.0;
    for q in 0..10_000 {
        let dim = 1 + q % 3;
        let (g0, g1) = (random_gmm(&mut rng, dim), random_gmm(&mut rng, dim));
        let a_t = rng.random_range(0.05..=0.95);
        let a_next = rng.random_range(a_t..=1.0);
        let x = blended_query(&g0, &g1, a_t, &mut rng);
        let stats = analytic_posterior_stats(&g0, &g1, &x, a_t).expect("analytic stats");
        let steps: Vec<Point> = [VariantKind::A, VariantKind::B, VariantKind::C, VariantKind::D]
            .iter()
            .map(|v| step_variant(*v, &x, a_t, a_next, &stats).expect("in domain"))
            .collect();
        for a in &steps {
            for b in &steps {
                worst = worst.max(a.max_abs_diff(b));
            }
        }
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!("max pairwise gap between variants a-d = {worst:.3e} over 10^4 steps (tol 1e-9)"),
    }
}

/// Posterior expectations by brute-force quadrature along the blend line,
/// parameterized by the endpoint with the larger blend weight.
fn quadrature_means(g0: &GaussianMixture, g1: &GaussianMixture, x: f64, alpha: f64, nodes: usize) -> (f64, f64) {
    let pdf = |g: &GaussianMixture, v: f64| g.log_pdf(&Point::scalar(v)).expect("1d").exp();
    let span = |g: &GaussianMixture| {
        let lo = g.components().iter().map(|c| c.mean[0] - 12.0 * c.stddev[0]).fold(f64::INFINITY, f64::min);
        let hi = g.components().iter().map(|c| c.mean[0] + 12.0 * c.stddev[0]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let by_x0 = alpha >= 0.5;
    let (lo, hi) = if by_x0 { span(g0) } else { span(g1) };
    let h = (hi - lo) / (nodes - 1) as f64;
    let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
    for k in 0..nodes {
        let u = lo + h * k as f64;
        let (x0, x1) = if by_x0 {
            (u, (x - (1.0 - alpha) * u) / alpha)
        } else {
            ((x - alpha * u) / (1.0 - alpha), u)
        };
        let w = pdf(g0, x0) * pdf(g1, x1) * if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        z += w;
        m0 += w * x0;
        m1 += w * x1;
    }
    (m0 / z, m1 / z)
}

fn criterion_3() -> Outcome {
    let mut rng = SeedStreams::new(103).stream("cross-validation");
    let cases: Vec<(GaussianMixture, GaussianMixture, f64, f64)> = (0..20)
        .map(|_| {
            let (g0, g1) = (random_gmm(&mut rng, 1), random_gmm(&mut rng, 1));
            let alpha = rng.random_range(0.05..0.95);
            let x = blended_query(&g0, &g1, alpha, &mut rng)[0];
            (g0, g1, x, alpha)
        })
        .collect();
    let quad_err = cases
        .par_iter()
        .map(|(g0, g1, x, alpha)| {
            let (q0, q1) = quadrature_means(g0, g1, *x, *alpha, 2048 * 2048);
            let s = analytic_posterior_stats(g0, g1, &Point::scalar(*x), *alpha).expect("stats");
            (s.xbar0[0] - q0).abs().max((s.xbar1[0] - q1).abs())
        })
        .reduce(|| 0.0, f64::max);

    let (g0, g1) = presets::normal_to_bimodal();
    let (p0, p1) = (Density::Mixture(g0.clone()), Density::Mixture(g1.clone()));
    let streams = SeedStreams::new(1031);
    let mut mc_err: f64 = 0.0;
    let mut q = 0;
    for &alpha in &[0.2, 0.5, 0.8] {
        for &x in &[-1.0, -0.3, 0.0, 0.4, 1.2] {
            let xp = Point::scalar(x);
            let exact = analytic_posterior_stats(&g0, &g1, &xp, alpha).expect("stats");
            let mc = mc_posterior_stats(&p0, &p1, &xp, alpha, 100_000, &mut streams.substream("mc", q)).expect("mc");
            mc_err = mc_err.max(mc.xbar0.max_abs_diff(&exact.xbar0)).max(mc.xbar1.max_abs_diff(&exact.xbar1));
            q += 1;
        }
    }
    Outcome {
        pass: quad_err < 1e-4 && mc_err < 0.05,
        detail: format!(
            "analytic vs 2048^2-node quadrature max err {quad_err:.2e} (tol 1e-4); Monte-Carlo n=10^5 max err {mc_err:.4} (tol 0.05)"
        ),
    }
}

fn criterion_4() -> Outcome {
    let (g0, g1) = presets::normal_to_bimodal();
    let (p0, p1) = (Density::Mixture(g0.clone()), Density::Mixture(g1.clone()));
    let streams = SeedStreams::new(104);
    let n = 100_000;
    let starts = p0.sample(n, &mut streams.stream("starts"));
    let direct = first_axis(&p1.sample(n, &mut streams.stream("direct")));
    let mut worst_end: f64 = 0.0;
    let mut worst_mid: f64 = 0.0;
    for &steps in &[1usize, 4, 16] {
        let schedule = Schedule::uniform(steps).expect("schedule");
        let label = format!("chains-T{steps}");
        let trajectories: Vec<Vec<f64>> = starts
            .par_iter()
            .enumerate()
            .map(|(i, x0)| {
                let mut rng = streams.substream(&label, i as u64);
                let tr = sample_stochastic(&g0, &g1, x0, schedule, &mut rng).expect("chain");
                tr.states.iter().map(|(_, p)| p[0]).collect()
            })
            .collect();
        let endpoints: Vec<f64> = trajectories.iter().map(|t| t[steps]).collect();
        worst_end = worst_end.max(wasserstein1_1d(&endpoints, &direct).expect("w1"));
        for t in 1..steps {
            let alpha = schedule.alpha(t);
            let column: Vec<f64> = trajectories.iter().map(|tr| tr[t]).collect();
            let mut rng = streams.substream(&format!("reference-T{steps}"), t as u64);
            let reference = first_axis(&blended_reference(&p0, &p1, alpha, n, &mut rng).expect("reference"));
            worst_mid = worst_mid.max(wasserstein1_1d(&column, &reference).expect("w1"));
        }
    }
    Outcome {
        pass: worst_end < 0.02 && worst_mid < 0.02,
        detail: format!(
            "T in {{1,4,16}}, 10^5 chains: endpoint W1 {worst_end:.4}, intermediate W1 {worst_mid:.4} (tol 0.02)"
        ),
    }
}

fn criterion_5() -> Outcome {
    let streams = SeedStreams::new(105);
    let (n0, n1) = presets::normal_to_bimodal();
    let (sq, disk) = presets::square_to_disk(8).expect("kernelized regions");
    let mut ratios = Vec::new();
    for (name, g0, g1) in [("gaussian->bimodal", n0, n1), ("square->disk", sq, disk)] {
        let mut rng = streams.stream(name);
        let starts: Vec<Point> = (0..256).map(|_| g0.sample_one(&mut rng)).collect();
        let report = convergence_study(&g0, &g1, &starts, &[16, 256], 2, &streams.child(name)).expect("study");
        let (d16, d256) = (report.deviation(16).expect("T=16"), report.deviation(256).expect("T=256"));
        ratios.push((name, d16, d256, d16 / d256));
    }
    let pass = ratios.iter().all(|r| r.3 >= 3.0);
    let detail = ratios
        .iter()
        .map(|(n, a, b, r)| format!("{n}: dev16 {a:.4} / dev256 {b:.4} = {r:.2}"))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome {
        pass,
        detail: format!("{detail} (need >= 3, 256 starts)"),
    }
}

fn slope(ts: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| (*t as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -cov / var
}

fn criterion_6() -> Outcome {
    let (g0, g1) = presets::normal_to_bimodal();
    let deblender = AnalyticDeblender::exact(g0, g1).expect("deblender");
    // Starts at evenly spaced interior quantiles of N(0, 1).
    let starts: Vec<Point> = (1..=32).map(|k| Point::scalar(-2.0 + 4.0 * k as f64 / 33.0)).collect();
    let endpoints = |schedule: Schedule, integrator: Integrator| -> Vec<Point> {
        let run = transport_batch(&deblender, &starts, schedule, VariantKind::D, integrator, &[]).expect("run");
        run.endpoints.into_iter().map(|p| p.expect("finite")).collect()
    };
    let reference = endpoints(Schedule::uniform(65_536).expect("schedule"), Integrator::Rk2);
    let ts = [8usize, 16, 32, 64, 128];
    let mean_err = |pts: Vec<Point>| -> f64 {
        pts.iter().zip(&reference).map(|(a, b)| a.distance(b)).sum::<f64>() / pts.len() as f64
    };
    let euler: Vec<f64> = ts
        .iter()
        .map(|&t| mean_err(endpoints(Schedule::uniform(t).expect("schedule"), Integrator::Euler)))
        .collect();
    let rk2: Vec<f64> = ts
        .iter()
        .map(|&t| mean_err(endpoints(Schedule::uniform(t).expect("schedule"), Integrator::Rk2)))
        .collect();
    let (se, sr) = (slope(&ts, &euler), slope(&ts, &rk2));
    Outcome {
        pass: (se - 1.0).abs() <= 0.3 && (sr - 2.0).abs() <= 0.3,
        detail: format!("log-log slope Euler {se:.3} (1.0 +- 0.3), RK2 {sr:.3} (2.0 +- 0.3), uniform schedule, T in 8..128"),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = SeedStreams::new(107).stream("ddim");
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(5..=60);
        let mut abar: Vec<f64> = (0..len).map(|_| rng.random_range(1e-3..1.0)).collect();
        abar.sort_by(|a, b| b.total_cmp(a));
        abar.dedup();
        let schedule = DdimSchedule::new(abar).expect("schedule");
        let dim = rng.random_range(1..=3);
        let (a, b, c, d): (f64, f64, f64, f64) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.1..0.1),
        );
        let predictor = move |x: &Point, k: usize| {
            Point::new(x.coords().iter().map(|v| a * (b * v + c).tanh() + d * k as f64).collect())
        };
        let start = Point::new((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect());
        let report = equivalence_check(&schedule, &predictor, &start).expect("check");
        worst = worst.max(report.max_deviation());
    }
    let mut residual: f64 = 0.0;
    for _ in 0..10_000 {
        let t = rng.random_range(1e-4..1.0);
        let next = rng.random_range(t..=1.0);
        residual = residual.max(beta_identity_residual(t, next).abs());
    }
    Outcome {
        pass: worst < 1e-9 && residual < 1e-12,
        detail: format!(
            "DDIM vs variant-b max deviation {worst:.3e} over 100 configs (tol 1e-9); beta identity residual {residual:.3e} (tol 1e-12)"
        ),
    }
}

fn criterion_8() -> Outcome {
    let h = 1e-5;
    let streams = SeedStreams::new(108);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let mut rng = streams.substream("gradcheck", case);
        let dim = rng.random_range(1..=3);
        let hidden = rng.random_range(1..=3);
        let width = rng.random_range(4..=12);
        let act = if case % 2 == 0 { Activation::Gelu } else { Activation::Relu };
        let mut net = Mlp::with_hidden(dim, hidden, width, act, &mut rng).expect("net");
        for l in net.layers_mut() {
            for b in l.bias.iter_mut() {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let batch: Vec<TrainingTriple> = (0..rng.random_range(1..=16))
            .map(|_| TrainingTriple {
                x0: Point::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()),
                x1: Point::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()),
                alpha: rng.random(),
            })
            .collect();
        let loss = if case % 4 == 3 { LossKind::L1 } else { LossKind::L2 };
        let value = |n: &Mlp| n.loss_and_grads(&batch, loss).expect("loss").0;
        let (_, grads) = net.loss_and_grads(&batch, loss).expect("grads");
        let mut compare = |fd: f64, an: f64| {
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
        };
        for k in 0..net.layers().len() {
            let (rows, cols) = net.layers()[k].weights.dim();
            for i in 0..rows {
                for j in 0..cols {
                    let mut p = net.clone();
                    p.layers_mut()[k].weights[[i, j]] += h;
                    let mut m = net.clone();
                    m.layers_mut()[k].weights[[i, j]] -= h;
                    compare((value(&p) - value(&m)) / (2.0 * h), grads.layers[k].weights[[i, j]]);
                }
                let mut p = net.clone();
                p.layers_mut()[k].bias[i] += h;
                let mut m = net.clone();
                m.layers_mut()[k].bias[i] -= h;
                compare((value(&p) - value(&m)) / (2.0 * h), grads.layers[k].bias[i]);
            }
        }
    }
    Outcome {
        pass: worst < 1e-4,
        detail: format!(
            "max relative gradient error {worst:.3e} over 20 nets, h = 1e-5 (tol 1e-4; magnitudes below 1e-6 compared absolutely)"
        ),
    }
}

/// The 5 x 64 network and optimizer settings of the 1D and 2D experiments.
fn paper_net(dim: usize, loss: LossKind, seed: u64, p0: &Density, p1: &Density) -> NeuralDeblender {
    let streams = SeedStreams::new(seed);
    let net = Mlp::with_hidden(dim, 5, 64, Activation::Relu, &mut streams.stream("init")).expect("net");
    let config = TrainConfig {
        loss,
        seed,
        ..TrainConfig::default()
    };
    assert_eq!((config.iterations, config.adam.learning_rate), (10_000, 1e-5));
    NeuralDeblender::new(train(net, p0, p1, &config).expect("training").net)
}

const W1_THRESHOLD_1D: f64 = 0.05;

fn criterion_9() -> Outcome {
    let streams = SeedStreams::new(109);
    let steps = 100;
    let snapshots = [20usize, 40, 60, 80, 100];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, (g0, g1)) in [
        ("normal->bimodal", presets::normal_to_bimodal()),
        ("bimodal->trimodal", presets::bimodal_to_trimodal()),
    ] {
        let (p0, p1) = (Density::Mixture(g0.clone()), Density::Mixture(g1.clone()));
        let schedule = Schedule::uniform(steps).expect("schedule");

        // (a) analytic-average sampler against blended references.
        let n = 100_000;
        let starts = p0.sample(n, &mut streams.child(name).stream("starts"));
        let exact = AnalyticDeblender::exact(g0, g1).expect("deblender");
        let run = transport_batch(&exact, &starts, schedule, VariantKind::D, Integrator::Euler, &snapshots)
            .expect("run");
        let mut worst_a: f64 = 0.0;
        for (step, states) in &run.snapshots {
            let alpha = schedule.alpha(*step);
            let samples: Vec<f64> = states.iter().map(|p| p.as_ref().expect("finite")[0]).collect();
            let mut rng = streams.child(name).substream("reference", *step as u64);
            let reference = first_axis(&blended_reference(&p0, &p1, alpha, n, &mut rng).expect("reference"));
            worst_a = worst_a.max(wasserstein1_1d(&samples, &reference).expect("w1"));
        }

        // (b) l2- and l1-trained networks at the end of the path.
        let m = 20_000;
        let net_starts = p0.sample(m, &mut streams.child(name).stream("net-starts"));
        let target = first_axis(&p1.sample(n, &mut streams.child(name).stream("target")));
        let endpoint_w1 = |d: &dyn Deblender| {
            let run = transport_batch(d, &net_starts, schedule, VariantKind::D, Integrator::Euler, &[]).expect("run");
            let end: Vec<f64> = run.endpoints.iter().map(|p| p.as_ref().expect("finite")[0]).collect();
            wasserstein1_1d(&end, &target).expect("w1")
        };
        let l2 = endpoint_w1(&paper_net(1, LossKind::L2, 91, &p0, &p1));
        let l1 = endpoint_w1(&paper_net(1, LossKind::L1, 92, &p0, &p1));
        pass &= worst_a < W1_THRESHOLD_1D && l2 < l1 && l1 > W1_THRESHOLD_1D;
        parts.push(format!(
            "{name}: analytic max W1 {worst_a:.4} at 5 alphas; net W1 at alpha=1 l2 {l2:.4} < l1 {l1:.4} > {W1_THRESHOLD_1D}"
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

/// Self-distance noise floors from `examples/calibrate_floors.rs`: the mean
/// sliced distance between independent reference sets of 10^4 points at
/// blend values 0.25, 0.5, 0.75 and 1.
const FLOOR_GAUSSIAN_TO_SCURVE: [f64; 4] = [0.01423, 0.01027, 0.00883, 0.01151];
const FLOOR_SWISS_ROLL_TO_SCURVE: [f64; 4] = [0.00705, 0.00698, 0.00935, 0.01170];
const FLOOR_FACTOR: f64 = 3.0;

fn criterion_10() -> Outcome {
    let streams = SeedStreams::new(110);
    let n = 10_000;
    let steps = 128;
    let snapshots = [32usize, 64, 96, 128];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p0, floors) in [
        ("gaussian->scurve", presets::standard_normal_2d(), FLOOR_GAUSSIAN_TO_SCURVE),
        ("swissroll->scurve", presets::swiss_roll(), FLOOR_SWISS_ROLL_TO_SCURVE),
    ] {
        let p1 = presets::scurve();
        let net = paper_net(2, LossKind::L2, 101, &p0, &p1);
        let starts = p0.sample(n, &mut streams.child(name).stream("starts"));
        let schedule = Schedule::uniform(steps).expect("schedule");
        let run = transport_batch(&net, &starts, schedule, VariantKind::D, Integrator::Euler, &snapshots).expect("run");
        let mut ratios = Vec::new();
        for (k, (step, states)) in run.snapshots.iter().enumerate() {
            let alpha = schedule.alpha(*step);
            let samples: Vec<Point> = states.iter().map(|p| p.clone().expect("finite")).collect();
            let mut rng = streams.child(name).substream("reference", *step as u64);
            let reference = blended_reference(&p0, &p1, alpha, n, &mut rng).expect("reference");
            let sw = sliced_wasserstein(&samples, &reference, 256, &mut streams.substream("directions", k as u64))
                .expect("sliced");
            pass &= sw < FLOOR_FACTOR * floors[k];
            ratios.push(format!("a={alpha}: {:.2}x", sw / floors[k]));
        }
        parts.push(format!("{name} [{}]", ratios.join(", ")));
    }
    Outcome {
        pass,
        detail: format!("sliced W / noise floor, 10^4 samples: {} (need < {FLOOR_FACTOR}x)", parts.join("; ")),
    }
}

#[test]
fn acceptance_criteria() {
    let secs = Duration::from_secs;
    let results = [
        run(1, secs(10), criterion_1),
        run(2, secs(10), criterion_2),
        run(3, secs(120), criterion_3),
        run(4, secs(120), criterion_4),
        run(5, secs(300), criterion_5),
        run(6, secs(60), criterion_6),
        run(7, secs(10), criterion_7),
        run(8, secs(60), criterion_8),
        run(9, secs(900), criterion_9),
        run(10, secs(1800), criterion_10),
    ];
    let failed: Vec<usize> = (1..=10).filter(|k| !results[k - 1]).collect();
    line(&format!("acceptance: {}/10 criteria pass", 10 - failed.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
