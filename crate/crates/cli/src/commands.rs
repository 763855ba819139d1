use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use iadb::ddim::{beta, equivalence_check, rescale, unscale, DdimSchedule, EQUIVALENCE_TOLERANCE};
use iadb::densities::{Density, GaussianMixture};
use iadb::eval::{blended_reference, convergence_study, first_axis, sliced_wasserstein, wasserstein1_1d};
use iadb::nn::{load_weights, save_weights, train, Mlp, NeuralDeblender};
use iadb::oracle::analytic_posterior_stats;
use iadb::samplers::{transport_batch, warp_parallel, Trajectory};
use iadb::{pointio, AnalyticDeblender, Deblender, MedianDeblender, MonteCarloDeblender, Point, SeedStreams};

use crate::config::RunConfig;
use crate::error::CliError;

/// A resolved run: configuration, where relative inputs live, and where
/// outputs go.
pub struct Run {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Run {
    pub fn out(&self) -> &Path {
        &self.config.out
    }

    pub fn streams(&self) -> SeedStreams {
        SeedStreams::new(self.config.seed)
    }

    /// Creates the output directory and writes the resolved configuration.
    pub fn start(&self) -> Result<(), CliError> {
        fs::create_dir_all(self.out())?;
        fs::write(self.out().join("manifest.toml"), self.config.to_manifest())?;
        Ok(())
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out().join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }

    pub fn densities(&self) -> Result<(Density, Density), CliError> {
        let p0 = self.config.p0_spec()?.build(&self.base)?;
        let p1 = self.config.p1_spec()?.build(&self.base)?;
        if p0.dim() != p1.dim() {
            return Err(CliError::Config(format!(
                "[p0] is {}-dimensional but [p1] is {}-dimensional",
                p0.dim(),
                p1.dim()
            )));
        }
        Ok((p0, p1))
    }

    pub fn weights_path(&self, file: &Path) -> PathBuf {
        self.out().join(file)
    }

    pub fn load_net(&self, file: &Path, producer: &str) -> Result<Mlp, CliError> {
        let path = self.weights_path(file);
        if !path.exists() {
            return Err(CliError::Input(format!(
                "weight file {} not found; produce it with `{producer}`",
                path.display()
            )));
        }
        Ok(load_weights(&path)?)
    }

    /// The deblender named in `[sample] deblender`.
    pub fn deblender(&self, p0: &Density, p1: &Density) -> Result<Box<dyn Deblender>, CliError> {
        let kind = self.config.sample.deblender.to_ascii_lowercase();
        Ok(match kind.as_str() {
            "analytic" => {
                let (g0, g1) = mixtures(p0, p1, "analytic")?;
                let d = AnalyticDeblender::new(g0.into_owned(), g1.into_owned())?;
                if let Some(s) = d.subsampling() {
                    println!(
                        "note: analytic deblender keeps {}x{} of {}x{} components",
                        s.kept.0, s.kept.1, s.original.0, s.original.1
                    );
                }
                Box::new(d)
            }
            "median" => {
                let (g0, g1) = mixtures(p0, p1, "median")?;
                Box::new(MedianDeblender::new(g0.into_owned(), g1.into_owned())?)
            }
            "mc" => Box::new(MonteCarloDeblender::new(
                p0.clone(),
                p1.clone(),
                self.config.sample.mc_samples,
                self.streams().stream("monte-carlo"),
            )?),
            "net" => {
                let file = self
                    .config
                    .sample
                    .weights
                    .clone()
                    .unwrap_or_else(|| self.config.train.weights.clone());
                let net = self.load_net(&file, "iadb train")?;
                if net.dim() != p0.dim() {
                    return Err(CliError::Input(format!(
                        "network deblends {}-dimensional points, densities are {}-dimensional",
                        net.dim(),
                        p0.dim()
                    )));
                }
                Box::new(NeuralDeblender::new(net))
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown deblender '{other}' (analytic, median, mc or net)"
                )))
            }
        })
    }
}

pub fn mixtures<'a>(
    p0: &'a Density,
    p1: &'a Density,
    what: &str,
) -> Result<(Cow<'a, GaussianMixture>, Cow<'a, GaussianMixture>), CliError> {
    let need = || {
        CliError::Config(format!(
            "{what} needs Gaussian-mixture or point densities; give uniform regions a kernel_grid"
        ))
    };
    Ok((p0.as_gaussian_mixture().ok_or_else(need)?, p1.as_gaussian_mixture().ok_or_else(need)?))
}

fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn train_cmd(run: &Run) -> Result<(), CliError> {
    let (p0, p1) = run.densities()?;
    let t = &run.config.train;
    let config = t.to_train_config(run.config.seed)?;
    let net = Mlp::with_hidden(
        p0.dim(),
        t.hidden_layers,
        t.width,
        t.activation()?,
        &mut run.streams().stream("init"),
    )?;
    run.start()?;
    let outcome = train(net, &p0, &p1, &config)?;
    let weights = run.weights_path(&t.weights);
    if let Some(parent) = weights.parent() {
        fs::create_dir_all(parent)?;
    }
    save_weights(&outcome.net, &weights)?;
    run.write("loss.csv", &outcome.loss_csv())?;
    let n = outcome.losses.len();
    let window = (n / 10).max(1);
    let head: f64 = outcome.losses[..window].iter().sum::<f64>() / window as f64;
    let tail: f64 = outcome.losses[n - window..].iter().sum::<f64>() / window as f64;
    println!(
        "trained {} iterations ({} loss): mean loss {head:.5} over the first {window}, {tail:.5} over the last {window}",
        n, config.loss
    );
    println!("weights: {}", weights.display());
    Ok(())
}

pub fn generate_cmd(run: &Run) -> Result<(), CliError> {
    let (p0, p1) = run.densities()?;
    let s = &run.config.sample;
    let (schedule, variant, integrator) = (s.schedule()?, s.variant()?, s.integrator()?);
    let deblender = run.deblender(&p0, &p1)?;
    run.start()?;
    let starts = p0.sample(s.count, &mut run.streams().stream("generate-starts"));
    let snapshots: Vec<usize> = if s.trajectories {
        (0..=schedule.steps()).collect()
    } else {
        Vec::new()
    };
    let result = transport_batch(deblender.as_ref(), &starts, schedule, variant, integrator, &snapshots)?;
    if let Some(f) = result.failures.first() {
        return Err(CliError::Numerical(format!(
            "{} of {} points failed; first: point {} ({})",
            result.failures.len(),
            starts.len(),
            f.index,
            f.error
        )));
    }
    let d = p0.dim();
    let mut csv = (0..d)
        .map(|i| format!("source_{i}"))
        .chain((0..d).map(|i| format!("endpoint_{i}")))
        .collect::<Vec<_>>()
        .join(",");
    csv.push('\n');
    for (x0, end) in starts.iter().zip(&result.endpoints) {
        let end = end.as_ref().expect("no failures");
        csv.push_str(&csv_row(x0.coords().iter().chain(end.coords()).copied()));
        csv.push('\n');
    }
    run.write("endpoints.csv", &csv)?;
    if s.trajectories {
        let dir = run.out().join("trajectories");
        fs::create_dir_all(&dir)?;
        for i in 0..starts.len() {
            let states = result
                .snapshots
                .iter()
                .map(|(t, pts)| (schedule.alpha(*t), pts[i].clone().expect("no failures")))
                .collect();
            fs::write(dir.join(format!("trajectory_{i:06}.csv")), Trajectory { states }.to_csv())?;
        }
    }
    println!(
        "generated {} samples ({} schedule, T = {}, variant {variant}, {integrator})",
        starts.len(),
        schedule.name(),
        schedule.steps()
    );
    Ok(())
}

pub fn converge_cmd(run: &Run) -> Result<(), CliError> {
    let (p0, p1) = run.densities()?;
    let (g0, g1) = mixtures(&p0, &p1, "converge")?;
    let c = &run.config.converge;
    run.start()?;
    let streams = run.streams();
    let starts = p0.sample(c.starts, &mut streams.stream("converge-starts"));
    let report = convergence_study(&g0, &g1, &starts, &c.steps, c.chains, &streams.child("converge"))?;
    run.write("convergence.csv", &report.to_csv())?;
    for r in &report.records {
        println!("T = {:>6}: mean endpoint deviation {:.6}", r.steps, r.mean_endpoint_deviation);
    }
    Ok(())
}

pub fn ddim_check_cmd(run: &Run) -> Result<(), CliError> {
    let (p0, p1) = run.densities()?;
    let (g0, g1) = mixtures(&p0, &p1, "ddim-check")?;
    let d = &run.config.ddim;
    let schedule = if d.alphas_bar.is_empty() {
        DdimSchedule::geometric(d.first, d.last, d.steps)
    } else {
        DdimSchedule::new(d.alphas_bar.clone())
    }
    .map_err(|e| CliError::Config(format!("[ddim] {e}")))?;
    run.start()?;
    let ab = schedule.alphas_bar().to_vec();
    let noisiest = ab[ab.len() - 1];
    let streams = run.streams();
    // ε̄ is the posterior mean of the source sample at the matching blend
    // parameter.
    let predictor = |x: &Point, k: usize| -> Point {
        let frame = rescale(x, ab[k]).expect("schedule values are in (0, 1]");
        analytic_posterior_stats(&g0, &g1, &frame.y_iadb, beta(ab[k]))
            .expect("dimensions checked")
            .xbar0
    };
    let ys = blended_reference(&p0, &p1, beta(noisiest), d.starts, &mut streams.stream("ddim-starts"))?;
    let mut per_step = vec![0.0f64; ab.len()];
    for y in &ys {
        let x = unscale(y, noisiest).expect("schedule values are in (0, 1]");
        let report = equivalence_check(&schedule, &predictor, &x).map_err(|e| CliError::Config(e.to_string()))?;
        for (step, dev) in report.deviations {
            per_step[step] = per_step[step].max(dev);
        }
    }
    let mut csv = String::from("step,max_abs_deviation\n");
    for (step, dev) in per_step.iter().enumerate() {
        csv.push_str(&format!("{step},{dev}\n"));
    }
    run.write("ddim_deviation.csv", &csv)?;
    let max = per_step.iter().copied().fold(0.0, f64::max);
    if !max.is_finite() {
        return Err(CliError::Numerical("non-finite deviation".into()));
    }
    if max < EQUIVALENCE_TOLERANCE {
        println!(
            "PASS ddim-check: max deviation {max:.3e} < {EQUIVALENCE_TOLERANCE:e} over {} steps and {} starts",
            ab.len() - 1,
            ys.len()
        );
        Ok(())
    } else {
        println!("FAIL ddim-check: max deviation {max:.3e} >= {EQUIVALENCE_TOLERANCE:e}");
        Err(CliError::Check(format!("DDIM and blend chains differ by {max:.3e}")))
    }
}

pub fn warp_cmd(run: &Run, input: &Path) -> Result<(), CliError> {
    let (p0, p1) = run.densities()?;
    let s = &run.config.sample;
    let (schedule, variant, integrator) = (s.schedule()?, s.variant()?, s.integrator()?);
    let points = pointio::read_points(input)?;
    if let Some(p) = points.iter().find(|p| p.dim() != p0.dim()) {
        return Err(CliError::Input(format!(
            "{}: point has {} coordinates, densities are {}-dimensional",
            input.display(),
            p.dim(),
            p0.dim()
        )));
    }
    let deblender = run.deblender(&p0, &p1)?;
    run.start()?;
    let warped = warp_parallel(&points, deblender.as_ref(), schedule, variant, integrator, 256)?;
    pointio::write_points(&run.out().join("warped.csv"), &warped)?;
    let rms = if points.is_empty() {
        0.0
    } else {
        (points.iter().zip(&warped).map(|(a, b)| a.distance(b).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
    };
    println!("warped {} points; RMS displacement {rms:.6}", points.len());
    Ok(())
}

pub fn eval_cmd(run: &Run, a: &Path, b: &Path) -> Result<(), CliError> {
    let (pa, pb) = (pointio::read_points(a)?, pointio::read_points(b)?);
    let dim = pa.first().or(pb.first()).map_or(0, Point::dim);
    if pa.iter().chain(&pb).any(|p| p.dim() != dim) {
        return Err(CliError::Input("sample files have different dimensions".into()));
    }
    run.start()?;
    let (metric, value) = match dim {
        1 => ("w1", wasserstein1_1d(&first_axis(&pa), &first_axis(&pb))?),
        2 => (
            "sliced_w1_256",
            sliced_wasserstein(&pa, &pb, 256, &mut run.streams().stream("eval-directions"))?,
        ),
        _ => {
            return Err(CliError::Input(format!(
                "eval supports 1D and 2D samples (got {dim}D)"
            )))
        }
    };
    run.write("eval.csv", &format!("metric,value\n{metric},{value}\n"))?;
    println!("{metric} = {value}");
    Ok(())
}
