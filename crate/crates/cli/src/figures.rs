//! Figure reproductions. Each writes an SVG and the CSV it was drawn from.

use std::fmt::Write as _;

use clap::ValueEnum;
use iadb::eval::{blended_reference, checkerboard_labels, first_axis, Histogram1d};
use iadb::nn::NeuralDeblender;
use iadb::samplers::{sample_deterministic, sample_stochastic, transport_batch};
use iadb::{pointio, AnalyticDeblender, Deblender, Integrator, MedianDeblender, Point, Schedule, VariantKind};
use rand::Rng as _;
use rayon::prelude::*;

use crate::commands::{mixtures, Run};
use crate::error::CliError;
use crate::svg::{padded_range, Panel, Svg, PALETTE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Stochastic mapping of a 2D density, colored by source cell.
    Fig4,
    /// Deterministic warp of a point set.
    Fig5,
    /// Stochastic path bundles against the deterministic path (1D).
    Fig6,
    /// Histogram strips for analytic and trained deblenders (1D).
    Fig8,
    /// Trained-network intermediates for a 2D pair.
    Fig9,
    /// Same as `fig9`, for a second 2D pair.
    Fig10,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Fig10 => "fig10",
        }
    }
}

const PANEL: f64 = 260.0;
const MARGIN: f64 = 40.0;

fn panel_at(col: usize, row: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Panel {
    Panel {
        x: MARGIN + col as f64 * (PANEL + MARGIN),
        y: MARGIN + row as f64 * (PANEL + MARGIN),
        w: PANEL,
        h: PANEL,
        x_range,
        y_range,
    }
}

fn canvas(cols: usize, rows: usize) -> Svg {
    Svg::new(
        MARGIN + cols as f64 * (PANEL + MARGIN),
        MARGIN + rows as f64 * (PANEL + MARGIN),
    )
}

fn pairs(points: &[Point]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p[0], p[1])).collect()
}

fn require_dim(run: &Run, dim: usize, fig: Figure) -> Result<(iadb::Density, iadb::Density), CliError> {
    let (p0, p1) = run.densities()?;
    if p0.dim() != dim {
        return Err(CliError::Config(format!(
            "{} needs {dim}D densities, got {}D",
            fig.name(),
            p0.dim()
        )));
    }
    Ok((p0, p1))
}

/// Nearest schedule step to each requested blend value.
fn snapshot_steps(schedule: Schedule, alphas: &[f64]) -> Vec<usize> {
    let grid = schedule.alphas();
    alphas
        .iter()
        .map(|&a| {
            (0..grid.len())
                .min_by(|&i, &j| (grid[i] - a).abs().total_cmp(&(grid[j] - a).abs()))
                .expect("non-empty schedule")
        })
        .collect()
}

pub fn run_figure(run: &Run, fig: Figure) -> Result<(), CliError> {
    let (svg, csv) = match fig {
        Figure::Fig4 => fig4(run)?,
        Figure::Fig5 => fig5(run)?,
        Figure::Fig6 => fig6(run)?,
        Figure::Fig8 => fig8(run)?,
        Figure::Fig9 | Figure::Fig10 => net_intermediates(run, fig)?,
    };
    let svg_path = run.write(&format!("{}.svg", fig.name()), &svg)?;
    run.write(&format!("{}.csv", fig.name()), &csv)?;
    println!("wrote {}", svg_path.display());
    Ok(())
}

fn fig4(run: &Run) -> Result<(String, String), CliError> {
    let (p0, p1) = require_dim(run, 2, Figure::Fig4)?;
    let (g0, g1) = mixtures(&p0, &p1, "fig4")?;
    let f = &run.config.figure;
    run.start()?;
    let streams = run.streams();
    let starts = p0.sample(f.count, &mut streams.stream("fig4-starts"));
    let labels = checkerboard_labels(&starts, f.cells.max(1))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut csv = String::from("steps,label,source_0,source_1,endpoint_0,endpoint_1\n");
    let mut svg = canvas(f.mapping_steps.len(), 1);
    let range = padded_range(starts.iter().flat_map(|p| p.coords().to_vec()));
    for (col, &steps) in f.mapping_steps.iter().enumerate() {
        let schedule = Schedule::uniform(steps).map_err(|e| CliError::Config(e.to_string()))?;
        let label = format!("fig4-T{steps}");
        let ends: Vec<Point> = starts
            .par_iter()
            .enumerate()
            .map(|(i, x0)| {
                let mut rng = streams.substream(&label, i as u64);
                sample_stochastic(&g0, &g1, x0, schedule, &mut rng)
                    .map(|tr| tr.endpoint().expect("non-empty").clone())
            })
            .collect::<Result<_, _>>()?;
        let panel = panel_at(col, 0, range, range);
        svg.frame(&panel, &format!("stochastic mapping, T = {steps}"));
        for class in 0..2u8 {
            let pts: Vec<(f64, f64)> = ends
                .iter()
                .zip(&labels)
                .filter(|(_, l)| l.label == class)
                .map(|(p, _)| (p[0], p[1]))
                .collect();
            svg.scatter(&panel, &pts, PALETTE[class as usize], 1.2);
        }
        for ((x0, e), l) in starts.iter().zip(&ends).zip(&labels) {
            let _ = writeln!(csv, "{steps},{},{},{},{},{}", l.label, x0[0], x0[1], e[0], e[1]);
        }
    }
    Ok((svg.finish(), csv))
}

fn fig5(run: &Run) -> Result<(String, String), CliError> {
    let (p0, p1) = require_dim(run, 2, Figure::Fig5)?;
    let f = &run.config.figure;
    let s = &run.config.sample;
    let (schedule, variant, integrator) = (s.schedule()?, s.variant()?, s.integrator()?);
    let points = match &f.points {
        Some(path) => pointio::read_points(path)?,
        None => jittered_grid(&p0, f.count, &mut run.streams().stream("fig5-grid")),
    };
    if points.iter().any(|p| p.dim() != 2) {
        return Err(CliError::Input("fig5 needs 2D input points".into()));
    }
    let deblender = run.deblender(&p0, &p1)?;
    run.start()?;
    let warped = iadb::samplers::warp_parallel(&points, deblender.as_ref(), schedule, variant, integrator, 256)?;
    let mut csv = String::from("x0,x1,warped_0,warped_1\n");
    for (a, b) in points.iter().zip(&warped) {
        let _ = writeln!(csv, "{},{},{},{}", a[0], a[1], b[0], b[1]);
    }
    let mut svg = canvas(2, 1);
    let range = padded_range(points.iter().chain(&warped).flat_map(|p| p.coords().to_vec()));
    let left = panel_at(0, 0, range, range);
    svg.frame(&left, "input points");
    svg.scatter(&left, &pairs(&points), PALETTE[0], 1.2);
    let right = panel_at(1, 0, range, range);
    svg.frame(&right, &format!("warped, T = {}", schedule.steps()));
    svg.scatter(&right, &pairs(&warped), PALETTE[1], 1.2);
    Ok((svg.finish(), csv))
}

/// One uniform point per cell of a square grid over the bounding box of
/// `density`, `count` cells rounded down to a square.
fn jittered_grid(density: &iadb::Density, count: usize, rng: &mut iadb::Rng) -> Vec<Point> {
    let (lo, hi) = density.bounding_box();
    let side = (count as f64).sqrt().floor() as usize;
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let u = (i as f64 + rng.random::<f64>()) / side as f64;
            let v = (j as f64 + rng.random::<f64>()) / side as f64;
            out.push(Point::from([lo[0] + u * (hi[0] - lo[0]), lo[1] + v * (hi[1] - lo[1])]));
        }
    }
    out
}

fn fig6(run: &Run) -> Result<(String, String), CliError> {
    let (p0, p1) = require_dim(run, 1, Figure::Fig6)?;
    let (g0, g1) = mixtures(&p0, &p1, "fig6")?;
    let f = &run.config.figure;
    let deblender = AnalyticDeblender::exact(g0.clone().into_owned(), g1.clone().into_owned())?;
    run.start()?;
    let streams = run.streams();
    let x0 = Point::scalar(f.start);
    let mut csv = String::from("steps,path,kind,alpha,x\n");
    let mut bundles = Vec::new();
    for &steps in &f.path_steps {
        let schedule = Schedule::uniform(steps).map_err(|e| CliError::Config(e.to_string()))?;
        let det = sample_deterministic(&deblender, &x0, schedule, VariantKind::A, Integrator::Euler)?;
        let mut paths = Vec::with_capacity(f.paths);
        for k in 0..f.paths {
            let mut rng = streams.substream(&format!("fig6-T{steps}"), k as u64);
            paths.push(sample_stochastic(&g0, &g1, &x0, schedule, &mut rng)?);
        }
        for (k, tr) in paths.iter().enumerate() {
            for (a, x) in &tr.states {
                let _ = writeln!(csv, "{steps},{k},stochastic,{a},{}", x[0]);
            }
        }
        for (a, x) in &det.states {
            let _ = writeln!(csv, "{steps},{},deterministic,{a},{}", f.paths, x[0]);
        }
        bundles.push((steps, paths, det));
    }
    let y_range = padded_range(
        bundles
            .iter()
            .flat_map(|(_, paths, det)| paths.iter().chain(std::iter::once(det)))
            .flat_map(|tr| tr.states.iter().map(|(_, x)| x[0]).collect::<Vec<_>>()),
    );
    let mut svg = canvas(bundles.len(), 1);
    for (col, (steps, paths, det)) in bundles.iter().enumerate() {
        let panel = panel_at(col, 0, (0.0, 1.0), y_range);
        svg.frame(&panel, &format!("T = {steps}: stochastic (grey), deterministic"));
        for tr in paths {
            let line: Vec<(f64, f64)> = tr.states.iter().map(|(a, x)| (*a, x[0])).collect();
            svg.polyline(&panel, &line, "#999999", 0.8);
        }
        let line: Vec<(f64, f64)> = det.states.iter().map(|(a, x)| (*a, x[0])).collect();
        svg.polyline(&panel, &line, PALETTE[1], 2.0);
    }
    Ok((svg.finish(), csv))
}

fn fig8(run: &Run) -> Result<(String, String), CliError> {
    let (p0, p1) = require_dim(run, 1, Figure::Fig8)?;
    let (g0, g1) = mixtures(&p0, &p1, "fig8")?;
    let f = &run.config.figure;
    let s = &run.config.sample;
    let (schedule, variant, integrator) = (s.schedule()?, s.variant()?, s.integrator()?);
    let producer = "iadb train (once with loss = \"l2\" and once with loss = \"l1\")";
    let l2 = NeuralDeblender::new(run.load_net(&f.l2_weights, producer)?);
    let l1 = NeuralDeblender::new(run.load_net(&f.l1_weights, producer)?);
    let average = AnalyticDeblender::exact(g0.clone().into_owned(), g1.clone().into_owned())?;
    let median = MedianDeblender::new(g0.into_owned(), g1.into_owned())?;
    run.start()?;
    let streams = run.streams();
    let starts = p0.sample(f.count, &mut streams.stream("fig8-starts"));
    let steps = snapshot_steps(schedule, &f.alphas);

    let mut rows: Vec<(&str, Vec<Vec<f64>>)> = Vec::new();
    let reference: Vec<Vec<f64>> = f
        .alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let mut rng = streams.substream("fig8-reference", k as u64);
            blended_reference(&p0, &p1, a, f.count, &mut rng).map(|pts| first_axis(&pts))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    rows.push(("reference", reference));
    let deblenders: [(&str, &dyn Deblender); 4] = [
        ("analytic average", &average),
        ("l2 network", &l2),
        ("analytic median", &median),
        ("l1 network", &l1),
    ];
    for (name, d) in deblenders {
        let batch = transport_batch(d, &starts, schedule, variant, integrator, &steps)?;
        if let Some(fail) = batch.failures.first() {
            return Err(CliError::Numerical(format!("{name}: point {} failed ({})", fail.index, fail.error)));
        }
        let strip = steps
            .iter()
            .map(|t| {
                let snap = &batch.snapshots.iter().find(|(s, _)| s == t).expect("requested").1;
                snap.iter().map(|p| p.as_ref().expect("no failures")[0]).collect()
            })
            .collect();
        rows.push((name, strip));
    }

    let (lo, hi) = padded_range(rows[0].1.iter().flatten().copied());
    let mut csv = String::from("row,alpha,bin_center,count\n");
    let mut hists = Vec::new();
    for (name, strip) in &rows {
        let mut row = Vec::new();
        for (a, values) in f.alphas.iter().zip(strip) {
            let h = Histogram1d::from_samples(lo, hi, f.bins.max(1), values)
                .map_err(|e| CliError::Config(e.to_string()))?;
            for (k, c) in h.counts.iter().enumerate() {
                let _ = writeln!(csv, "{name},{a},{},{c}", h.bin_center(k));
            }
            row.push(h);
        }
        hists.push(row);
    }
    let peak = hists.iter().flatten().flat_map(|h| h.counts.iter().copied()).max().unwrap_or(1).max(1) as f64;
    let mut svg = canvas(f.alphas.len(), rows.len());
    for (r, ((name, _), row)) in rows.iter().zip(&hists).enumerate() {
        for (c, (a, h)) in f.alphas.iter().zip(row).enumerate() {
            let panel = panel_at(c, r, (lo, hi), (0.0, peak * 1.05));
            svg.frame(&panel, &format!("{name}, alpha = {a}"));
            let w = h.bin_width();
            let bars: Vec<(f64, f64, f64)> = h
                .counts
                .iter()
                .enumerate()
                .map(|(k, &n)| (h.bin_center(k) - w / 2.0, h.bin_center(k) + w / 2.0, n as f64))
                .collect();
            svg.bars(&panel, &bars, PALETTE[r % PALETTE.len()]);
        }
    }
    Ok((svg.finish(), csv))
}

fn net_intermediates(run: &Run, fig: Figure) -> Result<(String, String), CliError> {
    let (p0, p1) = require_dim(run, 2, fig)?;
    let f = &run.config.figure;
    let s = &run.config.sample;
    let (schedule, variant, integrator) = (s.schedule()?, s.variant()?, s.integrator()?);
    let deblender = run.deblender(&p0, &p1)?;
    run.start()?;
    let streams = run.streams();
    let starts = p0.sample(f.count, &mut streams.stream(&format!("{}-starts", fig.name())));
    let steps = snapshot_steps(schedule, &f.alphas);
    let batch = transport_batch(deblender.as_ref(), &starts, schedule, variant, integrator, &steps)?;
    if let Some(fail) = batch.failures.first() {
        return Err(CliError::Numerical(format!("point {} failed ({})", fail.index, fail.error)));
    }
    let mut rows: Vec<(&str, Vec<Vec<Point>>)> = Vec::new();
    let reference = f
        .alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let mut rng = streams.substream(&format!("{}-reference", fig.name()), k as u64);
            blended_reference(&p0, &p1, a, f.count, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    rows.push(("reference", reference));
    let sampled = steps
        .iter()
        .map(|t| {
            let snap = &batch.snapshots.iter().find(|(s, _)| s == t).expect("requested").1;
            snap.iter().map(|p| p.clone().expect("no failures")).collect()
        })
        .collect();
    rows.push(("sampled", sampled));

    let range = padded_range(rows.iter().flat_map(|(_, r)| r.iter().flatten()).flat_map(|p| p.coords().to_vec()));
    let mut csv = String::from("row,alpha,x0,x1\n");
    let mut svg = canvas(f.alphas.len(), rows.len());
    for (r, (name, strip)) in rows.iter().enumerate() {
        for (c, (a, pts)) in f.alphas.iter().zip(strip).enumerate() {
            for p in pts {
                let _ = writeln!(csv, "{name},{a},{},{}", p[0], p[1]);
            }
            let panel = panel_at(c, r, range, range);
            svg.frame(&panel, &format!("{name}, alpha = {a}"));
            svg.scatter(&panel, &pairs(pts), PALETTE[r % PALETTE.len()], 0.8);
        }
    }
    Ok((svg.finish(), csv))
}
