//! Bridge between the DDIM update and the variant-b blend update.
//!
//! DDIM writes a noisy sample as `x = √ᾱ x_data + √(1-ᾱ) ε`. Dividing by
//! `√ᾱ + √(1-ᾱ)` turns it into a blend
//!
//! ```text
//! y = x / (√ᾱ + √(1-ᾱ)) = β x_data + (1 - β) ε,    β = √ᾱ / (√ᾱ + √(1-ᾱ))
//! ```
//!
//! so ε plays the role of the source sample and β the blend parameter.
//!
//! Index conventions differ between the two: a [`DdimSchedule`] stores ᾱ in
//! diffusion-time order (index 0 is the cleanest, ᾱ decreasing with the
//! index), while generation walks the indices backwards. Along generation
//! ᾱ grows, and so does β, which is the blend parameter's usual direction.
//!
//! | generation step | DDIM            | blend          |
//! |-----------------|-----------------|----------------|
//! | from            | `ᾱ[k]`          | `β(ᾱ[k])`      |
//! | to              | `ᾱ[k-1] > ᾱ[k]` | `β(ᾱ[k-1])`    |

use thiserror::Error;

use crate::oracle::DeblendStats;
use crate::point::Point;
use crate::samplers::{step_variant, VariantKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdimError {
    #[error("alpha_bar {0} outside (0, 1]")]
    InvalidAlphaBar(f64),
    #[error("alpha_bar schedule must be strictly decreasing (index {0})")]
    NotDecreasing(usize),
    #[error("alpha_bar schedule needs at least 2 entries, got {0}")]
    TooShort(usize),
}

fn check_alpha_bar(ab: f64) -> Result<(), DdimError> {
    if !(ab > 0.0 && ab <= 1.0) {
        return Err(DdimError::InvalidAlphaBar(ab));
    }
    Ok(())
}

/// Cumulative-product noise schedule `ᾱ_t`, in diffusion-time order.
#[derive(Debug, Clone, PartialEq)]
pub struct DdimSchedule {
    alphas_bar: Vec<f64>,
}

impl DdimSchedule {
    pub fn new(alphas_bar: Vec<f64>) -> Result<Self, DdimError> {
        if alphas_bar.len() < 2 {
            return Err(DdimError::TooShort(alphas_bar.len()));
        }
        for (k, ab) in alphas_bar.iter().enumerate() {
            check_alpha_bar(*ab)?;
            if k > 0 && *ab >= alphas_bar[k - 1] {
                return Err(DdimError::NotDecreasing(k));
            }
        }
        Ok(DdimSchedule { alphas_bar })
    }

    /// `steps + 1` values decaying geometrically from `first` to `last`.
    pub fn geometric(first: f64, last: f64, steps: usize) -> Result<Self, DdimError> {
        let ratio = (last / first).powf(1.0 / steps.max(1) as f64);
        Self::new((0..=steps).map(|k| first * ratio.powi(k as i32)).collect())
    }

    pub fn alphas_bar(&self) -> &[f64] {
        &self.alphas_bar
    }

    pub fn len(&self) -> usize {
        self.alphas_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas_bar.is_empty()
    }
}

/// A DDIM state together with its blend-coordinate view.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeFrame {
    pub x_ddim: Point,
    pub y_iadb: Point,
    pub beta: f64,
}

fn scale(alpha_bar: f64) -> f64 {
    alpha_bar.sqrt() + (1.0 - alpha_bar).sqrt()
}

/// Blend parameter matching `ᾱ`.
pub fn beta(alpha_bar: f64) -> f64 {
    alpha_bar.sqrt() / scale(alpha_bar)
}

pub fn rescale(x: &Point, alpha_bar: f64) -> Result<BridgeFrame, DdimError> {
    check_alpha_bar(alpha_bar)?;
    let s = scale(alpha_bar);
    Ok(BridgeFrame {
        x_ddim: x.clone(),
        y_iadb: Point::new(x.coords().iter().map(|v| v / s).collect()),
        beta: beta(alpha_bar),
    })
}

/// Inverse of [`rescale`]: DDIM coordinates of a blend-coordinate point.
pub fn unscale(y: &Point, alpha_bar: f64) -> Result<Point, DdimError> {
    check_alpha_bar(alpha_bar)?;
    let s = scale(alpha_bar);
    Ok(Point::new(y.coords().iter().map(|v| v * s).collect()))
}

/// Deterministic DDIM update:
/// `x'/√ᾱ' = x/√ᾱ + (√((1-ᾱ')/ᾱ') - √((1-ᾱ)/ᾱ)) ε`.
pub fn ddim_step(
    x_t: &Point,
    alpha_bar_t: f64,
    alpha_bar_next: f64,
    eps_prediction: &Point,
) -> Result<Point, DdimError> {
    check_alpha_bar(alpha_bar_t)?;
    check_alpha_bar(alpha_bar_next)?;
    let coef = ((1.0 - alpha_bar_next) / alpha_bar_next).sqrt()
        - ((1.0 - alpha_bar_t) / alpha_bar_t).sqrt();
    let inv_t = 1.0 / alpha_bar_t.sqrt();
    let s_next = alpha_bar_next.sqrt();
    Ok(Point::new(
        x_t.coords()
            .iter()
            .zip(eps_prediction.coords())
            .map(|(x, e)| s_next * (x * inv_t + coef * e))
            .collect(),
    ))
}

/// `β'β(√((1-ᾱ')/ᾱ') - √((1-ᾱ)/ᾱ)) - (β - β')`; zero in exact arithmetic.
pub fn beta_identity_residual(alpha_bar_t: f64, alpha_bar_next: f64) -> f64 {
    let (b, bn) = (beta(alpha_bar_t), beta(alpha_bar_next));
    let coef = ((1.0 - alpha_bar_next) / alpha_bar_next).sqrt()
        - ((1.0 - alpha_bar_t) / alpha_bar_t).sqrt();
    bn * b * coef - (b - bn)
}

/// Per-step comparison of the two chains.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// `(generation step, max |y_ddim - y_blend|)`, step 0 being the start.
    pub deviations: Vec<(usize, f64)>,
}

pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

impl EquivalenceReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().map(|d| d.1).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() < EQUIVALENCE_TOLERANCE
    }

    /// CSV with columns `step,max_abs_deviation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,max_abs_deviation\n");
        for (step, dev) in &self.deviations {
            out.push_str(&format!("{step},{dev}\n"));
        }
        out
    }
}

/// Runs the DDIM chain and the variant-b chain in blend coordinates from the
/// same start, feeding both the same ε predictor (`eps_fn(x_ddim, index)`),
/// and records the largest coordinate gap after each step.
pub fn equivalence_check(
    schedule: &DdimSchedule,
    eps_fn: &dyn Fn(&Point, usize) -> Point,
    x_start: &Point,
) -> Result<EquivalenceReport, DdimError> {
    let ab = schedule.alphas_bar();
    let last = ab.len() - 1;
    let mut x = x_start.clone();
    let mut y = rescale(x_start, ab[last])?.y_iadb;
    let mut deviations = vec![(0, 0.0)];
    for (step, k) in (1..=last).rev().enumerate() {
        let (ab_t, ab_next) = (ab[k], ab[k - 1]);

        let eps = eps_fn(&x, k);
        x = ddim_step(&x, ab_t, ab_next, &eps)?;

        // The blend chain sees the predictor through the change of
        // coordinates; ε is the source-side expectation.
        let eps_y = eps_fn(&unscale(&y, ab_t)?, k);
        let (b_t, b_next) = (beta(ab_t), beta(ab_next));
        let xbar1 = y.lincomb(1.0 / b_t, &eps_y, -(1.0 - b_t) / b_t);
        let stats = DeblendStats::from_means(eps_y, xbar1);
        y = step_variant(VariantKind::B, &y, b_t, b_next, &stats)
            .expect("beta is positive for alpha_bar in (0, 1]");

        let y_from_ddim = rescale(&x, ab_next)?.y_iadb;
        deviations.push((step + 1, y_from_ddim.max_abs_diff(&y)));
    }
    Ok(EquivalenceReport { deviations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_at_clean_end_is_identity() {
        let f = rescale(&Point::from([0.3, -2.0]), 1.0).unwrap();
        assert_eq!(f.y_iadb, Point::from([0.3, -2.0]));
        assert_eq!(f.beta, 1.0);
    }

    #[test]
    fn rescale_quarter() {
        let f = rescale(&Point::scalar(1.0), 0.25).unwrap();
        let denom = 0.5 + 0.75f64.sqrt();
        assert!((denom - 1.366_025_403_784_438_6).abs() < 1e-15);
        assert!((f.y_iadb[0] - 0.732_050_807_568_877_2).abs() < 1e-15);
        assert!((f.beta - 0.366_025_403_784_438_6).abs() < 1e-15);
        let back = unscale(&f.y_iadb, 0.25).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_alpha_bar() {
        assert_eq!(rescale(&Point::scalar(1.0), 0.0), Err(DdimError::InvalidAlphaBar(0.0)));
        assert!(ddim_step(&Point::scalar(1.0), 1.2, 0.5, &Point::scalar(0.0)).is_err());
        assert_eq!(DdimSchedule::new(vec![0.5, 0.6]), Err(DdimError::NotDecreasing(1)));
        assert_eq!(DdimSchedule::new(vec![0.5]), Err(DdimError::TooShort(1)));
    }

    #[test]
    fn ddim_step_special_cases() {
        let x = Point::from([1.0, -0.5]);
        let eps = Point::from([0.3, 0.7]);
        assert_eq!(ddim_step(&x, 0.4, 0.4, &eps).unwrap(), x);
        let pure = ddim_step(&x, 0.4, 0.9, &Point::zeros(2)).unwrap();
        let k = (0.9f64 / 0.4).sqrt();
        assert!(pure.max_abs_diff(&Point::from([k, -0.5 * k])) < 1e-15);
    }

    #[test]
    fn zero_predictor_has_no_deviation() {
        let s = DdimSchedule::geometric(0.999, 0.01, 20).unwrap();
        let r = equivalence_check(&s, &|x, _| Point::zeros(x.dim()), &Point::from([0.4, -1.2])).unwrap();
        assert_eq!(r.deviations.len(), 21);
        assert!(r.max_deviation() < 1e-12);
        assert!(r.passed());
    }

    #[test]
    fn linear_predictor_geometric_schedule() {
        let s = DdimSchedule::geometric(0.99, 0.05, 10).unwrap();
        let r = equivalence_check(&s, &|x, k| x.lincomb(0.3, &Point::scalar(k as f64), 0.01), &Point::scalar(1.7))
            .unwrap();
        assert!(r.passed(), "{}", r.max_deviation());
        assert!(r.to_csv().starts_with("step,max_abs_deviation\n0,0\n"));
    }
}
