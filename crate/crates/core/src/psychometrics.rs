//! Simulated Von Frey sensitivity protocol and psychometric sigmoid fitting.
//!
//! Detection probability is modeled as `F(x) = 1 / (1 + exp(-a (x - b)))`
//! with `x` in mN.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{SkinLayout, SurfacePoint};
use crate::simulator::{
    add_noise, detect_contact, uniform_point, unit_response, FieldParams, SensorFrame, DETECTION_THRESHOLD_NM,
    NOISE_SIGMA_NM,
};

/// Standard gravity, mN per gram-force.
pub const MN_PER_GRAM: f64 = 9.80665;
/// Filament set, heaviest first.
pub const FILAMENTS_G: [f64; 8] = [60.0, 26.0, 10.0, 4.0, 2.0, 1.0, 0.6, 0.4];

pub fn grams_to_millinewtons(grams: f64) -> Result<f64> {
    if !(grams >= 0.0 && grams.is_finite()) {
        return Err(Error::InvalidArgument(format!("filament mass {grams} g")));
    }
    Ok(grams * MN_PER_GRAM)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VonFreyConfig {
    pub subjects: usize,
    pub sites_per_filament: usize,
    pub filaments_g: Vec<f64>,
    pub noise_sigma: f64,
    pub threshold_nm: f64,
}

impl Default for VonFreyConfig {
    fn default() -> Self {
        Self {
            subjects: 12,
            sites_per_filament: 20,
            filaments_g: FILAMENTS_G.to_vec(),
            noise_sigma: NOISE_SIGMA_NM,
            threshold_nm: DETECTION_THRESHOLD_NM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonFreyTrial {
    /// 1-based.
    pub subject: usize,
    pub filament_g: f64,
    pub force_mn: f64,
    pub location: SurfacePoint,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRate {
    pub filament_g: f64,
    pub force_mn: f64,
    pub trials: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VonFreyResult {
    pub trials: Vec<VonFreyTrial>,
    /// One entry per filament, in configuration order.
    pub rates: Vec<DetectionRate>,
}

/// Applies every filament at random sites for every subject; one noisy frame
/// per stimulus is thresholded for detection. Subject `s` draws from stream
/// `s` of `seed`.
pub fn run_vonfrey_protocol(
    layout: &SkinLayout,
    params: &FieldParams,
    config: &VonFreyConfig,
    seed: u64,
) -> Result<VonFreyResult> {
    params.validate()?;
    let forces = config.filaments_g.iter().map(|&g| grams_to_millinewtons(g)).collect::<Result<Vec<_>>>()?;
    let area = layout.area();
    let mut trials = Vec::with_capacity(config.subjects * config.sites_per_filament * forces.len());
    for subject in 1..=config.subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(subject as u64);
        for (&g, &mn) in config.filaments_g.iter().zip(&forces) {
            for _ in 0..config.sites_per_filament {
                let location = uniform_point(&area, &mut rng);
                let force_n = mn / 1000.0;
                let frame = SensorFrame {
                    t: 0.0,
                    force_z: force_n,
                    shifts: unit_response(layout, params, location).iter().map(|u| u * force_n).collect(),
                };
                let frame = add_noise(frame, config.noise_sigma, &mut rng);
                trials.push(VonFreyTrial {
                    subject,
                    filament_g: g,
                    force_mn: mn,
                    location,
                    detected: detect_contact(&frame, config.threshold_nm),
                });
            }
        }
    }
    let rates = config
        .filaments_g
        .iter()
        .zip(&forces)
        .map(|(&g, &mn)| {
            let hits: Vec<bool> = trials.iter().filter(|t| t.filament_g == g).map(|t| t.detected).collect();
            DetectionRate {
                filament_g: g,
                force_mn: mn,
                trials: hits.len(),
                rate: if hits.is_empty() {
                    0.0
                } else {
                    hits.iter().filter(|&&d| d).count() as f64 / hits.len() as f64
                },
            }
        })
        .collect();
    Ok(VonFreyResult { trials, rates })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidFit {
    /// Steepness, 1/mN (1/ln mN on the log axis).
    pub a: f64,
    /// 50% point, mN (ln mN on the log axis).
    pub b: f64,
    /// Sum of squared rate residuals.
    pub residual: f64,
    pub converged: bool,
    /// False when the fitted curve is essentially flat over the data.
    pub identifiable: bool,
    /// Whether `a` and `b` refer to ln(force).
    pub log_axis: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub fit_on_log_force: bool,
}

const MAX_ITERATIONS: usize = 500;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (sigmoid(a * (x - b)) - y).powi(2)).sum()
}

/// Levenberg–Marquardt from one start. Returns `(a, b, sse, converged)`.
fn levenberg_marquardt(xs: &[f64], ys: &[f64], mut a: f64, mut b: f64) -> (f64, f64, f64, bool) {
    let mut cost = sse(xs, ys, a, b);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let s = sigmoid(a * (x - b));
            let d = s * (1.0 - s);
            let (da, db) = (d * (x - b), -a * d);
            let r = s - y;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        if ga.abs().max(gb.abs()) < 1e-15 || cost < 1e-30 {
            return (a, b, cost, true);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (m00, m11) = (jaa * (1.0 + lambda) + 1e-300, jbb * (1.0 + lambda) + 1e-300);
            let det = m00 * m11 - jab * jab;
            if det.abs() > 0.0 && det.is_finite() {
                let step_a = -(m11 * ga - jab * gb) / det;
                let step_b = -(m00 * gb - jab * ga) / det;
                let (na, nb) = (a + step_a, b + step_b);
                let new_cost = sse(xs, ys, na, nb);
                if new_cost.is_finite() && new_cost < cost {
                    let small = step_a.abs() <= 1e-12 * (a.abs() + 1e-12) && step_b.abs() <= 1e-12 * (b.abs() + 1e-12);
                    a = na;
                    b = nb;
                    let rel = (cost - new_cost) / cost.max(1e-300);
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-15);
                    improved = true;
                    if small || rel < 1e-15 {
                        return (a, b, cost, true);
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left at any damping: a stationary point.
            return (a, b, cost, true);
        }
    }
    (a, b, cost, false)
}

/// Least-squares sigmoid through detection rates, best of eight starts.
pub fn fit_sigmoid(forces_mn: &[f64], rates: &[f64]) -> Result<SigmoidFit> {
    fit_sigmoid_with(forces_mn, rates, FitOptions::default())
}

pub fn fit_sigmoid_with(forces_mn: &[f64], rates: &[f64], options: FitOptions) -> Result<SigmoidFit> {
    if forces_mn.len() != rates.len() {
        return Err(Error::Shape("forces and rates differ in length".into()));
    }
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidArgument("rates must lie in [0, 1]".into()));
    }
    if options.fit_on_log_force && forces_mn.iter().any(|f| *f <= 0.0) {
        return Err(Error::InvalidArgument("log-axis fit needs positive forces".into()));
    }
    let xs: Vec<f64> =
        if options.fit_on_log_force { forces_mn.iter().map(|f| f.ln()).collect() } else { forces_mn.to_vec() };
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("forces must be finite".into()));
    }
    let mut levels = xs.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() < 3 {
        return Err(Error::InvalidArgument("sigmoid fit needs at least 3 distinct force levels".into()));
    }
    if rates.iter().all(|&r| r == 0.0) || rates.iter().all(|&r| r == 1.0) {
        return Err(Error::NonIdentifiable("all rates are 0 or all are 1".into()));
    }
    let (lo, hi) = (levels[0], levels[levels.len() - 1]);
    let span = hi - lo;
    let mut best: Option<(f64, f64, f64, bool)> = None;
    for a_scale in [0.5, 2.0, 8.0, 32.0] {
        for frac in [1.0 / 3.0, 2.0 / 3.0] {
            let fit = levenberg_marquardt(&xs, rates, a_scale / span, lo + frac * span);
            if best.is_none_or(|b| fit.2 < b.2) {
                best = Some(fit);
            }
        }
    }
    let (a, b, residual, converged) = best.expect("at least one start");
    Ok(SigmoidFit {
        a,
        b,
        residual,
        converged,
        identifiable: a > 0.0 && a * span > 1e-3,
        log_axis: options.fit_on_log_force,
    })
}

/// Force (mN) at which the fitted detection probability equals `p`.
pub fn threshold_at(fit: &SigmoidFit, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} outside (0, 1)")));
    }
    if !(fit.a > 0.0) {
        return Err(Error::NonIdentifiable(format!("steepness {} is not positive", fit.a)));
    }
    let x = fit.b + (p / (1.0 - p)).ln() / fit.a;
    Ok(if fit.log_axis { x.exp() } else { x })
}
