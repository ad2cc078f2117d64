//! Descriptive statistics and paired significance tests.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Percentile `p ∈ [0, 1]` with linear interpolation between closest ranks.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty list".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("percentile {p} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("percentile input contains NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sorted_percentile(&v, p))
}

fn sorted_percentile(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Median and interquartile range (Q3 − Q1).
pub fn median_iqr(values: &[f64]) -> Result<(f64, f64)> {
    let q1 = percentile(values, 0.25)?;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((sorted_percentile(&v, 0.5), sorted_percentile(&v, 0.75) - q1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact enumeration up to 12 non-zero pairs, normal approximation above.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences `x − y`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Non-zero differences.
    pub n: usize,
    pub p: f64,
}

/// Wilcoxon signed-rank test on paired samples. One-sided tests use the
/// alternative `x > y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], two_sided: bool) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(x, y, two_sided, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    two_sided: bool,
    method: WilcoxonMethod,
) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("paired samples differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 5 {
        return Err(Error::InvalidArgument("Wilcoxon test needs at least 5 pairs".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidArgument("Wilcoxon input contains NaN".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Err(Error::UndefinedTest("all paired differences are zero".into()));
    }
    // Mid-ranks of |d|, doubled so they stay integral.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            rank2[k] = r2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2_plus: u64 = (0..n).filter(|&k| diffs[k] > 0.0).map(|k| rank2[k]).sum();
    let total2 = (n * (n + 1)) as u64;
    let w_plus = w2_plus as f64 / 2.0;
    let w_minus = (total2 - w2_plus) as f64 / 2.0;
    let exact = match method {
        WilcoxonMethod::Auto => n <= 12,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p = if exact {
        exact_p(&rank2, w2_plus, two_sided)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            return Err(Error::UndefinedTest("zero variance under the null".into()));
        }
        let sd = var.sqrt();
        if two_sided {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
            erfc(z / std::f64::consts::SQRT_2)
        } else {
            let z = (w_plus - mean - 0.5) / sd;
            0.5 * erfc(z / std::f64::consts::SQRT_2)
        }
    };
    Ok(WilcoxonResult { w_plus, w_minus, n, p: p.clamp(f64::MIN_POSITIVE, 1.0) })
}

/// Null distribution of the doubled W+ over all 2ⁿ sign assignments.
fn exact_p(rank2: &[u64], observed: u64, two_sided: bool) -> f64 {
    let total: u64 = rank2.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in rank2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all: f64 = counts.iter().sum();
    let o = observed as usize;
    let upper: f64 = counts[o..].iter().sum::<f64>() / all;
    if !two_sided {
        return upper;
    }
    let lower: f64 = counts[..=o].iter().sum::<f64>() / all;
    (2.0 * upper.min(lower)).min(1.0)
}

/// Effect size of paired differences: mean over sample standard deviation.
pub fn cohens_d(diffs: &[f64]) -> Result<f64> {
    if diffs.len() < 2 {
        return Err(Error::InvalidArgument("Cohen's d needs at least 2 differences".into()));
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::UndefinedEffect("differences have zero variance".into()));
    }
    Ok(mean / var.sqrt())
}

/// Ordinary least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Zero when the responses have no variance.
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::Shape("x and y differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("a line needs at least 2 points".into()));
    }
    if ys.iter().all(|y| *y == ys[0]) {
        return Ok(LinearFit { slope: 0.0, intercept: ys[0], r2: 0.0 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn median_iqr_examples() {
        assert_eq!(median_iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), (3.0, 2.0));
        assert_eq!(median_iqr(&[7.0]).unwrap(), (7.0, 0.0));
        assert!(median_iqr(&[]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let (m, iqr) = median_iqr(&u).unwrap();
        assert!((m - 0.5).abs() < 0.01 && (iqr - 0.5).abs() < 0.01);
    }

    #[test]
    fn percentile_interpolates() {
        // numpy.percentile([10, 20, 30, 40], 30) == 19.0
        assert!((percentile(&[40.0, 10.0, 30.0, 20.0], 0.3).unwrap() - 19.0).abs() < 1e-12);
    }

    /// Brute-force oracle: enumerate all 2ⁿ sign flips of the ranks.
    fn brute_p(x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
        let n = d.len();
        let ranks: Vec<f64> = d
            .iter()
            .map(|di| {
                let less = d.iter().filter(|o| o.abs() < di.abs()).count() as f64;
                let eq = d.iter().filter(|o| o.abs() == di.abs()).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect();
        let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            if s <= w + 1e-9 {
                le += 1;
            }
            if s >= w - 1e-9 {
                ge += 1;
            }
        }
        let total = (1u64 << n) as f64;
        (2.0 * (le.min(ge) as f64) / total).min(1.0)
    }

    #[test]
    fn wilcoxon_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&x, &[0.0; 5], true).unwrap();
        assert_eq!(r.p, 2.0 / 32.0);
        assert_eq!((r.w_plus, r.w_minus, r.n), (15.0, 0.0, 5));
        let anti = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0];
        assert_eq!(wilcoxon_signed_rank(&anti, &[0.0; 6], true).unwrap().p, 1.0);
        assert!(matches!(wilcoxon_signed_rank(&x, &x, true), Err(Error::UndefinedTest(_))));
        assert!(wilcoxon_signed_rank(&x[..4], &[0.0; 4], true).is_err());
    }

    #[test]
    fn exact_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 5..=12 {
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
                let y = vec![0.0; n];
                if x.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let p = wilcoxon_signed_rank(&x, &y, true).unwrap().p;
                assert!((p - brute_p(&x, &y)).abs() < 1e-12, "n={n} {x:?}");
            }
        }
    }

    fn worst_gap(n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.3).collect();
            let y = vec![0.0; n];
            let e = wilcoxon_signed_rank_with(&x, &y, true, WilcoxonMethod::Exact).unwrap().p;
            let a = wilcoxon_signed_rank_with(&x, &y, true, WilcoxonMethod::Normal).unwrap().p;
            worst = worst.max((e - a).abs());
        }
        worst
    }

    #[test]
    fn normal_path_tracks_exact() {
        for n in 5..=10 {
            assert!(worst_gap(n, n as u64) < 5e-2, "n={n}");
        }
        // Worst case over random inputs at the switch-over size is ~0.014.
        assert!(worst_gap(12, 2) < 2e-2);
    }

    #[test]
    fn one_sided_is_half_of_two_sided_when_positive() {
        let x = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0];
        let two = wilcoxon_signed_rank(&x, &[0.0; 8], true).unwrap().p;
        let one = wilcoxon_signed_rank(&x, &[0.0; 8], false).unwrap().p;
        assert!((two - 2.0 * one).abs() < 1e-15);
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(cohens_d(&[1.0, -1.0]).unwrap(), 0.0);
        assert!((cohens_d(&[2.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cohens_d(&[3.0, 3.0, 3.0]), Err(Error::UndefinedEffect(_))));
    }

    #[test]
    fn linear_fit_examples() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let c = linear_fit(&[0.0, 1.0, 2.0], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((c.slope, c.r2), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn shuffle_invariant(mut v in prop::collection::vec(-1e3f64..1e3, 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let a = median_iqr(&v).unwrap();
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(a, median_iqr(&v).unwrap());
        }

        #[test]
        fn iqr_non_negative(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            prop_assert!(median_iqr(&v).unwrap().1 >= 0.0);
        }
    }
}
