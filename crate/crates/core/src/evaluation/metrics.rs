use crate::error::{Error, Result};
use crate::geometry::{surface_distance, SurfacePoint};

use super::stats::{linear_fit, percentile, LinearFit};

/// Euclidean distance on the developed plane, mm.
pub fn localization_error(pred: SurfacePoint, truth: SurfacePoint) -> f64 {
    surface_distance(pred, truth)
}

/// Random-guess force predictor: the median training force.
pub fn rg_force_baseline(train_forces: &[f64]) -> Result<f64> {
    percentile(train_forces, 0.5)
}

/// Random-guess localization: per-axis median of the training targets.
pub fn rg_loc_baseline(train_points: &[SurfacePoint]) -> Result<SurfacePoint> {
    let xs: Vec<f64> = train_points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = train_points.iter().map(|p| p.y).collect();
    Ok(SurfacePoint::new(percentile(&xs, 0.5)?, percentile(&ys, 0.5)?))
}

/// Force range spanned by the error profile, N.
pub const PROFILE_RANGE_N: [f64; 2] = [0.05, 2.5];

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// NaN for empty bins.
    pub median: f64,
}

impl ProfileBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    pub bins: Vec<ProfileBin>,
    /// Least-squares line through the non-empty bins' (center, median).
    pub fit: LinearFit,
}

/// Bins `(true force, |error|)` pairs into equal-width force bins and fits a
/// line through the bin medians. Pairs outside the range are ignored; the
/// last bin is closed.
pub fn error_vs_force_profile(pairs: &[(f64, f64)], bins: usize) -> Result<ErrorProfile> {
    if bins < 2 {
        return Err(Error::InvalidArgument("error profile needs at least 2 bins".into()));
    }
    let [lo, hi] = PROFILE_RANGE_N;
    let width = (hi - lo) / bins as f64;
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for &(f, e) in pairs {
        if (lo..=hi).contains(&f) {
            let b = (((f - lo) / width) as usize).min(bins - 1);
            members[b].push(e);
        }
    }
    let bins: Vec<ProfileBin> = members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(ProfileBin {
                lo: lo + i as f64 * width,
                hi: lo + (i + 1) as f64 * width,
                count: m.len(),
                median: if m.is_empty() { f64::NAN } else { percentile(m, 0.5)? },
            })
        })
        .collect::<Result<_>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = bins.iter().filter(|b| b.count > 0).map(|b| (b.center(), b.median)).unzip();
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("error profile needs at least 2 non-empty bins".into()));
    }
    Ok(ErrorProfile { fit: linear_fit(&xs, &ys)?, bins })
}

/// Per-cell median of errors keyed by true contact location.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub x0: f64,
    pub y0: f64,
    pub pitch: f64,
    pub cols: usize,
    pub rows: usize,
    /// Row-major; NaN for empty cells.
    pub medians: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ErrorMap {
    pub fn build(area: crate::geometry::SensedArea, pitch: f64, samples: &[(SurfacePoint, f64)]) -> Result<Self> {
        if !(pitch > 0.0) {
            return Err(Error::InvalidArgument(format!("map pitch {pitch}")));
        }
        let cols = (area.width() / pitch).ceil() as usize;
        let rows = (area.height() / pitch).ceil() as usize;
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); cols * rows];
        for &(p, e) in samples {
            let c = (((p.x - area.x_min) / pitch).floor().max(0.0) as usize).min(cols - 1);
            let r = (((p.y - area.y_min) / pitch).floor().max(0.0) as usize).min(rows - 1);
            members[r * cols + c].push(e);
        }
        let medians = members
            .iter()
            .map(|m| if m.is_empty() { Ok(f64::NAN) } else { percentile(m, 0.5) })
            .collect::<Result<_>>()?;
        Ok(Self {
            x0: area.x_min,
            y0: area.y_min,
            pitch,
            cols,
            rows,
            medians,
            counts: members.iter().map(Vec::len).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baselines() {
        assert_eq!(rg_force_baseline(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        let p =
            rg_loc_baseline(&[SurfacePoint::new(-1.0, 5.0), SurfacePoint::new(3.0, 1.0), SurfacePoint::new(0.0, 2.0)])
                .unwrap();
        assert_eq!((p.x, p.y), (0.0, 2.0));
    }

    #[test]
    fn rg_localization_error_of_uniform_contacts() {
        // Monte-Carlo oracle: uniform contacts over 90×120 mm against the center.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = SurfacePoint::new(0.0, 60.0);
        let errs: Vec<f64> = (0..200_000)
            .map(|_| {
                localization_error(SurfacePoint::new(rng.random_range(-45.0..45.0), rng.random_range(0.0..120.0)), c)
            })
            .collect();
        let m = percentile(&errs, 0.5).unwrap();
        // Frozen from an independent 4·10⁶-sample numpy run: 41.45 mm.
        assert!((m - 41.45).abs() < 0.3, "{m}");
    }

    #[test]
    fn profile_fits() {
        let pairs: Vec<(f64, f64)> = (0..100).map(|i| 0.06 + 0.024 * i as f64).map(|f| (f, 0.1 * f + 0.01)).collect();
        let p = error_vs_force_profile(&pairs, 10).unwrap();
        assert!(p.fit.slope > 0.0 && p.fit.r2 > 0.99);
        let flat: Vec<(f64, f64)> = pairs.iter().map(|&(f, _)| (f, 0.3)).collect();
        let q = error_vs_force_profile(&flat, 10).unwrap();
        assert_eq!((q.fit.slope, q.fit.r2), (0.0, 0.0));
        assert!(error_vs_force_profile(&[(1.0, 0.1), (1.01, 0.2)], 10).is_err());
    }

    #[test]
    fn error_map_cells() {
        let area = crate::geometry::build_default_layout().area();
        let m =
            ErrorMap::build(area, 5.0, &[(SurfacePoint::new(-45.0, 0.0), 1.0), (SurfacePoint::new(45.0, 120.0), 2.0)])
                .unwrap();
        assert_eq!((m.cols, m.rows), (18, 24));
        assert_eq!(m.medians[0], 1.0);
        assert_eq!(*m.medians.last().unwrap(), 2.0);
        assert!(m.medians[1].is_nan());
    }

    #[test]
    fn symmetric_metric() {
        let p = SurfacePoint::new(1.0, 2.0);
        let q = SurfacePoint::new(-3.0, 7.5);
        assert_eq!(localization_error(p, q), localization_error(q, p));
    }
}
