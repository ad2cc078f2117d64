use crate::error::{Error, Result};

/// Lower bound applied to per-feature standard deviations.
pub const STD_EPSILON: f64 = 1e-12;

/// Per-feature z-score statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose standard deviation was clamped to [`STD_EPSILON`].
    pub clamped: Vec<usize>,
}

/// Fits mean and population standard deviation (denominator n) per column
/// of a row-major `[rows, width]` matrix.
pub fn zscore_fit(data: &[f64], width: usize) -> Result<NormStats> {
    if width == 0 || !data.len().is_multiple_of(width) {
        return Err(Error::Shape(format!("{} values do not form rows of {width}", data.len())));
    }
    let n = data.len() / width;
    if n < 2 {
        return Err(Error::InvalidArgument("z-score needs at least 2 training samples".into()));
    }
    let mut mean = vec![0.0; width];
    for row in data.chunks_exact(width) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; width];
    for row in data.chunks_exact(width) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let mut clamped = Vec::new();
    let std = var
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let sd = (s / n as f64).sqrt();
            if sd < STD_EPSILON {
                clamped.push(i);
                STD_EPSILON
            } else {
                sd
            }
        })
        .collect();
    Ok(NormStats { mean, std, clamped })
}

/// Normalizes a row-major matrix with previously fitted statistics.
pub fn zscore_apply(stats: &NormStats, data: &[f64]) -> Result<Vec<f64>> {
    let mut out = data.to_vec();
    stats.apply_in_place(&mut out)?;
    Ok(out)
}

impl NormStats {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, data: &mut [f64]) -> Result<()> {
        let w = self.width();
        if w == 0 || !data.len().is_multiple_of(w) {
            return Err(Error::Shape(format!("{} values do not form rows of {w}", data.len())));
        }
        for row in data.chunks_exact_mut(w) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }

    /// Exact text form (shortest round-trip decimal per value).
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!("mean={}\nstd={}\n", join(&self.mean), join(&self.std))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut mean = None;
        let mut std = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Checkpoint(format!("bad stats line {line:?}")))?;
            let values = v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Checkpoint(format!("stats value: {e}")))?;
            match k.trim() {
                "mean" => mean = Some(values),
                "std" => std = Some(values),
                other => return Err(Error::Checkpoint(format!("unknown stats key {other:?}"))),
            }
        }
        let (mean, std) = mean.zip(std).ok_or_else(|| Error::Checkpoint("stats need mean and std".into()))?;
        if mean.len() != std.len() {
            return Err(Error::Checkpoint("mean/std length mismatch".into()));
        }
        let clamped = std.iter().enumerate().filter(|(_, &s)| s <= STD_EPSILON).map(|(i, _)| i).collect();
        Ok(Self { mean, std, clamped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_column() {
        let stats = zscore_fit(&[1.0, 3.0], 1).unwrap();
        assert_eq!(stats.mean, vec![2.0]);
        assert_eq!(stats.std, vec![1.0]);
        assert_eq!(zscore_apply(&stats, &[5.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn constant_column_is_flagged() {
        let stats = zscore_fit(&[4.0, 1.0, 4.0, 2.0, 4.0, 3.0], 2).unwrap();
        assert_eq!(stats.clamped, vec![0]);
        let out = zscore_apply(&stats, &[4.0, 2.0]).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn needs_two_samples() {
        assert!(zscore_fit(&[1.0, 2.0], 2).is_err());
        assert!(zscore_fit(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let stats = zscore_fit(&[0.1, 0.7, 0.3, 1e-7, 2.5, -3.0], 3).unwrap();
        assert_eq!(NormStats::from_text(&stats.to_text()).unwrap(), stats);
    }

    proptest! {
        #[test]
        fn normalized_training_data_is_standard(
            rows in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 3..40)
        ) {
            let flat: Vec<f64> = rows.concat();
            let stats = zscore_fit(&flat, 3).unwrap();
            let z = zscore_apply(&stats, &flat).unwrap();
            let back = zscore_fit(&z, 3).unwrap();
            for j in 0..3 {
                if stats.clamped.contains(&j) || stats.std[j] < 1e-6 {
                    continue;
                }
                prop_assert!(back.mean[j].abs() < 1e-9);
                prop_assert!((back.std[j] - 1.0).abs() < 1e-9);
            }
        }
    }
}
