use crate::error::{Error, Result};
use crate::geometry::{SensedArea, SurfacePoint};

use super::grids::{cell_of, GridSpec};

/// Precomputed subcell-to-cell lookup for fusing a fixed set of grids.
///
/// Subcells are half a coarse cell on each side; every subcell center lies
/// strictly inside exactly one coarse cell of each grid.
#[derive(Debug, Clone)]
pub struct NipIntegrator {
    area: SensedArea,
    centers: Vec<SurfacePoint>,
    /// `lookup[g][s]`: class index in grid `g` of subcell `s`.
    lookup: Vec<Vec<usize>>,
    cell_counts: Vec<usize>,
}

impl NipIntegrator {
    pub fn new(grids: &[GridSpec]) -> Result<Self> {
        let first = grids.first().ok_or_else(|| Error::InvalidArgument("no grids to integrate".into()))?;
        let area = first.area;
        if grids.iter().any(|g| g.area != area || g.cell != first.cell) {
            return Err(Error::InvalidArgument("grids disagree on area or cell size".into()));
        }
        let (sw, sh) = (0.5 * first.cell[0], 0.5 * first.cell[1]);
        let nx = (area.width() / sw).round() as usize;
        let ny = (area.height() / sh).round() as usize;
        let mut centers = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                centers.push(SurfacePoint::new(area.x_min + (i as f64 + 0.5) * sw, area.y_min + (j as f64 + 0.5) * sh));
            }
        }
        let lookup = grids
            .iter()
            .map(|g| centers.iter().map(|&c| cell_of(g, c)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { area, centers, lookup, cell_counts: grids.iter().map(GridSpec::cell_count).collect() })
    }

    pub fn subcell_centers(&self) -> &[SurfacePoint] {
        &self.centers
    }

    /// Weighted barycenter of subcell centers, clamped to the sensed area.
    pub fn integrate(&self, weights: &[&[f64]]) -> Result<SurfacePoint> {
        if weights.len() != self.lookup.len() {
            return Err(Error::Shape(format!("expected {} weight vectors, got {}", self.lookup.len(), weights.len())));
        }
        for (g, (w, &n)) in weights.iter().zip(&self.cell_counts).enumerate() {
            if w.len() != n {
                return Err(Error::Shape(format!("grid {g}: expected {n} weights, got {}", w.len())));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!("grid {g}: weights must be finite and non-negative")));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!("grid {g}: weights sum to {sum}, not 1")));
            }
        }
        let (mut total, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (s, c) in self.centers.iter().enumerate() {
            let score: f64 = self.lookup.iter().zip(weights).map(|(l, w)| w[l[s]]).sum();
            total += score;
            sx += score * c.x;
            sy += score * c.y;
        }
        if total <= 0.0 {
            return Err(Error::DegenerateWeights("all subcell scores are zero".into()));
        }
        Ok(self.area.clamp(SurfacePoint::new(sx / total, sy / total)))
    }
}

/// Fuses per-grid softmax vectors into one contact point.
pub fn nip_integrate(weights: &[&[f64]], grids: &[GridSpec]) -> Result<SurfacePoint> {
    NipIntegrator::new(grids)?.integrate(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_default_layout;
    use crate::pipeline::grids::{build_grids, GridName};

    fn area() -> SensedArea {
        build_default_layout().area()
    }

    #[test]
    fn subcell_raster_is_10_by_12() {
        let nip = NipIntegrator::new(&build_grids(area())).unwrap();
        assert_eq!(nip.subcell_centers().len(), 120);
    }

    #[test]
    fn uniform_weights_give_center() {
        let grids = build_grids(area());
        let vecs: Vec<Vec<f64>> = grids.iter().map(|g| vec![1.0 / g.cell_count() as f64; g.cell_count()]).collect();
        let refs: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
        let p = nip_integrate(&refs, &grids).unwrap();
        assert!((p.x - 0.0).abs() < 1e-9 && (p.y - 60.0).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn tiny_instance_matches_hand_sum() {
        // A 36×20 area with two-cell grids, one shifted by half a cell.
        let a = SensedArea { x_min: 0.0, x_max: 36.0, y_min: 0.0, y_max: 20.0 };
        let g0 = GridSpec::covering(GridName::Sg, a, [0.0, 0.0], [18.0, 20.0]);
        let g1 = GridSpec::covering(GridName::Hsg, a, [-9.0, 0.0], [18.0, 20.0]);
        assert_eq!((g0.cell_count(), g1.cell_count()), (2, 3));
        let w0 = [0.25, 0.75];
        let w1 = [0.5, 0.5, 0.0];
        // Subcells (9×10): centers x = 4.5, 13.5, 22.5, 31.5 at y = 5, 15.
        // g0 cells by x: 0,0,1,1; g1 cells by x: 0,1,1,2.
        let scores = [0.25 + 0.5, 0.25 + 0.5, 0.75 + 0.5, 0.75 + 0.0];
        let xs = [4.5, 13.5, 22.5, 31.5];
        let total: f64 = scores.iter().sum::<f64>() * 2.0;
        let x = 2.0 * scores.iter().zip(xs).map(|(s, x)| s * x).sum::<f64>() / total;
        let p = nip_integrate(&[&w0, &w1], &[g0, g1]).unwrap();
        assert!((p.x - x).abs() < 1e-12 && (p.y - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let grids = build_grids(area());
        let mut vecs: Vec<Vec<f64>> = grids.iter().map(|g| vec![1.0 / g.cell_count() as f64; g.cell_count()]).collect();
        vecs[0][0] += 0.1;
        let refs: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
        assert!(matches!(nip_integrate(&refs, &grids), Err(Error::InvalidArgument(_))));
        assert!(matches!(nip_integrate(&refs[..3], &grids), Err(Error::Shape(_))));
    }
}
