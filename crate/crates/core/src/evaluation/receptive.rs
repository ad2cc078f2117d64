use crate::error::Result;
use crate::geometry::SkinLayout;
use crate::simulator::{is_hotspot, raster_unit_responses, FieldParams, Raster, RASTER_PITCH_MM, RECEPTIVE_SHIFT_NM};

use super::stats::percentile;

/// Receptive-field characterization of every sensor on the 0.5 mm raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptiveFieldReport {
    pub raster: Raster,
    /// Per sensor, row-major over the raster: force (N) needed for a 20 pm
    /// shift; infinite where the sensor does not respond.
    pub threshold_force: Vec<Vec<f64>>,
    /// Hot-spot area per sensor, mm².
    pub hotspot_areas: Vec<f64>,
    pub median_area: f64,
    /// Connected hot-spot regions per sensor (4-connectivity).
    pub lobe_counts: Vec<usize>,
}

pub fn receptive_field_report(layout: &SkinLayout, params: &FieldParams) -> Result<ReceptiveFieldReport> {
    params.validate()?;
    let raster = Raster::new(layout.area(), RASTER_PITCH_MM);
    let responses = raster_unit_responses(layout, params, &raster);
    let sensors = layout.sensors.len();
    let mut threshold_force = vec![Vec::with_capacity(raster.len()); sensors];
    let mut masks = vec![Vec::with_capacity(raster.len()); sensors];
    for r in &responses {
        for (s, &v) in r.iter().enumerate() {
            threshold_force[s].push(if v > 0.0 { RECEPTIVE_SHIFT_NM / v } else { f64::INFINITY });
            masks[s].push(is_hotspot(v));
        }
    }
    let cell = raster.pitch * raster.pitch;
    let hotspot_areas: Vec<f64> = masks.iter().map(|m| m.iter().filter(|&&b| b).count() as f64 * cell).collect();
    let lobe_counts = masks.iter().map(|m| components(m, raster.cols, raster.rows)).collect();
    Ok(ReceptiveFieldReport {
        median_area: percentile(&hotspot_areas, 0.5)?,
        raster,
        threshold_force,
        hotspot_areas,
        lobe_counts,
    })
}

/// Number of 4-connected components of `true` cells in a row-major mask.
pub(crate) fn components(mask: &[bool], cols: usize, rows: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_default_layout;
    use crate::simulator::DUAL_LOBE_SENSORS;

    #[test]
    fn component_counting() {
        #[rustfmt::skip]
        let m = [
            true, false, true,
            false, false, true,
            true, true, false,
        ];
        assert_eq!(components(&m, 3, 3), 3);
        assert_eq!(components(&[false; 4], 2, 2), 0);
    }

    #[test]
    fn default_single_lobes_and_preset_dual_lobes() {
        let layout = build_default_layout();
        let single = receptive_field_report(&layout, &FieldParams::default()).unwrap();
        assert!(single.lobe_counts.iter().all(|&c| c == 1), "{:?}", single.lobe_counts);
        assert!((single.median_area - 15.9).abs() <= 0.3 * 15.9);
        let dual = receptive_field_report(&layout, &FieldParams::default().with_dual_lobe_preset(&layout)).unwrap();
        for (i, &c) in dual.lobe_counts.iter().enumerate() {
            let expected = if DUAL_LOBE_SENSORS.contains(&(i + 1)) { 2 } else { 1 };
            assert_eq!(c, expected, "sensor {}", i + 1);
        }
    }
}
