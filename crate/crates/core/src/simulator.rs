//! Forward model from a single contact to the 16 wavelength shifts, plus the
//! automated indentation protocol used to build training datasets.
//!
//! Each grating responds linearly in force through a unit-peak elliptical
//! Gaussian receptive field aligned with the local fiber direction. Cover
//! thickness scales the gain as `(8/t)^s` and the field width as `(t/8)^w`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{SensedArea, SkinLayout, SurfacePoint, UnitVector};

/// Shift needed for a location to count as inside a receptive field.
pub const RECEPTIVE_SHIFT_NM: f64 = 0.020;
/// Contact detection threshold on the largest channel shift.
pub const DETECTION_THRESHOLD_NM: f64 = 0.002;
/// Interrogator precision (1σ).
pub const NOISE_SIGMA_NM: f64 = 0.0003;
pub const PEAK_FORCE_N: f64 = 2.5;
/// Hot spots respond at up to a sixth of the peak indentation force.
pub const HOTSPOT_FORCE_N: f64 = PEAK_FORCE_N / 6.0;
const REFERENCE_THICKNESS_MM: f64 = 8.0;

/// Secondary responsive lobe of one grating.
#[derive(Debug, Clone, PartialEq)]
pub struct DualLobe {
    /// 1-based sensor index.
    pub sensor: usize,
    /// Offset of the lobe center from the grating center, mm.
    pub offset: [f64; 2],
    /// Peak of the lobe relative to the main lobe, in (0, 1].
    pub gain: f64,
}

/// Receptive-field model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldParams {
    /// Peak sensitivity at 8 mm thickness, nm/N.
    pub peak_sensitivity: f64,
    /// Decay scale along the fiber, mm.
    pub sigma_par: f64,
    /// Decay scale across the fiber, mm.
    pub sigma_perp: f64,
    pub thickness_exponent_s: f64,
    pub thickness_exponent_w: f64,
    pub dual_lobes: Vec<DualLobe>,
}

impl Default for FieldParams {
    /// Calibrated defaults: median hot-spot area ≈ 15.9 mm² on the default
    /// layout and ≥ 2 pm for a 50 mN contact over a grating.
    fn default() -> Self {
        Self {
            peak_sensitivity: 0.0488,
            sigma_par: 15.0,
            sigma_perp: 10.0,
            thickness_exponent_s: 0.01,
            thickness_exponent_w: 1.0,
            dual_lobes: Vec::new(),
        }
    }
}

/// Sensors given a second responsive area by [`FieldParams::with_dual_lobe_preset`].
pub const DUAL_LOBE_SENSORS: [usize; 3] = [2, 12, 13];
const DUAL_LOBE_OFFSET_MM: f64 = 28.0;

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.peak_sensitivity,
            self.sigma_par,
            self.sigma_perp,
            self.thickness_exponent_s,
            self.thickness_exponent_w,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.peak_sensitivity < 0.0 || self.sigma_par <= 0.0 || self.sigma_perp <= 0.0 {
            return Err(Error::InvalidArgument(format!("invalid field params {self:?}")));
        }
        if self.sigma_perp > self.sigma_par {
            return Err(Error::InvalidArgument("sigma_perp must not exceed sigma_par".into()));
        }
        for lobe in &self.dual_lobes {
            if !(lobe.gain > 0.0 && lobe.gain <= 1.0) {
                return Err(Error::InvalidArgument(format!("dual lobe gain {}", lobe.gain)));
            }
        }
        Ok(())
    }

    /// Adds second lobes on sensors 2, 12 and 13, offset across the fiber
    /// toward the middle of the sensed area.
    pub fn with_dual_lobe_preset(mut self, layout: &SkinLayout) -> Self {
        let center = layout.area().center();
        self.dual_lobes = DUAL_LOBE_SENSORS
            .iter()
            .filter_map(|&idx| layout.sensors.get(idx - 1))
            .map(|s| {
                let n = s.fiber_direction.normal();
                let toward = (center.x - s.center.x) * n.x + (center.y - s.center.y) * n.y;
                let sign = if toward >= 0.0 { 1.0 } else { -1.0 };
                DualLobe {
                    sensor: s.index,
                    offset: [sign * DUAL_LOBE_OFFSET_MM * n.x, sign * DUAL_LOBE_OFFSET_MM * n.y],
                    gain: 1.0,
                }
            })
            .collect();
        self
    }

    /// Sensitivity gain at cover thickness `t` (nm/N at a field peak).
    pub fn gain(&self, thickness: f64) -> f64 {
        self.peak_sensitivity * (REFERENCE_THICKNESS_MM / thickness).powf(self.thickness_exponent_s)
    }

    /// Field widening factor at cover thickness `t`.
    pub fn width_factor(&self, thickness: f64) -> f64 {
        (thickness / REFERENCE_THICKNESS_MM).powf(self.thickness_exponent_w)
    }
}

/// A single normal contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: SurfacePoint,
    /// Normal force, N.
    pub force: f64,
}

/// One interrogator sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub t: f64,
    pub force_z: f64,
    /// Wavelength shift per grating, nm.
    pub shifts: Vec<f64>,
}

/// One force-controlled indentation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Indentation {
    pub id: u64,
    pub location: SurfacePoint,
    pub frames: Vec<SensorFrame>,
    /// Frames `[0, loading_end)` belong to the increasing-load phase.
    pub loading_end: usize,
}

impl Indentation {
    pub fn loading_frames(&self) -> &[SensorFrame] {
        &self.frames[..self.loading_end]
    }
}

/// Timing and loading parameters of the indentation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub frames: usize,
    pub sample_rate_hz: f64,
    pub peak_force: f64,
    /// Fraction of frames spent in the increasing-load phase.
    pub loading_fraction: f64,
    pub noise_sigma: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            frames: 1000,
            sample_rate_hz: 100.0,
            peak_force: PEAK_FORCE_N,
            loading_fraction: 0.4,
            noise_sigma: NOISE_SIGMA_NM,
        }
    }
}

impl Protocol {
    pub fn loading_end(&self) -> usize {
        ((self.frames as f64 * self.loading_fraction).round() as usize).clamp(1, self.frames)
    }

    /// Commanded force at frame `i`: linear ramp to the peak, then linear release.
    pub fn force_at(&self, i: usize) -> f64 {
        let end = self.loading_end();
        if end <= 1 {
            return if i == 0 { self.peak_force } else { 0.0 };
        }
        if i < end {
            self.peak_force * i as f64 / (end - 1) as f64
        } else {
            let release = (self.frames - end) as f64;
            let k = (self.frames - 1 - i) as f64;
            self.peak_force * k / release
        }
    }
}

/// Generated indentation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub layout: SkinLayout,
    pub params: FieldParams,
    pub protocol: Protocol,
    pub indentations: Vec<Indentation>,
    pub seed: u64,
}

impl Dataset {
    pub fn frame_count(&self) -> usize {
        self.indentations.iter().map(|i| i.frames.len()).sum()
    }

    pub fn find(&self, id: u64) -> Option<&Indentation> {
        self.indentations.iter().find(|i| i.id == id)
    }
}

/// Per-newton response of every grating at `point` (unit-force shifts, nm/N).
pub fn unit_response(layout: &SkinLayout, params: &FieldParams, point: SurfacePoint) -> Vec<f64> {
    let gain = params.gain(layout.thickness);
    let w = params.width_factor(layout.thickness);
    let (sp, sq) = (params.sigma_par * w, params.sigma_perp * w);
    layout
        .sensors
        .iter()
        .map(|s| {
            let mut g = kernel(point, s.center, s.fiber_direction, sp, sq);
            for lobe in params.dual_lobes.iter().filter(|l| l.sensor == s.index) {
                let c = SurfacePoint::new(s.center.x + lobe.offset[0], s.center.y + lobe.offset[1]);
                g += lobe.gain * kernel(point, c, s.fiber_direction, sp, sq);
            }
            gain * g
        })
        .collect()
}

fn kernel(p: SurfacePoint, c: SurfacePoint, dir: UnitVector, sp: f64, sq: f64) -> f64 {
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    let along = dx * dir.x + dy * dir.y;
    let n = dir.normal();
    let across = dx * n.x + dy * n.y;
    (-0.5 * ((along / sp).powi(2) + (across / sq).powi(2))).exp()
}

/// Noiseless wavelength shifts (nm) for a contact.
pub fn sensor_response(layout: &SkinLayout, params: &FieldParams, contact: Contact) -> Result<Vec<f64>> {
    layout.area().check(contact.point)?;
    if !(contact.force >= 0.0 && contact.force.is_finite()) {
        return Err(Error::InvalidArgument(format!("contact force {}", contact.force)));
    }
    Ok(unit_response(layout, params, contact.point).into_iter().map(|r| r * contact.force).collect())
}

/// Adds i.i.d. zero-mean Gaussian interrogator noise to every channel.
pub fn add_noise<R: Rng + ?Sized>(mut frame: SensorFrame, sigma_nm: f64, rng: &mut R) -> SensorFrame {
    if sigma_nm > 0.0 {
        let normal = Normal::new(0.0, sigma_nm).expect("finite positive sigma");
        for s in &mut frame.shifts {
            *s += normal.sample(rng);
        }
    }
    frame
}

/// True when any channel moved by at least `threshold_nm`.
pub fn detect_contact(frame: &SensorFrame, threshold_nm: f64) -> bool {
    frame.shifts.iter().any(|s| s.abs() >= threshold_nm)
}

/// Simulates one ramp-and-release indentation at `location`.
pub fn generate_indentation<R: Rng + ?Sized>(
    layout: &SkinLayout,
    params: &FieldParams,
    protocol: &Protocol,
    id: u64,
    location: SurfacePoint,
    rng: &mut R,
) -> Result<Indentation> {
    let unit = {
        layout.area().check(location)?;
        unit_response(layout, params, location)
    };
    let frames = (0..protocol.frames)
        .map(|i| {
            let force = protocol.force_at(i);
            let frame = SensorFrame {
                t: i as f64 / protocol.sample_rate_hz,
                force_z: force,
                shifts: unit.iter().map(|u| u * force).collect(),
            };
            add_noise(frame, protocol.noise_sigma, rng)
        })
        .collect();
    Ok(Indentation { id, location, frames, loading_end: protocol.loading_end() })
}

/// Random stream for indentation `id` of the dataset seeded with `seed`.
pub fn indentation_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn uniform_point<R: Rng + ?Sized>(area: &SensedArea, rng: &mut R) -> SurfacePoint {
    SurfacePoint::new(rng.random_range(area.x_min..=area.x_max), rng.random_range(area.y_min..=area.y_max))
}

/// Generates `n` indentations at i.i.d. uniform locations.
///
/// Indentation `id` draws its location and noise from its own stream, so the
/// result does not depend on how the work is scheduled.
pub fn generate_dataset(
    layout: &SkinLayout,
    params: &FieldParams,
    protocol: &Protocol,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset needs at least one indentation".into()));
    }
    params.validate()?;
    let area = layout.area();
    let indentations = (0..n as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = indentation_rng(seed, id);
            let location = uniform_point(&area, &mut rng);
            generate_indentation(layout, params, protocol, id, location, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { layout: layout.clone(), params: params.clone(), protocol: protocol.clone(), indentations, seed })
}

/// Raster pitch used for receptive-field maps, mm.
pub const RASTER_PITCH_MM: f64 = 0.5;

/// Regular raster over the sensed area (inclusive of both edges).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub area: SensedArea,
    pub pitch: f64,
    pub cols: usize,
    pub rows: usize,
}

impl Raster {
    pub fn new(area: SensedArea, pitch: f64) -> Self {
        let cols = (area.width() / pitch).round() as usize + 1;
        let rows = (area.height() / pitch).round() as usize + 1;
        Self { area, pitch, cols, rows }
    }

    pub fn point(&self, col: usize, row: usize) -> SurfacePoint {
        SurfacePoint::new(self.area.x_min + col as f64 * self.pitch, self.area.y_min + row as f64 * self.pitch)
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-sensor hot-spot areas on the 0.5 mm raster.
#[derive(Debug, Clone, PartialEq)]
pub struct HotspotAreas {
    /// mm², in sensor order.
    pub areas: Vec<f64>,
    pub median: f64,
}

/// Per-newton response of every sensor on the raster, row-major, sensor-minor.
pub(crate) fn raster_unit_responses(layout: &SkinLayout, params: &FieldParams, raster: &Raster) -> Vec<Vec<f64>> {
    (0..raster.rows)
        .into_par_iter()
        .flat_map_iter(|row| (0..raster.cols).map(move |col| unit_response(layout, params, raster.point(col, row))))
        .collect()
}

/// Hot-spot membership: the 20 pm criterion is met at a sixth of the peak force.
pub(crate) fn is_hotspot(unit_response_nm_per_n: f64) -> bool {
    unit_response_nm_per_n > 0.0 && RECEPTIVE_SHIFT_NM / unit_response_nm_per_n <= HOTSPOT_FORCE_N
}

/// Rasterizes each sensor's hot spot and returns the areas and their median.
pub fn calibrate_hotspots(layout: &SkinLayout, params: &FieldParams) -> Result<HotspotAreas> {
    params.validate()?;
    if params.gain(layout.thickness) <= 0.0 {
        return Err(Error::Calibration("zero sensitivity".into()));
    }
    let raster = Raster::new(layout.area(), RASTER_PITCH_MM);
    let cell = raster.pitch * raster.pitch;
    let responses = raster_unit_responses(layout, params, &raster);
    let mut counts = vec![0usize; layout.sensors.len()];
    for r in &responses {
        for (c, &v) in counts.iter_mut().zip(r) {
            if is_hotspot(v) {
                *c += 1;
            }
        }
    }
    let areas: Vec<f64> = counts.iter().map(|&c| c as f64 * cell).collect();
    let median = crate::evaluation::stats::percentile(&areas, 0.5)?;
    Ok(HotspotAreas { areas, median })
}

/// Bisects `peak_sensitivity` so the median hot-spot area reaches `target_mm2`.
pub fn calibrate_peak_sensitivity(layout: &SkinLayout, params: &FieldParams, target_mm2: f64) -> Result<f64> {
    let threshold = RECEPTIVE_SHIFT_NM / HOTSPOT_FORCE_N;
    let median_at = |p: f64| {
        let trial = FieldParams { peak_sensitivity: p, ..params.clone() };
        calibrate_hotspots(layout, &trial).map(|h| h.median)
    };
    let mut lo = threshold;
    let mut hi = threshold * 2.0;
    while median_at(hi)? < target_mm2 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Calibration("target area unreachable".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if median_at(mid)? < target_mm2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
