//! Developed (unrolled) skin surface, fiber path and FBG placement.
//!
//! Coordinates live on the developed plane of the forearm cover: `x` is the
//! arc coordinate around the elbow–wrist axis (centered, `x = 0` at mid-span)
//! and `y` runs from the elbow (`y = 0`) to the wrist (`y = y_extent`).

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::textfmt;

pub const SENSOR_COUNT: usize = 16;
pub const FIRST_WAVELENGTH_NM: f64 = 1530.0;
pub const WAVELENGTH_PITCH_NM: f64 = 2.3;
pub const GRATING_LENGTH_MM: f64 = 8.0;
/// Along-fiber spacing between neighbouring gratings at the wrist end.
pub const MIN_SPACING_MM: f64 = 12.9;
/// Along-fiber spacing between neighbouring gratings at the elbow end.
pub const MAX_SPACING_MM: f64 = 24.5;

/// Radius that maps 90° of rotation onto 90 mm of developed arc.
pub const DEFAULT_EFFECTIVE_RADIUS_MM: f64 = 180.0 / PI;

const EPS: f64 = 1e-9;

/// A point on the developed skin surface, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
}

impl SurfacePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Unit direction in the developed plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    pub x: f64,
    pub y: f64,
}

impl UnitVector {
    /// Normalizes `(x, y)`; returns `None` for a zero or non-finite vector.
    pub fn new(x: f64, y: f64) -> Option<Self> {
        let n = x.hypot(y);
        (n > 0.0 && n.is_finite()).then(|| Self { x: x / n, y: y / n })
    }

    /// Left-hand normal (rotated +90°).
    pub fn normal(&self) -> Self {
        Self { x: -self.y, y: self.x }
    }
}

/// Axis-aligned sensed rectangle on the developed plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensedArea {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SensedArea {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> SurfacePoint {
        SurfacePoint::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Closed containment test with a 1e-9 mm tolerance.
    pub fn contains(&self, p: SurfacePoint) -> bool {
        p.x >= self.x_min - EPS && p.x <= self.x_max + EPS && p.y >= self.y_min - EPS && p.y <= self.y_max + EPS
    }

    pub fn clamp(&self, p: SurfacePoint) -> SurfacePoint {
        SurfacePoint::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }

    pub(crate) fn check(&self, p: SurfacePoint) -> Result<()> {
        if !p.is_finite() || !self.contains(p) {
            return Err(Error::OutOfDomain(format!(
                "point ({}, {}) outside sensed area [{}, {}] x [{}, {}]",
                p.x, p.y, self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }
}

/// One fiber Bragg grating along the fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct FbgSensor {
    /// 1-based position along the fiber, counted from the wrist end.
    pub index: usize,
    pub center: SurfacePoint,
    /// Fiber tangent at the grating center.
    pub fiber_direction: UnitVector,
    pub grating_length: f64,
    pub nominal_wavelength: f64,
    /// Arc length from the fiber entry point to the grating center.
    pub arc_position: f64,
}

/// Piece of the fiber centerline.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSegment {
    Line {
        from: SurfacePoint,
        to: SurfacePoint,
    },
    /// Circular arc swept from `start_angle` by `sweep` radians
    /// (positive = counter-clockwise).
    Arc {
        center: SurfacePoint,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl PathSegment {
    pub fn length(&self) -> f64 {
        match *self {
            PathSegment::Line { from, to } => surface_distance(from, to),
            PathSegment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point and unit tangent at arc length `s` from the segment start.
    fn sample(&self, s: f64) -> (SurfacePoint, UnitVector) {
        match *self {
            PathSegment::Line { from, to } => {
                let len = self.length();
                let t = if len > 0.0 { s / len } else { 0.0 };
                let p = SurfacePoint::new(from.x + (to.x - from.x) * t, from.y + (to.y - from.y) * t);
                let dir = UnitVector::new(to.x - from.x, to.y - from.y).unwrap_or(UnitVector { x: 1.0, y: 0.0 });
                (p, dir)
            }
            PathSegment::Arc { center, radius, start_angle, sweep } => {
                let sign = sweep.signum();
                let theta = start_angle + sign * s / radius;
                let p = SurfacePoint::new(center.x + radius * theta.cos(), center.y + radius * theta.sin());
                let dir = UnitVector { x: -sign * theta.sin(), y: sign * theta.cos() };
                (p, dir)
            }
        }
    }

    fn curvature_radius(&self) -> f64 {
        match *self {
            PathSegment::Line { .. } => f64::INFINITY,
            PathSegment::Arc { radius, .. } => radius,
        }
    }
}

/// Fiber centerline as a chain of line and arc segments.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPath {
    pub segments: Vec<PathSegment>,
}

impl FiberPath {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(PathSegment::length).sum()
    }

    pub fn min_curvature_radius(&self) -> f64 {
        self.segments.iter().map(PathSegment::curvature_radius).fold(f64::INFINITY, f64::min)
    }

    /// Point and tangent at arc length `s` (clamped to the path).
    pub fn point_at(&self, s: f64) -> (SurfacePoint, UnitVector) {
        let mut remaining = s.max(0.0);
        for (i, seg) in self.segments.iter().enumerate() {
            let len = seg.length();
            if remaining <= len || i + 1 == self.segments.len() {
                return seg.sample(remaining.min(len));
            }
            remaining -= len;
        }
        (SurfacePoint::new(0.0, 0.0), UnitVector { x: 1.0, y: 0.0 })
    }

    /// Samples the path as a polyline with roughly `step` mm spacing.
    pub fn polyline(&self, step: f64) -> Vec<SurfacePoint> {
        let total = self.length();
        let n = (total / step).ceil().max(1.0) as usize;
        (0..=n).map(|i| self.point_at(total * i as f64 / n as f64).0).collect()
    }

    /// Serpentine with passes running around the forearm (along `x`) at the
    /// given `pass_y` levels, joined by semicircular turns on alternating sides.
    pub fn serpentine(pass_y: &[f64], half_width: f64) -> Self {
        let mut segments = Vec::new();
        for (i, &y) in pass_y.iter().enumerate() {
            let (x0, x1) = if i % 2 == 0 { (-half_width, half_width) } else { (half_width, -half_width) };
            segments.push(PathSegment::Line { from: SurfacePoint::new(x0, y), to: SurfacePoint::new(x1, y) });
            if let Some(&next_y) = pass_y.get(i + 1) {
                let radius = 0.5 * (y - next_y);
                let center = SurfacePoint::new(x1, 0.5 * (y + next_y));
                // Right-hand turns sweep clockwise, left-hand turns counter-clockwise.
                let sweep = if x1 > 0.0 { -PI } else { PI };
                segments.push(PathSegment::Arc { center, radius, start_angle: PI / 2.0, sweep });
            }
        }
        Self { segments }
    }
}

/// Geometry of the sensorized skin.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinLayout {
    /// Sensed length along the elbow–wrist axis, mm.
    pub y_extent: f64,
    /// Sensed rotation span, degrees.
    pub r_extent: f64,
    pub effective_radius: f64,
    pub thickness: f64,
    pub sensors: Vec<FbgSensor>,
    pub fiber_length: f64,
    pub min_bend_radius: f64,
    /// Fiber centerline; absent for layouts imported from a sensor table.
    pub path: Option<FiberPath>,
}

/// Pass levels (mm, wrist first) and half-width of the default serpentine.
const DEFAULT_PASS_Y: [f64; 4] = [105.0, 70.0, 47.0, 18.0];
const DEFAULT_HALF_WIDTH: f64 = 18.0;

impl SkinLayout {
    pub fn area(&self) -> SensedArea {
        let half = 0.5 * arc_from_degrees(self.r_extent, self.effective_radius).unwrap_or(f64::NAN);
        SensedArea { x_min: -half, x_max: half, y_min: 0.0, y_max: self.y_extent }
    }

    /// Distances between consecutive gratings measured along the fiber.
    pub fn along_fiber_spacings(&self) -> Vec<f64> {
        self.sensors.windows(2).map(|w| w[1].arc_position - w[0].arc_position).collect()
    }

    /// Checks the structural invariants of a layout.
    pub fn validate(&self) -> Result<()> {
        let area = self.area();
        if self.sensors.is_empty() {
            return Err(Error::Validation("layout has no sensors".into()));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            if s.index != i + 1 {
                return Err(Error::Validation(format!("sensor {} has index {}", i + 1, s.index)));
            }
            if !area.contains(s.center) {
                return Err(Error::Validation(format!("sensor {} outside sensed area", s.index)));
            }
        }
        for w in self.sensors.windows(2) {
            if w[1].nominal_wavelength <= w[0].nominal_wavelength {
                return Err(Error::Validation("nominal wavelengths not increasing".into()));
            }
        }
        let spacings = self.along_fiber_spacings();
        for (i, &s) in spacings.iter().enumerate() {
            if !(MIN_SPACING_MM - 1e-6..=MAX_SPACING_MM + 1e-6).contains(&s) {
                return Err(Error::Validation(format!("spacing {} = {s} mm out of range", i + 1)));
            }
        }
        if spacings.windows(2).any(|w| w[1] < w[0] - 1e-9) {
            return Err(Error::Validation("spacings shrink from wrist to elbow".into()));
        }
        if let Some(path) = &self.path {
            if path.min_curvature_radius() < self.min_bend_radius {
                return Err(Error::Validation("fiber bend radius below minimum".into()));
            }
            if path.length() > self.fiber_length + 1e-9 {
                return Err(Error::Validation("fiber path longer than the fiber".into()));
            }
        }
        Ok(())
    }

    /// Writes the per-sensor table (6 significant digits, tab separated).
    pub fn to_table(&self) -> String {
        let mut out = String::from("index\tx_mm\ty_mm\tdir_x\tdir_y\tlambda_nm\n");
        for s in &self.sensors {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.index,
                textfmt::sig(s.center.x, 6),
                textfmt::sig(s.center.y, 6),
                textfmt::sig(s.fiber_direction.x, 6),
                textfmt::sig(s.fiber_direction.y, 6),
                textfmt::sig(s.nominal_wavelength, 6),
            );
        }
        out
    }

    /// Reads a sensor table written by [`SkinLayout::to_table`]. Extents take
    /// their default values; along-fiber positions are approximated by the
    /// cumulative straight-line distance between consecutive centers.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |row: usize, message: String| Error::Parse { path: "<layout table>".into(), row, message };
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty table".into()))?;
        let cols: Vec<&str> = header.split_whitespace().collect();
        if cols != ["index", "x_mm", "y_mm", "dir_x", "dir_y", "lambda_nm"] {
            return Err(parse_err(1, format!("unexpected header {header:?}")));
        }
        let mut sensors: Vec<FbgSensor> = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(parse_err(i + 1, format!("expected 6 columns, got {}", fields.len())));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k]
                    .parse::<f64>()
                    .map_err(|_| parse_err(i + 1, format!("non-numeric {:?} in column {}", fields[k], cols[k])))
            };
            let index =
                fields[0].parse::<usize>().map_err(|_| parse_err(i + 1, format!("bad index {:?}", fields[0])))?;
            let center = SurfacePoint::new(num(1)?, num(2)?);
            let fiber_direction =
                UnitVector::new(num(3)?, num(4)?).ok_or_else(|| parse_err(i + 1, "zero direction".into()))?;
            let arc_position =
                sensors.last().map_or(0.0, |prev| prev.arc_position + surface_distance(prev.center, center));
            sensors.push(FbgSensor {
                index,
                center,
                fiber_direction,
                grating_length: GRATING_LENGTH_MM,
                nominal_wavelength: num(5)?,
                arc_position,
            });
        }
        Ok(Self { sensors, path: None, ..build_default_layout() })
    }
}

/// Converts a rotation (degrees) about the forearm axis into developed arc length.
pub fn arc_from_degrees(degrees: f64, radius: f64) -> Result<f64> {
    if !degrees.is_finite() || !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidArgument(format!("arc_from_degrees({degrees}, {radius})")));
    }
    Ok(radius * degrees * PI / 180.0)
}

pub fn degrees_from_arc(arc: f64, radius: f64) -> Result<f64> {
    if !arc.is_finite() || !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidArgument(format!("degrees_from_arc({arc}, {radius})")));
    }
    Ok(arc / radius * 180.0 / PI)
}

pub fn surface_distance(p: SurfacePoint, q: SurfacePoint) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Bragg condition: reflected wavelength from effective index and grating pitch.
pub fn bragg_wavelength(eta_eff: f64, pitch_nm: f64) -> Result<f64> {
    if !(eta_eff > 0.0 && pitch_nm > 0.0 && eta_eff.is_finite() && pitch_nm.is_finite()) {
        return Err(Error::InvalidArgument(format!("bragg_wavelength({eta_eff}, {pitch_nm})")));
    }
    Ok(2.0 * eta_eff * pitch_nm)
}

/// Inverse of [`bragg_wavelength`] for the grating pitch.
pub fn bragg_pitch(wavelength_nm: f64, eta_eff: f64) -> Result<f64> {
    if !(eta_eff > 0.0 && wavelength_nm > 0.0 && eta_eff.is_finite() && wavelength_nm.is_finite()) {
        return Err(Error::InvalidArgument(format!("bragg_pitch({wavelength_nm}, {eta_eff})")));
    }
    Ok(wavelength_nm / (2.0 * eta_eff))
}

/// Linearly graded along-fiber spacings, wrist end first.
pub fn graded_spacings(count: usize) -> Vec<f64> {
    let n = count.saturating_sub(1);
    (0..n)
        .map(|k| {
            if n == 1 {
                MIN_SPACING_MM
            } else {
                MIN_SPACING_MM + (MAX_SPACING_MM - MIN_SPACING_MM) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// The default 16-grating layout on a four-pass serpentine.
///
/// The fiber enters at the wrist end; gratings are numbered along the fiber,
/// so spacing grows from 12.9 mm near the wrist to 24.5 mm near the elbow.
pub fn build_default_layout() -> SkinLayout {
    let path = FiberPath::serpentine(&DEFAULT_PASS_Y, DEFAULT_HALF_WIDTH);
    let spacings = graded_spacings(SENSOR_COUNT);
    let chain: f64 = spacings.iter().sum();
    let first = 0.5 * (path.length() - chain);

    let mut arc = first;
    let mut sensors = Vec::with_capacity(SENSOR_COUNT);
    for i in 0..SENSOR_COUNT {
        if i > 0 {
            arc += spacings[i - 1];
        }
        let (center, fiber_direction) = path.point_at(arc);
        sensors.push(FbgSensor {
            index: i + 1,
            center,
            fiber_direction,
            grating_length: GRATING_LENGTH_MM,
            nominal_wavelength: FIRST_WAVELENGTH_NM + WAVELENGTH_PITCH_NM * i as f64,
            arc_position: arc,
        });
    }

    SkinLayout {
        y_extent: 120.0,
        r_extent: 90.0,
        effective_radius: DEFAULT_EFFECTIVE_RADIUS_MM,
        thickness: 8.0,
        sensors,
        fiber_length: 430.0,
        min_bend_radius: 4.0,
        path: Some(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arc_conversion_examples() {
        let r = DEFAULT_EFFECTIVE_RADIUS_MM;
        assert_eq!(arc_from_degrees(0.0, r).unwrap(), 0.0);
        assert!((arc_from_degrees(90.0, r).unwrap() - 90.0).abs() < 1e-9);
        assert!((arc_from_degrees(45.0, r).unwrap() - 45.0).abs() < 1e-9);
        assert!(arc_from_degrees(f64::NAN, r).is_err());
        assert!(arc_from_degrees(10.0, 0.0).is_err());
    }

    #[test]
    fn distances() {
        let p = SurfacePoint::new(1.5, -2.0);
        assert_eq!(surface_distance(p, p), 0.0);
        assert_eq!(surface_distance(SurfacePoint::new(0.0, 0.0), SurfacePoint::new(3.0, 4.0)), 5.0);
        assert_eq!(surface_distance(SurfacePoint::new(-45.0, 0.0), SurfacePoint::new(45.0, 0.0)), 90.0);
    }

    #[test]
    fn bragg_examples() {
        assert!((bragg_wavelength(1.45, 530.0).unwrap() - 1537.0).abs() < 1e-9);
        assert_eq!(bragg_wavelength(0.5, 1.0).unwrap(), 1.0);
        assert!((bragg_wavelength(1.45, 527.586).unwrap() - 1530.0).abs() < 0.01);
        assert!(bragg_wavelength(0.0, 530.0).is_err());
        assert!(bragg_wavelength(1.45, -1.0).is_err());
    }

    #[test]
    fn default_layout_facts() {
        let layout = build_default_layout();
        layout.validate().unwrap();
        assert_eq!(layout.sensors.len(), 16);
        let sp = layout.along_fiber_spacings();
        let min = sp.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = sp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((min - 12.9).abs() < 1e-9);
        assert!((max - 24.5).abs() < 1e-9);
        assert_eq!(layout.sensors[0].nominal_wavelength, 1530.0);
        assert!((layout.sensors[15].nominal_wavelength - 1564.5).abs() < 1e-9);
        // Wrist end near y = 120, elbow end near y = 0.
        assert!(layout.sensors[0].center.y > 100.0);
        assert!(layout.sensors[15].center.y < 20.0);
    }

    #[test]
    fn layout_is_deterministic() {
        assert_eq!(build_default_layout(), build_default_layout());
    }

    #[test]
    fn sampled_polyline_respects_bend_radius() {
        let layout = build_default_layout();
        let path = layout.path.as_ref().unwrap();
        let pts = path.polyline(0.5);
        for w in pts.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            if cross.abs() < 1e-9 {
                continue;
            }
            let r = surface_distance(a, b) * surface_distance(b, c) * surface_distance(a, c) / (2.0 * cross.abs());
            assert!(r >= layout.min_bend_radius * 0.99, "circumradius {r}");
        }
        assert!(path.length() <= layout.fiber_length);
    }

    #[test]
    fn sensor_directions_follow_the_path() {
        let layout = build_default_layout();
        let path = layout.path.as_ref().unwrap();
        for s in &layout.sensors {
            let (a, _) = path.point_at(s.arc_position - 0.01);
            let (b, _) = path.point_at(s.arc_position + 0.01);
            let d = UnitVector::new(b.x - a.x, b.y - a.y).unwrap();
            assert!((d.x - s.fiber_direction.x).abs() < 1e-4);
            assert!((d.y - s.fiber_direction.y).abs() < 1e-4);
        }
    }

    #[test]
    fn table_round_trip() {
        let layout = build_default_layout();
        let back = SkinLayout::from_table(&layout.to_table()).unwrap();
        assert_eq!(back.sensors.len(), 16);
        for (a, b) in layout.sensors.iter().zip(&back.sensors) {
            assert!((a.center.x - b.center.x).abs() < 1e-3);
            assert!((a.center.y - b.center.y).abs() < 1e-3);
            assert!((a.nominal_wavelength - b.nominal_wavelength).abs() < 1e-3);
        }
        assert!(SkinLayout::from_table("index\tx_mm\n1\t2\n").is_err());
    }

    #[test]
    fn area_matches_default_extents() {
        let a = build_default_layout().area();
        assert!((a.x_min + 45.0).abs() < 1e-9 && (a.x_max - 45.0).abs() < 1e-9);
        assert_eq!((a.y_min, a.y_max), (0.0, 120.0));
    }

    proptest! {
        #[test]
        fn arc_round_trip(x in -1000.0f64..1000.0) {
            let r = DEFAULT_EFFECTIVE_RADIUS_MM;
            let back = arc_from_degrees(degrees_from_arc(x, r).unwrap(), r).unwrap();
            prop_assert!((back - x).abs() < 1e-9);
        }

        #[test]
        fn bragg_inversion(eta in 1.0f64..2.0, lambda in 1000.0f64..2000.0) {
            let pitch = bragg_pitch(lambda, eta).unwrap();
            let back = bragg_wavelength(eta, pitch).unwrap();
            prop_assert!(((back - lambda) / lambda).abs() < 1e-9);
        }
    }
}
