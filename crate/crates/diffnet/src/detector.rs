//! Square photodetectors on an output plane.
//!
//! A detector integrates optical power over a square region: a grid sample
//! contributes if and only if its centre lies inside the closed square, so
//! with 0.5λ pitch a 6.4λ detector aligned to a sample centre covers a
//! 13×13 footprint.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Default photodetector width in wavelengths.
pub const DEFAULT_DETECTOR_WIDTH: f64 = 6.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorSign {
    Positive,
    Negative,
    /// Non-differential detector: the class score reads this one directly.
    Single,
}

impl fmt::Display for DetectorSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorSign::Positive => write!(f, "+"),
            DetectorSign::Negative => write!(f, "-"),
            DetectorSign::Single => write!(f, "single"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRegion {
    /// Centre (x, y) on the output plane, in wavelengths.
    pub center: (f64, f64),
    /// Side length of the square, in wavelengths.
    pub width: f64,
    pub class_id: usize,
    pub sign: DetectorSign,
}

impl DetectorRegion {
    /// Index ranges (rows, cols) of the samples whose centres fall inside
    /// the closed square, on an n-by-n grid with the given pitch.
    pub fn sample_rect(&self, grid_size: usize, pitch: f64) -> (Range<usize>, Range<usize>) {
        let half_grid = (grid_size as f64 - 1.0) / 2.0;
        let hw = self.width / 2.0;
        // columns: x = (col - half) * pitch inside [cx - hw, cx + hw]
        let col_lo = ((self.center.0 - hw) / pitch + half_grid).ceil().max(0.0) as usize;
        let col_hi = (((self.center.0 + hw) / pitch + half_grid).floor() as i64 + 1)
            .clamp(0, grid_size as i64) as usize;
        // rows: y = (half - row) * pitch inside [cy - hw, cy + hw]
        let row_lo = ((half_grid - (self.center.1 + hw) / pitch).ceil().max(0.0)) as usize;
        let row_hi = ((half_grid - (self.center.1 - hw) / pitch).floor() as i64 + 1)
            .clamp(0, grid_size as i64) as usize;
        (row_lo..row_hi.max(row_lo), col_lo..col_hi.max(col_lo))
    }

    /// The region must sit entirely inside the physical aperture of the grid.
    pub fn check_in_grid(&self, grid_size: usize, pitch: f64) -> Result<()> {
        if !self.width.is_finite() || self.width <= 0.0 {
            return Err(Error::Layout(format!(
                "detector for class {} has invalid width {}",
                self.class_id, self.width
            )));
        }
        let half_side = grid_size as f64 * pitch / 2.0;
        let hw = self.width / 2.0;
        let (cx, cy) = self.center;
        if cx - hw < -half_side || cx + hw > half_side || cy - hw < -half_side || cy + hw > half_side
        {
            return Err(Error::Layout(format!(
                "detector for class {} ({} sign) at ({cx}, {cy}) width {} extends outside the \
                 {:.1}λ aperture",
                self.class_id, self.sign, self.width, 2.0 * half_side
            )));
        }
        Ok(())
    }

    fn touches(&self, other: &DetectorRegion) -> bool {
        let lim = (self.width + other.width) / 2.0;
        (self.center.0 - other.center.0).abs() <= lim
            && (self.center.1 - other.center.1).abs() <= lim
    }
}

/// Optical signal of one detector: sum of |u|² over the covered samples.
pub fn read_detector(field: &ComplexField, region: &DetectorRegion) -> Result<f64> {
    region.check_in_grid(field.grid_size(), field.pitch())?;
    let (rows, cols) = region.sample_rect(field.grid_size(), field.pitch());
    let n = field.grid_size();
    let mut acc = 0.0;
    for row in rows {
        for v in &field.values()[row * n + cols.start..row * n + cols.end] {
            acc += v.norm_sqr();
        }
    }
    Ok(acc)
}

/// The detectors on one network's output plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorLayout {
    pub plane_id: usize,
    regions: Vec<DetectorRegion>,
}

impl DetectorLayout {
    /// Validates that every region is inside the grid and that no two
    /// regions overlap (touching edges count as overlap, since a sample
    /// centre on the shared edge would be read twice).
    pub fn new(
        plane_id: usize,
        regions: Vec<DetectorRegion>,
        grid_size: usize,
        pitch: f64,
    ) -> Result<Self> {
        for r in &regions {
            r.check_in_grid(grid_size, pitch).map_err(|e| {
                Error::Layout(format!("plane {plane_id}: {e}"))
            })?;
        }
        for i in 0..regions.len() {
            for j in (i + 1)..regions.len() {
                if regions[i].touches(&regions[j]) {
                    return Err(Error::Layout(format!(
                        "plane {plane_id}: detector for class {} ({}) overlaps detector for \
                         class {} ({})",
                        regions[i].class_id,
                        regions[i].sign,
                        regions[j].class_id,
                        regions[j].sign,
                    )));
                }
            }
        }
        Ok(Self { plane_id, regions })
    }

    pub fn regions(&self) -> &[DetectorRegion] {
        &self.regions
    }

    /// Signals of all regions, in region order.
    pub fn read(&self, field: &ComplexField) -> Result<Vec<f64>> {
        self.regions
            .iter()
            .map(|r| read_detector(field, r))
            .collect()
    }
}

/// Evenly spaced lattice positions for `count` detectors of width `width`
/// on a plane of physical side `side`. Positions are row-major, the last
/// row centred when not full. Spacing prefers 2× the detector width and
/// shrinks to fit small planes.
fn lattice(count: usize, cols: usize, side: f64, width: f64) -> Result<Vec<(f64, f64)>> {
    let rows = count.div_ceil(cols);
    let usable = 0.92 * side;
    let max_extent = (cols.max(rows) - 1) as f64;
    let mut spacing = 2.0 * width;
    if max_extent > 0.0 {
        spacing = spacing.min((usable - width) / max_extent);
    }
    if spacing <= width {
        return Err(Error::Layout(format!(
            "cannot fit {count} detectors of width {width} on a {side:.1}λ plane"
        )));
    }
    let mut positions = Vec::with_capacity(count);
    for row in 0..rows {
        let in_row = (count - row * cols).min(cols);
        let y = ((rows as f64 - 1.0) / 2.0 - row as f64) * spacing;
        for i in 0..in_row {
            let x = (i as f64 - (in_row as f64 - 1.0) / 2.0) * spacing;
            positions.push((x, y));
        }
    }
    Ok(positions)
}

/// Default layout for a plane of `single` (or all-positive / all-negative)
/// detectors: a centred, roughly square lattice, classes in ascending order.
pub fn uniform_plane_layout(
    plane_id: usize,
    class_ids: &[usize],
    sign: DetectorSign,
    grid_size: usize,
    pitch: f64,
    width: f64,
) -> Result<DetectorLayout> {
    let side = grid_size as f64 * pitch;
    let cols = (class_ids.len() as f64).sqrt().ceil() as usize;
    let positions = lattice(class_ids.len(), cols.max(1), side, width)?;
    let regions = class_ids
        .iter()
        .zip(positions)
        .map(|(&class_id, center)| DetectorRegion {
            center,
            width,
            class_id,
            sign,
        })
        .collect();
    DetectorLayout::new(plane_id, regions, grid_size, pitch)
}

/// Default layout for a same-plane differential design: positive detectors
/// on a lattice in the upper half-plane, negatives mirrored below, each
/// class's pair vertically aligned.
pub fn differential_plane_layout(
    plane_id: usize,
    class_ids: &[usize],
    grid_size: usize,
    pitch: f64,
    width: f64,
) -> Result<DetectorLayout> {
    let side = grid_size as f64 * pitch;
    let q = class_ids.len();
    let cols = ((2 * q) as f64).sqrt().ceil() as usize;
    let rows = q.div_ceil(cols);
    let usable = 0.92 * side;
    let mut spacing = 2.0 * width;
    if cols > 1 {
        spacing = spacing.min((usable - width) / (cols - 1) as f64);
    }
    // vertical extent: rows in each half at ±(row + 0.5) · spacing
    spacing = spacing.min((usable / 2.0 - width / 2.0) / (rows as f64 - 0.5));
    if spacing <= width {
        return Err(Error::Layout(format!(
            "cannot fit {} detector pairs of width {width} on a {side:.1}λ plane",
            q
        )));
    }
    let mut regions = Vec::with_capacity(2 * q);
    for (i, &class_id) in class_ids.iter().enumerate() {
        let row = i / cols;
        let in_row = (q - row * cols).min(cols);
        let x = ((i % cols) as f64 - (in_row as f64 - 1.0) / 2.0) * spacing;
        let y = (row as f64 + 0.5) * spacing;
        regions.push(DetectorRegion {
            center: (x, y),
            width,
            class_id,
            sign: DetectorSign::Positive,
        });
        regions.push(DetectorRegion {
            center: (x, -y),
            width,
            class_id,
            sign: DetectorSign::Negative,
        });
    }
    DetectorLayout::new(plane_id, regions, grid_size, pitch)
}

/// Parse a detector layout file: one detector per line,
/// `plane class sign cx cy width`, with `#` comments. Sign is `+`, `-`
/// or `single`/`s`. Returns one layout per plane id, sorted by plane.
pub fn parse_layouts(text: &str, grid_size: usize, pitch: f64) -> Result<Vec<DetectorLayout>> {
    let mut per_plane: Vec<(usize, Vec<DetectorRegion>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Layout(format!(
                "line {}: expected 6 fields `plane class sign cx cy width`, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_int = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| {
                Error::Layout(format!("line {}: bad {what} `{s}`", lineno + 1))
            })
        };
        let parse_num = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Layout(format!("line {}: bad {what} `{s}`", lineno + 1)))
        };
        let plane = parse_int(fields[0], "plane id")?;
        let class_id = parse_int(fields[1], "class id")?;
        let sign = match fields[2] {
            "+" | "pos" | "positive" => DetectorSign::Positive,
            "-" | "neg" | "negative" => DetectorSign::Negative,
            "s" | "single" => DetectorSign::Single,
            other => {
                return Err(Error::Layout(format!(
                    "line {}: unknown sign `{other}`",
                    lineno + 1
                )))
            }
        };
        let cx = parse_num(fields[3], "centre x")?;
        let cy = parse_num(fields[4], "centre y")?;
        let width = parse_num(fields[5], "width")?;
        let region = DetectorRegion {
            center: (cx, cy),
            width,
            class_id,
            sign,
        };
        match per_plane.iter_mut().find(|(p, _)| *p == plane) {
            Some((_, regions)) => regions.push(region),
            None => per_plane.push((plane, vec![region])),
        }
    }
    if per_plane.is_empty() {
        return Err(Error::Layout("layout file defines no detectors".into()));
    }
    per_plane.sort_by_key(|(p, _)| *p);
    per_plane
        .into_iter()
        .map(|(plane_id, regions)| DetectorLayout::new(plane_id, regions, grid_size, pitch))
        .collect()
}

/// Inverse of [`parse_layouts`].
pub fn render_layouts(layouts: &[DetectorLayout]) -> String {
    let mut out = String::from("# plane class sign cx cy width\n");
    for layout in layouts {
        for r in layout.regions() {
            let sign = match r.sign {
                DetectorSign::Positive => "+",
                DetectorSign::Negative => "-",
                DetectorSign::Single => "single",
            };
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                layout.plane_id, r.class_id, sign, r.center.0, r.center.1, r.width
            ));
        }
    }
    out
}
