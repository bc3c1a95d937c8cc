//! Exposure layouts: dosed polygons, the built-in junction geometries, and
//! rasterization onto exposure grids.

mod format;
mod geometry;
mod raster;

pub use format::{parse_layout, parse_layout_file, write_layout, write_layout_file};
pub use geometry::{build_geometry, GeometryKind, GeometryParams};
pub use raster::{rasterize, rasterize_shape_coverage, ExposureGrid};

use crate::error::{EblError, Result};

/// 2D point in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }
}

/// One exposed polygon with a dose factor and a role tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub tag: String,
    pub dose_factor: f64,
    /// Simple polygon, >= 3 vertices, nm.
    pub vertices: Vec<Point>,
}

impl Shape {
    /// Signed shoelace area; positive for counter-clockwise winding.
    pub fn signed_area_nm2(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area_nm2(&self) -> f64 {
        self.signed_area_nm2().abs()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for v in &self.vertices {
            cx += v.x;
            cy += v.y;
        }
        Point::new(cx / n, cy / n)
    }

    fn validate(&self, bounds: (f64, f64)) -> Result<()> {
        if self.vertices.len() < 3 {
            return Err(EblError::geometry(
                &self.tag,
                format!("needs >= 3 vertices, has {}", self.vertices.len()),
            ));
        }
        if !(self.dose_factor > 0.0) {
            return Err(EblError::geometry(
                &self.tag,
                format!("dose factor must be > 0, got {}", self.dose_factor),
            ));
        }
        for v in &self.vertices {
            if !(v.x >= 0.0 && v.x <= bounds.0 && v.y >= 0.0 && v.y <= bounds.1) {
                return Err(EblError::geometry(
                    &self.tag,
                    format!("vertex ({}, {}) outside bounds {bounds:?}", v.x, v.y),
                ));
            }
        }
        if self_intersects(&self.vertices) {
            return Err(EblError::geometry(&self.tag, "polygon self-intersects"));
        }
        if self.area_nm2() <= 0.0 {
            return Err(EblError::geometry(&self.tag, "polygon has zero area"));
        }
        Ok(())
    }
}

/// Polygons with dose factors over a rectangular field.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternLayout {
    pub shapes: Vec<Shape>,
    /// Nominal exposure dose in uC/cm^2, multiplied per shape by its factor.
    pub base_dose: f64,
    /// Field (width, height) in nm; the origin is the lower-left corner.
    pub bounds: (f64, f64),
}

impl PatternLayout {
    pub fn new(shapes: Vec<Shape>, base_dose: f64, bounds: (f64, f64)) -> Result<PatternLayout> {
        let layout = PatternLayout {
            shapes,
            base_dose,
            bounds,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_dose > 0.0) {
            return Err(EblError::validation(
                "layout.base_dose",
                format!("must be > 0, got {}", self.base_dose),
            ));
        }
        if !(self.bounds.0 > 0.0 && self.bounds.1 > 0.0) {
            return Err(EblError::validation(
                "layout.bounds",
                "both dimensions must be > 0",
            ));
        }
        for shape in &self.shapes {
            shape.validate(self.bounds)?;
        }
        Ok(())
    }

    pub fn shape_by_tag(&self, tag: &str) -> Option<&Shape> {
        self.shapes.iter().find(|s| s.tag == tag)
    }

    /// Total exposed area within `radius` of a point, by fine sampling.
    /// Overlapping shapes count once.
    pub fn exposed_area_within_nm2(&self, center: Point, radius: f64, sample_pitch: f64) -> f64 {
        let mut area = 0.0;
        let steps = (2.0 * radius / sample_pitch).ceil() as i64;
        for iy in 0..=steps {
            for ix in 0..=steps {
                let x = center.x - radius + ix as f64 * sample_pitch;
                let y = center.y - radius + iy as f64 * sample_pitch;
                let dx = x - center.x;
                let dy = y - center.y;
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                let p = Point::new(x, y);
                if self.shapes.iter().any(|s| point_in_polygon(p, &s.vertices)) {
                    area += sample_pitch * sample_pitch;
                }
            }
        }
        area
    }
}

/// Probe segments through the bridge gap of a junction layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeLines {
    /// Crosses the gap along y, spanning 200 nm of exposed region each side.
    pub vertical: (Point, Point),
    /// Crosses the bridge region along x.
    pub horizontal: (Point, Point),
    /// Length of the unexposed gap, nm.
    pub bridge_extent_nm: f64,
}

impl ProbeLines {
    /// The bridge centroid: intersection of the two probe segments.
    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.horizontal.0.x + self.horizontal.1.x),
            0.5 * (self.vertical.0.y + self.vertical.1.y),
        )
    }
}

pub(crate) fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut sum = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        sum += a.x * b.y - b.x * a.y;
    }
    0.5 * sum
}

pub(crate) fn point_in_polygon(p: Point, vertices: &[Point]) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let vi = vertices[i];
        let vj = vertices[j];
        if (vi.y > p.y) != (vj.y > p.y)
            && p.x < (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Proper-crossing test between non-adjacent polygon edges.
fn self_intersects(vertices: &[Point]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let a1 = vertices[i];
        let a2 = vertices[(i + 1) % n];
        for j in (i + 1)..n {
            // Skip adjacent edges (shared endpoint).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let b1 = vertices[j];
            let b2 = vertices[(j + 1) % n];
            if segments_properly_cross(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

fn segments_properly_cross(a1: Point, a2: Point, b1: Point, b2: Point) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}
