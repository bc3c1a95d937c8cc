//! Polygon rasterization with exact area-fraction antialiasing: every cell's
//! value is the clipped polygon area inside it, so total dose is conserved.

use super::{PatternLayout, Point, Shape};
use crate::error::Result;
use ndarray::Array2;
use rayon::prelude::*;

/// Applied dose per cell in uC/cm^2.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureGrid {
    pub pitch_nm: f64,
    /// Row-major; row i covers y in [i*p, (i+1)*p).
    pub values: Array2<f64>,
}

impl ExposureGrid {
    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Total applied dose integrated over area: sum * cell area.
    pub fn integrated_dose(&self) -> f64 {
        self.values.sum() * self.pitch_nm * self.pitch_nm
    }
}

/// Rasterize a layout: applied dose = base dose x dose factor, area-weighted
/// on boundary cells; overlapping shapes accumulate.
pub fn rasterize(layout: &PatternLayout, pitch_nm: f64) -> Result<ExposureGrid> {
    layout.validate()?;
    if !(pitch_nm > 0.0) {
        return Err(crate::error::EblError::validation(
            "pitch_nm",
            "must be > 0",
        ));
    }
    let width = (layout.bounds.0 / pitch_nm).round().max(1.0) as usize;
    let height = (layout.bounds.1 / pitch_nm).round().max(1.0) as usize;
    let mut values = Array2::zeros((height, width));
    for shape in &layout.shapes {
        let dose = layout.base_dose * shape.dose_factor;
        accumulate_shape(&mut values, shape, pitch_nm, dose);
    }
    Ok(ExposureGrid { pitch_nm, values })
}

/// Coverage fractions (0..=1) of one shape on the layout's grid; used by the
/// correction loop to weight per-shape dose averages.
pub fn rasterize_shape_coverage(
    shape: &Shape,
    bounds: (f64, f64),
    pitch_nm: f64,
) -> Array2<f64> {
    let width = (bounds.0 / pitch_nm).round().max(1.0) as usize;
    let height = (bounds.1 / pitch_nm).round().max(1.0) as usize;
    let mut values = Array2::zeros((height, width));
    accumulate_shape(&mut values, shape, pitch_nm, 1.0);
    values
}

fn accumulate_shape(values: &mut Array2<f64>, shape: &Shape, pitch: f64, dose: f64) {
    let (height, width) = values.dim();
    let (min_x, min_y, max_x, max_y) = bbox(&shape.vertices);
    let j0 = ((min_x / pitch).floor().max(0.0)) as usize;
    let j1 = (((max_x / pitch).ceil()) as usize).min(width);
    let i0 = ((min_y / pitch).floor().max(0.0)) as usize;
    let i1 = (((max_y / pitch).ceil()) as usize).min(height);
    if i0 >= i1 || j0 >= j1 {
        return;
    }
    let cell_area = pitch * pitch;
    // Rows are independent; parallelize over them.
    let rows: Vec<usize> = (i0..i1).collect();
    let row_results: Vec<(usize, Vec<f64>)> = rows
        .par_iter()
        .map(|&i| {
            let y0 = i as f64 * pitch;
            let y1 = y0 + pitch;
            let mut row = vec![0.0; j1 - j0];
            let mut work = ClipWorkspace::default();
            for (k, j) in (j0..j1).enumerate() {
                let x0 = j as f64 * pitch;
                let x1 = x0 + pitch;
                let area = work.clip_area(&shape.vertices, x0, x1, y0, y1);
                if area > 0.0 {
                    row[k] = dose * (area / cell_area);
                }
            }
            (i, row)
        })
        .collect();
    for (i, row) in row_results {
        for (k, v) in row.into_iter().enumerate() {
            values[(i, j0 + k)] += v;
        }
    }
}

fn bbox(vertices: &[Point]) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for v in vertices {
        min_x = min_x.min(v.x);
        min_y = min_y.min(v.y);
        max_x = max_x.max(v.x);
        max_y = max_y.max(v.y);
    }
    (min_x, min_y, max_x, max_y)
}

/// Sutherland-Hodgman clipping against an axis-aligned cell, reusing buffers.
#[derive(Default)]
struct ClipWorkspace {
    a: Vec<Point>,
    b: Vec<Point>,
}

impl ClipWorkspace {
    /// Area of `polygon` intersected with the rect [x0,x1] x [y0,y1].
    fn clip_area(&mut self, polygon: &[Point], x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        self.a.clear();
        self.a.extend_from_slice(polygon);
        // inside tests for the four half-planes
        clip_edge(&self.a, &mut self.b, |p| p.x >= x0, |p, q| {
            let t = (x0 - p.x) / (q.x - p.x);
            Point::new(x0, p.y + t * (q.y - p.y))
        });
        if self.b.is_empty() {
            return 0.0;
        }
        clip_edge(&self.b, &mut self.a, |p| p.x <= x1, |p, q| {
            let t = (x1 - p.x) / (q.x - p.x);
            Point::new(x1, p.y + t * (q.y - p.y))
        });
        if self.a.is_empty() {
            return 0.0;
        }
        clip_edge(&self.a, &mut self.b, |p| p.y >= y0, |p, q| {
            let t = (y0 - p.y) / (q.y - p.y);
            Point::new(p.x + t * (q.x - p.x), y0)
        });
        if self.b.is_empty() {
            return 0.0;
        }
        clip_edge(&self.b, &mut self.a, |p| p.y <= y1, |p, q| {
            let t = (y1 - p.y) / (q.y - p.y);
            Point::new(p.x + t * (q.x - p.x), y1)
        });
        super::signed_area(&self.a).abs()
    }
}

fn clip_edge(
    input: &[Point],
    output: &mut Vec<Point>,
    inside: impl Fn(&Point) -> bool,
    intersect: impl Fn(&Point, &Point) -> Point,
) {
    output.clear();
    let n = input.len();
    for i in 0..n {
        let current = input[i];
        let previous = input[(i + n - 1) % n];
        let current_in = inside(&current);
        let previous_in = inside(&previous);
        if current_in {
            if !previous_in {
                output.push(intersect(&previous, &current));
            }
            output.push(current);
        } else if previous_in {
            output.push(intersect(&previous, &current));
        }
    }
}
