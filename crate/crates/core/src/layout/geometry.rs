//! Parameterized builders for the built-in junction geometries.
//!
//! All four share the same scheme: an unexposed bridge gap at the field
//! center between a thin top arm and a bottom electrode whose shape is what
//! varies. Dimensions default to figure-scale values and are overridable.

use super::{PatternLayout, Point, ProbeLines, Shape};
use crate::error::{EblError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    ThinDolan,
    LShape,
    Horseshoe,
    XJunction,
}

impl GeometryKind {
    pub fn parse(name: &str) -> Result<GeometryKind> {
        match name {
            "thin-dolan" | "thin_dolan" | "thin" => Ok(GeometryKind::ThinDolan),
            "l-shape" | "l_shape" | "l" => Ok(GeometryKind::LShape),
            "horseshoe" => Ok(GeometryKind::Horseshoe),
            "x-junction" | "x_junction" | "x" => Ok(GeometryKind::XJunction),
            other => Err(EblError::validation(
                "geometry",
                format!("unknown geometry kind `{other}`"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeometryKind::ThinDolan => "thin-dolan",
            GeometryKind::LShape => "l-shape",
            GeometryKind::Horseshoe => "horseshoe",
            GeometryKind::XJunction => "x-junction",
        }
    }
}

/// Tunable dimensions; `Default` gives the documented figure-scale values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    /// Square field side, nm.
    pub field_nm: f64,
    /// Unexposed bridge gap, nm (100..=500).
    pub bridge_gap_nm: f64,
    /// Junction arm width, nm (>= 50).
    pub arm_width_nm: f64,
    /// Arm length away from the gap, nm.
    pub arm_length_nm: f64,
    /// Nominal base dose, uC/cm^2.
    pub base_dose: f64,
    /// L geometry: length and width of the horizontal foot.
    pub foot_length_nm: f64,
    pub foot_width_nm: f64,
    /// Horseshoe: outer width, base thickness, prong rise above the gap
    /// center, and half-width of the inner opening.
    pub horseshoe_width_nm: f64,
    pub horseshoe_base_nm: f64,
    pub prong_height_nm: f64,
    pub notch_half_width_nm: f64,
    /// X junction: booster square side, diagonal center offset, dose factor.
    pub booster_size_nm: f64,
    pub booster_offset_nm: f64,
    pub booster_dose_factor: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            field_nm: 10_000.0,
            bridge_gap_nm: 300.0,
            arm_width_nm: 160.0,
            arm_length_nm: 3_000.0,
            base_dose: 400.0,
            foot_length_nm: 2_000.0,
            foot_width_nm: 450.0,
            horseshoe_width_nm: 2_200.0,
            horseshoe_base_nm: 450.0,
            prong_height_nm: 750.0,
            notch_half_width_nm: 950.0,
            booster_size_nm: 1_200.0,
            booster_offset_nm: 1_700.0,
            booster_dose_factor: 4.0,
        }
    }
}

impl GeometryParams {
    fn validate(&self) -> Result<()> {
        if !(100.0..=500.0).contains(&self.bridge_gap_nm) {
            return Err(EblError::validation(
                "params.bridge_gap_nm",
                format!("must be in [100, 500], got {}", self.bridge_gap_nm),
            ));
        }
        if self.arm_width_nm < 50.0 {
            return Err(EblError::validation(
                "params.arm_width_nm",
                format!("must be >= 50, got {}", self.arm_width_nm),
            ));
        }
        for (name, v) in [
            ("field_nm", self.field_nm),
            ("arm_length_nm", self.arm_length_nm),
            ("base_dose", self.base_dose),
            ("foot_length_nm", self.foot_length_nm),
            ("foot_width_nm", self.foot_width_nm),
            ("horseshoe_width_nm", self.horseshoe_width_nm),
            ("horseshoe_base_nm", self.horseshoe_base_nm),
            ("prong_height_nm", self.prong_height_nm),
            ("notch_half_width_nm", self.notch_half_width_nm),
            ("booster_size_nm", self.booster_size_nm),
            ("booster_offset_nm", self.booster_offset_nm),
            ("booster_dose_factor", self.booster_dose_factor),
        ] {
            if !(v > 0.0) {
                return Err(EblError::validation(
                    format!("params.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        if self.notch_half_width_nm <= self.arm_width_nm / 2.0 {
            return Err(EblError::validation(
                "params.notch_half_width_nm",
                "inner opening must clear the arm width",
            ));
        }
        if self.booster_offset_nm <= self.booster_size_nm / 2.0 + self.arm_width_nm / 2.0 {
            return Err(EblError::validation(
                "params.booster_offset_nm",
                "boosters must clear the junction arms",
            ));
        }
        Ok(())
    }
}

fn rect(tag: &str, dose_factor: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
    Shape {
        tag: tag.to_string(),
        dose_factor,
        vertices: vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ],
    }
}

/// Build one of the four junction layouts with its probe lines.
pub fn build_geometry(
    kind: GeometryKind,
    params: &GeometryParams,
) -> Result<(PatternLayout, ProbeLines)> {
    params.validate()?;
    let f = params.field_nm;
    let (cx, cy) = (f / 2.0, f / 2.0);
    let gap = params.bridge_gap_nm;
    let w = params.arm_width_nm;
    let half_gap = gap / 2.0;

    let arm_top = rect(
        "arm-top",
        1.0,
        cx - w / 2.0,
        cy + half_gap,
        cx + w / 2.0,
        cy + half_gap + params.arm_length_nm,
    );

    let shapes = match kind {
        GeometryKind::ThinDolan => {
            let arm_bottom = rect(
                "arm-bottom",
                1.0,
                cx - w / 2.0,
                cy - half_gap - params.arm_length_nm,
                cx + w / 2.0,
                cy - half_gap,
            );
            vec![arm_top, arm_bottom]
        }
        GeometryKind::LShape => {
            // The bottom electrode is the L's foot: a wide bar extending to
            // one side from under the gap, with a narrow tail leaving it.
            let foot = rect(
                "foot",
                1.0,
                cx - w / 2.0,
                cy - half_gap - params.foot_width_nm,
                cx - w / 2.0 + params.foot_length_nm,
                cy - half_gap,
            );
            let tail = rect(
                "arm-bottom",
                1.0,
                cx - w / 2.0,
                cy - half_gap - params.foot_width_nm - params.arm_length_nm,
                cx + w / 2.0,
                cy - half_gap - params.foot_width_nm,
            );
            vec![arm_top, foot, tail]
        }
        GeometryKind::Horseshoe => {
            let hw = params.horseshoe_width_nm / 2.0;
            let nw = params.notch_half_width_nm;
            let y0 = cy - half_gap - params.horseshoe_base_nm;
            let y1 = cy - half_gap;
            let y2 = cy + params.prong_height_nm;
            let horseshoe = Shape {
                tag: "horseshoe".to_string(),
                dose_factor: 1.0,
                vertices: vec![
                    Point::new(cx - hw, y0),
                    Point::new(cx + hw, y0),
                    Point::new(cx + hw, y2),
                    Point::new(cx + nw, y2),
                    Point::new(cx + nw, y1),
                    Point::new(cx - nw, y1),
                    Point::new(cx - nw, y2),
                    Point::new(cx - hw, y2),
                ],
            };
            vec![arm_top, horseshoe]
        }
        GeometryKind::XJunction => {
            let arm_bottom = rect(
                "arm-bottom",
                1.0,
                cx - w / 2.0,
                cy - half_gap - params.arm_length_nm,
                cx + w / 2.0,
                cy - half_gap,
            );
            let mut shapes = vec![arm_top, arm_bottom];
            let half = params.booster_size_nm / 2.0;
            let d = params.booster_offset_nm;
            for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                shapes.push(rect(
                    "booster",
                    params.booster_dose_factor,
                    cx + sx * d - half,
                    cy + sy * d - half,
                    cx + sx * d + half,
                    cy + sy * d + half,
                ));
            }
            shapes
        }
    };

    let layout = PatternLayout::new(shapes, params.base_dose, (f, f))?;
    let margin = 200.0;
    let probes = ProbeLines {
        vertical: (
            Point::new(cx, cy - half_gap - margin),
            Point::new(cx, cy + half_gap + margin),
        ),
        horizontal: (
            Point::new(cx - half_gap - margin, cy),
            Point::new(cx + half_gap + margin, cy),
        ),
        bridge_extent_nm: gap,
    };
    Ok((layout, probes))
}
