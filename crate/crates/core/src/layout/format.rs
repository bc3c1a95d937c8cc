//! The layout text format.
//!
//! ```text
//! eblsim-layout v1
//! base-dose 400
//! bounds 10000 10000
//! shape tag=arm-top dose-factor=1
//! v 4925 5150
//! v 5075 5150
//! v 5075 8150
//! v 4925 8150
//! end
//! ```
//!
//! Blank lines and `#` comments are allowed anywhere. The writer emits the
//! canonical form: shortest round-trip float formatting, one vertex per `v`
//! line, shapes in order.

use super::{PatternLayout, Point, Shape};
use crate::error::{EblError, Result};
use std::path::Path;

const HEADER: &str = "eblsim-layout v1";

pub fn write_layout(layout: &PatternLayout) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("base-dose {}\n", layout.base_dose));
    out.push_str(&format!("bounds {} {}\n", layout.bounds.0, layout.bounds.1));
    for shape in &layout.shapes {
        out.push_str(&format!(
            "shape tag={} dose-factor={}\n",
            shape.tag, shape.dose_factor
        ));
        for v in &shape.vertices {
            out.push_str(&format!("v {} {}\n", v.x, v.y));
        }
        out.push_str("end\n");
    }
    out
}

pub fn write_layout_file(path: &Path, layout: &PatternLayout) -> Result<()> {
    std::fs::write(path, write_layout(layout)).map_err(|e| EblError::io(path, e))
}

pub fn parse_layout_file(path: &Path) -> Result<PatternLayout> {
    let text = std::fs::read_to_string(path).map_err(|e| EblError::io(path, e))?;
    parse_layout(&text)
}

/// Column (1-based) of `needle` within `line`, for error reporting.
fn column_of(line: &str, needle: &str) -> usize {
    line.find(needle).map(|i| i + 1).unwrap_or(1)
}

pub fn parse_layout(text: &str) -> Result<PatternLayout> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });

    let (lineno, header) = lines
        .next()
        .ok_or_else(|| EblError::parse(1, 1, "empty layout file"))?;
    if header.trim() != HEADER {
        return Err(EblError::parse(
            lineno,
            1,
            format!("expected `{HEADER}` header, got `{}`", header.trim()),
        ));
    }

    let mut base_dose: Option<f64> = None;
    let mut bounds: Option<(f64, f64)> = None;
    let mut shapes: Vec<Shape> = Vec::new();
    let mut current: Option<Shape> = None;

    for (lineno, raw) in lines {
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap();
        match keyword {
            "base-dose" => {
                let tok = tokens.next().ok_or_else(|| {
                    EblError::parse(lineno, line.len() + 1, "base-dose needs a value")
                })?;
                let v: f64 = tok.parse().map_err(|_| {
                    EblError::parse(lineno, column_of(raw, tok), "base-dose must be a number")
                })?;
                base_dose = Some(v);
            }
            "bounds" => {
                let parse_dim = |tok: Option<&str>| -> Result<f64> {
                    let tok = tok.ok_or_else(|| {
                        EblError::parse(lineno, line.len() + 1, "bounds needs width and height")
                    })?;
                    tok.parse().map_err(|_| {
                        EblError::parse(lineno, column_of(raw, tok), "bounds must be numbers")
                    })
                };
                let w = parse_dim(tokens.next())?;
                let h = parse_dim(tokens.next())?;
                bounds = Some((w, h));
            }
            "shape" => {
                if current.is_some() {
                    return Err(EblError::parse(
                        lineno,
                        1,
                        "previous shape not closed with `end`",
                    ));
                }
                let mut tag = String::new();
                let mut dose_factor = 1.0;
                for tok in tokens {
                    if let Some(v) = tok.strip_prefix("tag=") {
                        tag = v.to_string();
                    } else if let Some(v) = tok.strip_prefix("dose-factor=") {
                        dose_factor = v.parse().map_err(|_| {
                            EblError::parse(
                                lineno,
                                column_of(raw, tok),
                                "dose-factor must be a number",
                            )
                        })?;
                    } else {
                        return Err(EblError::parse(
                            lineno,
                            column_of(raw, tok),
                            format!("unknown shape attribute `{tok}`"),
                        ));
                    }
                }
                if tag.is_empty() {
                    return Err(EblError::parse(lineno, 1, "shape needs a tag= attribute"));
                }
                current = Some(Shape {
                    tag,
                    dose_factor,
                    vertices: Vec::new(),
                });
            }
            "v" => {
                let shape = current.as_mut().ok_or_else(|| {
                    EblError::parse(lineno, 1, "vertex line outside a shape block")
                })?;
                let parse_coord = |tok: Option<&str>| -> Result<f64> {
                    let tok = tok.ok_or_else(|| {
                        EblError::parse(lineno, line.len() + 1, "vertex needs x and y")
                    })?;
                    tok.parse().map_err(|_| {
                        EblError::parse(
                            lineno,
                            column_of(raw, tok),
                            "vertex coordinates must be numbers",
                        )
                    })
                };
                let x = parse_coord(tokens.next())?;
                let y = parse_coord(tokens.next())?;
                shape.vertices.push(Point::new(x, y));
            }
            "end" => {
                let shape = current.take().ok_or_else(|| {
                    EblError::parse(lineno, 1, "`end` without an open shape block")
                })?;
                shapes.push(shape);
            }
            other => {
                return Err(EblError::parse(
                    lineno,
                    column_of(raw, other),
                    format!("unknown keyword `{other}`"),
                ));
            }
        }
    }
    if current.is_some() {
        return Err(EblError::parse(
            text.lines().count(),
            1,
            "unterminated shape block at end of file",
        ));
    }
    let base_dose =
        base_dose.ok_or_else(|| EblError::parse(1, 1, "missing base-dose declaration"))?;
    let bounds = bounds.ok_or_else(|| EblError::parse(1, 1, "missing bounds declaration"))?;
    PatternLayout::new(shapes, base_dose, bounds)
}
