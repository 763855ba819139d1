//! Plain-text point files: one point per line, comma separated, with an
//! optional non-numeric header line. Blank lines and `#` comments are skipped.

use std::path::Path;

use thiserror::Error;

use crate::point::Point;

#[derive(Debug, Error)]
pub enum PointIoError {
    #[error("point file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub fn parse_points(text: &str) -> Result<Vec<Point>, PointIoError> {
    let mut points = Vec::new();
    let mut dim = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let coords = match fields {
            Ok(c) => c,
            Err(e) if points.is_empty() && dim.is_none() => {
                // First non-comment line may be a header.
                dim = Some(0);
                let _ = e;
                continue;
            }
            Err(e) => {
                return Err(PointIoError::Parse {
                    line: k + 1,
                    reason: e.to_string(),
                })
            }
        };
        match Point::try_new(coords) {
            Some(p) => {
                if let Some(d) = points.first().map(Point::dim) {
                    if p.dim() != d {
                        return Err(PointIoError::Parse {
                            line: k + 1,
                            reason: format!("expected {d} coordinates, got {}", p.dim()),
                        });
                    }
                }
                points.push(p);
            }
            None => {
                return Err(PointIoError::Parse {
                    line: k + 1,
                    reason: "non-finite coordinate".into(),
                })
            }
        }
    }
    Ok(points)
}

pub fn read_points(path: &Path) -> Result<Vec<Point>, PointIoError> {
    parse_points(&std::fs::read_to_string(path)?)
}

/// Formats points with a `x0,x1,..` header.
pub fn format_points(points: &[Point]) -> String {
    let dim = points.first().map_or(1, Point::dim);
    let mut out = (0..dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.coords().iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_points(path: &Path, points: &[Point]) -> Result<(), PointIoError> {
    std::fs::write(path, format_points(points))?;
    Ok(())
}
