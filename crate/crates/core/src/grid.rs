//! Grid geometry shared by the overlay renderer and the prompt builder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An `rows x cols` grid marker drawn over a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    #[serde(default = "default_color")]
    pub line_color: [u8; 3],
    #[serde(default = "default_thickness")]
    pub line_thickness_px: u32,
}

fn default_color() -> [u8; 3] {
    [0, 0, 0]
}

fn default_thickness() -> u32 {
    2
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("invalid grid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("invalid grid syntax `{0}`: expected RxC, e.g. 2x3")]
    Syntax(String),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 3,
            line_color: default_color(),
            line_thickness_px: default_thickness(),
        }
    }
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32) -> Result<Self, GridError> {
        let grid = Self {
            rows,
            cols,
            ..Self::default()
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_line(mut self, color: [u8; 3], thickness_px: u32) -> Result<Self, GridError> {
        self.line_color = color;
        self.line_thickness_px = thickness_px;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.rows == 0 {
            return Err(GridError::InvalidField {
                field: "grid.rows",
                reason: "must be at least 1".into(),
            });
        }
        if self.cols == 0 {
            return Err(GridError::InvalidField {
                field: "grid.cols",
                reason: "must be at least 1".into(),
            });
        }
        if self.line_thickness_px == 0 {
            return Err(GridError::InvalidField {
                field: "grid.line_thickness_px",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn cell_count(&self) -> u32 {
        self.rows * self.cols
    }

    /// Centre x coordinates of the `cols - 1` vertical lines for a frame `width` pixels wide.
    pub fn vertical_lines(&self, width: u32) -> Vec<u32> {
        partition_points(width, self.cols)
    }

    /// Centre y coordinates of the `rows - 1` horizontal lines for a frame `height` pixels tall.
    pub fn horizontal_lines(&self, height: u32) -> Vec<u32> {
        partition_points(height, self.rows)
    }

    /// Half-open pixel span covered by a line centred on `center`, clipped to `[0, dim)`.
    pub fn line_span(&self, center: u32, dim: u32) -> std::ops::Range<u32> {
        let start = i64::from(center) - i64::from(self.line_thickness_px / 2);
        let end = start + i64::from(self.line_thickness_px);
        let clip = |v: i64| v.clamp(0, i64::from(dim)) as u32;
        clip(start)..clip(end)
    }
}

/// `round(k * dim / count)` for `k = 1..count`, rounding halves up.
fn partition_points(dim: u32, count: u32) -> Vec<u32> {
    let (dim, count) = (u64::from(dim), u64::from(count));
    (1..count)
        .map(|k| ((2 * k * dim + count) / (2 * count)) as u32)
        .collect()
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for GridSpec {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, c) = s
            .trim()
            .split_once(['x', 'X', '×'])
            .ok_or_else(|| GridError::Syntax(s.to_string()))?;
        let rows = r.trim().parse().map_err(|_| GridError::Syntax(s.to_string()))?;
        let cols = c.trim().parse().map_err(|_| GridError::Syntax(s.to_string()))?;
        GridSpec::new(rows, cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_two_by_three_black() {
        let g = GridSpec::default();
        assert_eq!((g.rows, g.cols), (2, 3));
        assert_eq!(g.line_color, [0, 0, 0]);
        assert_eq!(g.cell_count(), 6);
    }

    #[test]
    fn line_positions_600x400() {
        let g = GridSpec::default();
        assert_eq!(g.vertical_lines(600), vec![200, 400]);
        assert_eq!(g.horizontal_lines(400), vec![200]);
    }

    #[test]
    fn line_positions_601x401() {
        // 601/3 = 200.33, 1202/3 = 400.67, 401/2 = 200.5
        let g = GridSpec::default();
        assert_eq!(g.vertical_lines(601), vec![200, 401]);
        assert_eq!(g.horizontal_lines(401), vec![201]);
    }

    #[test]
    fn one_by_one_has_no_lines() {
        let g = GridSpec::new(1, 1).unwrap();
        assert!(g.vertical_lines(640).is_empty());
        assert!(g.horizontal_lines(480).is_empty());
    }

    #[test]
    fn span_is_centred_and_clipped() {
        let g = GridSpec::default();
        assert_eq!(g.line_span(200, 600), 199..201);
        let thick = g.with_line([0, 0, 0], 3).unwrap();
        assert_eq!(thick.line_span(0, 10), 0..2);
        assert_eq!(thick.line_span(9, 10), 8..10);
    }

    #[test]
    fn parse_and_reject() {
        assert_eq!("2x3".parse::<GridSpec>().unwrap(), GridSpec::default());
        assert_eq!(" 3X3 ".parse::<GridSpec>().unwrap().cell_count(), 9);
        match "0x3".parse::<GridSpec>() {
            Err(GridError::InvalidField { field, .. }) => assert_eq!(field, "grid.rows"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!("2by3".parse::<GridSpec>(), Err(GridError::Syntax(_))));
    }
}
