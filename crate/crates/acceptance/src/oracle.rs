//! Brute-force reference computations.

use std::collections::BTreeMap;

/// `round(k * dim / count)` for `k = 1..count`, halves rounded up, computed in
/// floating point. Exact for any realistic frame size: a true half is exactly
/// representable and IEEE division is correctly rounded.
pub fn line_centers(dim: u32, count: u32) -> Vec<u32> {
    (1..count)
        .map(|k| (f64::from(k) * f64::from(dim) / f64::from(count) + 0.5).floor() as u32)
        .collect()
}

/// Pixels `x` with `x - c` in `[-floor(t/2), ceil(t/2) - 1]` for some centre `c`.
pub fn line_mask(dim: u32, centers: &[u32], thickness: u32) -> Vec<bool> {
    let before = i64::from(thickness / 2);
    let after = i64::from(thickness.div_ceil(2)) - 1;
    (0..dim)
        .map(|x| {
            centers.iter().any(|&c| {
                let d = i64::from(x) - i64::from(c);
                -before <= d && d <= after
            })
        })
        .collect()
}

/// Checks a rendered overlay pixel by pixel against the input. `input` and
/// `output` are packed RGB rows of a `width x height` image.
pub fn check_overlay(
    input: &[u8],
    output: &[u8],
    width: u32,
    height: u32,
    (rows, cols, thickness): (u32, u32, u32),
    color: [u8; 3],
) -> Result<(), String> {
    if input.len() != output.len() {
        return Err("size changed".into());
    }
    let vx = line_mask(width, &line_centers(width, cols), thickness);
    let hy = line_mask(height, &line_centers(height, rows), thickness);
    for y in 0..height {
        for x in 0..width {
            let at = ((y * width + x) * 3) as usize;
            let (got, was) = (&output[at..at + 3], &input[at..at + 3]);
            if vx[x as usize] || hy[y as usize] {
                if got != color {
                    return Err(format!("line pixel ({x},{y}) is {got:?}, want {color:?}"));
                }
            } else if got != was {
                return Err(format!("pixel ({x},{y}) changed from {was:?} to {got:?}"));
            }
        }
    }
    Ok(())
}

/// One scored answer: `(question_id, category, gold, chosen)`.
pub type Row<'a> = (&'a str, &'a str, usize, Option<usize>);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
    pub abstain: u64,
    pub per_category: BTreeMap<String, (u64, u64)>,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Exact-match tally by direct counting.
pub fn tally(rows: &[Row<'_>]) -> Tally {
    let mut t = Tally::default();
    for &(_, cat, gold, chosen) in rows {
        let hit = chosen == Some(gold);
        t.total += 1;
        t.correct += u64::from(hit);
        t.abstain += u64::from(chosen.is_none());
        let slot = t.per_category.entry(cat.to_string()).or_default();
        slot.0 += u64::from(hit);
        slot.1 += 1;
    }
    t
}
