//! Weighted isotonic regression (pool adjacent violators).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-decreasing piecewise-linear map over the score domain `[0, 1]`.
///
/// Between breakpoints the map interpolates linearly; outside the fitted
/// range it takes the boundary value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMap {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl MonotoneMap {
    pub fn constant(value: f64) -> Self {
        let v = value.clamp(0.0, 1.0);
        MonotoneMap {
            breakpoints: vec![0.0],
            values: vec![v],
        }
    }

    pub fn identity() -> Self {
        MonotoneMap {
            breakpoints: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
        }
    }

    /// Builds a map from explicit breakpoints; values must be non-decreasing.
    pub fn from_points(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::validation("breakpoints and values must be non-empty and equal length"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("breakpoints must be strictly increasing"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::validation("values must be non-decreasing"));
        }
        Ok(MonotoneMap {
            breakpoints,
            values: values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, s: f64) -> f64 {
        let bp = &self.breakpoints;
        let last = bp.len() - 1;
        if s <= bp[0] {
            return self.values[0];
        }
        if s >= bp[last] {
            return self.values[last];
        }
        // first breakpoint strictly greater than s; 1 <= hi <= last
        let hi = bp.partition_point(|&b| b <= s);
        let lo = hi - 1;
        if bp[lo] == s {
            return self.values[lo];
        }
        let (v0, v1) = (self.values[lo], self.values[hi]);
        if v0 == v1 {
            return v0;
        }
        let t = (s - bp[lo]) / (bp[hi] - bp[lo]);
        v0 + t * (v1 - v0)
    }
}

struct Block {
    weight: f64,
    weighted_sum: f64,
    /// Index range into the tie-collapsed points.
    first: usize,
    last: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.weighted_sum / self.weight
    }
}

/// Weighted least-squares isotonic fit of `y01` against `scores`.
///
/// Tied scores are pooled first; rows with zero weight are ignored.
pub fn fit_monotone_map(scores: &[f64], y01: &[u8], weights: &[f64]) -> Result<MonotoneMap> {
    let targets: Vec<f64> = y01.iter().map(|&v| f64::from(v)).collect();
    fit_monotone_map_real(scores, &targets, weights)
}

/// [`fit_monotone_map`] for real-valued targets in `[0, 1]`.
pub fn fit_monotone_map_real(scores: &[f64], targets: &[f64], weights: &[f64]) -> Result<MonotoneMap> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no calibration rows".into()));
    }
    if scores.len() != targets.len() || scores.len() != weights.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} scores, {} targets, {} weights",
            scores.len(),
            targets.len(),
            weights.len()
        )));
    }
    for (i, ((&s, &t), &w)) in scores.iter().zip(targets).zip(weights).enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::at_row(i, format!("score {s} is outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::at_row(i, format!("target {t} is outside [0, 1]")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::at_row(i, format!("weight {w} is not finite and nonnegative")));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| weights[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::validation("weights must have a positive sum"));
    }
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // collapse ties
    let mut xs: Vec<f64> = Vec::new();
    let mut points: Vec<(f64, f64)> = Vec::new(); // (weight, weighted sum)
    for i in order {
        let (s, w) = (scores[i], weights[i]);
        if xs.last() == Some(&s) {
            let p = points.last_mut().expect("xs and points grow together");
            p.0 += w;
            p.1 += w * targets[i];
        } else {
            xs.push(s);
            points.push((w, w * targets[i]));
        }
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(points.len());
    for (k, &(weight, weighted_sum)) in points.iter().enumerate() {
        let mut cur = Block {
            weight,
            weighted_sum,
            first: k,
            last: k,
        };
        while let Some(prev) = blocks.last() {
            if prev.mean() >= cur.mean() {
                let prev = blocks.pop().expect("checked non-empty");
                cur = Block {
                    weight: prev.weight + cur.weight,
                    weighted_sum: prev.weighted_sum + cur.weighted_sum,
                    first: prev.first,
                    last: cur.last,
                };
            } else {
                break;
            }
        }
        blocks.push(cur);
    }

    let mut values = vec![0.0; xs.len()];
    for b in &blocks {
        let v = b.mean().clamp(0.0, 1.0);
        values[b.first..=b.last].iter_mut().for_each(|x| *x = v);
    }
    Ok(MonotoneMap {
        breakpoints: xs,
        values,
    })
}
