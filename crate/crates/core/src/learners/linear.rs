use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, u: f64) -> f64 {
        self.intercept + self.slope * u
    }
}

/// Ordinary least squares fit of `v` on `u`.
pub fn fit_line(u: &[f64], v: &[f64]) -> Result<LinearModel> {
    if u.len() != v.len() {
        return Err(Error::validation(format!("{} inputs for {} targets", u.len(), v.len())));
    }
    if u.len() < 2 {
        return Err(Error::SingularFit("at least two points are required".into()));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::validation("non-finite value in line fit input"));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let sxx: f64 = u.iter().map(|x| (x - mu) * (x - mu)).sum();
    let sxy: f64 = u.iter().zip(v).map(|(x, y)| (x - mu) * (y - mv)).sum();
    if sxx <= f64::EPSILON * f64::EPSILON * n * mu.abs().max(1.0) {
        return Err(Error::SingularFit("input is constant".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearModel {
        slope,
        intercept: mv - slope * mu,
    })
}
