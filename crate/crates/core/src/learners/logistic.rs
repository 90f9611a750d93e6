//! Weighted ridge-penalised logistic regression fitted by damped Newton
//! iterations on standardised features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability outputs are clipped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the objective gradient.
    pub tol: f64,
    /// L2 penalty on standardised coefficients (the intercept is not penalised).
    pub ridge: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            max_iter: 200,
            tol: 1e-8,
            ridge: 1e-4,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Per-column affine map to zero weighted mean and unit weighted variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[f64], n_features: usize, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut means = vec![0.0; n_features];
        for (row, &w) in x.chunks_exact(n_features.max(1)).zip(weights) {
            for (m, v) in means.iter_mut().zip(row) {
                *m += w * v;
            }
        }
        means.iter_mut().for_each(|m| *m /= total);
        let mut vars = vec![0.0; n_features];
        for (row, &w) in x.chunks_exact(n_features.max(1)).zip(weights) {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += w * (v - m) * (v - m);
            }
        }
        let scales = vars
            .into_iter()
            .map(|v| {
                let sd = (v / total).sqrt();
                if sd > 1e-12 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, scales }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.means.len();
        let mut out = Vec::with_capacity(x.len());
        for row in x.chunks_exact(d.max(1)) {
            for ((v, m), s) in row.iter().zip(&self.means).zip(&self.scales) {
                out.push((v - m) / s);
            }
        }
        out
    }
}

/// The weighted, ridge-penalised mean log-loss over standardised inputs.
///
/// Parameters are laid out as `[intercept, coef_1, ..., coef_d]`.
pub struct LogisticObjective {
    xs: Vec<f64>,
    n_features: usize,
    y: Vec<f64>,
    w: Vec<f64>,
    total_weight: f64,
    ridge: f64,
}

impl LogisticObjective {
    fn linear(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.n_features;
        let row = &self.xs[i * d..(i + 1) * d];
        theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.y.len() {
            if self.w[i] == 0.0 {
                continue;
            }
            let z = self.linear(theta, i);
            loss += self.w[i] * (softplus(z) - self.y[i] * z);
        }
        let penalty: f64 = theta[1..].iter().map(|b| b * b).sum();
        loss / self.total_weight + 0.5 * self.ridge * penalty
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        let mut g = vec![0.0; d + 1];
        for i in 0..self.y.len() {
            if self.w[i] == 0.0 {
                continue;
            }
            let r = self.w[i] * (sigmoid(self.linear(theta, i)) - self.y[i]);
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(&self.xs[i * d..(i + 1) * d]) {
                *gj += r * xj;
            }
        }
        g.iter_mut().for_each(|v| *v /= self.total_weight);
        for (gj, b) in g[1..].iter_mut().zip(&theta[1..]) {
            *gj += self.ridge * b;
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.n_features + 1;
        let d = self.n_features;
        let mut h = vec![0.0; k * k];
        let mut row_ext = vec![1.0; k];
        for i in 0..self.y.len() {
            if self.w[i] == 0.0 {
                continue;
            }
            let p = sigmoid(self.linear(theta, i));
            let c = self.w[i] * p * (1.0 - p);
            row_ext[1..].copy_from_slice(&self.xs[i * d..(i + 1) * d]);
            for a in 0..k {
                let ca = c * row_ext[a];
                for b in a..k {
                    h[a * k + b] += ca * row_ext[b];
                }
            }
        }
        for a in 0..k {
            for b in a..k {
                h[a * k + b] /= self.total_weight;
                h[b * k + a] = h[a * k + b];
            }
        }
        for j in 1..k {
            h[j * k + j] += self.ridge;
        }
        h
    }
}

/// Solves `A x = b` for a symmetric positive (semi-)definite `A` by Cholesky
/// factorisation, adding diagonal jitter until the factorisation succeeds.
fn solve_spd(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut jitter = 0.0;
    loop {
        let mut l = vec![0.0; k * k];
        let mut ok = true;
        'outer: for i in 0..k {
            for j in 0..=i {
                let mut sum = a[i * k + j] + if i == j { jitter } else { 0.0 };
                for p in 0..j {
                    sum -= l[i * k + p] * l[j * k + p];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        ok = false;
                        break 'outer;
                    }
                    l[i * k + i] = sum.sqrt();
                } else {
                    l[i * k + j] = sum / l[j * k + j];
                }
            }
        }
        if ok {
            let mut z = vec![0.0; k];
            for i in 0..k {
                let s: f64 = (0..i).map(|p| l[i * k + p] * z[p]).sum();
                z[i] = (b[i] - s) / l[i * k + i];
            }
            let mut x = vec![0.0; k];
            for i in (0..k).rev() {
                let s: f64 = (i + 1..k).map(|p| l[p * k + i] * x[p]).sum();
                x[i] = (z[i] - s) / l[i * k + i];
            }
            return x;
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
    }
}

/// Fitted binary probabilistic classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbClassifier {
    standardizer: Standardizer,
    /// `[intercept, coefficients...]` on the standardised scale.
    theta: Vec<f64>,
    config: ClassifierConfig,
    iterations: usize,
    converged: bool,
}

/// Fits a weighted ridge-logistic model of `y01` on the row-major matrix `x`.
///
/// Weights are normalised by their sum, so a uniform weight vector gives the
/// same model as no weights, and weight `r` on a row is equivalent to
/// repeating the row `r` times.
pub fn fit_prob_classifier(
    x: &[f64],
    n_features: usize,
    y01: &[u8],
    weights: Option<&[f64]>,
    config: &ClassifierConfig,
) -> Result<ProbClassifier> {
    let n = y01.len();
    if n == 0 {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if x.len() != n * n_features {
        return Err(Error::validation(format!(
            "feature matrix has {} values for {n} rows x {n_features} columns",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite feature value {v}")));
    }
    if y01.iter().any(|&v| v > 1) {
        return Err(Error::validation("targets must be 0 or 1"));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::validation(format!("{} weights for {n} rows", w.len())));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::validation("weights must be finite and nonnegative"));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let total_weight: f64 = w.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::validation("weights must have a positive sum"));
    }
    let positive: f64 = w.iter().zip(y01).filter(|(_, &y)| y == 1).map(|(w, _)| w).sum();
    if positive <= 0.0 || positive >= total_weight {
        return Err(Error::DegenerateTarget(
            "targets contain a single class".into(),
        ));
    }

    let standardizer = Standardizer::fit(x, n_features, &w);
    let objective = LogisticObjective {
        xs: standardizer.apply(x),
        n_features,
        y: y01.iter().map(|&v| f64::from(v)).collect(),
        w,
        total_weight,
        ridge: config.ridge,
    };

    let base_rate = positive / total_weight;
    let mut theta = vec![0.0; n_features + 1];
    theta[0] = (base_rate / (1.0 - base_rate)).ln();
    let mut value = objective.value(&theta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let grad = objective.gradient(&theta);
        if max_norm(&grad) < config.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let step = solve_spd(&objective.hessian(&theta), &grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let v = objective.value(&candidate);
            if v <= value {
                theta = candidate;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent possible at machine precision
            converged = max_norm(&objective.gradient(&theta)) < config.tol.sqrt();
            break;
        }
    }

    Ok(ProbClassifier {
        standardizer,
        theta,
        config: *config,
        iterations,
        converged,
    })
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl ProbClassifier {
    pub fn n_features(&self) -> usize {
        self.standardizer.means.len()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    /// `[intercept, coefficients...]` on the standardised scale.
    pub fn parameters(&self) -> &[f64] {
        &self.theta
    }

    /// Coefficients on the original feature scale.
    pub fn coefficients(&self) -> Vec<f64> {
        self.theta[1..]
            .iter()
            .zip(&self.standardizer.scales)
            .map(|(b, s)| b / s)
            .collect()
    }

    /// Intercept on the original feature scale.
    pub fn intercept(&self) -> f64 {
        self.theta[0]
            - self.theta[1..]
                .iter()
                .zip(&self.standardizer.means)
                .zip(&self.standardizer.scales)
                .map(|((b, m), s)| b * m / s)
                .sum::<f64>()
    }

    /// The objective this model was fitted against, rebuilt on the given
    /// training data with this model's standardisation.
    pub fn training_objective(
        &self,
        x: &[f64],
        y01: &[u8],
        weights: Option<&[f64]>,
    ) -> LogisticObjective {
        let w = weights.map_or_else(|| vec![1.0; y01.len()], <[f64]>::to_vec);
        LogisticObjective {
            xs: self.standardizer.apply(x),
            n_features: self.n_features(),
            y: y01.iter().map(|&v| f64::from(v)).collect(),
            total_weight: w.iter().sum(),
            w,
            ridge: self.config.ridge,
        }
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        let d = self.n_features();
        if d == 0 {
            return Ok(());
        }
        if !x.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len() % d,
            });
        }
        Ok(())
    }

    /// Linear predictor for each row of `x`.
    pub fn decision_function(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let d = self.n_features();
        if d == 0 {
            return Ok(Vec::new());
        }
        Ok(x
            .chunks_exact(d)
            .map(|row| {
                self.theta[0]
                    + row
                        .iter()
                        .zip(&self.theta[1..])
                        .zip(&self.standardizer.means)
                        .zip(&self.standardizer.scales)
                        .map(|(((v, b), m), s)| b * (v - m) / s)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Class-1 probabilities clipped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .decision_function(x)?
            .into_iter()
            .map(|z| sigmoid(z).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
            .collect())
    }

    /// Same as [`predict_proba`](Self::predict_proba) but checks the column
    /// count explicitly.
    pub fn predict_proba_checked(&self, x: &[f64], n_features: usize) -> Result<Vec<f64>> {
        if n_features != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: n_features,
            });
        }
        self.predict_proba(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn clusters(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.7).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let c = if label == 1 { 2.0 } else { -2.0 };
            x.push(c + noise.sample(&mut rng));
            x.push(c + noise.sample(&mut rng));
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn separable_clusters_are_learned() {
        let (x, y) = clusters(200, 1);
        let m = fit_prob_classifier(&x, 2, &y, None, &ClassifierConfig::default()).unwrap();
        assert!(m.converged());
        let p = m.predict_proba(&x).unwrap();
        for (pi, yi) in p.iter().zip(&y) {
            if *yi == 1 {
                assert!(*pi > 0.9, "p={pi}");
            } else {
                assert!(*pi < 0.1);
            }
        }
        // the Bayes boundary of two isotropic Gaussians at (-2,-2) and (2,2)
        // is x1 + x2 = 0: the fitted coefficients must be near-symmetric with
        // a near-zero intercept relative to their size.
        let c = m.coefficients();
        assert!(c[0] > 0.0 && c[1] > 0.0);
        assert!((c[0] - c[1]).abs() / c[0] < 0.5);
        assert!(m.intercept().abs() < 0.5 * c[0]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![0.0, 1.0, 2.0];
        let e = fit_prob_classifier(&x, 1, &[0, 0, 0], None, &ClassifierConfig::default());
        assert!(matches!(e, Err(Error::DegenerateTarget(_))));
    }

    #[test]
    fn non_finite_input_rejected() {
        let x = vec![0.0, f64::NAN];
        let e = fit_prob_classifier(&x, 1, &[0, 1], None, &ClassifierConfig::default());
        assert!(matches!(e, Err(Error::Validation { .. })));
    }

    #[test]
    fn uniform_weights_match_unweighted() {
        let (x, y) = clusters(60, 2);
        let cfg = ClassifierConfig::default();
        let a = fit_prob_classifier(&x, 2, &y, None, &cfg).unwrap();
        let w = vec![3.5; y.len()];
        let b = fit_prob_classifier(&x, 2, &y, Some(&w), &cfg).unwrap();
        for (u, v) in a.coefficients().iter().zip(b.coefficients()) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!((a.intercept() - b.intercept()).abs() < 1e-8);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        // overlapping classes so the optimum is well inside the interior
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        for i in 0..300 {
            let a: f64 = normal.sample(&mut rng);
            let b: f64 = normal.sample(&mut rng);
            x.extend([a, 3.0 * b + 1.0]);
            y.push(u8::from(sigmoid(0.8 * a - 0.4 * b) > 0.5) ^ u8::from(i % 7 == 0));
            w.push(0.5 + (i % 3) as f64);
        }
        let m = fit_prob_classifier(&x, 2, &y, Some(&w), &ClassifierConfig::default()).unwrap();
        assert!(m.converged());
        let obj = m.training_objective(&x, &y, Some(&w));
        let theta = m.parameters().to_vec();
        assert!(max_norm(&obj.gradient(&theta)) < 1e-8);
        // central finite differences of the objective value
        let h = 1e-5;
        for j in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
            assert!(fd.abs() < 1e-6, "fd[{j}]={fd}");
        }
    }

    #[test]
    fn replication_equals_weighting() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 1.5];
        let y = vec![0, 0, 1, 1, 0];
        let w = vec![1.0, 3.0, 1.0, 2.0, 1.0];
        let mut xr = Vec::new();
        let mut yr = Vec::new();
        for i in 0..5 {
            for _ in 0..w[i] as usize {
                xr.push(x[i]);
                yr.push(y[i]);
            }
        }
        let cfg = ClassifierConfig::default();
        let a = fit_prob_classifier(&x, 1, &y, Some(&w), &cfg).unwrap();
        let b = fit_prob_classifier(&xr, 1, &yr, None, &cfg).unwrap();
        assert!((a.coefficients()[0] - b.coefficients()[0]).abs() < 1e-6);
        assert!((a.intercept() - b.intercept()).abs() < 1e-6);
    }

    #[test]
    fn boundary_point_gives_one_half() {
        let (x, y) = clusters(100, 3);
        let m = fit_prob_classifier(&x, 2, &y, None, &ClassifierConfig::default()).unwrap();
        let c = m.coefficients();
        // a point with c0*x0 + c1*x1 + intercept = 0
        let x1 = 0.3;
        let x0 = -(m.intercept() + c[1] * x1) / c[0];
        let p = m.predict_proba(&[x0, x1]).unwrap()[0];
        assert!((p - 0.5).abs() < 1e-6);
    }

    #[test]
    fn duplicate_rows_give_identical_outputs() {
        let (x, y) = clusters(50, 4);
        let m = fit_prob_classifier(&x, 2, &y, None, &ClassifierConfig::default()).unwrap();
        let p = m.predict_proba(&[0.4, -0.1, 0.4, -0.1]).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn extreme_inputs_are_clipped() {
        let (x, y) = clusters(100, 5);
        let m = fit_prob_classifier(&x, 2, &y, None, &ClassifierConfig::default()).unwrap();
        let far = [50.0, 50.0];
        let z = m.decision_function(&far).unwrap()[0];
        assert!(sigmoid(z) >= 1.0 - 1e-5);
        let p = m.predict_proba(&far).unwrap()[0];
        assert_eq!(p, 1.0 - PROB_FLOOR);
        let lo = m.predict_proba(&[-50.0, -50.0]).unwrap()[0];
        assert_eq!(lo, PROB_FLOOR);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let (x, y) = clusters(20, 6);
        let m = fit_prob_classifier(&x, 2, &y, None, &ClassifierConfig::default()).unwrap();
        assert!(matches!(
            m.predict_proba(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.predict_proba_checked(&[1.0, 2.0, 3.0], 3).is_err());
    }
}
