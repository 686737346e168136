//! Gaussian mixtures fitted by expectation-maximization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// row-major covariance
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// added to each covariance diagonal, relative to the data variance
    pub cov_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            max_iter: 500,
            tol: 1e-8,
            cov_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub gmm: Gmm,
    /// mean log-likelihood after each EM iteration of the winning restart
    pub trace: Vec<f64>,
    pub converged: bool,
}

struct Dense {
    weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

fn densify(c: &Component) -> Result<Dense> {
    let d = c.mean.len();
    let cov = DMatrix::from_fn(d, d, |r, k| c.cov[r][k]);
    let chol = Cholesky::new(cov).ok_or_else(|| Error::Fit("covariance is not positive definite".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(Dense {
        weight: c.weight,
        mean: DVector::from_vec(c.mean.clone()),
        log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        chol,
    })
}

impl Dense {
    fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let z = self.chol.l().solve_lower_triangular(&diff).expect("triangular solve");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Gmm {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    /// A single point mass (tiny covariance) at `x`.
    pub fn point(x: &[f64]) -> Self {
        let d = x.len();
        Gmm {
            components: vec![Component {
                weight: 1.0,
                mean: x.to_vec(),
                cov: (0..d)
                    .map(|r| (0..d).map(|k| if r == k { 1e-18 } else { 0.0 }).collect())
                    .collect(),
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Fit("mixture has no components".into()));
        }
        let d = self.dim();
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.components.iter().any(|c| !(c.weight > 0.0)) {
            return Err(Error::Fit(format!(
                "weights must be positive and sum to 1, got {total}"
            )));
        }
        for c in &self.components {
            if c.mean.len() != d || c.cov.len() != d || c.cov.iter().any(|r| r.len() != d) {
                return Err(Error::Fit("inconsistent component dimensions".into()));
            }
            densify(c)?;
        }
        Ok(())
    }

    pub fn log_likelihood(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let dense: Vec<Dense> = self.components.iter().map(densify).collect::<Result<_>>()?;
        let mut buf = vec![0.0; dense.len()];
        let mut total = 0.0;
        for s in samples {
            let x = DVector::from_column_slice(s);
            for (b, c) in buf.iter_mut().zip(&dense) {
                *b = c.weight.ln() + c.log_pdf(&x);
            }
            total += log_sum_exp(&buf);
        }
        Ok(total)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut u = rng.gen::<f64>();
        let comp = self
            .components
            .iter()
            .find(|c| {
                u -= c.weight;
                u < 0.0
            })
            .unwrap_or_else(|| self.components.last().expect("non-empty mixture"));
        let d = comp.mean.len();
        // covariance validity is checked on load; fall back to the mean if not
        let cov = DMatrix::from_fn(d, d, |r, k| comp.cov[r][k]);
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        match Cholesky::new(cov) {
            Some(ch) => (DVector::from_column_slice(&comp.mean) + ch.l() * z)
                .iter()
                .copied()
                .collect(),
            None => comp.mean.clone(),
        }
    }
}

fn kmeans_pp<R: Rng + ?Sized>(x: &[DVector<f64>], scale: &DVector<f64>, k: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let dist2 = |a: &DVector<f64>, b: &DVector<f64>| (a - b).component_div(scale).norm_squared();
    let mut centers = vec![x[rng.gen_range(0..x.len())].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            d2.iter()
                .position(|&w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(x.len() - 1)
        } else {
            rng.gen_range(0..x.len())
        };
        centers.push(x[idx].clone());
        for (w, p) in d2.iter_mut().zip(x) {
            *w = w.min(dist2(p, centers.last().unwrap()));
        }
    }
    centers
}

fn m_step(x: &[DVector<f64>], resp: &DMatrix<f64>, floor: &DVector<f64>) -> Vec<Component> {
    let (n, k) = (x.len(), resp.ncols());
    let d = x[0].len();
    (0..k)
        .map(|j| {
            let nk: f64 = resp.column(j).sum().max(1e-300);
            let mut mean = DVector::zeros(d);
            for (i, p) in x.iter().enumerate() {
                mean += p * resp[(i, j)];
            }
            mean /= nk;
            let mut cov = DMatrix::zeros(d, d);
            for (i, p) in x.iter().enumerate() {
                let diff = p - &mean;
                cov += &diff * diff.transpose() * resp[(i, j)];
            }
            cov /= nk;
            for r in 0..d {
                cov[(r, r)] += floor[r];
            }
            Component {
                weight: nk / n as f64,
                mean: mean.iter().copied().collect(),
                cov: (0..d).map(|r| (0..d).map(|c| cov[(r, c)]).collect()).collect(),
            }
        })
        .collect()
}

/// E-step; returns responsibilities and the mean log-likelihood.
fn e_step(x: &[DVector<f64>], comps: &[Component]) -> Result<(DMatrix<f64>, f64)> {
    let dense: Vec<Dense> = comps.iter().map(densify).collect::<Result<_>>()?;
    let k = dense.len();
    let mut resp = DMatrix::zeros(x.len(), k);
    let mut buf = vec![0.0; k];
    let mut ll = 0.0;
    for (i, p) in x.iter().enumerate() {
        for (b, c) in buf.iter_mut().zip(&dense) {
            *b = c.weight.ln() + c.log_pdf(p);
        }
        let lse = log_sum_exp(&buf);
        ll += lse;
        for j in 0..k {
            resp[(i, j)] = (buf[j] - lse).exp();
        }
    }
    Ok((resp, ll / x.len() as f64))
}

/// Fits a `k`-component mixture with k-means++ seeded restarts; keeps the
/// restart with the highest likelihood.
pub fn fit_gmm<R: Rng + ?Sized>(samples: &[Vec<f64>], k: usize, opts: FitOptions, rng: &mut R) -> Result<FitReport> {
    if k == 0 {
        return Err(Error::Fit("k must be at least 1".into()));
    }
    if samples.len() < k {
        return Err(Error::Fit(format!("{} samples for {k} components", samples.len())));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::Fit("samples must share a positive dimension".into()));
    }
    let x: Vec<DVector<f64>> = samples.iter().map(|s| DVector::from_column_slice(s)).collect();
    let n = x.len() as f64;
    let mean = x.iter().fold(DVector::zeros(d), |acc, p| acc + p) / n;
    let var = x.iter().fold(DVector::zeros(d), |acc: DVector<f64>, p| {
        let diff = p - &mean;
        acc + diff.component_mul(&diff)
    }) / n;
    let scale = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let floor = var.map(|v| opts.cov_floor * if v > 0.0 { v } else { 1.0 });

    let mut best: Option<FitReport> = None;
    for _ in 0..opts.restarts.max(1) {
        let centers = kmeans_pp(&x, &scale, k, rng);
        let mut resp = DMatrix::zeros(x.len(), k);
        for (i, p) in x.iter().enumerate() {
            let j = (0..k)
                .min_by(|&a, &b| {
                    let da = (p - &centers[a]).component_div(&scale).norm_squared();
                    let db = (p - &centers[b]).component_div(&scale).norm_squared();
                    da.total_cmp(&db)
                })
                .unwrap();
            resp[(i, j)] = 1.0;
        }
        let mut comps = m_step(&x, &resp, &floor);
        let mut trace: Vec<f64> = Vec::new();
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let (r, ll) = e_step(&x, &comps)?;
            if let Some(&prev) = trace.last() {
                if (ll - prev).abs() < opts.tol {
                    trace.push(ll);
                    converged = true;
                    break;
                }
            }
            trace.push(ll);
            comps = m_step(&x, &r, &floor);
        }
        let score = *trace.last().unwrap();
        if best.as_ref().is_none_or(|b| score > *b.trace.last().unwrap()) {
            best = Some(FitReport {
                gmm: Gmm { components: comps },
                trace,
                converged,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}
