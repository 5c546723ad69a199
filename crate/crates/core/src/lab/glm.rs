//! Logistic and NB2 regression by iteratively reweighted least squares, with
//! model-based or cluster-robust sandwich covariance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::design::{DesignMatrix, INTERCEPT};
use crate::error::{Error, Result};

pub const LOGISTIC_GRADIENT_TOL: f64 = 1e-8;
pub const SEPARATION_LIMIT: f64 = 30.0;
pub const LOG_LIKELIHOOD_TOL: f64 = 1e-10;
const Z_95: f64 = 1.96;

/// Search range of `ln α` for the dispersion.
const LN_ALPHA_MIN: f64 = -18.420680743952367; // ln 1e-8
const LN_ALPHA_MAX: f64 = 9.210340371976184; // ln 1e4

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    NegativeBinomial,
    Poisson,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    /// Inverse Fisher information.
    Model,
    /// Cluster sandwich without small-sample factor.
    Cr0,
    /// Cluster sandwich times `G/(G−1)·(n−1)/(n−k)`.
    #[default]
    Cr1,
}

impl std::str::FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(CovarianceKind::Model),
            "cr0" => Ok(CovarianceKind::Cr0),
            "cr1" => Ok(CovarianceKind::Cr1),
            other => Err(Error::Config(format!("unknown covariance `{other}` (expected model|cr0|cr1)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub covariance: CovarianceKind,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            covariance: CovarianceKind::Cr1,
            max_iterations: 100,
        }
    }
}

impl FitOptions {
    pub fn with_covariance(mut self, covariance: CovarianceKind) -> Self {
        self.covariance = covariance;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: Family,
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance_kind: CovarianceKind,
    pub covariance: Vec<Vec<f64>>,
    pub standard_errors: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub z_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// NB2 α; `None` for the logistic and Poisson families.
    pub dispersion: Option<f64>,
    /// Set when the α search ended at zero overdispersion.
    pub poisson_limit: bool,
    pub num_obs: usize,
    pub num_clusters: usize,
    pub convergence: Convergence,
}

impl GlmFit {
    pub fn index_of(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn coefficient(&self, column: &str) -> Option<f64> {
        self.index_of(column).map(|j| self.coefficients[j])
    }

    pub fn standard_error(&self, column: &str) -> Option<f64> {
        self.index_of(column).map(|j| self.standard_errors[j])
    }

    /// `Xβ` for another design with the same columns.
    pub fn linear_predictor(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        if design.columns() != self.columns.as_slice() {
            return Err(Error::Precondition("design columns differ from the fitted model".into()));
        }
        let beta = DVector::from_column_slice(&self.coefficients);
        Ok((design.x() * beta).iter().copied().collect())
    }

    /// Bonferroni flags over every coefficient except the intercept.
    pub fn bonferroni(&self, alpha: f64) -> Result<Vec<(String, bool)>> {
        let tested: Vec<(String, f64)> = self
            .columns
            .iter()
            .zip(&self.p_values)
            .filter(|(c, _)| c.as_str() != INTERCEPT)
            .map(|(c, p)| (c.clone(), *p))
            .collect();
        let p: Vec<f64> = tested.iter().map(|(_, p)| *p).collect();
        let flags = bonferroni(&p, alpha)?;
        Ok(tested.into_iter().map(|(c, _)| c).zip(flags).collect())
    }
}

/// `p < alpha / m` with `m = p_values.len()`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Precondition(format!("alpha must be in (0, 1], got {alpha}")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Precondition(format!("p-value {p} outside [0, 1]")));
    }
    let threshold = alpha / p_values.len() as f64;
    Ok(p_values.iter().map(|&p| p < threshold).collect())
}

fn check_inputs(design: &DesignMatrix, y: &[f64], options: &FitOptions) -> Result<()> {
    if y.len() != design.num_rows() {
        return Err(Error::Precondition(format!(
            "{} responses for {} design rows",
            y.len(),
            design.num_rows()
        )));
    }
    design.ensure_full_rank()?;
    if options.covariance != CovarianceKind::Model && design.num_clusters() < 2 {
        return Err(Error::TooFewClusters {
            needed: 2,
            found: design.num_clusters(),
        });
    }
    if options.covariance == CovarianceKind::Cr1 && design.num_rows() <= design.num_columns() {
        return Err(Error::Precondition("CR1 needs more rows than columns".into()));
    }
    Ok(())
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `Xᵀ diag(w) X`.
fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (i, wi) in w.iter().enumerate() {
        xw.row_mut(i).scale_mut(*wi);
    }
    x.transpose() * xw
}

fn invert_spd(h: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    h.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::RankDeficient { rank: k.saturating_sub(1), columns: k })
}

/// Sandwich `B·M·B` with `M = Σ_g u_g u_gᵀ`, `u_g = Σ_{i∈g} x_i r_i`.
fn covariance(
    design: &DesignMatrix,
    bread: &DMatrix<f64>,
    residual: &[f64],
    kind: CovarianceKind,
) -> DMatrix<f64> {
    if kind == CovarianceKind::Model {
        return bread.clone();
    }
    let (n, k) = (design.num_rows(), design.num_columns());
    let mut scores: BTreeMap<&str, DVector<f64>> = BTreeMap::new();
    for (i, cluster) in design.clusters().iter().enumerate() {
        let row = design.x().row(i).transpose() * residual[i];
        *scores.entry(cluster.as_str()).or_insert_with(|| DVector::zeros(k)) += row;
    }
    let g = scores.len() as f64;
    let mut meat = DMatrix::zeros(k, k);
    for u in scores.values() {
        meat += u * u.transpose();
    }
    let factor = match kind {
        CovarianceKind::Cr1 => g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64),
        _ => 1.0,
    };
    let mut v = bread * meat * bread * factor;
    // Symmetrize rounding noise.
    v = (&v + v.transpose()) * 0.5;
    v
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    family: Family,
    design: &DesignMatrix,
    beta: &DVector<f64>,
    cov: DMatrix<f64>,
    kind: CovarianceKind,
    dispersion: Option<f64>,
    poisson_limit: bool,
    convergence: Convergence,
) -> GlmFit {
    let k = design.num_columns();
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let coef: Vec<f64> = beta.iter().copied().collect();
    let z: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p = z
        .iter()
        .map(|z| if z.is_nan() { 1.0 } else { erfc(z.abs() / std::f64::consts::SQRT_2) })
        .collect();
    GlmFit {
        family,
        columns: design.columns().to_vec(),
        ci_lower: coef.iter().zip(&se).map(|(b, s)| b - Z_95 * s).collect(),
        ci_upper: coef.iter().zip(&se).map(|(b, s)| b + Z_95 * s).collect(),
        coefficients: coef,
        covariance_kind: kind,
        covariance: (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect(),
        standard_errors: se,
        z_values: z,
        p_values: p,
        dispersion,
        poisson_limit,
        num_obs: design.num_rows(),
        num_clusters: design.num_clusters(),
        convergence,
    }
}

/// Logistic regression by Newton–Raphson.
///
/// Converged once the score norm is below 1e-8 and the Newton step is
/// negligible; the second condition keeps separated data iterating until a
/// coefficient passes ±30 and is reported as separation.
pub fn fit_logistic(design: &DesignMatrix, y: &[f64], options: FitOptions) -> Result<GlmFit> {
    check_inputs(design, y, &options)?;
    if let Some(i) = y.iter().position(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Precondition(format!("response row {i} is {} (expected 0 or 1)", y[i])));
    }
    let x = design.x();
    let k = design.num_columns();
    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = x * beta;
        eta.iter().zip(y).map(|(e, yi)| yi * e - softplus(*e)).sum()
    };

    let mut beta = DVector::zeros(k);
    let mut ll = loglik(&beta);
    let mut iterations = 0;
    let mut gradient_norm;
    loop {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
        let resid = DVector::from_iterator(mu.len(), y.iter().zip(&mu).map(|(yi, m)| yi - m));
        let grad = x.transpose() * &resid;
        gradient_norm = grad.norm();
        let w: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
        let hess = weighted_gram(x, &w);
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => {
                return Err(match separated_column(design, &beta) {
                    Some((column, value)) => Error::SeparationDetected { column, value },
                    None => Error::RankDeficient { rank: k.saturating_sub(1), columns: k },
                })
            }
        };
        if gradient_norm < LOGISTIC_GRADIENT_TOL && step.amax() < 1e-6 {
            break;
        }
        if iterations == options.max_iterations {
            return Err(Error::NotConverged {
                what: "logistic regression",
                iterations,
            });
        }
        iterations += 1;
        let mut t = 1.0;
        let mut candidate = &beta + &step;
        let mut ll_new = loglik(&candidate);
        while ll_new < ll && t > 1e-10 && step.amax() > 1e-6 {
            t *= 0.5;
            candidate = &beta + &step * t;
            ll_new = loglik(&candidate);
        }
        beta = candidate;
        ll = ll_new;
        if let Some((column, value)) = separated_column(design, &beta) {
            return Err(Error::SeparationDetected { column, value });
        }
    }

    let eta = x * &beta;
    let mu: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
    let w: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
    let bread = invert_spd(&weighted_gram(x, &w), k)?;
    let resid: Vec<f64> = y.iter().zip(&mu).map(|(yi, m)| yi - m).collect();
    let cov = covariance(design, &bread, &resid, options.covariance);
    Ok(assemble(
        Family::Logistic,
        design,
        &beta,
        cov,
        options.covariance,
        None,
        false,
        Convergence {
            converged: true,
            iterations,
            gradient_norm,
            log_likelihood: ll,
        },
    ))
}

fn separated_column(design: &DesignMatrix, beta: &DVector<f64>) -> Option<(String, f64)> {
    beta.iter()
        .position(|b| b.abs() > SEPARATION_LIMIT)
        .map(|j| (design.columns()[j].clone(), beta[j]))
}

fn check_counts(counts: &[f64]) -> Result<()> {
    if let Some(i) = counts.iter().position(|c| !(c.is_finite() && *c >= 0.0 && c.fract() == 0.0)) {
        return Err(Error::Precondition(format!(
            "count row {i} is {} (expected a non-negative integer)",
            counts[i]
        )));
    }
    Ok(())
}

/// NB2 log-likelihood of one observation; `alpha = 0` is the Poisson limit.
fn nb_loglik(y: f64, mu: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return y * mu.ln() - mu - ln_gamma(y + 1.0);
    }
    let r = 1.0 / alpha;
    // ln Γ(y+r) − ln Γ(r) = Σ_{j<y} ln(r+j); grouping each term with
    // −ln(r+μ) keeps precision as α → 0.
    let ratio: f64 = (0..y as u64).map(|j| ((j as f64 - mu) / (r + mu)).ln_1p()).sum();
    ratio + y * mu.ln() - ln_gamma(y + 1.0) - r * (mu / r).ln_1p()
}

struct CountFit {
    beta: DVector<f64>,
    ll: f64,
    iterations: usize,
    gradient_norm: f64,
}

/// Fisher scoring for β at fixed α. Starts from `start` or from a weighted
/// least-squares fit of `ln(y + 0.5)`.
fn fit_counts_given_alpha(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    start: Option<&DVector<f64>>,
    max_iterations: usize,
) -> Result<CountFit> {
    let k = x.ncols();
    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = x * beta;
        eta.iter().zip(y).map(|(e, yi)| nb_loglik(*yi, e.exp(), alpha)).sum()
    };
    let mut beta = match start {
        Some(b) => b.clone(),
        None => {
            let mu0: Vec<f64> = y.iter().map(|v| v + 0.5).collect();
            let w: Vec<f64> = mu0.iter().map(|m| m / (1.0 + alpha * m)).collect();
            let z = DVector::from_iterator(y.len(), mu0.iter().map(|m| m.ln()));
            let mut xw = x.clone();
            for (i, wi) in w.iter().enumerate() {
                xw.row_mut(i).scale_mut(*wi);
            }
            let rhs = xw.transpose() * z;
            weighted_gram(x, &w)
                .cholesky()
                .ok_or(Error::RankDeficient { rank: k.saturating_sub(1), columns: k })?
                .solve(&rhs)
        }
    };
    let mut ll = loglik(&beta);
    let mut iterations = 0;
    loop {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let resid = DVector::from_iterator(
            y.len(),
            y.iter().zip(&mu).map(|(yi, m)| (yi - m) / (1.0 + alpha * m)),
        );
        let grad = x.transpose() * resid;
        let w: Vec<f64> = mu.iter().map(|m| m / (1.0 + alpha * m)).collect();
        let step = weighted_gram(x, &w)
            .cholesky()
            .ok_or(Error::RankDeficient { rank: k.saturating_sub(1), columns: k })?
            .solve(&grad);
        // Newton decrement: half of gᵀH⁻¹g bounds the remaining gain.
        let decrement = grad.dot(&step) / 2.0;
        if decrement < 1e-24 || step.amax() < 1e-10 {
            return Ok(CountFit {
                beta,
                ll,
                iterations,
                gradient_norm: grad.norm(),
            });
        }
        if iterations == max_iterations {
            return Err(Error::NotConverged {
                what: "count regression",
                iterations,
            });
        }
        iterations += 1;
        let mut t = 1.0;
        let mut candidate = &beta + &step;
        let mut ll_new = loglik(&candidate);
        // Near the optimum rounding can hide the gain; take the full step.
        // A NaN likelihood counts as no gain.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        while !(ll_new >= ll) && t > 1e-10 && step.amax() > 1e-6 {
            t *= 0.5;
            candidate = &beta + &step * t;
            ll_new = loglik(&candidate);
        }
        beta = candidate;
        ll = ll_new;
    }
}

fn count_result(
    family: Family,
    design: &DesignMatrix,
    y: &[f64],
    fit: CountFit,
    alpha: f64,
    poisson_limit: bool,
    options: FitOptions,
) -> Result<GlmFit> {
    let x = design.x();
    let eta = x * &fit.beta;
    let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
    let w: Vec<f64> = mu.iter().map(|m| m / (1.0 + alpha * m)).collect();
    let bread = invert_spd(&weighted_gram(x, &w), design.num_columns())?;
    let resid: Vec<f64> = y.iter().zip(&mu).map(|(yi, m)| (yi - m) / (1.0 + alpha * m)).collect();
    let cov = covariance(design, &bread, &resid, options.covariance);
    Ok(assemble(
        family,
        design,
        &fit.beta,
        cov,
        options.covariance,
        (family == Family::NegativeBinomial).then_some(alpha),
        poisson_limit,
        Convergence {
            converged: true,
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
            log_likelihood: fit.ll,
        },
    ))
}

pub fn fit_poisson(design: &DesignMatrix, counts: &[f64], options: FitOptions) -> Result<GlmFit> {
    check_inputs(design, counts, &options)?;
    check_counts(counts)?;
    let fit = fit_counts_given_alpha(design.x(), counts, 0.0, None, options.max_iterations)?;
    count_result(Family::Poisson, design, counts, fit, 0.0, false, options)
}

/// NB2 regression with α held fixed. `alpha = 0` gives the Poisson fit.
pub fn fit_negative_binomial_fixed_alpha(
    design: &DesignMatrix,
    counts: &[f64],
    alpha: f64,
    options: FitOptions,
) -> Result<GlmFit> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Precondition(format!("alpha must be ≥ 0, got {alpha}")));
    }
    check_inputs(design, counts, &options)?;
    check_counts(counts)?;
    let fit = fit_counts_given_alpha(design.x(), counts, alpha, None, options.max_iterations)?;
    count_result(Family::NegativeBinomial, design, counts, fit, alpha, alpha == 0.0, options)
}

/// NB2 regression (variance `μ + αμ²`, log link).
///
/// β is fitted by Fisher scoring at each trial α; α maximizes the profile
/// log-likelihood by golden-section search over `ln α ∈ [ln 1e-8, ln 1e4]`,
/// stopping once successive best log-likelihoods differ by less than 1e-10
/// and the bracket is narrower than 1e-6. When the profile peaks at the
/// lower end, or does not beat the Poisson fit, α is reported as 0 with the
/// `poisson_limit` flag and the Poisson coefficients are returned.
pub fn fit_negative_binomial(design: &DesignMatrix, counts: &[f64], options: FitOptions) -> Result<GlmFit> {
    check_inputs(design, counts, &options)?;
    check_counts(counts)?;
    let x = design.x();
    let max_it = options.max_iterations;
    let poisson = fit_counts_given_alpha(x, counts, 0.0, None, max_it)?;

    let mut warm = poisson.beta.clone();
    let mut profile = |ln_alpha: f64| -> Result<CountFit> {
        let fit = fit_counts_given_alpha(x, counts, ln_alpha.exp(), Some(&warm), max_it)?;
        warm.clone_from(&fit.beta);
        Ok(fit)
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (LN_ALPHA_MIN, LN_ALPHA_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = profile(c)?;
    let mut fd = profile(d)?;
    let mut best_ll = fc.ll.max(fd.ll);
    let mut rounds = 0;
    loop {
        rounds += 1;
        if fc.ll >= fd.ll {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = profile(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = profile(d)?;
        }
        let new_best = fc.ll.max(fd.ll);
        let change = (new_best - best_ll).abs();
        best_ll = new_best;
        if (change < LOG_LIKELIHOOD_TOL && b - a < 1e-6) || b - a < 1e-12 {
            break;
        }
        if rounds > 400 {
            return Err(Error::NotConverged {
                what: "dispersion search",
                iterations: rounds,
            });
        }
    }
    let (ln_alpha, fit) = if fc.ll >= fd.ll { (c, fc) } else { (d, fd) };

    let at_floor = ln_alpha - LN_ALPHA_MIN < 1e-3;
    if at_floor || fit.ll <= poisson.ll + LOG_LIKELIHOOD_TOL {
        let mut result = count_result(Family::NegativeBinomial, design, counts, poisson, 0.0, true, options)?;
        result.convergence.iterations += rounds;
        return Ok(result);
    }
    let mut result = count_result(
        Family::NegativeBinomial,
        design,
        counts,
        fit,
        ln_alpha.exp(),
        false,
        options,
    )?;
    result.convergence.iterations += rounds;
    Ok(result)
}
