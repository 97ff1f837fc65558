//! Cox log partial likelihood in the linear predictor `eta`, its gradient
//! and Hessian diagonal, the IRLS working quantities, and the penalized
//! objective with its analytic gradient in the garrote weights.
//!
//! All risk-set sums are computed by one pass over the ascending time order
//! with the exponentials shifted by `max(eta)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::RiskIndex;
use crate::error::{Error, Result};
use crate::kernel::KernelCache;

/// Floor applied to the working weights `-d^2 l / d eta_i^2`.
pub const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaTriple {
    /// L1 weight on `beta`.
    pub lambda1: f64,
    /// L1 weight on the garrote weights `delta`.
    pub lambda2: f64,
    /// RKHS norm weight; strictly positive.
    pub lambda3: f64,
}

impl LambdaTriple {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let lam = Self { lambda1, lambda2, lambda3 };
        lam.validate()?;
        Ok(lam)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(Error::InvalidConfig("lambda1 and lambda2 must be finite and >= 0".into()));
        }
        if !(self.lambda3.is_finite() && self.lambda3 > 0.0) {
            return Err(Error::InvalidConfig("lambda3 must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// Parameters `(alpha, beta, delta)` with the Gram matrix and linear
/// predictor `eta = X beta + K(delta) alpha` cached.
#[derive(Debug, Clone)]
pub struct FitState {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub delta: Vec<f64>,
    pub eta: DVector<f64>,
    pub gram: DMatrix<f64>,
}

impl FitState {
    pub fn new(
        alpha: DVector<f64>,
        beta: DVector<f64>,
        delta: Vec<f64>,
        x: &DMatrix<f64>,
        kernel: &KernelCache,
    ) -> Result<Self> {
        if alpha.len() != x.nrows() || beta.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "alpha {} / beta {} against design {}x{}",
                alpha.len(),
                beta.len(),
                x.nrows(),
                x.ncols()
            )));
        }
        if delta.iter().any(|d| *d < 0.0) {
            return Err(Error::InvalidConfig("garrote weights must be nonnegative".into()));
        }
        let gram = kernel.gram(&delta)?;
        let eta = linear_predictor(x, &beta, &gram, &alpha);
        Ok(Self { alpha, beta, delta, eta, gram })
    }

    /// Recomputes `eta` after `alpha` or `beta` changed.
    pub fn refresh_eta(&mut self, x: &DMatrix<f64>) {
        self.eta = linear_predictor(x, &self.beta, &self.gram, &self.alpha);
    }

    /// Recomputes the Gram matrix and `eta` after `delta` changed.
    pub fn refresh_all(&mut self, x: &DMatrix<f64>, kernel: &KernelCache) -> Result<()> {
        self.gram = kernel.gram(&self.delta)?;
        self.refresh_eta(x);
        Ok(())
    }
}

pub(crate) fn linear_predictor(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    gram: &DMatrix<f64>,
    alpha: &DVector<f64>,
) -> DVector<f64> {
    let mut eta = gram * alpha;
    if x.ncols() > 0 {
        eta += x * beta;
    }
    eta
}

fn check(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<()> {
    if eta.len() != risk.n() || status.len() != risk.n() {
        return Err(Error::DimensionMismatch(format!(
            "eta {} / status {} against {} subjects",
            eta.len(),
            status.len(),
            risk.n()
        )));
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eta"));
    }
    Ok(())
}

fn max_of(eta: &[f64]) -> f64 {
    eta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Shifted risk-set sums `S_k = sum_{l in R} exp(eta_l - c)` per sorted position.
fn risk_denominators(eta: &[f64], risk: &RiskIndex, shift: f64) -> Vec<f64> {
    let n = risk.n();
    let order = risk.order();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + (eta[order[k]] - shift).exp();
    }
    (0..n).map(|k| suffix[risk.group_start(k)]).collect()
}

/// `l_n(eta) = (1/n) sum_j tau_j (eta_j - log sum_{l in R_j} exp(eta_l))`.
pub fn log_partial_likelihood(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<f64> {
    check(eta, risk, status)?;
    let n = risk.n();
    if n == 0 {
        return Ok(0.0);
    }
    let shift = max_of(eta);
    let denom = risk_denominators(eta, risk, shift);
    let order = risk.order();
    let mut total = 0.0;
    for k in 0..n {
        let i = order[k];
        if status[i] {
            total += eta[i] - shift - denom[k].ln();
        }
    }
    Ok(total / n as f64)
}

/// Unnormalized log partial likelihood `n * l_n(eta)`.
pub fn log_partial_likelihood_sum(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<f64> {
    Ok(log_partial_likelihood(eta, risk, status)? * risk.n() as f64)
}

/// Gradient and Hessian diagonal of `l_n` with respect to `eta`.
#[derive(Debug, Clone)]
pub struct EtaDerivatives {
    pub gradient: Vec<f64>,
    pub hessian_diag: Vec<f64>,
}

pub fn eta_derivatives(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<EtaDerivatives> {
    check(eta, risk, status)?;
    let n = risk.n();
    let mut gradient = vec![0.0; n];
    let mut hessian_diag = vec![0.0; n];
    if n == 0 {
        return Ok(EtaDerivatives { gradient, hessian_diag });
    }
    let shift = max_of(eta);
    let denom = risk_denominators(eta, risk, shift);
    let order = risk.order();
    // Prefix sums over m with T_m <= T_i of tau_m / S_m and tau_m / S_m^2.
    let mut c1 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    let (mut a1, mut a2) = (0.0, 0.0);
    for k in 0..n {
        if status[order[k]] {
            a1 += 1.0 / denom[k];
            a2 += 1.0 / (denom[k] * denom[k]);
        }
        c1[k] = a1;
        c2[k] = a2;
    }
    let inv_n = 1.0 / n as f64;
    for k in 0..n {
        let i = order[k];
        let end = risk.group_end(k);
        let e = (eta[i] - shift).exp();
        let first = e * c1[end];
        let second = e * e * c2[end];
        let tau = if status[i] { 1.0 } else { 0.0 };
        gradient[i] = inv_n * (tau - first);
        hessian_diag[i] = inv_n * (second - first);
    }
    Ok(EtaDerivatives { gradient, hessian_diag })
}

pub fn eta_gradient(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<Vec<f64>> {
    Ok(eta_derivatives(eta, risk, status)?.gradient)
}

pub fn eta_hessian_diag(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<Vec<f64>> {
    Ok(eta_derivatives(eta, risk, status)?.hessian_diag)
}

/// Expected-event weights `g_i = exp(eta_i) sum_{m in E_i} tau_m / sum_{l in R_m} exp(eta_l)`,
/// assembled as the row vector `(tau_m / S_m)_m` times the upper-triangular
/// ones matrix in time order, elementwise times `exp(eta)`.
pub fn expected_events(eta: &[f64], risk: &RiskIndex, status: &[bool]) -> Result<Vec<f64>> {
    check(eta, risk, status)?;
    let n = risk.n();
    let order = risk.order();
    let shift = max_of(eta);
    let mut exp_sorted = vec![0.0; n];
    for k in 0..n {
        exp_sorted[k] = (eta[order[k]] - shift).exp();
    }
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + exp_sorted[k];
    }
    let mut inv_denoms = vec![0.0; n];
    for k in 0..n {
        if status[order[k]] {
            inv_denoms[k] = 1.0 / tail[risk.group_start(k)];
        }
    }
    let mut g = vec![0.0; n];
    let mut running = 0.0;
    let mut k = 0;
    while k < n {
        let end = risk.group_end(k);
        for pos in k..=end {
            running += inv_denoms[pos];
        }
        for pos in k..=end {
            g[order[pos]] = exp_sorted[pos] * running;
        }
        k = end + 1;
    }
    Ok(g)
}

/// IRLS working response `Y = eta + grad / W` and weights `W = -hess_diag`,
/// floored at [`WEIGHT_FLOOR`].
pub fn working_response(eta: &[f64], grad: &[f64], hess_diag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = hess_diag.iter().map(|h| (-h).max(WEIGHT_FLOOR)).collect();
    let y = eta.iter().zip(grad).zip(&w).map(|((e, g), w)| e + g / w).collect();
    (y, w)
}

/// Penalized objective
/// `l_n(eta) - lambda1 |beta|_1 - lambda2 sum(delta) - (lambda3 / 2) alpha' K alpha`.
pub fn objective(state: &FitState, lam: &LambdaTriple, risk: &RiskIndex, status: &[bool]) -> Result<f64> {
    let ll = log_partial_likelihood(state.eta.as_slice(), risk, status)?;
    let quad = state.alpha.dot(&(&state.gram * &state.alpha));
    let value = ll
        - lam.lambda1 * state.beta.iter().map(|b| b.abs()).sum::<f64>()
        - lam.lambda2 * state.delta.iter().sum::<f64>()
        - 0.5 * lam.lambda3 * quad;
    if !value.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(value)
}

/// Gradient of [`objective`] with respect to `delta`:
/// `(1/n) [C(tau alpha') - C(g alpha')] - lambda2 - (lambda3/2) C(alpha alpha')`
/// with `C` the kernel contraction.
pub fn delta_gradient(
    state: &FitState,
    lam: &LambdaTriple,
    risk: &RiskIndex,
    status: &[bool],
    kernel: &KernelCache,
) -> Result<Vec<f64>> {
    let n = risk.n();
    let g = expected_events(state.eta.as_slice(), risk, status)?;
    let inv_n = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    let u: Vec<f64> = (0..n)
        .map(|i| inv_n * ((if status[i] { 1.0 } else { 0.0 }) - g[i]))
        .collect();
    let a = &state.alpha;
    let half_l3 = 0.5 * lam.lambda3;
    // M = u a' - (lambda3/2) a a'
    let mut v = kernel.contract_pairs(
        &state.delta,
        &state.gram,
        |i, j| u[i] * a[j] + u[j] * a[i] - 2.0 * half_l3 * a[i] * a[j],
        |i| u[i] * a[i] - half_l3 * a[i] * a[i],
    )?;
    for vq in v.iter_mut() {
        *vq -= lam.lambda2;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("delta gradient"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalDataset;

    fn risk_for(time: &[f64], status: &[bool]) -> RiskIndex {
        let n = time.len();
        SurvivalDataset::new(time.to_vec(), status.to_vec(), DMatrix::zeros(n, 0), DMatrix::zeros(n, 0))
            .unwrap()
            .risk_index()
    }

    #[test]
    fn no_events_zero_likelihood() {
        let status = [false; 4];
        let risk = risk_for(&[1.0, 2.0, 3.0, 4.0], &status);
        let eta = [0.3, -1.0, 2.0, 0.1];
        assert_eq!(log_partial_likelihood(&eta, &risk, &status).unwrap(), 0.0);
        let d = eta_derivatives(&eta, &risk, &status).unwrap();
        assert!(d.gradient.iter().all(|v| *v == 0.0));
        assert!(d.hessian_diag.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_subject_hand_value() {
        let status = [true, true];
        let risk = risk_for(&[1.0, 2.0], &status);
        let l = log_partial_likelihood(&[0.0, 0.0], &risk, &status).unwrap();
        assert!((l - (-0.34657359027997264)).abs() < 1e-15);
        // g_1 = 1/2, g_2 = 1/2 + 1 → gradient (1/2)(1 - 1/2), (1/2)(1 - 3/2)
        let grad = eta_gradient(&[0.0, 0.0], &risk, &status).unwrap();
        assert!((grad[0] - 0.25).abs() < 1e-15);
        assert!((grad[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn nan_eta_rejected() {
        let status = [true, true];
        let risk = risk_for(&[1.0, 2.0], &status);
        assert!(matches!(
            log_partial_likelihood(&[f64::NAN, 0.0], &risk, &status),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn working_response_fixed_point_and_clamp() {
        let (y, w) = working_response(&[0.5, -0.2], &[0.0, 0.0], &[-0.3, 0.0]);
        assert_eq!(y, vec![0.5, -0.2]);
        assert_eq!(w, vec![0.3, WEIGHT_FLOOR]);
        let (y, _) = working_response(&[0.0], &[0.1], &[0.0]);
        assert!(y[0].is_finite());
    }

    #[test]
    fn lambda3_must_be_positive() {
        assert!(LambdaTriple::new(0.0, 0.0, 0.0).is_err());
        assert!(LambdaTriple::new(-1.0, 0.0, 1.0).is_err());
        assert!(LambdaTriple::new(0.0, 0.0, 1e-3).is_ok());
    }
}
