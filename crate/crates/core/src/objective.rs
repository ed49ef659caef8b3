//! Dual-MAC sum rate, the energy-efficiency objective and the per-user
//! split that turns one block of the objective into a fractional program.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::model::{ChannelSet, PowerModel};

/// Uplink covariances `Q_i` (N x N, Hermitian PSD, Watts).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub q: Vec<ComplexMatrix>,
}

impl CovarianceSet {
    pub fn new(q: Vec<ComplexMatrix>) -> Self {
        Self { q }
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        Self {
            q: vec![linalg::zeros(n, n); k],
        }
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn user_powers(&self) -> Vec<f64> {
        self.q.iter().map(linalg::trace_re).collect()
    }

    /// `sum_i Tr(Q_i)`.
    pub fn total_transmit_power(&self) -> f64 {
        self.q.iter().map(linalg::trace_re).sum()
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        crate::model::check_permutation(order, self.k())?;
        Ok(Self::new(order.iter().map(|&i| self.q[i].clone()).collect()))
    }

    /// Checks shapes against the channel set and PSD-ness at `tol`.
    pub fn validate(&self, ch: &ChannelSet, tol: f64) -> Result<()> {
        check_shapes(ch, self)?;
        for (i, q) in self.q.iter().enumerate() {
            if !linalg::is_psd(q, tol)? {
                return Err(Error::Domain(format!("covariance of user {i} is not PSD")));
            }
        }
        Ok(())
    }
}

fn check_shapes(ch: &ChannelSet, cov: &CovarianceSet) -> Result<()> {
    if cov.k() != ch.k() {
        return Err(Error::Dimension(format!(
            "{} covariances for {} users",
            cov.k(),
            ch.k()
        )));
    }
    let n = ch.n();
    if let Some((i, q)) = cov.q.iter().enumerate().find(|(_, q)| q.shape() != (n, n)) {
        return Err(Error::Dimension(format!(
            "covariance of user {i} is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    Ok(())
}

/// `sum_{j in users} H_j^H Q_j H_j` (M x M).
fn received_covariance<'a>(
    ch: &ChannelSet,
    cov: &CovarianceSet,
    users: impl Iterator<Item = usize> + 'a,
) -> ComplexMatrix {
    let m = ch.m();
    users.fold(linalg::zeros(m, m), |acc, j| {
        let h = ch.channel(j);
        acc + h.adjoint() * &cov.q[j] * h
    })
}

/// `W log2 det(I + (1/sigma^2) sum_i H_i^H Q_i H_i)` in bits/s.
pub fn mac_sum_rate(ch: &ChannelSet, cov: &CovarianceSet) -> Result<f64> {
    check_shapes(ch, cov)?;
    let m = ch.m();
    let r = received_covariance(ch, cov, 0..ch.k());
    let a = linalg::identity(m) + r.unscale(ch.noise_power());
    Ok(ch.bandwidth() * linalg::logdet_pd(&a)?)
}

/// Sum rate over total consumed power, in bits/Joule.
pub fn ee_objective(ch: &ChannelSet, pm: &PowerModel, cov: &CovarianceSet) -> Result<f64> {
    let rate = mac_sum_rate(ch, cov)?;
    let power = pm.total_power(cov.total_transmit_power().max(0.0), ch.m())?;
    Ok(rate / power)
}

/// Everything user `i`'s block update needs, with the other users fixed.
#[derive(Debug, Clone)]
pub struct UserDecomposition {
    /// `I + (1/sigma^2) sum_{j != i} H_j^H Q_j H_j` (M x M).
    pub z: ComplexMatrix,
    /// Interference-whitened channel `H_i (sigma^2 I + sum_{j != i} H_j^H Q_j H_j)^{-1/2}` (N x M).
    pub g: ComplexMatrix,
    /// Denominator constant: other users' power over eta plus circuit power.
    pub a: f64,
    /// Numerator constant `W log2 det(Z_i)`.
    pub b: f64,
}

pub fn decompose_for_user(
    ch: &ChannelSet,
    pm: &PowerModel,
    cov: &CovarianceSet,
    i: usize,
) -> Result<UserDecomposition> {
    check_shapes(ch, cov)?;
    if i >= ch.k() {
        return Err(Error::Domain(format!("user index {i} out of range for {} users", ch.k())));
    }
    let m = ch.m();
    let sigma2 = ch.noise_power();
    let interference = received_covariance(ch, cov, (0..ch.k()).filter(|&j| j != i));

    let z = linalg::hermitian_part(&(linalg::identity(m) + interference.unscale(sigma2)));
    let whitening = linalg::inv_sqrt_pd(&(linalg::identity(m).scale(sigma2) + &interference))?;
    let g = ch.channel(i) * whitening;

    let others_power: f64 = (0..ch.k())
        .filter(|&j| j != i)
        .map(|j| linalg::trace_re(&cov.q[j]))
        .sum();
    let a = others_power / pm.eta + pm.circuit_power(m);
    let b = ch.bandwidth() * linalg::logdet_pd(&z)?;
    Ok(UserDecomposition { z, g, a, b })
}

impl UserDecomposition {
    /// Block numerator `b_i + W log2 det(I + G_i^H Q G_i)` for a candidate `Q`.
    pub fn numerator(&self, bandwidth: f64, q: &ComplexMatrix) -> Result<f64> {
        let m = self.g.ncols();
        let inner = linalg::identity(m) + self.g.adjoint() * q * &self.g;
        Ok(self.b + bandwidth * linalg::logdet_pd(&inner)?)
    }
}
