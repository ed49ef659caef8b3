//! Uplink-to-downlink covariance mapping and the dirty-paper-coding sum rate.
//!
//! For an encoding order `pi`, BC user `pi(p)` is precoded against the
//! signals of users `pi(0..p)` and the dual MAC decodes in the reverse order.
//! With noise-normalized channels `H~ = H / sigma` the per-user transform is
//!
//! ```text
//!   A  = I + H~_u (sum of earlier Sigma) H~_u^H
//!   B  = I + sum of later H~_v^H Q_v H~_v
//!   B^{-1/2} H~_u^H A^{-1/2} = F L G^H            (thin SVD)
//!   Sigma_u = B^{-1/2} F G^H A^{1/2} Q_u A^{1/2} G F^H B^{-1/2}
//! ```
//!
//! which keeps every user's rate and the total transmit power unchanged.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::model::{check_permutation, ChannelSet};
use crate::objective::CovarianceSet;

#[derive(Debug, Clone)]
pub struct BcSolution {
    /// Downlink covariances `Sigma_i` (M x M), indexed by user.
    pub bc_covariances: Vec<ComplexMatrix>,
    /// `encoding_order[p]` is the user encoded at position `p`.
    pub encoding_order: Vec<usize>,
    pub dpc_sum_rate: f64,
}

impl BcSolution {
    pub fn total_transmit_power(&self) -> f64 {
        self.bc_covariances.iter().map(linalg::trace_re).sum()
    }
}

pub fn natural_order(k: usize) -> Vec<usize> {
    (0..k).collect()
}

pub fn mac_to_bc(ch: &ChannelSet, cov: &CovarianceSet, order: &[usize]) -> Result<BcSolution> {
    let k = ch.k();
    check_permutation(order, k)?;
    if cov.k() != k {
        return Err(Error::Dimension(format!("{} covariances for {k} users", cov.k())));
    }
    let (m, n) = (ch.m(), ch.n());
    let sigma = Complex64::new(ch.noise_power().sqrt(), 0.0);
    let h: Vec<ComplexMatrix> = ch.channels().iter().map(|h| h / sigma).collect();

    let mut sigmas = vec![linalg::zeros(m, m); k];
    let mut earlier = linalg::zeros(m, m);
    for (p, &u) in order.iter().enumerate() {
        let context = |e: Error| Error::Numerical(format!("duality mapping for user {u}: {e}"));
        let a = linalg::identity(n) + &h[u] * &earlier * h[u].adjoint();
        let b = order[p + 1..]
            .iter()
            .fold(linalg::identity(m), |acc, &v| acc + h[v].adjoint() * &cov.q[v] * &h[v]);

        let a_half = linalg::sqrt_psd(&a).map_err(context)?;
        let a_inv_half = linalg::inv_sqrt_pd(&a).map_err(context)?;
        let b_inv_half = linalg::inv_sqrt_pd(&b).map_err(context)?;

        let x = &b_inv_half * h[u].adjoint() * &a_inv_half;
        let svd = x.svd(true, true);
        let f = svd
            .u
            .ok_or_else(|| Error::Numerical(format!("SVD failed for user {u}")))?;
        let g = svd
            .v_t
            .ok_or_else(|| Error::Numerical(format!("SVD failed for user {u}")))?
            .adjoint();
        let t = &f * g.adjoint();
        let weighted = &a_half * &cov.q[u] * &a_half;
        let s = &b_inv_half * &t * weighted * t.adjoint() * &b_inv_half;
        let s = linalg::hermitian_part(&s);
        if !linalg::is_finite(&s) {
            return Err(Error::Numerical(format!(
                "duality mapping for user {u} produced non-finite values"
            )));
        }
        earlier += &s;
        sigmas[u] = s;
    }

    let mut sol = BcSolution {
        bc_covariances: sigmas,
        encoding_order: order.to_vec(),
        dpc_sum_rate: 0.0,
    };
    sol.dpc_sum_rate = dpc_sum_rate(ch, &sol, ch.noise_power())?;
    Ok(sol)
}

/// DPC sum rate of downlink covariances under `bc.encoding_order`.
pub fn dpc_sum_rate(ch: &ChannelSet, bc: &BcSolution, noise: f64) -> Result<f64> {
    let k = ch.k();
    check_permutation(&bc.encoding_order, k)?;
    if bc.bc_covariances.len() != k {
        return Err(Error::Dimension(format!(
            "{} downlink covariances for {k} users",
            bc.bc_covariances.len()
        )));
    }
    let (m, n) = (ch.m(), ch.n());
    if let Some(s) = bc.bc_covariances.iter().find(|s| s.shape() != (m, m)) {
        return Err(Error::Dimension(format!(
            "downlink covariance is {}x{}, expected {m}x{m}",
            s.nrows(),
            s.ncols()
        )));
    }
    if !(noise > 0.0) {
        return Err(Error::Domain(format!("noise power must be positive, got {noise}")));
    }
    let mut earlier = linalg::zeros(m, m);
    let mut bits = 0.0;
    for &u in &bc.encoding_order {
        let h = ch.channel(u);
        let interference = linalg::identity(n) + (h * &earlier * h.adjoint()).unscale(noise);
        earlier += &bc.bc_covariances[u];
        let total = linalg::identity(n) + (h * &earlier * h.adjoint()).unscale(noise);
        bits += linalg::logdet_pd(&total)? - linalg::logdet_pd(&interference)?;
    }
    Ok(ch.bandwidth() * bits)
}
