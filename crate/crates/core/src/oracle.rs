//! Brute-force references for small instances.
//!
//! These deliberately avoid the waterfilling and solver modules: the scalar
//! oracle is plain arithmetic plus golden-section search, the grid oracle
//! enumerates powers, and the capacity curve runs its own rate-maximizing
//! waterfilling under a sum-power price.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::model::{ChannelSet, PowerModel};
use crate::objective::{ee_objective, CovarianceSet};

const GOLDEN_ITERATIONS: usize = 200;
const MAX_DOUBLINGS: usize = 2000;
const GRID_CELL_LIMIT: f64 = 1e7;

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Single-antenna, single-user optimum of
/// `w log2(1 + p h2 / noise) / (p/eta + m p_dyn + p_sta)`; returns `(p_opt, ee_opt)`.
pub fn scalar_ee_oracle(h2: f64, noise: f64, w: f64, pm: &PowerModel, m: usize) -> (f64, f64) {
    let circuit = m as f64 * pm.p_dyn + pm.p_sta;
    let f = |p: f64| w * (1.0 + p * h2 / noise).log2() / (p / pm.eta + circuit);
    if !(h2 > 0.0) {
        return (0.0, 0.0);
    }
    let mut hi = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        if f(2.0 * hi) <= f(hi) {
            break;
        }
        hi *= 2.0;
    }
    let mut lo_start = 0.0;
    // shrink the bracket from above when the optimum is far below 1 W
    while hi > 1e-300 && f(0.5 * hi) >= f(hi) {
        hi *= 0.5;
    }
    if hi > 1e-300 {
        lo_start = 0.25 * hi;
    }
    golden_section_max(f, lo_start, 2.0 * hi)
}

/// Exhaustive search over per-user powers for single-antenna users.
///
/// Each axis is sampled at `steps + 1` points `j * p_max / steps`.
pub fn grid_ee_oracle(
    ch: &ChannelSet,
    pm: &PowerModel,
    p_max: f64,
    steps: usize,
) -> Result<(CovarianceSet, f64)> {
    if ch.n() != 1 {
        return Err(Error::Domain(format!("grid oracle needs N = 1, got {}", ch.n())));
    }
    let k = ch.k();
    if k > 3 || steps == 0 || steps > 200 {
        return Err(Error::Domain(format!(
            "grid oracle supports K <= 3 and 1..=200 steps (K={k}, steps={steps})"
        )));
    }
    if (steps as f64).powi(k as i32) > GRID_CELL_LIMIT {
        return Err(Error::Domain(format!("{steps}^{k} grid cells exceed the 1e7 limit")));
    }
    if !(p_max > 0.0) {
        return Err(Error::Domain(format!("p_max must be positive, got {p_max}")));
    }

    let scalar = |p: f64| ComplexMatrix::from_element(1, 1, p.into());
    let mut index = vec![0usize; k];
    let mut best = (vec![0.0; k], f64::NEG_INFINITY);
    loop {
        let powers: Vec<f64> = index.iter().map(|&j| j as f64 * p_max / steps as f64).collect();
        let cov = CovarianceSet::new(powers.iter().map(|&p| scalar(p)).collect());
        let ee = ee_objective(ch, pm, &cov)?;
        if ee > best.1 {
            best = (powers, ee);
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == k {
                let cov = CovarianceSet::new(best.0.iter().map(|&p| scalar(p)).collect());
                return Ok((cov, best.1));
            }
            index[axis] += 1;
            if index[axis] <= steps {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
    }
}

/// One point of the capacity/EE-versus-power curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub p: f64,
    /// Sum capacity at transmit power `p`, bits/s.
    pub capacity: f64,
    /// `capacity / total_power(p)`, bits/Joule.
    pub ee: f64,
}

const PRICE_SWEEPS: usize = 500;
const PRICE_SWEEP_TOL: f64 = 1e-13;
const PRICE_BISECTIONS: usize = 200;
const POWER_REL_TOL: f64 = 1e-10;

/// Rate-maximizing covariances under a power price `mu` (bits/s per Watt):
/// cyclic waterfilling of `W log2 det(I + sum H~^H Q H~) - mu sum Tr(Q)`,
/// warm-started from `cov`.
fn priced_waterfilling(
    h: &[ComplexMatrix],
    w: f64,
    mu: f64,
    cov: &mut CovarianceSet,
) -> Result<()> {
    let m = h[0].ncols();
    let level = w / (LN_2 * mu);
    let received = |cov: &CovarianceSet, skip: usize| {
        h.iter()
            .zip(&cov.q)
            .enumerate()
            .filter(|(j, _)| *j != skip)
            .fold(linalg::identity(m), |acc, (_, (hj, qj))| acc + hj.adjoint() * qj * hj)
    };
    let dual_value = |cov: &CovarianceSet| -> Result<f64> {
        let rate = w * linalg::logdet_pd(&received(cov, usize::MAX))?;
        Ok(rate - mu * cov.total_transmit_power())
    };
    let mut prev = dual_value(cov)?;
    for _ in 0..PRICE_SWEEPS {
        for (i, hi) in h.iter().enumerate() {
            let whitening = linalg::inv_sqrt_pd(&received(cov, i))?;
            let eff = hi * whitening;
            let eig = linalg::eig_hermitian(&(&eff * eff.adjoint()))?;
            let powers: Vec<f64> = eig
                .eigenvalues
                .iter()
                .map(|&d| if d > 0.0 { (level - 1.0 / d).max(0.0) } else { 0.0 })
                .collect();
            cov.q[i] = linalg::hermitian_part(
                &(&eig.eigenvectors * linalg::real_diagonal(&powers) * eig.eigenvectors.adjoint()),
            );
        }
        let value = dual_value(cov)?;
        if (value - prev).abs() <= PRICE_SWEEP_TOL * value.abs().max(1.0) {
            break;
        }
        prev = value;
    }
    Ok(())
}

/// Sum capacity and EE over a grid of transmit powers. The capacity at each
/// power comes from priced waterfilling with the price bisected until the
/// allocated power matches.
pub fn capacity_vs_power_curve(
    ch: &ChannelSet,
    pm: &PowerModel,
    p_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    if p_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("power grid must be ascending".into()));
    }
    if let Some(p) = p_grid.iter().find(|&&p| !(p >= 0.0)) {
        return Err(Error::Domain(format!("grid powers must be non-negative, got {p}")));
    }
    let sigma = ch.noise_power().sqrt();
    let h: Vec<ComplexMatrix> = ch.channels().iter().map(|hi| hi.unscale(sigma)).collect();
    let w = ch.bandwidth();
    let m = ch.m();

    // Above this price nobody transmits.
    let strongest = h
        .iter()
        .map(|hi| linalg::eig_hermitian(&(hi * hi.adjoint())).map(|e| e.eigenvalues[0]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mu_ceiling = w * strongest / LN_2;

    let mut warm = CovarianceSet::zeros(ch.k(), ch.n());
    let mut points = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let cov = if p == 0.0 || strongest == 0.0 {
            CovarianceSet::zeros(ch.k(), ch.n())
        } else {
            let (mut lo, mut hi) = (mu_ceiling, mu_ceiling);
            let mut cov = warm.clone();
            // lower the price until enough power is spent
            loop {
                lo *= 0.5;
                priced_waterfilling(&h, w, lo, &mut cov)?;
                if cov.total_transmit_power() >= p {
                    break;
                }
                hi = lo;
                if lo < 1e-300 {
                    return Err(Error::Numerical("price bracket did not close".into()));
                }
            }
            let mut best = cov.clone();
            for _ in 0..PRICE_BISECTIONS {
                let mid = (lo * hi).sqrt();
                priced_waterfilling(&h, w, mid, &mut cov)?;
                let spent = cov.total_transmit_power();
                if spent >= p {
                    lo = mid;
                } else {
                    hi = mid;
                }
                best = cov.clone();
                if (spent - p).abs() <= POWER_REL_TOL * p || hi / lo - 1.0 < 1e-15 {
                    break;
                }
            }
            best
        };
        let rate_matrix = h
            .iter()
            .zip(&cov.q)
            .fold(linalg::identity(m), |acc, (hi, qi)| acc + hi.adjoint() * qi * hi);
        let capacity = w * linalg::logdet_pd(&rate_matrix)?;
        let ee = capacity / pm.total_power(p, m)?;
        points.push(CurvePoint { p, capacity, ee });
        warm = cov;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::*;

    fn scalar_channel(h: f64, noise: f64, w: f64) -> ChannelSet {
        ChannelSet::new(vec![ComplexMatrix::from_element(1, 1, h.into())], noise, w).unwrap()
    }

    #[test]
    fn scalar_oracle_is_a_maximum() {
        let pm = PowerModel::reference();
        let (h2, noise, w) = (10f64.powf(-12.81), 1e-14, 5e6);
        let (p, ee) = scalar_ee_oracle(h2, noise, w, &pm, 1);
        let f = |p: f64| w * (1.0 + p * h2 / noise).log2() / (p / 0.38 + 83.0 + 45.5);
        assert!((f(p) - ee).abs() <= 1e-12 * ee);
        for scale in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
            assert!(f(p * scale) <= ee);
        }
    }

    #[test]
    fn scalar_objective_is_unimodal_on_grid() {
        let pm = PowerModel::reference();
        let (h2, noise, w) = (3e-13, 1e-14, 5e6);
        let f = |p: f64| w * (1.0 + p * h2 / noise).log2() / (p / 0.38 + 83.0 + 45.5);
        let (p_opt, _) = scalar_ee_oracle(h2, noise, w, &pm, 1);
        let values: Vec<f64> = (0..=400).map(|j| f(j as f64 * p_opt / 100.0)).collect();
        let peak = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(values[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(values[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn scalar_oracle_weak_channel() {
        let pm = PowerModel::reference();
        let mut prev_ee = f64::INFINITY;
        for h2 in [1e-12, 1e-14, 1e-16, 1e-18] {
            let (_, ee) = scalar_ee_oracle(h2, 1e-14, 5e6, &pm, 1);
            assert!(ee < prev_ee);
            prev_ee = ee;
        }
        assert!(prev_ee < 1e-2 * scalar_ee_oracle(1e-12, 1e-14, 5e6, &pm, 1).1);
        assert_eq!(scalar_ee_oracle(0.0, 1e-14, 5e6, &pm, 1), (0.0, 0.0));
    }

    #[test]
    fn grid_single_user_agrees_with_scalar() {
        let pm = PowerModel::new(0.5, 1.0, 2.0).unwrap();
        let ch = scalar_channel(0.8, 0.1, 1.0);
        let (p_opt, ee_opt) = scalar_ee_oracle(0.64, 0.1, 1.0, &pm, 1);
        let (cov, ee) = grid_ee_oracle(&ch, &pm, 3.0 * p_opt, 200).unwrap();
        let p = cov.total_transmit_power();
        assert!((p - p_opt).abs() <= 3.0 * p_opt / 200.0);
        assert!(ee <= ee_opt * (1.0 + 1e-12));
        assert!(ee >= ee_opt * (1.0 - 1e-3));
    }

    #[test]
    fn grid_zero_channels() {
        let ch = ChannelSet::new(vec![ComplexMatrix::zeros(1, 2); 2], 1.0, 1.0).unwrap();
        let (cov, ee) = grid_ee_oracle(&ch, &PowerModel::reference(), 10.0, 20).unwrap();
        assert_eq!(ee, 0.0);
        assert_eq!(cov.total_transmit_power(), 0.0);
    }

    #[test]
    fn grid_guards() {
        let pm = PowerModel::reference();
        let ch = ChannelSet::new(vec![ComplexMatrix::zeros(2, 2)], 1.0, 1.0).unwrap();
        assert!(grid_ee_oracle(&ch, &pm, 1.0, 10).is_err());
        let ch = ChannelSet::new(vec![ComplexMatrix::zeros(1, 2); 4], 1.0, 1.0).unwrap();
        assert!(grid_ee_oracle(&ch, &pm, 1.0, 10).is_err());
        let ch = ChannelSet::new(vec![ComplexMatrix::zeros(1, 2); 3], 1.0, 1.0).unwrap();
        assert!(grid_ee_oracle(&ch, &pm, 1.0, 201).is_err());
        assert!(grid_ee_oracle(&ch, &pm, 1.0, 200).is_ok());
    }

    #[test]
    fn capacity_curve_basics() {
        let mut r = rng(12);
        let hs = (0..3).map(|_| random_matrix(&mut r, 2, 3)).collect();
        let ch = ChannelSet::new(hs, 0.5, 2.0).unwrap();
        let pm = PowerModel::new(0.5, 0.5, 1.0).unwrap();
        let grid: Vec<f64> = (0..30).map(|j| j as f64 * 0.5).collect();
        let curve = capacity_vs_power_curve(&ch, &pm, &grid).unwrap();
        assert_eq!(curve[0].capacity, 0.0);
        assert_eq!(curve[0].ee, 0.0);
        for w in curve.windows(2) {
            assert!(w[1].capacity >= w[0].capacity);
        }
        assert!(capacity_vs_power_curve(&ch, &pm, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn capacity_curve_single_user_closed_form() {
        // one single-antenna user: C(P) = W log2(1 + P |h|^2 / sigma^2)
        let ch = scalar_channel(1.5, 0.2, 3.0);
        let pm = PowerModel::reference();
        let curve = capacity_vs_power_curve(&ch, &pm, &[0.1, 1.0, 7.0]).unwrap();
        for pt in curve {
            let exact = 3.0 * (1.0 + pt.p * 2.25 / 0.2).log2();
            assert!((pt.capacity - exact).abs() <= 1e-8 * exact);
        }
    }
}
