//! Energy-efficient iterative waterfilling: cyclic block-coordinate ascent
//! over the users' uplink covariances.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ChannelSet, PowerModel};
use crate::objective::{decompose_for_user, ee_objective, CovarianceSet};
use crate::waterfill::{solve_subproblem, DEFAULT_WATER_LEVEL_TOL};

#[derive(Debug, Clone)]
pub enum InitialCovariances {
    Zeros,
    Given(CovarianceSet),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Maximum number of full sweeps over the users.
    pub max_iterations: usize,
    /// Stop once a sweep changes the EE by less than this (relative).
    pub rel_tolerance: f64,
    pub initial_covariances: InitialCovariances,
    /// When false, all `max_iterations` sweeps run even after convergence.
    pub stop_on_convergence: bool,
    /// Relative bracket width for each water-level search.
    pub water_level_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-8,
            initial_covariances: InitialCovariances::Zeros,
            stop_on_convergence: true,
            water_level_tol: DEFAULT_WATER_LEVEL_TOL,
        }
    }
}

impl SolverConfig {
    pub fn fixed_sweeps(sweeps: usize) -> Self {
        Self {
            max_iterations: sweeps,
            stop_on_convergence: false,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        if !(self.rel_tolerance > 0.0) || !(self.water_level_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Block update record: the subproblem's water level and achieved value.
#[derive(Debug, Clone, Copy)]
pub struct UpdateRecord {
    pub sweep: usize,
    pub user: usize,
    pub lambda_star: f64,
    pub achieved_value: f64,
    /// `Y(lambda_star)` of the block's parametric program.
    pub y_residual: f64,
    /// Block constants of the update.
    pub a: f64,
    pub b: f64,
    /// EE of the full covariance set right after this update.
    pub ee_after: f64,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    /// EE before the first sweep.
    pub initial_ee: f64,
    /// EE after each full sweep.
    pub ee_per_iteration: Vec<f64>,
    /// Every block update in order.
    pub updates: Vec<UpdateRecord>,
    /// Covariances after each sweep.
    pub snapshots: Vec<CovarianceSet>,
    pub final_covariances: CovarianceSet,
    /// `sum_i Tr(Q_i)` of the final covariances, Watts.
    pub final_power: f64,
    pub converged: bool,
    pub iterations_used: usize,
}

impl SolverTrace {
    pub fn final_ee(&self) -> f64 {
        self.ee_per_iteration.last().copied().unwrap_or(self.initial_ee)
    }
}

fn relative_change(prev: f64, next: f64) -> f64 {
    let scale = prev.abs().max(next.abs());
    if scale == 0.0 {
        0.0
    } else {
        (next - prev).abs() / scale
    }
}

fn is_zero_channel(h: &linalg::ComplexMatrix) -> bool {
    h.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Maximizes the energy efficiency by cycling users `0..K`, replacing each
/// `Q_i` with the optimum of its block while the others stay fixed.
pub fn solve(ch: &ChannelSet, pm: &PowerModel, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.validate()?;
    let mut cov = match &cfg.initial_covariances {
        InitialCovariances::Zeros => CovarianceSet::zeros(ch.k(), ch.n()),
        InitialCovariances::Given(c) => {
            c.validate(ch, 1e-9)?;
            c.clone()
        }
    };
    let skip: Vec<bool> = ch.channels().iter().map(is_zero_channel).collect();
    for (q, _) in cov.q.iter_mut().zip(&skip).filter(|(_, &s)| s) {
        *q = linalg::zeros(ch.n(), ch.n());
    }

    let initial_ee = ee_objective(ch, pm, &cov)?;
    let mut prev = initial_ee;
    let mut trace = SolverTrace {
        initial_ee,
        ee_per_iteration: Vec::with_capacity(cfg.max_iterations),
        updates: Vec::new(),
        snapshots: Vec::with_capacity(cfg.max_iterations),
        final_covariances: cov.clone(),
        final_power: 0.0,
        converged: false,
        iterations_used: 0,
    };

    for sweep in 0..cfg.max_iterations {
        for user in (0..ch.k()).filter(|&i| !skip[i]) {
            let wrap = |e: Error| Error::Subproblem {
                user,
                sweep,
                source: Box::new(e),
            };
            let dec = decompose_for_user(ch, pm, &cov, user).map_err(wrap)?;
            let sol = solve_subproblem(&dec, ch.bandwidth(), pm.eta, cfg.water_level_tol)
                .map_err(wrap)?;
            cov.q[user] = sol.q_star;
            trace.updates.push(UpdateRecord {
                sweep,
                user,
                lambda_star: sol.lambda_star,
                achieved_value: sol.achieved_value,
                y_residual: sol.y_residual,
                a: dec.a,
                b: dec.b,
                ee_after: ee_objective(ch, pm, &cov).map_err(wrap)?,
            });
        }
        let ee = ee_objective(ch, pm, &cov)?;
        trace.ee_per_iteration.push(ee);
        trace.snapshots.push(cov.clone());
        trace.iterations_used = sweep + 1;
        trace.converged = relative_change(prev, ee) < cfg.rel_tolerance;
        if trace.converged && cfg.stop_on_convergence {
            break;
        }
        prev = ee;
    }

    trace.final_power = cov.total_transmit_power();
    trace.final_covariances = cov;
    Ok(trace)
}

/// Optimal radiated power `P = sum_i Tr(Q_i)` of a solved trace.
pub fn optimal_transmit_power(trace: &SolverTrace) -> f64 {
    trace.final_covariances.total_transmit_power()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::*;
    use crate::linalg::ComplexMatrix;
    use crate::waterfill::solve_subproblem;

    fn instance(seed: u64, m: usize, n: usize, k: usize) -> ChannelSet {
        let mut r = rng(seed);
        let hs = (0..k).map(|_| random_matrix(&mut r, n, m).scale(0.5)).collect();
        ChannelSet::new(hs, 0.1, 10.0).unwrap()
    }

    fn small_pm() -> PowerModel {
        PowerModel::new(0.4, 1.0, 2.0).unwrap()
    }

    #[test]
    fn zero_channels_converge_immediately() {
        let ch = ChannelSet::new(vec![ComplexMatrix::zeros(2, 3); 3], 1.0, 1.0).unwrap();
        let trace = solve(&ch, &small_pm(), &SolverConfig::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations_used, 1);
        assert_eq!(trace.final_ee(), 0.0);
        assert_eq!(optimal_transmit_power(&trace), 0.0);
    }

    #[test]
    fn single_user_equals_one_block_update() {
        let ch = instance(3, 3, 2, 1);
        let pm = small_pm();
        let trace = solve(&ch, &pm, &SolverConfig::default()).unwrap();
        let dec = decompose_for_user(&ch, &pm, &CovarianceSet::zeros(1, 2), 0).unwrap();
        let sol = solve_subproblem(&dec, ch.bandwidth(), pm.eta, DEFAULT_WATER_LEVEL_TOL).unwrap();
        assert!(linalg::frobenius_norm(&(&trace.final_covariances.q[0] - &sol.q_star)) < 1e-12);
        assert!((trace.final_ee() - sol.achieved_value).abs() <= 1e-9 * sol.achieved_value);
        assert!(trace.iterations_used <= 2);
    }

    #[test]
    fn trace_is_monotone_and_consistent() {
        let pm = small_pm();
        for seed in 0..10 {
            let ch = instance(seed, 4, 2, 3);
            let trace = solve(&ch, &pm, &SolverConfig::default()).unwrap();
            assert!(trace.converged);
            let mut prev = trace.initial_ee;
            for u in &trace.updates {
                assert!(u.ee_after >= prev * (1.0 - 1e-9));
                prev = u.ee_after;
            }
            for w in trace.ee_per_iteration.windows(2) {
                assert!(w[1] >= w[0] * (1.0 - 1e-9));
            }
            assert_eq!(trace.final_power, optimal_transmit_power(&trace));
            assert!(trace.final_power > 0.0);
            assert_eq!(trace.snapshots.len(), trace.iterations_used);
            for q in &trace.final_covariances.q {
                assert!(linalg::is_psd(q, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn block_value_matches_full_objective() {
        let pm = small_pm();
        let ch = instance(21, 3, 2, 3);
        let trace = solve(&ch, &pm, &SolverConfig::default()).unwrap();
        for u in &trace.updates {
            assert!((u.achieved_value - u.ee_after).abs() <= 1e-8 * u.ee_after);
        }
    }

    #[test]
    fn zero_channel_users_are_skipped() {
        let mut r = rng(8);
        let hs = vec![
            random_matrix(&mut r, 2, 3),
            ComplexMatrix::zeros(2, 3),
            random_matrix(&mut r, 2, 3),
        ];
        let ch = ChannelSet::new(hs, 0.1, 1.0).unwrap();
        let trace = solve(&ch, &small_pm(), &SolverConfig::default()).unwrap();
        assert!(trace.updates.iter().all(|u| u.user != 1));
        assert_eq!(linalg::frobenius_norm(&trace.final_covariances.q[1]), 0.0);
    }

    #[test]
    fn fixed_sweeps_run_to_the_end() {
        let ch = instance(2, 3, 1, 2);
        let trace = solve(&ch, &small_pm(), &SolverConfig::fixed_sweeps(30)).unwrap();
        assert_eq!(trace.ee_per_iteration.len(), 30);
        assert!(trace.converged);
    }

    #[test]
    fn rejects_bad_config() {
        let ch = instance(2, 2, 1, 2);
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(solve(&ch, &small_pm(), &cfg).is_err());
        let cfg = SolverConfig {
            initial_covariances: InitialCovariances::Given(CovarianceSet::zeros(3, 1)),
            ..SolverConfig::default()
        };
        assert!(solve(&ch, &small_pm(), &cfg).is_err());
    }
}
