//! Convergence runs and Monte Carlo parameter sweeps.
//!
//! CSV schemas (header row first, floats as 17 significant digits):
//!
//! - convergence: `iteration,ee_bits_per_joule`
//! - antenna sweep: `m,k,mean_ee,std_ee`
//! - distance sweep: `d_km,m,mean_ee,std_ee`
//!
//! Drop `j` of a sweep uses seed `base_seed + j`. Drops run in parallel but
//! are reduced in index order, so output is identical across runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::{mac_to_bc, natural_order};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::model::ScenarioConfig;
use crate::objective::{ee_objective, mac_sum_rate, CovarianceSet};
use crate::solver::{optimal_transmit_power, solve, SolverConfig, SolverTrace};

pub const CONVERGENCE_HEADER: &str = "iteration,ee_bits_per_joule";
pub const ANTENNA_SWEEP_HEADER: &str = "m,k,mean_ee,std_ee";
pub const DISTANCE_SWEEP_HEADER: &str = "d_km,m,mean_ee,std_ee";

/// Full-precision float formatting used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// EE after each of `sweeps` full sweeps, starting from zero covariances.
pub fn run_convergence(cfg: &ScenarioConfig, sweeps: usize) -> Result<Vec<f64>> {
    let sc = cfg.realize()?;
    let trace = solve(
        &sc.channel_set,
        &sc.power_model,
        &SolverConfig::fixed_sweeps(sweeps),
    )?;
    Ok(trace.ee_per_iteration)
}

pub fn convergence_csv(ee: &[f64]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for (i, v) in ee.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_f64(*v)));
    }
    out
}

/// Mean and sample standard deviation (zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    if values.is_empty() {
        return Summary {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary { mean, std }
}

/// Converged EE for drops `0..drops` of `cfg` with seeds `base_seed + j`.
pub fn drop_efficiencies(
    cfg: &ScenarioConfig,
    drops: usize,
    base_seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    (0..drops)
        .into_par_iter()
        .map(|j| {
            let drop = ScenarioConfig {
                seed: base_seed.wrapping_add(j as u64),
                ..cfg.clone()
            };
            let sc = drop.realize()?;
            Ok(solve(&sc.channel_set, &sc.power_model, solver)?.final_ee())
        })
        .collect()
}

fn shared_distance(template: &ScenarioConfig) -> Result<f64> {
    match template.distances_km.as_slice() {
        [d] => Ok(*d),
        ds if !ds.is_empty() && ds.iter().all(|&d| d == ds[0]) => Ok(ds[0]),
        _ => Err(Error::Config(
            "sweeps need a single common user distance in distances_km".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaRow {
    pub m: usize,
    pub k: usize,
    pub summary: Summary,
}

/// Mean EE over drops for every `(k, m)` pair, `k` outer.
pub fn sweep_antennas(
    template: &ScenarioConfig,
    m_list: &[usize],
    k_list: &[usize],
    drops: usize,
    base_seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<AntennaRow>> {
    let d = shared_distance(template)?;
    if let Some(bad) = m_list.iter().chain(k_list).find(|&&x| x == 0) {
        return Err(Error::Config(format!("antenna and user counts must be >= 1, got {bad}")));
    }
    let mut rows = Vec::with_capacity(m_list.len() * k_list.len());
    for &k in k_list {
        for &m in m_list {
            let cfg = ScenarioConfig {
                m,
                k,
                distances_km: vec![d],
                ..template.clone()
            };
            let ee = drop_efficiencies(&cfg, drops, base_seed, solver)?;
            rows.push(AntennaRow {
                m,
                k,
                summary: summarize(&ee),
            });
        }
    }
    Ok(rows)
}

pub fn antenna_csv(rows: &[AntennaRow]) -> String {
    let mut out = String::from(ANTENNA_SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.m,
            r.k,
            fmt_f64(r.summary.mean),
            fmt_f64(r.summary.std)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub d_km: f64,
    pub m: usize,
    pub summary: Summary,
}

/// Mean EE over drops for every `(d, m)` pair, `d` outer.
pub fn sweep_distance(
    template: &ScenarioConfig,
    d_list: &[f64],
    m_list: &[usize],
    drops: usize,
    base_seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<DistanceRow>> {
    if let Some(d) = d_list.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Config(format!("distances must be positive, got {d}")));
    }
    if m_list.contains(&0) {
        return Err(Error::Config("antenna counts must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(d_list.len() * m_list.len());
    for &d_km in d_list {
        for &m in m_list {
            let cfg = ScenarioConfig {
                m,
                distances_km: vec![d_km],
                ..template.clone()
            };
            let ee = drop_efficiencies(&cfg, drops, base_seed, solver)?;
            rows.push(DistanceRow {
                d_km,
                m,
                summary: summarize(&ee),
            });
        }
    }
    Ok(rows)
}

pub fn distance_csv(rows: &[DistanceRow]) -> String {
    let mut out = String::from(DISTANCE_SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.d_km),
            r.m,
            fmt_f64(r.summary.mean),
            fmt_f64(r.summary.std)
        ));
    }
    out
}

/// Real and imaginary parts of a matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixReport {
    pub fn from_matrix(a: &ComplexMatrix) -> Self {
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            (0..a.nrows())
                .map(|r| (0..a.ncols()).map(|c| f(&a[(r, c)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let nrows = self.re.len();
        let ncols = self.re.first().map_or(0, Vec::len);
        let ragged = self.im.len() != nrows
            || self.re.iter().chain(&self.im).any(|row| row.len() != ncols);
        if ragged {
            return Err(Error::Config("matrix report has ragged rows".into()));
        }
        Ok(ComplexMatrix::from_fn(nrows, ncols, |r, c| {
            num_complex::Complex64::new(self.re[r][c], self.im[r][c])
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReport {
    pub user: usize,
    pub power_w: f64,
    pub q: MatrixReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub encoding_order: Vec<usize>,
    pub dpc_sum_rate_bits_per_s: f64,
    pub total_power_w: f64,
    pub covariances: Vec<MatrixReport>,
}

/// Document written by the `solve` command (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub ee_bits_per_joule: f64,
    pub optimal_power_w: f64,
    pub sum_rate_bits_per_s: f64,
    pub iterations: usize,
    pub converged: bool,
    pub scenario: ScenarioConfig,
    pub users: Vec<UserReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcReport>,
}

impl SolveReport {
    pub fn build(
        cfg: &ScenarioConfig,
        solver: &SolverConfig,
        emit_bc: bool,
    ) -> Result<(Self, SolverTrace)> {
        let sc = cfg.realize()?;
        let ch = &sc.channel_set;
        let trace = solve(ch, &sc.power_model, solver)?;
        let cov = &trace.final_covariances;
        let bc = if emit_bc {
            let bc = mac_to_bc(ch, cov, &natural_order(ch.k()))?;
            Some(BcReport {
                total_power_w: bc.total_transmit_power(),
                encoding_order: bc.encoding_order,
                dpc_sum_rate_bits_per_s: bc.dpc_sum_rate,
                covariances: bc.bc_covariances.iter().map(MatrixReport::from_matrix).collect(),
            })
        } else {
            None
        };
        let report = Self {
            ee_bits_per_joule: ee_objective(ch, &sc.power_model, cov)?,
            optimal_power_w: optimal_transmit_power(&trace),
            sum_rate_bits_per_s: mac_sum_rate(ch, cov)?,
            iterations: trace.iterations_used,
            converged: trace.converged,
            scenario: cfg.clone(),
            users: cov
                .q
                .iter()
                .enumerate()
                .map(|(user, q)| UserReport {
                    user,
                    power_w: linalg::trace_re(q),
                    q: MatrixReport::from_matrix(q),
                })
                .collect(),
            bc,
        };
        Ok((report, trace))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn covariances(&self) -> Result<CovarianceSet> {
        Ok(CovarianceSet::new(
            self.users
                .iter()
                .map(|u| u.q.to_matrix())
                .collect::<Result<Vec<_>>>()?,
        ))
    }

    /// Recomputes the EE from the embedded scenario and covariances.
    pub fn recompute_ee(&self) -> Result<f64> {
        let sc = self.scenario.realize()?;
        ee_objective(&sc.channel_set, &sc.power_model, &self.covariances()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_template() -> ScenarioConfig {
        ScenarioConfig::reference(2, 1, 2, 1.0, 10)
    }

    #[test]
    fn convergence_csv_layout() {
        let csv = convergence_csv(&[1.0, 2.5]);
        assert_eq!(
            csv,
            "iteration,ee_bits_per_joule\n1,1.0000000000000000e0\n2,2.5000000000000000e0\n"
        );
    }

    #[test]
    fn single_user_trace_is_flat() {
        let cfg = ScenarioConfig::reference(3, 2, 1, 0.5, 4);
        let ee = run_convergence(&cfg, 10).unwrap();
        assert_eq!(ee.len(), 10);
        for v in &ee[1..] {
            assert!((v - ee[0]).abs() <= 1e-9 * ee[0]);
        }
    }

    #[test]
    fn summary_stats() {
        let s = summarize(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(summarize(&[5.0]).std, 0.0);
    }

    #[test]
    fn single_drop_single_m_gives_one_row() {
        let rows =
            sweep_antennas(&small_template(), &[2], &[2], 1, 3, &SolverConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].summary.std, 0.0);
        assert!(rows[0].summary.mean > 0.0);
    }

    #[test]
    fn empty_distance_list_gives_header_only() {
        let rows =
            sweep_distance(&small_template(), &[], &[2], 5, 0, &SolverConfig::default()).unwrap();
        assert!(rows.is_empty());
        assert_eq!(distance_csv(&rows), "d_km,m,mean_ee,std_ee\n");
    }

    #[test]
    fn sweep_input_errors() {
        let t = small_template();
        let cfg = SolverConfig::default();
        assert!(sweep_distance(&t, &[0.0], &[2], 1, 0, &cfg).is_err());
        assert!(sweep_antennas(&t, &[0], &[2], 1, 0, &cfg).is_err());
        let mixed = ScenarioConfig {
            distances_km: vec![1.0, 2.0],
            ..t
        };
        assert!(sweep_antennas(&mixed, &[2], &[2], 1, 0, &cfg).is_err());
    }

    #[test]
    fn report_round_trip() {
        let cfg = ScenarioConfig::reference(3, 2, 2, 0.8, 6);
        let (report, _) = SolveReport::build(&cfg, &SolverConfig::default(), true).unwrap();
        let text = report.to_toml().unwrap();
        let parsed = SolveReport::parse(&text).unwrap();
        assert_eq!(parsed, report);
        let ee = parsed.recompute_ee().unwrap();
        assert!((ee - report.ee_bits_per_joule).abs() <= 1e-9 * ee);
        let bc = parsed.bc.unwrap();
        assert!((bc.total_power_w - report.optimal_power_w).abs() <= 1e-8 * report.optimal_power_w);
    }
}
