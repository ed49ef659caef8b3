//! Base-station power model, pathloss, Rayleigh channel draws and the
//! scenario file format.
//!
//! Channels are drawn with ChaCha8 (`rand_chacha`). User `i` draws its
//! fading matrix from stream `i` of the generator seeded with the scenario
//! seed, so a user's small-scale fading does not depend on how many other
//! users exist or where they are.

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Bandwidth used in the reference setup (5 MHz).
pub const REFERENCE_BANDWIDTH_HZ: f64 = 5.0e6;
/// Noise power used in the reference setup.
pub const REFERENCE_NOISE_DBM: f64 = -110.0;
pub const REFERENCE_ETA: f64 = 0.38;
pub const REFERENCE_P_DYN_W: f64 = 83.0;
pub const REFERENCE_P_STA_W: f64 = 45.5;

/// Total base-station consumption as a function of radiated power and the
/// number of RF chains: `P / eta + M * p_dyn + p_sta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Power-amplifier efficiency in (0, 1].
    pub eta: f64,
    /// Watts per RF chain.
    pub p_dyn: f64,
    /// Watts independent of transmit power and antenna count.
    pub p_sta: f64,
}

impl PowerModel {
    pub fn new(eta: f64, p_dyn: f64, p_sta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!("PA efficiency must lie in (0, 1], got {eta}")));
        }
        if !(p_dyn >= 0.0 && p_dyn.is_finite()) || !(p_sta >= 0.0 && p_sta.is_finite()) {
            return Err(Error::Domain(format!(
                "circuit powers must be finite and non-negative, got p_dyn={p_dyn}, p_sta={p_sta}"
            )));
        }
        Ok(Self { eta, p_dyn, p_sta })
    }

    pub fn reference() -> Self {
        Self {
            eta: REFERENCE_ETA,
            p_dyn: REFERENCE_P_DYN_W,
            p_sta: REFERENCE_P_STA_W,
        }
    }

    /// Power drawn with zero radiated power.
    pub fn circuit_power(&self, m: usize) -> f64 {
        m as f64 * self.p_dyn + self.p_sta
    }

    pub fn total_power(&self, p_transmit: f64, m: usize) -> Result<f64> {
        if !(p_transmit >= 0.0) {
            return Err(Error::Domain(format!(
                "transmit power must be non-negative, got {p_transmit}"
            )));
        }
        if m == 0 {
            return Err(Error::Domain("antenna count must be at least 1".into()));
        }
        Ok(p_transmit / self.eta + self.circuit_power(m))
    }
}

/// Free-function form of [`PowerModel::total_power`].
pub fn total_power(pm: &PowerModel, p_transmit: f64, m: usize) -> Result<f64> {
    pm.total_power(p_transmit, m)
}

/// `128.1 + 37.6 log10(d)` with `d` in kilometres.
pub fn pathloss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0 && d_km.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {d_km} km")));
    }
    Ok(128.1 + 37.6 * d_km.log10())
}

/// Linear power gain for a pathloss in dB.
pub fn db_to_linear_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// The K downlink channels `H_i` (N x M) with noise power and bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<ComplexMatrix>,
    noise_power: f64,
    bandwidth: f64,
    n: usize,
    m: usize,
}

impl ChannelSet {
    pub fn new(channels: Vec<ComplexMatrix>, noise_power: f64, bandwidth: f64) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Dimension("a channel set needs at least one user".into()))?;
        let (n, m) = first.shape();
        if n == 0 || m == 0 {
            return Err(Error::Dimension("channel matrices must be non-empty".into()));
        }
        for (i, h) in channels.iter().enumerate() {
            if h.shape() != (n, m) {
                return Err(Error::Dimension(format!(
                    "user {i} channel is {}x{}, expected {n}x{m}",
                    h.nrows(),
                    h.ncols()
                )));
            }
            if !crate::linalg::is_finite(h) {
                return Err(Error::NonFinite("channel matrix"));
            }
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::Domain(format!("noise power must be positive, got {noise_power}")));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self {
            channels,
            noise_power,
            bandwidth,
            n,
            m,
        })
    }

    pub fn channels(&self) -> &[ComplexMatrix] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &ComplexMatrix {
        &self.channels[i]
    }

    /// sigma^2 in Watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// W in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Base-station antennas.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Antennas per user.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of users.
    pub fn k(&self) -> usize {
        self.channels.len()
    }

    /// Reorders users: user `j` of the result is user `order[j]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.k())?;
        Self::new(
            order.iter().map(|&i| self.channels[i].clone()).collect(),
            self.noise_power,
            self.bandwidth,
        )
    }
}

pub(crate) fn check_permutation(order: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if order.len() != k {
        return Err(Error::Dimension(format!(
            "permutation has {} entries for {k} users",
            order.len()
        )));
    }
    for &i in order {
        if i >= k || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Domain(format!("{order:?} is not a permutation of 0..{k}")));
        }
    }
    Ok(())
}

/// I.i.d. CN(0, 1) entries: each real and imaginary part has variance 1/2.
fn rayleigh_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * scale, im * scale)
    })
}

/// Small-scale fading of user `user` for a given seed, before pathloss.
pub fn fading_matrix(seed: u64, user: usize, n: usize, m: usize) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64);
    rayleigh_matrix(&mut rng, n, m)
}

/// Draws `H_i = sqrt(10^(-PL(d_i)/10)) G_i` for each user.
pub fn draw_channels(
    seed: u64,
    m: usize,
    n: usize,
    k: usize,
    distances_km: &[f64],
    noise_dbm: f64,
    bandwidth: f64,
) -> Result<ChannelSet> {
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::Domain(format!(
            "antenna and user counts must be at least 1 (m={m}, n={n}, k={k})"
        )));
    }
    if distances_km.len() != k {
        return Err(Error::Dimension(format!(
            "{} distances given for {k} users",
            distances_km.len()
        )));
    }
    let channels = distances_km
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let amplitude = db_to_linear_gain(pathloss_db(d)?).sqrt();
            Ok(fading_matrix(seed, i, n, m).scale(amplitude))
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelSet::new(channels, dbm_to_watts(noise_dbm), bandwidth)
}

/// Contents of a scenario file (TOML key/value text).
///
/// ```toml
/// m = 4
/// n = 4
/// k = 10
/// distances_km = [1.0]   # one value per user, or a single value for all
/// noise_dbm = -110.0
/// bandwidth_hz = 5e6
/// eta = 0.38
/// p_dyn_w = 83.0
/// p_sta_w = 45.5
/// seed = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub distances_km: Vec<f64>,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub eta: f64,
    pub p_dyn_w: f64,
    pub p_sta_w: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Reference parameters with all users at distance `d_km`.
    pub fn reference(m: usize, n: usize, k: usize, d_km: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            k,
            distances_km: vec![d_km],
            noise_dbm: REFERENCE_NOISE_DBM,
            bandwidth_hz: REFERENCE_BANDWIDTH_HZ,
            eta: REFERENCE_ETA,
            p_dyn_w: REFERENCE_P_DYN_W,
            p_sta_w: REFERENCE_P_STA_W,
            seed,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::Config("m, n and k must all be at least 1".into()));
        }
        if self.distances_km.len() != 1 && self.distances_km.len() != self.k {
            return Err(Error::Config(format!(
                "distances_km needs 1 or k={} entries, got {}",
                self.k,
                self.distances_km.len()
            )));
        }
        if let Some(d) = self.distances_km.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("distances must be positive, got {d}")));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config("bandwidth_hz must be positive".into()));
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::Config("noise_dbm must be finite".into()));
        }
        self.power_model()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Per-user distances, broadcasting a single entry to all users.
    pub fn user_distances(&self) -> Vec<f64> {
        if self.distances_km.len() == 1 {
            vec![self.distances_km[0]; self.k]
        } else {
            self.distances_km.clone()
        }
    }

    pub fn power_model(&self) -> Result<PowerModel> {
        PowerModel::new(self.eta, self.p_dyn_w, self.p_sta_w)
    }

    pub fn realize(&self) -> Result<Scenario> {
        self.validate()?;
        let distances_km = self.user_distances();
        let channel_set = draw_channels(
            self.seed,
            self.m,
            self.n,
            self.k,
            &distances_km,
            self.noise_dbm,
            self.bandwidth_hz,
        )?;
        Ok(Scenario {
            channel_set,
            power_model: self.power_model()?,
            rng_seed: self.seed,
            distances_km,
        })
    }
}

/// A concrete channel realization together with its power model.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub channel_set: ChannelSet,
    pub power_model: PowerModel,
    pub rng_seed: u64,
    pub distances_km: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_power_reference_value() {
        let pm = PowerModel::reference();
        let p = pm.total_power(10.0, 4).unwrap();
        assert!((p - (10.0 / 0.38 + 332.0 + 45.5)).abs() < 1e-12);
        assert!((p - 403.8158).abs() < 1e-4);
    }

    #[test]
    fn total_power_edges() {
        let pm = PowerModel::reference();
        assert_eq!(pm.total_power(0.0, 1).unwrap(), 83.0 + 45.5);
        for m in 1..6 {
            let p = pm.total_power(pm.eta, m).unwrap();
            assert!((p - (1.0 + m as f64 * 83.0 + 45.5)).abs() < 1e-12);
        }
        assert!(pm.total_power(-1.0, 4).is_err());
        assert!(pm.total_power(1.0, 0).is_err());
    }

    #[test]
    fn total_power_is_affine_with_slope_inverse_eta() {
        let pm = PowerModel::new(0.25, 10.0, 3.0).unwrap();
        let base = pm.total_power(0.0, 2).unwrap();
        for p in [0.5, 1.0, 7.0, 100.0] {
            let t = pm.total_power(p, 2).unwrap();
            assert!(((t - base) / p - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_model_validation() {
        assert!(PowerModel::new(0.0, 1.0, 1.0).is_err());
        assert!(PowerModel::new(1.5, 1.0, 1.0).is_err());
        assert!(PowerModel::new(0.5, -1.0, 1.0).is_err());
        assert!(PowerModel::new(1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn pathloss_values() {
        assert!((pathloss_db(1.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((pathloss_db(10.0).unwrap() - 165.7).abs() < 1e-12);
        let expected = 128.1 + 37.6 * 0.2f64.log10();
        assert!((pathloss_db(0.2).unwrap() - expected).abs() < 1e-12);
        assert!((pathloss_db(0.2).unwrap() - 101.82).abs() < 0.01);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-1.0).is_err());
    }

    #[test]
    fn noise_conversion() {
        assert!((dbm_to_watts(-110.0) - 1e-14).abs() < 1e-28);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn draw_is_deterministic() {
        let a = draw_channels(42, 4, 2, 3, &[1.0, 0.5, 2.0], -110.0, 5e6).unwrap();
        let b = draw_channels(42, 4, 2, 3, &[1.0, 0.5, 2.0], -110.0, 5e6).unwrap();
        assert_eq!(a, b);
        let c = draw_channels(43, 4, 2, 3, &[1.0, 0.5, 2.0], -110.0, 5e6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn user_fading_independent_of_other_users() {
        let small = draw_channels(5, 3, 2, 2, &[1.0, 1.0], -110.0, 5e6).unwrap();
        let large = draw_channels(5, 3, 2, 4, &[1.0, 1.0, 0.3, 3.0], -110.0, 5e6).unwrap();
        assert_eq!(small.channel(0), large.channel(0));
        assert_eq!(small.channel(1), large.channel(1));
    }

    #[test]
    fn fading_unit_variance() {
        // 100_000 complex entries from many independent users/seeds
        let mut sum = 0.0;
        let mut sum_re2 = 0.0;
        let mut count = 0usize;
        for user in 0..2500 {
            let g = fading_matrix(77, user, 5, 8);
            for z in g.iter() {
                sum += z.norm_sqr();
                sum_re2 += z.re * z.re;
                count += 1;
            }
        }
        assert_eq!(count, 100_000);
        let var = sum / count as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        let var_re = sum_re2 / count as f64;
        assert!((var_re - 0.5).abs() < 0.01, "real-part variance {var_re}");
    }

    #[test]
    fn mean_channel_energy_follows_pathloss() {
        let (m, n) = (4, 2);
        let d = 0.7;
        let gain = db_to_linear_gain(pathloss_db(d).unwrap());
        let draws = 4000;
        let mean: f64 = (0..draws)
            .map(|s| {
                let ch = draw_channels(s, m, n, 1, &[d], -110.0, 5e6).unwrap();
                ch.channel(0).iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            / draws as f64;
        let expected = (m * n) as f64 * gain;
        assert!((mean / expected - 1.0).abs() < 0.03, "{mean:e} vs {expected:e}");
    }

    #[test]
    fn channel_set_validation() {
        let h = ComplexMatrix::zeros(2, 3);
        assert!(ChannelSet::new(vec![], 1.0, 1.0).is_err());
        assert!(ChannelSet::new(vec![h.clone(), ComplexMatrix::zeros(3, 2)], 1.0, 1.0).is_err());
        assert!(ChannelSet::new(vec![h.clone()], 0.0, 1.0).is_err());
        assert!(ChannelSet::new(vec![h.clone()], 1.0, -1.0).is_err());
        let ch = ChannelSet::new(vec![h.clone(), h], 1.0, 1.0).unwrap();
        assert_eq!((ch.n(), ch.m(), ch.k()), (2, 3, 2));
        assert!(ch.permuted(&[1, 1]).is_err());
        assert!(ch.permuted(&[1, 0]).is_ok());
    }

    #[test]
    fn scenario_round_trip_and_errors() {
        let cfg = ScenarioConfig::reference(4, 4, 10, 1.0, 3);
        let text = cfg.to_toml();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), cfg);

        let sc = cfg.realize().unwrap();
        assert_eq!(sc.distances_km, vec![1.0; 10]);
        assert_eq!(sc.channel_set.k(), 10);

        let bad = text.replace("k = 10", "k = 0");
        assert!(matches!(ScenarioConfig::parse(&bad), Err(Error::Config(_))));
        let typo = format!("{text}\nbogus = 1\n");
        assert!(ScenarioConfig::parse(&typo).is_err());
        let err = ScenarioConfig::parse("m = 4\nn = \n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }
}
