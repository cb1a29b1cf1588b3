//! Observation types, the pseudorange forward model, and a deterministic
//! two-receiver simulator.
//!
//! A pseudorange decomposes as
//!
//! ```text
//! pr = true_range + receiver_clock_bias + satellite_common_error + noncommon_noise
//! ```
//!
//! (all in meters). The satellite-common term collects everything two nearby
//! receivers see identically for one satellite: satellite clock error,
//! ephemeris error, and atmospheric delays. The noncommon term is what
//! differencing cannot remove, and its spread is tied to signal quality by a
//! reciprocal carrier-to-noise model: `sigma(cnr) = kappa / cnr`. With the
//! default `kappa` of 300 m*dBHz, a 30 dBHz observation carries 10 m of
//! noise and a 50 dBHz observation 6 m, which puts simulated estimator
//! errors in the same few-meter regime seen on live receivers.

use crate::estimate::single_point_fix;
use crate::geo::EcefPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Milliseconds in one GPS week; epoch time tags live in `[0, GPS_WEEK_MS)`.
pub const GPS_WEEK_MS: u32 = 604_800_000;

/// Plausible pseudorange window for a GPS receiver on the ground (m).
pub const PR_PLAUSIBLE_M: (f64, f64) = (1.8e7, 3.0e7);
/// Plausible carrier-to-noise density ratio window (dBHz).
pub const CNR_PLAUSIBLE_DBHZ: (f64, f64) = (10.0, 60.0);
/// Plausible geocentric distance window for a receiver fix (m).
pub const FIX_NORM_M: (f64, f64) = (6.2e6, 6.6e6);
/// Plausible geocentric distance window for a GNSS satellite (m).
pub const SAT_NORM_M: (f64, f64) = (2.0e7, 3.0e7);

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("constellation is empty")]
    EmptyConstellation,
    #[error("duplicate PRN {0}")]
    DuplicatePrn(u8),
    #[error("PRN {0} outside 1..=32")]
    PrnOutOfRange(u8),
    #[error("satellite PRN {prn} at geocentric distance {norm_m} m is not plausible")]
    ImplausibleSatellite { prn: u8, norm_m: f64 },
    #[error("receiver position at geocentric distance {norm_m} m is not plausible")]
    ImplausibleReceiver { norm_m: f64 },
    #[error("no CNR assignment for PRN {0}")]
    MissingCnr(u8),
    #[error("CNR {cnr} dBHz for PRN {prn} outside plausible window")]
    CnrOutOfRange { prn: u8, cnr: f64 },
    #[error("CNR must be positive and finite, got {0}")]
    NonPositiveCnr(f64),
    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(&'static str),
    #[error("epoch invalid: {0}")]
    InvalidEpoch(String),
}

/// One pseudorange observation from one receiver to one satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudorangeObs {
    /// Satellite PRN, 1..=32.
    pub prn: u8,
    /// Measured pseudorange (m).
    pub pr: f64,
    /// Carrier-to-noise density ratio (dBHz).
    pub cnr: f64,
}

/// Broadcast-ephemeris-derived satellite position at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteEpochState {
    pub prn: u8,
    pub pos: EcefPoint,
}

/// Everything one receiver knows at one measurement epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverEpoch {
    /// Opaque receiver identifier.
    pub receiver_id: String,
    /// Millisecond-of-week time tag shared by all observations in the epoch.
    pub gps_time_tag: u32,
    /// The receiver's own standalone position fix.
    pub fix: EcefPoint,
    pub obs: Vec<PseudorangeObs>,
    pub sats: Vec<SatelliteEpochState>,
}

impl ReceiverEpoch {
    /// Checks the structural invariants: unique in-range PRNs, a satellite
    /// state for every observation, plausible magnitudes, and a time tag
    /// within one GPS week.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.receiver_id.is_empty() {
            return Err(ModelError::InvalidEpoch("empty receiver_id".into()));
        }
        if self.gps_time_tag >= GPS_WEEK_MS {
            return Err(ModelError::InvalidEpoch(format!(
                "time tag {} outside one GPS week",
                self.gps_time_tag
            )));
        }
        if !self.fix.is_finite() || !within(self.fix.norm(), FIX_NORM_M) {
            return Err(ModelError::ImplausibleReceiver {
                norm_m: self.fix.norm(),
            });
        }
        check_unique_prns(self.sats.iter().map(|s| s.prn))?;
        for s in &self.sats {
            if !s.pos.is_finite() || !within(s.pos.norm(), SAT_NORM_M) {
                return Err(ModelError::ImplausibleSatellite {
                    prn: s.prn,
                    norm_m: s.pos.norm(),
                });
            }
        }
        check_unique_prns(self.obs.iter().map(|o| o.prn))?;
        for o in &self.obs {
            if !o.pr.is_finite() || !within(o.pr, PR_PLAUSIBLE_M) {
                return Err(ModelError::InvalidEpoch(format!(
                    "pseudorange {} m for PRN {} not plausible",
                    o.pr, o.prn
                )));
            }
            if !o.cnr.is_finite() || !within(o.cnr, CNR_PLAUSIBLE_DBHZ) {
                return Err(ModelError::CnrOutOfRange {
                    prn: o.prn,
                    cnr: o.cnr,
                });
            }
            if self.satellite(o.prn).is_none() {
                return Err(ModelError::InvalidEpoch(format!(
                    "observation for PRN {} has no satellite state",
                    o.prn
                )));
            }
        }
        Ok(())
    }

    /// Satellite state for a PRN, if the epoch carries one.
    pub fn satellite(&self, prn: u8) -> Option<&SatelliteEpochState> {
        self.sats.iter().find(|s| s.prn == prn)
    }

    /// Observation for a PRN, if present.
    pub fn observation(&self, prn: u8) -> Option<&PseudorangeObs> {
        self.obs.iter().find(|o| o.prn == prn)
    }
}

/// Parameters of the synthetic error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Noncommon noise scale (m*dBHz): `sigma(cnr) = kappa / cnr`.
    pub kappa: f64,
    /// Standard deviation of the per-satellite common error (m).
    pub common_error_sigma: f64,
    /// Half-width of the uniform per-receiver clock bias (m).
    pub clock_bias_range: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            kappa: 300.0,
            common_error_sigma: 5.0,
            clock_bias_range: 1.0e5,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(ModelError::InvalidNoiseModel("kappa must be positive"));
        }
        if !(self.common_error_sigma.is_finite() && self.common_error_sigma >= 0.0) {
            return Err(ModelError::InvalidNoiseModel(
                "common_error_sigma must be non-negative",
            ));
        }
        if !(self.clock_bias_range.is_finite() && self.clock_bias_range >= 0.0) {
            return Err(ModelError::InvalidNoiseModel(
                "clock_bias_range must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Per-satellite CNR assignment for a simulated epoch pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnrAssignment {
    pub prn: u8,
    /// CNR observed by receiver a (dBHz).
    pub cnr_a: f64,
    /// CNR observed by receiver b (dBHz).
    pub cnr_b: f64,
}

/// Euclidean distance between two ECEF points (m).
pub fn true_range(a: &EcefPoint, b: &EcefPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Composes a pseudorange from its four components (all meters).
pub fn pseudorange_forward(
    true_range: f64,
    clock_bias: f64,
    common_error: f64,
    noncommon_error: f64,
) -> f64 {
    true_range + clock_bias + common_error + noncommon_error
}

/// Noncommon noise standard deviation for one observation: `kappa / cnr`.
pub fn cnr_sigma(cnr: f64, model: &NoiseModel) -> Result<f64, ModelError> {
    model.validate()?;
    if !(cnr.is_finite() && cnr > 0.0) {
        return Err(ModelError::NonPositiveCnr(cnr));
    }
    Ok(model.kappa / cnr)
}

/// Simulates one synchronized epoch for two receivers at known positions.
///
/// Per receiver, one clock bias is drawn uniformly from
/// `[-clock_bias_range, clock_bias_range]`. Per satellite (in constellation
/// order) a common error is drawn once and injected bit-identically into both
/// receivers' pseudoranges, then each receiver gets its own noncommon noise
/// draw with standard deviation `kappa / cnr`. The whole epoch pair is a pure
/// function of the inputs and the seed.
///
/// Each epoch's `fix` field is set to the receiver's own single-point
/// solution on its noisy observations. With fewer than four satellites (or a
/// degenerate geometry) the true position is used instead.
pub fn simulate_epoch_pair(
    constellation: &[SatelliteEpochState],
    pos_a: &EcefPoint,
    pos_b: &EcefPoint,
    cnrs: &[CnrAssignment],
    model: &NoiseModel,
    seed: u64,
) -> Result<(ReceiverEpoch, ReceiverEpoch), ModelError> {
    model.validate()?;
    if constellation.is_empty() {
        return Err(ModelError::EmptyConstellation);
    }
    check_unique_prns(constellation.iter().map(|s| s.prn))?;
    for s in constellation {
        if !s.pos.is_finite() || !within(s.pos.norm(), SAT_NORM_M) {
            return Err(ModelError::ImplausibleSatellite {
                prn: s.prn,
                norm_m: s.pos.norm(),
            });
        }
    }
    for p in [pos_a, pos_b] {
        if !p.is_finite() || !within(p.norm(), FIX_NORM_M) {
            return Err(ModelError::ImplausibleReceiver { norm_m: p.norm() });
        }
    }
    let mut assignment = Vec::with_capacity(constellation.len());
    for s in constellation {
        let c = cnrs
            .iter()
            .find(|c| c.prn == s.prn)
            .ok_or(ModelError::MissingCnr(s.prn))?;
        for cnr in [c.cnr_a, c.cnr_b] {
            if !cnr.is_finite() || !within(cnr, CNR_PLAUSIBLE_DBHZ) {
                return Err(ModelError::CnrOutOfRange { prn: s.prn, cnr });
            }
        }
        assignment.push(*c);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock_a = uniform_clock(&mut rng, model.clock_bias_range);
    let clock_b = uniform_clock(&mut rng, model.clock_bias_range);

    let mut obs_a = Vec::with_capacity(constellation.len());
    let mut obs_b = Vec::with_capacity(constellation.len());
    for (s, c) in constellation.iter().zip(&assignment) {
        let common = normal_draw(&mut rng, model.common_error_sigma);
        let eps_a = normal_draw(&mut rng, model.kappa / c.cnr_a);
        let eps_b = normal_draw(&mut rng, model.kappa / c.cnr_b);
        obs_a.push(PseudorangeObs {
            prn: s.prn,
            pr: pseudorange_forward(true_range(pos_a, &s.pos), clock_a, common, eps_a),
            cnr: c.cnr_a,
        });
        obs_b.push(PseudorangeObs {
            prn: s.prn,
            pr: pseudorange_forward(true_range(pos_b, &s.pos), clock_b, common, eps_b),
            cnr: c.cnr_b,
        });
    }

    let gps_time_tag = (seed % GPS_WEEK_MS as u64) as u32;
    let epoch = |id: &str, fix: EcefPoint, obs: Vec<PseudorangeObs>| ReceiverEpoch {
        receiver_id: id.to_string(),
        gps_time_tag,
        fix,
        obs,
        sats: constellation.to_vec(),
    };
    let fix_a = standalone_fix(&obs_a, constellation, pos_a);
    let fix_b = standalone_fix(&obs_b, constellation, pos_b);
    Ok((epoch("a", fix_a, obs_a), epoch("b", fix_b, obs_b)))
}

/// Single-point solution for simulated observations, falling back to the
/// true position when a fix is not computable.
fn standalone_fix(
    obs: &[PseudorangeObs],
    sats: &[SatelliteEpochState],
    truth: &EcefPoint,
) -> EcefPoint {
    single_point_fix(obs, sats, truth)
        .map(|fix| fix.position)
        .unwrap_or(*truth)
}

fn uniform_clock(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    if range == 0.0 {
        return 0.0;
    }
    rng.gen_range(-range..=range)
}

fn normal_draw(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    // sigma is validated positive and finite upstream
    Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

fn check_unique_prns(prns: impl Iterator<Item = u8>) -> Result<(), ModelError> {
    let mut seen = [false; 33];
    for prn in prns {
        if prn == 0 || prn > 32 {
            return Err(ModelError::PrnOutOfRange(prn));
        }
        if seen[prn as usize] {
            return Err(ModelError::DuplicatePrn(prn));
        }
        seen[prn as usize] = true;
    }
    Ok(())
}
