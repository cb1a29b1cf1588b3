//! Receive-side pipeline: cache local epochs, match incoming broadcasts by
//! time tag, and turn each match into a distance or an explicit drop reason.
//!
//! The local receiver caches a short window of its own epochs. When a peer's
//! piggyback message arrives, the epoch with the same GPS time tag is looked
//! up and the differencing pipeline runs against it: shared-satellite
//! intersection, reference gate, then the configured solver. Every receive
//! event produces exactly one outcome, so callers can account for every
//! message they hand in.

use crate::codec::PiggybackMessage;
use crate::estimate::{
    baseline_distance, estimate_baseline, BaselineEstimate, EstimateConfig, EstimateError, Method,
    DEFAULT_CNR_MIN_DBHZ, DEFAULT_CNR_REF_DBHZ,
};
use crate::measurement::{ModelError, PseudorangeObs, ReceiverEpoch};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default number of local epochs kept for matching.
pub const DEFAULT_CACHE_CAPACITY: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ExchangeConfigError {
    #[error("on_receive cannot use GPS_FIX; a peer broadcast carries no fix")]
    FixMethodNotApplicable,
    #[error("cnr_min {0} dBHz outside the plausible 10..=60 window")]
    CnrMinOutOfRange(f64),
    #[error("cnr_ref {0} dBHz outside the plausible 10..=60 window")]
    CnrRefOutOfRange(f64),
}

/// Bounded store of the receiver's own recent epochs, keyed by time tag.
///
/// Inserting past capacity evicts the oldest (smallest) time tag; re-inserting
/// an existing tag replaces that entry.
#[derive(Debug, Clone)]
pub struct EpochCache {
    capacity: usize,
    epochs: BTreeMap<u32, ReceiverEpoch>,
}

impl EpochCache {
    /// Creates a cache holding up to `capacity` epochs (at least 1).
    pub fn new(capacity: usize) -> Self {
        EpochCache {
            capacity: capacity.max(1),
            epochs: BTreeMap::new(),
        }
    }

    /// Validates and stores a local epoch, evicting the oldest tag when full.
    pub fn put(&mut self, epoch: ReceiverEpoch) -> Result<(), ModelError> {
        epoch.validate()?;
        self.epochs.insert(epoch.gps_time_tag, epoch);
        while self.epochs.len() > self.capacity {
            let oldest = *self.epochs.keys().next().expect("cache not empty");
            self.epochs.remove(&oldest);
        }
        Ok(())
    }

    pub fn get(&self, gps_time_tag: u32) -> Option<&ReceiverEpoch> {
        self.epochs.get(&gps_time_tag)
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

impl Default for EpochCache {
    fn default() -> Self {
        EpochCache::new(DEFAULT_CACHE_CAPACITY)
    }
}

/// Why a received message produced no distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// No cached local epoch shares the message's time tag.
    TimeTagUnmatched,
    /// Fewer than four shared candidate satellites.
    InsufficientSharedSatellites,
    /// No shared satellite reaches the reference CNR at both receivers.
    ReferenceGateFailed,
    /// The solver rejected the geometry (or another numerical failure).
    SingularGeometry,
}

/// A successful ranging outcome for one received message.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub peer_id: String,
    pub gps_time_tag: u32,
    pub estimate: BaselineEstimate,
    /// Euclidean length of the estimated baseline (m).
    pub distance_m: f64,
}

/// Exactly one of these is produced per receive event.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceiveOutcome {
    Distance(DistanceResult),
    Dropped(DropReason),
}

/// Receive-side gates and solver choice.
///
/// Built through [`ExchangeConfig::new`] so an on-receive pipeline can never
/// be configured with the fix-differencing method (peer fixes are not
/// transmitted) or gates outside the plausible CNR window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeConfig {
    cnr_min: f64,
    cnr_ref: f64,
    method: Method,
}

impl ExchangeConfig {
    pub fn new(cnr_min: f64, cnr_ref: f64, method: Method) -> Result<Self, ExchangeConfigError> {
        if method == Method::GpsFix {
            return Err(ExchangeConfigError::FixMethodNotApplicable);
        }
        if !(10.0..=60.0).contains(&cnr_min) {
            return Err(ExchangeConfigError::CnrMinOutOfRange(cnr_min));
        }
        if !(10.0..=60.0).contains(&cnr_ref) {
            return Err(ExchangeConfigError::CnrRefOutOfRange(cnr_ref));
        }
        Ok(ExchangeConfig {
            cnr_min,
            cnr_ref,
            method,
        })
    }

    pub fn cnr_min(&self) -> f64 {
        self.cnr_min
    }

    pub fn cnr_ref(&self) -> f64 {
        self.cnr_ref
    }

    pub fn method(&self) -> Method {
        self.method
    }
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        ExchangeConfig {
            cnr_min: DEFAULT_CNR_MIN_DBHZ,
            cnr_ref: DEFAULT_CNR_REF_DBHZ,
            method: Method::WlsDd,
        }
    }
}

/// Handles one incoming piggyback message against the local epoch cache.
///
/// The cache is read, never modified; feeding the same message twice gives
/// the same outcome. The estimated baseline points from the local receiver to
/// the peer, and satellite positions for the peer's observations come from
/// the local ephemeris states (both ends track the same broadcast ephemeris).
pub fn on_receive(
    cache: &EpochCache,
    peer_id: &str,
    msg: &PiggybackMessage,
    cfg: &ExchangeConfig,
) -> ReceiveOutcome {
    let Some(local) = cache.get(msg.gps_time_tag()) else {
        return ReceiveOutcome::Dropped(DropReason::TimeTagUnmatched);
    };
    let peer = peer_epoch_from_message(local, peer_id, msg);
    let estimate_cfg = EstimateConfig {
        cnr_min: cfg.cnr_min,
        cnr_ref: cfg.cnr_ref,
    };
    match estimate_baseline(local, &peer, cfg.method, &estimate_cfg) {
        Ok(estimate) => {
            let distance_m = baseline_distance(&estimate.r);
            ReceiveOutcome::Distance(DistanceResult {
                peer_id: peer_id.to_string(),
                gps_time_tag: msg.gps_time_tag(),
                estimate,
                distance_m,
            })
        }
        Err(EstimateError::InsufficientSharedSatellites { .. }) => {
            ReceiveOutcome::Dropped(DropReason::InsufficientSharedSatellites)
        }
        Err(EstimateError::ReferenceGateFailed { .. }) => {
            ReceiveOutcome::Dropped(DropReason::ReferenceGateFailed)
        }
        // Anything else (rank deficiency, degenerate rays, weight breakdown)
        // means the geometry was unusable for this epoch.
        Err(_) => ReceiveOutcome::Dropped(DropReason::SingularGeometry),
    }
}

/// Reconstructs the peer's observable epoch from a broadcast. The peer's fix
/// is unknown and unused; unit vectors are anchored at the local fix.
fn peer_epoch_from_message(
    local: &ReceiverEpoch,
    peer_id: &str,
    msg: &PiggybackMessage,
) -> ReceiverEpoch {
    ReceiverEpoch {
        receiver_id: peer_id.to_string(),
        gps_time_tag: msg.gps_time_tag(),
        fix: local.fix,
        obs: msg
            .entries()
            .iter()
            .map(|e| PseudorangeObs {
                prn: e.prn,
                pr: e.pr,
                cnr: e.cnr_dbhz as f64,
            })
            .collect(),
        sats: local.sats.clone(),
    }
}
