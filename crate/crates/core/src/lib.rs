//! Cooperative vehicular ranging from differenced GPS pseudoranges.
//!
//! Two nearby receivers that track a common set of satellites can measure the
//! baseline between them far more accurately than by differencing their
//! standalone fixes. Single-differencing pseudoranges across receivers cancels
//! every satellite-common error (ephemeris, ionosphere, troposphere, satellite
//! clock); double-differencing against a reference satellite additionally
//! cancels the receiver clock-bias difference. What remains is a small linear
//! system in the baseline vector, optionally weighted by per-satellite
//! carrier-to-noise density ratios.
//!
//! The crate is organised around that pipeline:
//!
//! * [`geo`] — ECEF/geodetic conversions and geometry matrices built from
//!   receiver-to-satellite unit vectors.
//! * [`measurement`] — observation types, the pseudorange forward model, the
//!   CNR-driven noise model, and a deterministic two-receiver simulator.
//! * [`estimate`] — candidate filtering, reference selection, differencing,
//!   LS/WLS solvers, and a standalone single-point fix.
//! * [`codec`] — the compact piggyback wire format used to exchange
//!   pseudoranges over a DSRC-style broadcast channel.
//! * [`exchange`] — the receive-side cache and the message-to-distance
//!   pipeline with explicit drop accounting.

pub mod codec;
pub mod estimate;
pub mod exchange;
pub mod geo;
pub mod measurement;

#[cfg(test)]
pub(crate) mod testutil;
