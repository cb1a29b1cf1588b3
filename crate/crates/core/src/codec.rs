//! Piggyback wire format for pseudorange exchange.
//!
//! Ranging data rides along on periodic safety heartbeats, so the encoding is
//! as small as it can be while staying self-describing:
//!
//! ```text
//! [gps_time_tag: u32] [sat_bitmap: u32] [pr: f64, cnr: u8] * n    (little endian)
//! ```
//!
//! Bit `i` of the bitmap set means PRN `i + 1` is present, and the `n`
//! nine-byte entries follow in ascending PRN order, so PRNs never appear on
//! the wire explicitly. Total length is `8 + 9n` bytes; a typical four
//! satellite message is 44 bytes.

use crate::estimate::filter_candidates;
use crate::measurement::ReceiverEpoch;
use thiserror::Error;

/// Fixed header length: time tag plus satellite bitmap.
pub const HEADER_LEN: usize = 8;
/// Encoded length of one satellite entry.
pub const ENTRY_LEN: usize = 9;
/// Largest PRN representable in the 32-bit satellite bitmap.
pub const MAX_SATS: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("{count} satellites cannot be represented in a 32-bit bitmap")]
    TooManySatellites { count: usize },
    #[error("PRN {0} outside 1..=32")]
    PrnOutOfRange(u8),
    #[error("duplicate PRN {0}")]
    DuplicatePrn(u8),
    #[error("pseudorange for PRN {prn} is not finite")]
    NonFinitePseudorange { prn: u8 },
    #[error("buffer of {got} bytes is shorter than the {need}-byte header")]
    Truncated { need: usize, got: usize },
    #[error("bitmap declares {declared} satellites ({expected} bytes) but buffer has {got} bytes")]
    LengthMismatch {
        declared: usize,
        expected: usize,
        got: usize,
    },
}

/// One satellite's share of a piggyback message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiggybackEntry {
    pub prn: u8,
    /// Pseudorange (m).
    pub pr: f64,
    /// CNR rounded to whole dBHz for the wire.
    pub cnr_dbhz: u8,
}

/// A decoded (or to-be-encoded) pseudorange broadcast.
///
/// Construction sorts entries by PRN and enforces the format invariants, so
/// every value of this type round-trips through the codec bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PiggybackMessage {
    gps_time_tag: u32,
    entries: Vec<PiggybackEntry>,
}

impl PiggybackMessage {
    /// Builds a message, sorting entries by ascending PRN.
    pub fn new(gps_time_tag: u32, mut entries: Vec<PiggybackEntry>) -> Result<Self, CodecError> {
        if entries.len() > MAX_SATS {
            return Err(CodecError::TooManySatellites {
                count: entries.len(),
            });
        }
        entries.sort_by_key(|e| e.prn);
        for (i, e) in entries.iter().enumerate() {
            if e.prn == 0 || e.prn as usize > MAX_SATS {
                return Err(CodecError::PrnOutOfRange(e.prn));
            }
            if i > 0 && entries[i - 1].prn == e.prn {
                return Err(CodecError::DuplicatePrn(e.prn));
            }
            if !e.pr.is_finite() {
                return Err(CodecError::NonFinitePseudorange { prn: e.prn });
            }
        }
        Ok(PiggybackMessage {
            gps_time_tag,
            entries,
        })
    }

    pub fn gps_time_tag(&self) -> u32 {
        self.gps_time_tag
    }

    pub fn entries(&self) -> &[PiggybackEntry] {
        &self.entries
    }

    /// Bitmap with bit `prn - 1` set per entry; its population count always
    /// equals the entry count.
    pub fn sat_bitmap(&self) -> u32 {
        self.entries
            .iter()
            .fold(0u32, |bm, e| bm | 1u32 << (e.prn - 1))
    }
}

/// Wire length for an n-satellite message: `8 + 9n` bytes.
pub fn encoded_length(n_sats: usize) -> Result<usize, CodecError> {
    if n_sats > MAX_SATS {
        return Err(CodecError::TooManySatellites { count: n_sats });
    }
    Ok(HEADER_LEN + ENTRY_LEN * n_sats)
}

/// Serializes a message to its wire bytes.
pub fn encode(msg: &PiggybackMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ENTRY_LEN * msg.entries.len());
    out.extend_from_slice(&msg.gps_time_tag.to_le_bytes());
    out.extend_from_slice(&msg.sat_bitmap().to_le_bytes());
    for e in &msg.entries {
        out.extend_from_slice(&e.pr.to_le_bytes());
        out.push(e.cnr_dbhz);
    }
    out
}

/// Parses wire bytes back into a message.
///
/// The buffer must be exactly `8 + 9 * popcount(bitmap)` bytes; entry PRNs
/// are recovered from the bitmap's set bits in ascending order.
pub fn decode(bytes: &[u8]) -> Result<PiggybackMessage, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            need: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let gps_time_tag = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let bitmap = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let declared = bitmap.count_ones() as usize;
    let expected = HEADER_LEN + ENTRY_LEN * declared;
    if bytes.len() != expected {
        return Err(CodecError::LengthMismatch {
            declared,
            expected,
            got: bytes.len(),
        });
    }
    let mut entries = Vec::with_capacity(declared);
    let mut offset = HEADER_LEN;
    for bit in 0..32u8 {
        if bitmap & (1 << bit) == 0 {
            continue;
        }
        let prn = bit + 1;
        let pr = f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
        if !pr.is_finite() {
            return Err(CodecError::NonFinitePseudorange { prn });
        }
        entries.push(PiggybackEntry {
            prn,
            pr,
            cnr_dbhz: bytes[offset + 8],
        });
        offset += ENTRY_LEN;
    }
    PiggybackMessage::new(gps_time_tag, entries)
}

/// Transmit-side gating: decides whether an epoch is worth broadcasting and
/// builds the message if so.
///
/// Candidates are the epoch's observations at or above `cnr_min`. Nothing is
/// sent when fewer than four candidates remain or when even the strongest
/// candidate falls below `cnr_ref`, since no peer could pass the reference
/// gate with our data. CNRs are rounded half-up to whole dBHz for the wire.
pub fn should_broadcast(
    epoch: &ReceiverEpoch,
    cnr_min: f64,
    cnr_ref: f64,
) -> Option<PiggybackMessage> {
    let candidates = filter_candidates(&epoch.obs, cnr_min);
    if candidates.len() < 4 {
        return None;
    }
    let best = candidates.iter().map(|o| o.cnr).fold(f64::MIN, f64::max);
    if best < cnr_ref {
        return None;
    }
    let entries = candidates
        .iter()
        .map(|o| PiggybackEntry {
            prn: o.prn,
            pr: o.pr,
            cnr_dbhz: o.cnr.round().min(255.0) as u8,
        })
        .collect();
    Some(PiggybackMessage::new(epoch.gps_time_tag, entries).expect("valid epoch observations"))
}
