//! Line-delimited JSON epoch files.
//!
//! One JSON object per line describes one receiver's epoch: identity, time
//! tag, a fix in exactly one of two forms (`fix_ecef` or `fix_geodetic`),
//! the pseudorange observations, and the satellite positions used to form
//! them. Parse failures name the offending line.

use covr_core::geo::{ecef_from_geodetic, EcefPoint};
use covr_core::measurement::{PseudorangeObs, ReceiverEpoch, SatelliteEpochState};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EpochFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObsDto {
    prn: u8,
    pr: f64,
    cnr: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SatDto {
    prn: u8,
    pos: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpochDto {
    receiver_id: String,
    t: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fix_ecef: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fix_geodetic: Option<[f64; 3]>,
    obs: Vec<ObsDto>,
    sats: Vec<SatDto>,
}

impl EpochDto {
    fn into_epoch(self) -> Result<ReceiverEpoch, String> {
        let fix = match (self.fix_ecef, self.fix_geodetic) {
            (Some([x, y, z]), None) => EcefPoint::new(x, y, z),
            (None, Some([lat, lon, alt])) => {
                ecef_from_geodetic(lat, lon, alt).map_err(|e| e.to_string())?
            }
            (Some(_), Some(_)) => {
                return Err("both fix_ecef and fix_geodetic present; provide exactly one".into())
            }
            (None, None) => {
                return Err("neither fix_ecef nor fix_geodetic present; provide exactly one".into())
            }
        };
        let epoch = ReceiverEpoch {
            receiver_id: self.receiver_id,
            gps_time_tag: self.t,
            fix,
            obs: self
                .obs
                .into_iter()
                .map(|o| PseudorangeObs {
                    prn: o.prn,
                    pr: o.pr,
                    cnr: o.cnr,
                })
                .collect(),
            sats: self
                .sats
                .into_iter()
                .map(|s| SatelliteEpochState {
                    prn: s.prn,
                    pos: EcefPoint::new(s.pos[0], s.pos[1], s.pos[2]),
                })
                .collect(),
        };
        epoch.validate().map_err(|e| e.to_string())?;
        Ok(epoch)
    }

    fn from_epoch(epoch: &ReceiverEpoch) -> Self {
        EpochDto {
            receiver_id: epoch.receiver_id.clone(),
            t: epoch.gps_time_tag,
            fix_ecef: Some([epoch.fix.x, epoch.fix.y, epoch.fix.z]),
            fix_geodetic: None,
            obs: epoch
                .obs
                .iter()
                .map(|o| ObsDto {
                    prn: o.prn,
                    pr: o.pr,
                    cnr: o.cnr,
                })
                .collect(),
            sats: epoch
                .sats
                .iter()
                .map(|s| SatDto {
                    prn: s.prn,
                    pos: [s.pos.x, s.pos.y, s.pos.z],
                })
                .collect(),
        }
    }
}

/// Reads every record in a line-delimited JSON epoch file. Blank lines are
/// allowed; anything else must parse to a valid epoch.
pub fn load_epochs(path: &Path) -> Result<Vec<ReceiverEpoch>, EpochFileError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| EpochFileError::Io {
        path: display.clone(),
        source,
    })?;
    let mut epochs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let dto: EpochDto = serde_json::from_str(line).map_err(|e| EpochFileError::Parse {
            path: display.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let epoch = dto.into_epoch().map_err(|message| EpochFileError::Parse {
            path: display.clone(),
            line: idx + 1,
            message,
        })?;
        epochs.push(epoch);
    }
    Ok(epochs)
}

/// Writes epochs as line-delimited JSON with ECEF fixes.
pub fn save_epochs(path: &Path, epochs: &[ReceiverEpoch]) -> Result<(), EpochFileError> {
    let display = path.display().to_string();
    let io_err = |source| EpochFileError::Io {
        path: display.clone(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for epoch in epochs {
        let dto = EpochDto::from_epoch(epoch);
        let json = serde_json::to_string(&dto).expect("epoch serializes");
        writeln!(out, "{json}").map_err(|source| EpochFileError::Io {
            path: display.clone(),
            source,
        })?;
    }
    out.flush().map_err(|source| EpochFileError::Io {
        path: display.clone(),
        source,
    })?;
    Ok(())
}
