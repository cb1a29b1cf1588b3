//! Hand-built fixtures shared by the module tests: a plausible spread
//! constellation and exact (noise-free) epoch pairs with known geometry.

use crate::geo::{ecef_from_geodetic, EcefPoint};
use crate::measurement::{true_range, PseudorangeObs, ReceiverEpoch, SatelliteEpochState};

pub(crate) const TEST_TAG: u32 = 100_000;

pub(crate) fn base_position() -> EcefPoint {
    ecef_from_geodetic(1.3521, 103.8198, 50.0).unwrap()
}

pub(crate) fn offset_point(p: &EcefPoint, dx: f64, dy: f64, dz: f64) -> EcefPoint {
    EcefPoint::new(p.x + dx, p.y + dy, p.z + dz)
}

/// Eight satellites on the GPS shell, well spread as seen from
/// [`base_position`]. All geocentric radii sit in the plausible window and
/// all ranges from the base exceed 2e7 m.
pub(crate) fn spread_constellation() -> Vec<SatelliteEpochState> {
    let sat = |prn, x, y, z| SatelliteEpochState {
        prn,
        pos: EcefPoint::new(x, y, z),
    };
    vec![
        sat(2, 1.2e7, 2.1e7, 8.0e6),
        sat(5, -1.5e7, 1.8e7, 9.0e6),
        sat(7, 0.9e7, 1.9e7, 1.2e7),
        sat(11, 0.4e7, 2.4e7, -7.0e6),
        sat(14, -1.0e7, 2.3e7, -4.0e6),
        sat(17, -0.6e7, 2.0e7, 1.5e7),
        sat(23, 1.9e7, 1.6e7, -3.0e6),
        sat(29, -0.2e7, 2.55e7, 2.0e6),
    ]
}

/// Builds an epoch whose pseudoranges are exactly the true ranges (no clock,
/// no common error, no noise) and whose fix is the true position. `cnrs`
/// selects which PRNs are observed and at what CNR.
pub(crate) fn noiseless_epoch(
    id: &str,
    pos: &EcefPoint,
    constellation: &[SatelliteEpochState],
    cnrs: &[(u8, f64)],
) -> ReceiverEpoch {
    let obs = cnrs
        .iter()
        .map(|&(prn, cnr)| {
            let sat = constellation
                .iter()
                .find(|s| s.prn == prn)
                .unwrap_or_else(|| panic!("fixture has no PRN {prn}"));
            PseudorangeObs {
                prn,
                pr: true_range(pos, &sat.pos),
                cnr,
            }
        })
        .collect();
    ReceiverEpoch {
        receiver_id: id.to_string(),
        gps_time_tag: TEST_TAG,
        fix: *pos,
        obs,
        sats: constellation.to_vec(),
    }
}

/// Noise-free epoch pair separated by `(dx, dy, dz)` meters, every satellite
/// observed at the same CNR by both receivers.
pub(crate) fn noiseless_pair(
    dx: f64,
    dy: f64,
    dz: f64,
    cnr: f64,
) -> (ReceiverEpoch, ReceiverEpoch) {
    let constellation = spread_constellation();
    let cnrs: Vec<(u8, f64)> = constellation.iter().map(|s| (s.prn, cnr)).collect();
    let pos_a = base_position();
    let pos_b = offset_point(&pos_a, dx, dy, dz);
    (
        noiseless_epoch("a", &pos_a, &constellation, &cnrs),
        noiseless_epoch("b", &pos_b, &constellation, &cnrs),
    )
}
