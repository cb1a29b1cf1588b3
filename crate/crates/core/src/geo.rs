//! Earth-centered geometry for the differencing pipeline.
//!
//! Everything downstream works in ECEF coordinates. Receiver-to-satellite
//! unit vectors are the only geometric input the estimators need: with
//! receivers a few meters apart and satellites more than 20,000 km away, the
//! rays to one satellite are parallel for all practical purposes, so the unit
//! vector computed from either receiver's coarse fix serves both. A fix error
//! of tens of meters perturbs the unit vector by parts in 10^6, which is
//! negligible against meter-level pseudorange noise.

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

/// WGS-84 semi-major axis (m).
pub const WGS84_SEMI_MAJOR_AXIS_M: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_FLATTENING: f64 = 1.0 / 298.257_223_563;

/// Minimum receiver-to-satellite separation (m) below which unit vectors are
/// considered degenerate.
pub const MIN_SAT_SEPARATION_M: f64 = 1.0e6;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} deg outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} deg outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("non-finite coordinate input")]
    NonFiniteInput,
    #[error("receiver and satellite positions are {separation_m} m apart; need more than {MIN_SAT_SEPARATION_M} m")]
    DegenerateGeometry { separation_m: f64 },
    #[error("need at least {need} unit vectors, got {found}")]
    InsufficientUnitVectors { need: usize, found: usize },
    #[error("vector ({0}, {1}, {2}) is not unit length")]
    NotUnitLength(f64, f64, f64),
}

/// A point in the WGS-84 earth-centered, earth-fixed frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcefPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        EcefPoint { x, y, z }
    }

    /// Distance from the frame origin (m).
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        EcefPoint::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Direction from a receiver to a satellite, unit length in ECEF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3 {
    pub ex: f64,
    pub ey: f64,
    pub ez: f64,
}

impl UnitVector3 {
    /// Wraps components that are already unit length (within 1e-12).
    pub fn new(ex: f64, ey: f64, ez: f64) -> Result<Self, GeoError> {
        let norm = (ex * ex + ey * ey + ez * ez).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1.0e-12 {
            return Err(GeoError::NotUnitLength(ex, ey, ez));
        }
        Ok(UnitVector3 { ex, ey, ez })
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.ex, self.ey, self.ez)
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.ex * other.ex + self.ey * other.ey + self.ez * other.ez
    }
}

/// Baseline from receiver a to receiver b in ECEF (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineVector {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl BaselineVector {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        BaselineVector { rx, ry, rz }
    }

    pub fn norm(&self) -> f64 {
        (self.rx * self.rx + self.ry * self.ry + self.rz * self.rz).sqrt()
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.rx, self.ry, self.rz)
    }
}

/// Converts a geodetic position (degrees, degrees, meters above the
/// ellipsoid) to ECEF.
pub fn ecef_from_geodetic(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<EcefPoint, GeoError> {
    if !lat_deg.is_finite() || !lon_deg.is_finite() || !alt_m.is_finite() {
        return Err(GeoError::NonFiniteInput);
    }
    if !(-90.0..=90.0).contains(&lat_deg) {
        return Err(GeoError::LatitudeOutOfRange(lat_deg));
    }
    if !(-180.0..=180.0).contains(&lon_deg) {
        return Err(GeoError::LongitudeOutOfRange(lon_deg));
    }
    let lat = lat_deg.to_radians();
    let lon = lon_deg.to_radians();
    let e2 = WGS84_FLATTENING * (2.0 - WGS84_FLATTENING);
    let sin_lat = lat.sin();
    let n = WGS84_SEMI_MAJOR_AXIS_M / (1.0 - e2 * sin_lat * sin_lat).sqrt();
    Ok(EcefPoint::new(
        (n + alt_m) * lat.cos() * lon.cos(),
        (n + alt_m) * lat.cos() * lon.sin(),
        (n * (1.0 - e2) + alt_m) * sin_lat,
    ))
}

/// Unit vector pointing from a receiver position to a satellite position.
///
/// Rejects separations of 1e6 m or less; anything that close is not a GNSS
/// satellite and the parallel-ray assumption would not hold anyway.
pub fn unit_vector_to_satellite(
    receiver: &EcefPoint,
    satellite: &EcefPoint,
) -> Result<UnitVector3, GeoError> {
    if !receiver.is_finite() || !satellite.is_finite() {
        return Err(GeoError::NonFiniteInput);
    }
    let d = satellite.to_vector() - receiver.to_vector();
    let separation = d.norm();
    if separation <= MIN_SAT_SEPARATION_M {
        return Err(GeoError::DegenerateGeometry {
            separation_m: separation,
        });
    }
    Ok(UnitVector3 {
        ex: d.x / separation,
        ey: d.y / separation,
        ez: d.z / separation,
    })
}

/// Double-difference geometry matrix.
///
/// Row i is `e_i - e_0` where `e_0` is the reference satellite's unit vector
/// (first element of `units`). For n+1 input vectors the result is n x 3; each
/// row maps the baseline vector to one double-differenced range.
pub fn dd_geometry_matrix(units: &[UnitVector3]) -> Result<DMatrix<f64>, GeoError> {
    if units.len() < 2 {
        return Err(GeoError::InsufficientUnitVectors {
            need: 2,
            found: units.len(),
        });
    }
    let reference = units[0];
    let rows = units.len() - 1;
    let mut h = DMatrix::zeros(rows, 3);
    for (i, u) in units[1..].iter().enumerate() {
        h[(i, 0)] = u.ex - reference.ex;
        h[(i, 1)] = u.ey - reference.ey;
        h[(i, 2)] = u.ez - reference.ez;
    }
    Ok(h)
}

/// Single-difference geometry matrix.
///
/// Row i is `(e_i, 1)`: three direction components plus a unit column for the
/// between-receiver clock-bias difference (in meters). m input vectors give an
/// m x 4 matrix. Solving for four unknowns needs at least four rows, but the
/// matrix itself can be built from any non-empty list.
pub fn sd_geometry_matrix(units: &[UnitVector3]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(units.len(), 4);
    for (i, u) in units.iter().enumerate() {
        h[(i, 0)] = u.ex;
        h[(i, 1)] = u.ey;
        h[(i, 2)] = u.ez;
        h[(i, 3)] = 1.0;
    }
    h
}
