//! Baseline estimation from differenced pseudoranges.
//!
//! Given two receivers' observations of the same epoch, the pipeline is:
//! filter candidates by CNR, intersect the satellite sets, pick the
//! reference satellite, form single or double differences, and solve a small
//! linear system for the baseline vector.
//!
//! Single differences across receivers cancel all satellite-common errors
//! but keep the between-receiver clock-bias difference, so the
//! single-difference solvers carry it as a fourth unknown. Double differences
//! against the reference satellite cancel the clock term too, leaving a
//! three-unknown system. Weighted variants scale each equation by
//! `(cnr_a^2 * cnr_b^2) / (cnr_a^2 + cnr_b^2)`, the inverse of the
//! differenced noise variance under the reciprocal CNR noise model, so
//! noisy satellites stop dominating the fit.

use crate::geo::{
    dd_geometry_matrix, sd_geometry_matrix, unit_vector_to_satellite, BaselineVector, EcefPoint,
    GeoError, UnitVector3,
};
use crate::measurement::{PseudorangeObs, ReceiverEpoch, SatelliteEpochState};
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Candidate gate: observations below this CNR are discarded (dBHz).
pub const DEFAULT_CNR_MIN_DBHZ: f64 = 30.0;
/// Reference gate: the best shared satellite must reach this CNR at both
/// receivers for double differencing to proceed (dBHz).
pub const DEFAULT_CNR_REF_DBHZ: f64 = 47.0;
/// Normal-matrix condition number above which geometry is treated as singular.
pub const CONDITION_LIMIT: f64 = 1.0e12;
/// Minimum shared satellites for any differenced solution.
pub const MIN_SHARED_SATELLITES: usize = 4;

const MAX_FIX_ITERATIONS: usize = 20;
const FIX_CONVERGENCE_M: f64 = 1.0e-4;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("epoch time tags differ: {a} vs {b}")]
    TimeTagMismatch { a: u32, b: u32 },
    #[error("only {found} shared candidate satellites; need {MIN_SHARED_SATELLITES}")]
    InsufficientSharedSatellites { found: usize },
    #[error("need at least {need} observations, got {found}")]
    InsufficientObservations { need: usize, found: usize },
    #[error("no shared satellite reaches the reference gate of {cnr_ref} dBHz")]
    ReferenceGateFailed { cnr_ref: f64 },
    #[error("geometry is numerically singular (condition {condition:.3e})")]
    SingularGeometry { condition: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weight {value} at index {index} is not positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("point fix did not converge after {iterations} iterations")]
    DidNotConverge { iterations: usize },
    #[error("no satellite state for PRN {0}")]
    MissingSatelliteState(u8),
    #[error(transparent)]
    Geometry(#[from] GeoError),
}

/// Baseline estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Difference of the two standalone fixes.
    GpsFix,
    /// Ordinary least squares on single differences (clock as 4th unknown).
    LsSd,
    /// Ordinary least squares on double differences.
    LsDd,
    /// CNR-weighted least squares on single differences.
    WlsSd,
    /// CNR-weighted least squares on double differences.
    WlsDd,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::GpsFix,
        Method::LsSd,
        Method::LsDd,
        Method::WlsSd,
        Method::WlsDd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::GpsFix => "GPS_FIX",
            Method::LsSd => "LS_SD",
            Method::LsDd => "LS_DD",
            Method::WlsSd => "WLS_SD",
            Method::WlsDd => "WLS_DD",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gps-fix" => Ok(Method::GpsFix),
            "ls-sd" => Ok(Method::LsSd),
            "ls-dd" => Ok(Method::LsDd),
            "wls-sd" => Ok(Method::WlsSd),
            "wls-dd" => Ok(Method::WlsDd),
            other => Err(format!(
                "unknown method '{other}' (expected gps-fix, ls-sd, ls-dd, wls-sd or wls-dd)"
            )),
        }
    }
}

/// One satellite observed by both receivers above the candidate gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedObsPair {
    pub prn: u8,
    pub pr_a: f64,
    pub pr_b: f64,
    pub cnr_a: f64,
    pub cnr_b: f64,
    /// Direction from receiver a's fix to the satellite; shared by both
    /// receivers under the parallel-ray assumption.
    pub unit: UnitVector3,
}

impl SharedObsPair {
    /// The weaker of the two CNRs, the quantity both gates act on.
    pub fn min_cnr(&self) -> f64 {
        self.cnr_a.min(self.cnr_b)
    }
}

/// Gate thresholds for the estimation pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub cnr_min: f64,
    pub cnr_ref: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            cnr_min: DEFAULT_CNR_MIN_DBHZ,
            cnr_ref: DEFAULT_CNR_REF_DBHZ,
        }
    }
}

/// A solved baseline with its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    /// Baseline vector from receiver a to receiver b (m, ECEF).
    pub r: BaselineVector,
    pub method: Method,
    /// Shared satellites that entered the solution (0 for `GpsFix`).
    pub n_sats: usize,
    /// Unweighted 2-norm of the post-fit measurement residuals (m).
    pub residual_norm: f64,
    /// Estimated between-receiver clock-bias difference (m); single
    /// difference methods only.
    pub clock_diff: Option<f64>,
}

/// Result of a least-squares baseline solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub baseline: BaselineVector,
    pub residual_norm: f64,
}

/// Result of a single-difference solve (baseline plus clock difference).
#[derive(Debug, Clone, PartialEq)]
pub struct SdSolution {
    pub baseline: BaselineVector,
    /// Estimated `t_a - t_b` in meters.
    pub clock_diff_m: f64,
    pub residual_norm: f64,
}

/// Converged standalone position solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFix {
    pub position: EcefPoint,
    /// Receiver clock bias in meters.
    pub clock_bias_m: f64,
    pub iterations: usize,
}

/// Keeps observations at or above the candidate CNR gate (inclusive).
pub fn filter_candidates(obs: &[PseudorangeObs], cnr_min: f64) -> Vec<PseudorangeObs> {
    obs.iter().filter(|o| o.cnr >= cnr_min).copied().collect()
}

/// Intersects both receivers' candidate sets, sorted by ascending PRN.
///
/// Unit vectors are anchored at receiver a's fix; satellite positions come
/// from receiver a's states. Requires matching time tags.
pub fn shared_satellites(
    a: &ReceiverEpoch,
    b: &ReceiverEpoch,
    cnr_min: f64,
) -> Result<Vec<SharedObsPair>, EstimateError> {
    if a.gps_time_tag != b.gps_time_tag {
        return Err(EstimateError::TimeTagMismatch {
            a: a.gps_time_tag,
            b: b.gps_time_tag,
        });
    }
    let mut pairs = Vec::new();
    for oa in filter_candidates(&a.obs, cnr_min) {
        let Some(ob) = b.observation(oa.prn).filter(|ob| ob.cnr >= cnr_min) else {
            continue;
        };
        let sat = a
            .satellite(oa.prn)
            .ok_or(EstimateError::MissingSatelliteState(oa.prn))?;
        let unit = unit_vector_to_satellite(&a.fix, &sat.pos)?;
        pairs.push(SharedObsPair {
            prn: oa.prn,
            pr_a: oa.pr,
            pr_b: ob.pr,
            cnr_a: oa.cnr,
            cnr_b: ob.cnr,
            unit,
        });
    }
    pairs.sort_by_key(|p| p.prn);
    Ok(pairs)
}

/// Picks the reference satellite: the pair whose weaker CNR is largest,
/// breaking ties by larger CNR sum, then smaller PRN.
///
/// Returns `None` when no pair's weaker CNR reaches `cnr_ref` (the reference
/// gate) or when `pairs` is empty.
pub fn select_reference(pairs: &[SharedObsPair], cnr_ref: f64) -> Option<u8> {
    let best = pairs.iter().max_by(|p, q| {
        p.min_cnr()
            .partial_cmp(&q.min_cnr())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                (p.cnr_a + p.cnr_b)
                    .partial_cmp(&(q.cnr_a + q.cnr_b))
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(q.prn.cmp(&p.prn))
    })?;
    (best.min_cnr() >= cnr_ref).then_some(best.prn)
}

/// Across-receiver single differences `pr_a - pr_b`, one per shared pair.
pub fn single_difference(pairs: &[SharedObsPair]) -> DVector<f64> {
    DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.pr_a - p.pr_b))
}

/// Differences every single difference against the reference entry.
///
/// The output keeps the input order with the reference element removed, so it
/// lines up with rows of [`dd_geometry_matrix`] built with the reference
/// vector first.
pub fn double_difference(
    sd: &DVector<f64>,
    ref_index: usize,
) -> Result<DVector<f64>, EstimateError> {
    if ref_index >= sd.len() {
        return Err(EstimateError::DimensionMismatch(format!(
            "reference index {ref_index} out of bounds for {} single differences",
            sd.len()
        )));
    }
    let reference = sd[ref_index];
    Ok(DVector::from_iterator(
        sd.len() - 1,
        sd.iter()
            .enumerate()
            .filter(|(i, _)| *i != ref_index)
            .map(|(_, v)| v - reference),
    ))
}

/// Diagonal weight matrix `(cnr_a^2 * cnr_b^2) / (cnr_a^2 + cnr_b^2)` per pair.
pub fn weight_matrix(pairs: &[SharedObsPair]) -> Result<DMatrix<f64>, EstimateError> {
    let mut w = DMatrix::zeros(pairs.len(), pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let a2 = p.cnr_a * p.cnr_a;
        let b2 = p.cnr_b * p.cnr_b;
        let value = a2 * b2 / (a2 + b2);
        if !(value.is_finite() && value > 0.0) {
            return Err(EstimateError::NonPositiveWeight { index: i, value });
        }
        w[(i, i)] = value;
    }
    Ok(w)
}

/// Ordinary least squares for the double-difference system `D = H r`.
pub fn solve_ls(h: &DMatrix<f64>, d: &DVector<f64>) -> Result<LsSolution, EstimateError> {
    check_system(h, d, 3)?;
    let x = solve_normal_equations(h, None, d)?;
    let residual_norm = (d - h * &x).norm();
    Ok(LsSolution {
        baseline: BaselineVector::new(x[0], x[1], x[2]),
        residual_norm,
    })
}

/// Weighted least squares `(H^T W H)^-1 H^T W D` with a positive diagonal W.
pub fn solve_wls(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<LsSolution, EstimateError> {
    check_system(h, d, 3)?;
    check_weights(w, h.nrows())?;
    let x = solve_normal_equations(h, Some(w), d)?;
    let residual_norm = (d - h * &x).norm();
    Ok(LsSolution {
        baseline: BaselineVector::new(x[0], x[1], x[2]),
        residual_norm,
    })
}

/// Single-difference solve: four unknowns (baseline and clock difference),
/// optionally CNR-weighted.
pub fn solve_sd(
    h4: &DMatrix<f64>,
    s: &DVector<f64>,
    w: Option<&DMatrix<f64>>,
) -> Result<SdSolution, EstimateError> {
    check_system(h4, s, 4)?;
    if let Some(w) = w {
        check_weights(w, h4.nrows())?;
    }
    let x = solve_normal_equations(h4, w, s)?;
    let residual_norm = (s - h4 * &x).norm();
    Ok(SdSolution {
        baseline: BaselineVector::new(x[0], x[1], x[2]),
        clock_diff_m: x[3],
        residual_norm,
    })
}

/// Standalone Gauss-Newton position and clock solution from raw pseudoranges.
///
/// Iterates until the position update falls below 0.1 mm, erroring out if the
/// update norm grows three iterations in a row or the iteration cap of 20 is
/// reached without convergence.
pub fn single_point_fix(
    obs: &[PseudorangeObs],
    sats: &[SatelliteEpochState],
    initial: &EcefPoint,
) -> Result<PointFix, EstimateError> {
    if obs.len() < 4 {
        return Err(EstimateError::InsufficientObservations {
            need: 4,
            found: obs.len(),
        });
    }
    let positions = obs
        .iter()
        .map(|o| {
            sats.iter()
                .find(|s| s.prn == o.prn)
                .map(|s| s.pos.to_vector())
                .ok_or(EstimateError::MissingSatelliteState(o.prn))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut pos = initial.to_vector();
    let mut clock = 0.0_f64;
    let mut prev_update = f64::INFINITY;
    let mut growth_streak = 0;
    for iteration in 1..=MAX_FIX_ITERATIONS {
        let mut j = DMatrix::zeros(obs.len(), 4);
        let mut v = DVector::zeros(obs.len());
        for (i, (o, sp)) in obs.iter().zip(&positions).enumerate() {
            let line = sp - &pos;
            let rho = line.norm();
            if rho < 1.0 {
                return Err(EstimateError::SingularGeometry {
                    condition: f64::INFINITY,
                });
            }
            j[(i, 0)] = -line.x / rho;
            j[(i, 1)] = -line.y / rho;
            j[(i, 2)] = -line.z / rho;
            j[(i, 3)] = 1.0;
            v[i] = o.pr - (rho + clock);
        }
        let dx = solve_normal_equations(&j, None, &v)?;
        pos.x += dx[0];
        pos.y += dx[1];
        pos.z += dx[2];
        clock += dx[3];
        let update = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
        if update < FIX_CONVERGENCE_M {
            return Ok(PointFix {
                position: EcefPoint::from_vector(&pos),
                clock_bias_m: clock,
                iterations: iteration,
            });
        }
        if update > prev_update {
            growth_streak += 1;
            if growth_streak >= 3 {
                return Err(EstimateError::DidNotConverge {
                    iterations: iteration,
                });
            }
        } else {
            growth_streak = 0;
        }
        prev_update = update;
    }
    Err(EstimateError::DidNotConverge {
        iterations: MAX_FIX_ITERATIONS,
    })
}

/// Euclidean length of a baseline vector (m).
pub fn baseline_distance(r: &BaselineVector) -> f64 {
    r.norm()
}

/// Runs the full pipeline for one epoch pair with the chosen method.
///
/// The estimated baseline points from receiver a to receiver b. Double
/// difference methods apply the reference gate; single difference methods
/// only need four shared candidates. `GpsFix` differences the two standalone
/// fixes and touches no observations.
pub fn estimate_baseline(
    a: &ReceiverEpoch,
    b: &ReceiverEpoch,
    method: Method,
    cfg: &EstimateConfig,
) -> Result<BaselineEstimate, EstimateError> {
    if a.gps_time_tag != b.gps_time_tag {
        return Err(EstimateError::TimeTagMismatch {
            a: a.gps_time_tag,
            b: b.gps_time_tag,
        });
    }
    if method == Method::GpsFix {
        let r = BaselineVector::new(b.fix.x - a.fix.x, b.fix.y - a.fix.y, b.fix.z - a.fix.z);
        return Ok(BaselineEstimate {
            r,
            method,
            n_sats: 0,
            residual_norm: 0.0,
            clock_diff: None,
        });
    }

    let shared = shared_satellites(a, b, cfg.cnr_min)?;
    if shared.len() < MIN_SHARED_SATELLITES {
        return Err(EstimateError::InsufficientSharedSatellites {
            found: shared.len(),
        });
    }
    let sd = single_difference(&shared);
    match method {
        Method::LsSd | Method::WlsSd => {
            let units: Vec<UnitVector3> = shared.iter().map(|p| p.unit).collect();
            let h4 = sd_geometry_matrix(&units);
            let w = if method == Method::WlsSd {
                Some(weight_matrix(&shared)?)
            } else {
                None
            };
            let sol = solve_sd(&h4, &sd, w.as_ref())?;
            Ok(BaselineEstimate {
                r: sol.baseline,
                method,
                n_sats: shared.len(),
                residual_norm: sol.residual_norm,
                clock_diff: Some(sol.clock_diff_m),
            })
        }
        Method::LsDd | Method::WlsDd => {
            let ref_prn = select_reference(&shared, cfg.cnr_ref).ok_or(
                EstimateError::ReferenceGateFailed {
                    cnr_ref: cfg.cnr_ref,
                },
            )?;
            let ref_index = shared
                .iter()
                .position(|p| p.prn == ref_prn)
                .expect("reference comes from the shared set");
            let mut units = Vec::with_capacity(shared.len());
            units.push(shared[ref_index].unit);
            units.extend(
                shared
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != ref_index)
                    .map(|(_, p)| p.unit),
            );
            let h = dd_geometry_matrix(&units)?;
            let d = double_difference(&sd, ref_index)?;
            let sol = if method == Method::WlsDd {
                let others: Vec<SharedObsPair> = shared
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != ref_index)
                    .map(|(_, p)| *p)
                    .collect();
                let w = weight_matrix(&others)?;
                solve_wls(&h, &w, &d)?
            } else {
                solve_ls(&h, &d)?
            };
            Ok(BaselineEstimate {
                r: sol.baseline,
                method,
                n_sats: shared.len(),
                residual_norm: sol.residual_norm,
                clock_diff: None,
            })
        }
        Method::GpsFix => unreachable!("handled above"),
    }
}

fn check_system(h: &DMatrix<f64>, d: &DVector<f64>, unknowns: usize) -> Result<(), EstimateError> {
    if h.ncols() != unknowns {
        return Err(EstimateError::DimensionMismatch(format!(
            "design matrix has {} columns, expected {unknowns}",
            h.ncols()
        )));
    }
    if h.nrows() != d.len() {
        return Err(EstimateError::DimensionMismatch(format!(
            "{} rows vs {} measurements",
            h.nrows(),
            d.len()
        )));
    }
    if h.nrows() < unknowns {
        return Err(EstimateError::InsufficientObservations {
            need: unknowns,
            found: h.nrows(),
        });
    }
    Ok(())
}

fn check_weights(w: &DMatrix<f64>, n: usize) -> Result<(), EstimateError> {
    if w.nrows() != n || w.ncols() != n {
        return Err(EstimateError::DimensionMismatch(format!(
            "weight matrix is {}x{}, expected {n}x{n}",
            w.nrows(),
            w.ncols()
        )));
    }
    for i in 0..n {
        let value = w[(i, i)];
        if !(value.is_finite() && value > 0.0) {
            return Err(EstimateError::NonPositiveWeight { index: i, value });
        }
    }
    Ok(())
}

/// Solves `(H^T W H) x = H^T W d` with a singularity check on the normal
/// matrix's condition number.
fn solve_normal_equations(
    h: &DMatrix<f64>,
    w: Option<&DMatrix<f64>>,
    d: &DVector<f64>,
) -> Result<DVector<f64>, EstimateError> {
    let ht = h.transpose();
    let (normal, rhs) = match w {
        Some(w) => (&ht * w * h, &ht * w * d),
        None => (&ht * h, &ht * d),
    };
    let singular_values = normal.clone().svd(false, false).singular_values;
    let s_max = singular_values.max();
    let s_min = singular_values.min();
    let condition = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(EstimateError::SingularGeometry { condition });
    }
    normal
        .lu()
        .solve(&rhs)
        .ok_or(EstimateError::SingularGeometry { condition })
}
