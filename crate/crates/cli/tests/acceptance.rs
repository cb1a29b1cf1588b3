//! End-to-end acceptance suite.
//!
//! Each test prints one `criterion N: PASS`/`FAIL` line and pins its own
//! tolerances and runtime budget. Scenarios are fully seeded so every run
//! checks the same frozen populations.

use std::time::{Duration, Instant};

use covr_cli::eval::{cnr_threshold_sweep, run_comparison};
use covr_cli::sim::{generate, CnrBand, ScenarioConfig};
use covr_core::codec::{
    decode, encode, encoded_length, should_broadcast, PiggybackEntry, PiggybackMessage,
};
use covr_core::estimate::{
    baseline_distance, estimate_baseline, shared_satellites, single_difference, single_point_fix,
    solve_ls, solve_wls, weight_matrix, EstimateConfig, Method, SharedObsPair,
};
use covr_core::exchange::{on_receive, DropReason, EpochCache, ExchangeConfig, ReceiveOutcome};
use covr_core::geo::{ecef_from_geodetic, EcefPoint, UnitVector3};
use covr_core::measurement::{NoiseModel, PseudorangeObs, ReceiverEpoch, SatelliteEpochState};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rooftop site all synthetic geometries hang off.
fn site() -> EcefPoint {
    ecef_from_geodetic(1.3521, 103.8198, 25.0).expect("valid site coordinates")
}

/// Local east/north/up frame at a point, for placing satellites by az/el.
fn enu_axes(at: &EcefPoint) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let up = at.to_vector().normalize();
    let east = Vector3::z().cross(&up).normalize();
    let north = up.cross(&east);
    (east, north, up)
}

/// Satellites at random az/el/range within the window, PRNs 1..=n.
fn random_sky(
    rng: &mut ChaCha8Rng,
    n: usize,
    el_lo_deg: f64,
    el_hi_deg: f64,
) -> Vec<SatelliteEpochState> {
    let origin = site();
    let (east, north, up) = enu_axes(&origin);
    (0..n)
        .map(|i| {
            let az = rng.gen_range(0.0..std::f64::consts::TAU);
            let el = rng.gen_range(el_lo_deg.to_radians()..el_hi_deg.to_radians());
            let range = rng.gen_range(2.02e7..2.25e7);
            let dir = east * (el.cos() * az.sin()) + north * (el.cos() * az.cos()) + up * el.sin();
            let pos = origin.to_vector() + dir * range;
            SatelliteEpochState {
                prn: (i + 1) as u8,
                pos: EcefPoint::from_vector(&pos),
            }
        })
        .collect()
}

/// Exact-range (noiseless) epoch for a receiver at `pos`.
fn noiseless_epoch(
    id: &str,
    tag: u32,
    pos: &EcefPoint,
    sats: &[SatelliteEpochState],
    cnr: f64,
) -> ReceiverEpoch {
    ReceiverEpoch {
        receiver_id: id.to_string(),
        gps_time_tag: tag,
        fix: *pos,
        obs: sats
            .iter()
            .map(|s| PseudorangeObs {
                prn: s.prn,
                pr: covr_core::measurement::true_range(pos, &s.pos),
                cnr,
            })
            .collect(),
        sats: sats.to_vec(),
    }
}

fn offset_point(p: &EcefPoint, dx: f64, dy: f64, dz: f64) -> EcefPoint {
    EcefPoint::new(p.x + dx, p.y + dy, p.z + dz)
}

/// Random unit direction scaled to `len`, for baseline placement.
fn random_baseline(rng: &mut ChaCha8Rng, len: f64) -> (f64, f64, f64) {
    loop {
        let v: Vector3<f64> = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 {
            let u = v / n * len;
            return (u.x, u.y, u.z);
        }
    }
}

const DIFFERENCING_METHODS: [Method; 4] =
    [Method::LsSd, Method::LsDd, Method::WlsSd, Method::WlsDd];

#[test]
fn criterion_1_noiseless_recovery_across_200_geometries() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = EstimateConfig::default();
    let mut checked = 0_usize;
    for geometry in 0..200 {
        let n = rng.gen_range(5..=10);
        let sats = random_sky(&mut rng, n, 10.0, 80.0);
        for len in [3.0, 8.0] {
            let (dx, dy, dz) = random_baseline(&mut rng, len);
            let a_pos = site();
            let b_pos = offset_point(&a_pos, dx, dy, dz);
            let a = noiseless_epoch("a", 60_000, &a_pos, &sats, 50.0);
            let b = noiseless_epoch("b", 60_000, &b_pos, &sats, 50.0);
            for method in DIFFERENCING_METHODS {
                let est = estimate_baseline(&a, &b, method, &cfg).unwrap_or_else(|e| {
                    panic!(
                        "criterion 1: FAIL — {} failed on geometry {geometry} ({n} sats, {len} m): {e}",
                        method.name()
                    )
                });
                let err =
                    ((est.r.rx - dx).powi(2) + (est.r.ry - dy).powi(2) + (est.r.rz - dz).powi(2))
                        .sqrt();
                assert!(
                    err < 1e-3,
                    "criterion 1: FAIL — {} missed the {len} m baseline by {err:.2e} m on geometry {geometry}",
                    method.name()
                );
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(5),
        "criterion 1: FAIL — took {elapsed:?}, budget is 5 s"
    );
    println!(
        "criterion 1: PASS — {checked} noiseless solves across 200 geometries within 1e-3 m in {elapsed:?}"
    );
}

#[test]
fn criterion_2_clock_and_common_error_cancellation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cfg = EstimateConfig::default();
    for trial in 0..1000 {
        let sats = random_sky(&mut rng, 8, 10.0, 80.0);
        let (dx, dy, dz) = random_baseline(&mut rng, 3.0);
        let a_pos = site();
        let b_pos = offset_point(&a_pos, dx, dy, dz);
        let a = noiseless_epoch("a", 60_000, &a_pos, &sats, 50.0);
        let b = noiseless_epoch("b", 60_000, &b_pos, &sats, 50.0);

        // Whole-meter offsets keep every shifted pseudorange exactly
        // representable (pr < 2^25 m, so adding an integer <= 1e5 never
        // rounds), making the cancellation claims exact rather than
        // approximate; see the test module docs for the tolerance story.
        let clock_a = rng.gen_range(0..=100_000) as f64;
        let clock_b = rng.gen_range(0..=100_000) as f64;
        let mut a_clock = a.clone();
        let mut b_clock = b.clone();
        for o in &mut a_clock.obs {
            o.pr += clock_a;
        }
        for o in &mut b_clock.obs {
            o.pr += clock_b;
        }
        for method in [Method::LsDd, Method::WlsDd] {
            let clean = estimate_baseline(&a, &b, method, &cfg).expect("noiseless DD solves");
            let biased = estimate_baseline(&a_clock, &b_clock, method, &cfg)
                .expect("clock-biased DD solves");
            let shift = ((clean.r.rx - biased.r.rx).powi(2)
                + (clean.r.ry - biased.r.ry).powi(2)
                + (clean.r.rz - biased.r.rz).powi(2))
            .sqrt();
            assert!(
                shift < 1e-9,
                "criterion 2: FAIL — trial {trial}: receiver clock offsets moved {} by {shift:.2e} m",
                method.name()
            );
        }

        let mut a_common = a.clone();
        let mut b_common = b.clone();
        for (oa, ob) in a_common.obs.iter_mut().zip(b_common.obs.iter_mut()) {
            let common = rng.gen_range(0..=50_000) as f64;
            oa.pr += common;
            ob.pr += common;
        }
        let shared_clean = shared_satellites(&a, &b, cfg.cnr_min).expect("shared set");
        let shared_biased =
            shared_satellites(&a_common, &b_common, cfg.cnr_min).expect("shared set");
        let sd_clean = single_difference(&shared_clean);
        let sd_biased = single_difference(&shared_biased);
        assert_eq!(
            sd_clean, sd_biased,
            "criterion 2: FAIL — trial {trial}: satellite-common errors leaked into the single differences"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(5),
        "criterion 2: FAIL — took {elapsed:?}, budget is 5 s"
    );
    println!(
        "criterion 2: PASS — 1000 trials: clock offsets moved DD < 1e-9 m, common errors left SD vectors bit-identical in {elapsed:?}"
    );
}

#[test]
fn criterion_3_uniform_weights_reduce_to_ls_and_weight_formula_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for system in 0..20 {
        let m = rng.gen_range(4..=10);
        let h = DMatrix::from_fn(m, 3, |_, _| rng.gen_range(-1.0..1.0));
        let d = DVector::from_fn(m, |_, _| rng.gen_range(-100.0..100.0));
        let ls = match solve_ls(&h, &d) {
            Ok(s) => s,
            Err(_) => continue, // skip the rare ill-conditioned draw
        };
        let ls_norm = ls.baseline.norm().max(1.0);
        for c in [1e-6, 1.0, 1e6] {
            let w = DMatrix::identity(m, m) * c;
            let wls = solve_wls(&h, &w, &d).expect("uniformly weighted solve");
            let diff = ((ls.baseline.rx - wls.baseline.rx).powi(2)
                + (ls.baseline.ry - wls.baseline.ry).powi(2)
                + (ls.baseline.rz - wls.baseline.rz).powi(2))
            .sqrt();
            assert!(
                diff / ls_norm < 1e-9,
                "criterion 3: FAIL — W = {c}·I moved system {system} by {diff:.2e} m (relative {:.2e})",
                diff / ls_norm
            );
        }
    }

    let unit = UnitVector3::new(0.0, 0.0, 1.0).expect("unit vector");
    for _ in 0..100 {
        let cnr_a = rng.gen_range(10.0..60.0);
        let cnr_b = rng.gen_range(10.0..60.0);
        let pair = SharedObsPair {
            prn: 1,
            pr_a: 2.1e7,
            pr_b: 2.1e7,
            cnr_a,
            cnr_b,
            unit,
        };
        let w = weight_matrix(std::slice::from_ref(&pair)).expect("positive weight");
        let expected = (cnr_a * cnr_a * cnr_b * cnr_b) / (cnr_a * cnr_a + cnr_b * cnr_b);
        let rel = (w[(0, 0)] - expected).abs() / expected;
        assert!(
            rel < 1e-12,
            "criterion 3: FAIL — weight({cnr_a:.2}, {cnr_b:.2}) = {} but direct substitution gives {expected}",
            w[(0, 0)]
        );
    }
    println!("criterion 3: PASS — uniform W matches LS within 1e-9 relative; weight formula verified on 100 CNR pairs");
}

#[test]
fn criterion_4_method_ordering_on_the_frozen_scenario() {
    let start = Instant::now();
    let scenario = ScenarioConfig {
        n_epochs: 1000,
        baseline: (3.0, 0.0, 0.0),
        master_seed: 4,
        noise: NoiseModel {
            kappa: 300.0,
            common_error_sigma: 25.0,
            clock_bias_range: 1.0e5,
        },
        bands: vec![CnrBand::new(6, 30.0, 50.0)],
        symmetric_cnr: true,
        visibility_loss: 0.04,
        elevation_deg: (10.0, 85.0),
        start_tag: 60_000,
        tag_step_ms: 1_000,
    };
    let pairs = generate(&scenario).expect("scenario generates");
    let report = run_comparison(&pairs, 3.0, &EstimateConfig::default()).expect("comparison runs");
    let mean = |m: Method| {
        report.stats_for(m).mean_abs_error_m.unwrap_or_else(|| {
            panic!(
                "criterion 4: FAIL — {} produced no eligible samples",
                m.name()
            )
        })
    };
    let gps = mean(Method::GpsFix);
    let lsd = mean(Method::LsSd);
    let ldd = mean(Method::LsDd);
    let wsd = mean(Method::WlsSd);
    let wdd = mean(Method::WlsDd);
    let n = report.valid_samples();
    println!(
        "criterion 4: measured mean |distance error| over {n} eligible pairs (m): \
         GPS_FIX {gps:.3}, LS_SD {lsd:.3}, LS_DD {ldd:.3}, WLS_SD {wsd:.3}, WLS_DD {wdd:.3}"
    );
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "criterion 4: FAIL — took {elapsed:?}, budget is 60 s"
    );
    assert!(
        gps > lsd,
        "criterion 4: FAIL — fix differencing ({gps:.3} m) should be worse than LS on single differences ({lsd:.3} m)"
    );
    assert!(
        wsd <= 1.05 * ldd,
        "criterion 4: FAIL — WLS on single differences ({wsd:.3} m) exceeds LS on double differences ({ldd:.3} m) by more than 5%"
    );
    assert!(
        wdd <= 1.05 * wsd,
        "criterion 4: FAIL — WLS on double differences ({wdd:.3} m) exceeds WLS on single differences ({wsd:.3} m) by more than 5%"
    );
    // Known to fail under this noise model: differencing against a reference
    // satellite re-injects that satellite's own code noise into every row,
    // and with Gaussian noise scaled by kappa/CNR on a [30, 50] dBHz
    // population the cleanest possible reference is only (50/30)^2 ≈ 2.8x
    // quieter in variance than the average row — far short of what the
    // re-injection costs. Joint clock estimation (the SD solve) is then the
    // better linear estimator for every geometry we could construct, so the
    // double-difference mean error lands at or slightly above the
    // single-difference one instead of below it. The assert stays because
    // the ordering is the documented expectation; the measured values above
    // record the actual behavior.
    assert!(
        lsd > ldd,
        "criterion 4: FAIL — LS on single differences ({lsd:.3} m) is not worse than LS on double differences ({ldd:.3} m); \
         with CNR-proportional Gaussian noise the reference re-injection outweighs the clock-elimination gain"
    );
    println!("criterion 4: PASS — GPS_FIX > LS_SD > LS_DD, WLS_SD within 5% of LS_DD, WLS_DD within 5% of WLS_SD in {elapsed:?}");
}

#[test]
fn criterion_5_threshold_sweep_counts_and_error_trend() {
    let start = Instant::now();
    // Three sub-populations with disjoint tag ranges: strong-sky epochs that
    // survive every threshold, degraded epochs that only pass the lowest one,
    // and a mid band that drops out at 44 dBHz. Raising the threshold
    // deselects the noisier epochs, which is exactly the field effect the
    // sweep is meant to show.
    let mut pairs = Vec::new();
    for (epochs, seed, band, start_tag) in [
        (500, 21, CnrBand::new(8, 48.0, 58.0), 60_000_u32),
        (300, 22, CnrBand::new(8, 30.0, 34.0), 2_000_000),
        (200, 23, CnrBand::new(8, 40.0, 43.0), 4_000_000),
    ] {
        let scenario = ScenarioConfig {
            n_epochs: epochs,
            baseline: (3.0, 0.0, 0.0),
            master_seed: seed,
            noise: NoiseModel::default(),
            bands: vec![band],
            symmetric_cnr: true,
            visibility_loss: 0.0,
            elevation_deg: (15.0, 85.0),
            start_tag,
            tag_step_ms: 1_000,
        };
        pairs.extend(generate(&scenario).expect("scenario generates"));
    }

    let rows =
        cnr_threshold_sweep(&pairs, &[30.0, 35.0, 40.0, 44.0, 47.0], 3.0).expect("sweep runs");
    for pair in rows.windows(2) {
        assert!(
            pair[1].valid_samples <= pair[0].valid_samples,
            "criterion 5: FAIL — valid samples rose from {} to {} between {} and {} dBHz",
            pair[0].valid_samples,
            pair[1].valid_samples,
            pair[0].threshold_dbhz,
            pair[1].threshold_dbhz
        );
    }
    let counts: Vec<usize> = rows.iter().map(|r| r.valid_samples).collect();

    let trend = cnr_threshold_sweep(&pairs, &[30.0, 45.0], 3.0).expect("sweep runs");
    let (low, high) = (&trend[0], &trend[1]);
    assert!(
        low.valid_samples >= 100 && high.valid_samples >= 100,
        "criterion 5: FAIL — need at least 100 samples on both sides, got {} at 30 dBHz and {} at 45 dBHz",
        low.valid_samples,
        high.valid_samples
    );
    let err_low = low.mean_abs_error_m.expect("samples at 30 dBHz");
    let err_high = high.mean_abs_error_m.expect("samples at 45 dBHz");
    assert!(
        err_high < err_low,
        "criterion 5: FAIL — mean error at 45 dBHz ({err_high:.3} m) is not below the 30 dBHz one ({err_low:.3} m)"
    );
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "criterion 5: FAIL — took {elapsed:?}, budget is 60 s"
    );
    println!(
        "criterion 5: PASS — counts {counts:?} non-increasing; mean error {err_high:.3} m at 45 dBHz < {err_low:.3} m at 30 dBHz ({} and {} samples) in {elapsed:?}",
        high.valid_samples, low.valid_samples
    );
}

#[test]
fn criterion_6_codec_roundtrips_golden_fixture_and_rejections() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for trial in 0..10_000 {
        let n = rng.gen_range(1..=32);
        let mut prns: Vec<u8> = (1..=32).collect();
        for i in (1..prns.len()).rev() {
            prns.swap(i, rng.gen_range(0..=i));
        }
        let mut entries: Vec<PiggybackEntry> = prns[..n]
            .iter()
            .map(|&prn| PiggybackEntry {
                prn,
                pr: rng.gen_range(1.9e7..2.6e7),
                cnr_dbhz: rng.gen_range(10..=60),
            })
            .collect();
        entries.sort_by_key(|e| e.prn);
        let msg =
            PiggybackMessage::new(rng.gen_range(0..604_800_000), entries).expect("valid message");
        let bytes = encode(&msg);
        assert_eq!(
            bytes.len(),
            encoded_length(n).expect("valid count"),
            "criterion 6: FAIL — trial {trial}: encoded length mismatch for {n} entries"
        );
        let back = decode(&bytes).expect("well-formed bytes decode");
        assert_eq!(
            msg, back,
            "criterion 6: FAIL — trial {trial}: roundtrip altered the message"
        );
    }
    assert_eq!(
        encoded_length(4).expect("valid count"),
        44,
        "criterion 6: FAIL — four-entry messages must encode to 44 bytes"
    );

    let hex: String = include_str!("../../core/tests/golden/piggyback_4sat.hex")
        .split_whitespace()
        .collect();
    let bytes: Vec<u8> = (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).expect("golden fixture is valid hex"))
        .collect();
    let golden = decode(&bytes).expect("golden fixture decodes");
    assert_eq!(golden.gps_time_tag(), 0x1234_5678);
    assert_eq!(golden.sat_bitmap(), 0x0101_0101);
    let expected = [
        (1_u8, 20_123_456.75_f64, 47_u8),
        (9, 21_987_654.5, 35),
        (17, 22_345_678.125, 52),
        (25, 23_456_789.0, 30),
    ];
    for (entry, (prn, pr, cnr)) in golden.entries().iter().zip(expected) {
        assert_eq!(
            (entry.prn, entry.pr, entry.cnr_dbhz),
            (prn, pr, cnr),
            "criterion 6: FAIL — golden fixture entry for PRN {prn} decoded wrong"
        );
    }

    // A header-only message (empty bitmap, 8 bytes) is valid wire data;
    // every other length inconsistent with the bitmap must be rejected.
    let empty = decode(&[0_u8; 8]).expect("header-only buffer decodes");
    assert!(empty.entries().is_empty());
    for bad_len in [0_usize, 7, 12, 43, 45, 100] {
        let buf = vec![0_u8; bad_len];
        assert!(
            decode(&buf).is_err(),
            "criterion 6: FAIL — {bad_len}-byte buffer must be rejected"
        );
    }
    let mut mismatched = bytes.clone();
    mismatched[4] |= 0x02; // bitmap claims a fifth satellite the payload lacks
    assert!(
        decode(&mismatched).is_err(),
        "criterion 6: FAIL — bitmap/payload mismatch must be rejected"
    );
    println!("criterion 6: PASS — 10000 roundtrips bit-exact, encoded_length(4) = 44, golden fixture verified, malformed buffers rejected");
}

/// Straight-line restatement of the receive-side gating rules, kept
/// deliberately independent of the library's pipeline.
fn oracle_outcome(
    cached: Option<&ReceiverEpoch>,
    msg: &PiggybackMessage,
    cnr_min: f64,
    cnr_ref: f64,
) -> Option<DropReason> {
    let local = match cached {
        None => return Some(DropReason::TimeTagUnmatched),
        Some(local) => local,
    };
    let mut shared: Vec<(u8, f64, f64, f64)> = Vec::new(); // (prn, min, sum, ...)
    for entry in msg.entries() {
        let peer_cnr = entry.cnr_dbhz as f64;
        if peer_cnr < cnr_min {
            continue;
        }
        let Some(local_obs) = local.obs.iter().find(|o| o.prn == entry.prn) else {
            continue;
        };
        if local_obs.cnr < cnr_min {
            continue;
        }
        let min = local_obs.cnr.min(peer_cnr);
        let sum = local_obs.cnr + peer_cnr;
        shared.push((entry.prn, min, sum, peer_cnr));
    }
    if shared.len() < 4 {
        return Some(DropReason::InsufficientSharedSatellites);
    }
    let best = shared
        .iter()
        .cloned()
        .reduce(|p, q| {
            // Higher min CNR wins; ties fall to the larger sum, then the
            // smaller PRN.
            if q.1 > p.1 || (q.1 == p.1 && (q.2 > p.2 || (q.2 == p.2 && q.0 < p.0))) {
                q
            } else {
                p
            }
        })
        .expect("nonempty");
    if best.1 < cnr_ref {
        return Some(DropReason::ReferenceGateFailed);
    }
    None
}

#[test]
fn criterion_7_exchange_pipeline_matches_the_gating_oracle() {
    let scenario = ScenarioConfig {
        n_epochs: 500,
        baseline: (3.0, 0.0, 0.0),
        master_seed: 7,
        noise: NoiseModel::default(),
        bands: vec![CnrBand::new(6, 30.0, 52.0)],
        symmetric_cnr: false,
        visibility_loss: 0.15,
        elevation_deg: (10.0, 85.0),
        start_tag: 60_000,
        tag_step_ms: 1_000,
    };
    let pairs = generate(&scenario).expect("scenario generates");
    let cfg = ExchangeConfig::new(30.0, 47.0, Method::WlsDd).expect("valid receive config");
    let mut cache = EpochCache::new(8);
    let mut outcomes = [0_usize; 4]; // distance, unmatched, too-few, ref-gate
    for (i, (local, peer)) in pairs.iter().enumerate() {
        let skip_cache = i % 13 == 0;
        if !skip_cache {
            cache.put(local.clone()).expect("epoch caches");
        }
        // Transmit gates are left wide open so every epoch produces a
        // message and the receive-side gates decide the outcome alone.
        let msg = should_broadcast(peer, 10.0, 10.0).expect("peer always broadcasts");
        let msg = decode(&encode(&msg)).expect("wire roundtrip");
        let cached = if skip_cache { None } else { Some(local) };
        let expected = oracle_outcome(cached, &msg, cfg.cnr_min(), cfg.cnr_ref());
        match (on_receive(&cache, "peer", &msg, &cfg), expected) {
            (ReceiveOutcome::Distance(result), None) => {
                assert_eq!(result.gps_time_tag, local.gps_time_tag);
                assert!(
                    result.distance_m.is_finite() && result.distance_m >= 0.0,
                    "criterion 7: FAIL — epoch {i} produced a non-physical distance"
                );
                assert_eq!(
                    result.distance_m,
                    baseline_distance(&result.estimate.r),
                    "criterion 7: FAIL — epoch {i}: reported distance disagrees with its own estimate"
                );
                outcomes[0] += 1;
            }
            (ReceiveOutcome::Dropped(reason), Some(expected_reason)) => {
                assert_eq!(
                    reason, expected_reason,
                    "criterion 7: FAIL — epoch {i} dropped for {reason:?} but the gating rules say {expected_reason:?}"
                );
                outcomes[match reason {
                    DropReason::TimeTagUnmatched => 1,
                    DropReason::InsufficientSharedSatellites => 2,
                    DropReason::ReferenceGateFailed => 3,
                    DropReason::SingularGeometry => 0,
                }] += 1;
            }
            (got, expected) => panic!(
                "criterion 7: FAIL — epoch {i}: pipeline said {got:?} but the gating rules say {expected:?}"
            ),
        }
    }
    assert!(
        outcomes.iter().all(|&c| c > 0),
        "criterion 7: FAIL — scenario never exercised every outcome \
         (distance/unmatched/too-few-shared/reference-gate = {outcomes:?})"
    );
    println!(
        "criterion 7: PASS — 500 epochs matched the gating oracle exactly \
         (distance {}, unmatched tag {}, too few shared {}, reference gate {})",
        outcomes[0], outcomes[1], outcomes[2], outcomes[3]
    );
}

#[test]
fn criterion_8_single_point_fix_converges_fast() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for geometry in 0..100 {
        let sats = random_sky(&mut rng, 6, 10.0, 80.0);
        let truth = offset_point(
            &site(),
            rng.gen_range(-1e4..1e4),
            rng.gen_range(-1e4..1e4),
            rng.gen_range(-1e4..1e4),
        );
        let clock = rng.gen_range(-1e3..1e3);
        let obs: Vec<PseudorangeObs> = sats
            .iter()
            .map(|s| PseudorangeObs {
                prn: s.prn,
                pr: covr_core::measurement::true_range(&truth, &s.pos) + clock,
                cnr: 50.0,
            })
            .collect();
        let fix = single_point_fix(&obs, &sats, &site()).unwrap_or_else(|e| {
            panic!("criterion 8: FAIL — geometry {geometry} did not converge: {e}")
        });
        let err = ((fix.position.x - truth.x).powi(2)
            + (fix.position.y - truth.y).powi(2)
            + (fix.position.z - truth.z).powi(2))
        .sqrt();
        assert!(
            err < 1e-3,
            "criterion 8: FAIL — geometry {geometry} converged {err:.2e} m from truth"
        );
        assert!(
            fix.iterations <= 10,
            "criterion 8: FAIL — geometry {geometry} needed {} iterations",
            fix.iterations
        );
        assert!(
            (fix.clock_bias_m - clock).abs() < 1e-3,
            "criterion 8: FAIL — geometry {geometry} misestimated the clock bias by {:.2e} m",
            (fix.clock_bias_m - clock).abs()
        );
    }
    println!("criterion 8: PASS — 100 noiseless 6-satellite fixes converged within 1e-3 m in at most 10 iterations");
}
