//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::{Duration, Instant};

use cpcl_core::channel::{apply_channel, apply_channel_with, ChannelOptions, NoiseLevel};
use cpcl_core::detection::{cfar_detect, CfarConfig};
use cpcl_core::dft::Window;
use cpcl_core::geometry::{
    enumerate_paths, total_range, BistaticPair, GainModel, Node, NodeKind, Path, PathKind, Scene, Vec2,
};
use cpcl_core::grid::{build_grid, interleaved_three_user, user_subgrid, Numerology, UserAllocation};
use cpcl_core::localization::{fuse_position, BistaticMeasurement, LocalizationError, PositionEstimate};
use cpcl_core::matrix::Matrix;
use cpcl_core::receiver::{
    delay_transform, doppler_transform, estimate_channel, interpolated_delay_response,
    interpolated_doppler_response, process_estimate, scattering_map, ChannelEstimate, ImpulseResponse,
};
use cpcl_core::scenario::{load_scenario, run, run_scenario};
use cpcl_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenario_path(name: &str) -> PathBuf {
    FsPath::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let t = elapsed.as_secs_f64();
    if t < limit_s {
        Ok(format!("{detail}, {t:.2} s"))
    } else {
        Err(format!("{detail}, took {t:.2} s (limit {limit_s} s)"))
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn fig4_analog() -> Outcome {
    let start = Instant::now();
    let scenario = load_scenario(&scenario_path("fig4_analog")).map_err(|e| e.to_string())?;
    let report = run(&scenario).map_err(|e| e.to_string())?;
    check(report.pairs.len() == 2, || "expected two receivers".into())?;
    let mut hits = Vec::new();
    let mut worst_bump = f64::NEG_INFINITY;
    for out in &report.pairs {
        let id = &out.pair.id;
        let truth = out
            .paths
            .iter()
            .find(|p| p.kind == PathKind::Target)
            .ok_or("scenario has no target")?;
        let delay_bin = out.map.delay_bin_s;
        let doppler_bin = out.map.doppler_bin_hz;

        // hidden in the slow-time averaged profile
        let profile = &out.delay_profile;
        let tb = (truth.delay_s / delay_bin).round() as usize;
        let mut around: Vec<f64> = profile[tb - 16..=tb + 16].to_vec();
        around.sort_by(f64::total_cmp);
        let floor = around[around.len() / 2];
        for i in tb - 2..=tb + 2 {
            if profile[i] >= profile[i - 1] && profile[i] >= profile[i + 1] {
                let bump = db(profile[i] / floor);
                worst_bump = worst_bump.max(bump);
                check(bump <= 3.0, || format!("{id}: profile peak {bump:.2} dB above floor at bin {i}"))?;
            }
        }

        // visible in the scattering map
        check(out.detections.len() == 1, || {
            format!("{id}: {} detections, expected 1", out.detections.len())
        })?;
        let det = &out.detections[0];
        let dt = (det.refined_delay_s - truth.delay_s) / delay_bin;
        let df = (det.refined_doppler_hz - truth.doppler_hz) / doppler_bin;
        check(dt.abs() <= 0.5 && df.abs() <= 0.5, || {
            format!("{id}: detection off by ({dt:.2}, {df:.2}) bins")
        })?;
        hits.push((det.clone(), truth.clone()));
    }
    let (a, ta) = &hits[0];
    let (b, tb) = &hits[1];
    check(a.delay_bin != b.delay_bin && a.doppler_bin != b.doppler_bin, || {
        "receivers report the same delay or Doppler bin".into()
    })?;
    let same_order = |x: f64, y: f64| (x - y).signum();
    check(
        same_order(a.refined_delay_s, b.refined_delay_s) == same_order(ta.delay_s, tb.delay_s)
            && same_order(a.refined_doppler_hz, b.refined_doppler_hz) == same_order(ta.doppler_hz, tb.doppler_hz),
        || "receiver ordering disagrees with geometry".into(),
    )?;
    within(
        start.elapsed(),
        30.0,
        format!(
            "profile bump <= {worst_bump:.2} dB; rx1 ({}, {}) rx2 ({}, {})",
            a.delay_bin, a.doppler_bin, b.delay_bin, b.doppler_bin
        ),
    )
}

fn sinc2(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let y = PI * x;
        (y.sin() / y).powi(2)
    }
}

/// Peak sidelobe (dB) and first-null positions (bins) of a cut whose main
/// lobe peaks at `peak`.
fn cut_metrics(cut: &[f64], peak: usize, os: usize) -> Result<(f64, f64, f64, f64), String> {
    let top = cut[peak];
    let mut left = peak;
    while left > 0 && cut[left - 1] < cut[left] {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < cut.len() && cut[right + 1] < cut[right] {
        right += 1;
    }
    let sidelobe = cut
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < left || *i > right)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    let shape_err = cut
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(peak) <= 4 * os)
        .map(|(i, v)| (v / top - sinc2((i as f64 - peak as f64) / os as f64)).abs())
        .fold(0.0, f64::max);
    let nulls = (
        (left as f64 - peak as f64) / os as f64,
        (right as f64 - peak as f64) / os as f64,
    );
    Ok((db(sidelobe / top), nulls.0, nulls.1, shape_err))
}

fn sinc_ambiguity() -> Outcome {
    let start = Instant::now();
    let n = Numerology {
        subcarrier_spacing_hz: 78125.0,
        num_carriers: 256,
        symbols_per_frame: 256,
        cp_fraction: 0.25,
        carrier_frequency_hz: 5.9e9,
        ..Numerology::default()
    };
    let os = 64;
    let (k, j) = (20usize, 7isize);
    let path = Path::new(
        k as f64 * n.delay_bin_width(),
        j as f64 * n.doppler_bin_width(n.symbols_per_frame),
        Complex64::new(1.0, 0.0),
    );
    let grid = build_grid(&n, &[UserAllocation::full(1, &n)], 1).map_err(|e| e.to_string())?;
    let frame = apply_channel(&grid, &[path], None, 0).map_err(|e| e.to_string())?;
    let est = estimate_channel(&frame, &grid, None).map_err(|e| e.to_string())?;

    let delay_cut = interpolated_delay_response(&est, 0, Window::Rectangular, os);
    let cir = delay_transform(&est, Window::Rectangular).map_err(|e| e.to_string())?;
    let doppler_cut = interpolated_doppler_response(&cir, k, Window::Rectangular, os);
    let doppler_peak = ((n.symbols_per_frame as isize / 2 + j) as usize) * os;

    let mut details = Vec::new();
    for (name, cut, peak) in [("delay", &delay_cut, k * os), ("Doppler", &doppler_cut, doppler_peak)] {
        let argmax = (0..cut.len()).max_by(|&a, &b| cut[a].total_cmp(&cut[b])).unwrap();
        check(argmax == peak, || format!("{name} cut peaks at {argmax}, expected {peak}"))?;
        let (psl, l, r, shape) = cut_metrics(cut, peak, os)?;
        check((psl + 13.26).abs() <= 0.1, || format!("{name} peak sidelobe {psl:.3} dB"))?;
        let step = 1.0 / os as f64;
        check((l + 1.0).abs() <= step && (r - 1.0).abs() <= step, || {
            format!("{name} first nulls at {l:.3}, {r:.3} bins")
        })?;
        check(shape < 0.01, || format!("{name} cut departs from sinc^2 by {shape:.4}"))?;
        details.push(format!("{name} PSL {psl:.3} dB nulls {l:+.3}/{r:+.3}"));
    }
    within(start.elapsed(), 5.0, details.join("; "))
}

fn integration_gain() -> Outcome {
    let start = Instant::now();
    let n = Numerology {
        subcarrier_spacing_hz: 78125.0,
        num_carriers: 64,
        symbols_per_frame: 128,
        cp_fraction: 0.25,
        carrier_frequency_hz: 5.9e9,
        ..Numerology::default()
    };
    let short = 64;
    let long = 128;
    // 4 bins at 64 symbols, 8 bins at 128
    let path = Path::new(
        9.0 * n.delay_bin_width(),
        4.0 * n.doppler_bin_width(short),
        Complex64::from_polar(0.3, 0.4),
    );
    let grid = build_grid(&n, &[UserAllocation::full(1, &n)], 5).map_err(|e| e.to_string())?;
    let snr = |est: &ChannelEstimate| -> Result<f64, String> {
        let map = process_estimate(est, Window::Rectangular, Window::Rectangular).map_err(|e| e.to_string())?;
        let (r, c, peak) = map.peak();
        let noise: f64 = map
            .power
            .indexed_iter()
            .filter(|&(i, j, _)| (i, j) != (r, c))
            .map(|(_, _, v)| *v)
            .sum::<f64>()
            / (map.power.as_slice().len() - 1) as f64;
        Ok(db(peak / noise))
    };
    let seeds = 20;
    let mut gains = Vec::new();
    for seed in 0..seeds {
        let opts = ChannelOptions {
            noise: NoiseLevel::Power(1.0),
            seed: 1000 + seed,
            ..ChannelOptions::default()
        };
        let frame = apply_channel_with(&grid, std::slice::from_ref(&path), &opts).map_err(|e| e.to_string())?;
        let est = estimate_channel(&frame, &grid, None).map_err(|e| e.to_string())?;
        let a = snr(&est.leading_symbols(short).map_err(|e| e.to_string())?)?;
        let b = snr(&est.leading_symbols(long).map_err(|e| e.to_string())?)?;
        gains.push(b - a);
    }
    let mean = gains.iter().sum::<f64>() / seeds as f64;
    check((mean - 3.0).abs() <= 0.3, || format!("mean gain {mean:.3} dB"))?;
    within(start.elapsed(), 60.0, format!("mean gain {mean:.3} dB over {seeds} seeds"))
}

fn random_estimate(m: usize, d: usize, rng: &mut ChaCha8Rng) -> ChannelEstimate {
    let numerology = Numerology {
        num_carriers: m,
        symbols_per_frame: d,
        ..Numerology::default()
    };
    let h = Matrix::from_fn(m, d, |_, _| {
        Complex64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
    });
    ChannelEstimate {
        h,
        valid: Matrix::filled(m, d, true),
        numerology,
    }
}

fn relative_error(a: &Matrix<Complex64>, b: &Matrix<Complex64>) -> f64 {
    let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn dft_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let sizes = [8usize, 16, 32, 64];
    let mut worst: f64 = 0.0;
    for &m in &sizes {
        for &d in &sizes {
            for window in [Window::Rectangular, Window::Hann] {
                let est = random_estimate(m, d, &mut rng);
                let wm = window.coefficients(m);
                let wd = window.coefficients(d);

                let cir = delay_transform(&est, window).map_err(|e| e.to_string())?;
                let expect = Matrix::from_fn(m, d, |k, s| {
                    (0..m).fold(Complex64::default(), |acc, c| {
                        let arg = 2.0 * PI * (c * k % m) as f64 / m as f64;
                        acc + est.h[(c, s)] * wm[c] * Complex64::from_polar(1.0, arg)
                    }) / (m as f64).sqrt()
                });
                worst = worst.max(relative_error(&cir.taps, &expect));

                let taps = Matrix::from_fn(m, d, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                let input = ImpulseResponse {
                    taps: taps.clone(),
                    numerology: est.numerology,
                    window: Window::Rectangular,
                };
                let sf = doppler_transform(&input, window).map_err(|e| e.to_string())?;
                let expect = Matrix::from_fn(m, d, |k, col| {
                    let q = (col + d - d / 2) % d;
                    (0..d).fold(Complex64::default(), |acc, s| {
                        let arg = -2.0 * PI * (s * q % d) as f64 / d as f64;
                        acc + taps[(k, s)] * wd[s] * Complex64::from_polar(1.0, arg)
                    }) / (d as f64).sqrt()
                });
                worst = worst.max(relative_error(&sf.s, &expect));
            }
        }
    }
    check(worst < 1e-10, || format!("relative error {worst:.2e}"))?;
    Ok(format!("worst relative error {worst:.2e}"))
}

fn sparse_grid_consistency() -> Outcome {
    let n = Numerology::default();
    let allocs = interleaved_three_user(&n);
    let grid = build_grid(&n, &allocs, 77).map_err(|e| e.to_string())?;
    let paths = [
        Path::new(0.4e-6, 0.0, Complex64::new(1.0, 0.0)),
        Path::new(1.3e-6, 180.0, Complex64::from_polar(0.2, 1.0)),
        Path::new(2.9e-6, -95.0, Complex64::from_polar(0.1, -2.0)),
    ];
    let opts = ChannelOptions {
        noise: NoiseLevel::Power(0.01),
        seed: 9,
        ..ChannelOptions::default()
    };
    let frame = apply_channel_with(&grid, &paths, &opts).map_err(|e| e.to_string())?;
    let full = estimate_channel(&frame, &grid, None).map_err(|e| e.to_string())?;
    for user in grid.user_ids() {
        let mask = &grid.mask(user).unwrap().mask;
        let masked = full.restrict_to(mask);
        let a = process_estimate(&masked, Window::Hann, Window::Hann).map_err(|e| e.to_string())?;

        let sub = user_subgrid(&grid, user).map_err(|e| e.to_string())?;
        let alone = apply_channel_with(&sub, &paths, &opts).map_err(|e| e.to_string())?;
        let own = estimate_channel(&alone, &sub, None).map_err(|e| e.to_string())?;
        let b = process_estimate(&own, Window::Hann, Window::Hann).map_err(|e| e.to_string())?;

        let selected = estimate_channel(&frame, &grid, Some(user)).map_err(|e| e.to_string())?;
        let c = process_estimate(&selected, Window::Hann, Window::Hann).map_err(|e| e.to_string())?;

        check(a == b && a == c, || format!("user {user}: maps differ"))?;
    }
    Ok(format!("{} users bit-identical", grid.user_ids().len()))
}

fn cfar_statistics() -> Outcome {
    let start = Instant::now();
    let side = 1024;
    let n = Numerology {
        num_carriers: side,
        symbols_per_frame: side,
        ..Numerology::default()
    };
    let grid = build_grid(&n, &[UserAllocation::full(1, &n)], 3).map_err(|e| e.to_string())?;
    let opts = ChannelOptions {
        noise: NoiseLevel::Power(1.0),
        seed: 31,
        ..ChannelOptions::default()
    };
    let frame = apply_channel_with(&grid, &[], &opts).map_err(|e| e.to_string())?;
    let est = estimate_channel(&frame, &grid, None).map_err(|e| e.to_string())?;
    let cir = delay_transform(&est, Window::Rectangular).map_err(|e| e.to_string())?;
    let map = scattering_map(&doppler_transform(&cir, Window::Rectangular).map_err(|e| e.to_string())?);
    let cells = map.power.as_slice().len();
    let mut details = Vec::new();
    for pfa in [1e-3, 1e-4] {
        let cfg = CfarConfig {
            pfa,
            ..CfarConfig::default()
        };
        let hits = cfar_detect(&map, &cfg).map_err(|e| e.to_string())?.len();
        let rate = hits as f64 / cells as f64;
        let ratio = rate / pfa;
        check((0.5..=2.0).contains(&ratio), || format!("pfa {pfa:e}: rate {rate:.2e} ({ratio:.2}x)"))?;
        details.push(format!("pfa {pfa:e}: {hits}/{cells} = {ratio:.2}x"));
    }
    within(start.elapsed(), 60.0, details.join("; "))
}

fn pair(id: &str, tx: Vec2, rx: Vec2) -> BistaticPair {
    BistaticPair {
        id: id.to_string(),
        tx_id: "tx".to_string(),
        rx_id: format!("rx_{id}"),
        tx_position: tx,
        rx_position: rx,
        baseline_m: tx.distance(rx),
    }
}

fn measure(p: &BistaticPair, at: Vec2, noise: f64, variance: f64) -> BistaticMeasurement {
    BistaticMeasurement {
        pair: p.clone(),
        total_range_m: total_range(p.tx_position, p.rx_position, at) + noise,
        doppler_hz: 0.0,
        variance_m2: variance,
    }
}

fn localization() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7007);
    let mut worst_exact: f64 = 0.0;
    let mut ambiguous = 0;
    let trials = 200;
    for _ in 0..trials {
        let mut pt = || Vec2::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
        let tx = pt();
        let (r1, r2, truth) = (pt(), pt(), pt());
        let pairs = [pair("a", tx, r1), pair("b", tx, r2)];
        if pairs.iter().any(|p| p.baseline_m < 50.0)
            || [tx, r1, r2].iter().any(|q| q.distance(truth) < 20.0)
        {
            continue;
        }
        let meas: Vec<_> = pairs.iter().map(|p| measure(p, truth, 0.0, 1.0)).collect();
        let candidates: Vec<PositionEstimate> = match fuse_position(&meas, None) {
            Ok(est) => vec![est],
            Err(LocalizationError::AmbiguousFix(c)) => {
                ambiguous += 1;
                c
            }
            Err(e) => return Err(format!("two-pair fix failed: {e}")),
        };
        let err = candidates
            .iter()
            .map(|c| c.position.distance(truth))
            .fold(f64::INFINITY, f64::min);
        worst_exact = worst_exact.max(err);
    }
    check(worst_exact < 1e-6, || format!("exact two-pair error {worst_exact:.2e} m"))?;

    let tx = Vec2::new(0.0, 0.0);
    let pairs = [
        pair("e", tx, Vec2::new(400.0, 0.0)),
        pair("n", tx, Vec2::new(0.0, 400.0)),
        pair("w", tx, Vec2::new(-350.0, 50.0)),
        pair("s", tx, Vec2::new(100.0, -380.0)),
    ];
    let truth = Vec2::new(150.0, 210.0);
    let runs = 500;
    let mut sq = 0.0;
    let mut predicted = 0.0;
    for _ in 0..runs {
        let meas: Vec<_> = pairs
            .iter()
            .map(|p| {
                let e: f64 = StandardNormal.sample(&mut rng);
                measure(p, truth, e, 1.0)
            })
            .collect();
        let est = match fuse_position(&meas, None) {
            Ok(est) => est,
            Err(LocalizationError::AmbiguousFix(c)) => c[0].clone(),
            Err(e) => return Err(format!("four-pair fix failed: {e}")),
        };
        sq += est.position.distance(truth).powi(2);
        predicted += est.covariance[0][0] + est.covariance[1][1];
    }
    let rms = (sq / runs as f64).sqrt();
    let sigma = (predicted / runs as f64).sqrt();
    let ratio = rms / sigma;
    check((0.5..=2.0).contains(&ratio), || {
        format!("Monte Carlo RMS {rms:.3} m vs predicted {sigma:.3} m")
    })?;
    within(
        start.elapsed(),
        30.0,
        format!(
            "exact error {worst_exact:.1e} m ({ambiguous} ambiguous two-pair fixes); RMS {rms:.3} m vs predicted {sigma:.3} m"
        ),
    )
}

fn geometry_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8008);
    let carrier = 5.9e9;
    let lambda = cpcl_core::SPEED_OF_LIGHT / carrier;
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    let mut scenes = 0;
    while scenes < 1000 {
        let mut node = |id: &str, kind: NodeKind| {
            let p = Vec2::new(rng.random_range(-2000.0..2000.0), rng.random_range(-2000.0..2000.0));
            let speed = rng.random_range(0.0..100.0);
            let heading = rng.random_range(0.0..2.0 * PI);
            Node::new(id, kind, p, Vec2::new(speed * heading.cos(), speed * heading.sin()))
        };
        let tx = node("tx", NodeKind::Illuminator);
        let rx = node("rx", NodeKind::Sensor);
        let target = node("t", NodeKind::Target);
        let scene = Scene {
            nodes: vec![tx.clone(), rx.clone(), target.clone()],
            carrier_frequency_hz: carrier,
            gain: GainModel::default(),
            seed: scenes,
        };
        let Ok(bp) = scene.pair("p", "tx", "rx") else {
            continue;
        };
        let Ok(paths) = enumerate_paths(&scene, &bp) else {
            continue;
        };
        let analytic = paths.iter().find(|p| p.kind == PathKind::Target).unwrap().doppler_hz;
        let at = |t: f64| {
            let pos = |n: &Node| n.position + n.velocity * t;
            total_range(pos(&tx), pos(&rx), pos(&target))
        };
        let numeric = -(at(h) - at(-h)) / (2.0 * h) / lambda;
        let err = (analytic - numeric).abs() / analytic.abs().max(1e-3);
        worst = worst.max(err);
        scenes += 1;
    }
    check(worst < 1e-6, || format!("relative error {worst:.2e}"))?;
    Ok(format!("{scenes} scenes, worst relative error {worst:.2e}"))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    let mut names: Vec<String> = fs::read_dir(FsPath::new(env!("CARGO_MANIFEST_DIR")).join("scenarios"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in &names {
        let a = dir.path().join(format!("{name}_a"));
        let b = dir.path().join(format!("{name}_b"));
        run_scenario(&scenario_path(name), Some(&a), None).map_err(|e| format!("{name}: {e}"))?;
        run_scenario(&scenario_path(name), Some(&b), None).map_err(|e| format!("{name}: {e}"))?;
        let mut files: Vec<_> = fs::read_dir(&a).map_err(|e| e.to_string())?.filter_map(|e| e.ok()).collect();
        files.sort_by_key(|e| e.file_name());
        for f in files {
            let other = b.join(f.file_name());
            let same = fs::read(f.path()).ok() == fs::read(&other).ok();
            check(same, || format!("{name}: {} differs", f.file_name().to_string_lossy()))?;
            compared += 1;
        }
    }
    Ok(format!("{} scenarios, {compared} files byte-identical", names.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fig4 analog", fig4_analog),
        ("sinc^2 ambiguity", sinc_ambiguity),
        ("integration gain", integration_gain),
        ("DFT oracle", dft_oracle),
        ("sparse-grid consistency", sparse_grid_consistency),
        ("CFAR statistics", cfar_statistics),
        ("localization", localization),
        ("geometry oracle", geometry_oracle),
        ("reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
