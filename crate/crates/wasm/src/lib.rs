//! Browser bindings for the interactive demo page in `www/`.
//!
//! All three entry points use a small fixed scene so they stay interactive:
//! one illuminator at the origin and receivers on a 300 m square.

use cpcl_core::channel::{apply_channel, apply_channel_with, ChannelOptions, NoiseLevel};
use cpcl_core::detection::{cfar_detect_in, suppress_clutter, CfarConfig, SearchRegion};
use cpcl_core::dft::Window;
use cpcl_core::geometry::{enumerate_paths, total_range, GainModel, Node, NodeKind, Path, Scene, Vec2};
use cpcl_core::grid::{build_grid, interleaved_three_user, Numerology, UserAllocation};
use cpcl_core::localization::{ellipse_points, fuse_position, BistaticMeasurement, LocalizationError};
use cpcl_core::receiver::{
    delay_transform, estimate_channel, interpolated_doppler_response, process_estimate,
};
use cpcl_core::{Complex64, SPEED_OF_LIGHT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

const RECEIVERS: [(f64, f64); 3] = [(300.0, 0.0), (0.0, 300.0), (300.0, 300.0)];

fn demo_numerology() -> Numerology {
    Numerology {
        subcarrier_spacing_hz: 78125.0,
        num_carriers: 128,
        symbols_per_frame: 128,
        cp_fraction: 0.25,
        carrier_frequency_hz: 5.9e9,
        ..Numerology::default()
    }
}

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Scattering map in dB (peak at 0 dB), delay-major, with its axes and the
/// CFAR detections.
#[wasm_bindgen]
pub struct MapView {
    rows: usize,
    cols: usize,
    delay_bin_m: f64,
    doppler_bin_hz: f64,
    db: Vec<f32>,
    detections: Vec<f64>,
}

#[wasm_bindgen]
impl MapView {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Delay bin width expressed as bistatic range.
    #[wasm_bindgen(getter, js_name = delayBinM)]
    pub fn delay_bin_m(&self) -> f64 {
        self.delay_bin_m
    }

    #[wasm_bindgen(getter, js_name = dopplerBinHz)]
    pub fn doppler_bin_hz(&self) -> f64 {
        self.doppler_bin_hz
    }

    #[wasm_bindgen(getter)]
    pub fn db(&self) -> Vec<f32> {
        self.db.clone()
    }

    /// Flat `[delay_bin, doppler_bin, snr_db, ...]` triples.
    #[wasm_bindgen(getter)]
    pub fn detections(&self) -> Vec<f64> {
        self.detections.clone()
    }
}

/// Scene with a target at `(x, y)` moving at `(vx, vy)` and two static
/// clutter points, seen by the first receiver.
fn demo_scene(x: f64, y: f64, vx: f64, vy: f64) -> Scene {
    let rx = RECEIVERS[0];
    Scene {
        nodes: vec![
            Node::new("tx", NodeKind::Illuminator, Vec2::new(0.0, 0.0), Vec2::default()),
            Node::new("rx", NodeKind::Sensor, Vec2::new(rx.0, rx.1), Vec2::default()),
            Node::new("target", NodeKind::Target, Vec2::new(x, y), Vec2::new(vx, vy)),
            Node::new("c1", NodeKind::Clutter, Vec2::new(-120.0, 200.0), Vec2::default()).with_reflectivity(3.0),
            Node::new("c2", NodeKind::Clutter, Vec2::new(380.0, -150.0), Vec2::default()).with_reflectivity(3.0),
        ],
        carrier_frequency_hz: 5.9e9,
        gain: GainModel::default(),
        seed: 1,
    }
}

/// Simulate and process one frame. `sparse` restricts processing to user 1
/// of a three-user interleaved allocation.
#[wasm_bindgen(js_name = scatteringMap)]
pub fn scattering_map_view(
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    snr_db: f64,
    sparse: bool,
    seed: u64,
) -> Result<MapView, JsError> {
    let n = demo_numerology();
    let allocs = if sparse {
        interleaved_three_user(&n)
    } else {
        vec![UserAllocation::full(1, &n)]
    };
    let grid = build_grid(&n, &allocs, seed).map_err(err)?;
    let scene = demo_scene(x, y, vx, vy);
    let pair = scene.pair("rx", "tx", "rx").map_err(err)?;
    let paths = enumerate_paths(&scene, &pair).map_err(err)?;
    let frame = apply_channel(&grid, &paths, Some(snr_db), seed.wrapping_add(1)).map_err(err)?;
    let user = sparse.then_some(1);
    let est = estimate_channel(&frame, &grid, user).map_err(err)?;
    let map = process_estimate(&est, Window::Hann, Window::Hann).map_err(err)?;

    let notched = suppress_clutter(&map, 1).map_err(err)?;
    let half = (map.doppler_bins() / 2) as isize;
    let region = SearchRegion {
        delay_bins: 0..map.delay_bins(),
        doppler_bins: -half..=half,
    };
    let cfar = CfarConfig {
        pfa: 1e-5,
        ..CfarConfig::default()
    };
    let dets = cfar_detect_in(&notched, &cfar, Some(&region)).map_err(err)?;

    let peak = map.peak().2.max(f64::MIN_POSITIVE);
    let db = map
        .power
        .iter()
        .map(|&v| (10.0 * (v.max(peak * 1e-12) / peak).log10()) as f32)
        .collect();
    Ok(MapView {
        rows: map.delay_bins(),
        cols: map.doppler_bins(),
        delay_bin_m: map.delay_bin_s * SPEED_OF_LIGHT,
        doppler_bin_hz: map.doppler_bin_hz,
        db,
        detections: dets
            .iter()
            .flat_map(|d| [d.delay_bin as f64, d.doppler_bin as f64, d.snr_db])
            .collect(),
    })
}

/// Doppler cut (dB, peak at 0) through a single noiseless path, oversampled
/// 8 times, for the full grid or one user of an interleaved three-user grid.
/// Zero Doppler sits at the middle sample.
#[wasm_bindgen(js_name = dopplerCut)]
pub fn doppler_cut(sparse: bool, doppler_bins: f64, hann: bool) -> Result<Vec<f64>, JsError> {
    let window = if hann { Window::Hann } else { Window::Rectangular };
    let n = demo_numerology();
    let allocs = if sparse {
        interleaved_three_user(&n)
    } else {
        vec![UserAllocation::full(1, &n)]
    };
    let grid = build_grid(&n, &allocs, 3).map_err(err)?;
    let delay_bin = 10;
    let path = Path::new(
        delay_bin as f64 * n.delay_bin_width(),
        doppler_bins * n.doppler_bin_width(n.symbols_per_frame),
        Complex64::new(1.0, 0.0),
    );
    let opts = ChannelOptions {
        noise: NoiseLevel::Noiseless,
        ..ChannelOptions::default()
    };
    let frame = apply_channel_with(&grid, &[path], &opts).map_err(err)?;
    let est = estimate_channel(&frame, &grid, sparse.then_some(1)).map_err(err)?;
    let cir = delay_transform(&est, Window::Rectangular).map_err(err)?;
    let cut = interpolated_doppler_response(&cir, delay_bin, window, 8);
    let peak = cut.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    Ok(cut.iter().map(|v| 10.0 * (v.max(peak * 1e-12) / peak).log10()).collect())
}

/// Bistatic ellipses through `(x, y)` for the three receivers, with range
/// errors of standard deviation `sigma_m` drawn from `seed`, and the fused
/// fix.
#[wasm_bindgen]
pub struct FixView {
    ellipses: Vec<f64>,
    candidates: Vec<f64>,
    sigma_m: f64,
}

#[wasm_bindgen]
impl FixView {
    /// Three closed polylines, each 96 points of `[x, y]`.
    #[wasm_bindgen(getter)]
    pub fn ellipses(&self) -> Vec<f64> {
        self.ellipses.clone()
    }

    /// Candidate fixes, best first; more than one means ambiguous.
    #[wasm_bindgen(getter)]
    pub fn candidates(&self) -> Vec<f64> {
        self.candidates.clone()
    }

    /// One-sigma position error of the best fix.
    #[wasm_bindgen(getter, js_name = sigmaM)]
    pub fn sigma_m(&self) -> f64 {
        self.sigma_m
    }
}

pub const ELLIPSE_POINTS: usize = 96;

#[wasm_bindgen(js_name = localize)]
pub fn localize(x: f64, y: f64, sigma_m: f64, pairs: usize, seed: u64) -> Result<FixView, JsError> {
    let scene = Scene {
        nodes: std::iter::once(Node::new("tx", NodeKind::Illuminator, Vec2::default(), Vec2::default()))
            .chain(RECEIVERS.iter().enumerate().map(|(i, r)| {
                Node::new(format!("rx{i}"), NodeKind::Sensor, Vec2::new(r.0, r.1), Vec2::default())
            }))
            .collect(),
        carrier_frequency_hz: 5.9e9,
        gain: GainModel::default(),
        seed: 0,
    };
    let target = Vec2::new(x, y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variance = sigma_m.max(1e-3).powi(2);
    let mut meas = Vec::new();
    let mut ellipses = Vec::new();
    for i in 0..pairs.clamp(2, RECEIVERS.len()) {
        let pair = scene.pair(&format!("p{i}"), "tx", &format!("rx{i}")).map_err(err)?;
        let noise: f64 = StandardNormal.sample(&mut rng);
        let range = total_range(pair.tx_position, pair.rx_position, target) + sigma_m * noise;
        let m = BistaticMeasurement {
            pair,
            total_range_m: range,
            doppler_hz: 0.0,
            variance_m2: variance,
        };
        let points = ellipse_points(&m, ELLIPSE_POINTS).map_err(err)?;
        ellipses.extend(points.iter().flat_map(|p| [p.x, p.y]));
        meas.push(m);
    }
    let fixes = match fuse_position(&meas, None) {
        Ok(est) => vec![est],
        Err(LocalizationError::AmbiguousFix(c)) => c,
        Err(e) => return Err(err(e)),
    };
    Ok(FixView {
        ellipses,
        candidates: fixes.iter().flat_map(|f| [f.position.x, f.position.y]).collect(),
        sigma_m: fixes[0].position_sigma_m(),
    })
}
