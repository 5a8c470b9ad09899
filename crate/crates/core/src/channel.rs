//! Frequency-domain multipath channel applied to a transmit grid.
//!
//! With a cyclic prefix longer than every path delay, CP removal and the
//! receiver FFT turn each path into a per-carrier phase ramp times a
//! per-symbol Doppler rotation, so the received post-FFT symbols are
//! `Y[m,d] = X[m,d] * H[m,d] + N[m,d]` with
//! `H[m,d] = sum_p g_p exp(-j2pi f_m tau_p) exp(j2pi alpha_p t_d)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::Path;
use crate::grid::{Numerology, ResourceGrid};
use crate::matrix::Matrix;

/// Largest Doppler rotation within one symbol for which a per-symbol
/// constant phase is accepted.
pub const MAX_INTRA_SYMBOL_ROTATION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("path delay {delay_s:e} s is not below the cyclic prefix {cp_s:e} s")]
    DelayExceedsCp { delay_s: f64, cp_s: f64 },
    #[error("negative path delay {0:e} s")]
    NegativeDelay(f64),
    #[error("Doppler {doppler_hz} Hz rotates {cycles:.3} cycles within one symbol")]
    DopplerTooLarge { doppler_hz: f64, cycles: f64 },
    #[error("SNR-referenced noise requested but the noiseless signal has zero power")]
    ZeroSignalPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Matrix<Complex64>,
    pub numerology: Numerology,
    pub frame_start_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Noiseless,
    /// Relative to the mean noiseless power over allocated elements.
    SnrDb(f64),
    /// Absolute complex noise variance per resource element.
    Power(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOptions {
    pub noise: NoiseLevel,
    pub seed: u64,
    /// Added to every path delay.
    pub timing_offset_s: f64,
    /// Added to every path Doppler.
    pub frequency_offset_hz: f64,
    pub frame_start_time_s: f64,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self {
            noise: NoiseLevel::Noiseless,
            seed: 0,
            timing_offset_s: 0.0,
            frequency_offset_hz: 0.0,
            frame_start_time_s: 0.0,
        }
    }
}

/// Check that `paths` fit the cyclic, narrowband model of `numerology`.
pub fn check_paths(numerology: &Numerology, paths: &[Path]) -> Result<(), ChannelError> {
    let cp = numerology.cp_duration();
    let ts = numerology.symbol_duration();
    for p in paths {
        if p.delay_s < 0.0 {
            return Err(ChannelError::NegativeDelay(p.delay_s));
        }
        if p.delay_s >= cp {
            return Err(ChannelError::DelayExceedsCp {
                delay_s: p.delay_s,
                cp_s: cp,
            });
        }
        let cycles = (p.doppler_hz * ts).abs();
        if cycles > MAX_INTRA_SYMBOL_ROTATION {
            return Err(ChannelError::DopplerTooLarge {
                doppler_hz: p.doppler_hz,
                cycles,
            });
        }
    }
    Ok(())
}

/// Analytic channel transfer function on every resource element.
pub fn channel_matrix(numerology: &Numerology, paths: &[Path]) -> Matrix<Complex64> {
    let rows = numerology.num_carriers;
    let cols = numerology.symbols_per_frame;
    let carrier_terms: Vec<Vec<Complex64>> = paths
        .iter()
        .map(|p| {
            (0..rows)
                .map(|m| p.gain * Complex64::from_polar(1.0, -2.0 * PI * numerology.carrier_offset(m) * p.delay_s))
                .collect()
        })
        .collect();
    let symbol_terms: Vec<Vec<Complex64>> = paths
        .iter()
        .map(|p| {
            (0..cols)
                .map(|d| Complex64::from_polar(1.0, 2.0 * PI * p.doppler_hz * numerology.symbol_time(d)))
                .collect()
        })
        .collect();
    Matrix::from_fn(rows, cols, |m, d| {
        carrier_terms
            .iter()
            .zip(&symbol_terms)
            .fold(Complex64::default(), |acc, (a, b)| acc + a[m] * b[d])
    })
}

/// Pass `grid` through `paths`; `snr_db = None` means noiseless.
pub fn apply_channel(
    grid: &ResourceGrid,
    paths: &[Path],
    snr_db: Option<f64>,
    rng_seed: u64,
) -> Result<SymbolFrame, ChannelError> {
    let opts = ChannelOptions {
        noise: snr_db.map_or(NoiseLevel::Noiseless, NoiseLevel::SnrDb),
        seed: rng_seed,
        ..ChannelOptions::default()
    };
    apply_channel_with(grid, paths, &opts)
}

pub fn apply_channel_with(
    grid: &ResourceGrid,
    paths: &[Path],
    opts: &ChannelOptions,
) -> Result<SymbolFrame, ChannelError> {
    let numerology = grid.numerology;
    let shifted: Vec<Path> = paths
        .iter()
        .map(|p| Path {
            delay_s: p.delay_s + opts.timing_offset_s,
            doppler_hz: p.doppler_hz + opts.frequency_offset_hz,
            ..p.clone()
        })
        .collect();
    check_paths(&numerology, &shifted)?;

    let h = channel_matrix(&numerology, &shifted);
    let mut symbols = Matrix::from_fn(h.rows(), h.cols(), |m, d| grid.symbols[(m, d)] * h[(m, d)]);

    let variance = match opts.noise {
        NoiseLevel::Noiseless => None,
        NoiseLevel::Power(p) => Some(p),
        NoiseLevel::SnrDb(snr) => {
            let power = allocated_power(grid, &symbols);
            if !(power > 0.0) {
                return Err(ChannelError::ZeroSignalPower);
            }
            Some(power / 10f64.powf(snr / 10.0))
        }
    };
    if let Some(var) = variance {
        add_noise(&mut symbols, var, opts.seed);
    }

    Ok(SymbolFrame {
        symbols,
        numerology,
        frame_start_time_s: opts.frame_start_time_s,
    })
}

/// Mean `|y|^2` over elements where the transmit grid is nonzero.
pub fn allocated_power(grid: &ResourceGrid, received: &Matrix<Complex64>) -> f64 {
    let (sum, count) = grid
        .symbols
        .iter()
        .zip(received.iter())
        .filter(|(x, _)| x.norm_sqr() > 0.0)
        .fold((0.0, 0usize), |(s, n), (_, y)| (s + y.norm_sqr(), n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Add circular complex white Gaussian noise of the given variance to every
/// element, drawn in row-major order.
pub fn add_noise(symbols: &mut Matrix<Complex64>, variance: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (variance / 2.0).sqrt();
    for v in symbols.as_mut_slice() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * sigma, im * sigma);
    }
}
