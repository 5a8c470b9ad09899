//! Radar processing of received OFDM symbols.
//!
//! The chain is: symbol-wise inverse filtering against the known transmit
//! symbols, an inverse DFT over carriers to get one impulse response per
//! symbol (fast time), and a DFT over symbols for every delay bin (slow time)
//! to get the delay-Doppler spreading function. Its squared magnitude is the
//! scattering map that detection runs on.
//!
//! Matrices are indexed `(delay bin, Doppler bin)` after the last step. The
//! Doppler axis is shifted so zero Doppler sits at column `D / 2`.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::SymbolFrame;
use crate::dft::{fftshift, UnitaryDft, Window};
use crate::grid::{user_subgrid, GridError, Numerology, ResourceGrid, UserId};
use crate::matrix::Matrix;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("received frame is {received:?} but the reference is {reference:?}")]
    DimensionMismatch {
        received: (usize, usize),
        reference: (usize, usize),
    },
    #[error("the reference owns no resource elements")]
    EmptyReference,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("need at least {needed} symbols, have {available}")]
    TooFewSymbols { needed: usize, available: usize },
    #[error("target speed must be positive")]
    NonPositiveSpeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Carrier rows by symbol columns; zero where `valid` is false.
    pub h: Matrix<Complex64>,
    pub valid: Matrix<bool>,
    pub numerology: Numerology,
}

impl ChannelEstimate {
    pub fn symbols(&self) -> usize {
        self.h.cols()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Drop every element outside `mask`.
    pub fn restrict_to(&self, mask: &Matrix<bool>) -> ChannelEstimate {
        let (rows, cols) = self.h.shape();
        let valid = Matrix::from_fn(rows, cols, |r, c| self.valid[(r, c)] && mask[(r, c)]);
        let h = Matrix::from_fn(rows, cols, |r, c| {
            if valid[(r, c)] {
                self.h[(r, c)]
            } else {
                Complex64::default()
            }
        });
        ChannelEstimate {
            h,
            valid,
            numerology: self.numerology,
        }
    }

    /// The first `symbols` symbols, i.e. one Doppler processing window.
    pub fn leading_symbols(&self, symbols: usize) -> Result<ChannelEstimate, ReceiverError> {
        if symbols > self.h.cols() || symbols == 0 {
            return Err(ReceiverError::TooFewSymbols {
                needed: symbols.max(1),
                available: self.h.cols(),
            });
        }
        Ok(ChannelEstimate {
            h: self.h.leading_columns(symbols),
            valid: self.valid.leading_columns(symbols),
            numerology: self.numerology,
        })
    }
}

/// Inverse filtering `H = Y / X` on every element where the reference is
/// nonzero. With `user_id`, the reference is first cut down to that user's
/// resource elements.
///
/// For unit-modulus references this equals the normalized cross-correlation
/// `Y * conj(X) / |X|^2`.
pub fn estimate_channel(
    rx: &SymbolFrame,
    reference: &ResourceGrid,
    user_id: Option<UserId>,
) -> Result<ChannelEstimate, ReceiverError> {
    if rx.symbols.shape() != reference.symbols.shape() {
        return Err(ReceiverError::DimensionMismatch {
            received: rx.symbols.shape(),
            reference: reference.symbols.shape(),
        });
    }
    let restricted;
    let reference = match user_id {
        Some(u) => {
            restricted = user_subgrid(reference, u)?;
            &restricted
        }
        None => reference,
    };
    let (rows, cols) = rx.symbols.shape();
    let valid = reference.symbols.map(|x| x.norm_sqr() > 0.0);
    if !valid.iter().any(|&b| b) {
        return Err(ReceiverError::EmptyReference);
    }
    let h = Matrix::from_fn(rows, cols, |r, c| {
        if valid[(r, c)] {
            rx.symbols[(r, c)] / reference.symbols[(r, c)]
        } else {
            Complex64::default()
        }
    });
    Ok(ChannelEstimate {
        h,
        valid,
        numerology: rx.numerology,
    })
}

/// Per-symbol channel impulse responses: delay rows by symbol columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Matrix<Complex64>,
    pub numerology: Numerology,
    pub window: Window,
}

impl ImpulseResponse {
    pub fn delay_bin_width(&self) -> f64 {
        self.numerology.delay_bin_width()
    }

    /// Power-delay profile averaged over all symbols.
    pub fn mean_power_profile(&self) -> Vec<f64> {
        let d = self.taps.cols() as f64;
        (0..self.taps.rows())
            .map(|r| self.taps.row(r).iter().map(|v| v.norm_sqr()).sum::<f64>() / d)
            .collect()
    }
}

/// Inverse DFT over carriers for each symbol, after tapering. Carriers the
/// estimate does not cover enter as zeros.
pub fn delay_transform(est: &ChannelEstimate, window: Window) -> Result<ImpulseResponse, ReceiverError> {
    if est.valid_count() == 0 {
        return Err(ReceiverError::EmptyReference);
    }
    let (rows, cols) = est.h.shape();
    let taper = window.coefficients(rows);
    let mut idft = UnitaryDft::inverse(rows);
    let mut taps = Matrix::filled(rows, cols, Complex64::default());
    let mut buf = vec![Complex64::default(); rows];
    for d in 0..cols {
        for (m, b) in buf.iter_mut().enumerate() {
            *b = est.h[(m, d)] * taper[m];
        }
        idft.process(&mut buf);
        taps.set_column(d, &buf);
    }
    Ok(ImpulseResponse {
        taps,
        numerology: est.numerology,
        window,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingFunction {
    /// Delay rows by shifted Doppler columns.
    pub s: Matrix<Complex64>,
    pub delay_bin_s: f64,
    pub doppler_bin_hz: f64,
    pub delay_window: Window,
    pub doppler_window: Window,
}

/// DFT over slow time for every delay bin, shifted to centre zero Doppler.
pub fn doppler_transform(cir: &ImpulseResponse, window: Window) -> Result<SpreadingFunction, ReceiverError> {
    let (rows, cols) = cir.taps.shape();
    if cols < 2 {
        return Err(ReceiverError::TooFewSymbols {
            needed: 2,
            available: cols,
        });
    }
    let taper = window.coefficients(cols);
    let mut dft = UnitaryDft::forward(cols);
    let mut s = Matrix::filled(rows, cols, Complex64::default());
    for r in 0..rows {
        let out = s.row_mut(r);
        for (o, (v, w)) in out.iter_mut().zip(cir.taps.row(r).iter().zip(&taper)) {
            *o = v * w;
        }
        dft.process(out);
        fftshift(out);
    }
    Ok(SpreadingFunction {
        s,
        delay_bin_s: cir.numerology.delay_bin_width(),
        doppler_bin_hz: cir.numerology.doppler_bin_width(cols),
        delay_window: cir.window,
        doppler_window: window,
    })
}

/// Non-negative delay-Doppler power map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMap {
    /// Delay rows by shifted Doppler columns.
    pub power: Matrix<f64>,
    pub delay_bin_s: f64,
    pub doppler_bin_hz: f64,
}

impl ScatteringMap {
    pub fn delay_bins(&self) -> usize {
        self.power.rows()
    }

    pub fn doppler_bins(&self) -> usize {
        self.power.cols()
    }

    /// Column holding zero Doppler.
    pub fn zero_doppler_column(&self) -> usize {
        self.doppler_bins() / 2
    }

    /// Signed Doppler bin index of a column.
    pub fn doppler_index(&self, column: usize) -> isize {
        column as isize - self.zero_doppler_column() as isize
    }

    /// Column of a signed Doppler bin index, if it exists.
    pub fn column_of(&self, doppler_index: isize) -> Option<usize> {
        let c = doppler_index + self.zero_doppler_column() as isize;
        (0..self.doppler_bins() as isize).contains(&c).then_some(c as usize)
    }

    pub fn doppler_hz(&self, column: f64) -> f64 {
        (column - self.zero_doppler_column() as f64) * self.doppler_bin_hz
    }

    pub fn delay_s(&self, row: f64) -> f64 {
        row * self.delay_bin_s
    }

    pub fn peak(&self) -> (usize, usize, f64) {
        self.power
            .indexed_iter()
            .fold((0, 0, f64::NEG_INFINITY), |best, (r, c, &v)| {
                if v > best.2 {
                    (r, c, v)
                } else {
                    best
                }
            })
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

pub fn scattering_map(sf: &SpreadingFunction) -> ScatteringMap {
    ScatteringMap {
        power: sf.s.map(|v| v.norm_sqr()),
        delay_bin_s: sf.delay_bin_s,
        doppler_bin_hz: sf.doppler_bin_hz,
    }
}

/// Delay transform, Doppler transform and squared magnitude in one call.
pub fn process_estimate(
    est: &ChannelEstimate,
    delay_window: Window,
    doppler_window: Window,
) -> Result<ScatteringMap, ReceiverError> {
    let cir = delay_transform(est, delay_window)?;
    let sf = doppler_transform(&cir, doppler_window)?;
    Ok(scattering_map(&sf))
}

/// Longest slow-time window before the worst-case bistatic range change of a
/// target moving at `target_speed_mps` crosses one delay bin. Both legs can
/// shorten at once, hence the factor two.
pub fn max_integration_time(target_speed_mps: f64, delay_bin_s: f64) -> Result<f64, ReceiverError> {
    if !(target_speed_mps > 0.0) {
        return Err(ReceiverError::NonPositiveSpeed);
    }
    Ok(SPEED_OF_LIGHT * delay_bin_s / (2.0 * target_speed_mps))
}

/// Power response of one symbol's impulse response, interpolated by
/// zero-padding the carrier axis `oversample` times. Sample `k * oversample`
/// coincides with delay bin `k` of [`delay_transform`].
pub fn interpolated_delay_response(
    est: &ChannelEstimate,
    symbol: usize,
    window: Window,
    oversample: usize,
) -> Vec<f64> {
    let rows = est.h.rows();
    let taper = window.coefficients(rows);
    let len = rows * oversample;
    let mut buf = vec![Complex64::default(); len];
    for m in 0..rows {
        buf[m] = est.h[(m, symbol)] * taper[m];
    }
    UnitaryDft::inverse(len).process(&mut buf);
    let gain = oversample as f64;
    buf.iter().map(|v| v.norm_sqr() * gain).collect()
}

/// Power response along slow time for one delay bin, zero-padded
/// `oversample` times and shifted so zero Doppler sits at `len / 2`.
pub fn interpolated_doppler_response(
    cir: &ImpulseResponse,
    delay_bin: usize,
    window: Window,
    oversample: usize,
) -> Vec<f64> {
    let cols = cir.taps.cols();
    let taper = window.coefficients(cols);
    let len = cols * oversample;
    let mut buf = vec![Complex64::default(); len];
    for (d, (v, w)) in cir.taps.row(delay_bin).iter().zip(&taper).enumerate() {
        buf[d] = v * w;
    }
    UnitaryDft::forward(len).process(&mut buf);
    fftshift(&mut buf);
    let gain = oversample as f64;
    buf.iter().map(|v| v.norm_sqr() * gain).collect()
}
