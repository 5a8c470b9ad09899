//! Zero-Doppler clutter notch and cell-averaging CFAR on scattering maps.

use std::ops::{Range, RangeInclusive};

use thiserror::Error;

use crate::matrix::Matrix;
use crate::receiver::ScatteringMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("notch of +-{half_width} bins would blank more than half of {columns} Doppler bins")]
    NotchTooWide { half_width: usize, columns: usize },
    #[error("map {map:?} is smaller than the CFAR window {window:?}")]
    MapTooSmall {
        map: (usize, usize),
        window: (usize, usize),
    },
    #[error("invalid CFAR configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub delay_bin: usize,
    /// Signed, zero Doppler is bin 0.
    pub doppler_bin: isize,
    pub refined_delay_s: f64,
    pub refined_doppler_hz: f64,
    pub peak_power: f64,
    pub snr_db: f64,
}

/// Cross-shaped CA-CFAR window: `train_*` reference cells beyond `guard_*`
/// guard cells on each side of the cell under test, along each axis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    pub train_delay: usize,
    pub train_doppler: usize,
    pub guard_delay: usize,
    pub guard_doppler: usize,
    pub pfa: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            train_delay: 8,
            train_doppler: 8,
            guard_delay: 2,
            guard_doppler: 2,
            pfa: 1e-4,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.train_delay == 0 || self.train_doppler == 0 {
            return Err(DetectionError::InvalidConfig("training cells must be at least 1".into()));
        }
        if !(self.pfa > 0.0 && self.pfa < 0.5) {
            return Err(DetectionError::InvalidConfig("pfa must lie in (0, 0.5)".into()));
        }
        Ok(())
    }

    /// Full window extent `(delay, Doppler)` including the cell under test.
    pub fn window(&self) -> (usize, usize) {
        (
            2 * (self.guard_delay + self.train_delay) + 1,
            2 * (self.guard_doppler + self.train_doppler) + 1,
        )
    }

    pub fn training_cells(&self) -> usize {
        2 * (self.train_delay + self.train_doppler)
    }
}

/// Threshold multiplier on the mean of `cells` exponential reference cells:
/// `T * (pfa^(-1/T) - 1)`.
pub fn threshold_factor(pfa: f64, cells: usize) -> f64 {
    let t = cells as f64;
    t * (pfa.powf(-1.0 / t) - 1.0)
}

/// Cells the detector may report. Delay bins are absolute, Doppler bins are
/// signed relative to zero Doppler.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRegion {
    pub delay_bins: Range<usize>,
    pub doppler_bins: RangeInclusive<isize>,
}

/// Zero the Doppler columns within `half_width` bins of zero Doppler.
pub fn suppress_clutter(map: &ScatteringMap, half_width: usize) -> Result<ScatteringMap, DetectionError> {
    let cols = map.doppler_bins();
    if 2 * (2 * half_width + 1) > cols {
        return Err(DetectionError::NotchTooWide {
            half_width,
            columns: cols,
        });
    }
    let mut out = map.clone();
    let hw = half_width as isize;
    for k in -hw..=hw {
        if let Some(c) = map.column_of(k) {
            for r in 0..out.delay_bins() {
                out.power[(r, c)] = 0.0;
            }
        }
    }
    Ok(out)
}

pub fn cfar_detect(map: &ScatteringMap, cfg: &CfarConfig) -> Result<Vec<Detection>, DetectionError> {
    cfar_detect_in(map, cfg, None)
}

/// CA-CFAR over the whole map or a sub-region of cells under test.
///
/// Both axes wrap around, as they come out of DFTs. Reference cells holding
/// exactly zero (blanked by the clutter notch) are left out of the noise
/// average and the threshold factor is computed for the cells that remain.
/// Reported cells must also be local maxima of their 3x3 neighbourhood; among
/// equal neighbours the lower delay bin, then the lower Doppler bin wins.
pub fn cfar_detect_in(
    map: &ScatteringMap,
    cfg: &CfarConfig,
    region: Option<&SearchRegion>,
) -> Result<Vec<Detection>, DetectionError> {
    cfg.validate()?;
    let (rows, cols) = map.power.shape();
    let window = cfg.window();
    if rows < window.0 || cols < window.1 {
        return Err(DetectionError::MapTooSmall {
            map: (rows, cols),
            window,
        });
    }
    let factors: Vec<f64> = (0..=cfg.training_cells())
        .map(|t| if t == 0 { f64::INFINITY } else { threshold_factor(cfg.pfa, t) })
        .collect();

    let (row_range, col_range) = match region {
        Some(reg) => {
            let r = reg.delay_bins.start.min(rows)..reg.delay_bins.end.min(rows);
            let lo = map.column_of(*reg.doppler_bins.start()).unwrap_or(0);
            let hi = map.column_of(*reg.doppler_bins.end()).map_or(cols, |c| c + 1);
            (r, lo..hi.max(lo))
        }
        None => (0..rows, 0..cols),
    };

    let p = &map.power;
    let mut out = Vec::new();
    for r in row_range {
        for c in col_range.clone() {
            let cut = p[(r, c)];
            if !(cut > 0.0) {
                continue;
            }
            let (sum, count) = training_sum(p, r, c, cfg);
            if count == 0 {
                continue;
            }
            let noise = sum / count as f64;
            if !(cut > factors[count] * noise) || !is_local_max(p, r, c) {
                continue;
            }
            let dr = parabolic_offset(
                p[(wrap(r as isize - 1, rows), c)],
                cut,
                p[(wrap(r as isize + 1, rows), c)],
            );
            let dc = parabolic_offset(
                p[(r, wrap(c as isize - 1, cols))],
                cut,
                p[(r, wrap(c as isize + 1, cols))],
            );
            out.push(Detection {
                delay_bin: r,
                doppler_bin: map.doppler_index(c),
                refined_delay_s: map.delay_s(r as f64 + dr),
                refined_doppler_hz: map.doppler_hz(c as f64 + dc),
                peak_power: cut,
                snr_db: 10.0 * (cut / noise).log10(),
            });
        }
    }
    out.sort_by(|a, b| {
        b.peak_power
            .total_cmp(&a.peak_power)
            .then(a.delay_bin.cmp(&b.delay_bin))
            .then(a.doppler_bin.cmp(&b.doppler_bin))
    });
    Ok(out)
}

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn training_sum(p: &Matrix<f64>, r: usize, c: usize, cfg: &CfarConfig) -> (f64, usize) {
    let (rows, cols) = p.shape();
    let mut sum = 0.0;
    let mut count = 0;
    let mut take = |v: f64| {
        if v != 0.0 {
            sum += v;
            count += 1;
        }
    };
    for k in cfg.guard_delay + 1..=cfg.guard_delay + cfg.train_delay {
        let k = k as isize;
        take(p[(wrap(r as isize - k, rows), c)]);
        take(p[(wrap(r as isize + k, rows), c)]);
    }
    for k in cfg.guard_doppler + 1..=cfg.guard_doppler + cfg.train_doppler {
        let k = k as isize;
        take(p[(r, wrap(c as isize - k, cols))]);
        take(p[(r, wrap(c as isize + k, cols))]);
    }
    (sum, count)
}

fn is_local_max(p: &Matrix<f64>, r: usize, c: usize) -> bool {
    let (rows, cols) = p.shape();
    let v = p[(r, c)];
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let nr = wrap(r as isize + dr, rows);
            let nc = wrap(c as isize + dc, cols);
            let w = p[(nr, nc)];
            if w > v || (w == v && (nr, nc) < (r, c)) {
                return false;
            }
        }
    }
    true
}

/// Vertex of the parabola through three equally spaced samples, clamped to
/// half a bin.
pub fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let denom = left - 2.0 * centre + right;
    if !(denom < 0.0) {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}
