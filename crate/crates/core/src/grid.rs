//! LTE-like OFDM resource grids with multi-user PRB allocation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub type UserId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid numerology: {0}")]
    InvalidNumerology(String),
    #[error("user {first} and user {second} both claim carrier {carrier}, symbol {symbol}")]
    OverlappingAllocation {
        first: UserId,
        second: UserId,
        carrier: usize,
        symbol: usize,
    },
    #[error("PRB tile (row {prb_row}, col {prb_col}) of user {user} lies outside the grid")]
    OutOfBounds {
        user: UserId,
        prb_row: usize,
        prb_col: usize,
    },
    #[error("user {0} listed more than once")]
    DuplicateUser(UserId),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
}

fn default_prb_carriers() -> usize {
    12
}

fn default_prb_symbols() -> usize {
    7
}

/// OFDM frame parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerology {
    pub subcarrier_spacing_hz: f64,
    pub num_carriers: usize,
    pub symbols_per_frame: usize,
    /// Cyclic prefix length as a fraction of the useful symbol length.
    pub cp_fraction: f64,
    pub carrier_frequency_hz: f64,
    #[serde(default = "default_prb_carriers")]
    pub prb_carriers: usize,
    #[serde(default = "default_prb_symbols")]
    pub prb_symbols: usize,
}

impl Default for Numerology {
    /// 15 kHz LTE-style numerology: 6 PRBs by 4 slots at 2.6 GHz.
    fn default() -> Self {
        Self {
            subcarrier_spacing_hz: 15e3,
            num_carriers: 72,
            symbols_per_frame: 28,
            cp_fraction: 1.0 / 14.0,
            carrier_frequency_hz: 2.6e9,
            prb_carriers: 12,
            prb_symbols: 7,
        }
    }
}

impl Numerology {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |msg: &str| Err(GridError::InvalidNumerology(msg.to_string()));
        if !(self.subcarrier_spacing_hz > 0.0) || !self.subcarrier_spacing_hz.is_finite() {
            return bad("subcarrier spacing must be positive");
        }
        if self.num_carriers < 12 {
            return bad("at least 12 carriers are required");
        }
        if self.symbols_per_frame == 0 {
            return bad("at least one OFDM symbol is required");
        }
        if !(0.0..=0.5).contains(&self.cp_fraction) {
            return bad("cp_fraction must lie in [0, 0.5]");
        }
        if !(self.carrier_frequency_hz > 0.0) || !self.carrier_frequency_hz.is_finite() {
            return bad("carrier frequency must be positive");
        }
        if self.prb_carriers == 0 || self.prb_symbols == 0 {
            return bad("PRB dimensions must be nonzero");
        }
        Ok(())
    }

    pub fn useful_symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    pub fn symbol_duration(&self) -> f64 {
        self.useful_symbol_duration() * (1.0 + self.cp_fraction)
    }

    pub fn cp_duration(&self) -> f64 {
        self.useful_symbol_duration() * self.cp_fraction
    }

    pub fn bandwidth(&self) -> f64 {
        self.num_carriers as f64 * self.subcarrier_spacing_hz
    }

    /// Fast-time resolution of the delay transform.
    pub fn delay_bin_width(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    /// Slow-time resolution of a Doppler transform over `symbols` symbols.
    pub fn doppler_bin_width(&self, symbols: usize) -> f64 {
        1.0 / (symbols as f64 * self.symbol_duration())
    }

    pub fn wavelength(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Baseband frequency of carrier row `m`.
    pub fn carrier_offset(&self, m: usize) -> f64 {
        m as f64 * self.subcarrier_spacing_hz
    }

    /// Start time of symbol `d` relative to the frame start.
    pub fn symbol_time(&self, d: usize) -> f64 {
        d as f64 * self.symbol_duration()
    }

    /// PRB rows along frequency; the last one is truncated when the carrier
    /// count is not a multiple of the PRB height.
    pub fn prb_rows(&self) -> usize {
        self.num_carriers.div_ceil(self.prb_carriers)
    }

    pub fn prb_cols(&self) -> usize {
        self.symbols_per_frame.div_ceil(self.prb_symbols)
    }
}

/// One physical resource block, addressed in PRB units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrbTile {
    pub prb_row: usize,
    pub prb_col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAllocation {
    pub user_id: UserId,
    pub tiles: Vec<PrbTile>,
}

impl UserAllocation {
    /// Every PRB of the grid.
    pub fn full(user_id: UserId, numerology: &Numerology) -> Self {
        let tiles = (0..numerology.prb_rows())
            .flat_map(|r| {
                (0..numerology.prb_cols()).map(move |c| PrbTile {
                    prb_row: r,
                    prb_col: c,
                })
            })
            .collect();
        Self { user_id, tiles }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMask {
    pub user_id: UserId,
    pub mask: Matrix<bool>,
}

impl AllocationMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub numerology: Numerology,
    /// Carrier rows by symbol columns; zero where nothing is allocated.
    pub symbols: Matrix<Complex64>,
    pub masks: Vec<AllocationMask>,
}

impl ResourceGrid {
    pub fn mask(&self, user_id: UserId) -> Option<&AllocationMask> {
        self.masks.iter().find(|m| m.user_id == user_id)
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        self.masks.iter().map(|m| m.user_id).collect()
    }

    /// Union of all user masks.
    pub fn support(&self) -> Matrix<bool> {
        let (rows, cols) = self.symbols.shape();
        let mut out = Matrix::filled(rows, cols, false);
        for m in &self.masks {
            for (o, &b) in out.as_mut_slice().iter_mut().zip(m.mask.iter()) {
                *o |= b;
            }
        }
        out
    }
}

const QPSK_AMPLITUDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Fill the allocated resource elements with seeded QPSK symbols.
///
/// Elements are drawn in row-major order over the allocated support, so the
/// result depends only on the allocation and the seed.
pub fn build_grid(
    numerology: &Numerology,
    allocations: &[UserAllocation],
    rng_seed: u64,
) -> Result<ResourceGrid, GridError> {
    numerology.validate()?;
    let rows = numerology.num_carriers;
    let cols = numerology.symbols_per_frame;

    let mut owner: Matrix<Option<UserId>> = Matrix::filled(rows, cols, None);
    let mut masks = Vec::with_capacity(allocations.len());
    for alloc in allocations {
        if masks
            .iter()
            .any(|m: &AllocationMask| m.user_id == alloc.user_id)
        {
            return Err(GridError::DuplicateUser(alloc.user_id));
        }
        let mut mask = Matrix::filled(rows, cols, false);
        for tile in &alloc.tiles {
            let r0 = tile.prb_row * numerology.prb_carriers;
            let c0 = tile.prb_col * numerology.prb_symbols;
            if r0 >= rows || c0 >= cols {
                return Err(GridError::OutOfBounds {
                    user: alloc.user_id,
                    prb_row: tile.prb_row,
                    prb_col: tile.prb_col,
                });
            }
            let r1 = (r0 + numerology.prb_carriers).min(rows);
            let c1 = (c0 + numerology.prb_symbols).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    match owner[(r, c)] {
                        Some(prev) if prev != alloc.user_id => {
                            return Err(GridError::OverlappingAllocation {
                                first: prev,
                                second: alloc.user_id,
                                carrier: r,
                                symbol: c,
                            })
                        }
                        _ => {
                            owner[(r, c)] = Some(alloc.user_id);
                            mask[(r, c)] = true;
                        }
                    }
                }
            }
        }
        masks.push(AllocationMask {
            user_id: alloc.user_id,
            mask,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let symbols = owner.map(|o| {
        if o.is_some() {
            let bits: u8 = rng.random_range(0..4);
            let re = if bits & 1 == 0 { QPSK_AMPLITUDE } else { -QPSK_AMPLITUDE };
            let im = if bits & 2 == 0 { QPSK_AMPLITUDE } else { -QPSK_AMPLITUDE };
            Complex64::new(re, im)
        } else {
            Complex64::default()
        }
    });

    Ok(ResourceGrid {
        numerology: *numerology,
        symbols,
        masks,
    })
}

/// Keep only `user_id`'s resource elements; everything else becomes zero.
pub fn user_subgrid(grid: &ResourceGrid, user_id: UserId) -> Result<ResourceGrid, GridError> {
    let mask = grid.mask(user_id).ok_or(GridError::UnknownUser(user_id))?;
    let (rows, cols) = grid.symbols.shape();
    let symbols = Matrix::from_fn(rows, cols, |r, c| {
        if mask.mask[(r, c)] {
            grid.symbols[(r, c)]
        } else {
            Complex64::default()
        }
    });
    Ok(ResourceGrid {
        numerology: grid.numerology,
        symbols,
        masks: vec![mask.clone()],
    })
}

/// Assign each PRB to one of `users` users (ids `1..=users`) with
/// probability `density`, leaving the rest empty.
pub fn random_allocation(
    numerology: &Numerology,
    users: u32,
    density: f64,
    seed: u64,
) -> Vec<UserAllocation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<UserAllocation> = (1..=users)
        .map(|u| UserAllocation {
            user_id: u,
            tiles: Vec::new(),
        })
        .collect();
    if users == 0 {
        return out;
    }
    for r in 0..numerology.prb_rows() {
        for c in 0..numerology.prb_cols() {
            let take: f64 = rng.random();
            let who = rng.random_range(0..users) as usize;
            if take < density {
                out[who].tiles.push(PrbTile {
                    prb_row: r,
                    prb_col: c,
                });
            }
        }
    }
    out
}

/// Three users interleaved in frequency and time: PRB `(r, c)` belongs to
/// user `1 + (r + c) % 3`.
pub fn interleaved_three_user(numerology: &Numerology) -> Vec<UserAllocation> {
    let mut out: Vec<UserAllocation> = (1..=3)
        .map(|u| UserAllocation {
            user_id: u,
            tiles: Vec::new(),
        })
        .collect();
    for r in 0..numerology.prb_rows() {
        for c in 0..numerology.prb_cols() {
            out[(r + c) % 3].tiles.push(PrbTile {
                prb_row: r,
                prb_col: c,
            });
        }
    }
    out
}
