//! Unitary DFT helpers and taper windows.
//!
//! Both directions are scaled by `1/sqrt(N)` so that Parseval holds without
//! coefficients. Each 1D transform has a fixed internal summation order, so
//! results do not depend on how rows or columns are scheduled.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// Taper applied along one transform axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic (DFT-even) Hann taper.
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(format!("unknown window '{other}'")),
        }
    }
}

/// Planned unitary transform of a fixed length.
pub struct UnitaryDft {
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
    scratch: Vec<Complex64>,
}

impl UnitaryDft {
    pub fn forward(len: usize) -> Self {
        Self::new(len, false)
    }

    pub fn inverse(len: usize) -> Self {
        Self::new(len, true)
    }

    fn new(len: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            fft,
            scale: 1.0 / (len as f64).sqrt(),
            scratch,
        }
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.len() == 0
    }

    pub fn process(&mut self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.fft.len());
        self.fft.process_with_scratch(buf, &mut self.scratch);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

/// Rotate so that index 0 (zero frequency) lands at `len / 2`.
pub fn fftshift<T: Clone>(buf: &mut [T]) {
    let n = buf.len();
    buf.rotate_right(n / 2);
}

/// Inverse of [`fftshift`].
pub fn ifftshift<T: Clone>(buf: &mut [T]) {
    let n = buf.len();
    buf.rotate_left(n / 2);
}
