//! Bistatic ellipses and multi-pair position fixes.
//!
//! A detection's excess delay over the direct path gives the total range
//! `rho = baseline + c * excess`, i.e. an ellipse with the transmitter and
//! receiver as foci. Two or more ellipses are fused by weighted least
//! squares on the focal-sum residuals.

use std::f64::consts::PI;

use thiserror::Error;

use crate::detection::Detection;
use crate::geometry::{BistaticPair, Vec2};
use crate::SPEED_OF_LIGHT;

/// Grid search spans this many steps across the search-box diagonal.
const GRID_DIVISIONS: f64 = 50.0;
const MAX_ITERATIONS: usize = 200;
const MAX_BASINS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("excess delay {0:e} s is negative")]
    NegativeExcess(f64),
    #[error("total range does not exceed the baseline")]
    DegenerateEllipse,
    #[error("a point fix needs at least 2 measurements, got {0}")]
    TooFewMeasurements(usize),
    #[error("position solver did not converge")]
    NoConvergence,
    #[error("{} candidate fixes with near-equal residuals", .0.len())]
    AmbiguousFix(Vec<PositionEstimate>),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BistaticMeasurement {
    pub pair: BistaticPair,
    /// Focal sum `|p - tx| + |rx - p|` in metres.
    pub total_range_m: f64,
    pub doppler_hz: f64,
    pub variance_m2: f64,
}

impl BistaticMeasurement {
    pub fn residual(&self, p: Vec2) -> f64 {
        p.distance(self.pair.tx_position) + self.pair.rx_position.distance(p) - self.total_range_m
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        unit(p - self.pair.tx_position) + unit(p - self.pair.rx_position)
    }
}

fn unit(v: Vec2) -> Vec2 {
    let n = v.norm();
    if n < 1e-12 {
        Vec2::ZERO
    } else {
        v * (1.0 / n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub position: Vec2,
    /// Weighted RMS of the focal-sum residuals.
    pub residual_rms_m: f64,
    pub pairs_used: usize,
    /// Row-major 2x2 covariance in m^2.
    pub covariance: [[f64; 2]; 2],
}

impl PositionEstimate {
    /// `sqrt(trace(covariance))`.
    pub fn position_sigma_m(&self) -> f64 {
        (self.covariance[0][0] + self.covariance[1][1]).sqrt()
    }
}

/// Variance of a delay quantised to bins of width `delay_bin_s`, expressed
/// as range.
pub fn bin_range_variance(delay_bin_s: f64) -> f64 {
    let sigma = SPEED_OF_LIGHT * delay_bin_s / 12f64.sqrt();
    sigma * sigma
}

/// Turn a detection into a total-range measurement. `los_delay_s` is the
/// delay at which the direct path appears on the detection's delay axis.
pub fn measurement_from_detection(
    det: &Detection,
    pair: &BistaticPair,
    los_delay_s: f64,
    delay_bin_s: f64,
) -> Result<BistaticMeasurement, LocalizationError> {
    let excess = det.refined_delay_s - los_delay_s;
    if excess < 0.0 {
        return Err(LocalizationError::NegativeExcess(excess));
    }
    Ok(BistaticMeasurement {
        pair: pair.clone(),
        total_range_m: pair.baseline_m + SPEED_OF_LIGHT * excess,
        doppler_hz: det.refined_doppler_hz,
        variance_m2: bin_range_variance(delay_bin_s),
    })
}

struct EllipseFrame {
    centre: Vec2,
    major_dir: Vec2,
    a: f64,
    b: f64,
}

fn ellipse_frame(meas: &BistaticMeasurement) -> Result<EllipseFrame, LocalizationError> {
    let tx = meas.pair.tx_position;
    let rx = meas.pair.rx_position;
    let baseline = tx.distance(rx);
    let a = meas.total_range_m / 2.0;
    let c = baseline / 2.0;
    if !(a > c) {
        return Err(LocalizationError::DegenerateEllipse);
    }
    Ok(EllipseFrame {
        centre: (tx + rx) * 0.5,
        major_dir: unit(rx - tx),
        a,
        b: ((a - c) * (a + c)).sqrt(),
    })
}

/// `n` points evenly spaced in eccentric anomaly, starting at the major-axis
/// vertex beyond the transmitter.
pub fn ellipse_points(meas: &BistaticMeasurement, n: usize) -> Result<Vec<Vec2>, LocalizationError> {
    let f = ellipse_frame(meas)?;
    let minor_dir = Vec2::new(-f.major_dir.y, f.major_dir.x);
    Ok((0..n)
        .map(|k| {
            let theta = PI + 2.0 * PI * k as f64 / n as f64;
            f.centre + f.major_dir * (f.a * theta.cos()) + minor_dir * (f.b * theta.sin())
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct BoundingBox {
    min: Vec2,
    max: Vec2,
}

impl BoundingBox {
    fn of_ellipse(meas: &BistaticMeasurement) -> Result<Self, LocalizationError> {
        let f = ellipse_frame(meas)?;
        let (ux, uy) = (f.major_dir.x, f.major_dir.y);
        let hx = ((f.a * ux).powi(2) + (f.b * uy).powi(2)).sqrt();
        let hy = ((f.a * uy).powi(2) + (f.b * ux).powi(2)).sqrt();
        Ok(Self {
            min: Vec2::new(f.centre.x - hx, f.centre.y - hy),
            max: Vec2::new(f.centre.x + hx, f.centre.y + hy),
        })
    }

    fn intersect(self, o: Self) -> Self {
        Self {
            min: Vec2::new(self.min.x.max(o.min.x), self.min.y.max(o.min.y)),
            max: Vec2::new(self.max.x.min(o.max.x), self.max.y.min(o.max.y)),
        }
    }

    fn union(self, o: Self) -> Self {
        Self {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y
    }
}

fn weighted_cost(meas: &[BistaticMeasurement], p: Vec2) -> f64 {
    meas.iter().map(|m| m.residual(p).powi(2) / m.variance_m2).sum()
}

fn weighted_rms(meas: &[BistaticMeasurement], p: Vec2) -> f64 {
    let wsum: f64 = meas.iter().map(|m| 1.0 / m.variance_m2).sum();
    (weighted_cost(meas, p) / wsum).sqrt()
}

/// Normal matrix `J^T W J` and gradient `J^T W r` at `p`.
fn normal_equations(meas: &[BistaticMeasurement], p: Vec2) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for m in meas {
        let w = 1.0 / m.variance_m2;
        let j = m.gradient(p);
        let r = m.residual(p);
        a[0][0] += w * j.x * j.x;
        a[0][1] += w * j.x * j.y;
        a[1][1] += w * j.y * j.y;
        g[0] += w * j.x * r;
        g[1] += w * j.y * r;
    }
    a[1][0] = a[0][1];
    (a, g)
}

fn invert2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a[0][0].abs() + a[1][1].abs();
    if !(det.abs() > 1e-12 * scale * scale) {
        return [[f64::INFINITY, 0.0], [0.0, f64::INFINITY]];
    }
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Damped Gauss-Newton from `start`. Steps must lower the cost, except for
/// a few final polishing steps below rounding level.
fn refine(meas: &[BistaticMeasurement], start: Vec2, scale: f64) -> Result<Vec2, LocalizationError> {
    let mut p = start;
    let mut cost = weighted_cost(meas, p);
    let mut lambda = 1e-3;
    let mut polish = 0;
    for _ in 0..MAX_ITERATIONS {
        if cost == 0.0 {
            return Ok(p);
        }
        let (a, g) = normal_equations(meas, p);
        let mut accepted = None;
        while lambda < 1e12 {
            let d00 = a[0][0] * (1.0 + lambda) + lambda * 1e-12;
            let d11 = a[1][1] * (1.0 + lambda) + lambda * 1e-12;
            let det = d00 * d11 - a[0][1] * a[1][0];
            if !(det.is_finite() && det != 0.0) {
                lambda *= 4.0;
                continue;
            }
            let step = Vec2::new(
                -(d11 * g[0] - a[0][1] * g[1]) / det,
                -(d00 * g[1] - a[1][0] * g[0]) / det,
            );
            let candidate = p + step;
            let new_cost = weighted_cost(meas, candidate);
            let tiny = step.norm() <= 1e-9 * (scale + p.norm());
            if new_cost < cost {
                lambda = (lambda / 3.0).max(1e-12);
                accepted = Some((candidate, new_cost, step.norm()));
                break;
            }
            if tiny && new_cost <= cost * (1.0 + 1e-12) && polish < 4 {
                polish += 1;
                accepted = Some((candidate, new_cost, step.norm()));
                break;
            }
            if tiny {
                return Ok(p);
            }
            lambda *= 4.0;
        }
        match accepted {
            Some((q, c, len)) => {
                p = q;
                cost = c;
                if len <= 1e-15 * (scale + p.norm()) {
                    return Ok(p);
                }
            }
            None => return Ok(p),
        }
    }
    Err(LocalizationError::NoConvergence)
}

fn estimate_at(meas: &[BistaticMeasurement], p: Vec2) -> PositionEstimate {
    let (a, _) = normal_equations(meas, p);
    PositionEstimate {
        position: p,
        residual_rms_m: weighted_rms(meas, p),
        pairs_used: meas.len(),
        covariance: invert2(a),
    }
}

/// Unit eigenvector of the smallest eigenvalue of a symmetric 2x2 matrix.
fn weak_direction(a: [[f64; 2]; 2]) -> Option<Vec2> {
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let lambda = 0.5 * (p + r) - (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let u = Vec2::new(q, lambda - p);
    let w = Vec2::new(lambda - r, q);
    let v = if u.norm() >= w.norm() { u } else { w };
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v * (1.0 / n))
}

/// Two refined points are separate minima when the cost rises between them.
fn distinct_minima(meas: &[BistaticMeasurement], a: (f64, Vec2), b: (f64, Vec2), scale: f64) -> bool {
    if a.1.distance(b.1) <= 1e-9 * scale {
        return false;
    }
    let mid = weighted_cost(meas, (a.1 + b.1) * 0.5);
    let top = a.0.max(b.0);
    mid > top * (1.0 + 1e-6) + 1e-12
}

fn validate(meas: &[BistaticMeasurement]) -> Result<(), LocalizationError> {
    if meas.len() < 2 {
        return Err(LocalizationError::TooFewMeasurements(meas.len()));
    }
    for m in meas {
        if !(m.variance_m2 > 0.0) || !m.variance_m2.is_finite() {
            return Err(LocalizationError::InvalidMeasurement(format!(
                "pair '{}' has non-positive variance",
                m.pair.id
            )));
        }
        if !m.total_range_m.is_finite() {
            return Err(LocalizationError::InvalidMeasurement(format!(
                "pair '{}' has a non-finite range",
                m.pair.id
            )));
        }
    }
    Ok(())
}

/// Weighted least-squares fix from two or more bistatic ranges.
///
/// With `init`, the solver starts there. Otherwise it scans a grid over the
/// region every ellipse can reach, refines every local minimum of the grid
/// and returns the best one. When another refined candidate is nearly as
/// good, all candidates are returned in [`LocalizationError::AmbiguousFix`],
/// best first.
pub fn fuse_position(
    meas: &[BistaticMeasurement],
    init: Option<Vec2>,
) -> Result<PositionEstimate, LocalizationError> {
    validate(meas)?;
    let scale = meas.iter().map(|m| m.total_range_m).fold(0.0, f64::max);

    if let Some(start) = init {
        let p = refine(meas, start, scale)?;
        return Ok(estimate_at(meas, p));
    }

    let mut boxes = Vec::with_capacity(meas.len());
    for m in meas {
        boxes.push(BoundingBox::of_ellipse(m)?);
    }
    let mut region = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.intersect(*b));
    if region.is_empty() {
        region = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.union(*b));
    }
    let width = region.max.x - region.min.x;
    let height = region.max.y - region.min.y;
    let step = (width.hypot(height) / GRID_DIVISIONS).max(1e-9 * scale);
    let centre = Vec2::new(0.5 * (region.min.x + region.max.x), 0.5 * (region.min.y + region.max.y));
    let hx = (0.5 * width / step).ceil() as isize + 1;
    let hy = (0.5 * height / step).ceil() as isize + 1;
    let nx = (2 * hx + 1) as usize;
    let ny = (2 * hy + 1) as usize;

    let point = |i: usize, j: usize| {
        Vec2::new(
            centre.x + (i as isize - hx) as f64 * step,
            centre.y + (j as isize - hy) as f64 * step,
        )
    };
    let costs: Vec<f64> = (0..nx * ny)
        .map(|k| weighted_cost(meas, point(k % nx, k / nx)))
        .collect();
    let cost_at = |i: isize, j: isize| -> Option<f64> {
        (i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny).then(|| costs[j as usize * nx + i as usize])
    };

    let mut basins: Vec<(f64, Vec2)> = Vec::new();
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let c = costs[j as usize * nx + i as usize];
            let is_min = (-1..=1).all(|dj| {
                (-1..=1).all(|di| {
                    (di == 0 && dj == 0)
                        || cost_at(i + di, j + dj).is_none_or(|n| {
                            n > c || (n == c && (j + dj, i + di) > (j, i))
                        })
                })
            });
            if is_min {
                basins.push((c, point(i as usize, j as usize)));
            }
        }
    }
    basins.sort_by(|a, b| a.0.total_cmp(&b.0));
    basins.truncate(MAX_BASINS);

    let mut candidates: Vec<(f64, Vec2)> = Vec::new();
    let admit = |p: Vec2, candidates: &mut Vec<(f64, Vec2)>| {
        let c = weighted_cost(meas, p);
        if candidates.iter().all(|&(cq, q)| distinct_minima(meas, (c, p), (cq, q), scale)) {
            candidates.push((c, p));
        }
    };
    for (_, start) in basins {
        let Ok(p) = refine(meas, start, scale) else {
            continue;
        };
        admit(p, &mut candidates);
        // Nearly tangent ellipses put two roots close together along the
        // poorly constrained direction; probe both sides of it.
        if let Some(v) = weak_direction(normal_equations(meas, p).0) {
            for side in [-0.5, 0.5] {
                if let Ok(q) = refine(meas, p + v * (side * step), scale) {
                    admit(q, &mut candidates);
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(LocalizationError::NoConvergence);
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let best = candidates[0].0;
    let floor = 0.01 * meas.len() as f64;
    let rivals: Vec<PositionEstimate> = candidates
        .iter()
        .filter(|(c, _)| *c - best <= 0.1 * best + floor)
        .map(|(_, p)| estimate_at(meas, *p))
        .collect();
    if rivals.len() > 1 {
        return Err(LocalizationError::AmbiguousFix(rivals));
    }
    Ok(estimate_at(meas, candidates[0].1))
}
