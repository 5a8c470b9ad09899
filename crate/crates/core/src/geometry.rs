//! 2D multistatic scenes and single-bounce bistatic propagation paths.
//!
//! All nodes move with constant velocity; delay and Doppler are evaluated at
//! the frame start and held for the whole processing frame.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SPEED_OF_LIGHT;

/// Below this separation two positions count as the same point.
const MIN_RANGE_M: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("nodes '{0}' and '{1}' coincide")]
    CoincidentNodes(String, String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("node '{id}' is a {actual:?}, expected {expected:?}")]
    WrongKind {
        id: String,
        expected: NodeKind,
        actual: NodeKind,
    },
    #[error("carrier frequency must be positive")]
    InvalidCarrier,
    #[error("clutter node '{0}' must be static")]
    MovingClutter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Illuminator,
    Sensor,
    Target,
    Clutter,
}

fn unit_reflectivity() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(rename = "position_m")]
    pub position: Vec2,
    #[serde(rename = "velocity_mps", default)]
    pub velocity: Vec2,
    /// Amplitude scattering factor; only used for targets and clutter.
    #[serde(default = "unit_reflectivity")]
    pub reflectivity: f64,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind, position: Vec2, velocity: Vec2) -> Self {
        Self {
            id: id.into(),
            kind,
            position,
            velocity,
            reflectivity: 1.0,
        }
    }

    pub fn with_reflectivity(mut self, reflectivity: f64) -> Self {
        self.reflectivity = reflectivity;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    LineOfSight,
    Target,
    Clutter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub gain: Complex64,
    pub kind: PathKind,
    pub via_node: Option<String>,
}

impl Path {
    /// Bare path, mostly for tests and synthetic channels.
    pub fn new(delay_s: f64, doppler_hz: f64, gain: Complex64) -> Self {
        Self {
            delay_s,
            doppler_hz,
            gain,
            kind: PathKind::Target,
            via_node: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BistaticPair {
    pub id: String,
    pub tx_id: String,
    pub rx_id: String,
    pub tx_position: Vec2,
    pub rx_position: Vec2,
    pub baseline_m: f64,
}

/// Amplitude law `|g| = g0 * reflectivity * R_ref^2 / (r1 * r2)`, with the
/// direct path scaled to sit `los_excess_db` above the strongest scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainModel {
    #[serde(default = "unit_reflectivity")]
    pub g0: f64,
    pub reference_range_m: f64,
    pub los_excess_db: f64,
}

impl Default for GainModel {
    fn default() -> Self {
        Self {
            g0: 1.0,
            reference_range_m: 100.0,
            los_excess_db: 30.0,
        }
    }
}

/// Sum of the two bistatic legs `|s - tx| + |rx - s|`.
pub fn total_range(tx: Vec2, rx: Vec2, scatterer: Vec2) -> f64 {
    scatterer.distance(tx) + rx.distance(scatterer)
}

/// Time derivative of [`total_range`] for constant-velocity nodes.
pub fn total_range_rate(tx: &Node, rx: &Node, scatterer: &Node) -> f64 {
    let leg1 = scatterer.position - tx.position;
    let leg2 = rx.position - scatterer.position;
    let rate1 = leg1.dot(scatterer.velocity - tx.velocity) / leg1.norm();
    let rate2 = leg2.dot(rx.velocity - scatterer.velocity) / leg2.norm();
    rate1 + rate2
}

fn check_distinct(a: &Node, b: &Node) -> Result<f64, GeometryError> {
    let d = a.position.distance(b.position);
    if d < MIN_RANGE_M {
        Err(GeometryError::CoincidentNodes(a.id.clone(), b.id.clone()))
    } else {
        Ok(d)
    }
}

/// Single-bounce path `tx -> scatterer -> rx` with the given carrier phase.
pub fn bistatic_path(
    tx: &Node,
    rx: &Node,
    scatterer: &Node,
    carrier_frequency_hz: f64,
    gain_model: &GainModel,
    phase: f64,
) -> Result<Path, GeometryError> {
    if !(carrier_frequency_hz > 0.0) {
        return Err(GeometryError::InvalidCarrier);
    }
    let r1 = check_distinct(tx, scatterer)?;
    let r2 = check_distinct(scatterer, rx)?;
    let wavelength = SPEED_OF_LIGHT / carrier_frequency_hz;
    let rr = gain_model.reference_range_m;
    let magnitude = gain_model.g0 * scatterer.reflectivity * rr * rr / (r1 * r2);
    let kind = match scatterer.kind {
        NodeKind::Clutter => PathKind::Clutter,
        _ => PathKind::Target,
    };
    Ok(Path {
        delay_s: (r1 + r2) / SPEED_OF_LIGHT,
        doppler_hz: -total_range_rate(tx, rx, scatterer) / wavelength,
        gain: Complex64::from_polar(magnitude, phase),
        kind,
        via_node: Some(scatterer.id.clone()),
    })
}

/// Direct path with free-space amplitude `g0 * R_ref / baseline` and zero
/// phase.
pub fn los_path(
    tx: &Node,
    rx: &Node,
    carrier_frequency_hz: f64,
    gain_model: &GainModel,
) -> Result<Path, GeometryError> {
    if !(carrier_frequency_hz > 0.0) {
        return Err(GeometryError::InvalidCarrier);
    }
    let baseline = check_distinct(tx, rx)?;
    let los = rx.position - tx.position;
    let rate = los.dot(rx.velocity - tx.velocity) / baseline;
    let wavelength = SPEED_OF_LIGHT / carrier_frequency_hz;
    Ok(Path {
        delay_s: baseline / SPEED_OF_LIGHT,
        doppler_hz: -rate / wavelength,
        gain: Complex64::new(gain_model.g0 * gain_model.reference_range_m / baseline, 0.0),
        kind: PathKind::LineOfSight,
        via_node: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub nodes: Vec<Node>,
    pub carrier_frequency_hz: f64,
    pub gain: GainModel,
    /// Seeds the per-path scattering phases.
    pub seed: u64,
}

impl Scene {
    pub fn node(&self, id: &str) -> Result<&Node, GeometryError> {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .ok_or_else(|| GeometryError::UnknownNode(id.to_string()))
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.carrier_frequency_hz > 0.0) {
            return Err(GeometryError::InvalidCarrier);
        }
        for n in &self.nodes {
            if n.kind == NodeKind::Clutter && n.velocity != Vec2::ZERO {
                return Err(GeometryError::MovingClutter(n.id.clone()));
            }
        }
        Ok(())
    }

    pub fn pair(&self, id: &str, tx_id: &str, rx_id: &str) -> Result<BistaticPair, GeometryError> {
        let tx = self.node(tx_id)?;
        let rx = self.node(rx_id)?;
        expect_kind(tx, NodeKind::Illuminator)?;
        expect_kind(rx, NodeKind::Sensor)?;
        let baseline_m = check_distinct(tx, rx)?;
        Ok(BistaticPair {
            id: id.to_string(),
            tx_id: tx_id.to_string(),
            rx_id: rx_id.to_string(),
            tx_position: tx.position,
            rx_position: rx.position,
            baseline_m,
        })
    }

    fn sorted_ids(&self, kind: NodeKind) -> Vec<&Node> {
        let mut v: Vec<&Node> = self.nodes.iter().filter(|n| n.kind == kind).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Scattering phase for `scatterer` on this pair, uniform on `[0, 2pi)`.
    pub fn path_phase(&self, pair: &BistaticPair, scatterer_id: &str) -> f64 {
        let mut h = Fnv1a::new();
        h.write(pair.tx_id.as_bytes());
        h.write(&[0]);
        h.write(pair.rx_id.as_bytes());
        h.write(&[0]);
        h.write(scatterer_id.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish() ^ self.seed);
        rng.random::<f64>() * 2.0 * PI
    }
}

fn expect_kind(node: &Node, expected: NodeKind) -> Result<(), GeometryError> {
    if node.kind == expected {
        Ok(())
    } else {
        Err(GeometryError::WrongKind {
            id: node.id.clone(),
            expected,
            actual: node.kind,
        })
    }
}

/// Paths seen by one pair: the direct path first, then targets and clutter,
/// each sorted by node id.
pub fn enumerate_paths(scene: &Scene, pair: &BistaticPair) -> Result<Vec<Path>, GeometryError> {
    scene.validate()?;
    let tx = scene.node(&pair.tx_id)?;
    let rx = scene.node(&pair.rx_id)?;
    let mut los = los_path(tx, rx, scene.carrier_frequency_hz, &scene.gain)?;

    let mut scattered = Vec::new();
    for kind in [NodeKind::Target, NodeKind::Clutter] {
        for node in scene.sorted_ids(kind) {
            let phase = scene.path_phase(pair, &node.id);
            scattered.push(bistatic_path(
                tx,
                rx,
                node,
                scene.carrier_frequency_hz,
                &scene.gain,
                phase,
            )?);
        }
    }

    let strongest = |kind: PathKind| {
        scattered
            .iter()
            .filter(|p| p.kind == kind)
            .map(|p| p.gain.norm())
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))))
    };
    if let Some(reference) = strongest(PathKind::Target).or_else(|| strongest(PathKind::Clutter)) {
        let magnitude = reference * 10f64.powf(scene.gain.los_excess_db / 20.0);
        los.gain = Complex64::from_polar(magnitude, los.gain.arg());
    }

    let mut paths = Vec::with_capacity(1 + scattered.len());
    paths.push(los);
    paths.extend(scattered);
    Ok(paths)
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
