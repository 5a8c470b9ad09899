//! Scenario files and the per-pair processing pipeline behind `cpcl run`.
//!
//! A scenario is a JSON document with SI units spelled out in field names.
//! Every reference is resolved and every path is checked against the OFDM
//! numerology before any signal is generated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{apply_channel, check_paths, ChannelError};
use crate::detection::{cfar_detect_in, suppress_clutter, CfarConfig, Detection, SearchRegion};
use crate::dft::Window;
use crate::geometry::{enumerate_paths, BistaticPair, GainModel, Node, NodeKind, Path, Scene};
use crate::grid::{build_grid, random_allocation, Numerology, PrbTile, ResourceGrid, UserAllocation, UserId};
use crate::localization::{fuse_position, measurement_from_detection, LocalizationError, PositionEstimate};
use crate::mapfile::{render_heatmap, write_map};
use crate::receiver::{delay_transform, doppler_transform, estimate_channel, scattering_map, ScatteringMap};
use crate::SPEED_OF_LIGHT;

pub const DETECTIONS_HEADER: &str =
    "pair_id,delay_bin,doppler_bin,refined_delay_s,refined_doppler_hz,peak_power,snr_db";
pub const POSITIONS_HEADER: &str = "target_hint,x_m,y_m,residual_rms_m,n_pairs";

/// Dynamic range of the heatmap written next to each map.
const HEATMAP_FLOOR_DB: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Schema { message: String, line: Option<usize> },
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// 2 for schema problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Schema { .. } => 2,
            _ => 1,
        }
    }

    fn schema(message: impl Into<String>, line: Option<usize>) -> Self {
        ScenarioError::Schema {
            message: message.into(),
            line,
        }
    }

    fn io(path: &FsPath, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub id: String,
    pub tx: String,
    pub rx: String,
}

/// One run of PRBs `prb_col_start..prb_col_end` (end exclusive) in PRB row
/// `prb_row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileSpan {
    pub user: UserId,
    pub prb_row: usize,
    pub prb_col_start: usize,
    pub prb_col_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AllocationSpec {
    Full {
        #[serde(default = "first_user")]
        user: UserId,
    },
    Tiles {
        tiles: Vec<TileSpan>,
    },
    Random {
        density: f64,
        seed: u64,
        #[serde(default = "one_user")]
        users: u32,
    },
}

fn first_user() -> UserId {
    1
}

fn one_user() -> u32 {
    1
}

impl AllocationSpec {
    pub fn expand(&self, numerology: &Numerology) -> Vec<UserAllocation> {
        match self {
            AllocationSpec::Full { user } => vec![UserAllocation::full(*user, numerology)],
            AllocationSpec::Random { density, seed, users } => {
                random_allocation(numerology, *users, *density, *seed)
            }
            AllocationSpec::Tiles { tiles } => {
                let mut out: Vec<UserAllocation> = Vec::new();
                for span in tiles {
                    let idx = match out.iter().position(|a| a.user_id == span.user) {
                        Some(i) => i,
                        None => {
                            out.push(UserAllocation {
                                user_id: span.user,
                                tiles: Vec::new(),
                            });
                            out.len() - 1
                        }
                    };
                    for c in span.prb_col_start..span.prb_col_end {
                        out[idx].tiles.push(PrbTile {
                            prb_row: span.prb_row,
                            prb_col: c,
                        });
                    }
                }
                out
            }
        }
    }
}

/// Cells the detector searches, beyond which no target is expected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gates {
    /// Largest total range minus baseline.
    #[serde(default)]
    pub max_excess_range_m: Option<f64>,
    #[serde(default)]
    pub max_doppler_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub grid: u64,
    pub scene: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn from_base(base: u64) -> Self {
        Self {
            grid: base,
            scene: base.wrapping_add(1),
            noise: base.wrapping_add(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub numerology: Numerology,
    pub nodes: Vec<Node>,
    pub pairs: Vec<PairSpec>,
    pub allocation: AllocationSpec,
    /// Process only this user's resource elements.
    #[serde(default)]
    pub processing_user: Option<UserId>,
    /// Relative to the mean received power on allocated elements; `null`
    /// for a noiseless run.
    pub snr_db: Option<f64>,
    pub doppler_window_symbols: usize,
    #[serde(default)]
    pub delay_window: Window,
    #[serde(default)]
    pub doppler_window: Window,
    pub notch_half_width_bins: usize,
    pub cfar: CfarConfig,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub gain: GainModel,
    pub seeds: Seeds,
    #[serde(default)]
    pub localization: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// 1-based line of the first occurrence of `needle` in `source`.
fn locate(source: &str, needle: &str) -> Option<usize> {
    source
        .lines()
        .position(|l| l.contains(needle))
        .map(|i| i + 1)
}

/// Parse a scenario, or the scenario echoed inside a run manifest.
pub fn parse_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let scenario = match serde_json::from_str::<Scenario>(source) {
        Ok(s) => s,
        Err(err) => match serde_json::from_str::<Manifest>(source) {
            Ok(m) => m.scenario,
            Err(_) => {
                let line = (err.line() > 0).then_some(err.line());
                return Err(ScenarioError::schema(strip_position(&err), line));
            }
        },
    };
    validate(&scenario).map_err(|e| match e {
        ScenarioError::Schema { message, line: None } => {
            let line = anchor_of(&message).and_then(|n| locate(source, &n));
            ScenarioError::Schema { message, line }
        }
        other => other,
    })?;
    Ok(scenario)
}

fn strip_position(err: &serde_json::Error) -> String {
    let text = err.to_string();
    match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    }
}

/// Quoted token in a validation message, used to find its source line.
fn anchor_of(message: &str) -> Option<String> {
    let start = message.find('\'')?;
    let rest = &message[start + 1..];
    let end = rest.find('\'')?;
    Some(format!("\"{}\"", &rest[..end]))
}

pub fn load_scenario(path: &FsPath) -> Result<Scenario, ScenarioError> {
    let source = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    parse_scenario(&source)
}

impl Scenario {
    pub fn scene(&self) -> Scene {
        Scene {
            nodes: self.nodes.clone(),
            carrier_frequency_hz: self.numerology.carrier_frequency_hz,
            gain: self.gain,
            seed: self.seeds.scene,
        }
    }

    pub fn bistatic_pairs(&self) -> Result<Vec<BistaticPair>, ScenarioError> {
        let scene = self.scene();
        self.pairs
            .iter()
            .map(|p| {
                scene
                    .pair(&p.id, &p.tx, &p.rx)
                    .map_err(|e| ScenarioError::schema(format!("pair '{}': {e}", p.id), None))
            })
            .collect()
    }

    pub fn allocations(&self) -> Vec<UserAllocation> {
        self.allocation.expand(&self.numerology)
    }

    /// Transmit grid of an illuminator. Each illuminator draws its own
    /// symbols from the grid seed offset by its position in the node list.
    pub fn transmit_grid(&self, tx_id: &str) -> Result<ResourceGrid, ScenarioError> {
        let offset = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Illuminator)
            .position(|n| n.id == tx_id)
            .ok_or_else(|| ScenarioError::schema(format!("unknown illuminator '{tx_id}'"), None))?;
        build_grid(&self.numerology, &self.allocations(), self.seeds.grid.wrapping_add(offset as u64))
            .map_err(|e| ScenarioError::schema(format!("allocation: {e}"), None))
    }

    /// Detector search region for one pair.
    pub fn search_region(&self, pair: &BistaticPair, map: &ScatteringMap) -> SearchRegion {
        let rows = map.delay_bins();
        let los_bin = pair.baseline_m / SPEED_OF_LIGHT / map.delay_bin_s;
        let delay_bins = match self.gates.max_excess_range_m {
            Some(r) => {
                let lo = los_bin.floor() as usize;
                let hi = ((los_bin + r / SPEED_OF_LIGHT / map.delay_bin_s).ceil() as usize + 2).min(rows);
                lo.min(rows)..hi
            }
            None => 0..rows,
        };
        let half = (map.doppler_bins() / 2) as isize;
        let doppler_bins = match self.gates.max_doppler_hz {
            Some(f) => {
                let k = ((f / map.doppler_bin_hz).ceil() as isize + 1).min(half);
                -k..=k
            }
            None => -half..=half,
        };
        SearchRegion {
            delay_bins,
            doppler_bins,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(d) => PathBuf::from(d),
            None => PathBuf::from("out").join(&self.name),
        }
    }
}

/// Check every reference and physical constraint without generating signals.
pub fn validate(s: &Scenario) -> Result<(), ScenarioError> {
    let err = |m: String| ScenarioError::schema(m, None);
    let schema = |m: String| Err(err(m));
    s.numerology
        .validate()
        .or_else(|e| schema(format!("numerology: {e}")))?;
    for (i, n) in s.nodes.iter().enumerate() {
        if s.nodes[..i].iter().any(|o| o.id == n.id) {
            return schema(format!("duplicate node id '{}'", n.id));
        }
        if !(n.position.x.is_finite() && n.position.y.is_finite()) {
            return schema(format!("node '{}' has a non-finite position", n.id));
        }
    }
    if s.pairs.is_empty() {
        return schema("at least one pair is required".into());
    }
    for (i, p) in s.pairs.iter().enumerate() {
        if s.pairs[..i].iter().any(|o| o.id == p.id) {
            return schema(format!("duplicate pair id '{}'", p.id));
        }
    }
    let pairs = s.bistatic_pairs()?;
    let d = s.doppler_window_symbols;
    if d < 2 || d > s.numerology.symbols_per_frame {
        return schema(format!(
            "doppler_window_symbols must lie in [2, {}], got {d}",
            s.numerology.symbols_per_frame
        ));
    }
    s.cfar.validate().or_else(|e| schema(format!("cfar: {e}")))?;
    if 2 * (2 * s.notch_half_width_bins + 1) > d {
        return schema(format!(
            "notch_half_width_bins {} blanks more than half of {d} Doppler bins",
            s.notch_half_width_bins
        ));
    }
    if let AllocationSpec::Random { density, .. } = s.allocation {
        if !(0.0..=1.0).contains(&density) {
            return schema("allocation density must lie in [0, 1]".into());
        }
    }
    if let AllocationSpec::Tiles { tiles } = &s.allocation {
        if let Some(t) = tiles.iter().find(|t| t.prb_col_end < t.prb_col_start) {
            return schema(format!("tile of user {} ends before it starts", t.user));
        }
    }
    let grid = build_grid(&s.numerology, &s.allocations(), s.seeds.grid)
        .map_err(|e| err(format!("allocation: {e}")))?;
    if let Some(u) = s.processing_user {
        if grid.mask(u).is_none_or(|m| m.count() == 0) {
            return schema(format!("processing_user {u} owns no resource elements"));
        }
    }
    let scene = s.scene();
    for pair in &pairs {
        let paths = enumerate_paths(&scene, pair).map_err(|e| err(format!("pair '{}': {e}", pair.id)))?;
        if let Err(e) = check_paths(&s.numerology, &paths) {
            let culprit = offending_node(&s.numerology, &paths, &e);
            return schema(format!("pair '{}': {e}{culprit}", pair.id));
        }
    }
    Ok(())
}

fn offending_node(numerology: &Numerology, paths: &[Path], _err: &ChannelError) -> String {
    paths
        .iter()
        .find(|p| check_paths(numerology, std::slice::from_ref(*p)).is_err())
        .and_then(|p| p.via_node.as_ref())
        .map(|id| format!(" (via node '{id}')"))
        .unwrap_or_default()
}

/// Everything one pair produced.
#[derive(Debug, Clone)]
pub struct PairOutput {
    pub pair: BistaticPair,
    pub paths: Vec<Path>,
    /// Power-delay profile averaged over the Doppler window.
    pub delay_profile: Vec<f64>,
    pub map: ScatteringMap,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionRow {
    pub target_hint: String,
    pub estimate: PositionEstimate,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    pub pairs: Vec<PairOutput>,
    pub positions: Vec<PositionRow>,
    pub notes: Vec<String>,
}

/// Run the pipeline for one pair.
pub fn process_pair(s: &Scenario, pair: &BistaticPair, index: usize) -> Result<PairOutput, ScenarioError> {
    let runtime = |e: String| ScenarioError::Runtime(format!("pair '{}': {e}", pair.id));
    let grid = s.transmit_grid(&pair.tx_id)?;
    let paths = enumerate_paths(&s.scene(), pair).map_err(|e| runtime(e.to_string()))?;
    let frame = apply_channel(&grid, &paths, s.snr_db, s.seeds.noise.wrapping_add(index as u64))
        .map_err(|e| runtime(e.to_string()))?;
    let est = estimate_channel(&frame, &grid, s.processing_user)
        .and_then(|e| e.leading_symbols(s.doppler_window_symbols))
        .map_err(|e| runtime(e.to_string()))?;
    let cir = delay_transform(&est, s.delay_window).map_err(|e| runtime(e.to_string()))?;
    let delay_profile = cir.mean_power_profile();
    let sf = doppler_transform(&cir, s.doppler_window).map_err(|e| runtime(e.to_string()))?;
    let map = scattering_map(&sf);
    let notched = suppress_clutter(&map, s.notch_half_width_bins).map_err(|e| runtime(e.to_string()))?;
    let region = s.search_region(pair, &map);
    let detections = cfar_detect_in(&notched, &s.cfar, Some(&region)).map_err(|e| runtime(e.to_string()))?;
    Ok(PairOutput {
        pair: pair.clone(),
        paths,
        delay_profile,
        map,
        detections,
    })
}

fn target_hint(s: &Scenario) -> String {
    let targets: Vec<&Node> = s.nodes.iter().filter(|n| n.kind == NodeKind::Target).collect();
    match targets.as_slice() {
        [only] => only.id.clone(),
        _ => "unassociated".to_string(),
    }
}

/// Fuse the strongest detection of every pair into a fix.
pub fn localize(s: &Scenario, outputs: &[PairOutput], notes: &mut Vec<String>) -> Vec<PositionRow> {
    let mut meas = Vec::new();
    for out in outputs {
        let Some(det) = out.detections.first() else {
            continue;
        };
        let los_delay = out.pair.baseline_m / SPEED_OF_LIGHT;
        match measurement_from_detection(det, &out.pair, los_delay, out.map.delay_bin_s) {
            Ok(m) => meas.push(m),
            Err(e) => notes.push(format!("pair '{}' skipped: {e}", out.pair.id)),
        }
    }
    let hint = target_hint(s);
    match fuse_position(&meas, None) {
        Ok(est) => vec![PositionRow {
            target_hint: hint,
            estimate: est,
        }],
        Err(LocalizationError::AmbiguousFix(candidates)) => {
            notes.push(format!("ambiguous fix: {} candidates", candidates.len()));
            candidates
                .into_iter()
                .enumerate()
                .map(|(i, est)| PositionRow {
                    target_hint: if i == 0 { hint.clone() } else { format!("{hint}#{}", i + 1) },
                    estimate: est,
                })
                .collect()
        }
        Err(e) => {
            notes.push(format!("no position fix: {e}"));
            Vec::new()
        }
    }
}

/// Run every pair and, when enabled with two or more pairs, the fusion.
pub fn run(s: &Scenario) -> Result<RunReport, ScenarioError> {
    validate(s)?;
    let pairs = s.bistatic_pairs()?;
    let outputs = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| process_pair(s, p, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut notes = Vec::new();
    let positions = if s.localization && pairs.len() >= 2 {
        localize(s, &outputs, &mut notes)
    } else {
        Vec::new()
    };
    Ok(RunReport {
        scenario: s.clone(),
        pairs: outputs,
        positions,
        notes,
    })
}

pub fn detections_csv(pair_id: &str, dets: &[Detection]) -> String {
    let mut out = String::from(DETECTIONS_HEADER);
    out.push('\n');
    for d in dets {
        let _ = writeln!(
            out,
            "{pair_id},{},{},{:e},{},{:e},{}",
            d.delay_bin, d.doppler_bin, d.refined_delay_s, d.refined_doppler_hz, d.peak_power, d.snr_db
        );
    }
    out
}

pub fn positions_csv(rows: &[PositionRow]) -> String {
    let mut out = String::from(POSITIONS_HEADER);
    out.push('\n');
    for r in rows {
        let e = &r.estimate;
        let _ = writeln!(
            out,
            "{},{},{},{:e},{}",
            r.target_hint, e.position.x, e.position.y, e.residual_rms_m, e.pairs_used
        );
    }
    out
}

pub fn delay_profile_csv(profile: &[f64], delay_bin_s: f64) -> String {
    let mut out = String::from("delay_bin,delay_s,power,power_db\n");
    for (i, p) in profile.iter().enumerate() {
        let db = if *p > 0.0 { 10.0 * p.log10() } else { f64::NEG_INFINITY };
        let _ = writeln!(out, "{i},{:e},{:e},{db}", i as f64 * delay_bin_s, p);
    }
    out
}

/// Write all artifacts of `report` into `dir`; returns the file names.
pub fn write_artifacts(report: &RunReport, dir: &FsPath) -> Result<Vec<String>, ScenarioError> {
    fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    let mut names = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<(), ScenarioError> {
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| ScenarioError::io(&path, e))?;
        names.push(name);
        Ok(())
    };
    for out in &report.pairs {
        let id = &out.pair.id;
        let mut map_bytes = Vec::new();
        write_map(&mut map_bytes, &out.map).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
        put(format!("{id}.map"), &map_bytes)?;
        put(format!("{id}_detections.csv"), detections_csv(id, &out.detections).as_bytes())?;
        put(
            format!("{id}_delay_profile.csv"),
            delay_profile_csv(&out.delay_profile, out.map.delay_bin_s).as_bytes(),
        )?;
        put(format!("{id}.pgm"), &render_heatmap(&out.map, HEATMAP_FLOOR_DB))?;
    }
    if report.scenario.localization && report.pairs.len() >= 2 {
        put("positions.csv".to_string(), positions_csv(&report.positions).as_bytes())?;
    }
    names.push("manifest.json".to_string());
    let manifest = Manifest {
        tool: "cpcl".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: report.scenario.clone(),
        artifacts: names.clone(),
        notes: report.notes.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    let path = dir.join("manifest.json");
    fs::write(&path, text + "\n").map_err(|e| ScenarioError::io(&path, e))?;
    Ok(names)
}

/// Load, optionally override output directory and seeds, run and write.
pub fn run_scenario(
    path: &FsPath,
    out_dir: Option<&FsPath>,
    seed: Option<u64>,
) -> Result<(RunReport, PathBuf), ScenarioError> {
    let mut scenario = load_scenario(path)?;
    if let Some(base) = seed {
        scenario.seeds = Seeds::from_base(base);
    }
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => scenario.output_dir(),
    };
    let report = run(&scenario)?;
    write_artifacts(&report, &dir)?;
    Ok((report, dir))
}
