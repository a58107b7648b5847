//! Procedural landscape rasters, base-station layers and UE drops.
//!
//! A [`SceneMap`] is a square raster of [`LandscapeCategory`] cells with a
//! per-cell building height. Streets are full-length axis-aligned lanes,
//! buildings are rectangles, forest and barren land grow as random blobs,
//! and whatever is left becomes [`LandscapeCategory::Other`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::error::{Error, Result};
use crate::seeds;

/// Fixed receiver height of every UE, in meters.
pub const UE_HEIGHT_M: f64 = 1.5;
/// Mast height for stations that do not sit on a rooftop.
pub const MAST_HEIGHT_M: f64 = 25.0;
/// Antenna clearance above a rooftop.
pub const ROOFTOP_CLEARANCE_M: f64 = 3.0;
pub const BUILDING_HEIGHT_RANGE_M: (f64, f64) = (8.0, 40.0);
pub const DEFAULT_CELL_M: f64 = 5.0;

const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandscapeCategory {
    Other,
    Barren,
    Forest,
    Street,
    Building,
}

impl LandscapeCategory {
    pub const ALL: [LandscapeCategory; 5] = [
        LandscapeCategory::Other,
        LandscapeCategory::Barren,
        LandscapeCategory::Forest,
        LandscapeCategory::Street,
        LandscapeCategory::Building,
    ];

    pub fn code(self) -> u32 {
        match self {
            LandscapeCategory::Other => 0,
            LandscapeCategory::Barren => 4,
            LandscapeCategory::Forest => 7,
            LandscapeCategory::Street => 11,
            LandscapeCategory::Building => 15,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            LandscapeCategory::Other => "other",
            LandscapeCategory::Barren => "barren",
            LandscapeCategory::Forest => "forest",
            LandscapeCategory::Street => "street",
            LandscapeCategory::Building => "building",
        }
    }
}

impl fmt::Display for LandscapeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandscapeCategory {
    type Err = Error;

    /// Accepts either the lowercase name or the numeric code.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(code) = s.parse::<u32>() {
            return Self::from_code(code).ok_or(Error::InvalidCategory(code));
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown category name `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Input to [`generate_scene`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub side_m: f64,
    #[serde(default = "default_cell_m")]
    pub cell_m: f64,
    /// Target area fraction per category; the remainder becomes `Other`.
    pub category_mix: BTreeMap<LandscapeCategory, f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_cell_m() -> f64 {
    DEFAULT_CELL_M
}

impl SceneSpec {
    pub fn new(side_m: f64, cell_m: f64, mix: &[(LandscapeCategory, f64)], seed: u64) -> Self {
        Self {
            side_m,
            cell_m,
            category_mix: mix.iter().copied().collect(),
            seed,
        }
    }

    /// Named surrogate maps.
    ///
    /// `london-like` is a 1 km² urban mix with every category present.
    /// `skewed` is dominated by barren land (at least 3:1 against each
    /// other class), which is the setting where rebalancing matters.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        use LandscapeCategory::*;
        let mix: &[(LandscapeCategory, f64)] = match name {
            "london-like" => &[(Street, 0.25), (Building, 0.35), (Forest, 0.15), (Barren, 0.15)],
            "skewed" => &[(Barren, 0.52), (Street, 0.14), (Building, 0.14), (Forest, 0.06)],
            other => return Err(Error::InvalidSpec(format!("unknown scene preset `{other}`"))),
        };
        Ok(Self::new(1000.0, DEFAULT_CELL_M, mix, seed))
    }

    /// Parses `street=0.25,building=0.35` style mixes.
    pub fn parse_mix(text: &str) -> Result<BTreeMap<LandscapeCategory, f64>> {
        let mut mix = BTreeMap::new();
        for part in text.split(',').filter(|p| !p.trim().is_empty()) {
            let (name, frac) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("mix entry `{part}` is not cat=frac")))?;
            let cat: LandscapeCategory = name.parse()?;
            let frac: f64 = frac
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad fraction in `{part}`")))?;
            mix.insert(cat, frac);
        }
        Ok(mix)
    }

    fn cells_per_side(&self) -> Result<usize> {
        if !(self.side_m > 0.0 && self.cell_m > 0.0) {
            return Err(Error::InvalidSpec("side_m and cell_m must be positive".into()));
        }
        let ratio = self.side_m / self.cell_m;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "side_m {} is not a multiple of cell_m {}",
                self.side_m, self.cell_m
            )));
        }
        Ok(n as usize)
    }

    fn validate_mix(&self) -> Result<()> {
        let mut total = 0.0;
        for (cat, &f) in &self.category_mix {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::InvalidSpec(format!("fraction for {cat} must be >= 0")));
            }
            total += f;
        }
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidSpec(format!("category fractions sum to {total:.3} > 1")));
        }
        Ok(())
    }
}

/// Rasterized landscape. Row `r`, column `c` covers
/// `[c·cell, (c+1)·cell) × [r·cell, (r+1)·cell)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneMap {
    side_m: f64,
    cell_m: f64,
    cells_per_side: usize,
    seed: u64,
    grid: Vec<LandscapeCategory>,
    heights: Vec<f64>,
}

impl SceneMap {
    /// Builds a scene from raw rasters, checking the raster invariants.
    pub fn from_parts(
        side_m: f64,
        cell_m: f64,
        seed: u64,
        grid: Vec<LandscapeCategory>,
        heights: Vec<f64>,
    ) -> Result<Self> {
        let n = SceneSpec { side_m, cell_m, category_mix: BTreeMap::new(), seed }.cells_per_side()?;
        if grid.len() != n * n || heights.len() != n * n {
            return Err(Error::InvalidSpec(format!("raster must hold {n}x{n} cells")));
        }
        for (cat, &h) in grid.iter().zip(&heights) {
            let is_building = *cat == LandscapeCategory::Building;
            if is_building != (h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidSpec(
                    "building height must be > 0 exactly on building cells".into(),
                ));
            }
        }
        Ok(Self { side_m, cell_m, cells_per_side: n, seed, grid, heights })
    }

    /// A scene where every cell carries the same (non-building) category.
    pub fn uniform(side_m: f64, cell_m: f64, category: LandscapeCategory) -> Result<Self> {
        let spec = SceneSpec::new(side_m, cell_m, &[(category, 1.0)], 0);
        generate_scene(&spec)
    }

    pub fn side_m(&self) -> f64 {
        self.side_m
    }

    pub fn cell_m(&self) -> f64 {
        self.cell_m
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> &[LandscapeCategory] {
        &self.grid
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn cell(&self, row: usize, col: usize) -> LandscapeCategory {
        self.grid[row * self.cells_per_side + col]
    }

    pub fn height(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cells_per_side + col]
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.side_m && p.y < self.side_m
    }

    /// `(row, col)` of the cell whose half-open extent contains `p`.
    pub fn cell_of(&self, p: Point) -> Result<(usize, usize)> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        let last = self.cells_per_side - 1;
        let col = ((p.x / self.cell_m).floor() as usize).min(last);
        let row = ((p.y / self.cell_m).floor() as usize).min(last);
        Ok((row, col))
    }

    pub fn category_counts(&self) -> BTreeMap<LandscapeCategory, usize> {
        let mut counts = BTreeMap::new();
        for &c in &self.grid {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    }

    /// Realized area fraction per category: exact cell count over total cells.
    pub fn fractions(&self) -> BTreeMap<LandscapeCategory, f64> {
        let total = self.grid.len() as f64;
        self.category_counts()
            .into_iter()
            .map(|(c, n)| (c, n as f64 / total))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_json_with(None)
    }

    pub fn to_json_with(&self, provenance: Option<&Provenance>) -> Result<String> {
        let file = SceneFile {
            format: FORMAT_VERSION,
            provenance: provenance.cloned(),
            side_m: self.side_m,
            cell_m: self.cell_m,
            seed: self.seed,
            category_registry: LandscapeCategory::ALL
                .iter()
                .map(|c| RegistryEntry { code: c.code(), name: c.name().to_string() })
                .collect(),
            cells_per_side: self.cells_per_side,
            grid_rle: run_length_encode(self.grid.iter().map(|c| c.code())),
            height_rle: run_length_encode(self.heights.iter().copied()),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        if file.format != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported scene format {}", file.format)));
        }
        let grid = run_length_decode(&file.grid_rle)
            .into_iter()
            .map(|code| LandscapeCategory::from_code(code).ok_or(Error::InvalidCategory(code)))
            .collect::<Result<Vec<_>>>()?;
        let heights = run_length_decode(&file.height_rle);
        let scene = Self::from_parts(file.side_m, file.cell_m, file.seed, grid, heights)?;
        if scene.cells_per_side != file.cells_per_side {
            return Err(Error::Format("cells_per_side disagrees with side_m/cell_m".into()));
        }
        Ok(scene)
    }
}

#[derive(Serialize, Deserialize)]
struct RegistryEntry {
    code: u32,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    side_m: f64,
    cell_m: f64,
    seed: u64,
    category_registry: Vec<RegistryEntry>,
    cells_per_side: usize,
    /// `[value, run]` pairs, row-major.
    grid_rle: Vec<(u32, usize)>,
    height_rle: Vec<(f64, usize)>,
}

fn run_length_encode<T: PartialEq + Copy>(values: impl IntoIterator<Item = T>) -> Vec<(T, usize)> {
    let mut runs: Vec<(T, usize)> = Vec::new();
    for v in values {
        match runs.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => runs.push((v, 1)),
        }
    }
    runs
}

fn run_length_decode<T: Copy>(runs: &[(T, usize)]) -> Vec<T> {
    runs.iter()
        .flat_map(|&(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

/// Label oracle: category of the raster cell containing `position`.
pub fn category_at(scene: &SceneMap, position: Point) -> Result<LandscapeCategory> {
    let (row, col) = scene.cell_of(position)?;
    Ok(scene.cell(row, col))
}

struct Builder<'a> {
    n: usize,
    grid: Vec<Option<LandscapeCategory>>,
    heights: Vec<f64>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn lane_gain(&self, horizontal: bool, offset: usize, width: usize) -> usize {
        let mut added = 0;
        for k in offset..offset + width {
            for j in 0..self.n {
                let idx = if horizontal { k * self.n + j } else { j * self.n + k };
                if self.grid[idx].is_none() {
                    added += 1;
                }
            }
        }
        added
    }

    fn paint_lane(&mut self, horizontal: bool, offset: usize, width: usize) {
        for k in offset..offset + width {
            for j in 0..self.n {
                let idx = if horizontal { k * self.n + j } else { j * self.n + k };
                self.grid[idx].get_or_insert(LandscapeCategory::Street);
            }
        }
    }

    /// Full-length lanes of alternating orientation. Every horizontal lane
    /// crosses every vertical one, so the network stays connected.
    fn streets(&mut self, target: usize, lane_cells: usize) {
        let mut have = 0;
        let mut horizontal = self.rng.random_bool(0.5);
        let mut misses = 0;
        while have < target && misses < 64 {
            let width = (lane_cells + self.rng.random_range(0..=1)).clamp(1, self.n);
            let width = width.min(self.n);
            let offset = self.rng.random_range(0..=self.n - width);
            let gain = self.lane_gain(horizontal, offset, width);
            // Accept the lane only if it moves the count closer to the target.
            if gain > 0 && (have + gain).abs_diff(target) < have.abs_diff(target) {
                self.paint_lane(horizontal, offset, width);
                have += gain;
                horizontal = !horizontal;
                misses = 0;
            } else {
                misses += 1;
                if misses % 8 == 0 {
                    horizontal = !horizontal;
                }
            }
        }
    }

    /// Rectangles with one height each, clipped to the remaining quota.
    fn buildings(&mut self, target: usize, min_side: usize, max_side: usize) {
        let mut have = 0;
        let mut attempts = 0;
        let (h_lo, h_hi) = BUILDING_HEIGHT_RANGE_M;
        while have < target && attempts < 50 * self.n * self.n {
            attempts += 1;
            let w = self.rng.random_range(min_side..=max_side).min(self.n);
            let h = self.rng.random_range(min_side..=max_side).min(self.n);
            let r0 = self.rng.random_range(0..=self.n - h);
            let c0 = self.rng.random_range(0..=self.n - w);
            let height = self.rng.random_range(h_lo..=h_hi);
            for r in r0..r0 + h {
                for c in c0..c0 + w {
                    let idx = r * self.n + c;
                    if have < target && self.grid[idx].is_none() {
                        self.grid[idx] = Some(LandscapeCategory::Building);
                        self.heights[idx] = height;
                        have += 1;
                    }
                }
            }
        }
        // Fragmented leftovers: fill free cells in scan order.
        if have < target {
            let height = self.rng.random_range(h_lo..=h_hi);
            for idx in 0..self.grid.len() {
                if have < target && self.grid[idx].is_none() {
                    self.grid[idx] = Some(LandscapeCategory::Building);
                    self.heights[idx] = height;
                    have += 1;
                }
            }
        }
    }

    /// Eden growth from random seeds; blob sizes are drawn around `blob_cells`.
    fn blobs(&mut self, cat: LandscapeCategory, target: usize, blob_cells: usize) {
        let mut have = 0;
        let mut frontier: Vec<usize> = Vec::new();
        let mut blob_left = 0usize;
        while have < target {
            if frontier.is_empty() || blob_left == 0 {
                let free: Vec<usize> = (0..self.grid.len()).filter(|&i| self.grid[i].is_none()).collect();
                let Some(&seed) = free.choose(self.rng) else { break };
                frontier.clear();
                frontier.push(seed);
                blob_left = self.rng.random_range(blob_cells / 2..=blob_cells * 3 / 2).max(1);
            }
            let pick = self.rng.random_range(0..frontier.len());
            let idx = frontier.swap_remove(pick);
            if self.grid[idx].is_some() {
                continue;
            }
            self.grid[idx] = Some(cat);
            have += 1;
            blob_left -= 1;
            let (r, c) = (idx / self.n, idx % self.n);
            if r > 0 {
                frontier.push(idx - self.n);
            }
            if r + 1 < self.n {
                frontier.push(idx + self.n);
            }
            if c > 0 {
                frontier.push(idx - 1);
            }
            if c + 1 < self.n {
                frontier.push(idx + 1);
            }
            frontier.retain(|&i| self.grid[i].is_none());
        }
    }
}

/// Generates a procedural landscape. Deterministic for a fixed spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneMap> {
    let n = spec.cells_per_side()?;
    spec.validate_mix()?;
    let total = n * n;
    let quota = |cat| {
        let f = spec.category_mix.get(&cat).copied().unwrap_or(0.0);
        ((f * total as f64).round() as usize).min(total)
    };
    let cells = |meters: f64| ((meters / spec.cell_m).round() as usize).max(1);

    let mut rng = seeds::stream(spec.seed, seeds::SCENE, 0);
    let mut b = Builder { n, grid: vec![None; total], heights: vec![0.0; total], rng: &mut rng };

    b.streets(quota(LandscapeCategory::Street), cells(15.0));
    b.buildings(quota(LandscapeCategory::Building), cells(20.0), cells(80.0));
    b.blobs(LandscapeCategory::Forest, quota(LandscapeCategory::Forest), cells(60.0).pow(2));
    b.blobs(LandscapeCategory::Barren, quota(LandscapeCategory::Barren), cells(80.0).pow(2));

    let grid = b.grid.into_iter().map(|c| c.unwrap_or(LandscapeCategory::Other)).collect();
    SceneMap::from_parts(spec.side_m, spec.cell_m, spec.seed, grid, b.heights)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub fn ground(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    /// 1-based index; feature `g_i` is the gain to station `i`.
    pub id: u32,
    pub position: Position3,
    pub frequency_hz: f64,
    /// Boresight in compass degrees (0 = +y, 90 = +x); `None` for omni.
    pub sector_azimuth_deg: Option<f64>,
    /// Mounted on a building roof; the roof's own building does not obstruct.
    #[serde(default)]
    pub rooftop: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPreset {
    pub layer_name: String,
    /// Station count for omni layers, site count for sectored layers.
    pub count: usize,
    pub frequency_hz: f64,
    pub sectored: bool,
    #[serde(default)]
    pub seed: u64,
}

pub const SECTOR_AZIMUTHS_DEG: [f64; 3] = [0.0, 120.0, 240.0];

impl DeploymentPreset {
    /// 20 omnidirectional stations at 800 MHz.
    pub fn london_low(seed: u64) -> Self {
        Self { layer_name: "london-low".into(), count: 20, frequency_hz: 8.0e8, sectored: false, seed }
    }

    /// 18 three-sector sites (54 cells) at 5 GHz.
    pub fn london_high(seed: u64) -> Self {
        Self { layer_name: "london-high".into(), count: 18, frequency_hz: 5.0e9, sectored: true, seed }
    }

    pub fn named(name: &str, seed: u64) -> Result<Self> {
        match name {
            "london-low" => Ok(Self::london_low(seed)),
            "london-high" => Ok(Self::london_high(seed)),
            other => Err(Error::InvalidSpec(format!("unknown deployment preset `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub layer_name: String,
    pub frequency_hz: f64,
    pub stations: Vec<BaseStation>,
}

#[derive(Serialize, Deserialize)]
struct DeploymentFile {
    format: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    layer_name: String,
    frequency_hz: f64,
    k: usize,
    /// Presets are stand-ins; heights and spacing are not measured values.
    surrogate: bool,
    stations: Vec<BaseStation>,
}

impl Deployment {
    pub fn k(&self) -> usize {
        self.stations.len()
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_json_with(None)
    }

    pub fn to_json_with(&self, provenance: Option<&Provenance>) -> Result<String> {
        let file = DeploymentFile {
            format: FORMAT_VERSION,
            provenance: provenance.cloned(),
            layer_name: self.layer_name.clone(),
            frequency_hz: self.frequency_hz,
            k: self.k(),
            surrogate: true,
            stations: self.stations.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DeploymentFile = serde_json::from_str(text)?;
        if file.format != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported deployment format {}", file.format)));
        }
        if file.k != file.stations.len() {
            return Err(Error::Format("k disagrees with the station list".into()));
        }
        let dep = Self { layer_name: file.layer_name, frequency_hz: file.frequency_hz, stations: file.stations };
        dep.validate()?;
        Ok(dep)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.stations.iter().enumerate() {
            if s.id as usize != i + 1 {
                return Err(Error::Format("station ids must run 1..K in order".into()));
            }
            if s.frequency_hz != self.frequency_hz {
                return Err(Error::Format("stations must share one frequency".into()));
            }
            if !(s.position.z > 0.0) {
                return Err(Error::Format(format!("station {} has z <= 0", s.id)));
            }
        }
        Ok(())
    }
}

/// Places sites on a jittered grid. A site landing on a building goes on
/// its roof (`height + 3 m`); elsewhere it gets a 25 m mast.
pub fn deploy_basestations(scene: &SceneMap, preset: &DeploymentPreset) -> Result<Deployment> {
    if preset.count == 0 {
        return Err(Error::InvalidSpec("deployment needs at least one site".into()));
    }
    if !(preset.frequency_hz > 0.0) {
        return Err(Error::InvalidSpec("frequency must be positive".into()));
    }
    let n = scene.cells_per_side();
    if preset.count > n * n {
        return Err(Error::PlacementFailure(format!(
            "{} sites do not fit on {} cells",
            preset.count,
            n * n
        )));
    }
    let mut rng = seeds::stream(preset.seed, seeds::DEPLOYMENT, 0);
    let cols = (preset.count as f64).sqrt().ceil() as usize;
    let rows = preset.count.div_ceil(cols);
    let side = scene.side_m();
    let (dx, dy) = (side / cols as f64, side / rows as f64);
    let margin = 0.5 * scene.cell_m();

    let mut stations = Vec::new();
    let mut used_cells = std::collections::BTreeSet::new();
    for site in 0..preset.count {
        let (r, c) = (site / cols, site % cols);
        let mut placed = None;
        for _ in 0..100 {
            let jx = rng.random_range(-0.25..=0.25) * dx;
            let jy = rng.random_range(-0.25..=0.25) * dy;
            let x = ((c as f64 + 0.5) * dx + jx).clamp(margin, side - margin);
            let y = ((r as f64 + 0.5) * dy + jy).clamp(margin, side - margin);
            let p = Point::new(x, y);
            let cell = scene.cell_of(p)?;
            if used_cells.insert(cell) {
                placed = Some((p, cell));
                break;
            }
        }
        let Some((p, (row, col))) = placed else {
            return Err(Error::PlacementFailure(format!("no free cell for site {}", site + 1)));
        };
        let rooftop = scene.cell(row, col) == LandscapeCategory::Building;
        let z = if rooftop { scene.height(row, col) + ROOFTOP_CLEARANCE_M } else { MAST_HEIGHT_M };
        let position = Position3 { x: p.x, y: p.y, z };
        let azimuths: Vec<Option<f64>> = if preset.sectored {
            SECTOR_AZIMUTHS_DEG.iter().map(|&a| Some(a)).collect()
        } else {
            vec![None]
        };
        for sector_azimuth_deg in azimuths {
            stations.push(BaseStation {
                id: stations.len() as u32 + 1,
                position,
                frequency_hz: preset.frequency_hz,
                sector_azimuth_deg,
                rooftop,
            });
        }
    }
    Ok(Deployment { layer_name: preset.layer_name.clone(), frequency_hz: preset.frequency_hz, stations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UEDrop {
    pub position: Point,
    pub category: LandscapeCategory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropSampling {
    /// Uniform over the whole footprint.
    Uniform,
    /// Equal counts per listed category, uniform within each category.
    Stratified(Vec<LandscapeCategory>),
}

impl DropSampling {
    /// Stratified over every category present in `scene`.
    pub fn stratified_present(scene: &SceneMap) -> Self {
        DropSampling::Stratified(scene.category_counts().into_keys().collect())
    }
}

fn point_in_cell(scene: &SceneMap, idx: usize, rng: &mut ChaCha8Rng) -> Point {
    let n = scene.cells_per_side();
    let (row, col) = (idx / n, idx % n);
    let cell = scene.cell_m();
    let x = (col as f64 + rng.random::<f64>()) * cell;
    let y = (row as f64 + rng.random::<f64>()) * cell;
    // Guard the half-open upper edge against rounding.
    let clamp = |v: f64, lo: f64| v.clamp(lo, lo + cell * (1.0 - 1e-12));
    Point::new(clamp(x, col as f64 * cell), clamp(y, row as f64 * cell))
}

/// Drops `count` UEs and labels each by the cell it lands in.
pub fn sample_ue_drops(scene: &SceneMap, count: usize, seed: u64, sampling: &DropSampling) -> Result<Vec<UEDrop>> {
    if count == 0 {
        return Err(Error::InvalidInput("drop count must be >= 1".into()));
    }
    let mut rng = seeds::stream(seed, seeds::DROPS, 0);
    let label = |p: Point| -> Result<UEDrop> { Ok(UEDrop { position: p, category: category_at(scene, p)? }) };
    match sampling {
        DropSampling::Uniform => {
            let total = scene.grid().len();
            (0..count)
                .map(|_| {
                    let idx = rng.random_range(0..total);
                    label(point_in_cell(scene, idx, &mut rng))
                })
                .collect()
        }
        DropSampling::Stratified(categories) => {
            if categories.is_empty() {
                return Err(Error::InvalidInput("stratified sampling needs categories".into()));
            }
            let mut per_cat: Vec<Vec<usize>> = Vec::new();
            for &cat in categories {
                let cells: Vec<usize> =
                    (0..scene.grid().len()).filter(|&i| scene.grid()[i] == cat).collect();
                if cells.is_empty() {
                    return Err(Error::MissingCategory(cat.code()));
                }
                per_cat.push(cells);
            }
            let base = count / categories.len();
            let extra = count % categories.len();
            let mut drops = Vec::with_capacity(count);
            for (k, cells) in per_cat.iter().enumerate() {
                let quota = base + usize::from(k < extra);
                for _ in 0..quota {
                    let idx = *cells.choose(&mut rng).expect("non-empty");
                    drops.push(label(point_in_cell(scene, idx, &mut rng))?);
                }
            }
            Ok(drops)
        }
    }
}
