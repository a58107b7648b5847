//! Map-aware path-gain model.
//!
//! Log-distance path loss anchored at free space, with the exponent picked
//! by the UE's own landscape category, plus per-meter obstruction loss for
//! every building or forest cell the 2-D ray crosses, a parabolic sector
//! pattern and externally drawn log-normal shadowing. All quantities in dB.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{BaseStation, Deployment, LandscapeCategory, Point, SceneMap, UEDrop, UE_HEIGHT_M};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
pub const SECTOR_BEAMWIDTH_DEG: f64 = 65.0;
pub const SECTOR_MAX_LOSS_DB: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationParams {
    pub exponent_by_category: BTreeMap<LandscapeCategory, f64>,
    pub excess_db_per_m: BTreeMap<LandscapeCategory, f64>,
    pub shadow_sigma_db: f64,
    pub reference_distance_m: f64,
    pub min_gain_db: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        use LandscapeCategory::*;
        Self {
            exponent_by_category: [(Other, 2.0), (Barren, 2.0), (Street, 2.6), (Forest, 3.0), (Building, 3.2)]
                .into_iter()
                .collect(),
            excess_db_per_m: [(Other, 0.0), (Barren, 0.0), (Street, 0.0), (Forest, 0.15), (Building, 0.4)]
                .into_iter()
                .collect(),
            shadow_sigma_db: 4.0,
            reference_distance_m: 1.0,
            min_gain_db: -200.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        for cat in LandscapeCategory::ALL {
            let n = self
                .exponent_by_category
                .get(&cat)
                .ok_or_else(|| Error::InvalidParams(format!("missing exponent for {cat}")))?;
            if !(1.6..=6.0).contains(n) {
                return Err(Error::InvalidParams(format!("exponent {n} for {cat} outside [1.6, 6]")));
            }
            let e = self.excess_db_per_m.get(&cat).copied().unwrap_or(0.0);
            if !(e >= 0.0) {
                return Err(Error::InvalidParams(format!("excess loss for {cat} must be >= 0")));
            }
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::InvalidParams("shadow_sigma_db must be >= 0".into()));
        }
        if !(self.reference_distance_m > 0.0) {
            return Err(Error::InvalidParams("reference_distance_m must be > 0".into()));
        }
        // Nothing physical at d0 may fall to the floor, even at 100 GHz.
        if self.min_gain_db >= -free_space_reference(1.0e11, self.reference_distance_m) {
            return Err(Error::InvalidParams("min_gain_db is above the reference-distance gain".into()));
        }
        Ok(())
    }

    fn exponent(&self, cat: LandscapeCategory) -> f64 {
        self.exponent_by_category[&cat]
    }

    fn excess(&self, cat: LandscapeCategory) -> f64 {
        self.excess_db_per_m.get(&cat).copied().unwrap_or(0.0)
    }
}

/// One raster cell crossed by a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub category: LandscapeCategory,
    pub length_m: f64,
}

/// Walks the cells of segment `a → b` in order (Amanatides–Woo), handing
/// each cell's flat index and chord length to `visit`. Zero-length
/// touches (corners, starting on an edge) are skipped.
fn walk_segment(scene: &SceneMap, a: Point, b: Point, mut visit: impl FnMut(usize, f64)) -> Result<()> {
    let side = scene.side_m();
    for p in [a, b] {
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= side && p.y <= side) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let length = dx.hypot(dy);
    if length == 0.0 {
        return Ok(());
    }
    let cell = scene.cell_m();
    let n = scene.cells_per_side();
    let last = n as i64 - 1;
    let mut ix = ((a.x / cell).floor() as i64).min(last);
    let mut iy = ((a.y / cell).floor() as i64).min(last);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };

    // Ray parameter t ∈ [0, 1] and coordinate of the next column (row)
    // boundary, recomputed from the cell index so errors do not accumulate.
    let next_x = |ix: i64| -> (f64, f64) {
        if dx == 0.0 {
            return (f64::INFINITY, a.x);
        }
        let edge = if dx > 0.0 { (ix + 1) as f64 * cell } else { ix as f64 * cell };
        ((edge - a.x) / dx, edge)
    };
    let next_y = |iy: i64| -> (f64, f64) {
        if dy == 0.0 {
            return (f64::INFINITY, a.y);
        }
        let edge = if dy > 0.0 { (iy + 1) as f64 * cell } else { iy as f64 * cell };
        ((edge - a.y) / dy, edge)
    };

    let mut t = 0.0;
    let mut entry = a;
    loop {
        let ((tx, edge_x), (ty, edge_y)) = (next_x(ix), next_y(iy));
        let t_next = tx.min(ty).min(1.0);
        // Exit point snapped to the boundary it lies on.
        let exit = if t_next >= 1.0 {
            b
        } else if tx < ty {
            Point::new(edge_x, a.y + tx * dy)
        } else if ty < tx {
            Point::new(a.x + ty * dx, edge_y)
        } else {
            Point::new(edge_x, edge_y)
        };
        if t_next > t {
            let cx = ix.clamp(0, last) as usize;
            let cy = iy.clamp(0, last) as usize;
            visit(cy * n + cx, entry.distance(exit));
            t = t_next;
            entry = exit;
        }
        if t_next >= 1.0 {
            break;
        }
        if tx <= ty {
            ix += step_x;
        }
        if ty <= tx {
            iy += step_y;
        }
        if ix < 0 || iy < 0 || ix > last || iy > last {
            break;
        }
    }
    Ok(())
}

/// Cells crossed by `a → b` with their chord lengths, in traversal order.
/// Chord lengths sum to `|b − a|`.
pub fn raster_traverse(scene: &SceneMap, a: Point, b: Point) -> Result<Vec<Crossing>> {
    let mut out = Vec::new();
    walk_segment(scene, a, b, |idx, len| {
        out.push(Crossing { category: scene.grid()[idx], length_m: len })
    })?;
    Ok(out)
}

/// Free-space path loss at the reference distance: `20·log10(4π·d0·f/c)`.
pub fn free_space_reference(frequency_hz: f64, d0_m: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d0_m * frequency_hz / SPEED_OF_LIGHT_M_S).log10()
}

/// Parabolic horizontal pattern with a 65° beamwidth and a 30 dB floor.
pub fn sector_loss_db(offset_deg: f64) -> f64 {
    (12.0 * (offset_deg / SECTOR_BEAMWIDTH_DEG).powi(2)).min(SECTOR_MAX_LOSS_DB)
}

/// Compass bearing from `from` to `to`: 0° = +y, 90° = +x.
pub fn bearing_deg(from: Point, to: Point) -> f64 {
    (to.x - from.x).atan2(to.y - from.y).to_degrees().rem_euclid(360.0)
}

fn angular_offset_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Obstruction loss along the UE → station ray. For a rooftop station the
/// contiguous building run that ends at the station is its own building and
/// is not charged.
fn obstruction_db(scene: &SceneMap, station: &BaseStation, ue: Point, params: &PropagationParams) -> Result<f64> {
    let mut committed = 0.0;
    let mut pending_building = 0.0;
    walk_segment(scene, ue, station.position.ground(), |idx, len| {
        let cat = scene.grid()[idx];
        let loss = params.excess(cat) * len;
        if cat == LandscapeCategory::Building {
            pending_building += loss;
        } else {
            committed += pending_building + loss;
            pending_building = 0.0;
        }
    })?;
    if !station.rooftop {
        committed += pending_building;
    }
    Ok(committed)
}

/// Path gain (negative dB) from `station` to `ue`, floored at `min_gain_db`.
pub fn path_gain(
    scene: &SceneMap,
    station: &BaseStation,
    ue: &UEDrop,
    params: &PropagationParams,
    shadow_sample_db: f64,
) -> Result<f64> {
    let bs = station.position.ground();
    let horizontal = ue.position.distance(bs);
    let d = horizontal.hypot(station.position.z - UE_HEIGHT_M);
    let d0 = params.reference_distance_m;
    let n_ue = params.exponent(ue.category);

    let mut loss = free_space_reference(station.frequency_hz, d0) + 10.0 * n_ue * (d.max(d0) / d0).log10();
    loss += obstruction_db(scene, station, ue.position, params)?;
    if let Some(az) = station.sector_azimuth_deg {
        if horizontal > 0.0 {
            loss += sector_loss_db(angular_offset_deg(bearing_deg(bs, ue.position), az));
        }
    }
    Ok((-loss + shadow_sample_db).max(params.min_gain_db))
}

/// Gains to every station of a layer; index `i` holds station id `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathGainVector {
    pub gains_db: Vec<f64>,
}

/// One independent N(0, σ²) shadow draw per link, taken from `rng` in
/// station order.
pub fn path_gain_vector<R: Rng>(
    scene: &SceneMap,
    deployment: &Deployment,
    ue: &UEDrop,
    params: &PropagationParams,
    rng: &mut R,
) -> Result<PathGainVector> {
    let gains_db = deployment
        .stations
        .iter()
        .map(|station| {
            let z: f64 = rng.sample(StandardNormal);
            path_gain(scene, station, ue, params, params.shadow_sigma_db * z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathGainVector { gains_db })
}
