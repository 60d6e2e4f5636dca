//! Manhattan-style urban maps, building ray casting and the two propagation
//! segment oracles (map-derived and synthetic nested).

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_two_pi, Heights, Point2, Point3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("extent {width} x {height} m is too small for one block of {block} m plus {street} m of street")]
    ExtentTooSmall {
        width: f64,
        height: f64,
        block: f64,
        street: f64,
    },
    #[error("invalid height range [{min}, {max}]")]
    InvalidHeightRange { min: f64, max: f64 },
    #[error("invalid block spec: {0}")]
    InvalidBlockSpec(String),
    #[error("map parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("segment index {k} outside 1..={num_segments}")]
    SegmentOutOfRange { k: usize, num_segments: usize },
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Open-interior test; points on the boundary are outside.
    pub fn contains_strict(&self, p: Point2) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub footprint: Rect,
    pub height: f64,
}

/// City-block layout parameters for [`generate_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    /// Side length of a square block between streets.
    pub block_size: f64,
    pub street_width: f64,
    /// Each block is split into `1..=max_lots` lots along each axis.
    pub max_lots: usize,
    /// Gap between neighbouring lots inside a block.
    pub alley_width: f64,
    /// Probability that a lot is left without a building.
    pub open_lot_prob: f64,
}

impl Default for BlockSpec {
    fn default() -> Self {
        Self {
            block_size: 80.0,
            street_width: 20.0,
            max_lots: 2,
            alley_width: 4.0,
            open_lot_prob: 0.1,
        }
    }
}

impl BlockSpec {
    fn validate(&self) -> Result<(), TerrainError> {
        let bad = |m: &str| Err(TerrainError::InvalidBlockSpec(m.to_string()));
        if !(self.block_size > 0.0) {
            return bad("block_size must be positive");
        }
        if !(self.street_width >= 0.0) {
            return bad("street_width must be non-negative");
        }
        if self.max_lots == 0 {
            return bad("max_lots must be at least 1");
        }
        if !(self.alley_width >= 0.0)
            || self.alley_width * (self.max_lots as f64 - 1.0) >= self.block_size
        {
            return bad("alley_width leaves no room for buildings");
        }
        if !(0.0..1.0).contains(&self.open_lot_prob) {
            return bad("open_lot_prob must be in [0, 1)");
        }
        Ok(())
    }
}

/// Uniform grid over the map extent listing the buildings touching each cell.
#[derive(Debug, Clone, Default)]
struct CellIndex {
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

const INDEX_CELL_M: f64 = 25.0;

impl CellIndex {
    fn build(extent: &Rect, buildings: &[Building]) -> Self {
        let cell = INDEX_CELL_M;
        let nx = ((extent.width() / cell).ceil() as usize).max(1);
        let ny = ((extent.height() / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        let mut index = Self {
            cell,
            nx,
            ny,
            cells: Vec::new(),
        };
        for (id, b) in buildings.iter().enumerate() {
            let (i0, j0) = index.cell_of(extent, b.footprint.x_min, b.footprint.y_min);
            let (i1, j1) = index.cell_of(extent, b.footprint.x_max, b.footprint.y_max);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * nx + i].push(id as u32);
                }
            }
        }
        index.cells = cells;
        index
    }

    fn cell_of(&self, extent: &Rect, x: f64, y: f64) -> (usize, usize) {
        let fx = ((x - extent.x_min) / self.cell).floor();
        let fy = ((y - extent.y_min) / self.cell).floor();
        let i = (fx.max(0.0) as usize).min(self.nx - 1);
        let j = (fy.max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    /// Visits every cell crossed by the horizontal segment `a -> b` (grid traversal).
    fn for_each_cell(
        &self,
        extent: &Rect,
        a: Point2,
        b: Point2,
        mut visit: impl FnMut(usize) -> bool,
    ) {
        let Some((a, b)) = clip_segment(extent, a, b) else {
            return;
        };
        let (mut i, mut j) = self.cell_of(extent, a.x, a.y);
        let (ie, je) = self.cell_of(extent, b.x, b.y);
        let d = b - a;
        let step_i: isize = if d.x > 0.0 { 1 } else { -1 };
        let step_j: isize = if d.y > 0.0 { 1 } else { -1 };
        let boundary = |idx: usize, step: isize, origin: f64| {
            let k = if step > 0 { idx + 1 } else { idx };
            origin + k as f64 * self.cell
        };
        let mut t_max_x = if d.x != 0.0 {
            (boundary(i, step_i, extent.x_min) - a.x) / d.x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if d.y != 0.0 {
            (boundary(j, step_j, extent.y_min) - a.y) / d.y
        } else {
            f64::INFINITY
        };
        let t_dx = if d.x != 0.0 {
            self.cell / d.x.abs()
        } else {
            f64::INFINITY
        };
        let t_dy = if d.y != 0.0 {
            self.cell / d.y.abs()
        } else {
            f64::INFINITY
        };
        let max_iter = self.nx + self.ny + 4;
        for _ in 0..max_iter {
            if !visit(j * self.nx + i) {
                return;
            }
            if i == ie && j == je {
                return;
            }
            if t_max_x < t_max_y {
                if t_max_x > 1.0 {
                    return;
                }
                let ni = i as isize + step_i;
                if ni < 0 || ni >= self.nx as isize {
                    return;
                }
                i = ni as usize;
                t_max_x += t_dx;
            } else {
                if t_max_y > 1.0 {
                    return;
                }
                let nj = j as isize + step_j;
                if nj < 0 || nj >= self.ny as isize {
                    return;
                }
                j = nj as usize;
                t_max_y += t_dy;
            }
        }
    }
}

/// Liang-Barsky clipping of `a -> b` against `r`.
fn clip_segment(r: &Rect, a: Point2, b: Point2) -> Option<(Point2, Point2)> {
    let d = b - a;
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [
        (-d.x, a.x - r.x_min),
        (d.x, r.x_max - a.x),
        (-d.y, a.y - r.y_min),
        (d.y, r.y_max - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    Some((a + d * t0, a + d * t1))
}

/// Whether the open segment `a -> b` passes through the solid box of `b`.
fn segment_hits_building(a: Point3, b: Point3, building: &Building) -> bool {
    let f = &building.footprint;
    let mut t_lo: f64 = 0.0;
    let mut t_hi: f64 = 1.0;
    for (start, delta, lo, hi) in [
        (a.x, b.x - a.x, f.x_min, f.x_max),
        (a.y, b.y - a.y, f.y_min, f.y_max),
        (a.z, b.z - a.z, 0.0, building.height),
    ] {
        if delta == 0.0 {
            if start < lo || start > hi {
                return false;
            }
        } else {
            let (mut t0, mut t1) = ((lo - start) / delta, (hi - start) / delta);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_lo = t_lo.max(t0);
            t_hi = t_hi.min(t1);
            if t_hi - t_lo <= 1e-12 {
                return false;
            }
        }
    }
    t_hi - t_lo > 1e-12
}

/// Buildings on a rectangular extent, with a spatial index for ray casting.
#[derive(Debug, Clone)]
pub struct UrbanMap {
    extent: Rect,
    buildings: Vec<Building>,
    index: CellIndex,
}

impl PartialEq for UrbanMap {
    fn eq(&self, other: &Self) -> bool {
        self.extent == other.extent && self.buildings == other.buildings
    }
}

impl UrbanMap {
    pub fn new(extent: Rect, buildings: Vec<Building>) -> Result<Self, TerrainError> {
        if !(extent.width() > 0.0 && extent.height() > 0.0) {
            return Err(TerrainError::InvalidMap(
                "extent must have positive width and height".into(),
            ));
        }
        for (i, b) in buildings.iter().enumerate() {
            let f = &b.footprint;
            if !(f.width() > 0.0 && f.height() > 0.0 && b.height > 0.0) {
                return Err(TerrainError::InvalidMap(format!(
                    "building {i} has a non-positive dimension"
                )));
            }
            if f.x_min < extent.x_min
                || f.y_min < extent.y_min
                || f.x_max > extent.x_max
                || f.y_max > extent.y_max
            {
                return Err(TerrainError::InvalidMap(format!(
                    "building {i} lies outside the extent"
                )));
            }
        }
        let index = CellIndex::build(&extent, &buildings);
        let map = Self {
            extent,
            buildings,
            index,
        };
        if let Some((i, j)) = map.first_overlap() {
            return Err(TerrainError::InvalidMap(format!(
                "buildings {i} and {j} overlap"
            )));
        }
        Ok(map)
    }

    /// A map without buildings.
    pub fn empty(extent: Rect) -> Self {
        Self::new(extent, Vec::new()).expect("empty map is valid")
    }

    pub fn extent(&self) -> Rect {
        self.extent
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn max_building_height(&self) -> f64 {
        self.buildings.iter().map(|b| b.height).fold(0.0, f64::max)
    }

    fn first_overlap(&self) -> Option<(usize, usize)> {
        for cell in &self.index.cells {
            for (n, &i) in cell.iter().enumerate() {
                for &j in &cell[n + 1..] {
                    if self.buildings[i as usize]
                        .footprint
                        .overlaps(&self.buildings[j as usize].footprint)
                    {
                        return Some((i.min(j) as usize, i.max(j) as usize));
                    }
                }
            }
        }
        None
    }

    /// Building whose footprint interior contains `p`, if any.
    pub fn building_at(&self, p: Point2) -> Option<usize> {
        if !self.extent.contains(p) {
            return None;
        }
        let (i, j) = self.index.cell_of(&self.extent, p.x, p.y);
        self.index.cells[j * self.index.nx + i]
            .iter()
            .map(|&id| id as usize)
            .find(|&id| self.buildings[id].footprint.contains_strict(p))
    }

    /// Street-level (outdoor) point inside the extent.
    pub fn is_outdoor(&self, p: Point2) -> bool {
        self.extent.contains(p) && self.building_at(p).is_none()
    }

    /// Uniformly distributed outdoor point.
    pub fn sample_street_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        loop {
            let p = Point2::new(
                rng.random_range(self.extent.x_min..self.extent.x_max),
                rng.random_range(self.extent.y_min..self.extent.y_max),
            );
            if self.is_outdoor(p) {
                return p;
            }
        }
    }

    /// Number of distinct buildings whose solid intersects the open segment `a -> b`.
    pub fn los_blocked(&self, a: Point3, b: Point3) -> usize {
        self.count_blockers(a, b, usize::MAX)
    }

    /// As [`UrbanMap::los_blocked`], stopping once `limit` blockers are found.
    pub fn count_blockers(&self, a: Point3, b: Point3, limit: usize) -> usize {
        if limit == 0 {
            return 0;
        }
        let mut seen: Vec<u32> = Vec::new();
        let mut count = 0;
        let (a2, b2) = (Point2::new(a.x, a.y), Point2::new(b.x, b.y));
        self.index.for_each_cell(&self.extent, a2, b2, |cell| {
            for &id in &self.index.cells[cell] {
                if seen.contains(&id) {
                    continue;
                }
                seen.push(id);
                if segment_hits_building(a, b, &self.buildings[id as usize]) {
                    count += 1;
                    if count >= limit {
                        return false;
                    }
                }
            }
            true
        });
        count
    }

    /// Text form: an `extent` line followed by one `building` line per building, 3 decimals.
    pub fn to_text(&self) -> String {
        let e = &self.extent;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "extent {:.3} {:.3} {:.3} {:.3}",
            e.x_min, e.y_min, e.x_max, e.y_max
        );
        for b in &self.buildings {
            let f = &b.footprint;
            let _ = writeln!(
                out,
                "building {:.3} {:.3} {:.3} {:.3} {:.3}",
                f.x_min, f.y_min, f.x_max, f.y_max, b.height
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TerrainError> {
        let mut extent = None;
        let mut buildings = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap_or_default();
            let values = fields
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| TerrainError::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            match (tag, values.as_slice()) {
                ("extent", &[x0, y0, x1, y1]) if extent.is_none() => {
                    extent = Some(Rect::new(x0, y0, x1, y1))
                }
                ("building", &[x0, y0, x1, y1, h]) => buildings.push(Building {
                    footprint: Rect::new(x0, y0, x1, y1),
                    height: h,
                }),
                _ => {
                    return Err(TerrainError::Parse {
                        line: n + 1,
                        message: format!("unexpected record `{line}`"),
                    })
                }
            }
        }
        let extent = extent.ok_or(TerrainError::Parse {
            line: 0,
            message: "missing extent record".into(),
        })?;
        Self::new(extent, buildings)
    }
}

fn round_mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Splits `[start, start + len]` into `n` lots separated by `gap`.
fn lots(start: f64, len: f64, n: usize, gap: f64) -> Vec<(f64, f64)> {
    let width = (len - gap * (n as f64 - 1.0)) / n as f64;
    (0..n)
        .map(|i| {
            let lo = start + i as f64 * (width + gap);
            (round_mm(lo), round_mm(lo + width))
        })
        .collect()
}

/// Generates a grid city. Streets of width `street_width` run along every
/// block edge (half-width along the map border); building heights are i.i.d.
/// uniform on `height_range`.
pub fn generate_map(
    seed: u64,
    extent: (f64, f64),
    spec: &BlockSpec,
    height_range: (f64, f64),
) -> Result<UrbanMap, TerrainError> {
    spec.validate()?;
    let (h_min, h_max) = height_range;
    if !(h_min >= 0.0 && h_max >= h_min && h_max > 0.0) {
        return Err(TerrainError::InvalidHeightRange {
            min: h_min,
            max: h_max,
        });
    }
    let (width, depth) = extent;
    let period = spec.block_size + spec.street_width;
    let nbx = ((width - spec.street_width) / period).floor();
    let nby = ((depth - spec.street_width) / period).floor();
    if !(nbx >= 1.0 && nby >= 1.0) {
        return Err(TerrainError::ExtentTooSmall {
            width,
            height: depth,
            block: spec.block_size,
            street: spec.street_width,
        });
    }
    let (nbx, nby) = (nbx as usize, nby as usize);
    // centre the block grid so that border streets have equal width
    let margin_x = (width - nbx as f64 * period + spec.street_width) / 2.0;
    let margin_y = (depth - nby as f64 * period + spec.street_width) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buildings = Vec::new();
    for by in 0..nby {
        for bx in 0..nbx {
            let x0 = margin_x + bx as f64 * period;
            let y0 = margin_y + by as f64 * period;
            let nx = rng.random_range(1..=spec.max_lots);
            let ny = rng.random_range(1..=spec.max_lots);
            for &(ly0, ly1) in &lots(y0, spec.block_size, ny, spec.alley_width) {
                for &(lx0, lx1) in &lots(x0, spec.block_size, nx, spec.alley_width) {
                    let open = rng.random::<f64>() < spec.open_lot_prob;
                    let height = if h_max > h_min {
                        rng.random_range(h_min..=h_max)
                    } else {
                        h_min
                    };
                    if !open {
                        buildings.push(Building {
                            footprint: Rect::new(lx0, ly0, lx1, ly1),
                            height: round_mm(height),
                        });
                    }
                }
            }
        }
    }
    UrbanMap::new(Rect::new(0.0, 0.0, width, depth), buildings)
}

/// Propagation segment index `k` in `1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentId(usize);

impl SegmentId {
    pub const LOS: SegmentId = SegmentId(1);

    pub fn new(k: usize, num_segments: usize) -> Result<Self, TerrainError> {
        if k == 0 || k > num_segments {
            return Err(TerrainError::SegmentOutOfRange { k, num_segments });
        }
        Ok(Self(k))
    }

    /// Clips `k` into `1..=num_segments`.
    pub fn clamped(k: usize, num_segments: usize) -> Self {
        Self(k.clamp(1, num_segments.max(1)))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based index into per-segment tables.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl std::fmt::Display for SegmentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Answers which propagation segment holds UAV position `x` for a user at `user`.
pub trait SegmentOracle: Sync {
    fn num_segments(&self) -> usize;
    fn segment(&self, x: Point2, user: Point2) -> SegmentId;
}

impl<T: SegmentOracle + ?Sized> SegmentOracle for &T {
    fn num_segments(&self) -> usize {
        (**self).num_segments()
    }
    fn segment(&self, x: Point2, user: Point2) -> SegmentId {
        (**self).segment(x, user)
    }
}

/// Degree of obstruction from ray casting: `min(K, 1 + blockers)`.
pub fn map_segment(
    map: &UrbanMap,
    x: Point2,
    user: Point2,
    h: &Heights,
    num_segments: usize,
) -> SegmentId {
    let k = num_segments.max(1);
    let blockers = map.count_blockers(
        Point3::at_height(user, h.user),
        Point3::at_height(x, h.uav),
        k - 1,
    );
    SegmentId::clamped(1 + blockers, k)
}

/// Segment oracle backed by an urban map.
#[derive(Debug, Clone, Copy)]
pub struct MapOracle<'a> {
    pub map: &'a UrbanMap,
    pub heights: Heights,
    pub num_segments: usize,
}

impl<'a> MapOracle<'a> {
    pub fn new(map: &'a UrbanMap, heights: Heights, num_segments: usize) -> Self {
        Self {
            map,
            heights,
            num_segments,
        }
    }
}

impl SegmentOracle for MapOracle<'_> {
    fn num_segments(&self) -> usize {
        self.num_segments
    }
    fn segment(&self, x: Point2, user: Point2) -> SegmentId {
        map_segment(self.map, x, user, &self.heights, self.num_segments)
    }
}

/// Star-shaped nested segments around a user: per angular bin, `K-1`
/// non-decreasing boundary radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedBoundaryField {
    num_segments: usize,
    bins: usize,
    /// `bins * (K-1)` radii, row-major by bin.
    radii: Vec<f64>,
}

/// Shape parameters for [`NestedBoundaryField::random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldShape {
    pub bins: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Range of the number of constant-radius arcs per boundary.
    pub pieces: (usize, usize),
}

impl NestedBoundaryField {
    /// `radii[bin]` lists the `K-1` boundaries of that bin.
    pub fn new(num_segments: usize, radii: Vec<Vec<f64>>) -> Result<Self, TerrainError> {
        if num_segments == 0 {
            return Err(TerrainError::InvalidMap(
                "at least one segment is required".into(),
            ));
        }
        if radii.is_empty() {
            return Err(TerrainError::InvalidMap(
                "at least one angular bin is required".into(),
            ));
        }
        let bins = radii.len();
        let mut flat = Vec::with_capacity(bins * (num_segments - 1));
        for (b, row) in radii.iter().enumerate() {
            if row.len() != num_segments - 1 {
                return Err(TerrainError::InvalidMap(format!(
                    "bin {b} has {} radii, expected {}",
                    row.len(),
                    num_segments - 1
                )));
            }
            if row.iter().any(|r| !(*r >= 0.0)) || row.windows(2).any(|w| w[0] > w[1]) {
                return Err(TerrainError::InvalidMap(format!(
                    "bin {b} radii must be non-negative and non-decreasing"
                )));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            num_segments,
            bins,
            radii: flat,
        })
    }

    /// Same radii in every direction.
    pub fn isotropic(radii: &[f64]) -> Result<Self, TerrainError> {
        Self::new(radii.len() + 1, vec![radii.to_vec()])
    }

    /// Random piecewise-constant boundaries; each boundary is split into a
    /// random number of arcs with independent radii, then radii are sorted
    /// per bin so nesting holds by construction.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_segments: usize, shape: &FieldShape) -> Self {
        let bins = shape.bins.max(1);
        let inner = num_segments.saturating_sub(1);
        let mut rows = vec![Vec::with_capacity(inner); bins];
        for _ in 0..inner {
            let pieces =
                rng.random_range(shape.pieces.0.max(1)..=shape.pieces.1.max(shape.pieces.0.max(1)));
            let mut cuts: Vec<usize> = (0..pieces).map(|_| rng.random_range(0..bins)).collect();
            cuts.sort_unstable();
            cuts.dedup();
            let values: Vec<f64> = (0..cuts.len())
                .map(|_| rng.random_range(shape.r_min..=shape.r_max))
                .collect();
            for (b, row) in rows.iter_mut().enumerate() {
                // arc containing bin b starts at the last cut <= b (wrapping around)
                let idx = match cuts.iter().rposition(|&c| c <= b) {
                    Some(i) => i,
                    None => cuts.len() - 1,
                };
                row.push(values[idx]);
            }
        }
        for row in &mut rows {
            row.sort_by(|a, b| a.total_cmp(b));
        }
        Self::new(num_segments, rows).expect("generated field is valid")
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    fn bin_of(&self, direction: f64) -> usize {
        let f = wrap_two_pi(direction) / (2.0 * PI) * self.bins as f64;
        (f.floor() as usize).min(self.bins - 1)
    }

    /// Boundary radii for the world-frame direction angle `direction`.
    pub fn radii_at(&self, direction: f64) -> &[f64] {
        let inner = self.num_segments - 1;
        let b = self.bin_of(direction);
        &self.radii[b * inner..(b + 1) * inner]
    }
}

/// Segment `k` with `r_{k-1} < |x - x_u| <= r_k` in the direction of `x`.
pub fn nested_segment(field: &NestedBoundaryField, x: Point2, user: Point2) -> SegmentId {
    let z = x - user;
    let rho = z.norm();
    let radii = field.radii_at(z.y.atan2(z.x));
    let outside = radii.iter().take_while(|&&r| rho > r).count();
    SegmentId::clamped(1 + outside, field.num_segments)
}

impl SegmentOracle for NestedBoundaryField {
    fn num_segments(&self) -> usize {
        self.num_segments
    }
    fn segment(&self, x: Point2, user: Point2) -> SegmentId {
        nested_segment(self, x, user)
    }
}
