//! Occupancy grids from IR scans, median filtering, obstacle inflation and
//! A* search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{Posture, RobotGeometry};
use crate::sim::IrReading;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("median window must be odd and >= 3, got {0}")]
    InvalidWindow(usize),
    #[error("negative or non-finite inflation margin {0}")]
    InvalidMargin(f64),
    #[error("cell ({0}, {1}) is outside the grid")]
    OutOfBounds(i64, i64),
    #[error("endpoint ({0}, {1}) is not free")]
    InvalidEndpoint(usize, usize),
    #[error("no path")]
    NoPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellState {
    Free,
    Occupied,
    #[default]
    Unknown,
}

pub type Cell = (usize, usize);

/// Grid geometry and the hit threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// mm per cell
    pub resolution: f64,
    /// World coordinates of the grid's lower-left corner (mm).
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: usize,
    pub height: usize,
    /// Hits needed for a cell to count as occupied.
    pub hit_threshold: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            resolution: 50.0,
            origin_x: -3000.0,
            origin_y: -3000.0,
            width: 120,
            height: 120,
            hit_threshold: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    hits: Vec<u32>,
    state: Vec<CellState>,
    /// Readings dropped because their endpoint fell outside the grid.
    pub skipped: u64,
}

impl OccupancyGrid {
    pub fn new(spec: GridSpec) -> Result<Self, PlanError> {
        if !(spec.resolution > 0.0 && spec.resolution.is_finite()) {
            return Err(PlanError::InvalidGrid("resolution must be > 0".into()));
        }
        if spec.width == 0 || spec.height == 0 {
            return Err(PlanError::InvalidGrid("width and height must be >= 1".into()));
        }
        if spec.hit_threshold == 0 {
            return Err(PlanError::InvalidGrid("hit_threshold must be >= 1".into()));
        }
        let n = spec.width * spec.height;
        Ok(OccupancyGrid {
            spec,
            hits: vec![0; n],
            state: vec![CellState::Unknown; n],
            skipped: 0,
        })
    }

    /// Grid with every cell observed free.
    pub fn free(spec: GridSpec) -> Result<Self, PlanError> {
        let mut g = Self::new(spec)?;
        g.state.fill(CellState::Free);
        Ok(g)
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    fn idx(&self, c: Cell) -> usize {
        c.1 * self.spec.width + c.0
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.spec.width && (y as usize) < self.spec.height
    }

    pub fn state(&self, c: Cell) -> CellState {
        self.state[self.idx(c)]
    }

    pub fn set_state(&mut self, c: Cell, s: CellState) {
        let i = self.idx(c);
        self.state[i] = s;
    }

    pub fn hits(&self, c: Cell) -> u32 {
        self.hits[self.idx(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.state(c) == CellState::Free
    }

    pub fn count(&self, s: CellState) -> usize {
        self.state.iter().filter(|x| **x == s).count()
    }

    /// Cell containing a world point, if any.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let cx = ((x - self.spec.origin_x) / self.spec.resolution).floor();
        let cy = ((y - self.spec.origin_y) / self.spec.resolution).floor();
        (cx >= 0.0 && cy >= 0.0 && cx < self.spec.width as f64 && cy < self.spec.height as f64)
            .then_some((cx as usize, cy as usize))
    }

    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        let r = self.spec.resolution;
        (
            self.spec.origin_x + (c.0 as f64 + 0.5) * r,
            self.spec.origin_y + (c.1 as f64 + 0.5) * r,
        )
    }

    fn observe_free(&mut self, c: Cell) {
        let i = self.idx(c);
        self.hits[i] = self.hits[i].saturating_sub(1);
        self.refresh(i);
    }

    fn observe_hit(&mut self, c: Cell) {
        let i = self.idx(c);
        self.hits[i] += 1;
        self.refresh(i);
    }

    fn refresh(&mut self, i: usize) {
        self.state[i] = if self.hits[i] >= self.spec.hit_threshold {
            CellState::Occupied
        } else {
            CellState::Free
        };
    }

    /// Cells crossed by the segment from `a` to `b`, in order, clipped to the
    /// grid. Grid traversal after Amanatides and Woo.
    fn traverse(&self, a: (f64, f64), b: (f64, f64)) -> Vec<Cell> {
        let r = self.spec.resolution;
        let (ax, ay) = ((a.0 - self.spec.origin_x) / r, (a.1 - self.spec.origin_y) / r);
        let (bx, by) = ((b.0 - self.spec.origin_x) / r, (b.1 - self.spec.origin_y) / r);
        let (mut x, mut y) = (ax.floor() as i64, ay.floor() as i64);
        let (ex, ey) = (bx.floor() as i64, by.floor() as i64);
        let (dx, dy) = (bx - ax, by - ay);
        let step_x = if dx > 0.0 { 1 } else { -1 };
        let step_y = if dy > 0.0 { 1 } else { -1 };
        let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
        let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
        let mut t_max_x = if dx > 0.0 {
            (ax.floor() + 1.0 - ax) * t_delta_x
        } else if dx < 0.0 {
            (ax - ax.floor()) * t_delta_x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if dy > 0.0 {
            (ay.floor() + 1.0 - ay) * t_delta_y
        } else if dy < 0.0 {
            (ay - ay.floor()) * t_delta_y
        } else {
            f64::INFINITY
        };
        let mut out = Vec::new();
        let limit = (ex - x).abs() + (ey - y).abs() + 2;
        for _ in 0..=limit {
            if self.in_bounds(x, y) {
                out.push((x as usize, y as usize));
            }
            if x == ex && y == ey {
                break;
            }
            if t_max_x < t_max_y {
                x += step_x;
                t_max_x += t_delta_x;
            } else {
                y += step_y;
                t_max_y += t_delta_y;
            }
        }
        out
    }

    /// Fold one five-ray scan taken at `pose` into the grid.
    ///
    /// In-range readings free the cells up to the endpoint and add a hit on
    /// the endpoint cell. Out-of-range readings free the cells between the
    /// minimum and maximum range: the sensor cannot tell "too close" from
    /// "too far", so the blind zone stays untouched.
    pub fn ingest_ir_scan(&mut self, pose: &Posture, ranges: &[IrReading; 5], geom: &RobotGeometry) {
        for (reading, bearing) in ranges.iter().zip(geom.ir_ray_angles) {
            let (s, c) = (pose.theta + bearing).sin_cos();
            let at = |d: f64| (pose.x + d * c, pose.y + d * s);
            match reading.range() {
                Some(d) => {
                    let end = at(d);
                    let Some(hit) = self.cell_of(end.0, end.1) else {
                        self.skipped += 1;
                        continue;
                    };
                    for cell in self.traverse((pose.x, pose.y), end) {
                        if cell == hit {
                            break;
                        }
                        self.observe_free(cell);
                    }
                    self.observe_hit(hit);
                }
                None => {
                    for cell in self.traverse(at(geom.ir_range_min), at(geom.ir_range_max)) {
                        self.observe_free(cell);
                    }
                }
            }
        }
    }

    /// Plain-text header describing the image written by [`Self::to_pgm`].
    pub fn header(&self) -> String {
        let s = &self.spec;
        let mut h = String::new();
        writeln!(h, "resolution_mm {}", s.resolution).unwrap();
        writeln!(h, "origin_x_mm {}", s.origin_x).unwrap();
        writeln!(h, "origin_y_mm {}", s.origin_y).unwrap();
        writeln!(h, "width {}", s.width).unwrap();
        writeln!(h, "height {}", s.height).unwrap();
        writeln!(h, "first_row top").unwrap();
        writeln!(h, "values free=0 unknown=127 occupied=255").unwrap();
        h
    }

    /// Binary PGM, one byte per cell, top row (largest y) first.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for y in (0..h).rev() {
            for x in 0..w {
                out.push(match self.state((x, y)) {
                    CellState::Free => 0,
                    CellState::Unknown => 127,
                    CellState::Occupied => 255,
                });
            }
        }
        out
    }
}

/// Neighborhood used by the median filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianShape {
    /// Full `window × window` square.
    #[default]
    Square,
    /// Centre row and column of the square only, so one-cell-thick walls
    /// survive.
    Cross,
}

/// Binary median over the window. Unknown and off-grid cells vote free;
/// unknown cells stay unknown.
pub fn median_filter(grid: &OccupancyGrid, window: usize, shape: MedianShape) -> Result<OccupancyGrid, PlanError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(PlanError::InvalidWindow(window));
    }
    let r = (window / 2) as i64;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| shape == MedianShape::Square || dx == 0 || dy == 0)
        .collect();
    let mut out = grid.clone();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if grid.state((x, y)) == CellState::Unknown {
                continue;
            }
            let occ = offsets
                .iter()
                .filter(|&&(dx, dy)| {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    grid.in_bounds(nx, ny) && grid.state((nx as usize, ny as usize)) == CellState::Occupied
                })
                .count();
            let s = if 2 * occ > offsets.len() {
                CellState::Occupied
            } else {
                CellState::Free
            };
            out.set_state((x, y), s);
        }
    }
    Ok(out)
}

/// Mark every cell whose centre lies within `margin` of an occupied cell's
/// centre as occupied.
pub fn inflate(grid: &OccupancyGrid, margin: f64) -> Result<OccupancyGrid, PlanError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(PlanError::InvalidMargin(margin));
    }
    let rho = grid.spec.resolution;
    let r = (margin / rho).ceil() as i64;
    let disc: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64).sqrt() * rho <= margin)
        .collect();
    let mut out = grid.clone();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if grid.state((x, y)) != CellState::Occupied {
                continue;
            }
            for &(dx, dy) in &disc {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if grid.in_bounds(nx, ny) {
                    out.set_state((nx as usize, ny as usize), CellState::Occupied);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub axis_steps: u32,
    pub diagonal_steps: u32,
}

impl GridPath {
    /// Length in cells.
    pub fn cost(&self) -> f64 {
        path_cost(self.axis_steps, self.diagonal_steps)
    }
}

/// Cost of a path with the given step counts. Computed from the counts so
/// equal step mixes always give bit-identical costs.
pub fn path_cost(axis: u32, diagonal: u32) -> f64 {
    axis as f64 + diagonal as f64 * SQRT_2
}

pub fn euclidean_cells(a: Cell, b: Cell) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    dx.hypot(dy)
}

/// Traversable 8-neighbors of `c` with their move kind (true = diagonal).
/// A diagonal is blocked only when both axis cells beside it are blocked.
pub fn neighbors(grid: &OccupancyGrid, c: Cell) -> Vec<(Cell, bool)> {
    let mut out = Vec::with_capacity(8);
    let free = |x: i64, y: i64| grid.in_bounds(x, y) && grid.is_free((x as usize, y as usize));
    let (x, y) = (c.0 as i64, c.1 as i64);
    for dy in -1..=1 {
        for dx in -1..=1 {
            if dx == 0 && dy == 0 || !free(x + dx, y + dy) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && !free(x + dx, y) && !free(x, y + dy) {
                continue;
            }
            out.push((((x + dx) as usize, (y + dy) as usize), diagonal));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenKey {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for OpenKey {}

impl Ord for OpenKey {
    // reversed: BinaryHeap pops the smallest (f, h, idx)
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(o.h.total_cmp(&self.h))
            .then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for OpenKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Search result with the expansion order, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Search {
    pub path: Result<GridPath, PlanError>,
    pub expanded: Vec<Cell>,
}

pub fn astar(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<GridPath, PlanError> {
    astar_search(grid, start, goal).path
}

pub fn astar_search(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Search {
    let mut expanded = Vec::new();
    for c in [start, goal] {
        if !grid.in_bounds(c.0 as i64, c.1 as i64) {
            return Search {
                path: Err(PlanError::OutOfBounds(c.0 as i64, c.1 as i64)),
                expanded,
            };
        }
        if !grid.is_free(c) {
            return Search {
                path: Err(PlanError::InvalidEndpoint(c.0, c.1)),
                expanded,
            };
        }
    }
    let w = grid.width();
    let n = w * grid.height();
    let cell = |i: usize| (i % w, i / w);
    let mut g: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = grid.idx(start);
    let t = grid.idx(goal);
    g[s] = Some((0, 0));
    let h0 = euclidean_cells(start, goal);
    open.push(OpenKey { f: h0, h: h0, idx: s });
    while let Some(OpenKey { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        expanded.push(cell(idx));
        let (a, d) = g[idx].expect("queued cells have a cost");
        if idx == t {
            let mut cells = vec![goal];
            let mut i = t;
            while i != s {
                i = parent[i];
                cells.push(cell(i));
            }
            cells.reverse();
            return Search {
                path: Ok(GridPath {
                    cells,
                    axis_steps: a,
                    diagonal_steps: d,
                }),
                expanded,
            };
        }
        for (nb, diagonal) in neighbors(grid, cell(idx)) {
            let j = grid.idx(nb);
            if closed[j] {
                continue;
            }
            let cand = if diagonal { (a, d + 1) } else { (a + 1, d) };
            let better = match g[j] {
                None => true,
                Some((ja, jd)) => path_cost(cand.0, cand.1) < path_cost(ja, jd),
            };
            if better {
                g[j] = Some(cand);
                parent[j] = idx;
                let h = euclidean_cells(nb, goal);
                open.push(OpenKey {
                    f: path_cost(cand.0, cand.1) + h,
                    h,
                    idx: j,
                });
            }
        }
    }
    Search {
        path: Err(PlanError::NoPath),
        expanded,
    }
}

/// World-frame polyline through the centres of the path cells.
pub fn path_points(grid: &OccupancyGrid, path: &GridPath) -> Vec<(f64, f64)> {
    path.cells.iter().map(|&c| grid.cell_center(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(w: usize, h: usize) -> GridSpec {
        GridSpec {
            resolution: 50.0,
            origin_x: 0.0,
            origin_y: 0.0,
            width: w,
            height: h,
            hit_threshold: 2,
        }
    }

    fn free(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::free(spec(w, h)).unwrap()
    }

    fn with_occupied(w: usize, h: usize, cells: &[Cell]) -> OccupancyGrid {
        let mut g = free(w, h);
        for &c in cells {
            g.set_state(c, CellState::Occupied);
        }
        g
    }

    fn occupied(g: &OccupancyGrid) -> Vec<Cell> {
        let mut v = Vec::new();
        for y in 0..g.height() {
            for x in 0..g.width() {
                if g.state((x, y)) == CellState::Occupied {
                    v.push((x, y));
                }
            }
        }
        v
    }

    fn forward_scan(d: Option<f64>) -> [IrReading; 5] {
        let mut r = [IrReading::OutOfRange; 5];
        if let Some(d) = d {
            r[2] = IrReading::Range(d);
        }
        r
    }

    fn centered() -> OccupancyGrid {
        OccupancyGrid::new(GridSpec {
            origin_x: -1000.0,
            origin_y: -1000.0,
            width: 40,
            height: 40,
            ..spec(40, 40)
        })
        .unwrap()
    }

    #[test]
    fn wall_ahead_hits_endpoint_cell() {
        let mut g = centered();
        let geom = RobotGeometry::default();
        let pose = Posture::new(0.0, 0.0, 0.0);
        g.ingest_ir_scan(&pose, &forward_scan(Some(500.0)), &geom);
        let robot = g.cell_of(0.0, 0.0).unwrap();
        let hit = (robot.0 + 10, robot.1);
        assert_eq!(g.hits(hit), 1);
        // a single hit is below the threshold
        assert_eq!(g.state(hit), CellState::Free);
        for x in robot.0..hit.0 {
            assert_eq!(g.state((x, robot.1)), CellState::Free);
        }
        g.ingest_ir_scan(&pose, &forward_scan(Some(500.0)), &geom);
        assert_eq!(g.hits(hit), 2);
        assert_eq!(g.state(hit), CellState::Occupied);
    }

    #[test]
    fn out_of_range_marks_only_free() {
        let mut g = centered();
        let geom = RobotGeometry::default();
        g.ingest_ir_scan(&Posture::default(), &forward_scan(None), &geom);
        assert_eq!(g.count(CellState::Occupied), 0);
        let robot = g.cell_of(0.0, 0.0).unwrap();
        // blind zone untouched, free out to the grid edge (range max is past it)
        assert_eq!(g.state((robot.0 + 1, robot.1)), CellState::Unknown);
        assert_eq!(g.state((robot.0 + 4, robot.1)), CellState::Free);
        assert_eq!(g.state((39, robot.1)), CellState::Free);
        assert_eq!(g.skipped, 0);
    }

    #[test]
    fn endpoint_outside_grid_is_skipped() {
        let mut g = centered();
        let geom = RobotGeometry::default();
        g.ingest_ir_scan(&Posture::default(), &forward_scan(Some(1400.0)), &geom);
        assert_eq!(g.skipped, 1);
        assert_eq!(g.count(CellState::Occupied), 0);
        // nothing along the skipped ray was touched
        let robot = g.cell_of(0.0, 0.0).unwrap();
        for x in robot.0..40 {
            assert_eq!(g.state((x, robot.1)), CellState::Unknown);
        }
    }

    #[test]
    fn traversal_is_connected() {
        let g = centered();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = (rng.random_range(-900.0..900.0), rng.random_range(-900.0..900.0));
            let b = (rng.random_range(-900.0..900.0), rng.random_range(-900.0..900.0));
            let cells = g.traverse(a, b);
            assert_eq!(cells[0], g.cell_of(a.0, a.1).unwrap());
            assert_eq!(*cells.last().unwrap(), g.cell_of(b.0, b.1).unwrap());
            for w in cells.windows(2) {
                let d = (w[0].0 as i64 - w[1].0 as i64).abs() + (w[0].1 as i64 - w[1].1 as i64).abs();
                assert_eq!(d, 1, "{:?}", w);
            }
        }
    }

    #[test]
    fn median_examples() {
        let lone = with_occupied(7, 7, &[(3, 3)]);
        assert_eq!(occupied(&median_filter(&lone, 3, MedianShape::Square).unwrap()), vec![]);
        assert_eq!(occupied(&median_filter(&lone, 3, MedianShape::Cross).unwrap()), vec![]);

        let block: Vec<Cell> = (2..5).flat_map(|y| (2..5).map(move |x| (x, y))).collect();
        let g = with_occupied(7, 7, &block);
        for shape in [MedianShape::Square, MedianShape::Cross] {
            assert_eq!(median_filter(&g, 3, shape).unwrap().state((3, 3)), CellState::Occupied);
        }

        // thin wall: 3 of 9 square cells, 3 of 5 cross cells
        let wall: Vec<Cell> = (5..15).map(|x| (x, 5)).collect();
        let g = with_occupied(20, 11, &wall);
        let sq = median_filter(&g, 3, MedianShape::Square).unwrap();
        assert!(occupied(&sq).is_empty());
        let cr = median_filter(&g, 3, MedianShape::Cross).unwrap();
        assert_eq!(occupied(&cr), (6..14).map(|x| (x, 5)).collect::<Vec<_>>());

        assert_eq!(
            median_filter(&g, 4, MedianShape::Square),
            Err(PlanError::InvalidWindow(4))
        );
        assert_eq!(
            median_filter(&g, 1, MedianShape::Square),
            Err(PlanError::InvalidWindow(1))
        );
    }

    #[test]
    fn median_keeps_unknown_and_ignores_it() {
        let mut g = with_occupied(5, 5, &[(1, 2), (2, 1), (2, 3), (3, 2), (1, 1)]);
        g.set_state((2, 2), CellState::Unknown);
        let f = median_filter(&g, 3, MedianShape::Square).unwrap();
        assert_eq!(f.state((2, 2)), CellState::Unknown);
        // (1, 2) sees 5 occupied of 9 only if the unknown centre voted occupied
        assert_eq!(f.state((1, 2)), CellState::Free);
    }

    #[test]
    fn inflate_examples() {
        let g = with_occupied(7, 7, &[(3, 3)]);
        assert_eq!(inflate(&g, 0.0).unwrap(), g);
        let one = inflate(&g, 50.0).unwrap();
        assert_eq!(occupied(&one), vec![(3, 2), (2, 3), (3, 3), (4, 3), (3, 4)]);
        // 1.5 cells: the diagonals at √2 join, (3, 1) at 2 does not
        let more = inflate(&g, 75.0).unwrap();
        assert_eq!(occupied(&more).len(), 9);
        assert!(inflate(&g, -1.0).is_err());
    }

    #[test]
    fn astar_examples() {
        let g = free(3, 3);
        let p = astar(&g, (0, 0), (2, 2)).unwrap();
        assert_abs_diff_eq!(p.cost(), 2.0 * SQRT_2);
        assert_eq!(p.cells, vec![(0, 0), (1, 1), (2, 2)]);
        let g = free(5, 5);
        let p = astar(&g, (0, 0), (0, 4)).unwrap();
        assert_eq!(p.cost(), 4.0);
        assert_eq!(astar(&g, (0, 0), (0, 0)).unwrap().cells, vec![(0, 0)]);
    }

    #[test]
    fn astar_endpoint_errors() {
        let mut g = with_occupied(5, 5, &[(2, 2)]);
        assert_eq!(astar(&g, (2, 2), (0, 0)), Err(PlanError::InvalidEndpoint(2, 2)));
        g.set_state((4, 4), CellState::Unknown);
        assert_eq!(astar(&g, (0, 0), (4, 4)), Err(PlanError::InvalidEndpoint(4, 4)));
        assert_eq!(astar(&g, (0, 0), (5, 0)), Err(PlanError::OutOfBounds(5, 0)));
    }

    #[test]
    fn corner_cutting_rules() {
        // both axis cells blocked: the diagonal is closed
        let g = with_occupied(2, 2, &[(1, 0), (0, 1)]);
        assert_eq!(astar(&g, (0, 0), (1, 1)), Err(PlanError::NoPath));
        // one axis cell blocked: the diagonal stays open
        let g = with_occupied(2, 2, &[(1, 0)]);
        assert_eq!(astar(&g, (0, 0), (1, 1)).unwrap().diagonal_steps, 1);
    }

    #[test]
    fn closed_corridor_gives_no_path() {
        // corridor two cells wide between solid walls
        let mut cells = Vec::new();
        for x in 0..20 {
            for y in 0..4 {
                cells.push((x, y));
            }
            for y in 6..10 {
                cells.push((x, y));
            }
        }
        let g = with_occupied(20, 10, &cells);
        assert!(astar(&g, (0, 4), (19, 5)).is_ok());
        let inflated = inflate(&g, 50.0).unwrap();
        assert_eq!(astar(&inflated, (0, 4), (19, 5)), Err(PlanError::InvalidEndpoint(0, 4)));
        let mut start_goal = inflated.clone();
        start_goal.set_state((0, 4), CellState::Free);
        start_goal.set_state((19, 5), CellState::Free);
        assert_eq!(astar(&start_goal, (0, 4), (19, 5)), Err(PlanError::NoPath));
    }

    #[test]
    fn deterministic_tie_breaking() {
        let g = free(6, 6);
        let a = astar_search(&g, (0, 0), (5, 3));
        let b = astar_search(&g, (0, 0), (5, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn pgm_layout() {
        let mut g = OccupancyGrid::new(spec(3, 2)).unwrap();
        g.set_state((0, 0), CellState::Free);
        g.set_state((2, 1), CellState::Occupied);
        let img = g.to_pgm();
        let head = b"P5\n3 2\n255\n";
        assert_eq!(&img[..head.len()], head);
        // top row is y = 1
        assert_eq!(&img[head.len()..], &[127, 127, 255, 0, 127, 127]);
        assert!(g.header().contains("resolution_mm 50\n"));
    }

    /// Independent oracle: Bellman-Ford style relaxation over step counts.
    fn oracle(g: &OccupancyGrid, goal: Cell) -> Vec<Option<(u32, u32)>> {
        let w = g.width();
        let n = w * g.height();
        let mut d: Vec<Option<(u32, u32)>> = vec![None; n];
        d[goal.1 * w + goal.0] = Some((0, 0));
        loop {
            let mut changed = false;
            for i in 0..n {
                let c = (i % w, i / w);
                if !g.is_free(c) {
                    continue;
                }
                for (nb, diag) in neighbors(g, c) {
                    let Some((a, b)) = d[nb.1 * w + nb.0] else { continue };
                    let cand = if diag { (a, b + 1) } else { (a + 1, b) };
                    let better = d[i].is_none_or(|(x, y)| path_cost(cand.0, cand.1) < path_cost(x, y));
                    if better {
                        d[i] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                return d;
            }
        }
    }

    fn random_grid(rng: &mut ChaCha8Rng, density: f64) -> OccupancyGrid {
        let mut g = free(20, 20);
        for y in 0..20 {
            for x in 0..20 {
                if rng.random_bool(density) {
                    g.set_state((x, y), CellState::Occupied);
                }
            }
        }
        g
    }

    #[test]
    fn astar_matches_oracle_and_heuristic_is_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut solved = 0;
        while solved < 100 {
            let mut g = random_grid(&mut rng, 0.2);
            let s = (rng.random_range(0..20), rng.random_range(0..20));
            let t = (rng.random_range(0..20), rng.random_range(0..20));
            g.set_state(s, CellState::Free);
            g.set_state(t, CellState::Free);
            let dist = oracle(&g, t);
            let search = astar_search(&g, s, t);
            match dist[s.1 * 20 + s.0] {
                None => assert_eq!(search.path, Err(PlanError::NoPath)),
                Some((a, b)) => {
                    let p = search.path.unwrap();
                    assert_eq!(p.cost(), path_cost(a, b));
                    for c in &search.expanded {
                        let (a, b) = dist[c.1 * 20 + c.0].unwrap();
                        assert!(euclidean_cells(*c, t) <= path_cost(a, b) + 1e-12);
                    }
                    solved += 1;
                }
            }
        }
    }

    #[test]
    fn paths_are_valid_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let mut g = random_grid(&mut rng, 0.25);
            g.set_state((0, 0), CellState::Free);
            g.set_state((19, 19), CellState::Free);
            let Ok(p) = astar(&g, (0, 0), (19, 19)) else { continue };
            let mut seen = std::collections::HashSet::new();
            let (mut a, mut d) = (0, 0);
            for w in p.cells.windows(2) {
                let (dx, dy) = (w[0].0.abs_diff(w[1].0), w[0].1.abs_diff(w[1].1));
                assert!(dx <= 1 && dy <= 1 && dx + dy > 0);
                if dx + dy == 2 {
                    d += 1;
                } else {
                    a += 1;
                }
            }
            for c in &p.cells {
                assert!(g.is_free(*c));
                assert!(seen.insert(*c));
            }
            assert_eq!((a, d), (p.axis_steps, p.diagonal_steps));
        }
    }

    #[test]
    fn inflation_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..30 {
            let g = random_grid(&mut rng, 0.04);
            let (s, t) = ((0, 0), (19, 19));
            let mut last: Option<f64> = Some(0.0);
            for m in [0.0, 25.0, 50.0, 75.0, 100.0, 150.0] {
                let mut inf = inflate(&g, m).unwrap();
                inf.set_state(s, CellState::Free);
                inf.set_state(t, CellState::Free);
                let cost = astar(&inf, s, t).ok().map(|p| p.cost());
                match (last, cost) {
                    (None, c) => assert!(c.is_none(), "path reappeared at margin {m}"),
                    (Some(prev), Some(c)) => assert!(c >= prev),
                    (Some(_), None) => {}
                }
                last = cost;
            }
        }
    }

    #[test]
    fn median_never_creates_against_majority() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let g = random_grid(&mut rng, 0.5);
            let f = median_filter(&g, 3, MedianShape::Square).unwrap();
            for y in 0..20 {
                for x in 0..20 {
                    if f.state((x, y)) == CellState::Occupied && g.state((x, y)) != CellState::Occupied {
                        let mut occ = 0;
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                                if g.in_bounds(nx, ny) && g.state((nx as usize, ny as usize)) == CellState::Occupied {
                                    occ += 1;
                                }
                            }
                        }
                        assert!(occ >= 5);
                    }
                }
            }
        }
    }

    #[test]
    fn median_settles_within_two_passes_on_sparse_noise() {
        // dense random grids can need dozens of passes; sparse noise settles
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (shape, density) in [(MedianShape::Square, 0.1), (MedianShape::Cross, 0.05)] {
            for _ in 0..200 {
                let g = random_grid(&mut rng, density);
                let once = median_filter(&g, 3, shape).unwrap();
                let twice = median_filter(&once, 3, shape).unwrap();
                assert_eq!(median_filter(&twice, 3, shape).unwrap(), twice);
            }
        }
    }

    #[test]
    fn median_reaches_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let mut g = random_grid(&mut rng, 0.5);
            let mut passes = 0;
            loop {
                let next = median_filter(&g, 3, MedianShape::Square).unwrap();
                if next == g {
                    break;
                }
                g = next;
                passes += 1;
                assert!(passes < 100);
            }
        }
    }

    proptest! {
        #[test]
        fn inflation_contains_original(cells in prop::collection::vec((0usize..15, 0usize..15), 0..20), m in 0.0f64..200.0) {
            let g = with_occupied(15, 15, &cells);
            let inf = inflate(&g, m).unwrap();
            for c in occupied(&g) {
                prop_assert_eq!(inf.state(c), CellState::Occupied);
            }
            let bigger = inflate(&g, m + 30.0).unwrap();
            for c in occupied(&inf) {
                prop_assert_eq!(bigger.state(c), CellState::Occupied);
            }
        }
    }
}
