use serde::{Deserialize, Serialize};

use super::SimError;

/// Axis-aligned rectangle (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.max_x > self.min_x && self.max_y > self.min_y)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.min_x >= self.min_x && o.max_x <= self.max_x && o.min_y >= self.min_y && o.max_y <= self.max_y
    }

    pub fn edges(&self) -> [Segment; 4] {
        let (a, b, c, d) = (
            (self.min_x, self.min_y),
            (self.max_x, self.min_y),
            (self.max_x, self.max_y),
            (self.min_x, self.max_y),
        );
        [
            Segment::new(a.0, a.1, b.0, b.1),
            Segment::new(b.0, b.1, c.0, c.1),
            Segment::new(c.0, c.1, d.0, d.1),
            Segment::new(d.0, d.1, a.0, a.1),
        ]
    }

    /// Euclidean distance from a point to the filled rectangle (0 inside).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let dx = (self.min_x - x).max(0.0).max(x - self.max_x);
        let dy = (self.min_y - y).max(0.0).max(y - self.max_y);
        dx.hypot(dy)
    }
}

/// Line segment obstacle (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Segment {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Segment { x1, y1, x2, y2 }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let (ex, ey) = (self.x2 - self.x1, self.y2 - self.y1);
        let len2 = ex * ex + ey * ey;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((x - self.x1) * ex + (y - self.y1) * ey) / len2).clamp(0.0, 1.0)
        };
        (self.x1 + t * ex - x).hypot(self.y1 + t * ey - y)
    }

    /// Distance along the ray `origin + s·dir` (unit `dir`) to this segment.
    pub fn ray_hit(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        let (ex, ey) = (self.x2 - self.x1, self.y2 - self.y1);
        let denom = dx * ey - dy * ex;
        if denom.abs() < 1e-12 {
            return None;
        }
        let (wx, wy) = (self.x1 - ox, self.y1 - oy);
        let s = (wx * ey - wy * ex) / denom;
        let u = (wx * dy - wy * dx) / denom;
        if s >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            Some(s)
        } else {
            None
        }
    }
}

/// Static arena: a bounding rectangle (its edges are walls) plus obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub bounds: Rect,
    #[serde(default)]
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub segments: Vec<Segment>,
}

impl Default for World {
    fn default() -> Self {
        World {
            bounds: Rect::new(-3000.0, -3000.0, 3000.0, 3000.0),
            rects: Vec::new(),
            segments: Vec::new(),
        }
    }
}

impl World {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.bounds.is_degenerate() {
            return Err(SimError::InvalidWorld("degenerate bounds".into()));
        }
        for (i, r) in self.rects.iter().enumerate() {
            if r.is_degenerate() || !self.bounds.contains_rect(r) {
                return Err(SimError::InvalidWorld(format!("rect {i} degenerate or outside bounds")));
            }
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !self.bounds.contains(s.x1, s.y1) || !self.bounds.contains(s.x2, s.y2) {
                return Err(SimError::InvalidWorld(format!("segment {i} outside bounds")));
            }
        }
        Ok(())
    }

    fn segments_iter(&self) -> impl Iterator<Item = Segment> + '_ {
        self.bounds
            .edges()
            .into_iter()
            .chain(self.rects.iter().flat_map(|r| r.edges()))
            .chain(self.segments.iter().copied())
    }

    /// Nearest obstacle or wall along a ray from `(x, y)` with heading `angle`.
    pub fn ray_cast(&self, x: f64, y: f64, angle: f64) -> Option<f64> {
        let (dy, dx) = angle.sin_cos();
        self.segments_iter()
            .filter_map(|s| s.ray_hit(x, y, dx, dy))
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Distance from a point to the closest obstacle surface or arena wall.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        let walls = self
            .bounds
            .edges()
            .iter()
            .map(|e| e.distance(x, y))
            .fold(f64::INFINITY, f64::min);
        let rects = self
            .rects
            .iter()
            .map(|r| r.distance(x, y))
            .fold(f64::INFINITY, f64::min);
        let segs = self
            .segments
            .iter()
            .map(|s| s.distance(x, y))
            .fold(f64::INFINITY, f64::min);
        if !self.bounds.contains(x, y) {
            return 0.0;
        }
        walls.min(rects).min(segs)
    }

    pub fn is_free(&self, x: f64, y: f64) -> bool {
        self.bounds.contains(x, y) && !self.rects.iter().any(|r| r.contains(x, y))
    }
}
