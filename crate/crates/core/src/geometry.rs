//! Floor plans on a 1 m grid: cells, the eight movement actions, wall
//! segments, and the collision / wall-crossing queries built on them.

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid start cell ({x}, {y}): out of bounds or blocked")]
    InvalidStart { x: i32, y: i32 },
    #[error("wall {index}: endpoints coincide")]
    DegenerateWall { index: usize },
    #[error("wall {index}: attenuation {value} dB must be finite and >= 0")]
    BadAttenuation { index: usize, value: f64 },
    #[error("wall {index}: endpoint ({x}, {y}) lies outside the {width}x{height} plan")]
    WallOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("plan dimensions must be positive, got {width}x{height}")]
    EmptyPlan { width: u32, height: u32 },
    #[error("clearance must be finite and >= 0, got {0}")]
    BadClearance(f64),
}

/// A grid cell. Cell `(x, y)` covers `[x, x+1) x [y, y+1)` metres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: i32,
    pub y: i32,
}

impl Position {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, action: Action) -> Self {
        let (dx, dy) = action.displacement();
        Self::new(self.x + dx, self.y + dy)
    }

    /// Geometric centre of the cell in metres.
    pub fn center(self) -> Point {
        Point::new(self.x as f64 + 0.5, self.y as f64 + 0.5)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A point in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `other` seen from `self`, degrees counter-clockwise from +x.
    pub fn azimuth_to(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).to_degrees()
    }

    /// Grid cell containing this point.
    pub fn cell(self) -> Position {
        Position::new(self.x.floor() as i32, self.y.floor() as i32)
    }
}

/// One of the eight grid moves, 45 degrees apart. `N` is +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    N = 0,
    NE = 1,
    E = 2,
    SE = 3,
    S = 4,
    SW = 5,
    W = 6,
    NW = 7,
}

impl Action {
    pub const COUNT: usize = 8;
    pub const ALL: [Action; 8] = [
        Action::N,
        Action::NE,
        Action::E,
        Action::SE,
        Action::S,
        Action::SW,
        Action::W,
        Action::NW,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn displacement(self) -> (i32, i32) {
        match self {
            Action::N => (0, 1),
            Action::NE => (1, 1),
            Action::E => (1, 0),
            Action::SE => (1, -1),
            Action::S => (0, -1),
            Action::SW => (-1, -1),
            Action::W => (-1, 0),
            Action::NW => (-1, 1),
        }
    }

    /// Direction of travel, degrees counter-clockwise from +x.
    pub fn heading_deg(self) -> f64 {
        match self {
            Action::E => 0.0,
            Action::NE => 45.0,
            Action::N => 90.0,
            Action::NW => 135.0,
            Action::W => 180.0,
            Action::SW => 225.0,
            Action::S => 270.0,
            Action::SE => 315.0,
        }
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.displacement();
        dx != 0 && dy != 0
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::N => "N",
            Action::NE => "NE",
            Action::E => "E",
            Action::SE => "SE",
            Action::S => "S",
            Action::SW => "SW",
            Action::W => "W",
            Action::NW => "NW",
        }
    }

    pub fn from_label(label: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.label() == label)
    }

    /// The action whose displacement is `(dx, dy)`, if any.
    pub fn from_displacement(dx: i32, dy: i32) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.displacement() == (dx, dy))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Metres travelled by one action: 1 for cardinal moves, sqrt(2) for diagonals.
pub fn step_distance(action: Action) -> f64 {
    if action.is_diagonal() {
        SQRT_2
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallKind {
    Wall,
    Door,
    Window,
}

impl WallKind {
    /// Doors are open to flight; walls and windows are not.
    pub fn blocks_flight(self) -> bool {
        !matches!(self, WallKind::Door)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub p1: Point,
    pub p2: Point,
    pub kind: WallKind,
    pub attenuation_db: f64,
}

impl Wall {
    pub fn new(p1: Point, p2: Point, kind: WallKind, attenuation_db: f64) -> Self {
        Self {
            p1,
            p2,
            kind,
            attenuation_db,
        }
    }

    pub fn solid(x1: f64, y1: f64, x2: f64, y2: f64, attenuation_db: f64) -> Self {
        Self::new(
            Point::new(x1, y1),
            Point::new(x2, y2),
            WallKind::Wall,
            attenuation_db,
        )
    }
}

fn orientation(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Closed-segment intersection test. Touching at an endpoint and collinear
/// overlap both count.
pub fn segments_intersect(a1: Point, a2: Point, b1: Point, b2: Point) -> bool {
    let o1 = orientation(a1, a2, b1);
    let o2 = orientation(a1, a2, b2);
    let o3 = orientation(b1, b2, a1);
    let o4 = orientation(b1, b2, a2);

    if o1 == 0.0 && o2 == 0.0 {
        // Collinear: overlap iff the projections on both axes overlap.
        return a1.x.min(a2.x) <= b1.x.max(b2.x)
            && b1.x.min(b2.x) <= a1.x.max(a2.x)
            && a1.y.min(a2.y) <= b1.y.max(b2.y)
            && b1.y.min(b2.y) <= a1.y.max(a2.y);
    }
    if sign(o1) * sign(o2) <= 0 && sign(o3) * sign(o4) <= 0 {
        return true;
    }
    false
}

pub fn segment_intersects_wall(p1: Point, p2: Point, wall: &Wall) -> bool {
    segments_intersect(p1, p2, wall.p1, wall.p2)
}

/// Euclidean distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallCrossings {
    pub count: usize,
    pub total_attenuation_db: f64,
}

/// Result of attempting a move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    To(Position),
    Blocked,
}

/// Blocked cells lie within this distance of a flight-blocking segment.
pub const DEFAULT_CLEARANCE_M: f64 = 1.0;

/// An immutable indoor floor plan.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    width: u32,
    height: u32,
    clearance_m: f64,
    walls: Vec<Wall>,
    blocked: Vec<bool>,
}

impl FloorPlan {
    pub fn new(
        width: u32,
        height: u32,
        walls: Vec<Wall>,
        clearance_m: f64,
    ) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyPlan { width, height });
        }
        if !clearance_m.is_finite() || clearance_m < 0.0 {
            return Err(GeometryError::BadClearance(clearance_m));
        }
        let (w, h) = (width as f64, height as f64);
        for (index, wall) in walls.iter().enumerate() {
            if wall.p1 == wall.p2 {
                return Err(GeometryError::DegenerateWall { index });
            }
            if !wall.attenuation_db.is_finite() || wall.attenuation_db < 0.0 {
                return Err(GeometryError::BadAttenuation {
                    index,
                    value: wall.attenuation_db,
                });
            }
            for p in [wall.p1, wall.p2] {
                if !(0.0..=w).contains(&p.x) || !(0.0..=h).contains(&p.y) {
                    return Err(GeometryError::WallOutOfBounds {
                        index,
                        x: p.x,
                        y: p.y,
                        width,
                        height,
                    });
                }
            }
        }

        let mut blocked = vec![false; width as usize * height as usize];
        for y in 0..height as i32 {
            for x in 0..width as i32 {
                let c = Position::new(x, y).center();
                blocked[(y as usize) * width as usize + x as usize] = walls
                    .iter()
                    .filter(|w| w.kind.blocks_flight())
                    .any(|w| point_segment_distance(c, w.p1, w.p2) <= clearance_m);
            }
        }

        Ok(Self {
            width,
            height,
            clearance_m,
            walls,
            blocked,
        })
    }

    /// A plan with no interior segments.
    pub fn open(width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(width, height, Vec::new(), DEFAULT_CLEARANCE_M)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn clearance_m(&self) -> f64 {
        self.clearance_m
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn cell_count(&self) -> usize {
        self.blocked.len()
    }

    pub fn in_bounds(&self, pos: Position) -> bool {
        pos.x >= 0 && pos.y >= 0 && (pos.x as u32) < self.width && (pos.y as u32) < self.height
    }

    pub fn contains_point(&self, p: Point) -> bool {
        (0.0..=self.width as f64).contains(&p.x) && (0.0..=self.height as f64).contains(&p.y)
    }

    /// Row-major linear index of an in-bounds cell.
    pub fn cell_index(&self, pos: Position) -> Option<usize> {
        self.in_bounds(pos)
            .then(|| pos.y as usize * self.width as usize + pos.x as usize)
    }

    pub fn position_of(&self, index: usize) -> Position {
        let w = self.width as usize;
        Position::new((index % w) as i32, (index / w) as i32)
    }

    pub fn is_blocked(&self, pos: Position) -> bool {
        self.cell_index(pos).is_some_and(|i| self.blocked[i])
    }

    pub fn is_free(&self, pos: Position) -> bool {
        self.cell_index(pos).is_some_and(|i| !self.blocked[i])
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.blocked.len())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.position_of(i))
    }

    /// Whether the straight segment `p1`-`p2` touches any flight-blocking segment.
    pub fn path_obstructed(&self, p1: Point, p2: Point) -> bool {
        self.walls
            .iter()
            .filter(|w| w.kind.blocks_flight())
            .any(|w| segment_intersects_wall(p1, p2, w))
    }

    pub fn apply_action(&self, pos: Position, action: Action) -> Result<Move, GeometryError> {
        if !self.is_free(pos) {
            return Err(GeometryError::InvalidStart { x: pos.x, y: pos.y });
        }
        let next = pos.offset(action);
        if !self.is_free(next) || self.path_obstructed(pos.center(), next.center()) {
            return Ok(Move::Blocked);
        }
        Ok(Move::To(next))
    }

    /// Walls of every kind crossed by the segment `p1`-`p2`, with summed loss.
    pub fn count_wall_crossings(&self, p1: Point, p2: Point) -> WallCrossings {
        let mut out = WallCrossings::default();
        for w in &self.walls {
            if segment_intersects_wall(p1, p2, w) {
                out.count += 1;
                out.total_attenuation_db += w.attenuation_db;
            }
        }
        out
    }

    /// Free cells reachable from `start` by valid moves (flood fill).
    pub fn reachable_from(&self, start: Position) -> Vec<bool> {
        let mut seen = vec![false; self.cell_count()];
        let Some(si) = self.cell_index(start) else {
            return seen;
        };
        if self.blocked[si] {
            return seen;
        }
        seen[si] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(pos) = queue.pop_front() {
            for a in Action::ALL {
                if let Ok(Move::To(next)) = self.apply_action(pos, a) {
                    let ni = self.cell_index(next).expect("in bounds");
                    if !seen[ni] {
                        seen[ni] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        seen
    }

    pub fn move_table(&self) -> MoveTable {
        MoveTable::new(self)
    }
}

/// Destinations of every (free cell, action) pair, precomputed once so the
/// training loop does not repeat segment tests.
#[derive(Debug, Clone)]
pub struct MoveTable {
    width: u32,
    targets: Vec<[Option<u32>; 8]>,
}

impl MoveTable {
    fn new(plan: &FloorPlan) -> Self {
        let targets = (0..plan.cell_count())
            .map(|i| {
                let pos = plan.position_of(i);
                let mut row = [None; 8];
                if plan.is_free(pos) {
                    for a in Action::ALL {
                        if let Ok(Move::To(next)) = plan.apply_action(pos, a) {
                            row[a.index()] = plan.cell_index(next).map(|j| j as u32);
                        }
                    }
                }
                row
            })
            .collect();
        Self {
            width: plan.width,
            targets,
        }
    }

    pub fn destination(&self, pos: Position, action: Action) -> Option<Position> {
        let w = self.width as usize;
        if pos.x < 0 || pos.y < 0 || pos.x as usize >= w {
            return None;
        }
        let idx = pos.y as usize * w + pos.x as usize;
        let t = self.targets.get(idx)?[action.index()]?;
        Some(Position::new(
            (t as usize % w) as i32,
            (t as usize / w) as i32,
        ))
    }
}
