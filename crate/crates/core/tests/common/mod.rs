//! Test-side geometry oracles, written independently of the library.
#![allow(dead_code)]

use std::path::PathBuf;

use uavsar::geometry::{FloorPlan, Point, Position, Wall};
use uavsar::scenario::{parse_scenario, ScenarioConfig};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn bundled(name: &str) -> ScenarioConfig {
    parse_scenario(&scenario_path(name)).expect("bundled scenario parses")
}

pub fn point_seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * vx, a.1 + t * vy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Minimum distance between two closed segments (0 when they touch).
pub fn seg_seg_dist(a1: (f64, f64), a2: (f64, f64), b1: (f64, f64), b2: (f64, f64)) -> f64 {
    let (rx, ry) = (a2.0 - a1.0, a2.1 - a1.1);
    let (sx, sy) = (b2.0 - b1.0, b2.1 - b1.1);
    let den = rx * sy - ry * sx;
    if den != 0.0 {
        let (qx, qy) = (b1.0 - a1.0, b1.1 - a1.1);
        let t = (qx * sy - qy * sx) / den;
        let u = (qx * ry - qy * rx) / den;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return 0.0;
        }
    }
    point_seg_dist(a1, b1, b2)
        .min(point_seg_dist(a2, b1, b2))
        .min(point_seg_dist(b1, a1, a2))
        .min(point_seg_dist(b2, a1, a2))
}

fn xy(p: Point) -> (f64, f64) {
    (p.x, p.y)
}

fn centre(c: Position) -> (f64, f64) {
    (c.x as f64 + 0.5, c.y as f64 + 0.5)
}

pub fn flight_walls(plan: &FloorPlan) -> impl Iterator<Item = &Wall> {
    plan.walls().iter().filter(|w| w.kind.blocks_flight())
}

/// Free means in bounds and farther than the clearance from every
/// flight-blocking segment.
pub fn oracle_free(plan: &FloorPlan, c: Position) -> bool {
    c.x >= 0
        && c.y >= 0
        && (c.x as u32) < plan.width()
        && (c.y as u32) < plan.height()
        && flight_walls(plan)
            .all(|w| point_seg_dist(centre(c), xy(w.p1), xy(w.p2)) > plan.clearance_m())
}

pub fn hop_hits_wall(plan: &FloorPlan, from: Position, to: Position) -> bool {
    flight_walls(plan).any(|w| seg_seg_dist(centre(from), centre(to), xy(w.p1), xy(w.p2)) < 1e-12)
}

/// Walls of the given kind crossed by the straight path between two points.
pub fn crossings_of_kind(
    plan: &FloorPlan,
    a: Point,
    b: Point,
    kind: uavsar::geometry::WallKind,
) -> usize {
    plan.walls()
        .iter()
        .filter(|w| w.kind == kind && seg_seg_dist(xy(a), xy(b), xy(w.p1), xy(w.p2)) < 1e-12)
        .count()
}

/// 8-connected BFS over oracle-free cells, with hops that touch no
/// flight-blocking wall. Returns the hop count to every reachable cell.
pub fn bfs_steps(plan: &FloorPlan, start: Position) -> Vec<Option<usize>> {
    let w = plan.width() as i32;
    let h = plan.height() as i32;
    let idx = |c: Position| (c.y * w + c.x) as usize;
    let mut dist = vec![None; (w * h) as usize];
    if !oracle_free(plan, start) {
        return dist;
    }
    dist[idx(start)] = Some(0);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)].unwrap();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let n = Position::new(c.x + dx, c.y + dy);
                if oracle_free(plan, n) && dist[idx(n)].is_none() && !hop_hits_wall(plan, c, n) {
                    dist[idx(n)] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}
