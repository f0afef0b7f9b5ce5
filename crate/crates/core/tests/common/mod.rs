//! Independent oracles for the integration tests. Geometry, connectivity and
//! path search are recomputed here from the raw scenario numbers instead of
//! going through the simulator's world model.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::fmt::Write as _;

use adhocsim::scenario::{self, ScenarioSpec};
use rand::Rng;

/// Position of `node` at `t` seconds: legs are straight lines at constant
/// speed, starting from wherever the previous leg ended.
pub fn pos_at(spec: &ScenarioSpec, node: usize, t: f64) -> (f64, f64) {
    let (_, p0) = spec.nodes[node];
    let (mut x, mut y) = (p0.x, p0.y);
    let mut legs: Vec<_> = spec.movements.iter().filter(|l| l.node.0 as usize == node).collect();
    legs.sort_by_key(|l| l.start_time);
    for leg in legs {
        let start = leg.start_time.as_secs();
        if t <= start {
            break;
        }
        let (dx, dy) = (leg.dest.x - x, leg.dest.y - y);
        let len = (dx * dx + dy * dy).sqrt();
        let travelled = (t - start) * leg.speed;
        if travelled >= len {
            x = leg.dest.x;
            y = leg.dest.y;
        } else {
            x += dx * travelled / len;
            y += dy * travelled / len;
            break;
        }
    }
    (x, y)
}

/// Unit-disk adjacency matrix at `t`, boundary inclusive.
pub fn adjacency(spec: &ScenarioSpec, t: f64) -> Vec<Vec<bool>> {
    let n = spec.nodes.len();
    let pos: Vec<_> = (0..n).map(|i| pos_at(spec, i, t)).collect();
    let r2 = spec.radio.range * spec.radio.range;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                    i != j && dx * dx + dy * dy <= r2
                })
                .collect()
        })
        .collect()
}

pub fn bfs_dist(adj: &[Vec<bool>], src: usize, dst: usize) -> Option<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            return Some(dist[u]);
        }
        for v in 0..adj.len() {
            if adj[u][v] && dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    None
}

pub fn is_connected(adj: &[Vec<bool>]) -> bool {
    (1..adj.len()).all(|d| bfs_dist(adj, 0, d).is_some())
}

/// Every minimum-hop path from `src` to `dst`, by exhaustive search.
pub fn shortest_paths(adj: &[Vec<bool>], src: usize, dst: usize) -> Vec<Vec<usize>> {
    let Some(d) = bfs_dist(adj, src, dst) else { return Vec::new() };
    let mut out = Vec::new();
    let mut path = vec![src];
    extend(adj, dst, d as usize, &mut path, &mut out);
    out
}

fn extend(adj: &[Vec<bool>], dst: usize, hops: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let last = *path.last().unwrap();
    if path.len() == hops + 1 {
        if last == dst {
            out.push(path.clone());
        }
        return;
    }
    for v in 0..adj.len() {
        if adj[last][v] && !path.contains(&v) {
            path.push(v);
            extend(adj, dst, hops, path, out);
            path.pop();
        }
    }
}

/// The unique shortest path at `t`, or `None` when absent or ambiguous.
pub fn unique_shortest(spec: &ScenarioSpec, src: usize, dst: usize, t: f64) -> Option<Vec<usize>> {
    let mut paths = shortest_paths(&adjacency(spec, t), src, dst);
    (paths.len() == 1).then(|| paths.remove(0))
}

/// Static layout with every node inside a `side` square, redrawn until connected.
pub fn random_static_connected(rng: &mut impl Rng, n: usize, side: f64, end: f64) -> (ScenarioSpec, usize, usize) {
    loop {
        let mut text = format!("area {side} {side}\nrange 250\n");
        for i in 0..n {
            let _ = writeln!(text, "node {i} {:.1} {:.1}", rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        }
        let src = rng.gen_range(0..n);
        let dst = (src + rng.gen_range(1..n)) % n;
        let _ = writeln!(text, "flow {src} {dst} 10 512 1.0 {:.1}\nend {end:.1}", end - 0.5);
        let spec = scenario::parse(&text).expect("generated scenario parses");
        if is_connected(&adjacency(&spec, 0.0)) {
            return (spec, src, dst);
        }
    }
}

/// Up to ten nodes with random waypoint legs and one to three random flows.
pub fn random_mobile(rng: &mut impl Rng) -> ScenarioSpec {
    let n = rng.gen_range(2..=10usize);
    let side = 700.0;
    let end = 6.0;
    let mut text = format!("area {side} {side}\nrange 250\n");
    // Everything is drawn pre-rounded to what the text can express, so leg
    // durations computed here are exactly the simulator's.
    fn coord(rng: &mut impl Rng) -> (f64, f64) {
        (f64::from(rng.gen_range(0..7000)) / 10.0, f64::from(rng.gen_range(0..7000)) / 10.0)
    }
    let mut start = Vec::new();
    for i in 0..n {
        let p = coord(rng);
        start.push(p);
        let _ = writeln!(text, "node {i} {} {}", p.0, p.1);
    }
    for (i, &origin) in start.iter().enumerate() {
        let (mut here, mut ms) = (origin, rng.gen_range(200..2000u32));
        for _ in 0..rng.gen_range(0..=2) {
            if f64::from(ms) / 1000.0 >= end - 0.5 {
                break;
            }
            let dest = coord(rng);
            let speed = f64::from(rng.gen_range(5..60u32));
            let _ = writeln!(text, "move {} {i} {} {} {speed}", f64::from(ms) / 1000.0, dest.0, dest.1);
            let len = ((dest.0 - here.0).powi(2) + (dest.1 - here.1).powi(2)).sqrt();
            ms += (len / speed * 1000.0).ceil() as u32 + 10 + rng.gen_range(0..1000);
            here = dest;
        }
    }
    for _ in 0..rng.gen_range(1..=3) {
        let src = rng.gen_range(0..n);
        let dst = (src + rng.gen_range(1..n)) % n;
        let begin: f64 = rng.gen_range(0.1..3.0);
        let stop: f64 = rng.gen_range(begin + 0.5..end);
        let rate = rng.gen_range(2.0..20.0);
        let _ = writeln!(text, "flow {src} {dst} {rate:.1} 512 {begin:.2} {stop:.2}");
    }
    let _ = writeln!(text, "end {end}");
    scenario::parse(&text).unwrap_or_else(|e| panic!("generated scenario rejected: {e}\n{text}"))
}
