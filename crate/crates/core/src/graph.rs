//! Centerline graph: junction detection, segment tracing, the segment-end
//! adjacency relation and simple-path enumeration between candidate nodes.

use std::collections::BTreeSet;

use crate::geometry::{Point, Polyline};
use crate::raster::{BinaryMask, NEIGHBORS_8};

/// Junction pixels closer than this (Chebyshev) belong to one junction.
const JUNCTION_LINK: usize = 2;

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Single-linkage clusters of the skeleton's branch pixels (three or more
/// set neighbours), each in raster order, clusters ordered by first pixel.
fn junction_clusters(skel: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let pixels: Vec<(usize, usize)> = skel
        .pixels()
        .filter(|&(x, y)| skel.neighbor_count(x, y) >= 3)
        .collect();
    let mut cluster_of = vec![usize::MAX; pixels.len()];
    let mut clusters: Vec<Vec<(usize, usize)>> = Vec::new();
    for start in 0..pixels.len() {
        if cluster_of[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        cluster_of[start] = id;
        let mut members = vec![start];
        let mut k = 0;
        while k < members.len() {
            let p = pixels[members[k]];
            for j in 0..pixels.len() {
                if cluster_of[j] == usize::MAX && chebyshev(p, pixels[j]) <= JUNCTION_LINK {
                    cluster_of[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        clusters.push(members.into_iter().map(|i| pixels[i]).collect());
    }
    clusters
}

fn centroid(pixels: &[(usize, usize)]) -> Point {
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.0 as f64, b + p.1 as f64));
    Point::new(sx / n, sy / n)
}

/// Junctions of a one-pixel-wide skeleton: centroids of clusters of pixels
/// with three or more set 8-neighbours.
pub fn detect_junctions(skel: &BinaryMask) -> Vec<Point> {
    junction_clusters(skel).iter().map(|c| centroid(c)).collect()
}

/// Splits the skeleton at its junctions into ordered pixel chains.
///
/// Chain ends touching a junction cluster are extended to that junction's
/// point from `junctions` (nearest to the cluster centroid), so segments that
/// meet at a junction share an exact endpoint. Isolated pixels, chains of at
/// most two pixels hanging between one junction and nothing, and chains of at
/// most two pixels with both ends on the same junction are dropped.
pub fn split_segments(skel: &BinaryMask, junctions: &[Point]) -> Vec<Polyline> {
    let (w, h) = skel.dims();
    let clusters = junction_clusters(skel);
    let mut cluster_at = vec![usize::MAX; w * h];
    let mut cluster_point = Vec::with_capacity(clusters.len());
    for (id, c) in clusters.iter().enumerate() {
        for &(x, y) in c {
            cluster_at[y * w + x] = id;
        }
        let cen = centroid(c);
        let snapped = junctions
            .iter()
            .min_by(|a, b| a.dist2(&cen).total_cmp(&b.dist2(&cen)))
            .copied()
            .unwrap_or(cen);
        cluster_point.push(snapped);
    }
    let is_chain = |x: isize, y: isize| -> bool {
        skel.get_signed(x, y) && cluster_at[y as usize * w + x as usize] == usize::MAX
    };
    let chain_neighbours = |(x, y): (usize, usize)| -> Vec<(usize, usize)> {
        NEIGHBORS_8
            .iter()
            .map(|(dx, dy)| (x as isize + dx, y as isize + dy))
            .filter(|&(nx, ny)| is_chain(nx, ny))
            .map(|(nx, ny)| (nx as usize, ny as usize))
            .collect()
    };
    let touching_cluster = |(x, y): (usize, usize)| -> Option<usize> {
        NEIGHBORS_8
            .iter()
            .map(|(dx, dy)| (x as isize + dx, y as isize + dy))
            .filter(|&(nx, ny)| skel.get_signed(nx, ny))
            .map(|(nx, ny)| cluster_at[ny as usize * w + nx as usize])
            .find(|c| *c != usize::MAX)
    };

    let mut visited = vec![false; w * h];
    let mut segments = Vec::new();
    let chain_pixels: Vec<(usize, usize)> = skel
        .pixels()
        .filter(|&(x, y)| cluster_at[y * w + x] == usize::MAX)
        .collect();
    // Chain ends first, so open chains are traced end to end; rings last.
    let mut starts: Vec<(usize, usize)> = chain_pixels
        .iter()
        .copied()
        .filter(|&p| chain_neighbours(p).len() <= 1)
        .collect();
    starts.extend(chain_pixels.iter().copied());
    for start in starts {
        if visited[start.1 * w + start.0] {
            continue;
        }
        let mut chain = vec![start];
        visited[start.1 * w + start.0] = true;
        let mut cur = start;
        while let Some(next) = chain_neighbours(cur)
            .into_iter()
            .find(|p| !visited[p.1 * w + p.0])
        {
            visited[next.1 * w + next.0] = true;
            chain.push(next);
            cur = next;
        }
        let head = touching_cluster(chain[0]);
        let tail = touching_cluster(*chain.last().unwrap());
        let short = chain.len() <= 2;
        match (head, tail) {
            (None, None) if chain.len() == 1 => continue,
            (Some(a), Some(b)) if a == b && short => continue,
            (Some(_), None) | (None, Some(_)) if short => continue,
            _ => {}
        }
        let mut pts: Vec<Point> = Vec::with_capacity(chain.len() + 2);
        if let Some(c) = head {
            pts.push(cluster_point[c]);
        }
        pts.extend(chain.iter().map(|&(x, y)| Point::new(x as f64, y as f64)));
        if let Some(c) = tail {
            // A single pixel touching one cluster has the same head and tail.
            if chain.len() > 1 || head != tail {
                pts.push(cluster_point[c]);
            }
        }
        if let Ok(line) = Polyline::new(pts) {
            segments.push(line.densify(1.0));
        }
    }
    segments
}

/// Graph `G = (C, B)`: segments as edges between junction and free-end nodes,
/// plus the adjacency relation over segment ends (end `2s` is the first point
/// of segment `s`, end `2s + 1` its last point).
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineGraph {
    pub segments: Vec<Polyline>,
    pub junctions: Vec<Point>,
    /// Node positions: the junctions first, then free-end nodes.
    pub nodes: Vec<Point>,
    pub segment_end_nodes: Vec<[usize; 2]>,
    /// Symmetric `2S x 2S` relation with zero diagonal: two ends are adjacent
    /// when they are the two ends of one segment, or ends of different
    /// segments at the same node.
    pub adjacency: Vec<Vec<bool>>,
}

impl CenterlineGraph {
    /// Graph over explicit nodes with straight segments between them.
    /// Junction nodes are the nodes touched by three or more segment ends.
    pub fn from_edges(nodes: Vec<Point>, edges: &[(usize, usize)]) -> Self {
        let segments: Vec<Polyline> = edges
            .iter()
            .map(|&(a, b)| Polyline::from_raw(vec![nodes[a], nodes[b]]))
            .collect();
        let ends: Vec<[usize; 2]> = edges.iter().map(|&(a, b)| [a, b]).collect();
        let mut degree = vec![0usize; nodes.len()];
        for e in &ends {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let junctions = (0..nodes.len())
            .filter(|&i| degree[i] >= 3)
            .map(|i| nodes[i])
            .collect();
        let adjacency = end_adjacency(&ends);
        Self {
            segments,
            junctions,
            nodes,
            segment_end_nodes: ends,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `(segment, other node)` for every segment incident to `node`, by
    /// segment index. A self-loop is listed once.
    pub fn incident(&self, node: usize) -> Vec<(usize, usize)> {
        self.segment_end_nodes
            .iter()
            .enumerate()
            .filter_map(|(s, e)| {
                if e[0] == node {
                    Some((s, e[1]))
                } else if e[1] == node {
                    Some((s, e[0]))
                } else {
                    None
                }
            })
            .collect()
    }
}

#[allow(clippy::needless_range_loop)]
fn end_adjacency(ends: &[[usize; 2]]) -> Vec<Vec<bool>> {
    let n = 2 * ends.len();
    let node_of = |k: usize| ends[k / 2][k % 2];
    let mut adj = vec![vec![false; n]; n];
    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            let same_segment = k / 2 == l / 2;
            adj[k][l] = same_segment || node_of(k) == node_of(l);
        }
    }
    adj
}

/// Assigns every segment end to a node and derives the end adjacency.
///
/// An end within `snap_radius` of a junction joins the nearest junction.
/// Remaining ends are grouped by single linkage at `snap_radius`; each group
/// becomes a node at its centroid.
#[allow(clippy::needless_range_loop)]
pub fn build_graph(segments: Vec<Polyline>, junctions: Vec<Point>, snap_radius: f64) -> CenterlineGraph {
    let n_ends = 2 * segments.len();
    let end_point = |k: usize| {
        let s = &segments[k / 2];
        if k.is_multiple_of(2) {
            s.first()
        } else {
            s.last()
        }
    };
    let mut node_of = vec![usize::MAX; n_ends];
    let mut free = Vec::new();
    for k in 0..n_ends {
        let p = end_point(k);
        let nearest = junctions
            .iter()
            .enumerate()
            .map(|(i, j)| (i, j.dist(&p)))
            .filter(|(_, d)| *d <= snap_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, _)) => node_of[k] = i,
            None => free.push(k),
        }
    }
    let mut nodes = junctions.clone();
    let mut group = vec![usize::MAX; free.len()];
    for i in 0..free.len() {
        if group[i] != usize::MAX {
            continue;
        }
        let id = nodes.len();
        group[i] = id;
        let mut members = vec![i];
        let mut q = 0;
        while q < members.len() {
            let p = end_point(free[members[q]]);
            for j in 0..free.len() {
                if group[j] == usize::MAX && end_point(free[j]).dist(&p) <= snap_radius {
                    group[j] = id;
                    members.push(j);
                }
            }
            q += 1;
        }
        let n = members.len() as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |(a, b), &m| {
            let p = end_point(free[m]);
            (a + p.x, b + p.y)
        });
        nodes.push(Point::new(sx / n, sy / n));
    }
    for (i, &k) in free.iter().enumerate() {
        node_of[k] = group[i];
    }
    let segment_end_nodes: Vec<[usize; 2]> = (0..segments.len())
        .map(|s| [node_of[2 * s], node_of[2 * s + 1]])
        .collect();
    let adjacency = end_adjacency(&segment_end_nodes);
    CenterlineGraph {
        segments,
        junctions,
        nodes,
        segment_end_nodes,
        adjacency,
    }
}

/// End nodes of the `n` segments nearest to `guided` (distance to the closest
/// segment vertex, ties to the lower segment index), sorted and deduplicated.
pub fn candidate_endpoints(graph: &CenterlineGraph, guided: &Point, n: usize) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = graph
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (s.min_vertex_distance(guided), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let set: BTreeSet<usize> = ranked
        .iter()
        .take(n)
        .flat_map(|&(_, s)| graph.segment_end_nodes[s])
        .collect();
    set.into_iter().collect()
}

/// A simple path through the graph and its concatenated polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub nodes: Vec<usize>,
    pub segments: Vec<usize>,
    pub polyline: Polyline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnumeration {
    pub paths: Vec<CandidatePath>,
    /// Set when the path cap or the search budget stopped the enumeration.
    pub truncated: bool,
}

/// Node visits allowed per requested path before the search gives up.
const VISITS_PER_PATH: usize = 1024;

struct Dfs<'a> {
    graph: &'a CenterlineGraph,
    ends: BTreeSet<usize>,
    max_paths: usize,
    budget: usize,
    on_path: Vec<bool>,
    nodes: Vec<usize>,
    segments: Vec<usize>,
    out: Vec<CandidatePath>,
    truncated: bool,
}

impl Dfs<'_> {
    fn visit(&mut self, node: usize) {
        if self.truncated {
            return;
        }
        if self.budget == 0 {
            self.truncated = true;
            return;
        }
        self.budget -= 1;
        if !self.segments.is_empty() && self.ends.contains(&node) {
            if self.out.len() == self.max_paths {
                self.truncated = true;
                return;
            }
            let polyline = concatenate(self.graph, &self.nodes, &self.segments);
            self.out.push(CandidatePath {
                nodes: self.nodes.clone(),
                segments: self.segments.clone(),
                polyline,
            });
        }
        for (s, next) in self.graph.incident(node) {
            if self.on_path[next] {
                continue;
            }
            self.on_path[next] = true;
            self.nodes.push(next);
            self.segments.push(s);
            self.visit(next);
            self.segments.pop();
            self.nodes.pop();
            self.on_path[next] = false;
        }
    }
}

/// Joins the path's segments, each oriented to leave the node it starts at.
fn concatenate(graph: &CenterlineGraph, nodes: &[usize], segments: &[usize]) -> Polyline {
    let mut pts: Vec<Point> = Vec::new();
    for (k, &s) in segments.iter().enumerate() {
        let seg = &graph.segments[s];
        let forward = graph.segment_end_nodes[s][0] == nodes[k];
        let oriented: Vec<Point> = if forward {
            seg.points().to_vec()
        } else {
            seg.points().iter().rev().copied().collect()
        };
        for p in oriented {
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
    }
    match Polyline::new(pts.clone()) {
        Ok(line) => line.densify(1.0),
        Err(_) => Polyline::from_raw(vec![pts[0], pts[0]]),
    }
}

/// All simple paths (no repeated node) from any node in `starts` to any node
/// in `ends`, by depth-first search from each start in ascending order.
///
/// Paths are identified by start node and segment sequence, so parallel
/// segments between the same nodes yield distinct paths. Enumeration stops after
/// `max_paths` paths and reports truncation.
pub fn enumerate_paths(
    graph: &CenterlineGraph,
    starts: &[usize],
    ends: &[usize],
    max_paths: usize,
) -> PathEnumeration {
    let starts: BTreeSet<usize> = starts.iter().copied().collect();
    let mut dfs = Dfs {
        graph,
        ends: ends.iter().copied().collect(),
        max_paths,
        budget: max_paths.saturating_mul(VISITS_PER_PATH),
        on_path: vec![false; graph.node_count()],
        nodes: Vec::new(),
        segments: Vec::new(),
        out: Vec::new(),
        truncated: false,
    };
    for s in starts {
        dfs.on_path[s] = true;
        dfs.nodes.push(s);
        dfs.visit(s);
        dfs.nodes.pop();
        dfs.on_path[s] = false;
        if dfs.truncated {
            break;
        }
    }
    PathEnumeration {
        paths: dfs.out,
        truncated: dfs.truncated,
    }
}
