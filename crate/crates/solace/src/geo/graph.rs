//! Road graph construction, shortest-path routing, and debris blocking.
//!
//! Routing is deterministic: among equal-length shortest routes the smaller
//! safe-area id wins, then the lexicographically smaller edge-id sequence.
//! Equal lengths are compared exactly; planned fixtures produce exact float
//! ties (uniform grid spacing), arbitrary geometry effectively never does.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::geom::{self, Bbox, Point2D};
use super::{BlockedSet, Edge, EdgeId, Environment, Node, NodeId, RoadGraph, SafeAreaId};

/// When is an edge considered impassable next to a debris polygon?
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum BlockingRule {
    /// Blocked iff the debris polygon touches the edge centerline.
    Centerline,
    /// Blocked iff the debris intrusion leaves less than `min_passable`
    /// meters of the edge's width.
    WidthAware { min_passable: f64 },
}

impl Default for BlockingRule {
    fn default() -> Self {
        BlockingRule::Centerline
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub source: NodeId,
    pub target: NodeId,
    /// Edge ids from source to target.
    pub edges: Vec<EdgeId>,
    /// Node sequence, source first, target last.
    pub nodes: Vec<NodeId>,
    /// Sum of edge lengths (off-graph hops not included).
    pub length: f64,
    /// Safe area reached, when routing to safety.
    pub area: Option<SafeAreaId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteResult {
    /// The start point already lies inside a safe area.
    AlreadySafe(SafeAreaId),
    Route(Route),
    /// No unblocked path reaches any safe area.
    Unreachable,
}

/// Incremental graph builder with endpoint snapping.
pub(crate) struct GraphBuilder {
    snap: f64,
    nodes: Vec<Point2D>,
    edges: Vec<(usize, usize, f64)>, // a, b, width
}

pub(crate) enum SegmentOutcome {
    Added,
    /// Both endpoints snapped to the same node.
    Collapsed,
}

impl GraphBuilder {
    pub fn new(snap: f64) -> Self {
        GraphBuilder {
            snap,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Nearest existing node within the snap tolerance, else a fresh node.
    /// Ties go to the smallest node id.
    fn node_for(&mut self, p: Point2D) -> usize {
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.dist(p);
            if d <= self.snap && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        match best {
            Some((_, i)) => i,
            None => {
                self.nodes.push(p);
                self.nodes.len() - 1
            }
        }
    }

    pub fn add_segment(&mut self, a: Point2D, b: Point2D, width: f64) -> SegmentOutcome {
        let na = self.node_for(a);
        let nb = self.node_for(b);
        if na == nb {
            return SegmentOutcome::Collapsed;
        }
        self.edges.push((na, nb, width));
        SegmentOutcome::Added
    }

    pub fn build(self) -> RoadGraph {
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, p)| Node {
                id: NodeId(i as u32),
                pos: *p,
            })
            .collect();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b, width))| Edge {
                id: EdgeId(i as u32),
                a: NodeId(a as u32),
                b: NodeId(b as u32),
                length: self.nodes[a].dist(self.nodes[b]),
                width,
            })
            .collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.a.index()].push(e.id);
            adjacency[e.b.index()].push(e.id);
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        RoadGraph {
            nodes,
            edges,
            adjacency,
        }
    }
}

/// Node nearest to the point (Euclidean; ties to the smaller id).
pub fn nearest_node(env: &Environment, p: Point2D) -> NodeId {
    let mut best = (f64::INFINITY, NodeId(0));
    for n in &env.graph.nodes {
        let d = n.pos.dist(p);
        if d < best.0 {
            best = (d, n.id);
        }
    }
    best.1
}

/// Min-heap entry ordered by (distance, node id).
struct Scored(f64, NodeId);

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 && self.1 == other.1
    }
}
impl Eq for Scored {}
impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap. Lengths are finite.
        other
            .0
            .partial_cmp(&self.0)
            .unwrap()
            .then_with(|| other.1.cmp(&self.1))
    }
}

fn dijkstra(graph: &RoadGraph, blocked: &BlockedSet, source: NodeId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.nodes.len()];
    dist[source.index()] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Scored(0.0, source));
    while let Some(Scored(d, u)) = heap.pop() {
        if d > dist[u.index()] {
            continue;
        }
        for &eid in &graph.adjacency[u.index()] {
            if blocked.contains(&eid) {
                continue;
            }
            let e = &graph.edges[eid.index()];
            let v = graph.other_end(eid, u);
            let nd = d + e.length;
            if nd < dist[v.index()] {
                dist[v.index()] = nd;
                heap.push(Scored(nd, v));
            }
        }
    }
    dist
}

/// Relative slack when checking whether an edge lies on a shortest path.
/// Float sums along different orderings of the same edges may differ by ulps.
const ON_PATH_EPS: f64 = 1e-9;

fn approx_eq(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= ON_PATH_EPS * scale.max(1.0)
}

/// Lexicographically smallest edge-id sequence among shortest source->target
/// paths, using forward distances from the source and backward distances from
/// the target to stay on shortest-path edges.
fn lex_min_path(
    graph: &RoadGraph,
    blocked: &BlockedSet,
    dist_s: &[f64],
    dist_t: &[f64],
    source: NodeId,
    target: NodeId,
) -> (Vec<EdgeId>, Vec<NodeId>) {
    let total = dist_s[target.index()];
    let mut edges = Vec::new();
    let mut nodes = vec![source];
    let mut u = source;
    let mut guard = graph.edges.len() + 1;
    while u != target {
        let mut next: Option<(EdgeId, NodeId)> = None;
        for &eid in &graph.adjacency[u.index()] {
            if blocked.contains(&eid) {
                continue;
            }
            let e = &graph.edges[eid.index()];
            let v = graph.other_end(eid, u);
            if approx_eq(dist_s[u.index()] + e.length, dist_s[v.index()], total)
                && approx_eq(dist_s[v.index()] + dist_t[v.index()], total, total)
            {
                next = Some((eid, v));
                break; // adjacency is ascending by edge id
            }
        }
        let (eid, v) = next.expect("shortest-path walk lost the target");
        edges.push(eid);
        nodes.push(v);
        u = v;
        guard -= 1;
        assert!(guard > 0, "shortest-path walk did not terminate");
    }
    (edges, nodes)
}

/// Shortest route from the point's nearest node to the nearest node touching
/// any safe area, over unblocked edges.
pub fn route_to_nearest_safe_area(
    env: &Environment,
    blocked: &BlockedSet,
    from: Point2D,
) -> RouteResult {
    if let Some(area) = env.safe_area_at(from) {
        return RouteResult::AlreadySafe(area);
    }
    let source = nearest_node(env, from);
    let dist_s = dijkstra(&env.graph, blocked, source);
    // Best (length, area id) over reachable safe nodes; exact length compare.
    let mut best: Option<(f64, SafeAreaId)> = None;
    for &(n, area) in &env.safe_nodes {
        let d = dist_s[n.index()];
        if !d.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, ba)) => d < bd || (d == bd && area < ba),
        };
        if better {
            best = Some((d, area));
        }
    }
    let Some((best_d, best_area)) = best else {
        return RouteResult::Unreachable;
    };
    let mut chosen: Option<(Vec<EdgeId>, Vec<NodeId>, NodeId)> = None;
    for &(n, area) in &env.safe_nodes {
        if area != best_area || dist_s[n.index()] != best_d {
            continue;
        }
        let dist_t = dijkstra(&env.graph, blocked, n);
        let (edges, nodes) = lex_min_path(&env.graph, blocked, &dist_s, &dist_t, source, n);
        let replace = match &chosen {
            None => true,
            Some((cur, _, _)) => edges < *cur,
        };
        if replace {
            chosen = Some((edges, nodes, n));
        }
    }
    let (edges, nodes, target) = chosen.expect("reachable safe node vanished");
    RouteResult::Route(Route {
        source,
        target,
        edges,
        nodes,
        length: best_d,
        area: Some(best_area),
    })
}

/// Shortest route between the nearest nodes of two points, over unblocked
/// edges. `None` when unreachable. A zero-edge route is returned when both
/// points share a nearest node.
pub fn route_between(
    env: &Environment,
    blocked: &BlockedSet,
    from: Point2D,
    to: Point2D,
) -> Option<Route> {
    let source = nearest_node(env, from);
    let target = nearest_node(env, to);
    let dist_s = dijkstra(&env.graph, blocked, source);
    if !dist_s[target.index()].is_finite() {
        return None;
    }
    let dist_t = dijkstra(&env.graph, blocked, target);
    let (edges, nodes) = lex_min_path(&env.graph, blocked, &dist_s, &dist_t, source, target);
    Some(Route {
        source,
        target,
        edges,
        nodes,
        length: dist_s[target.index()],
        area: None,
    })
}

/// Union of `base` and every edge a debris polygon renders impassable under
/// the rule. Monotone: more debris never unblocks an edge.
pub fn apply_debris_blocking<R: AsRef<[Point2D]>>(
    env: &Environment,
    zones: &[R],
    base: &BlockedSet,
    rule: BlockingRule,
) -> BlockedSet {
    let mut blocked = base.clone();
    let zone_boxes: Vec<Bbox> = zones
        .iter()
        .map(|z| Bbox::of_ring(z.as_ref()))
        .collect();
    for e in &env.graph.edges {
        if blocked.contains(&e.id) {
            continue;
        }
        let a = env.node_pos(e.a);
        let b = env.node_pos(e.b);
        let reach = match rule {
            BlockingRule::Centerline => 0.0,
            BlockingRule::WidthAware { .. } => e.width / 2.0,
        };
        let seg_box = Bbox::of_segment(a, b).expand(reach);
        for (zone, zbox) in zones.iter().zip(&zone_boxes) {
            if !seg_box.intersects(*zbox) {
                continue;
            }
            let hit = match rule {
                BlockingRule::Centerline => geom::segment_intersects_ring(a, b, zone.as_ref()),
                BlockingRule::WidthAware { min_passable } => {
                    let d = geom::dist_segment_ring(a, b, zone.as_ref());
                    let intrusion = (e.width / 2.0 - d).max(0.0);
                    e.width - intrusion < min_passable
                }
            };
            if hit {
                blocked.insert(e.id);
                break;
            }
        }
    }
    blocked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoConfig, SafeArea, SoilZone};
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2D {
        Point2D::new(x, y)
    }

    /// 3x3 grid of nodes spaced 100 m, all streets width 8, plus a safe area
    /// over the north-east node (2100, 2100) and one over (1900, 2100).
    fn grid_env() -> Environment {
        let mut b = GraphBuilder::new(0.5);
        for y in [1900.0, 2000.0, 2100.0] {
            for x0 in [1900.0, 2000.0] {
                b.add_segment(p(x0, y), p(x0 + 100.0, y), 8.0);
            }
        }
        for x in [1900.0, 2000.0, 2100.0] {
            for y0 in [1900.0, 2000.0] {
                b.add_segment(p(x, y0), p(x, y0 + 100.0), 8.0);
            }
        }
        let graph = b.build();
        let sa = |id, cx: f64, cy: f64| SafeArea {
            id: SafeAreaId(id),
            ring: vec![
                p(cx - 20.0, cy - 20.0),
                p(cx + 20.0, cy - 20.0),
                p(cx + 20.0, cy + 20.0),
                p(cx - 20.0, cy + 20.0),
            ],
            centroid: p(cx, cy),
            bbox: Bbox::of_ring(&[p(cx - 20.0, cy - 20.0), p(cx + 20.0, cy + 20.0)]),
        };
        Environment::assemble(
            Vec::new(),
            vec![sa(0, 2100.0, 2100.0), sa(1, 1900.0, 2100.0)],
            Vec::<SoilZone>::new(),
            graph,
            GeoConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn snapping_merges_close_endpoints() {
        let mut b = GraphBuilder::new(0.5);
        b.add_segment(p(0.0, 0.0), p(10.0, 0.0), 5.0);
        b.add_segment(p(10.3, 0.0), p(20.0, 0.0), 5.0);
        let g = b.build();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn collapsed_segment_detected() {
        let mut b = GraphBuilder::new(0.5);
        b.add_segment(p(0.0, 0.0), p(10.0, 0.0), 5.0);
        assert!(matches!(
            b.add_segment(p(10.2, 0.0), p(9.9, 0.0), 5.0),
            SegmentOutcome::Collapsed
        ));
    }

    #[test]
    fn edge_lengths_match_node_distance() {
        let env = grid_env();
        for e in &env.graph.edges {
            let d = env.node_pos(e.a).dist(env.node_pos(e.b));
            assert_relative_eq!(e.length, d, max_relative = 1e-6);
        }
    }

    #[test]
    fn routes_prefer_smaller_area_then_lex_edges() {
        let env = grid_env();
        // From the south-center node (2000,1900): both safe corners are 300 m
        // away; area 0 must win the tie.
        let r = match route_to_nearest_safe_area(&env, &BlockedSet::new(), p(2000.0, 1895.0)) {
            RouteResult::Route(r) => r,
            other => panic!("expected route, got {other:?}"),
        };
        assert_relative_eq!(r.length, 300.0);
        assert_eq!(r.area, Some(SafeAreaId(0)));
        // Among the equal-length staircase paths to (2100,2100) the
        // lexicographically smallest edge sequence is chosen; severing it
        // leaves an equal-length alternative with a lex-larger sequence.
        let alt: BlockedSet = r.edges.iter().copied().collect();
        let r2 = match route_to_nearest_safe_area(&env, &alt, p(2000.0, 1895.0)) {
            RouteResult::Route(r2) => r2,
            other => panic!("expected route, got {other:?}"),
        };
        assert_relative_eq!(r2.length, 300.0);
        assert_eq!(r2.area, Some(SafeAreaId(0)));
        assert!(r2.edges > r.edges, "first route must be lex-min");
    }

    #[test]
    fn inside_safe_area_short_circuits() {
        let env = grid_env();
        assert_eq!(
            route_to_nearest_safe_area(&env, &BlockedSet::new(), p(2100.0, 2100.0)),
            RouteResult::AlreadySafe(SafeAreaId(0))
        );
    }

    #[test]
    fn blocking_forces_detour_or_traps() {
        let env = grid_env();
        let from = p(1900.0, 1900.0); // south-west corner
        let r0 = match route_to_nearest_safe_area(&env, &BlockedSet::new(), from) {
            RouteResult::Route(r) => r,
            other => panic!("{other:?}"),
        };
        assert_relative_eq!(r0.length, 200.0); // to area 1 at (1900,2100)
        assert_eq!(r0.area, Some(SafeAreaId(1)));
        // Sever the corner entirely: block its two incident edges.
        let blocked: BlockedSet = env.graph.adjacency[nearest_node(&env, from).index()]
            .iter()
            .copied()
            .collect();
        assert_eq!(
            route_to_nearest_safe_area(&env, &blocked, from),
            RouteResult::Unreachable
        );
    }

    #[test]
    fn route_between_points() {
        let env = grid_env();
        let r = route_between(&env, &BlockedSet::new(), p(1900.0, 1905.0), p(2098.0, 1902.0))
            .unwrap();
        assert_relative_eq!(r.length, 200.0);
        assert_eq!(r.nodes.first(), Some(&nearest_node(&env, p(1900.0, 1905.0))));
        assert_eq!(r.nodes.last(), Some(&nearest_node(&env, p(2098.0, 1902.0))));
    }

    #[test]
    fn debris_blocking_centerline_and_monotonicity() {
        let env = grid_env();
        // Debris square straddling the south edge between (1900,1900)-(2000,1900).
        let z1 = vec![
            p(1940.0, 1890.0),
            p(1960.0, 1890.0),
            p(1960.0, 1910.0),
            p(1940.0, 1910.0),
        ];
        // Debris near but not touching the west edge centerline.
        let z2 = vec![
            p(1890.0, 1940.0),
            p(1898.0, 1940.0),
            p(1898.0, 1960.0),
            p(1890.0, 1960.0),
        ];
        let base = BlockedSet::new();
        let one = apply_debris_blocking(&env, &[z1.as_slice()], &base, BlockingRule::Centerline);
        assert_eq!(one.len(), 1);
        let both = apply_debris_blocking(
            &env,
            &[z1.as_slice(), z2.as_slice()],
            &base,
            BlockingRule::Centerline,
        );
        assert!(one.is_subset(&both));
        assert_eq!(both.len(), 1, "z2 misses the centerline");
        // Width-aware: z2 leaves 2 m clearance to the centerline of an 8 m
        // street, so intrusion is 2 m and 6 m remain.
        let wide = apply_debris_blocking(
            &env,
            &[z2.as_slice()],
            &base,
            BlockingRule::WidthAware { min_passable: 6.5 },
        );
        assert_eq!(wide.len(), 1);
        let narrow = apply_debris_blocking(
            &env,
            &[z2.as_slice()],
            &base,
            BlockingRule::WidthAware { min_passable: 5.5 },
        );
        assert!(narrow.is_empty());
    }
}
