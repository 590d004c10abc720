//! Layered top-down layout in abstract units (one unit is one pixel at
//! scale 1).
//!
//! Edges between adjacent ranks are drawn straight from the bottom of the
//! source to the top of the destination. Longer edges, such as the second
//! parent of a Concat, leave the source box sideways, run down a lane beside
//! the column and enter the destination from the same side. Lanes are
//! nested so that shorter spans sit closer to the column; spans that
//! interleave are sent to opposite sides.

use std::collections::{HashMap, VecDeque};

use dlp2c_core::graph::{CompGraph, LayerKind};
use dlp2c_core::lexicon::format_label;
use serde::{Deserialize, Serialize};

use crate::font::{Font, FontFace};
use crate::RenderError;

pub const MARGIN: i64 = 24;
pub const BOX_H: i64 = 40;
pub const MIN_BOX_W: i64 = 120;
pub const TEXT_PAD: i64 = 12;
pub const RANK_GAP: i64 = 40;
pub const SIBLING_GAP: i64 = 40;
pub const LANE_OFFSET: i64 = 24;
pub const LANE_STEP: i64 = 16;
pub const TAIL_GAP: i64 = 6;
pub const TIP_GAP: i64 = 2;
/// Font dot size in units.
pub const DOT: i64 = 2;
pub const STROKE: i64 = 2;
pub const HEAD_LEN: i64 = 12;
pub const HEAD_HALF: i64 = 6;
pub const DEFAULT_NODE_BUDGET: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RenderStyle {
    StyleK,
    StyleC,
}

impl RenderStyle {
    pub const ALL: [RenderStyle; 2] = [RenderStyle::StyleK, RenderStyle::StyleC];

    pub fn name(self) -> &'static str {
        match self {
            RenderStyle::StyleK => "StyleK",
            RenderStyle::StyleC => "StyleC",
        }
    }

    pub fn parse(s: &str) -> Option<RenderStyle> {
        match s.to_ascii_lowercase().as_str() {
            "stylek" | "k" | "keras" => Some(RenderStyle::StyleK),
            "stylec" | "c" | "caffe" => Some(RenderStyle::StyleC),
            _ => None,
        }
    }

    /// Short tag used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            RenderStyle::StyleK => "k",
            RenderStyle::StyleC => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutConfig {
    pub node_budget: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Text drawn inside a node box.
pub fn node_label(graph: &CompGraph, id: &str, style: RenderStyle) -> String {
    let node = &graph.nodes[id];
    match style {
        RenderStyle::StyleK => format_label(node),
        RenderStyle::StyleC => node.kind.name().to_string(),
    }
}

pub fn node_face(kind: LayerKind, style: RenderStyle) -> FontFace {
    let bold = style == RenderStyle::StyleC
        && (kind.is_input() || matches!(kind, LayerKind::Conv2D | LayerKind::Dense | LayerKind::Concat | LayerKind::Lstm));
    if bold {
        FontFace::Bold
    } else {
        FontFace::Regular
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedNode {
    pub id: String,
    pub kind: LayerKind,
    pub label: String,
    pub face: FontFace,
    pub rank: usize,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl PlacedNode {
    pub fn right(&self) -> i64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.h
    }

    /// Strict interior test.
    pub fn contains_inside(&self, p: (i64, i64)) -> bool {
        p.0 > self.x && p.0 < self.right() && p.1 > self.y && p.1 < self.bottom()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Side { right: bool, lane: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedEdge {
    pub src: String,
    pub dst: String,
    pub route: Route,
    /// Tail, bends, arrow tip.
    pub points: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub width: i64,
    pub height: i64,
    pub nodes: Vec<PlacedNode>,
    pub edges: Vec<PlacedEdge>,
}

impl Layout {
    pub fn node(&self, id: &str) -> Option<&PlacedNode> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// Interval of ranks spanned by a side edge.
#[derive(Clone, Copy)]
struct Span {
    lo: usize,
    hi: usize,
}

impl Span {
    fn interleaves(self, o: Span) -> bool {
        (self.lo < o.lo && o.lo < self.hi && self.hi < o.hi) || (o.lo < self.lo && self.lo < o.hi && o.hi < self.hi)
    }

    fn contains(self, o: Span) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    fn len(self) -> usize {
        self.hi - self.lo
    }
}

/// Sides for the side edges: interleaving spans get different sides where
/// the conflict graph allows it (breadth-first two-colouring).
fn assign_sides(spans: &[Span]) -> Vec<bool> {
    let n = spans.len();
    let mut side: Vec<Option<bool>> = vec![None; n];
    for start in 0..n {
        if side[start].is_some() {
            continue;
        }
        side[start] = Some(true);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if side[j].is_none() && spans[i].interleaves(spans[j]) {
                    side[j] = Some(!side[i].expect("coloured"));
                    queue.push_back(j);
                }
            }
        }
    }
    side.into_iter().map(|s| s.expect("coloured")).collect()
}

/// Lane index per side edge: one outside every same-side span it contains
/// and every shorter same-side span it interleaves with (those cross).
fn assign_lanes(spans: &[Span], sides: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| (spans[i].len(), i));
    let mut lane = vec![0usize; spans.len()];
    for (k, &i) in order.iter().enumerate() {
        lane[i] = order[..k]
            .iter()
            .filter(|&&j| sides[j] == sides[i] && (spans[i].contains(spans[j]) || spans[i].interleaves(spans[j])))
            .map(|&j| lane[j] + 1)
            .max()
            .unwrap_or(0);
    }
    lane
}

pub fn layout(graph: &CompGraph, style: RenderStyle) -> Result<Layout, RenderError> {
    layout_with(graph, style, &LayoutConfig::default())
}

pub fn layout_with(graph: &CompGraph, style: RenderStyle, config: &LayoutConfig) -> Result<Layout, RenderError> {
    if graph.len() > config.node_budget {
        return Err(RenderError::LayoutOverflow {
            nodes: graph.len(),
            budget: config.node_budget,
        });
    }
    let ranks = graph
        .ranks()
        .ok_or_else(|| RenderError::InvalidGraph(vec!["graph is cyclic or has dangling edges".into()]))?;

    let mut nodes: Vec<PlacedNode> = graph
        .nodes
        .values()
        .map(|n| {
            let label = node_label(graph, &n.id, style);
            let face = node_face(n.kind, style);
            let tw = Font::of(face).text_width(&label) as i64 * DOT;
            PlacedNode {
                id: n.id.clone(),
                kind: n.kind,
                label,
                face,
                rank: ranks[n.id.as_str()],
                x: 0,
                y: 0,
                w: MIN_BOX_W.max(tw + 2 * TEXT_PAD),
                h: BOX_H,
            }
        })
        .collect();
    let pos: HashMap<&str, usize> = graph.nodes.keys().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let ends: Vec<(usize, usize)> = graph.edges.iter().map(|e| (pos[e.src.as_str()], pos[e.dst.as_str()])).collect();

    let side_edges: Vec<usize> = (0..ends.len())
        .filter(|&i| nodes[ends[i].1].rank > nodes[ends[i].0].rank + 1)
        .collect();
    let spans: Vec<Span> = side_edges
        .iter()
        .map(|&i| Span {
            lo: nodes[ends[i].0].rank,
            hi: nodes[ends[i].1].rank,
        })
        .collect();
    let sides = assign_sides(&spans);
    let lanes = assign_lanes(&spans, &sides);
    let mut route = vec![Route::Direct; ends.len()];
    for (k, &i) in side_edges.iter().enumerate() {
        route[i] = Route::Side {
            right: sides[k],
            lane: lanes[k],
        };
    }

    // Stub order on each (node, side): incoming by lane ascending, then
    // outgoing by lane descending, top to bottom.
    let mut stubs: HashMap<(usize, bool), Vec<(usize, bool, usize)>> = HashMap::new();
    for (i, r) in route.iter().enumerate() {
        if let Route::Side { right, lane } = *r {
            stubs.entry((ends[i].0, right)).or_default().push((i, false, lane));
            stubs.entry((ends[i].1, right)).or_default().push((i, true, lane));
        }
    }
    for list in stubs.values_mut() {
        list.sort_by_key(|&(i, incoming, lane)| {
            if incoming {
                (0, lane as i64, i)
            } else {
                (1, -(lane as i64), i)
            }
        });
    }
    for ((node, _), list) in &stubs {
        nodes[*node].h = nodes[*node].h.max(10 * (list.len() as i64 + 1));
    }

    let n_ranks = nodes.iter().map(|n| n.rank + 1).max().unwrap_or(0);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_ranks];
    for (i, n) in nodes.iter().enumerate() {
        rows[n.rank].push(i);
    }
    let row_w = |r: &[usize], nodes: &[PlacedNode]| -> i64 {
        r.iter().map(|&i| nodes[i].w).sum::<i64>() + SIBLING_GAP * (r.len().max(1) as i64 - 1)
    };
    let content_w = rows.iter().map(|r| row_w(r, &nodes)).max().unwrap_or(0);
    let lanes_on = |right: bool| {
        route
            .iter()
            .filter_map(|r| match r {
                Route::Side { right: s, lane } if *s == right => Some(*lane + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0) as i64
    };
    let extent = |n: i64| if n == 0 { 0 } else { LANE_OFFSET + LANE_STEP * (n - 1) };
    let (left_lanes, right_lanes) = (lanes_on(false), lanes_on(true));
    let x0 = MARGIN + extent(left_lanes);
    let cx = x0 + content_w / 2;
    let mut y = MARGIN;
    for r in &rows {
        let mut x = cx - row_w(r, &nodes) / 2;
        let mut h = 0;
        for &i in r {
            nodes[i].x = x;
            nodes[i].y = y;
            x += nodes[i].w + SIBLING_GAP;
            h = h.max(nodes[i].h);
        }
        y += h + RANK_GAP;
    }
    let height = (y - RANK_GAP + MARGIN).max(2 * MARGIN);
    let width = x0 + content_w + extent(right_lanes) + MARGIN;
    let lane_x = |right: bool, lane: usize| {
        if right {
            x0 + content_w + LANE_OFFSET + LANE_STEP * lane as i64
        } else {
            x0 - LANE_OFFSET - LANE_STEP * lane as i64
        }
    };

    let stub_y = |edge: usize, node: usize, right: bool| -> i64 {
        let list = &stubs[&(node, right)];
        let j = list.iter().position(|s| s.0 == edge && s.1 == (ends[edge].1 == node)).expect("stub");
        nodes[node].y + nodes[node].h * (j as i64 + 1) / (list.len() as i64 + 1)
    };

    // Direct edges spread their tails and tips along the box sides, ordered
    // by the position of the other end.
    let spread = |node: usize, edge: usize, outgoing: bool| -> i64 {
        let mut mine: Vec<usize> = (0..ends.len())
            .filter(|&i| route[i] == Route::Direct && if outgoing { ends[i].0 == node } else { ends[i].1 == node })
            .collect();
        mine.sort_by_key(|&i| {
            let other = if outgoing { ends[i].1 } else { ends[i].0 };
            (nodes[other].x, i)
        });
        let j = mine.iter().position(|&i| i == edge).expect("edge") as i64;
        let n = &nodes[node];
        n.x + n.w * (j + 1) / (mine.len() as i64 + 1)
    };

    let mut edges = Vec::with_capacity(ends.len());
    for (i, &(s, d)) in ends.iter().enumerate() {
        let points = match route[i] {
            Route::Direct => vec![
                (spread(s, i, true), nodes[s].bottom() + TAIL_GAP),
                (spread(d, i, false), nodes[d].y - TIP_GAP),
            ],
            Route::Side { right, lane } => {
                let (ys, yd) = (stub_y(i, s, right), stub_y(i, d, right));
                let lx = lane_x(right, lane);
                if right {
                    vec![(nodes[s].right() + TAIL_GAP, ys), (lx, ys), (lx, yd), (nodes[d].right() + TIP_GAP, yd)]
                } else {
                    vec![(nodes[s].x - TAIL_GAP, ys), (lx, ys), (lx, yd), (nodes[d].x - TIP_GAP, yd)]
                }
            }
        };
        edges.push(PlacedEdge {
            src: nodes[s].id.clone(),
            dst: nodes[d].id.clone(),
            route: route[i],
            points,
        });
    }
    Ok(Layout {
        width,
        height,
        nodes,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dlp2c_core::graph::{HyperParams, Node};

    pub(crate) fn chain_with_skip() -> CompGraph {
        let mut g = CompGraph::new("skip");
        g.add_node(Node::new("in", LayerKind::InputMnist, HyperParams::Empty));
        g.add_node(Node::new("c1", LayerKind::Conv2D, HyperParams::Conv2D { filters: 8, filter_size: 3 }));
        g.add_node(Node::new("c2", LayerKind::Conv2D, HyperParams::Conv2D { filters: 8, filter_size: 3 }));
        g.add_node(Node::new("c3", LayerKind::Conv2D, HyperParams::Conv2D { filters: 8, filter_size: 3 }));
        g.add_node(Node::new("c4", LayerKind::Conv2D, HyperParams::Conv2D { filters: 8, filter_size: 3 }));
        g.add_node(Node::new("cat", LayerKind::Concat, HyperParams::Empty));
        g.add_node(Node::new("f", LayerKind::Flatten, HyperParams::Empty));
        g.add_node(Node::new("out", LayerKind::Dense, HyperParams::Dense { nodes: 10 }));
        for (a, b) in [("in", "c1"), ("c1", "c2"), ("c2", "c3"), ("c3", "c4"), ("c4", "cat"), ("c1", "cat"), ("cat", "f"), ("f", "out")] {
            g.add_edge(a, b);
        }
        g
    }

    #[test]
    fn chain_stacks_vertically() {
        let mut g = CompGraph::new("c");
        g.add_node(Node::new("a", LayerKind::InputMnist, HyperParams::Empty));
        g.add_node(Node::new("b", LayerKind::Flatten, HyperParams::Empty));
        g.add_node(Node::new("c", LayerKind::Dense, HyperParams::Dense { nodes: 10 }));
        g.add_edge("a", "b").add_edge("b", "c");
        let l = layout(&g, RenderStyle::StyleK).unwrap();
        assert_eq!(l.nodes.len(), 3);
        assert!(l.nodes[0].bottom() + RANK_GAP == l.nodes[1].y && l.nodes[1].bottom() + RANK_GAP == l.nodes[2].y);
        assert_eq!(l.edges.len(), 2);
        for e in &l.edges {
            assert_eq!(e.points.len(), 2);
            assert_eq!(e.points[0].0, e.points[1].0);
            assert!(e.points[1].1 > e.points[0].1);
        }
        assert_eq!(l, layout(&g, RenderStyle::StyleK).unwrap());
    }

    #[test]
    fn skip_edge_bends_around_boxes() {
        let g = chain_with_skip();
        for style in RenderStyle::ALL {
            let l = layout(&g, style).unwrap();
            let skip = l.edges.iter().find(|e| e.src == "c1" && e.dst == "cat").unwrap();
            assert!(matches!(skip.route, Route::Side { .. }));
            assert!(skip.points.len() >= 3);
            for e in &l.edges {
                // every point and every sampled point along the segments
                for w in e.points.windows(2) {
                    for k in 0..=20 {
                        let p = (
                            w[0].0 + (w[1].0 - w[0].0) * k / 20,
                            w[0].1 + (w[1].1 - w[0].1) * k / 20,
                        );
                        assert!(l.nodes.iter().all(|n| !n.contains_inside(p)), "{e:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn margins_and_no_overlap() {
        let l = layout(&chain_with_skip(), RenderStyle::StyleK).unwrap();
        for (i, a) in l.nodes.iter().enumerate() {
            assert!(a.x >= MARGIN && a.y >= MARGIN && a.right() + MARGIN <= l.width && a.bottom() + MARGIN <= l.height);
            for b in &l.nodes[i + 1..] {
                let gap_x = (b.x - a.right()).max(a.x - b.right());
                let gap_y = (b.y - a.bottom()).max(a.y - b.bottom());
                assert!(gap_x >= 24 || gap_y >= 24);
            }
        }
    }

    #[test]
    fn interleaving_spans_use_both_sides() {
        let spans = [Span { lo: 0, hi: 4 }, Span { lo: 2, hi: 6 }, Span { lo: 1, hi: 3 }];
        let sides = assign_sides(&spans);
        assert_ne!(sides[0], sides[1]);
        let lanes = assign_lanes(&spans, &sides);
        assert_eq!(lanes[2], 0);
        assert_eq!(lanes[0], if sides[0] == sides[2] { 1 } else { 0 });
    }

    #[test]
    fn budget() {
        let mut g = CompGraph::new("big");
        for i in 0..201 {
            g.add_node(Node::bare(format!("n{i}"), LayerKind::Dense));
        }
        assert!(matches!(
            layout(&g, RenderStyle::StyleK),
            Err(RenderError::LayoutOverflow { nodes: 201, budget: 200 })
        ));
        assert!(layout_with(&g, RenderStyle::StyleK, &LayoutConfig { node_budget: 500 }).is_ok());
    }
}
