use std::collections::HashMap;

use super::EvalError;
use crate::graph::CompGraph;

pub const EQUIVALENCE_NODE_LIMIT: usize = 64;

struct Indexed {
    n: usize,
    labels: Vec<String>,
    /// `adj[i][j]` is the number of edges i -> j.
    adj: Vec<Vec<u32>>,
}

fn node_label(g: &CompGraph, id: &str, compare_params: bool) -> String {
    let n = &g.nodes[id];
    let mut s = n.kind.name().to_string();
    if n.kind.is_recurrent() && n.return_seq {
        s.push_str("|seq");
    }
    if compare_params {
        s.push_str(&format!("|{:?}", n.params.map(|p| p.fields())));
    }
    s
}

fn index(g: &CompGraph, compare_params: bool) -> Indexed {
    let ids: Vec<&str> = g.nodes.keys().map(String::as_str).collect();
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    let mut adj = vec![vec![0u32; n]; n];
    for e in &g.edges {
        if let (Some(&s), Some(&d)) = (pos.get(e.src.as_str()), pos.get(e.dst.as_str())) {
            adj[s][d] += 1;
        }
    }
    Indexed {
        n,
        labels: ids.iter().map(|id| node_label(g, id, compare_params)).collect(),
        adj,
    }
}

/// Colour refinement run on both graphs with a shared palette, so equal
/// colours mean equal refined neighbourhoods across the pair.
fn refine(a: &Indexed, b: &Indexed) -> (Vec<usize>, Vec<usize>) {
    let mut palette: HashMap<String, usize> = HashMap::new();
    let mut intern = |key: String| {
        let next = palette.len();
        *palette.entry(key).or_insert(next)
    };
    let mut ca: Vec<usize> = a.labels.iter().map(|l| intern(format!("L{l}"))).collect();
    let mut cb: Vec<usize> = b.labels.iter().map(|l| intern(format!("L{l}"))).collect();
    let distinct = |x: &[usize], y: &[usize]| {
        let mut v: Vec<usize> = x.iter().chain(y).copied().collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    let mut classes = distinct(&ca, &cb);
    for round in 0..a.n.max(1) {
        let mut sig = |g: &Indexed, c: &[usize]| -> Vec<usize> {
            (0..g.n)
                .map(|i| {
                    let mut outs: Vec<(usize, u32)> = (0..g.n).filter(|&j| g.adj[i][j] > 0).map(|j| (c[j], g.adj[i][j])).collect();
                    let mut ins: Vec<(usize, u32)> = (0..g.n).filter(|&j| g.adj[j][i] > 0).map(|j| (c[j], g.adj[j][i])).collect();
                    outs.sort_unstable();
                    ins.sort_unstable();
                    intern(format!("{round}:{}:{outs:?}:{ins:?}", c[i]))
                })
                .collect()
        };
        let na = sig(a, &ca);
        let nb = sig(b, &cb);
        let k = distinct(&na, &nb);
        ca = na;
        cb = nb;
        if k == classes {
            break;
        }
        classes = k;
    }
    (ca, cb)
}

fn extend(a: &Indexed, b: &Indexed, ca: &[usize], cb: &[usize], order: &[usize], map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
    let depth = order.iter().filter(|&&v| map[v] != usize::MAX).count();
    let Some(&v) = order.get(depth) else { return true };
    for w in 0..b.n {
        if used[w] || cb[w] != ca[v] || a.adj[v][v] != b.adj[w][w] {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&u| a.adj[v][u] == b.adj[w][map[u]] && a.adj[u][v] == b.adj[map[u]][w]);
        if !consistent {
            continue;
        }
        map[v] = w;
        used[w] = true;
        if extend(a, b, ca, cb, order, map, used) {
            return true;
        }
        map[v] = usize::MAX;
        used[w] = false;
    }
    false
}

/// Whether a label- and multiplicity-preserving isomorphism exists. Labels
/// are the layer kind, the return-sequence flag of recurrent layers and,
/// with `compare_params`, the hyper-parameters. Node ids, edge order and
/// graph metadata are ignored.
pub fn graph_equivalent(a: &CompGraph, b: &CompGraph, compare_params: bool) -> Result<bool, EvalError> {
    for g in [a, b] {
        if g.len() > EQUIVALENCE_NODE_LIMIT {
            return Err(EvalError::SizeLimit {
                nodes: g.len(),
                limit: EQUIVALENCE_NODE_LIMIT,
            });
        }
    }
    let (ia, ib) = (index(a, compare_params), index(b, compare_params));
    if ia.n != ib.n || a.edges.len() != b.edges.len() {
        return Ok(false);
    }
    let (ca, cb) = refine(&ia, &ib);
    let histogram = |c: &[usize]| {
        let mut v = c.to_vec();
        v.sort_unstable();
        v
    };
    if histogram(&ca) != histogram(&cb) {
        return Ok(false);
    }
    let mut class_size: HashMap<usize, usize> = HashMap::new();
    for c in &ca {
        *class_size.entry(*c).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..ia.n).collect();
    order.sort_by_key(|&v| (class_size[&ca[v]], ca[v], v));
    let mut map = vec![usize::MAX; ia.n];
    let mut used = vec![false; ib.n];
    Ok(extend(&ia, &ib, &ca, &cb, &order, &mut map, &mut used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{HyperParams, LayerKind, Node};
    use crate::rng::Rng;

    const KINDS: [LayerKind; 3] = [LayerKind::Dense, LayerKind::Dropout, LayerKind::Conv2D];

    fn build(kinds: &[LayerKind], edges: &[(usize, usize)], names: &[String]) -> CompGraph {
        let mut g = CompGraph::new("g");
        for (k, name) in kinds.iter().zip(names) {
            g.add_node(Node::bare(name.clone(), *k));
        }
        for (s, d) in edges {
            g.add_edge(names[*s].clone(), names[*d].clone());
        }
        g
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn random_dag(rng: &mut Rng, n: usize) -> (Vec<LayerKind>, Vec<(usize, usize)>) {
        let kinds = (0..n).map(|_| *rng.choose(&KINDS).unwrap()).collect();
        let mut edges = Vec::new();
        for d in 1..n {
            for s in 0..d {
                if rng.chance(0.35) {
                    edges.push((s, d));
                }
            }
        }
        (kinds, edges)
    }

    /// Tries every bijection.
    fn brute_force(a: &CompGraph, b: &CompGraph) -> bool {
        let (ia, ib) = (index(a, false), index(b, false));
        if ia.n != ib.n {
            return false;
        }
        let mut perm: Vec<usize> = (0..ia.n).collect();
        loop {
            let ok = (0..ia.n).all(|i| ia.labels[i] == ib.labels[perm[i]])
                && (0..ia.n).all(|i| (0..ia.n).all(|j| ia.adj[i][j] == ib.adj[perm[i]][perm[j]]));
            if ok {
                return true;
            }
            // next lexicographic permutation
            let Some(i) = (0..ia.n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
                return false;
            };
            let j = (i + 1..ia.n).rev().find(|&j| perm[j] > perm[i]).unwrap();
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
    }

    #[test]
    fn relabelled_copy_is_equivalent() {
        let mut rng = Rng::seed_from_u64(3);
        let (k, e) = random_dag(&mut rng, 7);
        let a = build(&k, &e, &names(7));
        let mut perm: Vec<usize> = (0..7).collect();
        rng.shuffle(&mut perm);
        let renamed: Vec<String> = perm.iter().map(|p| format!("x{p}")).collect();
        let b = build(&k, &e, &renamed);
        assert!(graph_equivalent(&a, &b, true).unwrap());
    }

    #[test]
    fn position_of_kinds_matters() {
        let n = names(3);
        let a = build(&[LayerKind::Conv2D, LayerKind::Dense, LayerKind::Dropout], &[(0, 1), (1, 2)], &n);
        let b = build(&[LayerKind::Conv2D, LayerKind::Dropout, LayerKind::Dense], &[(0, 1), (1, 2)], &n);
        assert!(!graph_equivalent(&a, &b, false).unwrap());
    }

    #[test]
    fn params_only_count_when_asked() {
        let mut a = CompGraph::new("a");
        a.add_node(Node::new("x", LayerKind::Dense, HyperParams::Dense { nodes: 10 }));
        let mut b = CompGraph::new("b");
        b.add_node(Node::new("y", LayerKind::Dense, HyperParams::Dense { nodes: 20 }));
        assert!(graph_equivalent(&a, &b, false).unwrap());
        assert!(!graph_equivalent(&a, &b, true).unwrap());
    }

    #[test]
    fn size_limit() {
        let mut g = CompGraph::new("big");
        for i in 0..65 {
            g.add_node(Node::bare(format!("n{i}"), LayerKind::Dense));
        }
        assert_eq!(
            graph_equivalent(&g, &g, false),
            Err(EvalError::SizeLimit { nodes: 65, limit: 64 })
        );
    }

    #[test]
    fn regular_graphs_need_search() {
        // two directed 6-cycles vs one 12-cycle defeat colour refinement
        let n = names(12);
        let k = vec![LayerKind::Dense; 12];
        let two: Vec<(usize, usize)> = (0..12).map(|i| (i, if i % 6 == 5 { i - 5 } else { i + 1 })).collect();
        let one: Vec<(usize, usize)> = (0..12).map(|i| (i, (i + 1) % 12)).collect();
        assert!(!graph_equivalent(&build(&k, &two, &n), &build(&k, &one, &n), false).unwrap());
        assert!(graph_equivalent(&build(&k, &one, &n), &build(&k, &one, &n), false).unwrap());
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = Rng::seed_from_u64(11);
        let (mut yes, mut no) = (0, 0);
        for _ in 0..200 {
            let n = 2 + rng.below(7) as usize;
            let (k, e) = random_dag(&mut rng, n);
            let a = build(&k, &e, &names(n));
            let b = match rng.below(3) {
                0 => {
                    let mut perm: Vec<usize> = (0..n).collect();
                    rng.shuffle(&mut perm);
                    let kk: Vec<LayerKind> = (0..n).map(|i| k[perm[i]]).collect();
                    let inv: Vec<usize> = (0..n).map(|i| perm.iter().position(|&p| p == i).unwrap()).collect();
                    let ee: Vec<(usize, usize)> = e.iter().map(|(s, d)| (inv[*s], inv[*d])).collect();
                    build(&kk, &ee, &names(n))
                }
                1 => {
                    let mut kk = k.clone();
                    let i = rng.index(n);
                    kk[i] = *rng.choose(&KINDS).unwrap();
                    let mut ee = e.clone();
                    if !ee.is_empty() && rng.chance(0.5) {
                        let j = rng.index(ee.len());
                        ee[j].0 = rng.index(ee[j].1.max(1));
                    }
                    build(&kk, &ee, &names(n))
                }
                _ => {
                    let (kk, ee) = random_dag(&mut rng, n);
                    build(&kk, &ee, &names(n))
                }
            };
            let want = brute_force(&a, &b);
            assert_eq!(graph_equivalent(&a, &b, false).unwrap(), want, "{a:?}\n{b:?}");
            if want {
                yes += 1
            } else {
                no += 1
            }
        }
        assert!(yes >= 50 && no >= 50, "{yes} {no}");
    }
}
