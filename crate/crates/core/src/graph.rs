//! Directed-graph machinery: paths, colliders, d-separation, kin relations,
//! and the admissibility checks behind the three door criteria.
//!
//! Graphs may contain directed cycles. d-separation uses the path-blocking
//! definition, which stays well-defined on cyclic directed graphs; the
//! reachability implementation ([`d_separated`]) is checked against a literal
//! simple-path enumeration ([`d_separated_enumerate`]) in the test suites.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed graph over nodes `0..n`. Edge `(u, v)` means `u -> v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl CausalGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::structural(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            if u == v {
                return Err(Error::structural(format!("self-loop at node {u}")));
            }
        }
        Ok(CausalGraph { n, edges })
    }

    pub fn empty(n: usize) -> Self {
        CausalGraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn parents(&self, v: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|&&(_, b)| b == v)
            .map(|&(a, _)| a)
            .collect()
    }

    pub fn children(&self, v: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|&&(a, _)| a == v)
            .map(|&(_, b)| b)
            .collect()
    }

    /// Adjacent in the topology: parent or child.
    pub fn adjacent(&self, v: usize) -> BTreeSet<usize> {
        let mut s = self.parents(v);
        s.extend(self.children(v));
        s
    }

    /// Graph with the single edge `u -> v` removed.
    pub fn without_edge(&self, u: usize, v: usize) -> CausalGraph {
        let mut g = self.clone();
        g.edges.remove(&(u, v));
        g
    }

    /// Graph with every edge leaving a node of `w` removed.
    pub fn without_out_edges(&self, w: &BTreeSet<usize>) -> CausalGraph {
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|(a, _)| !w.contains(a))
            .collect();
        CausalGraph { n: self.n, edges }
    }

    /// True when the graph has no directed cycle.
    pub fn is_dag(&self) -> bool {
        (0..self.n).all(|v| !descendants(self, v).contains(&v))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "edges": self.edges.iter().map(|&(u, v)| vec![u, v]).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let n = value["n"]
            .as_u64()
            .ok_or_else(|| Error::structural("graph JSON missing n"))? as usize;
        let edges = value["edges"]
            .as_array()
            .ok_or_else(|| Error::structural("graph JSON missing edges"))?
            .iter()
            .map(|e| {
                let pair = e
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::structural("edge must be a [u,v] pair"))?;
                Ok((
                    pair[0].as_u64().unwrap_or(u64::MAX) as usize,
                    pair[1].as_u64().unwrap_or(u64::MAX) as usize,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        CausalGraph::new(n, edges)
    }
}

/// Partially directed output of discovery: directed edges where every member
/// of the equivalence class agrees, undirected otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cpdag {
    pub n: usize,
    pub directed: BTreeSet<(usize, usize)>,
    pub undirected: BTreeSet<(usize, usize)>,
}

impl Cpdag {
    pub fn new(n: usize) -> Self {
        Cpdag {
            n,
            directed: BTreeSet::new(),
            undirected: BTreeSet::new(),
        }
    }

    /// Directed and undirected sets must be disjoint as unordered pairs.
    pub fn check_invariant(&self) -> Result<()> {
        for &(u, v) in &self.directed {
            let key = (u.min(v), u.max(v));
            if self.undirected.contains(&key) {
                return Err(Error::structural(format!(
                    "pair {{{u},{v}}} both directed and undirected"
                )));
            }
        }
        Ok(())
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut s = self.undirected.clone();
        s.extend(self.directed.iter().map(|&(u, v)| (u.min(v), u.max(v))));
        s
    }

    pub fn has_any(&self, u: usize, v: usize) -> bool {
        self.skeleton().contains(&(u.min(v), u.max(v)))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "edges": self.directed.iter().map(|&(u, v)| vec![u, v]).collect::<Vec<_>>(),
            "undirected": self.undirected.iter().map(|&(u, v)| vec![u, v]).collect::<Vec<_>>(),
        })
    }
}

/// Undirected version of the graph: `{u,v}` present iff `u->v` or `v->u`.
pub fn topology(g: &CausalGraph) -> BTreeSet<(usize, usize)> {
    g.edges
        .iter()
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect()
}

/// Parents, children, and spouses (co-parents of a shared child) of `v`.
pub fn kin_set(g: &CausalGraph, v: usize) -> BTreeSet<usize> {
    let mut kin = g.adjacent(v);
    for c in g.children(v) {
        kin.extend(g.parents(c));
    }
    kin.remove(&v);
    kin
}

/// All collider triples `(a, c, b)` with `a -> c <- b`, reported once per
/// unordered parent pair (`a < b`).
pub fn colliders(g: &CausalGraph) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for c in 0..g.n {
        let parents: Vec<usize> = g.parents(c).into_iter().collect();
        for i in 0..parents.len() {
            for j in i + 1..parents.len() {
                out.insert((parents[i], c, parents[j]));
            }
        }
    }
    out
}

/// Nodes reachable from `v` along directed edges. `v` itself is included
/// exactly when it lies on a directed cycle.
pub fn descendants(g: &CausalGraph, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<usize> = g.children(v).into_iter().collect();
    while let Some(w) = queue.pop_front() {
        if seen.insert(w) {
            queue.extend(g.children(w));
        }
    }
    seen
}

/// Descendants of a set (union over members, same cycle semantics).
pub fn descendants_of_set(g: &CausalGraph, s: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &v in s {
        out.extend(descendants(g, v));
    }
    out
}

fn check_disjoint(x: &BTreeSet<usize>, z: &BTreeSet<usize>, y: &BTreeSet<usize>) -> Result<()> {
    if x.intersection(z).next().is_some()
        || x.intersection(y).next().is_some()
        || z.intersection(y).next().is_some()
    {
        return Err(Error::argument("X, Z, Y must be pairwise disjoint"));
    }
    Ok(())
}

/// Nodes that are in `z` or have a descendant in `z` (collider activators).
fn collider_activators(g: &CausalGraph, z: &BTreeSet<usize>) -> Vec<bool> {
    let mut active = vec![false; g.n];
    let mut queue: VecDeque<usize> = z.iter().copied().collect();
    for &v in z {
        active[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for p in g.parents(v) {
            if !active[p] {
                active[p] = true;
                queue.push_back(p);
            }
        }
    }
    active
}

/// True iff `Z` d-separates `X` and `Y`: every path between them is blocked
/// by a non-collider in `Z` or an inactive collider. Implemented as a walk
/// reachability search over (node, entry-direction) states.
pub fn d_separated(
    g: &CausalGraph,
    x: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
) -> Result<bool> {
    check_disjoint(x, z, y)?;
    for s in [x, z, y] {
        if let Some(&v) = s.iter().find(|&&v| v >= g.n) {
            return Err(Error::argument(format!("node {v} out of range")));
        }
    }
    if x.is_empty() || y.is_empty() {
        return Ok(true);
    }

    let activator = collider_activators(g, z);
    // State (v, true) = arrived along an edge pointing into v;
    // state (v, false) = arrived along an edge pointing out of v.
    let mut visited = vec![[false; 2]; g.n];
    let mut queue: VecDeque<(usize, bool)> = VecDeque::new();

    for &s in x {
        // Leaving the source: along out-edges we enter the next node via its
        // head; along in-edges we enter the previous node via its tail.
        for w in g.children(s) {
            queue.push_back((w, true));
        }
        for w in g.parents(s) {
            queue.push_back((w, false));
        }
    }

    while let Some((v, via_head)) = queue.pop_front() {
        if visited[v][via_head as usize] {
            continue;
        }
        visited[v][via_head as usize] = true;
        if y.contains(&v) {
            return Ok(false);
        }
        if via_head {
            // ... -> v : continue as a chain (v not in Z) or bounce back
            // through an activated collider.
            if !z.contains(&v) {
                for w in g.children(v) {
                    queue.push_back((w, true));
                }
            }
            if activator[v] {
                for w in g.parents(v) {
                    queue.push_back((w, false));
                }
            }
        } else {
            // ... <- v : fork or reversed chain, both need v not in Z.
            if !z.contains(&v) {
                for w in g.children(v) {
                    queue.push_back((w, true));
                }
                for w in g.parents(v) {
                    queue.push_back((w, false));
                }
            }
        }
    }
    Ok(true)
}

/// Brute-force oracle: enumerate every simple path between `X` and `Y` and
/// apply the blocking definition literally. Exponential; for small graphs and
/// cross-checking only.
pub fn d_separated_enumerate(
    g: &CausalGraph,
    x: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
) -> Result<bool> {
    check_disjoint(x, z, y)?;
    let activator = collider_activators(g, z);

    // Steps carry the edge orientation: `into_next` records whether the edge
    // used points into the node being entered.
    fn dfs(
        g: &CausalGraph,
        z: &BTreeSet<usize>,
        activator: &[bool],
        y: &BTreeSet<usize>,
        on_path: &mut Vec<bool>,
        v: usize,
        entered_via_head: Option<bool>,
    ) -> bool {
        if y.contains(&v) {
            return true;
        }
        on_path[v] = true;
        let mut steps: Vec<(usize, bool)> = Vec::new();
        for w in g.children(v) {
            steps.push((w, true));
        }
        for w in g.parents(v) {
            steps.push((w, false));
        }
        for (w, into_next) in steps {
            if on_path[w] {
                continue;
            }
            // Blocking check at v (only when v is an interior node).
            if let Some(via_head) = entered_via_head {
                let leave_via_in_edge = !into_next; // edge w->v points into v
                let is_collider = via_head && leave_via_in_edge;
                let blocked = if is_collider {
                    !activator[v]
                } else {
                    z.contains(&v)
                };
                if blocked {
                    continue;
                }
            }
            if dfs(g, z, activator, y, on_path, w, Some(into_next)) {
                on_path[v] = false;
                return true;
            }
        }
        on_path[v] = false;
        false
    }

    let mut on_path = vec![false; g.n];
    for &s in x {
        if dfs(g, z, &activator, y, &mut on_path, s, None) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pass/fail record for a door criterion, naming each condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub criterion: String,
    pub conditions: Vec<(String, bool)>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.conditions.iter().all(|(_, ok)| *ok)
    }

    pub fn first_violated(&self) -> Option<&str> {
        self.conditions
            .iter()
            .find(|(_, ok)| !*ok)
            .map(|(name, _)| name.as_str())
    }
}

/// Single-door criterion for the direct edge `u -> y` adjusted by `Z`:
/// (C1) no descendant of `y` in `Z`, (C2) `Z` d-separates `u`, `y` once the
/// edge is deleted, (C3) no directed cycle through `y`.
pub fn single_door_report(
    g: &CausalGraph,
    u: usize,
    y: usize,
    z: &BTreeSet<usize>,
) -> Result<AdmissibilityReport> {
    if !g.has_edge(u, y) {
        return Err(Error::argument(format!("edge {u}->{y} not present")));
    }
    if z.contains(&u) || z.contains(&y) {
        return Err(Error::argument("u and y must not belong to Z"));
    }
    let c1 = descendants(g, y).intersection(z).next().is_none();
    let deleted = g.without_edge(u, y);
    let c2 = d_separated(
        &deleted,
        &BTreeSet::from([u]),
        z,
        &BTreeSet::from([y]),
    )?;
    let c3 = !descendants(g, y).contains(&y);
    Ok(AdmissibilityReport {
        criterion: "single-door".into(),
        conditions: vec![("C1".into(), c1), ("C2".into(), c2), ("C3".into(), c3)],
    })
}

pub fn single_door_admissible(
    g: &CausalGraph,
    u: usize,
    y: usize,
    z: &BTreeSet<usize>,
) -> Result<bool> {
    Ok(single_door_report(g, u, y, z)?.admissible())
}

/// Back-door criterion for `(W, Y)`: `Z` holds no descendant of `W` and
/// blocks every path into `W`, checked by d-separation in the graph with
/// `W`'s out-edges removed.
pub fn back_door_report(
    g: &CausalGraph,
    w: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<AdmissibilityReport> {
    check_disjoint(w, z, y)?;
    let b1 = descendants_of_set(g, w).intersection(z).next().is_none();
    let trimmed = g.without_out_edges(w);
    let b2 = d_separated(&trimmed, w, z, y)?;
    Ok(AdmissibilityReport {
        criterion: "back-door".into(),
        conditions: vec![("B1".into(), b1), ("B2".into(), b2)],
    })
}

pub fn back_door_admissible(
    g: &CausalGraph,
    w: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<bool> {
    Ok(back_door_report(g, w, y, z)?.admissible())
}

/// True iff some directed path from a node of `w` reaches `y` while avoiding
/// `block` at interior nodes and endpoints after the start.
fn directed_path_avoiding(
    g: &CausalGraph,
    w: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    block: &BTreeSet<usize>,
) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<usize> = w.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for c in g.children(v) {
            if y.contains(&c) {
                return true;
            }
            if block.contains(&c) || !seen.insert(c) {
                continue;
            }
            queue.push_back(c);
        }
    }
    false
}

/// Front-door criterion for `(W, Y)` with mediators `Z`:
/// (F1) every directed path from `W` to `Y` passes through `Z`,
/// (F2) `W` blocks every back-door path from `Z` to `Y`,
/// (F3) no back-door path from `W` to `Z` is active given the empty set.
pub fn front_door_report(
    g: &CausalGraph,
    w: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<AdmissibilityReport> {
    check_disjoint(w, z, y)?;
    let f1 = !directed_path_avoiding(g, w, y, z);
    let f2 = d_separated(&g.without_out_edges(z), z, w, y)?;
    let f3 = d_separated(&g.without_out_edges(w), w, &BTreeSet::new(), z)?;
    Ok(AdmissibilityReport {
        criterion: "front-door".into(),
        conditions: vec![("F1".into(), f1), ("F2".into(), f2), ("F3".into(), f3)],
    })
}

pub fn front_door_admissible(
    g: &CausalGraph,
    w: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<bool> {
    Ok(front_door_report(g, w, y, z)?.admissible())
}

/// Orientation propagation rules applied to a fixpoint. `R1`: a->b, b-c,
/// a,c nonadjacent => b->c. `R2`: a->b->c, a-c => a->c. `R3`: a-b, a-c, a-d,
/// c->b, d->b, c,d nonadjacent => a->b. `R4`: a-b, a-c, a-d(or c-d), d->c,
/// c->b => a->b (with d adjacent to a).
pub fn meek_closure(cpdag: &mut Cpdag) {
    let n = cpdag.n;
    loop {
        let mut oriented: Option<(usize, usize)> = None;
        let skel = cpdag.skeleton();
        let adjacent = |a: usize, b: usize| skel.contains(&(a.min(b), a.max(b)));
        let directed = cpdag.directed.clone();
        let undirected: Vec<(usize, usize)> = cpdag.undirected.iter().copied().collect();

        'search: for &(x, y) in &undirected {
            for (a, b) in [(x, y), (y, x)] {
                // R1: exists c -> a with c, b nonadjacent.
                for c in 0..n {
                    if directed.contains(&(c, a)) && c != b && !adjacent(c, b) {
                        oriented = Some((a, b));
                        break 'search;
                    }
                }
                // R2: a -> c -> b for some c.
                for c in 0..n {
                    if directed.contains(&(a, c)) && directed.contains(&(c, b)) {
                        oriented = Some((a, b));
                        break 'search;
                    }
                }
                // R3: c -> b, d -> b with a-c, a-d undirected, c,d nonadjacent.
                for c in 0..n {
                    for d in 0..n {
                        if c == d || !directed.contains(&(c, b)) || !directed.contains(&(d, b)) {
                            continue;
                        }
                        let ac = cpdag.undirected.contains(&(a.min(c), a.max(c)));
                        let ad = cpdag.undirected.contains(&(a.min(d), a.max(d)));
                        if ac && ad && !adjacent(c, d) {
                            oriented = Some((a, b));
                            break 'search;
                        }
                    }
                }
                // R4: d -> c, c -> b with a-d adjacent and a-c undirected.
                for c in 0..n {
                    for d in 0..n {
                        if c == d || !directed.contains(&(d, c)) || !directed.contains(&(c, b)) {
                            continue;
                        }
                        let ac = cpdag.undirected.contains(&(a.min(c), a.max(c)));
                        if ac && adjacent(a, d) && !adjacent(d, b) {
                            oriented = Some((a, b));
                            break 'search;
                        }
                    }
                }
            }
        }

        match oriented {
            Some((a, b)) => {
                cpdag.undirected.remove(&(a.min(b), a.max(b)));
                cpdag.directed.insert((a, b));
            }
            None => break,
        }
    }
}

/// Essential graph (CPDAG) of a DAG: skeleton plus v-structures, closed
/// under the Meek rules. Used as the golden reference for discovery.
pub fn cpdag_of_dag(g: &CausalGraph) -> Result<Cpdag> {
    if !g.is_dag() {
        return Err(Error::argument("cpdag_of_dag requires a DAG"));
    }
    let mut cpdag = Cpdag::new(g.n);
    let skel = topology(g);
    let mut v_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (a, c, b) in colliders(g) {
        if !skel.contains(&(a.min(b), a.max(b))) {
            v_edges.insert((a, c));
            v_edges.insert((b, c));
        }
    }
    cpdag.directed = v_edges;
    for &(u, v) in &skel {
        if !cpdag.directed.contains(&(u, v)) && !cpdag.directed.contains(&(v, u)) {
            cpdag.undirected.insert((u, v));
        }
    }
    meek_closure(&mut cpdag);
    cpdag.check_invariant()?;
    Ok(cpdag)
}

/// Random directed graph (cycles allowed) with the given edge probability.
pub fn random_digraph(n: usize, p: f64, rng: &mut impl rand::Rng) -> CausalGraph {
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random::<f64>() < p {
                edges.insert((u, v));
            }
        }
    }
    CausalGraph { n, edges }
}

/// Random DAG: edges only from lower to higher index under a random relabel.
pub fn random_dag(n: usize, p: f64, rng: &mut impl rand::Rng) -> CausalGraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.insert((order[i], order[j]));
            }
        }
    }
    CausalGraph { n, edges }
}

pub(crate) fn set_of(items: &[usize]) -> BTreeSet<usize> {
    items.iter().copied().collect()
}
