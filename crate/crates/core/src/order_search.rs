//! Searches over visiting orders, and over partitions for multi-curve
//! opaque sets.
//!
//! Orders are improved with point positions frozen, then the continuous
//! solver re-places the points for the new order. The exact searches
//! (exhaustive, Held-Karp, branch-and-bound) are exact for the frozen
//! positions only.

use std::collections::HashMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::nlp_solver::{solve_fixed_order, solve_from_points, SolveOptions, Solution};
use crate::path::chain_length;
use crate::scenario::{Instance, Mode};

pub const EXHAUSTIVE_LIMIT: usize = 9;
pub const HELD_KARP_LIMIT: usize = 20;
pub const MTZ_LIMIT: usize = 12;
pub const PARTITION_EXHAUSTIVE_LIMIT: usize = 10;
const ALTERNATING_LIMIT: usize = 50;
const PARTITION_PATIENCE: usize = 200;

/// How the visiting order of a solve is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// The instance's assumed order, or the natural order without one.
    Hint,
    Exhaustive,
    HeldKarp,
    TwoOpt,
    Mtz,
    Alternating,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Hint,
        Strategy::Exhaustive,
        Strategy::HeldKarp,
        Strategy::TwoOpt,
        Strategy::Mtz,
        Strategy::Alternating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Hint => "hint",
            Strategy::Exhaustive => "exhaustive",
            Strategy::HeldKarp => "heldkarp",
            Strategy::TwoOpt => "twoopt",
            Strategy::Mtz => "mtz",
            Strategy::Alternating => "alternating",
        }
    }

    /// `Hint` when an assumed order exists, else `Alternating`.
    pub fn default_for(hint: Option<&OrderPlan>) -> Strategy {
        if hint.is_some() {
            Strategy::Hint
        } else {
            Strategy::Alternating
        }
    }

    /// Solves `inst`; `hint` is the assumed order (also the 2-opt start).
    pub fn solve(self, inst: &Instance, hint: Option<&OrderPlan>, opts: &SolveOptions) -> Result<Solution> {
        let natural = || OrderPlan::identity(inst.len());
        match self {
            Strategy::Hint => solve_fixed_order(inst, &hint.cloned().unwrap_or_else(natural), opts),
            Strategy::Exhaustive => exhaustive(inst, opts),
            Strategy::HeldKarp => held_karp(inst, opts),
            Strategy::TwoOpt => two_opt(inst, &hint.cloned().unwrap_or_else(natural), opts),
            Strategy::Mtz => Ok(mtz_branch_and_bound(inst, opts)?.solution),
            Strategy::Alternating => solve_alternating(inst, hint, opts),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy '{s}'")))
    }
}

/// A visiting order: `perm()[j]` is the boundary visited at position `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct OrderPlan {
    perm: Vec<usize>,
}

impl OrderPlan {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &h in &perm {
            if h >= perm.len() || std::mem::replace(&mut seen[h], true) {
                return Err(Error::InvalidInput(format!("order {perm:?} is not a permutation")));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(k: usize) -> Self {
        Self { perm: (0..k).collect() }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Visit position of boundary `h`.
    pub fn position_of(&self, h: usize) -> Option<usize> {
        self.perm.iter().position(|&x| x == h)
    }

    pub fn reversed(&self) -> Self {
        Self {
            perm: self.perm.iter().rev().copied().collect(),
        }
    }
}

impl TryFrom<Vec<usize>> for OrderPlan {
    type Error = Error;
    fn try_from(perm: Vec<usize>) -> Result<Self> {
        OrderPlan::new(perm)
    }
}

impl From<OrderPlan> for Vec<usize> {
    fn from(plan: OrderPlan) -> Self {
        plan.perm
    }
}

/// Mixed-integer encoding of an order with Miller-Tucker-Zemlin subtour
/// elimination.
///
/// Node 0 is the first visited boundary; `nodes[i]` is the boundary behind
/// node `i`. Every node has one outgoing and one incoming arc, so the last
/// node points back to node 0. That closing arc costs the return leg to the
/// anchor for closed paths and nothing otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct MtzModel {
    pub nodes: Vec<usize>,
    pub b: Vec<Vec<u8>>,
    pub u: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    /// Anchor leg to node 0; absent for opaque curves.
    pub c00: Option<f64>,
    pub points: Vec<Vec3>,
    pub anchor: Option<Vec3>,
    pub closed: bool,
    pub dim: usize,
}

impl MtzModel {
    /// Model whose decision variables encode `sol`.
    pub fn from_solution(inst: &Instance, sol: &Solution) -> Result<Self> {
        let k = sol.order.len();
        if k == 0 {
            return Err(Error::InvalidInput("empty order".into()));
        }
        let nodes = sol.order.perm().to_vec();
        let points = sol.points().to_vec();
        let closed = inst.is_closed();
        let mut c = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                c[i][j] = if j == 0 {
                    match (closed, inst.anchor) {
                        (true, Some(a)) => (points[i] - a).norm(),
                        _ => 0.0,
                    }
                } else {
                    (points[i] - points[j]).norm()
                };
            }
            c[i][i] = 0.0;
        }
        let mut b = vec![vec![0u8; k]; k];
        if k > 1 {
            for i in 0..k {
                b[i][(i + 1) % k] = 1;
            }
        }
        let model = MtzModel {
            nodes,
            b,
            u: (0..k).map(|i| i as f64).collect(),
            c,
            c00: inst.anchor.map(|a| (points[0] - a).norm()),
            points,
            anchor: inst.anchor,
            closed,
            dim: inst.dim,
        };
        model.check()?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    pub fn binary_count(&self) -> usize {
        self.k() * self.k()
    }

    pub fn auxiliary_count(&self) -> usize {
        self.u.len()
    }

    /// Coefficient of `(1 - b_ij)` in the subtour constraints.
    pub fn subtour_coefficient(&self) -> f64 {
        self.k() as f64 - 1.0
    }

    pub fn objective(&self) -> f64 {
        let mut terms = vec![self.c00.unwrap_or(0.0)];
        for (brow, crow) in self.b.iter().zip(&self.c) {
            for (&bij, &cij) in brow.iter().zip(crow) {
                if bij == 1 {
                    terms.push(cij);
                }
            }
        }
        crate::path::compensated_sum(&terms)
    }

    /// Assignment, diagonal, bound and subtour constraints.
    pub fn check(&self) -> Result<()> {
        let k = self.k();
        let bad = |msg: String| Err(Error::ModelInvariant(msg));
        if self.b.len() != k || self.c.len() != k || self.u.len() != k || self.points.len() != k {
            return bad("matrix sizes disagree with the node count".into());
        }
        if k == 1 {
            return if self.b[0][0] == 0 { Ok(()) } else { bad("self loop on the only node".into()) };
        }
        for i in 0..k {
            if self.b[i].len() != k || self.c[i].len() != k {
                return bad(format!("row {i} has the wrong width"));
            }
            if self.b[i][i] != 0 {
                return bad(format!("self loop at node {i}"));
            }
            let row: u32 = self.b[i].iter().map(|&v| v as u32).sum();
            let col: u32 = (0..k).map(|r| self.b[r][i] as u32).sum();
            if row != 1 || col != 1 {
                return bad(format!("node {i} has {row} departures and {col} arrivals"));
            }
            if !(0.0..=(k - 1) as f64).contains(&self.u[i]) {
                return bad(format!("u_{i} = {} outside [0, {}]", self.u[i], k - 1));
            }
        }
        let big = self.subtour_coefficient();
        for i in 1..k {
            for j in 1..k {
                if self.u[i] - self.u[j] + 1.0 > big * (1.0 - self.b[i][j] as f64) + 1e-9 {
                    return bad(format!("subtour constraint violated for ({i}, {j})"));
                }
            }
        }
        Ok(())
    }
}

/// Subsets of boundaries, each covered by its own opaque curve.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    pub subsets: Vec<Vec<usize>>,
    /// Order within each subset, over local indices.
    pub orders: Vec<OrderPlan>,
    /// Every subset is a single boundary, so all curves are points.
    pub degenerate: bool,
}

impl PartitionPlan {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.subsets.is_empty() || self.subsets.len() != self.orders.len() {
            return Err(Error::InvalidInput("partition needs at least one subset and one order per subset".into()));
        }
        let mut seen = vec![false; k];
        for (s, o) in self.subsets.iter().zip(&self.orders) {
            if s.is_empty() || o.len() != s.len() {
                return Err(Error::InvalidInput("partition subsets must be nonempty".into()));
            }
            for &h in s {
                if h >= k || std::mem::replace(&mut seen[h], true) {
                    return Err(Error::InvalidInput(format!("boundary {h} repeated or out of range")));
                }
            }
        }
        if seen.iter().any(|v| !v) {
            return Err(Error::InvalidInput("partition does not cover every boundary".into()));
        }
        Ok(())
    }

    /// Boundary indices of subset `i` in visit order.
    pub fn visit_order(&self, i: usize) -> Vec<usize> {
        self.orders[i].perm().iter().map(|&j| self.subsets[i][j]).collect()
    }
}

fn guard(what: &'static str, limit: usize, size: usize) -> Result<()> {
    if size > limit {
        return Err(Error::SizeGuard {
            what,
            limit,
            size,
        });
    }
    Ok(())
}

/// Length of visiting `perm` with points frozen (indexed by boundary).
fn frozen_length(inst: &Instance, points: &[Vec3], perm: &[usize]) -> f64 {
    let pts: Vec<Vec3> = perm.iter().map(|&h| points[h]).collect();
    chain_length(inst.anchor, &pts, inst.is_closed())
}

fn rel_tol(length: f64) -> f64 {
    1e-12 * length.abs().max(1e-300)
}

/// Solves every order and keeps the shortest; near-ties go to the
/// lexicographically first order.
pub fn exhaustive(inst: &Instance, opts: &SolveOptions) -> Result<Solution> {
    let k = inst.len();
    guard("exhaustive order search", EXHAUSTIVE_LIMIT, k)?;
    if k == 0 {
        return Err(Error::InvalidInput("instance has no boundaries".into()));
    }
    let perms: Vec<Vec<usize>> = (0..k).permutations(k).collect();
    let results: Vec<Option<Solution>> = perms
        .into_par_iter()
        .map(|p| {
            let order = OrderPlan::new(p).expect("permutations are valid");
            match solve_fixed_order(inst, &order, opts) {
                Ok(s) => Ok(Some(s)),
                Err(Error::NonConvergence { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut best: Option<Solution> = None;
    for s in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| s.length < b.length - rel_tol(b.length)) {
            best = Some(s);
        }
    }
    best.ok_or_else(|| Error::NonConvergence {
        reason: "no order produced a feasible solution".into(),
        best_length: f64::NAN,
        best_residual: f64::NAN,
    })
}

/// Optimal order for frozen points (indexed by boundary) by dynamic
/// programming over subsets. Opaque curves start anywhere; closed paths pay
/// the return leg.
pub fn held_karp_order(inst: &Instance, points: &[Vec3]) -> Result<OrderPlan> {
    let k = inst.len();
    guard("Held-Karp order search", HELD_KARP_LIMIT, k)?;
    if points.len() != k {
        return Err(Error::InvalidInput("one point per boundary is required".into()));
    }
    if k <= 1 {
        return Ok(OrderPlan::identity(k));
    }
    let d = |i: usize, j: usize| (points[i] - points[j]).norm();
    let full = 1usize << k;
    let mut dp = vec![f64::INFINITY; full * k];
    let mut parent = vec![u8::MAX; full * k];
    for j in 0..k {
        dp[(1 << j) * k + j] = inst.anchor.map_or(0.0, |a| (points[j] - a).norm());
    }
    for mask in 1..full {
        for j in 0..k {
            let cur = dp[mask * k + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for next in 0..k {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let m2 = mask | (1 << next);
                let cand = cur + d(j, next);
                if cand < dp[m2 * k + next] {
                    dp[m2 * k + next] = cand;
                    parent[m2 * k + next] = j as u8;
                }
            }
        }
    }
    let last_mask = full - 1;
    let mut end = 0;
    let mut best = f64::INFINITY;
    for j in 0..k {
        let ret = match (inst.is_closed(), inst.anchor) {
            (true, Some(a)) => (points[j] - a).norm(),
            _ => 0.0,
        };
        let v = dp[last_mask * k + j] + ret;
        if v < best {
            best = v;
            end = j;
        }
    }
    let mut perm = Vec::with_capacity(k);
    let mut mask = last_mask;
    let mut j = end;
    loop {
        perm.push(j);
        let p = parent[mask * k + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    perm.reverse();
    OrderPlan::new(perm)
}

/// Re-solves `order` continuously: the cold multistart solve, unless the
/// warm start from `frozen` (indexed by boundary) is clearly shorter.
fn resolve_order(inst: &Instance, order: &OrderPlan, frozen: &[Vec3], opts: &SolveOptions) -> Result<Solution> {
    let warm_start: Vec<Vec3> = order.perm().iter().map(|&h| frozen[h]).collect();
    let warm = solve_from_points(inst, order, &warm_start, opts).ok();
    let cold = solve_fixed_order(inst, order, opts);
    match (cold, warm) {
        (Ok(c), Some(w)) => Ok(if w.length < c.length - 1e-9 * c.length { w } else { c }),
        (Ok(c), None) => Ok(c),
        (Err(_), Some(w)) => Ok(w),
        (Err(e), None) => Err(e),
    }
}

/// Held-Karp on positions from a natural-order solve, then a continuous
/// re-solve at the optimal frozen order.
pub fn held_karp(inst: &Instance, opts: &SolveOptions) -> Result<Solution> {
    guard("Held-Karp order search", HELD_KARP_LIMIT, inst.len())?;
    let base = solve_fixed_order(inst, &OrderPlan::identity(inst.len()), opts)?;
    let frozen = base.points_by_boundary();
    let order = held_karp_order(inst, &frozen)?;
    resolve_order(inst, &order, &frozen, opts)
}

/// Reverses `perm[i..=j]`.
fn two_opt_move(perm: &[usize], i: usize, j: usize) -> Vec<usize> {
    let mut out = perm.to_vec();
    out[i..=j].reverse();
    out
}

/// First-improvement 2-opt on frozen points; returns the improved order.
fn two_opt_frozen(inst: &Instance, points: &[Vec3], start: &OrderPlan) -> OrderPlan {
    let mut perm = start.perm().to_vec();
    let mut current = frozen_length(inst, points, &perm);
    let k = perm.len();
    for _ in 0..1000 {
        let mut improved = false;
        'scan: for i in 0..k {
            for j in i + 1..k {
                let cand = two_opt_move(&perm, i, j);
                let len = frozen_length(inst, points, &cand);
                if len < current - rel_tol(current) {
                    perm = cand;
                    current = len;
                    improved = true;
                    break 'scan;
                }
            }
        }
        if !improved {
            break;
        }
    }
    OrderPlan::new(perm).expect("2-opt preserves permutations")
}

/// First-improvement 2-opt with a continuous re-solve for every accepted
/// move. Never returns a longer path than the solved start order.
pub fn two_opt(inst: &Instance, start_order: &OrderPlan, opts: &SolveOptions) -> Result<Solution> {
    let mut best = solve_fixed_order(inst, start_order, opts)?;
    let k = inst.len();
    for _ in 0..1000 {
        let mut improved = false;
        let by_boundary = best.points_by_boundary();
        let current_frozen = best.length;
        'scan: for i in 0..k {
            for j in i + 1..k {
                let cand = OrderPlan::new(two_opt_move(best.order.perm(), i, j))?;
                if frozen_length(inst, &by_boundary, cand.perm()) >= current_frozen - rel_tol(current_frozen) {
                    continue;
                }
                let warm: Vec<Vec3> = cand.perm().iter().map(|&h| by_boundary[h]).collect();
                if let Ok(s) = solve_from_points(inst, &cand, &warm, opts) {
                    if s.length < best.length - rel_tol(best.length) {
                        best = s;
                        improved = true;
                        break 'scan;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}

/// Minimum spanning tree weight over `nodes` (Prim, dense).
fn mst_weight(nodes: &[Vec3]) -> f64 {
    let n = nodes.len();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    dist[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let (u, du) = dist
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_tree[*i])
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &d)| (i, d))
            .expect("a node remains");
        in_tree[u] = true;
        total += du;
        for v in 0..n {
            if !in_tree[v] {
                let d = (nodes[u] - nodes[v]).norm();
                if d < dist[v] {
                    dist[v] = d;
                }
            }
        }
    }
    total
}

struct BranchAndBound<'a> {
    inst: &'a Instance,
    points: &'a [Vec3],
    best_len: f64,
    best: Option<Vec<usize>>,
    nodes_visited: usize,
}

impl BranchAndBound<'_> {
    fn bound(&self, prefix: &[usize], partial: f64, used: &[bool]) -> f64 {
        let mut rest: Vec<Vec3> = (0..self.points.len()).filter(|&h| !used[h]).map(|h| self.points[h]).collect();
        if let Some(&last) = prefix.last() {
            rest.push(self.points[last]);
        }
        if let (true, Some(a)) = (self.inst.is_closed(), self.inst.anchor) {
            rest.push(a);
        }
        partial + mst_weight(&rest)
    }

    fn search(&mut self, prefix: &mut Vec<usize>, partial: f64, used: &mut [bool]) {
        self.nodes_visited += 1;
        let k = self.points.len();
        if prefix.len() == k {
            let len = frozen_length(self.inst, self.points, prefix);
            if len < self.best_len - rel_tol(self.best_len) || self.best.is_none() {
                self.best_len = len;
                self.best = Some(prefix.clone());
            }
            return;
        }
        if self.best.is_some() && self.bound(prefix, partial, used) > self.best_len * (1.0 + 1e-12) {
            return;
        }
        for h in 0..k {
            if used[h] {
                continue;
            }
            let step = match prefix.last() {
                Some(&last) => (self.points[h] - self.points[last]).norm(),
                None => self.inst.anchor.map_or(0.0, |a| (self.points[h] - a).norm()),
            };
            used[h] = true;
            prefix.push(h);
            self.search(prefix, partial + step, used);
            prefix.pop();
            used[h] = false;
        }
    }
}

/// Optimal order for frozen points by depth-first branch-and-bound on the
/// next boundary to visit, pruned with a spanning-tree lower bound.
pub fn branch_and_bound_order(inst: &Instance, points: &[Vec3]) -> Result<(OrderPlan, usize)> {
    let k = inst.len();
    guard("branch-and-bound order search", MTZ_LIMIT, k)?;
    if points.len() != k {
        return Err(Error::InvalidInput("one point per boundary is required".into()));
    }
    let mut bb = BranchAndBound {
        inst,
        points,
        best_len: f64::INFINITY,
        best: None,
        nodes_visited: 0,
    };
    bb.search(&mut Vec::with_capacity(k), 0.0, &mut vec![false; k]);
    let nodes = bb.nodes_visited;
    Ok((OrderPlan::new(bb.best.unwrap_or_default())?, nodes))
}

#[derive(Clone, Debug)]
pub struct MtzOutcome {
    pub solution: Solution,
    pub model: MtzModel,
    /// Search-tree nodes expanded.
    pub nodes_visited: usize,
}

/// Branch-and-bound over orders on positions from a natural-order solve,
/// re-solved continuously at the winning order; the returned model encodes
/// that solution.
pub fn mtz_branch_and_bound(inst: &Instance, opts: &SolveOptions) -> Result<MtzOutcome> {
    guard("branch-and-bound order search", MTZ_LIMIT, inst.len())?;
    let base = solve_fixed_order(inst, &OrderPlan::identity(inst.len()), opts)?;
    let frozen = base.points_by_boundary();
    let (order, nodes_visited) = branch_and_bound_order(inst, &frozen)?;
    let solution = resolve_order(inst, &order, &frozen, opts)?;
    let model = MtzModel::from_solution(inst, &solution)?;
    Ok(MtzOutcome {
        solution,
        model,
        nodes_visited,
    })
}

/// Improved order for frozen points: Held-Karp when affordable, else 2-opt.
fn improve_order(inst: &Instance, sol: &Solution) -> Result<OrderPlan> {
    let frozen = sol.points_by_boundary();
    if inst.len() <= HELD_KARP_LIMIT.min(16) {
        held_karp_order(inst, &frozen)
    } else {
        Ok(two_opt_frozen(inst, &frozen, &sol.order))
    }
}

/// Alternates continuous solves and order improvement until neither helps.
/// `Solution::iterations` counts the continuous solves performed.
pub fn solve_alternating(inst: &Instance, hint: Option<&OrderPlan>, opts: &SolveOptions) -> Result<Solution> {
    let start = hint.cloned().unwrap_or_else(|| OrderPlan::identity(inst.len()));
    let mut best = solve_fixed_order(inst, &start, opts)?;
    let mut iterations = 1;
    while iterations < ALTERNATING_LIMIT {
        let order = improve_order(inst, &best)?;
        if order == best.order {
            break;
        }
        let frozen = best.points_by_boundary();
        if frozen_length(inst, &frozen, order.perm()) >= best.length - rel_tol(best.length) {
            break;
        }
        iterations += 1;
        let next = resolve_order(inst, &order, &frozen, opts)?;
        log::debug!("alternating step {iterations}: {:.12} -> {:.12}", best.length, next.length);
        if next.length < best.length - rel_tol(best.length) {
            best = next;
        } else {
            break;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

/// Restricted-growth strings of length `n` with exactly `p` blocks.
fn set_partitions(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, p: usize, blocks: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            if blocks == p {
                out.push(cur.clone());
            }
            return;
        }
        if blocks + (n - i) < p {
            return;
        }
        for b in 0..=blocks.min(p - 1) {
            cur.push(b);
            rec(i + 1, n, p, blocks.max(b + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, p, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

struct SubsetSolver<'a> {
    inst: &'a Instance,
    opts: &'a SolveOptions,
    cache: HashMap<Vec<usize>, (f64, OrderPlan, Solution)>,
}

impl SubsetSolver<'_> {
    fn solve(&mut self, subset: &[usize]) -> Result<(f64, OrderPlan, Solution)> {
        if let Some(hit) = self.cache.get(subset) {
            return Ok(hit.clone());
        }
        let sub = self.inst.subset(subset)?;
        let sol = if sub.len() <= 6 {
            exhaustive(&sub, self.opts)?
        } else {
            solve_alternating(&sub, None, self.opts)?
        };
        let out = (sol.length, sol.order.clone(), sol);
        self.cache.insert(subset.to_vec(), out.clone());
        Ok(out)
    }

    fn total(&mut self, labels: &[usize], p: usize) -> Result<f64> {
        let mut total = 0.0;
        for s in blocks_of(labels, p) {
            total += self.solve(&s)?.0;
        }
        Ok(total)
    }
}

fn blocks_of(labels: &[usize], p: usize) -> Vec<Vec<usize>> {
    let mut blocks = vec![Vec::new(); p];
    for (h, &b) in labels.iter().enumerate() {
        blocks[b].push(h);
    }
    blocks
}

/// Splits an opaque instance into `p` curves minimizing total length.
/// Up to [`PARTITION_EXHAUSTIVE_LIMIT`] boundaries every partition is tried;
/// beyond that, seeded relocate and swap moves run until 200 consecutive
/// moves fail to improve.
pub fn partition_search(inst: &Instance, p: usize, opts: &SolveOptions) -> Result<(PartitionPlan, Vec<Solution>)> {
    let k = inst.len();
    if inst.mode != Mode::Opaque {
        return Err(Error::InvalidInput("partition search applies to opaque instances".into()));
    }
    if p == 0 || p > k {
        return Err(Error::InvalidInput(format!("cannot split {k} boundaries into {p} nonempty subsets")));
    }
    let mut solver = SubsetSolver {
        inst,
        opts,
        cache: HashMap::new(),
    };
    let labels = if k <= PARTITION_EXHAUSTIVE_LIMIT {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for labels in set_partitions(k, p) {
            let total = solver.total(&labels, p)?;
            if best.as_ref().is_none_or(|(b, _)| total < *b - rel_tol(*b)) {
                best = Some((total, labels));
            }
        }
        best.expect("at least one partition").1
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        // Contiguous blocks of the natural order.
        let mut labels: Vec<usize> = (0..k).map(|h| h * p / k).collect();
        let mut current = solver.total(&labels, p)?;
        let mut stale = 0;
        while stale < PARTITION_PATIENCE {
            let mut cand = labels.clone();
            if rng.gen_bool(0.5) {
                let h = rng.gen_range(0..k);
                let to = rng.gen_range(0..p);
                cand[h] = to;
            } else {
                let a = rng.gen_range(0..k);
                let b = rng.gen_range(0..k);
                cand.swap(a, b);
            }
            let sizes = blocks_of(&cand, p);
            if cand == labels || sizes.iter().any(|s| s.is_empty()) {
                stale += 1;
                continue;
            }
            let total = solver.total(&cand, p)?;
            if total < current - rel_tol(current) {
                labels = cand;
                current = total;
                stale = 0;
            } else {
                stale += 1;
            }
        }
        labels
    };
    let subsets = blocks_of(&labels, p);
    let mut orders = Vec::with_capacity(p);
    let mut solutions = Vec::with_capacity(p);
    for s in &subsets {
        let (_, order, sol) = solver.solve(s)?;
        orders.push(order);
        solutions.push(sol);
    }
    let plan = PartitionPlan {
        degenerate: subsets.iter().all(|s| s.len() == 1),
        subsets,
        orders,
    };
    plan.validate(k)?;
    Ok((plan, solutions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryExpr, Vec2};
    use crate::scenario::catalog_instance;

    fn points_instance(pts: &[(f64, f64)], mode: Mode) -> Instance {
        let anchor = (mode != Mode::Opaque).then_some(Vec3::ZERO);
        Instance::from_boundaries(
            "points",
            pts.iter().map(|&(x, y)| BoundaryExpr::point(Vec2::new(x, y))).collect(),
            anchor,
            mode,
        )
        .unwrap()
    }

    fn random_points(seed: u64, k: usize) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k).map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect()
    }

    #[test]
    fn order_plan_bijection() {
        assert!(OrderPlan::new(vec![2, 0, 1]).is_ok());
        assert!(OrderPlan::new(vec![0, 0, 1]).is_err());
        assert!(OrderPlan::new(vec![0, 3, 1]).is_err());
        let p = OrderPlan::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.position_of(0), Some(1));
        assert_eq!(p.reversed().perm(), &[1, 0, 2]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[2,0,1]");
        assert!(serde_json::from_str::<OrderPlan>("[1,1]").is_err());
    }

    #[test]
    fn collinear_points() {
        let inst = points_instance(&[(3.0, 0.0), (1.0, 0.0), (2.0, 0.0)], Mode::EscapeOpen);
        let opts = SolveOptions::default();
        let ex = exhaustive(&inst, &opts).unwrap();
        assert_eq!(ex.order.perm(), &[1, 2, 0]);
        assert_eq!(ex.length, 3.0);
        let hk = held_karp(&inst, &opts).unwrap();
        assert_eq!(hk.length, ex.length);
        let two = two_opt(&inst, &OrderPlan::new(vec![0, 2, 1]).unwrap(), &opts).unwrap();
        assert_eq!(two.order.perm(), &[1, 2, 0]);
        let bb = mtz_branch_and_bound(&inst, &opts).unwrap();
        assert_eq!(bb.solution.length, 3.0);
    }

    #[test]
    fn two_points_take_the_shorter_order() {
        let inst = points_instance(&[(0.0, 3.0), (0.0, 1.0)], Mode::EscapeOpen);
        let hk = held_karp(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(hk.order.perm(), &[1, 0]);
        assert_eq!(hk.length, 3.0);
    }

    #[test]
    fn exact_searches_agree_on_random_points() {
        let opts = SolveOptions::default();
        for seed in 0..8 {
            for mode in [Mode::EscapeOpen, Mode::EscapeClosed, Mode::Opaque] {
                let inst = points_instance(&random_points(seed, 6), mode);
                let ex = exhaustive(&inst, &opts).unwrap();
                let hk = held_karp(&inst, &opts).unwrap();
                let bb = mtz_branch_and_bound(&inst, &opts).unwrap();
                assert_eq!(ex.length, hk.length, "seed {seed} {mode:?}");
                assert_eq!(ex.length, bb.solution.length, "seed {seed} {mode:?}");
                let two = two_opt(&inst, &OrderPlan::identity(6), &opts).unwrap();
                assert!(two.length >= ex.length);
            }
        }
    }

    #[test]
    fn mst_bound_examples() {
        let pts = [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 0.0)];
        assert_eq!(mst_weight(&pts), 3.0);
        assert_eq!(mst_weight(&pts[..1]), 0.0);
    }

    #[test]
    fn mtz_model_counts_and_invariants() {
        let opts = SolveOptions::default();
        for k in [3, 5] {
            let inst = points_instance(&random_points(k as u64, k), Mode::EscapeOpen);
            let out = mtz_branch_and_bound(&inst, &opts).unwrap();
            assert_eq!(out.model.binary_count(), k * k);
            assert_eq!(out.model.auxiliary_count(), k);
            assert!((out.model.objective() - out.solution.length).abs() < 1e-12);
            out.model.check().unwrap();
        }
    }

    #[test]
    fn mtz_rejects_subtours() {
        let inst = points_instance(&random_points(3, 4), Mode::EscapeOpen);
        let sol = exhaustive(&inst, &SolveOptions::default()).unwrap();
        let mut model = MtzModel::from_solution(&inst, &sol).unwrap();
        // Two 2-cycles: 0 <-> 1 and 2 <-> 3.
        model.b = vec![vec![0, 1, 0, 0], vec![1, 0, 0, 0], vec![0, 0, 0, 1], vec![0, 0, 1, 0]];
        for u in [[0.0, 1.0, 2.0, 3.0], [0.0, 3.0, 1.0, 2.0], [0.0, 2.0, 3.0, 1.0]] {
            model.u = u.to_vec();
            assert!(model.check().is_err());
        }
        model.b[0][0] = 1;
        assert!(model.check().is_err());
    }

    #[test]
    fn alternating_with_optimal_hint_is_unchanged() {
        let inst = catalog_instance("halfplane_unit", 6).unwrap();
        let opts = SolveOptions::default();
        let hint = OrderPlan::identity(6);
        let fixed = solve_fixed_order(&inst, &hint, &opts).unwrap();
        let alt = solve_alternating(&inst, Some(&hint), &opts).unwrap();
        assert_eq!(alt.length, fixed.length);
        assert_eq!(alt.order, hint);
    }

    #[test]
    fn alternating_point_unit_settles_quickly() {
        let inst = catalog_instance("point_unit", 6).unwrap();
        let alt = solve_alternating(&inst, None, &SolveOptions::default()).unwrap();
        assert!(alt.iterations <= 5, "{}", alt.iterations);
    }

    #[test]
    fn size_guards() {
        let inst = points_instance(&random_points(1, 10), Mode::EscapeOpen);
        assert!(matches!(exhaustive(&inst, &SolveOptions::default()), Err(Error::SizeGuard { .. })));
        let big = points_instance(&random_points(1, 13), Mode::EscapeOpen);
        assert!(matches!(
            mtz_branch_and_bound(&big, &SolveOptions::default()),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn set_partition_counts_are_stirling_numbers() {
        assert_eq!(set_partitions(4, 2).len(), 7);
        assert_eq!(set_partitions(5, 3).len(), 25);
        assert_eq!(set_partitions(3, 3).len(), 1);
    }

    #[test]
    fn partition_extremes() {
        let inst = points_instance(&random_points(5, 5), Mode::Opaque);
        let opts = SolveOptions::default();
        let (plan, sols) = partition_search(&inst, 5, &opts).unwrap();
        assert!(plan.degenerate);
        assert!(sols.iter().all(|s| s.length == 0.0));
        let (one, sols) = partition_search(&inst, 1, &opts).unwrap();
        assert!(!one.degenerate);
        assert_eq!(sols[0].length, exhaustive(&inst, &opts).unwrap().length);
        let (two, sols) = partition_search(&inst, 2, &opts).unwrap();
        two.validate(5).unwrap();
        let total: f64 = sols.iter().map(|s| s.length).sum();
        assert!(total <= sols_total_upper(&inst, &opts));
        assert!(partition_search(&inst, 6, &opts).is_err());
    }

    fn sols_total_upper(inst: &Instance, opts: &SolveOptions) -> f64 {
        exhaustive(inst, opts).unwrap().length
    }
}
