//! Primal network simplex for uncapacitated min-cost flow with real-valued
//! supplies, on a strongly feasible spanning tree rooted at an artificial
//! node (thread/successor-count tree representation).
//!
//! Arcs `0..node_num` are the artificial arcs connecting each node with the
//! root; real arcs follow and may be appended between runs (warm start).

use crate::{Error, Result};

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

pub(crate) struct NetworkSimplex {
    node_num: usize,
    root: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,

    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    tol: f64,
    next_arc: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    pub(crate) pivots: usize,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    /// `supply[v] > 0` for sources, `< 0` for sinks. `max_cost` bounds every
    /// real arc cost that will ever be added; artificial arcs cost more than
    /// any direct connection.
    pub(crate) fn new(supply: &[f64], max_cost: f64) -> Self {
        let node_num = supply.len();
        let root = node_num;
        let all = node_num + 1;
        let scale = max_cost.abs().max(f64::MIN_POSITIVE);
        let art_cost = 2.0 * scale + 1e-300;
        let mut ns = Self {
            node_num,
            root,
            source: vec![0; node_num],
            target: vec![0; node_num],
            cost: vec![0.0; node_num],
            flow: vec![0.0; node_num],
            state: vec![STATE_TREE; node_num],
            pi: vec![0.0; all],
            parent: vec![NONE; all],
            pred: vec![NONE; all],
            thread: vec![0; all],
            rev_thread: vec![0; all],
            succ_num: vec![1; all],
            last_succ: vec![0; all],
            pred_dir: vec![0; all],
            dirty_revs: Vec::new(),
            tol: 1e-14 * scale,
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            pivots: 0,
        };
        ns.thread[root] = 0;
        ns.rev_thread[0] = root;
        ns.succ_num[root] = all;
        ns.last_succ[root] = if node_num == 0 { root } else { node_num - 1 };
        for u in 0..node_num {
            let e = u;
            ns.parent[u] = root;
            ns.pred[u] = e;
            ns.thread[u] = u + 1;
            ns.rev_thread[u + 1] = u;
            ns.succ_num[u] = 1;
            ns.last_succ[u] = u;
            if supply[u] >= 0.0 {
                ns.pred_dir[u] = DIR_UP;
                ns.pi[u] = 0.0;
                ns.source[e] = u;
                ns.target[e] = root;
                ns.flow[e] = supply[u];
                ns.cost[e] = 0.0;
            } else {
                ns.pred_dir[u] = DIR_DOWN;
                ns.pi[u] = art_cost;
                ns.source[e] = root;
                ns.target[e] = u;
                ns.flow[e] = -supply[u];
                ns.cost[e] = art_cost;
            }
        }
        if node_num > 0 {
            ns.thread[node_num - 1] = root;
            ns.rev_thread[root] = node_num - 1;
        }
        ns
    }

    pub(crate) fn add_arc(&mut self, from: usize, to: usize, cost: f64) {
        self.source.push(from);
        self.target.push(to);
        self.cost.push(cost);
        self.flow.push(0.0);
        self.state.push(STATE_LOWER);
    }

    pub(crate) fn arc_count(&self) -> usize {
        self.source.len() - self.node_num
    }

    /// Real arc `k` (0-based among real arcs): `(from, to, flow)`.
    pub(crate) fn real_arc(&self, k: usize) -> (usize, usize, f64) {
        let e = k + self.node_num;
        (self.source[e], self.target[e], self.flow[e])
    }

    pub(crate) fn potential(&self, v: usize) -> f64 {
        self.pi[v]
    }

    /// Largest flow still routed through the artificial root.
    pub(crate) fn artificial_flow(&self) -> f64 {
        self.flow[..self.node_num].iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    /// Block search pivot rule.
    fn find_entering_arc(&mut self) -> bool {
        let search = self.source.len();
        if search == 0 {
            return false;
        }
        let block = ((search as f64).sqrt() as usize).max(10);
        let mut min = -self.tol;
        let mut cnt = block;
        let mut best = NONE;
        let start = self.next_arc % search;
        for step in 0..search {
            let e = (start + step) % search;
            let c = self.state[e] as f64 * self.reduced_cost(e);
            if c < min {
                min = c;
                best = e;
            }
            cnt -= 1;
            if cnt == 0 {
                if best != NONE {
                    self.in_arc = best;
                    self.next_arc = e + 1;
                    return true;
                }
                cnt = block;
            }
        }
        if best != NONE {
            self.in_arc = best;
            self.next_arc = best + 1;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source[self.in_arc], self.target[self.in_arc])
        } else {
            (self.target[self.in_arc], self.source[self.in_arc])
        };
        self.delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[e];
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[e];
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let delta = self.delta.max(0.0);
        if delta > 0.0 {
            let val = self.state[self.in_arc] as f64 * delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= val * self.pred_dir[u] as f64;
                u = self.parent[u];
            }
            let mut u = self.target[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += val * self.pred_dir[u] as f64;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { DIR_UP } else { DIR_DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue =
                if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes potentials from the tree by a thread traversal, removing
    /// drift accumulated over many incremental updates.
    fn recompute_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            let e = self.pred[u];
            self.pi[u] = if self.pred_dir[u] == DIR_UP { self.pi[p] - self.cost[e] } else { self.pi[p] + self.cost[e] };
            u = self.thread[u];
        }
    }

    /// Pivots to optimality.
    pub(crate) fn run(&mut self, max_pivots: usize) -> Result<()> {
        for _ in 0..3 {
            while self.find_entering_arc() {
                self.find_join_node();
                if !self.find_leaving_arc() {
                    return Err(Error::NetworkSimplex("unbounded cycle".into()));
                }
                self.change_flow();
                self.update_tree_structure();
                self.update_potential();
                self.pivots += 1;
                if self.pivots > max_pivots {
                    return Err(Error::NetworkSimplex(format!("pivot limit {max_pivots} reached")));
                }
            }
            self.recompute_potentials();
            if !self.find_entering_arc() {
                return Ok(());
            }
        }
        Ok(())
    }
}
