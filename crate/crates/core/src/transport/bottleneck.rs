//! Bottleneck coupling value between uniform measures via threshold search
//! and integer max-flow feasibility.

use std::collections::VecDeque;

struct Dinic {
    graph: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Self {
            graph: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, c: u64) {
        self.graph[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.graph[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &e in &self.graph[v] {
                let w = self.to[e];
                if self.cap[e] > 0 && self.level[w] < 0 {
                    self.level[w] = self.level[v] + 1;
                    q.push_back(w);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, f: u64) -> u64 {
        if v == t {
            return f;
        }
        while self.iter[v] < self.graph[v].len() {
            let e = self.graph[v][self.iter[v]];
            let w = self.to[e];
            if self.cap[e] > 0 && self.level[v] < self.level[w] {
                let d = self.dfs(w, t, f.min(self.cap[e]));
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut flow = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, u64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
    }
}

/// Whether a coupling of `U{a_1..a_n}` and `U{b_1..b_m}` exists using only
/// pairs with `dist[i][j] ≤ r`.
pub fn feasible(dist: &[f64], n: usize, m: usize, r: f64) -> bool {
    // mass 1/n = m units per left atom, 1/m = n units per right atom
    let (s, t) = (n + m, n + m + 1);
    let mut g = Dinic::new(n + m + 2);
    for i in 0..n {
        g.add_edge(s, i, m as u64);
    }
    for j in 0..m {
        g.add_edge(n + j, t, n as u64);
    }
    for i in 0..n {
        // a left atom has at most m units to send
        let mut any = false;
        for j in 0..m {
            if dist[i * m + j] <= r {
                g.add_edge(i, n + j, m as u64);
                any = true;
            }
        }
        if !any {
            return false;
        }
    }
    g.max_flow(s, t) == (n * m) as u64
}

/// Smallest candidate distance admitting a feasible coupling, and the
/// largest candidate shown infeasible.
pub fn search(dist: &[f64], n: usize, m: usize) -> (f64, Option<f64>) {
    let mut cand: Vec<f64> = dist.to_vec();
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let (mut lo, mut hi) = (0usize, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(dist, n, m, cand[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    // feasibility is monotone in r, so the previous candidate is infeasible
    (cand[lo], lo.checked_sub(1).map(|k| cand[k]))
}
