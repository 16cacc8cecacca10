//! Transportation simplex (northwest-corner start, MODI pricing) for
//! balanced problems with general weights.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct TransportPlan {
    /// Basic cells `(i, j, flow)`.
    pub cells: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub iterations: usize,
}

/// Minimizes `Σ c_ij γ_ij` over couplings of `supply` and `demand`.
/// `cost` is row-major `n × m`.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> TransportPlan {
    let n = supply.len();
    let m = demand.len();
    let scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1e-300);
    let eps = 1e-12 * scale;

    // northwest corner: exactly n + m − 1 basic cells
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut cells: Vec<(usize, usize, f64)> = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let f = a[i].min(b[j]).max(0.0);
        cells.push((i, j, f));
        a[i] -= f;
        b[j] -= f;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (i < n - 1 && a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut iterations = 0;
    let max_iter = 50 * (n + m) * (n + m) + 1000;
    loop {
        // potentials u_i + v_j = c_ij on basic cells
        let (u, v, row_adj, col_adj) = potentials(n, m, &cells, cost);
        let mut enter = None;
        let mut best = -eps;
        for r in 0..n {
            for c in 0..m {
                let red = cost[r * m + c] - u[r] - v[c];
                if red < best {
                    best = red;
                    enter = Some((r, c));
                }
            }
        }
        let Some((er, ec)) = enter else { break };
        iterations += 1;
        if iterations > max_iter {
            break;
        }
        // tree path from column ec back to row er, then close with the entering cell
        let path = tree_path(n, &cells, &row_adj, &col_adj, er, ec);
        // path lists basic cell indices from row er to column ec; signs alternate
        // starting with − at the cell adjacent to er
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &ci) in path.iter().enumerate() {
            if k % 2 == 0 && cells[ci].2 < theta {
                theta = cells[ci].2;
                leave = ci;
            }
        }
        for (k, &ci) in path.iter().enumerate() {
            if k % 2 == 0 {
                cells[ci].2 -= theta;
            } else {
                cells[ci].2 += theta;
            }
        }
        cells[leave] = (er, ec, theta);
    }
    let cost_val = cells.iter().map(|&(r, c, f)| f * cost[r * m + c]).sum();
    TransportPlan {
        cells,
        cost: cost_val,
        iterations,
    }
}

type Adj = Vec<Vec<usize>>;

fn potentials(n: usize, m: usize, cells: &[(usize, usize, f64)], cost: &[f64]) -> (Vec<f64>, Vec<f64>, Adj, Adj) {
    let mut row_adj = vec![Vec::new(); n];
    let mut col_adj = vec![Vec::new(); m];
    for (k, &(r, c, _)) in cells.iter().enumerate() {
        row_adj[r].push(k);
        col_adj[c].push(k);
    }
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; m];
    // the basis is a spanning tree of rows ∪ columns
    u[0] = 0.0;
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, idx)) = queue.pop_front() {
        if is_row {
            for &k in &row_adj[idx] {
                let (_, c, _) = cells[k];
                if v[c].is_nan() {
                    v[c] = cost[idx * m + c] - u[idx];
                    queue.push_back((false, c));
                }
            }
        } else {
            for &k in &col_adj[idx] {
                let (r, _, _) = cells[k];
                if u[r].is_nan() {
                    u[r] = cost[r * m + idx] - v[idx];
                    queue.push_back((true, r));
                }
            }
        }
    }
    (u, v, row_adj, col_adj)
}

/// Basic cells on the tree path from row `er` to column `ec`.
fn tree_path(n: usize, cells: &[(usize, usize, f64)], row_adj: &Adj, col_adj: &Adj, er: usize, ec: usize) -> Vec<usize> {
    // nodes: rows 0..n, columns n..n+m; parent edge recorded as cell index
    let m = col_adj.len();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n + m];
    let mut seen = vec![false; n + m];
    let start = n + ec;
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == er {
            break;
        }
        let edges = if node < n { &row_adj[node] } else { &col_adj[node - n] };
        for &k in edges {
            let (r, c, _) = cells[k];
            let other = if node < n { n + c } else { r };
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, k));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = er;
    while node != start {
        let (prev, k) = parent[node].expect("basis is a spanning tree");
        path.push(k);
        node = prev;
    }
    path
}
