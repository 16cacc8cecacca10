//! O(n³) primal-dual assignment (shortest augmenting paths with potentials).

/// Optimal assignment for a square cost matrix, row-major `n × n`.
#[derive(Clone, Debug)]
pub struct Assignment {
    /// `row_to_col[i]` is the column assigned to row `i`.
    pub row_to_col: Vec<usize>,
    /// Dual potentials with `u[i] + v[j] ≤ c[i][j]`, tight on the matching.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn solve(cost: &[f64], n: usize) -> Assignment {
    debug_assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based internals, index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    Assignment {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

/// True when the tight-edge graph admits an alternating cycle, i.e. a second
/// optimal perfect matching exists.
pub fn has_alternating_cycle(cost: &[f64], n: usize, a: &Assignment, eps: f64) -> bool {
    let mut col_to_row = vec![0; n];
    for (i, &j) in a.row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    // row i -> row i' whenever (i, j) is tight, unmatched, and j is matched to i'
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != a.row_to_col[i] && cost[i * n + j] - a.u[i] - a.v[j] <= eps)
                .map(|j| col_to_row[j])
                .collect()
        })
        .collect();
    // iterative DFS cycle detection
    let mut state = vec![0u8; n];
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        state[s] = 1;
        while let Some(&mut (node, ref mut k)) = stack.last_mut() {
            if *k < adj[node].len() {
                let next = adj[node][*k];
                *k += 1;
                match state[next] {
                    0 => {
                        state[next] = 1;
                        stack.push((next, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    false
}
