//! Dense linear assignment (Hungarian algorithm with potentials, O(n³)).
//!
//! Shared by the DER speaker mapping and permutation-invariant separation
//! scoring.

/// Minimum-cost perfect matching on a square matrix.
///
/// Returns `assign` with `assign[row] = col`. Entries must be finite.
pub fn solve_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");

    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for col in 1..=n {
        if owner[col] != 0 {
            assign[owner[col] - 1] = col - 1;
        }
    }
    assign
}

/// Maximum-weight matching on a rectangular `rows × cols` matrix.
///
/// Every row is matched to a distinct column when `rows <= cols`; surplus
/// rows get `None`.
pub fn solve_max(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return vec![None; rows];
    }
    let mut cost = vec![vec![0.0; n]; n];
    for (r, row) in weights.iter().enumerate() {
        assert_eq!(row.len(), cols, "ragged weight matrix");
        for (c, &w) in row.iter().enumerate() {
            cost[r][c] = -w;
        }
    }
    let assign = solve_min(&cost);
    assign[..rows]
        .iter()
        .map(|&c| (c < cols).then_some(c))
        .collect()
}

/// Sum of `weights[r][assign[r]]` over matched rows, in row order.
pub fn assignment_value(weights: &[Vec<f64>], assign: &[Option<usize>]) -> f64 {
    assign
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| weights[r][c]))
        .sum()
}
