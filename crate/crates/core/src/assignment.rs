//! Square linear assignment: exhaustive search for small sizes, the
//! shortest-augmenting-path Hungarian method otherwise.

/// Sizes at or below this are solved by enumerating every permutation.
pub const ENUMERATION_LIMIT: usize = 6;

/// Minimum-cost perfect matching; `result[row] = column`.
pub fn solve(cost: &[Vec<f64>]) -> Vec<usize> {
    if cost.len() <= ENUMERATION_LIMIT {
        enumerate(cost)
    } else {
        hungarian(cost)
    }
}

pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

/// Exhaustive search in lexicographic permutation order; the first optimum wins.
pub fn enumerate(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = assignment_cost(cost, &perm);
    while next_permutation(&mut perm) {
        let c = assignment_cost(cost, &perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    best
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// O(n³) Hungarian algorithm with row/column potentials.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));
    // 1-based with index 0 as the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
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
    let mut result = vec![0; n];
    for col in 1..=n {
        result[owner[col] - 1] = col - 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trivial_sizes() {
        assert!(solve(&[]).is_empty());
        assert_eq!(solve(&[vec![3.0]]), vec![0]);
        assert_eq!(hungarian(&[vec![3.0]]), vec![0]);
    }

    #[test]
    fn known_matrix() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = hungarian(&cost);
        assert_eq!(assignment_cost(&cost, &a), 5.0);
        assert_eq!(assignment_cost(&cost, &enumerate(&cost)), 5.0);
    }

    proptest! {
        #[test]
        fn hungarian_matches_enumeration(
            n in 1usize..=6,
            seed in proptest::collection::vec(0.0f64..10.0, 36),
        ) {
            let cost: Vec<Vec<f64>> = (0..n).map(|r| seed[r * 6..r * 6 + n].to_vec()).collect();
            let h = assignment_cost(&cost, &hungarian(&cost));
            let e = assignment_cost(&cost, &enumerate(&cost));
            prop_assert!((h - e).abs() < 1e-9, "{h} vs {e}");
        }
    }
}
