/// Optimal one-to-one assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs, sorted by row. Rectangular inputs leave
    /// `|n − m|` rows or columns unpaired.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Minimum-cost assignment on an `n×m` cost matrix, O(max(n,m)³) with
/// potentials. Rectangular inputs are padded with zero-cost dummies.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    if n == 0 || m == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    let size = n.max(m);
    let c = |i: usize, j: usize| if i < n && j < m { cost[i][j] } else { 0.0 };

    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut row_of = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=size)
        .filter_map(|j| {
            let (i, j) = (row_of[j] - 1, j - 1);
            (i < n && j < m).then_some((i, j))
        })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Assignment { pairs, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let a = hungarian(&[vec![3.5]]);
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.total, 3.5);
    }

    #[test]
    fn two_by_two() {
        let a = hungarian(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total, 2.0);
    }

    #[test]
    fn rectangular() {
        let wide = hungarian(&[vec![5.0, 1.0, 9.0]]);
        assert_eq!(wide.pairs, vec![(0, 1)]);
        let tall = hungarian(&[vec![5.0], vec![1.0], vec![9.0]]);
        assert_eq!(tall.pairs, vec![(1, 0)]);
    }
}
