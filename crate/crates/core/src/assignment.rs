//! Dense linear assignment.
//!
//! Shortest-augmenting-path Hungarian method with row/column potentials,
//! `O(n^3)` time and `O(n)` extra space besides the cost matrix.

use crate::error::{LabError, Result};

/// Largest instance accepted by the exhaustive permutation oracle.
pub const BRUTEFORCE_MAX: usize = 8;

/// Row-major square cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(LabError::arg("cost matrix must be n x n"));
        }
        if data.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(LabError::arg("costs must be nonnegative (infinity allowed)"));
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn transpose(&self) -> CostMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        CostMatrix { n, data }
    }
}

/// Optimal assignment: `cols[i]` is the column matched to row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub cols: Vec<usize>,
    /// Sum of matched costs, `+inf` if every perfect matching uses an infinite edge.
    pub total: f64,
}

/// Sum of the selected costs, added in ascending order so the value depends
/// only on the multiset of matched costs.
fn canonical_total(costs: &CostMatrix, cols: &[usize]) -> f64 {
    let mut picked: Vec<f64> = cols.iter().enumerate().map(|(i, &j)| costs.get(i, j)).collect();
    if picked.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    picked.sort_by(f64::total_cmp);
    picked.iter().sum()
}

/// Minimum-cost perfect matching.
///
/// Infinite entries are replaced by a sentinel larger than any finite
/// perfect matching can cost, so the solver prefers every finite matching;
/// a result that still uses a sentinel edge reports `+inf`.
pub fn solve(costs: &CostMatrix) -> Assignment {
    let n = costs.n;
    if n == 0 {
        return Assignment {
            cols: vec![],
            total: 0.0,
        };
    }
    let max_finite = costs
        .data
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, |a, &b| a.max(b));
    let sentinel = max_finite.max(1.0) * 2.0 * (n as f64 + 1.0);
    let c: Vec<f64> = costs
        .data
        .iter()
        .map(|&v| if v.is_finite() { v } else { sentinel })
        .collect();

    // 1-based indexing with a virtual column 0.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0_f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &c[(i0 - 1) * n..i0 * n];
            let ui = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - ui - v[j];
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
    let mut cols = vec![0usize; n];
    for j in 1..=n {
        cols[row_of[j] - 1] = j - 1;
    }
    let total = canonical_total(costs, &cols);
    Assignment { cols, total }
}

/// Minimum over all `n!` permutations (Heap's algorithm).
pub fn solve_bruteforce(costs: &CostMatrix) -> Result<Assignment> {
    let n = costs.n;
    if n > BRUTEFORCE_MAX {
        return Err(LabError::TooLarge {
            what: "brute-force assignment size",
            got: n,
            limit: BRUTEFORCE_MAX,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = Assignment {
        total: canonical_total(costs, &perm),
        cols: perm.clone(),
    };
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            let total = canonical_total(costs, &perm);
            if total < best.total {
                best = Assignment {
                    cols: perm.clone(),
                    total,
                };
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_instance() {
        let m = CostMatrix::new(3, vec![4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]).unwrap();
        let a = solve(&m);
        assert_eq!(a.total, 5.0);
        assert_eq!(a.cols, vec![1, 0, 2]);
        assert_eq!(solve_bruteforce(&m).unwrap().total, 5.0);
    }

    #[test]
    fn infinite_entries() {
        let inf = f64::INFINITY;
        let m = CostMatrix::new(2, vec![inf, 1.0, 1.0, inf]).unwrap();
        assert_eq!(solve(&m).total, 2.0);
        let row_inf = CostMatrix::new(2, vec![inf, inf, 1.0, 2.0]).unwrap();
        assert_eq!(solve(&row_inf).total, inf);
        assert_eq!(solve_bruteforce(&row_inf).unwrap().total, inf);
    }

    #[test]
    fn empty_and_refusal() {
        assert_eq!(solve(&CostMatrix::new(0, vec![]).unwrap()).total, 0.0);
        let big = CostMatrix::new(9, vec![0.0; 81]).unwrap();
        assert!(solve_bruteforce(&big).is_err());
        assert!(CostMatrix::new(2, vec![1.0, -1.0, 0.0, 0.0]).is_err());
    }
}
