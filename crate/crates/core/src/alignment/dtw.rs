/// Monotonic warping path from `(0, 0)` to `(n - 1, m - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    /// `(source_frame, target_frame)` pairs in increasing order.
    pub steps: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl WarpPath {
    pub fn cost_per_step(&self) -> f64 {
        self.total_cost / self.steps.len() as f64
    }

    /// Mean target index visited for every source index.
    pub fn mean_target_per_source(&self, n_source: usize) -> Vec<f64> {
        let mut sums = vec![0.0; n_source];
        let mut counts = vec![0usize; n_source];
        for &(i, j) in &self.steps {
            sums[i] += j as f64;
            counts[i] += 1;
        }
        sums.iter().zip(counts).map(|(s, c)| s / c as f64).collect()
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Unit-weight symmetric DTW on Euclidean frame distance.
///
/// Backtracking prefers the diagonal step on ties, then the source-only step.
pub fn dtw(source: &[Vec<f64>], target: &[Vec<f64>]) -> WarpPath {
    let n = source.len();
    let m = target.len();
    assert!(n > 0 && m > 0, "dtw needs nonempty sequences");

    let mut acc = vec![f64::INFINITY; n * m];
    let idx = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = euclidean(&source[i], &target[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[idx(i - 1, j - 1)]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 {
                    acc[idx(i - 1, j)]
                } else {
                    f64::INFINITY
                };
                let left = if j > 0 {
                    acc[idx(i, j - 1)]
                } else {
                    f64::INFINITY
                };
                diag.min(up).min(left)
            };
            acc[idx(i, j)] = d + best;
        }
    }

    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    steps.push((i, j));
    while i > 0 || j > 0 {
        if i == 0 {
            j -= 1;
        } else if j == 0 {
            i -= 1;
        } else {
            let diag = acc[idx(i - 1, j - 1)];
            let up = acc[idx(i - 1, j)];
            let left = acc[idx(i, j - 1)];
            if diag <= up && diag <= left {
                i -= 1;
                j -= 1;
            } else if up <= left {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        steps.push((i, j));
    }
    steps.reverse();

    WarpPath {
        steps,
        total_cost: acc[idx(n - 1, m - 1)],
    }
}
