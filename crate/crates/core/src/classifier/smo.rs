//! Sequential minimal optimization for the C-SVC dual
//!
//! ```text
//! min  1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_i <= C,  Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs use second-order selection: `i` maximizes `-y_i G_i` over the
//! up-set, `j` minimizes the predicted objective decrease over the low-set.
//! Scans run in index order with strict comparisons, so ties go to the
//! lowest index and a run is fully deterministic.

use ndarray::{Array1, Array2, ArrayView1};

use super::kernel::QuadraticKernel;

const TAU: f64 = 1e-12;

/// Outcome of one binary SMO run.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySolution {
    /// Dual variables, one per training point, in `[0, C]`.
    pub alpha: Vec<f64>,
    /// Decision offset: `f(x) = sum_i alpha_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub kkt_gap: f64,
    pub converged: bool,
}

/// Kernel rows computed on demand and kept under a memory budget.
struct KernelRows<'a> {
    x: &'a Array2<f64>,
    kernel: QuadraticKernel,
    rows: Vec<Option<Vec<f64>>>,
    last_used: Vec<u64>,
    cached: usize,
    capacity: usize,
    clock: u64,
    diag: Vec<f64>,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Array2<f64>, kernel: QuadraticKernel, budget_bytes: usize) -> Self {
        let n = x.nrows();
        let row_bytes = (n * std::mem::size_of::<f64>()).max(1);
        let capacity = (budget_bytes / row_bytes).clamp(2, n.max(2));
        let diag = x
            .rows()
            .into_iter()
            .map(|r| kernel.from_dot(r.dot(&r)))
            .collect();
        Self {
            x,
            kernel,
            rows: vec![None; n],
            last_used: vec![0; n],
            cached: 0,
            capacity,
            clock: 0,
            diag,
        }
    }

    fn compute(&self, i: usize) -> Vec<f64> {
        let xi = self.x.row(i);
        self.x
            .dot(&xi)
            .iter()
            .map(|&d| self.kernel.from_dot(d))
            .collect()
    }

    /// Makes row `i` resident; returns nothing so two rows can be borrowed afterwards.
    fn ensure(&mut self, i: usize, pinned: Option<usize>) {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        if self.cached >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&t| self.rows[t].is_some() && Some(t) != pinned)
                .min_by_key(|&t| self.last_used[t]);
            if let Some(v) = victim {
                self.rows[v] = None;
                self.cached -= 1;
            }
        }
        self.rows[i] = Some(self.compute(i));
        self.cached += 1;
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("kernel row not resident")
    }
}

pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub cache_bytes: usize,
}

/// Solves the binary problem for `x` (rows are points) and labels `y` in {-1, +1}.
pub fn solve(
    x: &Array2<f64>,
    y: &[f64],
    kernel: QuadraticKernel,
    params: &SmoParams,
) -> BinarySolution {
    let n = x.nrows();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut cache = KernelRows::new(x, kernel, params.cache_bytes);

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut kkt_gap;
    let mut converged = false;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                gmax2 = gmax2.max(y[t] * grad[t]);
            }
        }
        kkt_gap = gmax + gmax2;
        let Some(i) = i_sel else {
            converged = true;
            kkt_gap = kkt_gap.max(0.0);
            break;
        };
        if kkt_gap < params.tol {
            converged = true;
            break;
        }
        if iterations >= params.max_iterations {
            break;
        }

        cache.ensure(i, None);
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        {
            let ki = cache.row(i);
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let grad_diff = gmax + y[t] * grad[t];
                if grad_diff > 0.0 {
                    let mut quad = cache.diag[i] + cache.diag[t] - 2.0 * ki[t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj < best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        cache.ensure(j, Some(i));
        cache.ensure(i, Some(j));
        let ki = cache.row(i);
        let kj = cache.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = ki[j];
        let mut quad = cache.diag[i] + cache.diag[j] - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    BinarySolution {
        bias: -offset(&alpha, &grad, y, c),
        alpha,
        iterations,
        kkt_gap,
        converged,
    }
}

/// The threshold `rho`: mean of `y_i G_i` over free variables, otherwise the
/// midpoint of the feasible interval.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut free_sum = 0.0;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// `sum_i coef_i K(sv_i, x) + bias`.
pub fn decision_value(
    support: &Array2<f64>,
    coef: &[f64],
    bias: f64,
    kernel: &QuadraticKernel,
    x: ArrayView1<'_, f64>,
) -> f64 {
    if coef.is_empty() {
        return bias;
    }
    let dots: Array1<f64> = support.dot(&x);
    dots.iter()
        .zip(coef)
        .map(|(&d, &a)| a * kernel.from_dot(d))
        .sum::<f64>()
        + bias
}
