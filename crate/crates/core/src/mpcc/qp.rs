//! Dense primal-dual interior-point solver for the elastic QP subproblem
//!
//! ```text
//! min  1/2 d'Hd + g'd + rho * sum(s)
//! s.t. A d - s <= b,   s >= 0,   lo <= d <= hi
//! ```
//!
//! The elastic slacks `s` make every subproblem feasible; they are
//! eliminated analytically so each Newton step needs one `n x n` Cholesky
//! factorization.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Row-major constraint matrix where row `i` is zero beyond its first
/// `lead[i]` columns (single-shooting Jacobians are block lower-triangular).
pub struct LeadingRows<'a> {
    pub data: &'a [f64],
    pub lead: &'a [usize],
    pub cols: usize,
}

impl LeadingRows<'_> {
    fn rows(&self) -> usize {
        self.lead.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..i * self.cols + self.lead[i]]
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn mul_t_add(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
    }
}

pub struct ElasticQp<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a [f64],
    pub constraints: LeadingRows<'a>,
    pub rhs: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub step: Vec<f64>,
    pub elastic: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_ITERATIONS: usize = 80;
const STEP_FRACTION: f64 = 0.99;

struct Iterate {
    d: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    lam: Vec<f64>,
    mu: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

struct Direction {
    d: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    lam: Vec<f64>,
    mu: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(1.0, f64::min)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl ElasticQp<'_> {
    pub fn solve(&self) -> QpSolution {
        let n = self.gradient.len();
        let m = self.constraints.rows();
        let rho = self.penalty;
        let a = &self.constraints;

        let mut it = {
            let d: Vec<f64> = (0..n)
                .map(|j| {
                    let w = (self.upper[j] - self.lower[j]).max(0.0);
                    0.0f64.clamp(self.lower[j] + 0.01 * w, self.upper[j] - 0.01 * w)
                })
                .collect();
            let mut ad = vec![0.0; m];
            a.mul(&d, &mut ad);
            let s: Vec<f64> = (0..m).map(|i| (ad[i] - self.rhs[i]).max(0.0) + 1.0).collect();
            let t: Vec<f64> = (0..m).map(|i| s[i] - (ad[i] - self.rhs[i])).collect();
            let p: Vec<f64> = (0..n).map(|j| (d[j] - self.lower[j]).max(1e-6)).collect();
            let q: Vec<f64> = (0..n).map(|j| (self.upper[j] - d[j]).max(1e-6)).collect();
            Iterate {
                d,
                s,
                t,
                p,
                q,
                lam: vec![0.5 * rho; m],
                mu: vec![0.5 * rho; m],
                alpha: vec![1.0; n],
                beta: vec![1.0; n],
            }
        };

        let pairs = (2 * m + 2 * n) as f64;
        let g_scale = 1.0 + inf_norm(self.gradient);
        let mut converged = false;
        let mut iterations = 0;

        let mut r_d = vec![0.0; n];
        let mut r_s = vec![0.0; m];
        let mut r_t = vec![0.0; m];
        let mut r_p = vec![0.0; n];
        let mut r_q = vec![0.0; n];
        let mut ad = vec![0.0; m];

        for k in 0..MAX_ITERATIONS {
            iterations = k;
            // residuals
            let hd = self.hessian * DVector::from_column_slice(&it.d);
            for j in 0..n {
                r_d[j] = hd[j] + self.gradient[j] - it.alpha[j] + it.beta[j];
            }
            a.mul_t_add(&it.lam, &mut r_d);
            a.mul(&it.d, &mut ad);
            for i in 0..m {
                r_s[i] = rho - it.lam[i] - it.mu[i];
                r_t[i] = ad[i] - it.s[i] + it.t[i] - self.rhs[i];
            }
            for j in 0..n {
                r_p[j] = it.d[j] - it.p[j] - self.lower[j];
                r_q[j] = it.d[j] + it.q[j] - self.upper[j];
            }
            let gap = (dot(&it.t, &it.lam) + dot(&it.s, &it.mu) + dot(&it.p, &it.alpha) + dot(&it.q, &it.beta)) / pairs;
            let primal = inf_norm(&r_t).max(inf_norm(&r_p)).max(inf_norm(&r_q));
            let dual = inf_norm(&r_d).max(inf_norm(&r_s));
            if primal < 1e-10 && dual < 1e-9 * g_scale && gap < 1e-11 * g_scale {
                converged = true;
                break;
            }

            // reduced system
            let w1: Vec<f64> = (0..m).map(|i| it.lam[i] / it.t[i]).collect();
            let w2: Vec<f64> = (0..m).map(|i| it.mu[i] / it.s[i]).collect();
            let dw: Vec<f64> = (0..m).map(|i| w1[i] * w2[i] / (w1[i] + w2[i])).collect();
            let mut kmat = self.hessian.clone();
            for j in 0..n {
                kmat[(j, j)] += it.alpha[j] / it.p[j] + it.beta[j] / it.q[j];
            }
            for i in 0..m {
                let row = a.row(i);
                let wi = dw[i];
                for (p, &ap) in row.iter().enumerate() {
                    if ap == 0.0 {
                        continue;
                    }
                    let f = wi * ap;
                    for (q, &aq) in row.iter().enumerate().take(p + 1) {
                        kmat[(p, q)] += f * aq;
                    }
                }
            }
            for p in 0..n {
                for q in 0..p {
                    kmat[(q, p)] = kmat[(p, q)];
                }
            }
            let chol = match factor(kmat) {
                Some(c) => c,
                None => break,
            };

            let solve_dir = |c_t: &[f64], c_s: &[f64], c_p: &[f64], c_q: &[f64]| -> Direction {
                let f: Vec<f64> = (0..m).map(|i| (-c_t[i] + it.lam[i] * r_t[i]) / it.t[i]).collect();
                let e: Vec<f64> = (0..m).map(|i| f[i] - c_s[i] / it.s[i] - r_s[i]).collect();
                let h0: Vec<f64> = (0..m).map(|i| f[i] - w1[i] * e[i] / (w1[i] + w2[i])).collect();
                let mut rhs: Vec<f64> = (0..n)
                    .map(|j| {
                        -r_d[j] + (-c_p[j] - it.alpha[j] * r_p[j]) / it.p[j] - (-c_q[j] + it.beta[j] * r_q[j]) / it.q[j]
                    })
                    .collect();
                let neg_h0: Vec<f64> = h0.iter().map(|v| -v).collect();
                a.mul_t_add(&neg_h0, &mut rhs);
                let dd = chol.solve(&DVector::from_vec(rhs));
                let dd: Vec<f64> = dd.iter().copied().collect();
                let mut add = vec![0.0; m];
                a.mul(&dd, &mut add);
                let ds: Vec<f64> = (0..m).map(|i| (e[i] + w1[i] * add[i]) / (w1[i] + w2[i])).collect();
                let dlam: Vec<f64> = (0..m).map(|i| h0[i] + dw[i] * add[i]).collect();
                let dt: Vec<f64> = (0..m).map(|i| -r_t[i] - add[i] + ds[i]).collect();
                let dmu: Vec<f64> = (0..m).map(|i| (-c_s[i] - it.mu[i] * ds[i]) / it.s[i]).collect();
                let dp: Vec<f64> = (0..n).map(|j| dd[j] + r_p[j]).collect();
                let dalpha: Vec<f64> = (0..n).map(|j| (-c_p[j] - it.alpha[j] * dp[j]) / it.p[j]).collect();
                let dq: Vec<f64> = (0..n).map(|j| -r_q[j] - dd[j]).collect();
                let dbeta: Vec<f64> = (0..n).map(|j| (-c_q[j] - it.beta[j] * dq[j]) / it.q[j]).collect();
                Direction {
                    d: dd,
                    s: ds,
                    t: dt,
                    p: dp,
                    q: dq,
                    lam: dlam,
                    mu: dmu,
                    alpha: dalpha,
                    beta: dbeta,
                }
            };

            let step_len = |dir: &Direction| -> f64 {
                max_step(&it.s, &dir.s)
                    .min(max_step(&it.t, &dir.t))
                    .min(max_step(&it.p, &dir.p))
                    .min(max_step(&it.q, &dir.q))
                    .min(max_step(&it.lam, &dir.lam))
                    .min(max_step(&it.mu, &dir.mu))
                    .min(max_step(&it.alpha, &dir.alpha))
                    .min(max_step(&it.beta, &dir.beta))
            };

            // predictor
            let c_t: Vec<f64> = (0..m).map(|i| it.t[i] * it.lam[i]).collect();
            let c_s: Vec<f64> = (0..m).map(|i| it.s[i] * it.mu[i]).collect();
            let c_p: Vec<f64> = (0..n).map(|j| it.p[j] * it.alpha[j]).collect();
            let c_q: Vec<f64> = (0..n).map(|j| it.q[j] * it.beta[j]).collect();
            let aff = solve_dir(&c_t, &c_s, &c_p, &c_q);
            let step_aff = step_len(&aff);
            let gap_aff = {
                let pair = |x: &[f64], dx: &[f64], y: &[f64], dy: &[f64]| -> f64 {
                    x.iter()
                        .zip(dx)
                        .zip(y.iter().zip(dy))
                        .map(|((x, dx), (y, dy))| (x + step_aff * dx) * (y + step_aff * dy))
                        .sum::<f64>()
                };
                (pair(&it.t, &aff.t, &it.lam, &aff.lam)
                    + pair(&it.s, &aff.s, &it.mu, &aff.mu)
                    + pair(&it.p, &aff.p, &it.alpha, &aff.alpha)
                    + pair(&it.q, &aff.q, &it.beta, &aff.beta))
                    / pairs
            };
            let sigma = {
                let r = (gap_aff / gap).clamp(0.0, 1.0);
                r * r * r
            };
            let target = sigma * gap;

            // corrector
            let c_t: Vec<f64> = (0..m).map(|i| c_t[i] + aff.t[i] * aff.lam[i] - target).collect();
            let c_s: Vec<f64> = (0..m).map(|i| c_s[i] + aff.s[i] * aff.mu[i] - target).collect();
            let c_p: Vec<f64> = (0..n).map(|j| c_p[j] + aff.p[j] * aff.alpha[j] - target).collect();
            let c_q: Vec<f64> = (0..n).map(|j| c_q[j] + aff.q[j] * aff.beta[j] - target).collect();
            let dir = solve_dir(&c_t, &c_s, &c_p, &c_q);
            let step = (STEP_FRACTION * step_len(&dir)).min(1.0);

            axpy(&mut it.d, step, &dir.d);
            axpy(&mut it.s, step, &dir.s);
            axpy(&mut it.t, step, &dir.t);
            axpy(&mut it.p, step, &dir.p);
            axpy(&mut it.q, step, &dir.q);
            axpy(&mut it.lam, step, &dir.lam);
            axpy(&mut it.mu, step, &dir.mu);
            axpy(&mut it.alpha, step, &dir.alpha);
            axpy(&mut it.beta, step, &dir.beta);
        }

        // the interior iterate may sit a hair outside the box
        for j in 0..n {
            it.d[j] = it.d[j].clamp(self.lower[j], self.upper[j]);
        }
        QpSolution {
            step: it.d,
            elastic: it.s,
            multipliers: it.lam,
            iterations,
            converged,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn factor(k: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut reg = 0.0;
    let base = k.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for _ in 0..8 {
        let mut kk = k.clone();
        if reg > 0.0 {
            for j in 0..kk.nrows() {
                kk[(j, j)] += reg;
            }
        }
        if let Some(c) = kk.cholesky() {
            return Some(c);
        }
        reg = if reg == 0.0 { 1e-12 * base } else { reg * 100.0 };
    }
    None
}
