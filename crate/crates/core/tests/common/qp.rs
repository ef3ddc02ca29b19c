//! Support-vector duals solved by accelerated projected gradient, with an exact
//! projection onto `{0 ≤ x ≤ u, aᵀx = 0}`.

pub fn rbf(sigma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-sigma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

pub fn gram(sigma: f64, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().map(|a| x.iter().map(|b| rbf(sigma, a, b)).collect()).collect()
}

fn project(z: &[f64], a: &[f64], u: &[f64]) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { z.iter().zip(a).zip(u).map(|((&zi, &ai), &ui)| (zi - lam * ai).clamp(0.0, ui)).collect() };
    let g = |x: &[f64]| x.iter().zip(a).map(|(xi, ai)| xi * ai).sum::<f64>();
    let bound = z.iter().map(|v| v.abs()).fold(0.0, f64::max) + u.iter().fold(0.0, |m: f64, &v| m.max(v)) + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// `min ½xᵀQx + pᵀx  s.t. aᵀx = 0, 0 ≤ x ≤ u`; returns the minimizer.
pub fn box_qp(q: &[Vec<f64>], p: &[f64], a: &[f64], u: &[f64]) -> Vec<f64> {
    let n = p.len();
    let lip = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let obj = |x: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            s += p[i] * x[i] + 0.5 * x[i] * q[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    };
    let grad = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| p[i] + q[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect() };
    let mut x = vec![0.0; n];
    let mut yv = x.clone();
    let mut t = 1.0f64;
    let mut fx = obj(&x);
    for it in 0..400_000 {
        let g = grad(&yv);
        let z: Vec<f64> = yv.iter().zip(&g).map(|(y, g)| y - g / lip).collect();
        let xn = project(&z, a, u);
        let fn_ = obj(&xn);
        if fn_ > fx {
            if t == 1.0 {
                // a plain projected step no longer decreases the objective
                break;
            }
            // adaptive restart
            t = 1.0;
            yv = x.clone();
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        yv = xn.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / tn * (a - b)).collect();
        x = xn;
        fx = fn_;
        t = tn;
        if it % 50 == 0 {
            // fixed-point residual of the plain projected-gradient map
            let g = grad(&x);
            let z: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x - g / lip).collect();
            let r = project(&z, a, u).iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if r < 1e-12 * u.iter().fold(1.0f64, |m, &v| m.max(v)) {
                break;
            }
        }
    }
    x
}

pub fn quad(q: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += x[i] * q[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    s
}

/// ε-SVR dual: coefficients `α - α'`, bias and the maximized objective.
pub fn svr_oracle(k: &[Vec<f64>], y: &[f64], eps: f64, m_pen: f64) -> (Vec<f64>, f64, f64) {
    let m = y.len();
    let mut q = vec![vec![0.0; 2 * m]; 2 * m];
    let s = |i: usize| if i < m { 1.0 } else { -1.0 };
    for i in 0..2 * m {
        for j in 0..2 * m {
            q[i][j] = s(i) * s(j) * k[i % m][j % m];
        }
    }
    let p: Vec<f64> = (0..2 * m).map(|i| if i < m { eps - y[i] } else { eps + y[i - m] }).collect();
    let a: Vec<f64> = (0..2 * m).map(s).collect();
    let x = box_qp(&q, &p, &a, &vec![m_pen; 2 * m]);
    let coef: Vec<f64> = (0..m).map(|i| x[i] - x[m + i]).collect();
    let dual = coef.iter().zip(y).map(|(c, y)| y * c - eps * c.abs()).sum::<f64>() - 0.5 * quad(k, &coef);
    // bias from free coefficients, midpoint of the KKT interval otherwise
    let w: Vec<f64> = (0..m).map(|i| k[i].iter().zip(&coef).map(|(a, b)| a * b).sum()).collect();
    let tol = 1e-7 * m_pen;
    let (mut sum, mut cnt, mut lo, mut hi) = (0.0, 0, f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..m {
        let (al, as_) = (x[i], x[m + i]);
        if al > tol && al < m_pen - tol {
            sum += y[i] - eps - w[i];
            cnt += 1;
        } else if as_ > tol && as_ < m_pen - tol {
            sum += y[i] + eps - w[i];
            cnt += 1;
        } else {
            // b ∈ [y - ε - w, y + ε - w] for zero coefficients; bound coefficients push b past the tube
            let up = y[i] + eps - w[i];
            let down = y[i] - eps - w[i];
            if al >= m_pen - tol {
                hi = hi.min(down);
            } else if as_ >= m_pen - tol {
                lo = lo.max(up);
            } else {
                lo = lo.max(down);
                hi = hi.min(up);
            }
        }
    }
    let b = if cnt > 0 { sum / cnt as f64 } else { 0.5 * (lo + hi) };
    (coef, b, dual)
}

/// C-SVM dual: `β`, bias and the maximized objective.
pub fn svm_oracle(k: &[Vec<f64>], v: &[f64], c: f64) -> (Vec<f64>, f64, f64) {
    let n = v.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| v[i] * v[j] * k[i][j]).collect()).collect();
    let beta = box_qp(&q, &vec![-1.0; n], v, &vec![c; n]);
    let dual = beta.iter().sum::<f64>() - 0.5 * quad(&q, &beta);
    let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| v[j] * beta[j] * k[i][j]).sum()).collect();
    let tol = 1e-7 * c;
    let (mut sum, mut cnt, mut lo, mut hi) = (0.0, 0, f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let target = v[i] - w[i];
        if beta[i] > tol && beta[i] < c - tol {
            sum += target;
            cnt += 1;
        } else if (beta[i] <= tol) == (v[i] > 0.0) {
            // v·f ≥ 1 on the zero side (or ≤ 1 at the bound) bounds b from one side
            lo = lo.max(target);
        } else {
            hi = hi.min(target);
        }
    }
    let b = if cnt > 0 { sum / cnt as f64 } else { 0.5 * (lo + hi) };
    (beta, b, dual)
}
