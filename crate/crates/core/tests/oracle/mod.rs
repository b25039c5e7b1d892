//! Reference implementations used only by tests. They share no code with
//! the library: brute-force enumeration, golden-section search and direct
//! polynomial evaluation.
#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// `min over (b, gamma >= 0) of gamma + rho * sum_i max(0, hi_i - b - gamma, b - lo_i - gamma)`
/// by enumerating every vertex of the arrangement of kink lines
/// `b + gamma = hi_i`, `b - gamma = lo_i`, `b = (lo_i + hi_i) / 2` and `gamma = 0`.
pub fn band_min(lo: &[f64], hi: &[f64], rho: f64) -> f64 {
    let cost = |b: f64, g: f64| -> f64 {
        let s: f64 = lo.iter().zip(hi).map(|(l, h)| (h - b - g).max(b - l - g).max(0.0)).sum();
        g + rho * s
    };
    let mut best = f64::INFINITY;
    for &h in hi {
        for &l in lo {
            let g = 0.5 * (h - l);
            if g >= 0.0 {
                best = best.min(cost(0.5 * (h + l), g));
            }
        }
        best = best.min(cost(h, 0.0));
    }
    for &l in lo {
        best = best.min(cost(l, 0.0));
    }
    for (l, h) in lo.iter().zip(hi) {
        let m = 0.5 * (l + h);
        best = best.min(cost(m, 0.0));
        for g in hi.iter().map(|h| h - m).chain(lo.iter().map(|l| m - l)) {
            if g >= 0.0 {
                best = best.min(cost(m, g));
            }
        }
    }
    best
}

/// Golden-section minimum of a convex function on `[a, b]`.
pub fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if b - a < 1e-11 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    f(0.5 * (a + b)).min(f1).min(f2)
}

/// Optimal value of the linear band program with `d <= 2` inputs.
///
/// `rows` lists `(owner, u, y)` for every approximation point.
pub fn linear_band_optimum(rows: &[(usize, Vec<f64>, f64)], n_points: usize, tau: f64, rho: f64) -> f64 {
    let d = rows[0].1.len();
    assert!((1..=2).contains(&d));
    let inner = |w: &[f64]| -> f64 {
        let mut lo = vec![f64::INFINITY; n_points];
        let mut hi = vec![f64::NEG_INFINITY; n_points];
        for (o, u, y) in rows {
            let r = y - u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            lo[*o] = lo[*o].min(r);
            hi[*o] = hi[*o].max(r);
        }
        tau * w.iter().map(|v| v * v).sum::<f64>() + band_min(&lo, &hi, rho)
    };
    let f0 = inner(&vec![0.0; d]);
    let bound = (f0 / tau).sqrt() + 1e-9;
    if d == 1 {
        golden(&|a| inner(&[a]), -bound, bound)
    } else {
        golden(&|a| golden(&|c| inner(&[a, c]), -bound, bound), -bound, bound)
    }
}

/// `ln C(n, k)` from log-gamma.
pub fn ln_binom(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Coefficients of the unnormalized risk polynomial in powers `t^(i-k)`,
/// `i = k..=4n`, from log-gamma binomials (small `n` only).
pub fn risk_poly_coefs(n: usize, k: usize, beta: f64) -> Vec<f64> {
    let nf = n as f64;
    (k..=4 * n)
        .map(|i| {
            let c = ln_binom(i, k).exp();
            if i < n {
                -beta / (2.0 * nf) * c
            } else if i == n {
                if k < n { c } else { 0.0 }
            } else {
                -beta / (6.0 * nf) * c
            }
        })
        .collect()
}

/// Horner evaluation, with the constant `1` of the `k = n` equation added.
pub fn risk_poly(coefs: &[f64], n: usize, k: usize, t: f64) -> f64 {
    let v = coefs.iter().rev().fold(0.0, |acc, c| acc * t + c);
    if k == n { v + 1.0 } else { v }
}

/// Positive roots of the risk polynomial by a log-spaced scan of
/// `[1e-14, tmax]` and bisection.
pub fn risk_poly_roots(n: usize, k: usize, beta: f64, tmax: f64) -> Vec<f64> {
    let coefs = risk_poly_coefs(n, k, beta);
    let f = |t: f64| risk_poly(&coefs, n, k, t);
    let steps = 20_000;
    let mut roots = Vec::new();
    let lo = 1e-14f64.ln();
    let mut prev_t = lo.exp();
    let mut prev = f(prev_t);
    for j in 1..=steps {
        let t = (lo + (tmax.ln() - lo) * j as f64 / steps as f64).exp();
        let v = f(t);
        if (v > 0.0) != (prev > 0.0) {
            let (mut a, mut b) = (prev_t, t);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (f(m) > 0.0) == (prev > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = v;
        prev_t = t;
    }
    roots
}

/// Points on the boundary of the ball of radius `r` around `c` in
/// `dim <= 3` coordinates, with `res` nodes per parameter, and the mesh
/// (largest distance from the boundary to the nearest node, bounded above).
pub fn ball_boundary_grid(c: &[f64], r: f64, linf: bool, res: usize) -> (Vec<Vec<f64>>, f64) {
    use std::f64::consts::PI;
    let dim = c.len();
    let mut out = Vec::new();
    let lin = |j: usize| -1.0 + 2.0 * j as f64 / (res - 1) as f64;
    match (dim, linf) {
        (2, false) => {
            for j in 0..res {
                let th = 2.0 * PI * j as f64 / res as f64;
                out.push(vec![c[0] + r * th.cos(), c[1] + r * th.sin()]);
            }
            (out, r * PI / res as f64)
        }
        (3, false) => {
            for a in 0..res {
                let th = PI * a as f64 / (res - 1) as f64;
                for b in 0..res {
                    let ph = 2.0 * PI * b as f64 / res as f64;
                    out.push(vec![c[0] + r * th.sin() * ph.cos(), c[1] + r * th.sin() * ph.sin(), c[2] + r * th.cos()]);
                }
            }
            (out, r * 2.0 * PI / res as f64)
        }
        (_, true) => {
            // faces of the cube
            for axis in 0..dim {
                for sign in [-1.0, 1.0] {
                    let others: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
                    let count = res.pow(others.len() as u32);
                    for idx in 0..count {
                        let mut p = c.to_vec();
                        p[axis] += sign * r;
                        let mut rem = idx;
                        for &o in &others {
                            p[o] += r * lin(rem % res);
                            rem /= res;
                        }
                        out.push(p);
                    }
                }
            }
            (out, r * 2.0 / (res - 1) as f64 * (dim as f64).sqrt())
        }
        _ => panic!("unsupported dimension"),
    }
}
