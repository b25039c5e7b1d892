//! Primal-dual interior-point solver for the band program in reduced form.
//!
//! Variables are `theta = (v, b, gamma)` and one slack `xi_i` per data
//! point. Every data row touches `theta` and a single slack, so the Newton
//! system is solved by eliminating the diagonal slack block and factoring
//! a dense Schur complement of size `dim(v) + 2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Linear band program `min tau |v|^2 + gamma + rho sum xi` over features `z`.
pub(crate) struct BandQp<'a> {
    pub z: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub owner: &'a [usize],
    pub n_points: usize,
    pub tau: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BandSolution {
    pub v: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

const STEP_FRACTION: f64 = 0.995;
const REFINE_STEPS: usize = 2;
/// Iterations without a better iterate before giving up.
const STALL_ITERS: usize = 15;
/// Largest residual-to-tolerance ratio accepted from a stalled run.
const FALLBACK_FACTOR: f64 = 1e3;

/// Row layout: for approximation row `r` the rows `2r` (sign +) and
/// `2r + 1` (sign -), then `gamma >= 0`, then one `xi_i >= 0` per point.
pub(crate) fn solve_band(p: &BandQp<'_>, tol: f64, max_iter: usize) -> Result<BandSolution> {
    let q = p.z.ncols();
    let nr = p.y.len();
    let n = p.n_points;
    let mt = q + 2;
    let ib = q;
    let ig = q + 1;
    let m = 2 * nr + 1 + n;
    let row_gamma = 2 * nr;
    let row_xi = 2 * nr + 1;

    let scale = 1.0 + p.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut theta = vec![0.0; mt];
    let mut xi = vec![0.0; n];
    let mut s = vec![scale; m];
    let mut zd = vec![1.0; m];

    let mut pred = vec![0.0; nr];
    let h_norm = scale;
    let c_norm = 1.0 + p.rho.max(1.0);

    let mut best: Option<(f64, BandSolution)> = None;
    let mut best_iter = 0;
    let mut rp = vec![0.0; m];
    let mut rd_t = vec![0.0; mt];
    let mut rd_x = vec![0.0; n];

    for iter in 0..max_iter {
        // predictions z_r.v + b
        for r in 0..nr {
            let mut acc = theta[ib];
            for k in 0..q {
                acc += p.z[(r, k)] * theta[k];
            }
            pred[r] = acc;
        }
        // primal residual A x + s - h
        for r in 0..nr {
            let o = p.owner[r];
            let base = -theta[ig] - xi[o];
            // sign +: -(pred) - gamma - xi + y ; h = -y
            rp[2 * r] = -pred[r] + base + s[2 * r] + p.y[r];
            rp[2 * r + 1] = pred[r] + base + s[2 * r + 1] - p.y[r];
        }
        rp[row_gamma] = -theta[ig] + s[row_gamma];
        for i in 0..n {
            rp[row_xi + i] = -xi[i] + s[row_xi + i];
        }
        // dual residual P x + c + A' z
        for (k, v) in rd_t.iter_mut().enumerate() {
            *v = if k < q { 2.0 * p.tau * theta[k] } else { 0.0 };
        }
        rd_t[ig] += 1.0;
        for v in rd_x.iter_mut() {
            *v = p.rho;
        }
        for r in 0..nr {
            let (zp, zm) = (zd[2 * r], zd[2 * r + 1]);
            let diff = zm - zp;
            for k in 0..q {
                rd_t[k] += diff * p.z[(r, k)];
            }
            rd_t[ib] += diff;
            rd_t[ig] -= zp + zm;
            rd_x[p.owner[r]] -= zp + zm;
        }
        rd_t[ig] -= zd[row_gamma];
        for i in 0..n {
            rd_x[i] -= zd[row_xi + i];
        }

        let mu = s.iter().zip(&zd).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        let pres = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dres = rd_t.iter().chain(&rd_x).fold(0.0f64, |a, v| a.max(v.abs()));
        let obj = p.tau * theta[..q].iter().map(|v| v * v).sum::<f64>() + theta[ig] + p.rho * xi.iter().sum::<f64>();
        let gap = mu * m as f64;
        // worst residual relative to its stopping threshold
        let merit = (pres / (tol * h_norm)).max(dres / (tol * c_norm)).max(gap / (tol * (1.0 + obj.abs())));
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((
                merit,
                BandSolution {
                    v: theta[..q].to_vec(),
                    b: theta[ib],
                    gamma: theta[ig],
                    iterations: iter,
                    primal_residual: pres,
                    dual_residual: dres,
                    gap,
                },
            ));
            best_iter = iter;
        }
        if merit <= 1.0 {
            return Ok(best.expect("just stored").1);
        }
        if iter - best_iter > STALL_ITERS {
            break;
        }

        let w: Vec<f64> = s.iter().zip(&zd).map(|(a, b)| b / a).collect();
        let Ok(kkt) = Kkt::factor(p, &w, q, n) else { break };

        // affine direction
        let rc_aff: Vec<f64> = s.iter().zip(&zd).map(|(a, b)| a * b).collect();
        let (ds_a, dz_a, _, _) = kkt.direction(p, &rp, &rd_t, &rd_x, &rc_aff, &s, &w);
        let alpha_a = max_step(&s, &ds_a).min(max_step(&zd, &dz_a));
        let mu_aff = s
            .iter()
            .zip(&ds_a)
            .zip(zd.iter().zip(&dz_a))
            .map(|((si, dsi), (zi, dzi))| (si + alpha_a * dsi) * (zi + alpha_a * dzi))
            .sum::<f64>()
            / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let rc: Vec<f64> = (0..m).map(|k| s[k] * zd[k] + ds_a[k] * dz_a[k] - sigma * mu).collect();
        let (ds, dz, dt, dx) = kkt.direction(p, &rp, &rd_t, &rd_x, &rc, &s, &w);
        let alpha = (STEP_FRACTION * max_step(&s, &ds).min(max_step(&zd, &dz))).min(1.0);
        for k in 0..mt {
            theta[k] += alpha * dt[k];
        }
        for i in 0..n {
            xi[i] += alpha * dx[i];
        }
        for k in 0..m {
            s[k] += alpha * ds[k];
            zd[k] += alpha * dz[k];
        }
        if theta.iter().chain(&xi).chain(&s).chain(&zd).any(|v| !v.is_finite()) {
            break;
        }
    }
    // the Newton systems degrade once the gap is far below the residuals;
    // the best iterate is kept if it is within the fallback factor
    match best {
        Some((merit, sol)) if merit <= FALLBACK_FACTOR => Ok(sol),
        Some((merit, _)) => Err(Error::Solver(format!(
            "interior-point method stalled with residuals {merit:.1e} times the tolerance"
        ))),
        None => Err(Error::Solver("interior-point method produced no finite iterate".into())),
    }
}

/// `(P + A' W A) (dtheta, dxi)` evaluated row by row, without forming the matrix.
fn apply_newton(p: &BandQp<'_>, w: &[f64], dt: &[f64], dxi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let q = p.z.ncols();
    let nr = p.y.len();
    let (ib, ig) = (q, q + 1);
    let row_gamma = 2 * nr;
    let row_xi = 2 * nr + 1;
    let mut ot = vec![0.0; q + 2];
    let mut ox = vec![0.0; p.n_points];
    for k in 0..q {
        ot[k] = 2.0 * p.tau * dt[k];
    }
    for r in 0..nr {
        let mut dp = dt[ib];
        for k in 0..q {
            dp += p.z[(r, k)] * dt[k];
        }
        let o = p.owner[r];
        let base = -dt[ig] - dxi[o];
        let vp = w[2 * r] * (-dp + base);
        let vm = w[2 * r + 1] * (dp + base);
        // A' (vp, vm): row + has coefficients (-z, -1, -1, -1), row - (z, 1, -1, -1)
        let diff = vm - vp;
        for k in 0..q {
            ot[k] += diff * p.z[(r, k)];
        }
        ot[ib] += diff;
        ot[ig] -= vp + vm;
        ox[o] -= vp + vm;
    }
    ot[ig] += w[row_gamma] * dt[ig];
    for (i, v) in ox.iter_mut().enumerate() {
        *v += w[row_xi + i] * dxi[i];
    }
    (ot, ox)
}

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter().zip(dx).fold(f64::INFINITY, |a, (xi, di)| if *di < 0.0 { a.min(-xi / di) } else { a })
}

/// Factored Schur complement of the Newton system for one iteration.
struct Kkt {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// Coupling between theta and each slack.
    hx: DMatrix<f64>,
    dx: Vec<f64>,
}

impl Kkt {
    fn factor(p: &BandQp<'_>, w: &[f64], q: usize, n: usize) -> Result<Self> {
        let nr = p.y.len();
        let mt = q + 2;
        let (ib, ig) = (q, q + 1);
        let row_gamma = 2 * nr;
        let row_xi = 2 * nr + 1;
        // H_tt restricted to (v, b) accumulated as sum of weighted outer
        // products of e_r = (z_r, 1); gamma couplings handled separately
        let mut h = DMatrix::<f64>::zeros(mt, mt);
        let mut hx = DMatrix::<f64>::zeros(mt, n);
        let mut dxv = vec![0.0; n];
        let mut e = vec![0.0; q + 1];
        for r in 0..nr {
            let (wp, wm) = (w[2 * r], w[2 * r + 1]);
            let ws = wp + wm;
            let wd = wp - wm;
            e[..q].copy_from_slice(&p.z.row(r).iter().copied().collect::<Vec<_>>());
            e[q] = 1.0;
            for a in 0..=q {
                let ea = ws * e[a];
                if ea == 0.0 {
                    continue;
                }
                for c in 0..=a {
                    h[(a, c)] += ea * e[c];
                }
            }
            // a_+ = -e - g, a_- = e - g with g the gamma unit vector
            for a in 0..=q {
                h[(ig, a)] += wd * e[a];
            }
            h[(ig, ig)] += ws;
            let o = p.owner[r];
            // column for xi_o: sum W a * (-1)
            for a in 0..=q {
                hx[(a, o)] += wd * e[a];
            }
            hx[(ig, o)] += ws;
            dxv[o] += ws;
        }
        h[(ig, ig)] += w[row_gamma];
        for i in 0..n {
            dxv[i] += w[row_xi + i];
        }
        for k in 0..q {
            h[(k, k)] += 2.0 * p.tau;
        }
        // symmetrize from the lower triangle
        for a in 0..mt {
            for c in 0..a {
                h[(c, a)] = h[(a, c)];
            }
        }
        // Schur complement over the slacks
        for i in 0..n {
            let d = dxv[i];
            for a in 0..mt {
                let ha = hx[(a, i)] / d;
                if ha == 0.0 {
                    continue;
                }
                for c in 0..mt {
                    h[(a, c)] -= ha * hx[(c, i)];
                }
            }
        }
        let _ = ib;
        let diag_max = (0..mt).fold(0.0f64, |a, k| a.max(h[(k, k)].abs())).max(1.0);
        let mut reg = 1e-14 * diag_max;
        for _ in 0..12 {
            let mut hr = h.clone();
            for k in 0..mt {
                hr[(k, k)] += reg;
            }
            if let Some(chol) = hr.cholesky() {
                return Ok(Self { chol, hx, dx: dxv });
            }
            reg *= 100.0;
        }
        Err(Error::Solver("Newton system is not positive definite".into()))
    }

    /// Solves the reduced system for `(dtheta, dxi)` by slack elimination.
    fn solve_reduced(&self, rt: &[f64], rx: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mt = rt.len();
        let n = rx.len();
        let mut red = DVector::from_column_slice(rt);
        for i in 0..n {
            let f = rx[i] / self.dx[i];
            for a in 0..mt {
                red[a] -= self.hx[(a, i)] * f;
            }
        }
        let dt = self.chol.solve(&red);
        let dxi = (0..n)
            .map(|i| {
                let mut v = rx[i];
                for a in 0..mt {
                    v -= self.hx[(a, i)] * dt[a];
                }
                v / self.dx[i]
            })
            .collect();
        (dt.iter().copied().collect(), dxi)
    }

    /// Solves for the step given residuals; returns `(ds, dz, dtheta, dxi)`.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        p: &BandQp<'_>,
        rp: &[f64],
        rd_t: &[f64],
        rd_x: &[f64],
        rc: &[f64],
        s: &[f64],
        w: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let q = p.z.ncols();
        let nr = p.y.len();
        let n = p.n_points;
        let (ib, ig) = (q, q + 1);
        let m = rp.len();
        let row_gamma = 2 * nr;
        let row_xi = 2 * nr + 1;

        let t: Vec<f64> = (0..m).map(|k| w[k] * rp[k] - rc[k] / s[k]).collect();
        // rhs = -rd - A' t
        let mut rt: Vec<f64> = rd_t.iter().map(|v| -v).collect();
        let mut rx: Vec<f64> = rd_x.iter().map(|v| -v).collect();
        for r in 0..nr {
            let (tp, tm) = (t[2 * r], t[2 * r + 1]);
            let diff = tp - tm;
            for k in 0..q {
                rt[k] += diff * p.z[(r, k)];
            }
            rt[ib] += diff;
            rt[ig] += tp + tm;
            rx[p.owner[r]] += tp + tm;
        }
        rt[ig] += t[row_gamma];
        for i in 0..n {
            rx[i] += t[row_xi + i];
        }
        let (mut dt, mut dxi) = self.solve_reduced(&rt, &rx);
        // iterative refinement against the unreduced operator
        for _ in 0..REFINE_STEPS {
            let (mt_v, mx_v) = apply_newton(p, w, &dt, &dxi);
            let et: Vec<f64> = rt.iter().zip(&mt_v).map(|(a, b)| a - b).collect();
            let ex: Vec<f64> = rx.iter().zip(&mx_v).map(|(a, b)| a - b).collect();
            let (ct, cx) = self.solve_reduced(&et, &ex);
            for (a, c) in dt.iter_mut().zip(&ct) {
                *a += c;
            }
            for (a, c) in dxi.iter_mut().zip(&cx) {
                *a += c;
            }
        }
        // A dx for every row, then ds = -rp - A dx, dz = W A dx + t
        let mut adx = vec![0.0; m];
        for r in 0..nr {
            let mut dp = dt[ib];
            for k in 0..q {
                dp += p.z[(r, k)] * dt[k];
            }
            let base = -dt[ig] - dxi[p.owner[r]];
            adx[2 * r] = -dp + base;
            adx[2 * r + 1] = dp + base;
        }
        adx[row_gamma] = -dt[ig];
        for i in 0..n {
            adx[row_xi + i] = -dxi[i];
        }
        let ds: Vec<f64> = (0..m).map(|k| -rp[k] - adx[k]).collect();
        let dz: Vec<f64> = (0..m).map(|k| w[k] * adx[k] + t[k]).collect();
        (ds, dz, dt, dxi)
    }
}
