use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            restart: 40,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<C>,
    /// Relative residual estimate after every inner iteration.
    pub history: Vec<f64>,
    /// True relative residual of the returned `x`.
    pub residual: f64,
    pub converged: bool,
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES with right preconditioning, starting from zero.
///
/// Every operation is homogeneous in `b`, so scaling `b` by a power of two
/// scales the returned `x` by exactly that factor.
pub fn gmres(
    apply: impl Fn(&[C]) -> Vec<C>,
    precond: impl Fn(&[C]) -> Vec<C>,
    b: &[C],
    opts: GmresOptions,
) -> GmresOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![C::new(0.0, 0.0); n];
    let mut history = Vec::new();
    if b_norm == 0.0 {
        return GmresOutcome {
            x,
            history,
            residual: 0.0,
            converged: true,
        };
    }
    let m = opts.restart.max(1);
    let mut total = 0usize;
    let mut prev_beta = f64::INFINITY;
    loop {
        let ax = apply(&x);
        let r: Vec<C> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let residual = beta / b_norm;
        // a restart cycle that fails to halve the true residual has hit the
        // rounding floor
        let stalled = beta > 0.5 * prev_beta;
        if residual <= opts.rel_tol || total >= opts.max_iter || stalled {
            return GmresOutcome {
                x,
                history,
                residual,
                converged: residual <= opts.rel_tol,
            };
        }
        prev_beta = beta;
        let mut basis: Vec<Vec<C>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut precond_basis: Vec<Vec<C>> = Vec::new();
        let mut h: Vec<Vec<C>> = Vec::new();
        let mut cs: Vec<C> = Vec::new();
        let mut sn: Vec<C> = Vec::new();
        let mut g = vec![C::new(beta, 0.0)];
        let mut k = 0;
        while k < m && total < opts.max_iter {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            precond_basis.push(z);
            let mut col = vec![C::new(0.0, 0.0); k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[i] = hij;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
            }
            let wn = norm(&w);
            col[k + 1] = C::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * col[i] + sn[i].conj() * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (C::new(1.0, 0.0), C::new(0.0, 0.0))
            } else {
                (a / denom, bb / denom)
            };
            col[k] = c.conj() * a + s.conj() * bb;
            col[k + 1] = C::new(0.0, 0.0);
            let gk = g[k];
            g[k] = c.conj() * gk;
            g.push(-s * gk);
            cs.push(c);
            sn.push(s);
            h.push(col);
            total += 1;
            k += 1;
            let rel = g[k].norm() / b_norm;
            history.push(rel);
            if rel <= opts.rel_tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the k×k triangle
        let mut y = vec![C::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                s -= h[j][i] * yj;
            }
            y[i] = s / h[i][i];
        }
        for (yi, z) in y.iter().zip(&precond_basis) {
            x.iter_mut().zip(z).for_each(|(xi, zi)| *xi += yi * zi);
        }
    }
}
