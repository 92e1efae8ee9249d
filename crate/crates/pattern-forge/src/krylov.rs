//! Restarted GMRES with right preconditioning.

#[derive(Clone, Debug, PartialEq)]
pub struct GmresInfo {
    pub iterations: usize,
    /// ‖b − A x‖ / ‖b‖ at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves A x = b starting from x = 0. `precond` applies an approximation of A⁻¹.
pub fn gmres<A, P>(mut apply: A, precond: P, b: &[f64], restart: usize, rel_tol: f64, max_iter: usize) -> (Vec<f64>, GmresInfo)
where
    A: FnMut(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return (x, GmresInfo { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let restart = restart.max(1).min(n.max(1));
    let mut total = 0;
    let mut rel;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rel_tol {
            return (x, GmresInfo { iterations: total, relative_residual: rel, converged: true });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..restart {
            if total >= max_iter {
                break;
            }
            total += 1;
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                h[i][j] = hij;
                for (wv, qv) in w.iter_mut().zip(q) {
                    *wv -= hij * qv;
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                k_used = j;
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= rel_tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut dz = vec![0.0; n];
        for (yi, q) in y.iter().zip(&basis) {
            for (d, qv) in dz.iter_mut().zip(q) {
                *d += yi * qv;
            }
        }
        let dx = precond(&dz);
        for (xv, d) in x.iter_mut().zip(&dx) {
            *xv += d;
        }
        if rel <= rel_tol {
            break;
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    rel = norm(&r) / bnorm;
    (x, GmresInfo { iterations: total, relative_residual: rel, converged: rel <= rel_tol * 10.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 30;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 4.0 + i as f64 } else { ((i * 7 + j * 3) % 5) as f64 * 0.05 - 0.1 }).collect())
            .collect();
        let truth: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = matvec(&a, &truth);
        let diag: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        let (x, info) = gmres(|v| matvec(&a, v), |v| v.iter().zip(&diag).map(|(x, d)| x / d).collect(), &b, 10, 1e-12, 200);
        assert!(info.converged);
        for (xi, ti) in x.iter().zip(&truth) {
            assert!((xi - ti).abs() < 1e-10);
        }
    }

    #[test]
    fn restarts_still_converge() {
        let n = 40;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 2.0 } else if j == i + 1 { -0.9 } else { 0.0 }).collect())
            .collect();
        let b = vec![1.0; n];
        let (x, info) = gmres(|v| matvec(&a, v), |v| v.to_vec(), &b, 5, 1e-11, 2000);
        assert!(info.converged, "{info:?}");
        let r = matvec(&a, &x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn zero_rhs() {
        let (x, info) = gmres(|v| v.to_vec(), |v| v.to_vec(), &[0.0; 3], 3, 1e-10, 10);
        assert_eq!(x, vec![0.0; 3]);
        assert!(info.converged);
    }
}
