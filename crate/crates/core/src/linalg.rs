//! Dense helpers: Hermitian eigendecompositions, the matrix exponential of small
//! matrices, and restarted GMRES for the steady-state linear system.

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ascending eigenvalues of a real symmetric matrix.
pub fn sorted_symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenpairs of a real symmetric matrix, ascending.
pub fn symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenpairs of a Hermitian matrix (the input is symmetrized first), ascending.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `f(M)` for Hermitian `M` via its eigendecomposition.
pub fn hermitian_function(m: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let (values, vectors) = hermitian_eigen(m);
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = Complex64::new(f(v), 0.0);
        scaled.column_mut(j).iter_mut().for_each(|x| *x *= fv);
    }
    scaled * vectors.adjoint()
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `max_ij |a_ij - b_ij|`
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = a * Complex64::new(0.5f64.powi(s), 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |k: usize| Complex64::new(B[k], 0.0);
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9)) + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8)) + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);
    let lu = (&v - &u).lu();
    let mut r = lu.solve(&(&v + &u)).expect("Padé denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Outcome of [`gmres`].
#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    /// `‖b - A x‖ / ‖b‖` from the final explicit residual.
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with an optional right diagonal preconditioner.
///
/// `apply(x, y)` must write `A x` into `y`.
pub fn gmres(
    apply: impl Fn(&[Complex64], &mut [Complex64]),
    b: &[Complex64],
    precond: Option<&[Complex64]>,
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut x = vec![ZERO; n];
    let mut ax = vec![ZERO; n];
    let mut iterations = 0;
    let m = restart.max(1);
    let mut w = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let scale = |v: &[Complex64], out: &mut [Complex64]| match precond {
        Some(p) => out.iter_mut().zip(v.iter().zip(p)).for_each(|(o, (a, d))| *o = a * d),
        None => out.copy_from_slice(v),
    };
    loop {
        apply(&x, &mut ax);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / bnorm <= tol || iterations >= max_iter {
            return GmresOutcome { x, relative_residual: beta / bnorm, iterations, converged: beta / bnorm <= tol };
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![ZERO; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            scale(&basis[k], &mut z);
            apply(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(v, &w);
                h[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hik * vi);
            }
            // second pass of Gram-Schmidt for stability
            for (i, v) in basis.iter().enumerate() {
                let corr = dot(v, &w);
                h[i][k] += corr;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= corr * vi);
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if d == 0.0 {
                cs[k] = ONE;
                sn[k] = ZERO;
            } else {
                cs[k] = a / d;
                sn[k] = bb / d;
            }
            h[k][k] = cs[k].conj() * a + sn[k].conj() * bb;
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            iterations += 1;
            k_used = k + 1;
            if g[k + 1].norm() / bnorm <= tol * 0.5 || iterations >= max_iter || wn < 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![ZERO; n];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        scale(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}
