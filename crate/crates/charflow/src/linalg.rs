//! Small dense linear-algebra helpers shared by the symplectic machinery.
//!
//! Phase space is R^{2n} with the standard symplectic matrix
//! J = [[0, -I_n], [I_n, 0]], so for v = (u, w) we have Jv = (-w, u).

use nalgebra::{DMatrix, DVector};

/// Applies the standard symplectic matrix J to a vector.
pub fn j_mul_vec(v: &DVector<f64>) -> DVector<f64> {
    let two_n = v.len();
    debug_assert!(two_n % 2 == 0);
    let n = two_n / 2;
    let mut out = DVector::zeros(two_n);
    for k in 0..n {
        out[k] = -v[n + k];
        out[n + k] = v[k];
    }
    out
}

/// J * M without materializing J.
pub fn j_mul_mat(m: &DMatrix<f64>) -> DMatrix<f64> {
    let two_n = m.nrows();
    let n = two_n / 2;
    let mut out = DMatrix::zeros(two_n, m.ncols());
    for c in 0..m.ncols() {
        for k in 0..n {
            out[(k, c)] = -m[(n + k, c)];
            out[(n + k, c)] = m[(k, c)];
        }
    }
    out
}

/// The standard symplectic matrix J as a dense matrix.
pub fn standard_j(two_n: usize) -> DMatrix<f64> {
    j_mul_mat(&DMatrix::identity(two_n, two_n))
}

/// Standard symplectic form omega(a, b) = <Ja, b>.
pub fn omega(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    j_mul_vec(a).dot(b)
}

/// Rotation exp(theta * J) = cos(theta) I + sin(theta) J.
/// Under R^{2n} ~ C^n this is scalar multiplication by e^{i theta}.
pub fn phase_rotation(two_n: usize, theta: f64) -> DMatrix<f64> {
    let mut out = DMatrix::identity(two_n, two_n) * theta.cos();
    let n = two_n / 2;
    let s = theta.sin();
    for k in 0..n {
        out[(k, n + k)] = -s;
        out[(n + k, k)] = s;
    }
    out
}

/// Max-abs entry of M^T J M - J; zero for exactly symplectic M.
pub fn symplecticity_defect(m: &DMatrix<f64>) -> f64 {
    let j = standard_j(m.nrows());
    let res = m.transpose() * &j * m - &j;
    res.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
/// Intended for the small (<= 6x6) matrices used throughout.
pub fn mat_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) * a.nrows() as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as usize
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(a.nrows(), a.ncols());
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// Principal logarithm of a matrix close to the identity (Mercator series
/// with one inverse-scaling square-root step when needed).
pub fn mat_log_near_identity(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let id = DMatrix::identity(m.nrows(), m.ncols());
    let e = m - &id;
    let norm = e.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) * m.nrows() as f64;
    if norm > 0.8 {
        // sqrt step: log(M) = 2 log(M^{1/2}) via Denman-Beavers iteration
        let sqrt = mat_sqrt_db(m, 60)?;
        return mat_log_near_identity(&sqrt).map(|l| l * 2.0);
    }
    let mut term = e.clone();
    let mut sum = term.clone();
    for k in 2..=40 {
        term = &term * &e;
        let signed = &term * (if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64);
        sum += signed;
    }
    Some(sum)
}

fn mat_sqrt_db(m: &DMatrix<f64>, iters: usize) -> Option<DMatrix<f64>> {
    let mut y = m.clone();
    let mut z = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..iters {
        let y_inv = y.clone().try_inverse()?;
        let z_inv = z.clone().try_inverse()?;
        let y_next = (&y + &z_inv) * 0.5;
        let z_next = (&z + &y_inv) * 0.5;
        let delta = (&y_next - &y).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            break;
        }
    }
    Some(y)
}

/// Orthonormal basis of the (numerical) kernel of M, at the given singular
/// value tolerance. Wide matrices are padded with zero rows so the full
/// right-singular basis is available.
pub fn kernel_basis(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let square = if m.nrows() < m.ncols() {
        let mut padded = DMatrix::zeros(m.ncols(), m.ncols());
        padded.rows_mut(0, m.nrows()).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("SVD requested V^T");
    let mut out = Vec::new();
    for i in 0..v_t.nrows() {
        let sigma = svd.singular_values.get(i).copied().unwrap_or(0.0);
        if sigma < tol {
            out.push(v_t.row(i).transpose());
        }
    }
    out
}

/// Numerical rank at the given singular value tolerance.
pub fn rank_at(m: &DMatrix<f64>, tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().filter(|s| **s >= tol).count()
}

/// Smallest singular value of M.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    svd.singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
