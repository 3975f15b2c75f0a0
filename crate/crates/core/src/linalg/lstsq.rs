use crate::linalg::Matrix;
use crate::scalar::Real;

/// Least-squares solution of `A x ≈ b` by Householder QR with column pivoting.
///
/// On rank deficiency returns the (original) column indices that could not be
/// determined, in pivot order.
pub fn least_squares<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, Vec<usize>> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m, "rhs length mismatch");
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<T> = (0..n).map(|j| col_norm2(&r, j, 0)).collect();
    let scale = a.max_abs().max(T::min_positive_value());
    let rank_tol = T::tol(1e-10) * scale * T::lit((m.max(n)) as f64);

    for k in 0..n.min(m) {
        // pivot on the remaining column with the largest residual norm
        let p = (k..n).max_by(|&x, &y| norms[x].partial_cmp(&norms[y]).unwrap()).unwrap();
        if p != k {
            for i in 0..m {
                let t = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = t;
            }
            perm.swap(k, p);
            norms.swap(k, p);
        }
        let alpha = col_norm2(&r, k, k).sqrt();
        if alpha <= rank_tol {
            return Err(perm[k..].to_vec());
        }
        let sign = if r[(k, k)] >= T::zero() { T::one() } else { -T::one() };
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] += sign * alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        let two = T::lit(2.0);
        for j in k..n {
            let dot: T = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let f = two * dot / vnorm2;
            for i in k..m {
                r[(i, j)] -= f * v[i - k];
            }
        }
        let dot: T = (k..m).map(|i| v[i - k] * rhs[i]).sum();
        let f = two * dot / vnorm2;
        for i in k..m {
            rhs[i] -= f * v[i - k];
        }
        for (j, nj) in norms.iter_mut().enumerate().skip(k + 1) {
            *nj = col_norm2(&r, j, k + 1);
        }
    }
    if m < n {
        return Err(perm[m..].to_vec());
    }

    let mut z = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..n {
            s -= r[(k, j)] * z[j];
        }
        z[k] = s / r[(k, k)];
    }
    let mut x = vec![T::zero(); n];
    for (k, &col) in perm.iter().enumerate() {
        x[col] = z[k];
    }
    Ok(x)
}

fn col_norm2<T: Real>(r: &Matrix<T>, j: usize, from: usize) -> T {
    (from..r.rows()).map(|i| r[(i, j)] * r[(i, j)]).sum()
}
