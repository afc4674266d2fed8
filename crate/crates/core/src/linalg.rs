//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Leading `m` singular triplets of `x`, with each right singular vector's
/// largest-magnitude entry made positive so results do not depend on the
/// sign conventions of the decomposition.
pub struct TruncatedSvd {
    /// `n × m`
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `p × m`
    pub v: DMatrix<f64>,
}

/// `(u, s, vᵀ)` with `min(n, p)` singular triplets, unsorted. A rectangular
/// input is first reduced to its square triangular QR factor, which is much
/// cheaper than a direct SVD when one side is long.
fn thin_svd(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (n, p) = x.shape();
    if p > n {
        // x = Rᵀ Qᵀ
        let (q, r) = x.transpose().qr().unpack();
        let svd = r.transpose().svd(true, true);
        let w_t = svd.v_t.expect("v_t requested");
        let v_t = w_t * q.transpose();
        (svd.u.expect("u requested"), svd.singular_values, v_t)
    } else if n > p {
        // x = Q R
        let (q, r) = x.clone().qr().unpack();
        let svd = r.svd(true, true);
        let u = q * svd.u.expect("u requested");
        (u, svd.singular_values, svd.v_t.expect("v_t requested"))
    } else {
        let svd = x.clone().svd(true, true);
        (
            svd.u.expect("u requested"),
            svd.singular_values,
            svd.v_t.expect("v_t requested"),
        )
    }
}

pub fn truncated_svd(x: &DMatrix<f64>, m: usize) -> TruncatedSvd {
    let (n, p) = x.shape();
    let k = n.min(p);
    assert!(
        m <= k,
        "requested {m} components from a rank-{k} decomposition"
    );

    let (u_full, singular_values, vt_full) = thin_svd(x);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        singular_values[b]
            .total_cmp(&singular_values[a])
            .then(a.cmp(&b))
    });

    let mut u = DMatrix::zeros(n, m);
    let mut v = DMatrix::zeros(p, m);
    let mut s = DVector::zeros(m);
    for (c, &idx) in order.iter().take(m).enumerate() {
        let mut vc: Vec<f64> = vt_full.row(idx).iter().copied().collect();
        let mut uc: Vec<f64> = u_full.column(idx).iter().copied().collect();
        let pivot = vc
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if vc[pivot] < 0.0 {
            vc.iter_mut().for_each(|x| *x = -*x);
            uc.iter_mut().for_each(|x| *x = -*x);
        }
        v.set_column(c, &DVector::from_vec(vc));
        u.set_column(c, &DVector::from_vec(uc));
        s[c] = singular_values[idx];
    }
    TruncatedSvd {
        u,
        singular_values: s,
        v,
    }
}

/// `(a aᵀ)^(-1/2) a` for a square matrix, via a symmetric eigendecomposition.
pub fn symmetric_decorrelation(a: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = a * a.transpose();
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = gram.symmetric_eigen();
    let floor = eig.eigenvalues.max().abs().max(f64::MIN_POSITIVE) * 1e-15;
    let inv_sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.max(floor).sqrt()),
    );
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose() * a
}

/// Column means of `x`.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `row` from every row of `x`.
pub fn sub_row(x: &DMatrix<f64>, row: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let r = row[j];
        col.iter_mut().for_each(|v| *v -= r);
    }
    out
}

/// Adds `row` to every row of `x` in place.
pub fn add_row_mut(x: &mut DMatrix<f64>, row: &DVector<f64>) {
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let r = row[j];
        col.iter_mut().for_each(|v| *v += r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_and_orders() {
        let x = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, -5.0, 0.0, 0.0]);
        let t = truncated_svd(&x, 2);
        assert!((t.singular_values[0] - 5.0).abs() < 1e-12);
        assert!((t.singular_values[1] - 3.0).abs() < 1e-12);
        let rec = &t.u * DMatrix::from_diagonal(&t.singular_values) * t.v.transpose();
        assert!((rec - x).abs().max() < 1e-12);
        // sign convention: dominant loading positive
        assert!(t.v[(1, 0)] > 0.0);
    }

    #[test]
    fn decorrelation_orthonormalizes() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let w = symmetric_decorrelation(&a);
        let i = &w * w.transpose();
        assert!((i - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }
}
