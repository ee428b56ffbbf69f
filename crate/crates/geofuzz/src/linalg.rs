//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves the projected Lyapunov equation `B X + X Bᵀ = C` for quasi-upper-
/// triangular-able `B` via real Schur decomposition and block back-
/// substitution. `B` must have all eigenvalues in the open right half plane.
pub fn solve_lyapunov(b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    if b.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(Error::Parameter("lyapunov operands must be square".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let schur = nalgebra::linalg::Schur::try_new(b.clone(), 1e-12, 10_000)
        .ok_or_else(|| Error::Numerical("schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let c2 = q.transpose() * c * &q;
    let y = solve_quasi_triangular_lyapunov(&t, &c2)?;
    Ok(&q * y * q.transpose())
}

/// Back-substitution for `T Y + Y Tᵀ = C` with `T` quasi upper triangular.
fn solve_quasi_triangular_lyapunov(
    t: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    // diagonal block boundaries: 1x1, or 2x2 where the subdiagonal is nonzero
    let mut starts = Vec::new();
    let mut i = 0;
    while i < n {
        starts.push(i);
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            i += 2;
        } else {
            i += 1;
        }
    }
    let block = |k: usize| -> (usize, usize) {
        let s = starts[k];
        let e = if k + 1 < starts.len() { starts[k + 1] } else { n };
        (s, e)
    };
    let nb = starts.len();
    let mut y = DMatrix::zeros(n, n);
    for bi in (0..nb).rev() {
        let (is, ie) = block(bi);
        for bj in (0..nb).rev() {
            let (js, je) = block(bj);
            // rhs = C_ij - sum_{k>i} T_ik Y_kj - sum_{k>j} Y_ik T_jk^T
            let mut rhs = c.view((is, js), (ie - is, je - js)).into_owned();
            if ie < n {
                rhs -= t.view((is, ie), (ie - is, n - ie))
                    * y.view((ie, js), (n - ie, je - js));
            }
            if je < n {
                rhs -= y.view((is, je), (ie - is, n - je))
                    * t.view((js, je), (je - js, n - je)).transpose();
            }
            let tii = t.view((is, is), (ie - is, ie - is)).into_owned();
            let tjj = t.view((js, js), (je - js, je - js)).into_owned();
            let ni = ie - is;
            let nj = je - js;
            // vec(T_ii Y + Y T_jj^T) = (I ⊗ T_ii + T_jj ⊗ I) vec(Y)
            let small = DMatrix::identity(nj, nj).kronecker(&tii)
                + tjj.kronecker(&DMatrix::identity(ni, ni));
            let rhs_vec =
                nalgebra::DVector::from_iterator(ni * nj, rhs.iter().copied());
            let sol = small
                .lu()
                .solve(&rhs_vec)
                .ok_or_else(|| Error::Numerical("singular lyapunov block".into()))?;
            for col in 0..nj {
                for row in 0..ni {
                    y[(is + row, js + col)] = sol[col * ni + row];
                }
            }
        }
    }
    Ok(y)
}

/// Orthonormal basis of the subspace orthogonal to the all-ones vector,
/// as the last `n - 1` columns of a Householder reflection mapping
/// `1/sqrt(n)` to the first coordinate axis.
pub fn ones_complement_basis(n: usize) -> DMatrix<f64> {
    assert!(n >= 1);
    let root = (n as f64).sqrt();
    // u = 1/sqrt(n) - e1, H = I - 2 u uᵀ / (uᵀ u)
    let mut u = nalgebra::DVector::from_element(n, 1.0 / root);
    u[0] -= 1.0;
    let denom = u.dot(&u);
    let mut h = DMatrix::identity(n, n);
    if denom > 0.0 {
        h -= (&u * u.transpose()) * (2.0 / denom);
    }
    h.columns(1, n - 1).into_owned()
}
