//! Dense complex linear algebra on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values below `REL_RANK_TOL · σmax` count as zero.
pub const REL_RANK_TOL: f64 = 1e-8;

pub struct Decomposition {
    pub singular_values: Vec<f64>,
    /// Full `V^H` (square, `cols × cols`).
    pub v_h: CMatrix,
}

/// SVD with a complete right factor; wide matrices are padded with zero rows.
pub fn decompose(m: &CMatrix) -> Decomposition {
    let (r, c) = m.shape();
    if c == 0 {
        return Decomposition {
            singular_values: vec![],
            v_h: CMatrix::zeros(0, 0),
        };
    }
    let padded = if r < c {
        let mut p = CMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_h = svd.v_t.expect("right singular vectors requested");
    let mut sv: Vec<(usize, f64)> = svd.singular_values.iter().copied().enumerate().collect();
    sv.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut sorted = CMatrix::zeros(c, c);
    for (dst, (src, _)) in sv.iter().enumerate() {
        sorted.set_row(dst, &v_h.row(*src));
    }
    Decomposition {
        singular_values: sv.into_iter().map(|(_, s)| s).collect(),
        v_h: sorted,
    }
}

pub fn rank_of(singular_values: &[f64], rel: f64) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel * max).count()
}

pub fn rank(m: &CMatrix) -> usize {
    rank_of(&decompose(m).singular_values, REL_RANK_TOL)
}

/// Orthonormal basis of the row space, one row per dimension.
pub fn row_space(m: &CMatrix) -> CMatrix {
    let d = decompose(m);
    let r = rank_of(&d.singular_values, REL_RANK_TOL);
    d.v_h.rows(0, r).into_owned()
}

/// Orthonormal basis of the null space, one column per dimension.
pub fn null_space(m: &CMatrix) -> CMatrix {
    let c = m.ncols();
    if m.nrows() == 0 {
        return CMatrix::identity(c, c);
    }
    let d = decompose(m);
    let r = rank_of(&d.singular_values, REL_RANK_TOL);
    d.v_h.rows(r, c - r).adjoint()
}

/// Rescale each row to unit length; zero rows are dropped.
pub fn normalize_rows(rows: Vec<Vec<Complex64>>, cols: usize) -> CMatrix {
    let kept: Vec<Vec<Complex64>> = rows
        .into_iter()
        .filter_map(|r| {
            let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (norm > 0.0 && norm.is_finite()).then(|| r.into_iter().map(|z| z / norm).collect())
        })
        .collect();
    CMatrix::from_fn(kept.len(), cols, |i, j| kept[i][j])
}

/// Basis of the column span of `n` that is the identity on greedily chosen pivot rows,
/// scanning rows in order. Returns the basis and the pivot row indices.
pub fn pivot_basis(n: &CMatrix) -> (CMatrix, Vec<usize>) {
    let d = n.ncols();
    if d == 0 {
        return (n.clone(), vec![]);
    }
    let mut pivots = Vec::with_capacity(d);
    let mut chosen: Vec<CVector> = Vec::with_capacity(d);
    for i in 0..n.nrows() {
        if pivots.len() == d {
            break;
        }
        let row: CVector = n.row(i).transpose();
        let norm = row.norm();
        if norm < 1e-10 {
            continue;
        }
        let mut res = row.clone();
        for q in &chosen {
            let coef = q.dotc(&res);
            res -= q * coef;
        }
        if res.norm() > 1e-6 * norm.max(1e-3) {
            let unit = &res / Complex64::new(res.norm(), 0.0);
            chosen.push(unit);
            pivots.push(i);
        }
    }
    let sub = CMatrix::from_fn(pivots.len(), d, |a, b| n[(pivots[a], b)]);
    let inv = sub
        .clone()
        .try_inverse()
        .unwrap_or_else(|| pseudo_inverse(&sub));
    (n * inv, pivots)
}

pub fn pseudo_inverse(m: &CMatrix) -> CMatrix {
    m.clone()
        .pseudo_inverse(1e-12)
        .unwrap_or_else(|_| CMatrix::zeros(m.ncols(), m.nrows()))
}

/// Round parts below `1e-12` (relative to the column scale) to exact zero.
pub fn clean(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let scale = col.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for z in col.iter_mut() {
            if z.re.abs() < 1e-12 * scale {
                z.re = 0.0;
            }
            if z.im.abs() < 1e-12 * scale {
                z.im = 0.0;
            }
        }
    }
}

/// Least-squares solution of `a·x = b`.
pub fn least_squares(a: &CMatrix, b: &CVector) -> CVector {
    pseudo_inverse(a) * b
}

/// Relative residual of projecting `v` onto the span of the orthonormal columns of `q`.
pub fn projection_residual(q: &CMatrix, v: &CVector) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let proj = q * (q.adjoint() * v);
    (v - proj).norm() / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = CMatrix::from_row_slice(1, 3, &[c(1.0), c(1.0), c(0.0)]);
        let n = null_space(&m);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-14);
    }

    #[test]
    fn pivot_basis_is_identity_on_pivots() {
        let m = CMatrix::from_row_slice(1, 3, &[c(1.0), c(-1.0), c(0.0)]);
        let n = null_space(&m);
        let (b, piv) = pivot_basis(&n);
        assert_eq!(piv, vec![0, 2]);
        assert!((b[(0, 0)] - c(1.0)).norm() < 1e-14);
        assert!((b[(1, 0)] - c(1.0)).norm() < 1e-14);
        assert!((b[(2, 1)] - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn ranks() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]);
        assert_eq!(rank(&m), 1);
        assert_eq!(row_space(&m).nrows(), 1);
    }
}
