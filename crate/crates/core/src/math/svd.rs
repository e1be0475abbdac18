//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Tall inputs are first reduced with a Householder QR so the rotations run
//! on the small triangular factor. Intended for desk-scale matrices (a few
//! hundred rows/columns).

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const CONVERGENCE_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// `a = u · diag(s) · vᵀ` with `s` sorted descending, `u` of shape
/// `rows x k`, `v` of shape `cols x k`, `k = min(rows, cols)`.
///
/// Left singular vectors belonging to exactly-zero singular values are left
/// as zero columns.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn compute(a: &Matrix) -> Result<Svd> {
        check_finite(a)?;
        let (m, n) = a.shape();
        if m < n {
            let t = decompose(&a.transpose(), true)?;
            let (u, s, v) = t.expect_vectors();
            return Ok(Svd { u: v, s, v: u });
        }
        let (u, s, v) = decompose(a, true)?.expect_vectors();
        Ok(Svd { u, s, v })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    if a.rows() < a.cols() {
        Ok(decompose(&a.transpose(), false)?.s)
    } else {
        Ok(decompose(a, false)?.s)
    }
}

/// Number of singular values strictly above `rtol · σ_max`.
///
/// `rtol` defaults to `max(rows, cols) · f64::EPSILON`. The zero matrix has
/// rank 0.
pub fn numerical_rank(a: &Matrix, rtol: Option<f64>) -> Result<usize> {
    let s = singular_values(a)?;
    let smax = match s.first() {
        Some(&v) if v > 0.0 => v,
        _ => return Ok(0),
    };
    let rtol = rtol.unwrap_or(a.rows().max(a.cols()) as f64 * f64::EPSILON);
    let cutoff = rtol * smax;
    Ok(s.iter().filter(|&&v| v > cutoff).count())
}

fn check_finite(a: &Matrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

struct Decomposition {
    s: Vec<f64>,
    vectors: Option<(Matrix, Matrix)>,
}

impl Decomposition {
    fn expect_vectors(self) -> (Matrix, Vec<f64>, Matrix) {
        let (u, v) = self.vectors.expect("vectors requested");
        (u, self.s, v)
    }
}

/// Requires `rows >= cols`.
fn decompose(a: &Matrix, want_vectors: bool) -> Result<Decomposition> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    // column-major working copy: cols[j] is column j
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();

    let reflectors = if m > n {
        let refl = householder_qr(&mut cols, m);
        // keep only the n x n upper-triangular factor
        for (j, c) in cols.iter_mut().enumerate() {
            for v in c.iter_mut().skip(j + 1) {
                *v = 0.0;
            }
            c.truncate(n);
        }
        Some(refl)
    } else {
        None
    };

    let mut vcols: Option<Vec<Vec<f64>>> = want_vectors.then(|| {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    });

    jacobi_sweeps(&mut cols, vcols.as_mut())?;

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let s: Vec<f64> = order.iter().map(|&i| norms[i]).collect();

    let vectors = vcols.map(|vcols| {
        // left vectors of the reduced problem, normalized
        let p = cols.first().map_or(0, Vec::len);
        let mut ured: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| {
                if norms[i] > 0.0 {
                    cols[i].iter().map(|x| x / norms[i]).collect()
                } else {
                    vec![0.0; p]
                }
            })
            .collect();
        if let Some(refl) = &reflectors {
            ured = ured.iter().map(|c| apply_q(refl, c, m)).collect();
        }
        let u = Matrix::from_fn(m, n, |r, k| ured[k][r]);
        let v = Matrix::from_fn(n, n, |r, k| vcols[order[k]][r]);
        (u, v)
    });

    Ok(Decomposition { s, vectors })
}

fn jacobi_sweeps(cols: &mut [Vec<f64>], mut vcols: Option<&mut Vec<Vec<f64>>>) -> Result<()> {
    let n = cols.len();
    // Columns below this squared norm are roundoff residue; rotating them
    // against a dominant column can cycle forever.
    let frob2: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let negligible = (f64::EPSILON * f64::EPSILON) * frob2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= CONVERGENCE_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cols, p, q, c, s);
                if let Some(v) = vcols.as_deref_mut() {
                    rotate(v, p, q, c, s);
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// In-place Householder QR on column-major storage; on return the upper
/// triangle of `cols` holds R. Returns the unit reflector for each column
/// (`v[j]` acts on rows `j..m`; an empty vector means identity).
fn householder_qr(cols: &mut [Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let n = cols.len();
    let mut reflectors = Vec::with_capacity(n);
    for j in 0..n {
        let x = &cols[j][j..m];
        let norm = dot(x, x).sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = dot(&v, &v).sqrt();
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for e in &mut v {
            *e /= vnorm;
        }
        for c in cols.iter_mut().skip(j) {
            let tail = &mut c[j..m];
            let proj = 2.0 * dot(&v, tail);
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= proj * vi;
            }
        }
        reflectors.push(v);
    }
    reflectors
}

/// `Q · [x; 0]` for an `n`-vector `x`, where Q is the product of the
/// reflectors.
fn apply_q(reflectors: &[Vec<f64>], x: &[f64], m: usize) -> Vec<f64> {
    let mut y = vec![0.0; m];
    y[..x.len()].copy_from_slice(x);
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        let tail = &mut y[j..m];
        let proj = 2.0 * dot(v, tail);
        for (t, vi) in tail.iter_mut().zip(v) {
            *t -= proj * vi;
        }
    }
    y
}
