//! Small dense complex linear algebra: a one-sided Jacobi SVD and the
//! pseudo-inverse built from it.
//!
//! The matrices seen here are at most (RF chains × users), so a Hestenes
//! sweep is both fast enough and accurate in the small singular values,
//! which is what the rank test needs.

use ndarray::{Array1, Array2, ArrayView2};

use crate::scalar::{czero, Cplx, Real};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u · diag(singular) · v^H` of a matrix with at least as many
/// rows as columns.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    /// `rows × cols`, orthonormal columns (zero columns for zero singular values).
    pub u: Array2<Cplx<T>>,
    /// Unsorted singular values, one per column of the input.
    pub singular: Vec<T>,
    /// `cols × cols` unitary.
    pub v: Array2<Cplx<T>>,
}

impl<T: Real> Svd<T> {
    pub fn max_singular(&self) -> T {
        self.singular.iter().copied().fold(T::zero(), T::max)
    }

    pub fn min_singular(&self) -> T {
        self.singular
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// # Panics
///
/// Panics if `a` has fewer rows than columns.
pub fn jacobi_svd<T: Real>(a: ArrayView2<'_, Cplx<T>>) -> Svd<T> {
    let (rows, cols) = a.dim();
    assert!(rows >= cols, "jacobi_svd expects a tall matrix");
    let mut b = a.to_owned();
    let mut v = identity::<T>(cols);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = czero::<T>();
                for i in 0..rows {
                    let bp = b[[i, p]];
                    let bq = b[[i, q]];
                    alpha += bp.norm_sqr();
                    beta += bq.norm_sqr();
                    gamma += bp.conj() * bq;
                }
                let g = gamma.norm();
                if g == T::zero() || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate column q by e^{-jψ} so the pair overlap is real, then
                // apply the real Jacobi rotation that zeroes it.
                let unphase = (gamma / g).conj();
                let zeta = (beta - alpha) / (T::two() * g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut b, p, q, unphase, c, s);
                rotate_columns(&mut v, p, q, unphase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut singular = Vec::with_capacity(cols);
    let mut u = Array2::from_elem((rows, cols), czero::<T>());
    for j in 0..cols {
        let sigma = b.column(j).iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        singular.push(sigma);
        if sigma > T::zero() {
            for i in 0..rows {
                u[[i, j]] = b[[i, j]] / sigma;
            }
        }
    }
    Svd { u, singular, v }
}

fn rotate_columns<T: Real>(
    m: &mut Array2<Cplx<T>>,
    p: usize,
    q: usize,
    unphase: Cplx<T>,
    c: T,
    s: T,
) {
    for i in 0..m.nrows() {
        let mp = m[[i, p]];
        let mq = m[[i, q]] * unphase;
        m[[i, p]] = mp * c - mq * s;
        m[[i, q]] = mp * s + mq * c;
    }
}

pub fn identity<T: Real>(n: usize) -> Array2<Cplx<T>> {
    let mut m = Array2::from_elem((n, n), czero::<T>());
    for i in 0..n {
        m[[i, i]] = Cplx::new(T::one(), T::zero());
    }
    m
}

/// Conjugate transpose.
pub fn hermitian<T: Real>(a: ArrayView2<'_, Cplx<T>>) -> Array2<Cplx<T>> {
    a.t().mapv(|z| z.conj())
}

/// Squared Frobenius norm.
pub fn frobenius_sqr<T: Real>(a: ArrayView2<'_, Cplx<T>>) -> T {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Plain complex matrix product, kept generic so it does not depend on the
/// BLAS-oriented bounds of `ndarray::dot`.
pub fn matmul<T: Real>(a: ArrayView2<'_, Cplx<T>>, b: ArrayView2<'_, Cplx<T>>) -> Array2<Cplx<T>> {
    let (n, k) = a.dim();
    let (k2, m) = b.dim();
    assert_eq!(k, k2, "matmul inner dimensions");
    let mut out = Array2::from_elem((n, m), czero::<T>());
    for i in 0..n {
        for l in 0..k {
            let ail = a[[i, l]];
            if ail == czero() {
                continue;
            }
            for j in 0..m {
                out[[i, j]] += ail * b[[l, j]];
            }
        }
    }
    out
}

/// `x^H · y`.
pub fn inner<T: Real>(x: &Array1<Cplx<T>>, y: &Array1<Cplx<T>>) -> Cplx<T> {
    x.iter()
        .zip(y.iter())
        .fold(czero(), |acc, (a, b)| acc + a.conj() * *b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<Cplx<f64>> {
        Array2::from_shape_fn((rows, cols), |_| {
            Cplx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn svd_reconstructs_random_tall_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (rows, cols) in [(1, 1), (3, 2), (8, 6), (5, 5)] {
            let a = random_matrix(&mut rng, rows, cols);
            let svd = jacobi_svd(a.view());
            let mut us = svd.u.clone();
            for j in 0..cols {
                for i in 0..rows {
                    us[[i, j]] *= svd.singular[j];
                }
            }
            let rebuilt = matmul(us.view(), hermitian(svd.v.view()).view());
            let err = (&rebuilt - &a).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "reconstruction error {err} for {rows}x{cols}");
            let vhv = matmul(hermitian(svd.v.view()).view(), svd.v.view());
            let ortho = (&vhv - &identity::<f64>(cols))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(ortho < 1e-12);
        }
    }

    #[test]
    fn svd_detects_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = random_matrix(&mut rng, 4, 3);
        let c0 = a.column(0).to_owned();
        a.column_mut(2).assign(&c0.mapv(|z| z * Cplx::new(0.0, 2.0)));
        let svd = jacobi_svd(a.view());
        assert!(svd.min_singular() < 1e-12 * svd.max_singular());
    }

    #[test]
    fn singular_values_of_diagonal() {
        let mut a = Array2::from_elem((3, 2), czero::<f64>());
        a[[0, 0]] = Cplx::new(0.0, -3.0);
        a[[1, 1]] = Cplx::new(2.0, 0.0);
        let mut s = jacobi_svd(a.view()).singular;
        s.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((s[0] - 2.0).abs() < 1e-15 && (s[1] - 3.0).abs() < 1e-15);
    }
}
