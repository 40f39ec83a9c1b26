use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating point type the model can run in: 32-bit for training, 64-bit
/// for gradient checks.
pub trait Scalar:
    Float + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + DivAssign + Sum + 'static
{
    /// # Safety
    /// Pointers and strides must describe valid matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("representable")
    }

    fn as_f64(self) -> f64 {
        <f64 as num_traits::NumCast>::from(self).expect("representable")
    }
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// A strided view of a matrix inside a slice.
#[derive(Clone, Copy)]
pub(crate) struct Mat {
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl Mat {
    /// Row-major `rows x cols`, optionally read transposed.
    pub fn rm(cols: usize, transposed: bool) -> Mat {
        if transposed {
            Mat { off: 0, rs: 1, cs: cols }
        } else {
            Mat { off: 0, rs: cols, cs: 1 }
        }
    }

    fn last(self, rows: usize, cols: usize) -> usize {
        self.off + (rows.max(1) - 1) * self.rs + (cols.max(1) - 1) * self.cs
    }
}

/// `c = beta * c + alpha * a b` for an `m x k` view `a` and a `k x n` view
/// `b`. When `beta` is zero `c` is overwritten.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    va: Mat,
    b: &[T],
    vb: Mat,
    beta: T,
    c: &mut [T],
    vc: Mat,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(va.last(m, k) < a.len().max(1) || k == 0, "lhs out of bounds");
    assert!(vb.last(k, n) < b.len().max(1) || k == 0, "rhs out of bounds");
    assert!(vc.last(m, n) < c.len(), "output out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c[vc.off + i * vc.rs + j * vc.cs];
                *x = if beta == T::zero() { T::zero() } else { beta * *x };
            }
        }
        return;
    }
    // SAFETY: the bounds of all three views were checked above.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(va.off),
            va.rs as isize,
            va.cs as isize,
            b.as_ptr().add(vb.off),
            vb.rs as isize,
            vb.cs as isize,
            beta,
            c.as_mut_ptr().add(vc.off),
            vc.rs as isize,
            vc.cs as isize,
        )
    }
}

/// Row-major product `a (m x k) * b (k x n)`, with optional transposes of
/// the stored operands, accumulated into `c` when `accumulate` is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    ta: bool,
    b: &[T],
    tb: bool,
    c: &mut [T],
    accumulate: bool,
) {
    let va = Mat::rm(if ta { m } else { k }, ta);
    let vb = Mat::rm(if tb { k } else { n }, tb);
    let beta = if accumulate { T::one() } else { T::zero() };
    gemm(m, k, n, T::one(), a, va, b, vb, beta, c, Mat::rm(n, false));
}

/// Add `bias` to every row of `x`.
pub(crate) fn add_bias<T: Scalar>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += *b;
        }
    }
}

/// Accumulate column sums of `dy` into `db`.
pub(crate) fn sum_rows<T: Scalar>(dy: &[T], db: &mut [T]) {
    for row in dy.chunks(db.len()) {
        for (g, d) in db.iter_mut().zip(row) {
            *g += *d;
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

pub(crate) fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_f64(GELU_C);
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::from_f64(GELU_C);
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + three * k * x * x)
}

pub(crate) struct LnCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) fn layer_norm<T: Scalar>(x: &[T], d: usize, g: &[T], b: &[T]) -> (Vec<T>, LnCache<T>) {
    let rows = x.len() / d;
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    let dt = T::from_f64(d as f64);
    let eps = T::from_f64(LN_EPS);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() / dt;
        let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / dt;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * g[j] + b[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Returns dx; accumulates dg and db.
pub(crate) fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    d: usize,
    g: &[T],
    cache: &LnCache<T>,
    dg: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    let rows = dy.len() / d;
    let dt = T::from_f64(d as f64);
    let mut dx = vec![T::zero(); dy.len()];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            let dxh = dyr[j] * g[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat /= dt;
        mean_dxhat_xhat /= dt;
        for j in 0..d {
            let dxh = dyr[j] * g[j];
            dx[r * d + j] = cache.rstd[r] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    dx
}

/// In-place softmax of each row.
pub(crate) fn softmax_rows<T: Scalar>(x: &mut [T], n: usize) {
    for row in x.chunks_mut(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_transposes() {
        // a = [[1,2,3],[4,5,6]], b = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        matmul(2, 3, 2, &a, false, &b, false, &mut c, false);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // a^T a
        let mut c = [0.0f64; 9];
        matmul(3, 2, 3, &a, true, &a, false, &mut c, false);
        assert_eq!(c, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        // a a^T
        let mut c = [1.0f64; 4];
        matmul(2, 3, 2, &a, false, &a, true, &mut c, true);
        assert_eq!(c, [15.0, 33.0, 33.0, 78.0]);
    }

    #[test]
    fn gelu_derivative() {
        for x in [-3.0, -0.5, 0.0, 0.3, 2.0f64] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
