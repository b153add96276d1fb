use nalgebra::Hessenberg;
use num_complex::Complex64;

use super::{ComplexMatrix, ZERO};
use crate::error::{Error, Result};

/// `|re| + |im|`, the cheap modulus LAPACK uses in its deflation tests.
fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Complex Schur form `A = Q·T·Qᴴ` with `T` upper triangular.
///
/// Hessenberg reduction followed by single-shift QR with Wilkinson shifts,
/// exceptional shifts every tenth iteration and the Ahues–Tisseur deflation
/// criterion (the scheme of LAPACK's `zlahqr`). This stays convergent on
/// tight eigenvalue clusters, such as a matrix within rounding of the
/// identity.
pub(crate) fn schur_form(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = a.nrows();
    let (mut q, mut h) = Hessenberg::new(a.clone()).unpack();
    for j in 0..n {
        for i in j + 2..n {
            h[(i, j)] = ZERO;
        }
    }
    if n < 2 {
        return Ok((q, h));
    }

    let ulp = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n as f64 / ulp);
    let max_iterations = 30 * n.max(10);

    let mut hi = n - 1;
    while hi > 0 {
        let mut iterations = 0;
        loop {
            let lo = (1..=hi).rev().find(|&k| negligible(&h, k, ulp, small)).unwrap_or(0);
            if lo > 0 {
                h[(lo, lo - 1)] = ZERO;
            }
            if lo == hi {
                break;
            }
            if iterations == max_iterations {
                return Err(Error::NoConvergence);
            }
            let shift = match iterations {
                i if i > 0 && i % 20 == 0 => h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].re.abs(),
                i if i > 0 && i % 10 == 0 => h[(lo, lo)] + 0.75 * h[(lo + 1, lo)].re.abs(),
                _ => wilkinson_shift(&h, hi),
            };
            qr_sweep(&mut h, &mut q, lo, hi, shift);
            iterations += 1;
        }
        hi -= 1;
    }
    Ok((q, h))
}

fn negligible(h: &ComplexMatrix, k: usize, ulp: f64, small: f64) -> bool {
    let sub = cabs1(h[(k, k - 1)]);
    if sub <= small {
        return true;
    }
    let mut scale = cabs1(h[(k - 1, k - 1)]) + cabs1(h[(k, k)]);
    if scale == 0.0 {
        if k >= 2 {
            scale += h[(k - 1, k - 2)].re.abs();
        }
        if k + 1 < h.nrows() {
            scale += h[(k + 1, k)].re.abs();
        }
    }
    if sub > ulp * scale {
        return false;
    }
    let (ab, ba) = {
        let sup = cabs1(h[(k - 1, k)]);
        (sub.max(sup), sub.min(sup))
    };
    let (aa, bb) = {
        let diag = cabs1(h[(k, k)]);
        let gap = cabs1(h[(k - 1, k - 1)] - h[(k, k)]);
        (diag.max(gap), diag.min(gap))
    };
    let s = aa + ab;
    ba * (ab / s) <= small.max(ulp * (bb * (aa / s)))
}

/// Eigenvalue of the trailing 2×2 block closer to `h[hi, hi]`.
fn wilkinson_shift(h: &ComplexMatrix, hi: usize) -> Complex64 {
    let t = h[(hi, hi)];
    let u = h[(hi - 1, hi)].sqrt() * h[(hi, hi - 1)].sqrt();
    let s = cabs1(u);
    if s == 0.0 {
        return t;
    }
    let x = 0.5 * (h[(hi - 1, hi - 1)] - t);
    let sx = cabs1(x);
    let s = s.max(sx);
    let mut y = s * ((x / s).powi(2) + (u / s).powi(2)).sqrt();
    if sx > 0.0 {
        let dir = x / sx;
        if dir.re * y.re + dir.im * y.im < 0.0 {
            y = -y;
        }
    }
    t - u * (u / (x + y))
}

/// Rotation `[c s; −s̄ c]` (real `c`) mapping `(x, y)` to `(r, 0)`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let norm = x.norm().hypot(y.norm());
    if norm == 0.0 {
        return (1.0, ZERO);
    }
    if x.norm() == 0.0 {
        return (0.0, y.conj() / y.norm());
    }
    let c = x.norm() / norm;
    let s = (x / x.norm()) * y.conj() / norm;
    (c, s)
}

/// One implicit single-shift QR step on the active window `lo..=hi`,
/// accumulating into the full Schur form and `q`.
fn qr_sweep(h: &mut ComplexMatrix, q: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    let n = h.nrows();
    for k in lo..hi {
        let (x, y) = if k == lo { (h[(lo, lo)] - shift, h[(lo + 1, lo)]) } else { (h[(k, k - 1)], h[(k + 1, k - 1)]) };
        let (c, s) = givens(x, y);
        let first_col = if k == lo { lo } else { k - 1 };
        for j in first_col..n {
            let (a, b) = (h[(k, j)], h[(k + 1, j)]);
            h[(k, j)] = c * a + s * b;
            h[(k + 1, j)] = -s.conj() * a + c * b;
        }
        if k > lo {
            h[(k + 1, k - 1)] = ZERO;
        }
        let last_row = (k + 2).min(hi);
        for i in 0..=last_row {
            let (a, b) = (h[(i, k)], h[(i, k + 1)]);
            h[(i, k)] = a * c + b * s.conj();
            h[(i, k + 1)] = -a * s + b * c;
        }
        for i in 0..n {
            let (a, b) = (q[(i, k)], q[(i, k + 1)]);
            q[(i, k)] = a * c + b * s.conj();
            q[(i, k + 1)] = -a * s + b * c;
        }
    }
}
