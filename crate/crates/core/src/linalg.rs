//! Fixed-size complex matrices and a Jacobi eigensolver for 4×4 Hermitian matrices.

use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat4 = [[C64; 4]; 4];

pub const ZERO4: Mat4 = [[C64::new(0.0, 0.0); 4]; 4];

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-13;

pub fn identity4() -> Mat4 {
    let mut m = ZERO4;
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    m
}

pub fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = ZERO4;
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn trace4(a: &Mat4) -> C64 {
    (0..4).map(|i| a[i][i]).sum()
}

/// `Tr(a·b)` without forming the product.
pub fn trace_product(a: &Mat4, b: &Mat4) -> C64 {
    let mut t = C64::new(0.0, 0.0);
    for i in 0..4 {
        for k in 0..4 {
            t += a[i][k] * b[k][i];
        }
    }
    t
}

/// Kronecker product of two real 2×2 matrices.
pub fn kron2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> Mat4 {
    let mut out = ZERO4;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = C64::new(a[i][j] * b[k][l], 0.0);
                }
            }
        }
    }
    out
}

/// Eigenvalues of a Hermitian 4×4 matrix, ascending.
///
/// The matrix `H = X + iY` is embedded as the real symmetric 8×8 matrix
/// `[[X, −Y], [Y, X]]`, whose spectrum is that of `H` with each eigenvalue doubled.
pub fn hermitian_eigenvalues(h: &Mat4) -> [f64; 4] {
    let mut m = [[0.0f64; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            let z = h[i][j];
            m[i][j] = z.re;
            m[i + 4][j + 4] = z.re;
            m[i][j + 4] = -z.im;
            m[i + 4][j] = z.im;
        }
    }
    let mut ev = jacobi_symmetric(m);
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[2], ev[4], ev[6]]
}

fn jacobi_symmetric<const N: usize>(mut a: [[f64; N]; N]) -> [f64; N] {
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::array::from_fn(|i| a[i][i])
}
