//! Small dense eigenvalue routines.
//!
//! Everything here works on fixed-size arrays: the 3x3 `TᵀT` matrix of the
//! CHSH bound and the 4x4 Hermitian density matrices (through their real
//! 8x8 embedding).

use num_complex::Complex64;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending.
///
/// Sweeps stop once the off-diagonal Frobenius norm falls below `1e-14`
/// times the full norm (or underflows to zero).
pub fn symmetric_eigenvalues<const N: usize>(matrix: &[[f64; N]; N]) -> [f64; N] {
    let mut a = *matrix;
    // Work on the symmetrized copy so tiny asymmetries do not bias the result.
    for p in 0..N {
        for q in (p + 1)..N {
            let mean = 0.5 * (a[p][q] + a[q][p]);
            a[p][q] = mean;
            a[q][p] = mean;
        }
    }

    let total: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|p| (0..N).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * total || off == 0.0 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                rotate(&mut a, p, q);
            }
        }
    }

    let mut eig = [0.0; N];
    for (i, e) in eig.iter_mut().enumerate() {
        *e = a[i][i];
    }
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

fn rotate<const N: usize>(a: &mut [[f64; N]; N], p: usize, q: usize) {
    let apq = a[p][q];
    if apq == 0.0 {
        return;
    }
    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
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
    a[p][q] = 0.0;
    a[q][p] = 0.0;
}

/// Eigenvalues of a 4x4 Hermitian matrix, sorted ascending.
///
/// `H = A + iB` is embedded as the real symmetric `[[A, -B], [B, A]]`, whose
/// spectrum is that of `H` with every eigenvalue doubled.
pub fn hermitian_eigenvalues_4(h: &[[Complex64; 4]; 4]) -> [f64; 4] {
    let mut big = [[0.0; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            // Hermitian part only; the caller reports the defect separately.
            let z = 0.5 * (h[i][j] + h[j][i].conj());
            big[i][j] = z.re;
            big[i + 4][j + 4] = z.re;
            big[i][j + 4] = -z.im;
            big[i + 4][j] = z.im;
        }
    }
    let doubled = symmetric_eigenvalues(&big);
    [doubled[0], doubled[2], doubled[4], doubled[6]]
}

/// Eigenvalues of the symmetric 2x2 matrix `[[a, b], [b, d]]`, ascending.
pub fn symmetric_eigenvalues_2(a: f64, b: f64, d: f64) -> [f64; 2] {
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - radius, mean + radius]
}
