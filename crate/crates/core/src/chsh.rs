//! Correlation matrix, Horodecki bound and explicit CHSH values.
//!
//! For a two-qubit state the largest CHSH expectation over all spin
//! directions is `2√M`, with `M` the sum of the two largest eigenvalues of
//! `TᵀT` and `T_pq = Tr[(σ_p ⊗ σ_q) ρ]`. Only traceless observables `a·σ`
//! enter, so "measure the identity and always answer +1" cannot inflate a
//! bound computed here.

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{symmetric_eigenvalues, symmetric_eigenvalues_2};
use crate::states::{SingletFraction, TwoQubitDensity, ZERO};
use crate::{Error, Result};

const ENTRY_TOL: f64 = 1e-10;
const DIRECTION_TOL: f64 = 1e-10;
const IMAGINARY_TOL: f64 = 1e-9;

/// Tsirelson's bound `2√2`.
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// `T_pq`, rows and columns indexed by the axes `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    t: [[f64; 3]; 3],
}

impl CorrelationMatrix {
    pub fn new(t: [[f64; 3]; 3]) -> Result<Self> {
        if let Some(v) = t.iter().flatten().find(|v| !(v.abs() <= 1.0 + ENTRY_TOL)) {
            return Err(Error::Precondition(format!(
                "correlation entry {v} outside [-1, 1]"
            )));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> &[[f64; 3]; 3] {
        &self.t
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.t[p][q]
    }

    /// `TᵀT`.
    pub fn gram(&self) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for (q, row) in g.iter_mut().enumerate() {
            for (r, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|p| self.t[p][q] * self.t[p][r]).sum();
            }
        }
        g
    }

    /// `Tv`.
    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        self.t
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.t
            .iter()
            .flatten()
            .zip(other.t.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Maximal CHSH expectation `2√M` of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellBound {
    pub m_value: f64,
    pub bound: f64,
    /// Eigenvalues of `TᵀT`, ascending.
    pub gram_eigenvalues: [f64; 3],
}

impl BellBound {
    pub fn violates_chsh(&self) -> bool {
        self.bound > 2.0
    }
}

fn pauli(p: usize) -> [[Complex64; 2]; 2] {
    let o = ZERO;
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match p {
        0 => [[o, one], [one, o]],
        1 => [[o, -i], [i, o]],
        _ => [[one, o], [o, -one]],
    }
}

/// `T_pq = Tr[(σ_p ⊗ σ_q) ρ]` from the explicit Pauli matrices.
pub fn correlation_matrix(rho: &TwoQubitDensity) -> Result<CorrelationMatrix> {
    let e = rho.entries();
    let mut t = [[0.0; 3]; 3];
    let mut residue: f64 = 0.0;
    for (p, row) in t.iter_mut().enumerate() {
        let sp = pauli(p);
        for (q, cell) in row.iter_mut().enumerate() {
            let sq = pauli(q);
            let mut tr = ZERO;
            // Tr[K ρ] = Σ_ij K_ji ρ_ij with K_(st),(mn) = σp_sm σq_tn.
            for m in 0..2 {
                for n in 0..2 {
                    for s in 0..2 {
                        for tt in 0..2 {
                            tr += sp[s][m] * sq[tt][n] * e[2 * m + n][2 * s + tt];
                        }
                    }
                }
            }
            residue = residue.max(tr.im.abs());
            *cell = tr.re;
        }
    }
    if residue > IMAGINARY_TOL {
        return Err(Error::ImaginaryResidue(residue));
    }
    CorrelationMatrix::new(t)
}

/// The five nonzero components of `T` for a real symmetric `ρ`, written out
/// entry by entry. Must agree with [`correlation_matrix`].
pub fn correlation_matrix_symmetric(rho: &TwoQubitDensity) -> Result<CorrelationMatrix> {
    let e = rho.entries();
    for i in 0..4 {
        for j in 0..4 {
            if e[i][j].im.abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "entry ({i},{j}) has imaginary part {:e}",
                    e[i][j].im
                )));
            }
            if (e[i][j].re - e[j][i].re).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    let r = |m: usize, n: usize, s: usize, t: usize| rho.get(m, n, s, t).re;

    let xx = r(0, 0, 1, 1) + r(0, 1, 1, 0) + r(1, 0, 0, 1) + r(1, 1, 0, 0);
    let yy = -r(0, 0, 1, 1) + r(0, 1, 1, 0) + r(1, 0, 0, 1) - r(1, 1, 0, 0);
    let zz = r(0, 0, 0, 0) - r(0, 1, 0, 1) - r(1, 0, 1, 0) + r(1, 1, 1, 1);
    let xz = r(0, 0, 1, 0) - r(0, 1, 1, 1) + r(1, 0, 0, 0) - r(1, 1, 0, 1);
    let zx = r(0, 0, 0, 1) + r(0, 1, 0, 0) - r(1, 0, 1, 1) - r(1, 1, 1, 0);

    CorrelationMatrix::new([[xx, 0.0, xz], [0.0, yy, 0.0], [zx, 0.0, zz]])
}

/// `M` = sum of the two largest eigenvalues of `TᵀT`, and `2√M`.
pub fn horodecki_bound(t: &CorrelationMatrix) -> BellBound {
    let eig = symmetric_eigenvalues(&t.gram());
    let m_value = (eig[1] + eig[2]).max(0.0);
    BellBound {
        m_value,
        bound: 2.0 * m_value.sqrt(),
        gram_eigenvalues: eig,
    }
}

/// For `T` with only the `xx, yy, zz, xz, zx` components nonzero, the
/// spectrum of `TᵀT` splits into `T_yy²` and the eigenvalues of the 2x2
/// block in the `(x, z)` plane. Returns them ascending, or `None` when `T`
/// does not have that sparsity.
pub fn block_spectrum(t: &CorrelationMatrix) -> Option<[f64; 3]> {
    let g = t.t();
    let off_plane = [g[0][1], g[1][0], g[1][2], g[2][1]];
    if off_plane.iter().any(|v| *v != 0.0) {
        return None;
    }
    let (xx, yy, zz, xz, zx) = (g[0][0], g[1][1], g[2][2], g[0][2], g[2][0]);
    let block = symmetric_eigenvalues_2(xx * xx + zx * zx, xx * xz + zx * zz, xz * xz + zz * zz);
    let mut eig = [yy * yy, block[0], block[1]];
    eig.sort_by(|a, b| a.total_cmp(b));
    Some(eig)
}

fn check_unit(v: &[f64; 3]) -> Result<()> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > DIRECTION_TOL {
        return Err(Error::NonUnitDirection(norm));
    }
    Ok(())
}

fn bilinear(t: &CorrelationMatrix, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(t.apply(b)).map(|(x, y)| x * y).sum()
}

/// `⟨AB⟩ + ⟨AB'⟩ + ⟨A'B⟩ − ⟨A'B'⟩` for spin observables along unit
/// directions, each correlation being `aᵀ T b`.
pub fn chsh_value(
    t: &CorrelationMatrix,
    a: &[f64; 3],
    a2: &[f64; 3],
    b: &[f64; 3],
    b2: &[f64; 3],
) -> Result<f64> {
    for v in [a, a2, b, b2] {
        check_unit(v)?;
    }
    Ok(bilinear(t, a, b) + bilinear(t, a, b2) + bilinear(t, a2, b) - bilinear(t, a2, b2))
}

/// Bound reached by XOR rows with Bob tied to Alice on `n` Werner pairs.
///
/// With `D = (1−x)ⁿ + (1+x)ⁿ`: `T_xx = T_yy = −(2x)ⁿ/D`,
/// `T_zz = ((1−x)ⁿ − (1+x)ⁿ)/D`, and the bound is
/// `2√(T_yy² + max(T_xx², T_zz²))`.
pub fn xor_bound_closed_form(n: usize, x: SingletFraction) -> Result<f64> {
    if n == 0 {
        return Err(Error::PairCount {
            n,
            min: 1,
            max: usize::MAX,
        });
    }
    let x = x.value();
    let exp = n as i32;
    let d = (1.0 - x).powi(exp) + (1.0 + x).powi(exp);
    let txx = -(2.0 * x).powi(exp) / d;
    let tzz = ((1.0 - x).powi(exp) - (1.0 + x).powi(exp)) / d;
    Ok(2.0 * (txx * txx + (txx * txx).max(tzz * tzz)).sqrt())
}
