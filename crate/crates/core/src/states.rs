//! Werner pairs, singlets and two-qubit density matrices.
//!
//! A two-qubit density matrix is stored as a 4x4 complex array indexed by the
//! composite row `2m + n` and column `2s + t`, where `m, s` are Alice's spin
//! indices and `n, t` Bob's. Index value 0 is spin up, 1 is spin down.

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::hermitian_eigenvalues_4;
use crate::{Error, Result};

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weight of the singlet projector in a Werner mixture, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SingletFraction(f64);

impl SingletFraction {
    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Self(x))
        } else {
            Err(Error::SingletFractionDomain(x))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SingletFraction {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

/// Density matrix of one Alice/Bob pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity {
    entries: [[Complex64; 4]; 4],
}

/// Tolerances a [`TwoQubitDensity`] built through [`TwoQubitDensity::new`]
/// must meet.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

impl TwoQubitDensity {
    /// Builds a density matrix, checking Hermiticity, unit trace and positive
    /// semidefiniteness.
    pub fn new(entries: [[Complex64; 4]; 4]) -> Result<Self> {
        let d = validate_entries(&entries);
        if d.hermiticity_defect > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!(
                "hermiticity defect {:e}",
                d.hermiticity_defect
            )));
        }
        if d.trace_defect > TRACE_TOL {
            return Err(Error::InvalidDensity(format!(
                "trace defect {:e}",
                d.trace_defect
            )));
        }
        if d.min_eigenvalue < -PSD_TOL {
            return Err(Error::InvalidDensity(format!(
                "minimum eigenvalue {:e}",
                d.min_eigenvalue
            )));
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: [[f64; 4]; 4]) -> Result<Self> {
        Self::new(entries.map(|row| row.map(|v| Complex64::new(v, 0.0))))
    }

    /// Wraps entries without any checks. Downstream operations accept
    /// arbitrary matrices; use [`validate_density`] to inspect them.
    pub fn from_entries_unchecked(entries: [[Complex64; 4]; 4]) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[[Complex64; 4]; 4] {
        &self.entries
    }

    /// `ρ_{mn,st}`.
    pub fn get(&self, m: usize, n: usize, s: usize, t: usize) -> Complex64 {
        self.entries[2 * m + n][2 * s + t]
    }

    pub fn trace(&self) -> Complex64 {
        (0..4).map(|i| self.entries[i][i]).sum()
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        let mut acc = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                acc += self.entries[i][j] * self.entries[j][i];
            }
        }
        acc.re
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.entries.iter().flatten().all(|z| z.im.abs() <= tol)
    }

    /// `(A ⊗ B) ρ (A ⊗ B)†` for single-particle operators `A` (Alice) and
    /// `B` (Bob).
    pub fn local_transform(&self, a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Self {
        let mut k = [[ZERO; 4]; 4];
        for m in 0..2 {
            for n in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        k[2 * m + n][2 * s + t] = a[m][s] * b[n][t];
                    }
                }
            }
        }
        let mut tmp = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                tmp[i][j] = (0..4).map(|l| k[i][l] * self.entries[l][j]).sum();
            }
        }
        let mut out = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|l| tmp[i][l] * k[j][l].conj()).sum();
            }
        }
        Self { entries: out }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Werner state `x·S + (1 − x)·𝟙/4`.
pub fn make_werner(x: SingletFraction) -> TwoQubitDensity {
    let x = x.value();
    let mut e = [[ZERO; 4]; 4];
    let random = (1.0 - x) / 4.0;
    for (i, row) in e.iter_mut().enumerate() {
        row[i] = Complex64::new(random, 0.0);
    }
    // Singlet components live on |01⟩ and |10⟩ only.
    e[1][1] += Complex64::new(0.5 * x, 0.0);
    e[2][2] += Complex64::new(0.5 * x, 0.0);
    e[1][2] = Complex64::new(-0.5 * x, 0.0);
    e[2][1] = Complex64::new(-0.5 * x, 0.0);
    TwoQubitDensity { entries: e }
}

pub fn make_singlet() -> TwoQubitDensity {
    make_werner(SingletFraction(1.0))
}

/// Total singlet content `(3x + 1)/4`, counting the singlet share of the
/// random component.
pub fn fidelity(x: SingletFraction) -> f64 {
    (3.0 * x.value() + 1.0) / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityDiagnostics {
    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub hermiticity_defect: f64,
    /// `|Tr ρ − 1|`.
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Reports how far `entries` is from a valid density matrix. Passes iff the
/// Hermiticity and trace defects are at most `tol` and the smallest
/// eigenvalue is at least `-tol`.
pub fn validate_density(entries: &[[Complex64; 4]; 4], tol: f64) -> DensityDiagnostics {
    let mut d = validate_entries(entries);
    d.passed = d.hermiticity_defect <= tol && d.trace_defect <= tol && d.min_eigenvalue >= -tol;
    d
}

fn validate_entries(entries: &[[Complex64; 4]; 4]) -> DensityDiagnostics {
    let mut herm: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            herm = herm.max((entries[i][j] - entries[j][i].conj()).norm());
        }
    }
    let trace: Complex64 = (0..4).map(|i| entries[i][i]).sum();
    let eig = hermitian_eigenvalues_4(entries);
    DensityDiagnostics {
        hermiticity_defect: herm,
        trace_defect: (trace - 1.0).norm(),
        min_eigenvalue: eig[0],
        passed: false,
    }
}
