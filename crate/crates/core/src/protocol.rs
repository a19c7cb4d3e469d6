//! Local row-pair transformations, spin-up post-selection and the reduced
//! state of the first pair.
//!
//! Bit-order conventions:
//! - A row vector component index `a = (m, m', m'', …)` is encoded as
//!   `m·2^(n−1) + m'·2^(n−2) + …`, so the first pair is the most significant
//!   bit.
//! - A [`CompositeDensity`] is pair-major: its row index carries the bits
//!   `(m, n, m', n', …)`, most significant first.
//! - A [`PartyMajorComposite`] reorders those bits to `(m, m', …, n, n', …)`
//!   so Alice's and Bob's row matrices contract against contiguous halves.
//!
//! Only the two rows of each local unitary that lead to "all tested spins up"
//! (output indices `00…` and `10…`) matter; they are the two vectors of a
//! [`RowPair`].

use num_complex::Complex64;

use crate::states::{make_werner, SingletFraction, TwoQubitDensity, ZERO};
use crate::{Error, Result};

/// Largest number of pairs any operation accepts (composite 4096x4096).
pub const MAX_PAIRS: usize = 6;

/// Unnormalized traces below this count as a post-selection that never
/// succeeds.
pub const DEGENERATE_TRACE: f64 = 1e-14;

const ROW_TOL: f64 = 1e-10;

pub(crate) fn check_pair_count(n: usize) -> Result<()> {
    if (1..=MAX_PAIRS).contains(&n) {
        Ok(())
    } else {
        Err(Error::PairCount {
            n,
            min: 1,
            max: MAX_PAIRS,
        })
    }
}

/// The two retained rows `(U_0, U_1)` of a local `2ⁿ`-dimensional
/// transformation: real, unit norm and mutually orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RowPair {
    n: usize,
    rows: [Vec<f64>; 2],
}

impl RowPair {
    pub fn new(u0: Vec<f64>, u1: Vec<f64>) -> Result<Self> {
        let n = pairs_for_dimension(u0.len())?;
        if u1.len() != u0.len() {
            return Err(Error::Dimension(format!(
                "rows of length {} and {}",
                u0.len(),
                u1.len()
            )));
        }
        let pair = Self { n, rows: [u0, u1] };
        let (n0, n1, overlap) = pair.orthonormality_defects();
        if n0 > ROW_TOL || n1 > ROW_TOL || overlap > ROW_TOL {
            return Err(Error::InvalidRows(format!(
                "norm defects ({n0:e}, {n1:e}), overlap {overlap:e}"
            )));
        }
        Ok(pair)
    }

    pub(crate) fn new_unchecked(n: usize, u0: Vec<f64>, u1: Vec<f64>) -> Self {
        Self { n, rows: [u0, u1] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn u0(&self) -> &[f64] {
        &self.rows[0]
    }

    pub fn u1(&self) -> &[f64] {
        &self.rows[1]
    }

    pub fn row(&self, mu: usize) -> &[f64] {
        &self.rows[mu]
    }

    /// `(|‖u0‖ − 1|, |‖u1‖ − 1|, |u0·u1|)`.
    pub fn orthonormality_defects(&self) -> (f64, f64, f64) {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let [u0, u1] = &self.rows;
        (
            (dot(u0, u0).sqrt() - 1.0).abs(),
            (dot(u1, u1).sqrt() - 1.0).abs(),
            dot(u0, u1).abs(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn pairs_for_dimension(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "row length {len} is not 2^n with n >= 1"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_pair_count(n)?;
    Ok(n)
}

/// Rows of the XOR transformation: `U_0 = e_{00…0}`, `U_1 = e_{11…1}`.
pub fn xor_rows(n: usize) -> Result<RowPair> {
    check_pair_count(n)?;
    let dim = 1 << n;
    let mut u0 = vec![0.0; dim];
    let mut u1 = vec![0.0; dim];
    u0[0] = 1.0;
    u1[dim - 1] = 1.0;
    Ok(RowPair::new_unchecked(n, u0, u1))
}

/// Bob's rows tied to Alice's: `V_{ν,b} = (−1)^(ν + popcount(b)) U_{ν,b}`.
pub fn tie_partner_rows(u: &RowPair) -> RowPair {
    let rows = [0usize, 1].map(|nu| {
        u.row(nu)
            .iter()
            .enumerate()
            .map(|(b, &val)| {
                if (nu + b.count_ones() as usize).is_multiple_of(2) {
                    val
                } else {
                    -val
                }
            })
            .collect::<Vec<_>>()
    });
    let [v0, v1] = rows;
    RowPair::new_unchecked(u.n, v0, v1)
}

/// Rotates the two rows into each other by `alpha`:
/// `u0' = u0 cos α − u1 sin α`, `u1' = u0 sin α + u1 cos α`.
pub fn gauge_rotate(u: &RowPair, alpha: f64) -> RowPair {
    let (s, c) = alpha.sin_cos();
    let (u0, u1): (Vec<f64>, Vec<f64>) = u
        .u0()
        .iter()
        .zip(u.u1())
        .map(|(&a, &b)| (a * c - b * s, a * s + b * c))
        .unzip();
    RowPair::new_unchecked(u.n, u0, u1)
}

/// Applies the same real rotation by `beta` to bit `k` (1 = first pair) of
/// the component index of all four vectors. For Werner pairs this leaves the
/// reduced state unchanged.
pub fn pair_gauge_rotate(
    u: &RowPair,
    v: &RowPair,
    k: usize,
    beta: f64,
) -> Result<(RowPair, RowPair)> {
    if u.n != v.n {
        return Err(Error::Dimension(format!(
            "row pairs for {} and {} pairs",
            u.n, v.n
        )));
    }
    if k < 1 || k > u.n {
        return Err(Error::PairIndex { k, n: u.n });
    }
    let bit = 1usize << (u.n - k);
    let (s, c) = beta.sin_cos();
    let rotate = |row: &[f64]| {
        let mut out = row.to_vec();
        for lo in (0..row.len()).filter(|i| i & bit == 0) {
            let hi = lo | bit;
            out[lo] = c * row[lo] - s * row[hi];
            out[hi] = s * row[lo] + c * row[hi];
        }
        out
    };
    let ru = RowPair::new_unchecked(u.n, rotate(u.u0()), rotate(u.u1()));
    let rv = RowPair::new_unchecked(v.n, rotate(v.u0()), rotate(v.u1()));
    Ok((ru, rv))
}

/// Dense tensor product of `n` pair states in pair-major bit order.
#[derive(Debug, Clone)]
pub struct CompositeDensity {
    n: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl CompositeDensity {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length `4ⁿ`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

/// `ρ ⊗ ρ' ⊗ ρ'' ⊗ …` with the first pair most significant.
pub fn assemble_composite(pairs: &[TwoQubitDensity]) -> Result<CompositeDensity> {
    check_pair_count(pairs.len())?;
    let mut dim = 1usize;
    let mut entries = vec![Complex64::new(1.0, 0.0)];
    for rho in pairs {
        let next_dim = dim * 4;
        let mut next = vec![ZERO; next_dim * next_dim];
        for r in 0..dim {
            for c in 0..dim {
                let outer = entries[r * dim + c];
                if outer == ZERO {
                    continue;
                }
                for (i, row) in rho.entries().iter().enumerate() {
                    for (j, &val) in row.iter().enumerate() {
                        next[(4 * r + i) * next_dim + 4 * c + j] = outer * val;
                    }
                }
            }
        }
        dim = next_dim;
        entries = next;
    }
    Ok(CompositeDensity {
        n: pairs.len(),
        dim,
        entries,
    })
}

/// Index bijection from pair-major `(m, n, m', n', …)` to party-major
/// `(m, m', …, n, n', …)` bit order over `2n` bits.
pub fn party_major_permutation(n: usize) -> Vec<usize> {
    (0..1usize << (2 * n))
        .map(|pm| {
            let mut alice = 0;
            let mut bob = 0;
            for k in 0..n {
                let pair_bits = (pm >> (2 * (n - 1 - k))) & 0b11;
                alice = (alice << 1) | (pair_bits >> 1);
                bob = (bob << 1) | (pair_bits & 1);
            }
            (alice << n) | bob
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct SparseEntry {
    a: u16,
    b: u16,
    c: u16,
    d: u16,
    value: Complex64,
}

/// Nonzero entries of a composite state reordered to party-major bit order,
/// ready to contract against Alice's and Bob's row pairs.
///
/// Build it once per set of pairs and reuse it for many row pairs.
#[derive(Debug, Clone)]
pub struct PartyMajorComposite {
    n: usize,
    entries: Vec<SparseEntry>,
    real: bool,
}

impl PartyMajorComposite {
    pub fn new(pairs: &[TwoQubitDensity]) -> Result<Self> {
        let n = pairs.len();
        check_pair_count(n)?;
        let perm = party_major_permutation(n);
        let mask = (1usize << n) - 1;

        let per_pair: Vec<Vec<(usize, usize, Complex64)>> = pairs
            .iter()
            .map(|rho| {
                let mut nz = Vec::with_capacity(16);
                for (i, row) in rho.entries().iter().enumerate() {
                    for (j, &val) in row.iter().enumerate() {
                        if val != ZERO {
                            nz.push((i, j, val));
                        }
                    }
                }
                nz
            })
            .collect();

        let mut entries = Vec::new();
        if per_pair.iter().all(|nz| !nz.is_empty()) {
            let mut digits = vec![0usize; n];
            'odometer: loop {
                let mut row = 0;
                let mut col = 0;
                let mut value = Complex64::new(1.0, 0.0);
                for (nz, &dgt) in per_pair.iter().zip(&digits) {
                    let (i, j, val) = nz[dgt];
                    row = 4 * row + i;
                    col = 4 * col + j;
                    value *= val;
                }
                let (r, c) = (perm[row], perm[col]);
                entries.push(SparseEntry {
                    a: (r >> n) as u16,
                    b: (r & mask) as u16,
                    c: (c >> n) as u16,
                    d: (c & mask) as u16,
                    value,
                });

                for k in (0..n).rev() {
                    digits[k] += 1;
                    if digits[k] < per_pair[k].len() {
                        continue 'odometer;
                    }
                    digits[k] = 0;
                }
                break;
            }
        }

        let real = entries.iter().all(|e| e.value.im == 0.0);
        Ok(Self { n, entries, real })
    }

    /// `n` identical Werner pairs.
    pub fn werner(n: usize, x: SingletFraction) -> Result<Self> {
        Self::new(&vec![make_werner(x); n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nonzeros(&self) -> usize {
        self.entries.len()
    }

    /// Unnormalized post-selected 4x4 matrix
    /// `Σ U_{μ,a} V_{ν,b} ρ_{(ab),(cd)} U_{σ,c} V_{τ,d}`.
    pub fn contract(&self, u: &RowPair, v: &RowPair) -> Result<[[Complex64; 4]; 4]> {
        if u.n != self.n || v.n != self.n {
            return Err(Error::Dimension(format!(
                "row pairs for ({}, {}) pairs, composite of {}",
                u.n, v.n, self.n
            )));
        }
        let (u0, u1, v0, v1) = (u.u0(), u.u1(), v.u0(), v.u1());

        if self.real {
            let mut acc = [[0.0f64; 4]; 4];
            for e in &self.entries {
                let (a, b, c, d) = (e.a as usize, e.b as usize, e.c as usize, e.d as usize);
                let ua = [u0[a], u1[a]];
                let uc = [u0[c], u1[c]];
                let vb = [v0[b], v1[b]];
                let vd = [v0[d], v1[d]];
                for mu in 0..2 {
                    for nu in 0..2 {
                        let left = e.value.re * ua[mu] * vb[nu];
                        if left == 0.0 {
                            continue;
                        }
                        let row = &mut acc[2 * mu + nu];
                        row[0] += left * uc[0] * vd[0];
                        row[1] += left * uc[0] * vd[1];
                        row[2] += left * uc[1] * vd[0];
                        row[3] += left * uc[1] * vd[1];
                    }
                }
            }
            return Ok(acc.map(|row| row.map(|re| Complex64::new(re, 0.0))));
        }

        let mut acc = [[ZERO; 4]; 4];
        for e in &self.entries {
            let (a, b, c, d) = (e.a as usize, e.b as usize, e.c as usize, e.d as usize);
            let ua = [u0[a], u1[a]];
            let uc = [u0[c], u1[c]];
            let vb = [v0[b], v1[b]];
            let vd = [v0[d], v1[d]];
            for mu in 0..2 {
                for nu in 0..2 {
                    let left = e.value * (ua[mu] * vb[nu]);
                    for sigma in 0..2 {
                        for tau in 0..2 {
                            acc[2 * mu + nu][2 * sigma + tau] += left * (uc[sigma] * vd[tau]);
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    pub fn reduce(&self, u: &RowPair, v: &RowPair) -> Result<ReducedState> {
        ReducedState::from_unnormalized(self.contract(u, v)?)
    }
}

/// Post-selected two-qubit state of the first pair and the probability that
/// every spin-up test succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub rho_new: TwoQubitDensity,
    pub success_probability: f64,
}

impl ReducedState {
    /// Normalizes an unnormalized post-selected matrix; its trace is the
    /// success probability.
    pub fn from_unnormalized(unnormalized: [[Complex64; 4]; 4]) -> Result<Self> {
        let trace: f64 = (0..4).map(|i| unnormalized[i][i].re).sum();
        if !(trace >= DEGENERATE_TRACE) {
            return Err(Error::DegenerateSelection(trace));
        }
        let rho = unnormalized.map(|row| row.map(|z| z / trace));
        Ok(Self {
            rho_new: TwoQubitDensity::from_entries_unchecked(rho),
            success_probability: trace,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.rho_new
            .max_abs_diff(&other.rho_new)
            .max((self.success_probability - other.success_probability).abs())
    }
}

/// Reduced state of the first pair after Alice applies `u`, Bob applies `v`
/// and both keep only runs where all other particles show spin up.
pub fn reduce_pairs(pairs: &[TwoQubitDensity], u: &RowPair, v: &RowPair) -> Result<ReducedState> {
    if u.n != pairs.len() || v.n != pairs.len() {
        return Err(Error::Dimension(format!(
            "{} pairs with row pairs for ({}, {})",
            pairs.len(),
            u.n,
            v.n
        )));
    }
    PartyMajorComposite::new(pairs)?.reduce(u, v)
}

/// Closed form of the reduced state for `n` identical Werner pairs under XOR
/// rows with Bob tied to Alice.
///
/// With `a = ((1−x)/4)ⁿ`, `b = ((1+x)/4)ⁿ`: diagonal `(a, b, b, a)/(2a + 2b)`,
/// coherence `−(x/2)ⁿ/(2a + 2b)` between `|01⟩` and `|10⟩`, success
/// probability `2(a + b)`.
pub fn xor_reduced_closed_form(n: usize, x: SingletFraction) -> Result<ReducedState> {
    if n == 0 {
        return Err(Error::PairCount {
            n,
            min: 1,
            max: usize::MAX,
        });
    }
    let x = x.value();
    let exp = n as i32;
    let a = ((1.0 - x) / 4.0).powi(exp);
    let b = ((1.0 + x) / 4.0).powi(exp);
    let coherence = (x / 2.0).powi(exp);
    let mut unnormalized = [[ZERO; 4]; 4];
    unnormalized[0][0] = Complex64::new(a, 0.0);
    unnormalized[1][1] = Complex64::new(b, 0.0);
    unnormalized[2][2] = Complex64::new(b, 0.0);
    unnormalized[3][3] = Complex64::new(a, 0.0);
    unnormalized[1][2] = Complex64::new(-coherence, 0.0);
    unnormalized[2][1] = Complex64::new(-coherence, 0.0);
    ReducedState::from_unnormalized(unnormalized)
}

pub fn werner_pairs(n: usize, x: SingletFraction) -> Vec<TwoQubitDensity> {
    vec![make_werner(x); n]
}
