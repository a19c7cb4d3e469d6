//! Naive reference implementations.
//!
//! Nothing here shares index arithmetic with [`crate::protocol`]: the
//! brute-force reduction walks every index tuple of the contraction
//! directly, and the dense route multiplies full matrices built in
//! pair-major order. The suites compare these against the fast paths.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chsh::{
    chsh_value, correlation_matrix, correlation_matrix_symmetric, horodecki_bound,
    xor_bound_closed_form, CorrelationMatrix, TSIRELSON,
};
use crate::optimize::orthonormalize;
use crate::protocol::{
    assemble_composite, gauge_rotate, pair_gauge_rotate, reduce_pairs, tie_partner_rows,
    xor_reduced_closed_form, xor_rows, ReducedState, RowPair,
};
use crate::states::{make_werner, validate_density, SingletFraction, TwoQubitDensity};
use crate::{Error, Result};

/// Largest `n` for the full index loop (`16ⁿ` terms).
pub const BRUTE_FORCE_MAX_PAIRS: usize = 4;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Row pair with complex components, orthonormal under the Hermitian inner
/// product.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRowPair {
    n: usize,
    rows: [Vec<Complex64>; 2],
}

impl ComplexRowPair {
    pub fn new(u0: Vec<Complex64>, u1: Vec<Complex64>) -> Result<Self> {
        if u0.len() != u1.len() || u0.len() < 2 || !u0.len().is_power_of_two() {
            return Err(Error::Dimension(format!(
                "complex rows of length {} and {}",
                u0.len(),
                u1.len()
            )));
        }
        let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        let d0 = (inner(&u0, &u0).re - 1.0).abs();
        let d1 = (inner(&u1, &u1).re - 1.0).abs();
        let overlap = inner(&u0, &u1).norm();
        if d0 > 1e-10 || d1 > 1e-10 || overlap > 1e-10 {
            return Err(Error::InvalidRows(format!(
                "complex rows not orthonormal ({d0:e}, {d1:e}, {overlap:e})"
            )));
        }
        Ok(Self {
            n: u0.len().trailing_zeros() as usize,
            rows: [u0, u1],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, mu: usize) -> &[Complex64] {
        &self.rows[mu]
    }
}

impl From<&RowPair> for ComplexRowPair {
    fn from(r: &RowPair) -> Self {
        let lift = |row: &[f64]| row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self {
            n: r.n(),
            rows: [lift(r.u0()), lift(r.u1())],
        }
    }
}

fn spin_of(index: usize, n: usize, pair: usize) -> usize {
    // Pair 0 is the most significant bit of a row-vector index.
    (index >> (n - 1 - pair)) & 1
}

/// Reduced state by direct summation over every `(a, b, c, d)`:
/// `N·Σ U_{μ,a} V_{ν,b} Π_k ρ^(k)_{a_k b_k, c_k d_k} U*_{σ,c} V*_{τ,d}`.
pub fn brute_force_reduce(
    pairs: &[TwoQubitDensity],
    u: &ComplexRowPair,
    v: &ComplexRowPair,
) -> Result<ReducedState> {
    let n = pairs.len();
    if n == 0 || n > BRUTE_FORCE_MAX_PAIRS {
        return Err(Error::PairCount {
            n,
            min: 1,
            max: BRUTE_FORCE_MAX_PAIRS,
        });
    }
    if u.n != n || v.n != n {
        return Err(Error::Dimension(format!(
            "{n} pairs with rows for ({}, {})",
            u.n, v.n
        )));
    }
    let dim = 1usize << n;
    let mut out = [[C0; 4]; 4];
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let mut product = Complex64::new(1.0, 0.0);
                    for (k, rho) in pairs.iter().enumerate() {
                        product *= rho.get(
                            spin_of(a, n, k),
                            spin_of(b, n, k),
                            spin_of(c, n, k),
                            spin_of(d, n, k),
                        );
                        if product == C0 {
                            break;
                        }
                    }
                    if product == C0 {
                        continue;
                    }
                    for mu in 0..2 {
                        for nu in 0..2 {
                            for sigma in 0..2 {
                                for tau in 0..2 {
                                    out[2 * mu + nu][2 * sigma + tau] += u.rows[mu][a]
                                        * v.rows[nu][b]
                                        * product
                                        * u.rows[sigma][c].conj()
                                        * v.rows[tau][d].conj();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    ReducedState::from_unnormalized(out)
}

/// Reduced state through the dense pair-major composite and plain matrix
/// products `W C W†`, with `W_{(μν), r} = U_{μ,a(r)} V_{ν,b(r)}`.
pub fn dense_reduce(
    pairs: &[TwoQubitDensity],
    u: &ComplexRowPair,
    v: &ComplexRowPair,
) -> Result<ReducedState> {
    let n = pairs.len();
    if u.n != n || v.n != n {
        return Err(Error::Dimension(format!(
            "{n} pairs with rows for ({}, {})",
            u.n, v.n
        )));
    }
    let composite = assemble_composite(pairs)?;
    let size = composite.dim();

    // Split a pair-major index (m, n, m', n', …) into Alice's and Bob's
    // row-vector indices.
    let split = |r: usize| -> (usize, usize) {
        let mut alice = 0;
        let mut bob = 0;
        for k in 0..n {
            let shift = 2 * (n - 1 - k);
            alice = 2 * alice + ((r >> (shift + 1)) & 1);
            bob = 2 * bob + ((r >> shift) & 1);
        }
        (alice, bob)
    };
    let mut w = vec![[C0; 4]; size];
    for (r, col) in w.iter_mut().enumerate() {
        let (a, b) = split(r);
        for mu in 0..2 {
            for nu in 0..2 {
                col[2 * mu + nu] = u.rows[mu][a] * v.rows[nu][b];
            }
        }
    }

    // X = W C, then ρ = X W†.
    let mut x = vec![[C0; 4]; size];
    for r in 0..size {
        let wr = w[r];
        if wr.iter().all(|z| *z == C0) {
            continue;
        }
        for (c, xc) in x.iter_mut().enumerate() {
            let val = composite.get(r, c);
            if val == C0 {
                continue;
            }
            for i in 0..4 {
                xc[i] += wr[i] * val;
            }
        }
    }
    let mut out = [[C0; 4]; 4];
    for c in 0..size {
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += x[c][i] * w[c][j].conj();
            }
        }
    }
    ReducedState::from_unnormalized(out)
}

/// Default coarse grid step for [`direct_chsh_max`], in degrees.
pub const DIRECT_COARSE_STEP_DEG: f64 = 5.0;
/// Default refinement passes for [`direct_chsh_max`].
pub const DIRECT_REFINE_ITERATIONS: usize = 100;

fn unit_from_angles(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn angles_from_unit(v: &[f64; 3]) -> (f64, f64) {
    (v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]))
}

fn normalized(v: [f64; 3]) -> Option<[f64; 3]> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    (norm > 1e-15).then(|| v.map(|c| c / norm))
}

fn add(a: &[f64; 3], b: &[f64; 3], sign: f64) -> [f64; 3] {
    [a[0] + sign * b[0], a[1] + sign * b[1], a[2] + sign * b[2]]
}

fn transpose(t: &CorrelationMatrix) -> CorrelationMatrix {
    let m = t.t();
    let mut tt = [[0.0; 3]; 3];
    for (p, row) in tt.iter_mut().enumerate() {
        for (q, cell) in row.iter_mut().enumerate() {
            *cell = m[q][p];
        }
    }
    CorrelationMatrix::new(tt).expect("transpose keeps entries in range")
}

fn settings_value(t: &CorrelationMatrix, angles: &[f64; 8]) -> f64 {
    let a = unit_from_angles(angles[0], angles[1]);
    let a2 = unit_from_angles(angles[2], angles[3]);
    let b = unit_from_angles(angles[4], angles[5]);
    let b2 = unit_from_angles(angles[6], angles[7]);
    chsh_value(t, &a, &a2, &b, &b2).expect("angles give unit vectors")
}

/// Largest CHSH value found by searching measurement directions directly.
///
/// Every direction `a` on a spherical grid of `coarse_step` degrees seeds a
/// few rounds of alternating exact maximization (for fixed `a, a'` the best
/// `b ∝ Tᵀ(a + a')`, `b' ∝ Tᵀ(a − a')`, and symmetrically for Alice). The
/// best seed is then polished by coordinate search over the eight spherical
/// angles with step halving, `refine_iterations` passes. Only improvements
/// are accepted, so the result never decreases with more passes, and it is
/// an attained CHSH value, hence never above the Horodecki bound.
pub fn direct_chsh_max(
    rho: &TwoQubitDensity,
    coarse_step: f64,
    refine_iterations: usize,
) -> Result<f64> {
    if !(coarse_step > 0.0 && coarse_step <= 90.0) {
        return Err(Error::Precondition(format!(
            "coarse step {coarse_step} degrees outside (0, 90]"
        )));
    }
    let t = correlation_matrix(rho)?;
    let tt = transpose(&t);
    let step = coarse_step.to_radians();
    let polar_steps = (180.0 / coarse_step).round() as usize;
    let azimuth_steps = (360.0 / coarse_step).round() as usize;

    let mut best_value = f64::NEG_INFINITY;
    let mut best_angles = [0.0; 8];
    for i in 0..=polar_steps {
        for j in 0..azimuth_steps {
            let theta = (i as f64 * step).min(std::f64::consts::PI);
            let mut a = unit_from_angles(theta, j as f64 * step);
            let helper = if a[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let cross = [
                a[1] * helper[2] - a[2] * helper[1],
                a[2] * helper[0] - a[0] * helper[2],
                a[0] * helper[1] - a[1] * helper[0],
            ];
            let mut a2 = normalized(cross).expect("helper not parallel to a");
            let mut b = a;
            let mut b2 = a2;
            for _ in 0..6 {
                b = normalized(tt.apply(&add(&a, &a2, 1.0))).unwrap_or(b);
                b2 = normalized(tt.apply(&add(&a, &a2, -1.0))).unwrap_or(b2);
                a = normalized(t.apply(&add(&b, &b2, 1.0))).unwrap_or(a);
                a2 = normalized(t.apply(&add(&b, &b2, -1.0))).unwrap_or(a2);
            }
            let mut angles = [0.0; 8];
            for (k, vec) in [a, a2, b, b2].iter().enumerate() {
                let (th, ph) = angles_from_unit(vec);
                angles[2 * k] = th;
                angles[2 * k + 1] = ph;
            }
            let value = settings_value(&t, &angles);
            if value > best_value {
                best_value = value;
                best_angles = angles;
            }
        }
    }

    let mut delta = step;
    for _ in 0..refine_iterations {
        let mut improved = false;
        for k in 0..8 {
            for sign in [1.0, -1.0] {
                let mut trial = best_angles;
                trial[k] += sign * delta;
                let value = settings_value(&t, &trial);
                if value > best_value {
                    best_value = value;
                    best_angles = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    Ok(best_value)
}

/// Worst deviation over a batch of randomized comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub case_count: usize,
    pub tolerance: f64,
    pub max_abs_deviation: f64,
    pub failures: Vec<(String, f64)>,
}

impl OracleReport {
    fn collect(tolerance: f64, cases: Vec<(String, f64, bool)>) -> Self {
        let max_abs_deviation = cases.iter().map(|c| c.1).fold(0.0, f64::max);
        let case_count = cases.len();
        let failures = cases
            .into_iter()
            .filter(|c| !c.2)
            .map(|(name, dev, _)| (name, dev))
            .collect();
        Self {
            case_count,
            tolerance,
            max_abs_deviation,
            failures,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Tolerances of the equivalence suite categories.
pub const REDUCTION_TOL: f64 = 1e-13;
pub const SYMMETRIC_TOL: f64 = 1e-13;
pub const DIRECT_ATTAIN_TOL: f64 = 1e-3;
pub const DIRECT_CEILING_TOL: f64 = 1e-9;
pub const CLOSED_FORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub seed: u64,
    pub case_count: usize,
    /// Fast reduction against the brute-force loop.
    pub reduction: OracleReport,
    /// Symmetric-state formulas against the Pauli trace formula.
    pub symmetric_path: OracleReport,
    /// Horodecki bound against directly searched settings; the deviation is
    /// `bound − direct`.
    pub direct_settings: OracleReport,
    /// XOR closed forms against the full pipeline.
    pub closed_forms: OracleReport,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.reduction.passed()
            && self.symmetric_path.passed()
            && self.direct_settings.passed()
            && self.closed_forms.passed()
    }
}

fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

/// Random real orthonormal row pair from Gaussian raw vectors.
pub fn random_rows<R: Rng>(n: usize, rng: &mut R) -> RowPair {
    let dim = 1usize << n;
    loop {
        let raw: Vec<f64> = (0..2 * dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(r) = orthonormalize(&raw[..dim], &raw[dim..]) {
            return r;
        }
    }
}

/// Random complex orthonormal row pair from Gaussian raw vectors.
pub fn random_complex_rows<R: Rng>(n: usize, rng: &mut R) -> ComplexRowPair {
    let dim = 1usize << n;
    let mut draw = || -> Vec<Complex64> {
        (0..dim)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect()
    };
    let raw0 = draw();
    let raw1 = draw();
    let norm0 = raw0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let u0: Vec<Complex64> = raw0.iter().map(|z| z / norm0).collect();
    let overlap: Complex64 = u0.iter().zip(&raw1).map(|(a, b)| a.conj() * b).sum();
    let rest: Vec<Complex64> = raw1.iter().zip(&u0).map(|(b, a)| b - overlap * a).collect();
    let norm1 = rest.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let u1 = rest.iter().map(|z| z / norm1).collect();
    ComplexRowPair::new(u0, u1).expect("Gram-Schmidt output is orthonormal")
}

/// Random real symmetric density matrix `AAᵀ/Tr(AAᵀ)`.
pub fn random_real_density<R: Rng>(rng: &mut R) -> TwoQubitDensity {
    let a: Vec<f64> = (0..16).map(|_| StandardNormal.sample(rng)).collect();
    let mut e = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            e[i][j] = (0..4).map(|k| a[4 * i + k] * a[4 * j + k]).sum();
        }
    }
    let trace: f64 = (0..4).map(|i| e[i][i]).sum();
    let scaled = e.map(|row| row.map(|v| v / trace));
    // Symmetrize exactly after scaling.
    let mut sym = scaled;
    for i in 0..4 {
        for j in 0..i {
            sym[i][j] = scaled[j][i];
        }
    }
    TwoQubitDensity::from_real(sym).expect("Gram matrices are valid densities")
}

fn random_werner_pairs<R: Rng>(n: usize, rng: &mut R) -> Vec<TwoQubitDensity> {
    (0..n)
        .map(|_| make_werner(SingletFraction::new(rng.random::<f64>()).expect("in [0,1)")))
        .collect()
}

/// Signature of a reduction under test.
pub type ReduceFn = dyn Fn(&[TwoQubitDensity], &RowPair, &RowPair) -> Result<ReducedState> + Sync;

/// Randomized comparison of every fast path against its oracle.
pub fn run_equivalence_suite(seed: u64, case_count: usize) -> Result<EquivalenceReport> {
    run_equivalence_suite_with(seed, case_count, &reduce_pairs)
}

/// [`run_equivalence_suite`] with the reduction under test supplied by the
/// caller, so the suite itself can be checked against a corrupted fast path.
pub fn run_equivalence_suite_with(
    seed: u64,
    case_count: usize,
    reduce: &ReduceFn,
) -> Result<EquivalenceReport> {
    if case_count == 0 {
        return Err(Error::Precondition("case_count must be at least 1".into()));
    }

    type Case = (
        (String, f64, bool),
        (String, f64, bool),
        (String, f64, bool),
        (String, f64, bool),
    );
    let cases: Vec<Case> = (0..case_count)
        .into_par_iter()
        .map(|i| -> Result<Case> {
            let mut rng = case_rng(seed, i);

            // (a) fast reduction vs brute force, n ≤ 3, random rows and x.
            let n = 1 + i % 3;
            let pairs = random_werner_pairs(n, &mut rng);
            let u = random_rows(n, &mut rng);
            let v = random_rows(n, &mut rng);
            let fast = reduce(&pairs, &u, &v)?;
            let slow = brute_force_reduce(&pairs, &(&u).into(), &(&v).into())?;
            let dev = fast.max_abs_diff(&slow);
            let a = (
                format!("reduction case {i} (n={n})"),
                dev,
                dev <= REDUCTION_TOL,
            );

            // (b) symmetric-state formulas on a random real symmetric state.
            let rho = random_real_density(&mut rng);
            let dev = correlation_matrix(&rho)?.max_abs_diff(&correlation_matrix_symmetric(&rho)?);
            let b = (
                format!("symmetric path case {i}"),
                dev,
                dev <= SYMMETRIC_TOL,
            );

            // (c) Horodecki bound vs direct search on the brute-force state.
            let bound = horodecki_bound(&correlation_matrix(&slow.rho_new)?).bound;
            let direct = direct_chsh_max(
                &slow.rho_new,
                DIRECT_COARSE_STEP_DEG,
                DIRECT_REFINE_ITERATIONS,
            )?;
            let gap = bound - direct;
            let c = (
                format!("direct settings case {i} (n={n})"),
                gap.abs(),
                (-DIRECT_CEILING_TOL..=DIRECT_ATTAIN_TOL).contains(&gap),
            );

            // (d) XOR closed forms vs pipeline, n ≤ 5.
            let n = 1 + i % 5;
            let x = SingletFraction::new(rng.random::<f64>()).expect("in [0,1)");
            let rows = xor_rows(n)?;
            let pipeline = reduce(&vec![make_werner(x); n], &rows, &tie_partner_rows(&rows))?;
            let closed = xor_reduced_closed_form(n, x)?;
            let bound_dev = (horodecki_bound(&correlation_matrix(&pipeline.rho_new)?).bound
                - xor_bound_closed_form(n, x)?)
            .abs();
            let dev = pipeline.max_abs_diff(&closed).max(bound_dev);
            let d = (
                format!("closed form case {i} (n={n}, x={})", x.value()),
                dev,
                dev <= CLOSED_FORM_TOL,
            );
            Ok((a, b, c, d))
        })
        .collect::<Result<_>>()?;

    let mut by_category: [Vec<(String, f64, bool)>; 4] = Default::default();
    for (a, b, c, d) in cases {
        by_category[0].push(a);
        by_category[1].push(b);
        by_category[2].push(c);
        by_category[3].push(d);
    }
    let [a, b, c, d] = by_category;
    Ok(EquivalenceReport {
        seed,
        case_count,
        reduction: OracleReport::collect(REDUCTION_TOL, a),
        symmetric_path: OracleReport::collect(SYMMETRIC_TOL, b),
        direct_settings: OracleReport::collect(DIRECT_ATTAIN_TOL, c),
        closed_forms: OracleReport::collect(CLOSED_FORM_TOL, d),
    })
}

pub const GAUGE_TOL: f64 = 1e-10;
pub const PAIR_GAUGE_TOL: f64 = 1e-12;
pub const VALIDITY_TOL: f64 = 1e-10;
pub const CEILING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub seed: u64,
    pub case_count: usize,
    /// `|ΔM|` after independent rotations of Alice's and Bob's two rows.
    pub row_gauge: OracleReport,
    /// Entrywise change of the reduced state after rotating one pair's basis
    /// on both sides.
    pub pair_gauge: OracleReport,
    /// Worst of Hermiticity/trace defect and negative eigenvalue of reduced
    /// states; success probabilities outside `(0, 1]` fail outright.
    pub validity: OracleReport,
    /// Amount by which a bound exceeds `2√2` (0 when below).
    pub ceiling: OracleReport,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.row_gauge.passed()
            && self.pair_gauge.passed()
            && self.validity.passed()
            && self.ceiling.passed()
    }
}

/// Gauge invariance, density validity and Tsirelson ceiling over random
/// Werner pairs (`n ≤ 4`) and random real row pairs.
pub fn run_invariance_suite(seed: u64, case_count: usize) -> Result<InvarianceReport> {
    if case_count == 0 {
        return Err(Error::Precondition("case_count must be at least 1".into()));
    }
    type Case = (
        (String, f64, bool),
        (String, f64, bool),
        (String, f64, bool),
        (String, f64, bool),
    );
    let cases: Vec<Case> = (0..case_count)
        .into_par_iter()
        .map(|i| -> Result<Case> {
            // Separate stream family from the equivalence suite.
            let mut rng = case_rng(seed ^ 0x9e37_79b9_7f4a_7c15, i);
            let n = 1 + i % 4;
            let pairs = random_werner_pairs(n, &mut rng);
            let u = random_rows(n, &mut rng);
            let v = if rng.random::<bool>() {
                tie_partner_rows(&u)
            } else {
                random_rows(n, &mut rng)
            };
            let base = reduce_pairs(&pairs, &u, &v)?;
            let base_bound = horodecki_bound(&correlation_matrix(&base.rho_new)?);

            let alpha = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let alpha2 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let rotated =
                reduce_pairs(&pairs, &gauge_rotate(&u, alpha), &gauge_rotate(&v, alpha2))?;
            let rotated_bound = horodecki_bound(&correlation_matrix(&rotated.rho_new)?);
            let dev = (rotated_bound.m_value - base_bound.m_value).abs();
            let g1 = (format!("row gauge case {i} (n={n})"), dev, dev <= GAUGE_TOL);

            let k = rng.random_range(1..=n);
            let beta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let (ru, rv) = pair_gauge_rotate(&u, &v, k, beta)?;
            let dev = reduce_pairs(&pairs, &ru, &rv)?.max_abs_diff(&base);
            let g2 = (
                format!("pair gauge case {i} (n={n}, k={k})"),
                dev,
                dev <= PAIR_GAUGE_TOL,
            );

            let diag = validate_density(base.rho_new.entries(), VALIDITY_TOL);
            let worst = diag
                .hermiticity_defect
                .max(diag.trace_defect)
                .max((-diag.min_eigenvalue).max(0.0));
            let prob_ok = base.success_probability > 0.0 && base.success_probability <= 1.0 + 1e-12;
            let valid = (
                format!("validity case {i} (n={n})"),
                worst,
                diag.passed && prob_ok,
            );

            let excess = (base_bound.bound.max(rotated_bound.bound) - TSIRELSON).max(0.0);
            let ceiling = (
                format!("ceiling case {i} (n={n})"),
                excess,
                excess <= CEILING_TOL && base_bound.bound >= 0.0,
            );
            Ok((g1, g2, valid, ceiling))
        })
        .collect::<Result<_>>()?;

    let mut by_category: [Vec<(String, f64, bool)>; 4] = Default::default();
    for (a, b, c, d) in cases {
        by_category[0].push(a);
        by_category[1].push(b);
        by_category[2].push(c);
        by_category[3].push(d);
    }
    let [a, b, c, d] = by_category;
    Ok(InvarianceReport {
        seed,
        case_count,
        row_gauge: OracleReport::collect(GAUGE_TOL, a),
        pair_gauge: OracleReport::collect(PAIR_GAUGE_TOL, b),
        validity: OracleReport::collect(VALIDITY_TOL, c),
        ceiling: OracleReport::collect(CEILING_TOL, d),
    })
}

/// Best bound over `samples` random complex row pairs (independent for
/// Alice and Bob) on `n` identical Werner pairs. Numerical evidence only on
/// whether complex rows can beat real ones.
pub fn complex_rows_probe(n: usize, x: SingletFraction, samples: usize, seed: u64) -> Result<f64> {
    let pairs = vec![make_werner(x); n];
    let mut best: f64 = 0.0;
    for s in 0..samples {
        let mut rng = case_rng(seed, s);
        let u = random_complex_rows(n, &mut rng);
        let v = random_complex_rows(n, &mut rng);
        match brute_force_reduce(&pairs, &u, &v) {
            Ok(r) => {
                best = best.max(horodecki_bound(&correlation_matrix(&r.rho_new)?).bound);
            }
            Err(Error::DegenerateSelection(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::make_singlet;

    fn sf(x: f64) -> SingletFraction {
        SingletFraction::new(x).unwrap()
    }

    #[test]
    fn identity_rows_leave_single_pair_alone() {
        let rows: ComplexRowPair = (&xor_rows(1).unwrap()).into();
        let w = make_werner(sf(0.3));
        let r = brute_force_reduce(std::slice::from_ref(&w), &rows, &rows).unwrap();
        assert!((r.success_probability - 1.0).abs() < 1e-15);
        assert!(r.rho_new.max_abs_diff(&w) < 1e-15);
    }

    #[test]
    fn brute_force_two_pair_xor() {
        let u = xor_rows(2).unwrap();
        let v = tie_partner_rows(&u);
        let pairs = vec![make_werner(sf(0.5)); 2];
        let slow = brute_force_reduce(&pairs, &(&u).into(), &(&v).into()).unwrap();
        assert!((slow.success_probability - 0.3125).abs() < 1e-15);
        let e = slow.rho_new.entries();
        assert!((e[0][0].re - 0.05).abs() < 1e-15);
        assert!((e[1][1].re - 0.45).abs() < 1e-15);
        assert!((e[1][2].re + 0.2).abs() < 1e-15);
        let fast = reduce_pairs(&pairs, &u, &v).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-13);
    }

    #[test]
    fn brute_force_agrees_with_fast_path_on_random_three_pair_rows() {
        let mut rng = case_rng(11, 0);
        let pairs = vec![make_werner(sf(0.4)); 3];
        for _ in 0..20 {
            let u = random_rows(3, &mut rng);
            let v = random_rows(3, &mut rng);
            let fast = reduce_pairs(&pairs, &u, &v).unwrap();
            let slow = brute_force_reduce(&pairs, &(&u).into(), &(&v).into()).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-13);
        }
    }

    #[test]
    fn brute_force_caps_pair_count() {
        let rows: ComplexRowPair = (&xor_rows(5).unwrap()).into();
        let pairs = vec![make_werner(sf(0.5)); 5];
        assert!(matches!(
            brute_force_reduce(&pairs, &rows, &rows),
            Err(Error::PairCount { .. })
        ));
    }

    #[test]
    fn dense_route_matches_closed_form_at_five_pairs() {
        let u = xor_rows(5).unwrap();
        let v = tie_partner_rows(&u);
        let pairs = vec![make_werner(sf(0.5)); 5];
        let dense = dense_reduce(&pairs, &(&u).into(), &(&v).into()).unwrap();
        let closed = xor_reduced_closed_form(5, sf(0.5)).unwrap();
        assert!(dense.max_abs_diff(&closed) < 1e-13);
        assert!((dense.success_probability - 488.0 / 32768.0).abs() < 1e-15);
    }

    #[test]
    fn complex_rows_must_be_orthonormal() {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        assert!(ComplexRowPair::new(vec![one, z], vec![i, z]).is_err());
        assert!(ComplexRowPair::new(vec![one, z], vec![z, i]).is_ok());
    }

    #[test]
    fn direct_search_on_singlet() {
        let v = direct_chsh_max(&make_singlet(), 5.0, 50).unwrap();
        assert!((v - TSIRELSON).abs() < 1e-4, "{v}");
        assert!(v <= TSIRELSON + 1e-9);
    }

    #[test]
    fn direct_search_on_werner() {
        let v = direct_chsh_max(&make_werner(sf(0.5)), 5.0, 100).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-3, "{v}");
    }

    #[test]
    fn direct_search_sees_five_pair_violation() {
        let r = xor_reduced_closed_form(5, sf(0.5)).unwrap();
        let v = direct_chsh_max(&r.rho_new, 5.0, 100).unwrap();
        assert!((v - 2.000873).abs() < 1e-3, "{v}");
        assert!(v > 2.0);
    }

    #[test]
    fn direct_search_is_monotone_in_refinement() {
        let mut rng = case_rng(5, 0);
        let u = random_rows(2, &mut rng);
        let v = random_rows(2, &mut rng);
        let r = reduce_pairs(&vec![make_werner(sf(0.7)); 2], &u, &v).unwrap();
        let mut last = f64::NEG_INFINITY;
        for passes in [0, 1, 2, 5, 10, 50, 100] {
            let val = direct_chsh_max(&r.rho_new, 15.0, passes).unwrap();
            assert!(val >= last);
            last = val;
        }
    }

    #[test]
    fn suite_rejects_zero_cases() {
        assert!(run_equivalence_suite(1, 0).is_err());
        assert!(run_invariance_suite(1, 0).is_err());
    }

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = run_equivalence_suite(1, 12).unwrap();
        assert!(a.passed(), "{a:#?}");
        let b = run_equivalence_suite(1, 12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn suite_detects_corrupted_fast_path() {
        let corrupted = |pairs: &[TwoQubitDensity], u: &RowPair, v: &RowPair| {
            let mut r = reduce_pairs(pairs, u, v)?;
            let mut e = *r.rho_new.entries();
            e[1][2] = -e[1][2];
            e[2][1] = -e[2][1];
            r.rho_new = TwoQubitDensity::from_entries_unchecked(e);
            Ok(r)
        };
        let report = run_equivalence_suite_with(1, 6, &corrupted).unwrap();
        assert!(!report.passed());
        assert!(!report.reduction.failures.is_empty());
        assert!(!report.closed_forms.failures.is_empty());
    }

    #[test]
    fn invariance_suite_passes() {
        let r = run_invariance_suite(3, 24).unwrap();
        assert!(r.passed(), "{r:#?}");
    }
}
