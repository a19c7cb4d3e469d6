//! Multi-start maximization of the CHSH bound over row pairs.
//!
//! A row pair is parameterized by two unconstrained raw vectors that are
//! orthonormalized by Gram-Schmidt before every evaluation, so Powell's
//! method runs without constraints. Bob's rows are either tied to Alice's
//! (sign pattern `(−1)^(ν + popcount(b))`) or carry their own raw vectors.
//!
//! The maxima are not isolated points: rotating the two rows into each other
//! or rotating any tested pair's basis on both sides leaves `M` unchanged.
//! Only values are compared, never locations.

mod powell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chsh::{correlation_matrix, horodecki_bound, xor_bound_closed_form, BellBound};
use crate::protocol::{tie_partner_rows, xor_rows, PartyMajorComposite, RowPair};
use crate::states::SingletFraction;
use crate::{Error, Result};

pub use powell::{PowellOutcome, LINE_TOLERANCE};

/// Largest `n` accepted by [`maximize_bound`]. `n = 5` works but is slow.
pub const MAX_OPTIMIZE_PAIRS: usize = 5;

/// A best value more than this above the XOR bound counts as a different
/// strategy.
pub const STRATEGY_MARGIN: f64 = 1e-7;

const ORTHONORMALIZE_MIN_NORM: f64 = 1e-8;
const RESAMPLE_LIMIT: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationConfig {
    /// Random restarts, not counting the XOR warm start.
    pub restarts: usize,
    pub seed: u64,
    /// Relative change of `M` over one Powell cycle that ends a restart.
    pub rel_tolerance: f64,
    /// Powell cycles per restart.
    pub max_iterations: usize,
    pub include_xor_warm_start: bool,
    pub tie_bob: bool,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            seed: 0,
            rel_tolerance: 1e-10,
            max_iterations: 2000,
            include_xor_warm_start: true,
            tie_bob: true,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Precondition("restarts must be at least 1".into()));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::Precondition("rel_tolerance must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Precondition(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyLabel {
    XorEquivalent,
    General,
}

impl StrategyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::XorEquivalent => "xor_equivalent",
            Self::General => "general",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub n: usize,
    pub x: f64,
    pub best_rows: RowPair,
    pub best_partner: RowPair,
    pub bell: BellBound,
    pub success_probability: f64,
    /// Bound reached by each restart; the XOR warm start, when enabled, is
    /// entry 0 and caller-supplied starts come last.
    pub restart_values: Vec<f64>,
    pub best_restart: usize,
    pub strategy_label: StrategyLabel,
    pub xor_bound: f64,
    pub evaluations: usize,
    /// Restarts that hit the Powell cycle budget.
    pub unconverged_restarts: usize,
}

/// Unit `u0 = raw0/‖raw0‖` and the normalized Gram-Schmidt remainder of
/// `raw1`.
pub fn orthonormalize(raw0: &[f64], raw1: &[f64]) -> Result<RowPair> {
    let norm0 = raw0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm0 > ORTHONORMALIZE_MIN_NORM) {
        return Err(Error::Degenerate(format!(
            "first vector has norm {norm0:e}"
        )));
    }
    let u0: Vec<f64> = raw0.iter().map(|v| v / norm0).collect();
    let overlap: f64 = u0.iter().zip(raw1).map(|(a, b)| a * b).sum();
    let rest: Vec<f64> = raw1.iter().zip(&u0).map(|(b, a)| b - overlap * a).collect();
    let norm1 = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm1 > ORTHONORMALIZE_MIN_NORM) {
        return Err(Error::Degenerate(format!(
            "second vector has orthogonal remainder {norm1:e}"
        )));
    }
    let u1 = rest.into_iter().map(|v| v / norm1).collect();
    RowPair::new(u0, u1)
}

/// Powell minimization with the tolerance and cycle budget of `config`.
pub fn powell_minimize<F>(objective: F, start: &[f64], config: &OptimizationConfig) -> PowellOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    powell::powell(
        objective,
        start,
        config.rel_tolerance,
        config.max_iterations,
    )
}

/// Maps a raw parameter vector to Alice's and Bob's row pairs.
#[derive(Debug, Clone, Copy)]
struct Parameterization {
    dim: usize,
    tie_bob: bool,
}

impl Parameterization {
    fn len(&self) -> usize {
        if self.tie_bob {
            2 * self.dim
        } else {
            4 * self.dim
        }
    }

    fn rows(&self, p: &[f64]) -> Result<(RowPair, RowPair)> {
        let d = self.dim;
        let u = orthonormalize(&p[..d], &p[d..2 * d])?;
        let v = if self.tie_bob {
            tie_partner_rows(&u)
        } else {
            orthonormalize(&p[2 * d..3 * d], &p[3 * d..4 * d])?
        };
        Ok((u, v))
    }

    fn xor_start(&self, n: usize) -> Vec<f64> {
        let u = xor_rows(n).expect("n validated");
        self.point(&u, &tie_partner_rows(&u))
    }

    /// Raw vector reproducing the given rows (orthonormal rows are fixed
    /// points of Gram-Schmidt). Bob's rows are dropped when tied.
    fn point(&self, u: &RowPair, v: &RowPair) -> Vec<f64> {
        let mut p = [u.u0(), u.u1()].concat();
        if !self.tie_bob {
            p.extend_from_slice(v.u0());
            p.extend_from_slice(v.u1());
        }
        p
    }
}

/// `M` of the state left after post-selection, or `None` when the rows are
/// degenerate or the selection never succeeds.
fn m_of(composite: &PartyMajorComposite, u: &RowPair, v: &RowPair) -> Option<f64> {
    let reduced = composite.reduce(u, v).ok()?;
    let t = correlation_matrix(&reduced.rho_new).ok()?;
    Some(horodecki_bound(&t).m_value)
}

struct Problem {
    n: usize,
    composite: PartyMajorComposite,
    param: Parameterization,
}

struct RestartOutcome {
    m_value: f64,
    point: Vec<f64>,
    evaluations: usize,
    converged: bool,
}

impl Problem {
    fn new(n: usize, x: SingletFraction, tie_bob: bool) -> Result<Self> {
        if !(1..=MAX_OPTIMIZE_PAIRS).contains(&n) {
            return Err(Error::PairCount {
                n,
                min: 1,
                max: MAX_OPTIMIZE_PAIRS,
            });
        }
        Ok(Self {
            n,
            composite: PartyMajorComposite::werner(n, x)?,
            param: Parameterization {
                dim: 1 << n,
                tie_bob,
            },
        })
    }

    fn objective(&self, p: &[f64]) -> f64 {
        // Degenerate points score as M = 0, the smallest possible value.
        match self.param.rows(p) {
            Ok((u, v)) => -m_of(&self.composite, &u, &v).unwrap_or(0.0),
            Err(_) => 0.0,
        }
    }

    /// Start of restart `index`: the XOR rows for index 0 when the warm start
    /// is on, otherwise i.i.d. standard normal components from stream
    /// `index` of the master seed.
    fn start(&self, index: usize, config: &OptimizationConfig) -> Result<Vec<f64>> {
        if index == 0 && config.include_xor_warm_start {
            return Ok(self.param.xor_start(self.n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index as u64);
        for _ in 0..RESAMPLE_LIMIT {
            let p: Vec<f64> = (0..self.param.len())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            if self.param.rows(&p).is_ok() {
                return Ok(p);
            }
        }
        Err(Error::Optimizer(format!(
            "restart {index}: no non-degenerate start after {RESAMPLE_LIMIT} draws"
        )))
    }

    fn run_restart(&self, index: usize, config: &OptimizationConfig) -> Result<RestartOutcome> {
        let start = self.start(index, config)?;
        Ok(self.run_from(&start, config))
    }

    fn run_from(&self, start: &[f64], config: &OptimizationConfig) -> RestartOutcome {
        let out = powell_minimize(|p| self.objective(p), start, config);
        RestartOutcome {
            m_value: (-out.value).max(0.0),
            point: out.point,
            evaluations: out.evaluations,
            converged: out.converged,
        }
    }

    fn restart_indices(&self, config: &OptimizationConfig) -> std::ops::Range<usize> {
        if config.include_xor_warm_start {
            0..config.restarts + 1
        } else {
            1..config.restarts + 1
        }
    }
}

/// Maximizes the CHSH bound of the post-selected state of `n` Werner pairs
/// over real row pairs.
///
/// Restarts run in parallel; the best one is chosen by value with the lowest
/// restart index winning ties, so the result does not depend on scheduling.
pub fn maximize_bound(
    n: usize,
    x: SingletFraction,
    config: &OptimizationConfig,
) -> Result<OptimizationResult> {
    maximize_bound_from(n, x, config, &[])
}

/// [`maximize_bound`] with extra starting row pairs `(alice, bob)` run after
/// the regular restarts, e.g. the optimum at a neighbouring `x`. Bob's rows
/// are ignored when they are tied to Alice's.
pub fn maximize_bound_from(
    n: usize,
    x: SingletFraction,
    config: &OptimizationConfig,
    starts: &[(RowPair, RowPair)],
) -> Result<OptimizationResult> {
    config.validate()?;
    let problem = Problem::new(n, x, config.tie_bob)?;
    for (u, v) in starts {
        if u.n() != n || v.n() != n {
            return Err(Error::Dimension(format!(
                "start rows for n={} and n={}, expected n={n}",
                u.n(),
                v.n()
            )));
        }
    }
    let regular: Vec<usize> = problem.restart_indices(config).collect();
    let first_extra = regular.last().map_or(0, |&i| i + 1);
    let indices: Vec<usize> = regular
        .iter()
        .copied()
        .chain(first_extra..first_extra + starts.len())
        .collect();
    let outcomes: Vec<RestartOutcome> = indices
        .par_iter()
        .map(|&i| match i.checked_sub(first_extra) {
            Some(k) => {
                Ok(problem.run_from(&problem.param.point(&starts[k].0, &starts[k].1), config))
            }
            None => problem.run_restart(i, config),
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, o) in outcomes.iter().enumerate() {
        if o.m_value > outcomes[best].m_value {
            best = k;
        }
    }
    let winner = &outcomes[best];
    let (u, v) = problem.param.rows(&winner.point)?;
    let reduced = problem.composite.reduce(&u, &v)?;
    let bell = horodecki_bound(&correlation_matrix(&reduced.rho_new)?);
    let xor_bound = xor_bound_closed_form(n, x)?;

    Ok(OptimizationResult {
        n,
        x: x.value(),
        best_rows: u,
        best_partner: v,
        bell,
        success_probability: reduced.success_probability,
        restart_values: outcomes.iter().map(|o| 2.0 * o.m_value.sqrt()).collect(),
        best_restart: indices[best],
        strategy_label: if bell.bound <= xor_bound + STRATEGY_MARGIN {
            StrategyLabel::XorEquivalent
        } else {
            StrategyLabel::General
        },
        xor_bound,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        unconverged_restarts: outcomes.iter().filter(|o| !o.converged).count(),
    })
}

/// Whether any restart beats the XOR bound by more than `tol`. Restarts are
/// examined in index order in chunks and the search stops at the first
/// chunk containing a success, so the answer is the same as running every
/// restart.
fn beats_xor(
    problem: &Problem,
    x: SingletFraction,
    config: &OptimizationConfig,
    tol: f64,
) -> Result<bool> {
    let threshold = xor_bound_closed_form(problem.n, x)? + tol;
    let indices: Vec<usize> = problem.restart_indices(config).collect();
    let chunk = rayon::current_num_threads().max(1);
    for block in indices.chunks(chunk) {
        let found = block
            .par_iter()
            .map(|&i| {
                problem
                    .run_restart(i, config)
                    .map(|o| 2.0 * o.m_value.sqrt() > threshold)
            })
            .collect::<Result<Vec<bool>>>()?;
        if found.into_iter().any(|b| b) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Where the optimum leaves the XOR manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossover {
    pub n: usize,
    /// Smallest probed `x` where some restart beats XOR by more than `tol`;
    /// `None` when no probe did.
    pub x_star: Option<f64>,
    /// Largest probed `x` where no restart beat XOR.
    pub lower: f64,
    pub resolution: f64,
    /// Every probe `(x, beats_xor)` in evaluation order.
    pub probes: Vec<(f64, bool)>,
}

/// Grid resolution the bisection refines to.
pub const CROSSOVER_RESOLUTION: f64 = 0.004;

const CROSSOVER_SCAN: [f64; 9] = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

/// Smallest singlet fraction where optimized rows beat the XOR rows by more
/// than `tol`.
///
/// A coarse downward scan finds a point above the crossover (at `x = 1` both
/// reach Tsirelson's bound, so the scan starts at 0.9), then bisection
/// against `x = 0` (where every row pair gives `M = 0`) narrows the bracket
/// to [`CROSSOVER_RESOLUTION`].
pub fn crossover(n: usize, config: &OptimizationConfig, tol: f64) -> Result<Crossover> {
    config.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let sf = |x: f64| SingletFraction::new(x);
    let mut probes = Vec::new();
    let probe = |x: f64, probes: &mut Vec<(f64, bool)>| -> Result<bool> {
        let problem = Problem::new(n, sf(x)?, config.tie_bob)?;
        let hit = beats_xor(&problem, sf(x)?, config, tol)?;
        probes.push((x, hit));
        Ok(hit)
    };

    let mut hi = None;
    for &x in &CROSSOVER_SCAN {
        if probe(x, &mut probes)? {
            hi = Some(x);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(Crossover {
            n,
            x_star: None,
            lower: CROSSOVER_SCAN[0],
            resolution: CROSSOVER_RESOLUTION,
            probes,
        });
    };

    let mut lo = 0.0;
    while hi - lo > CROSSOVER_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Crossover {
        n,
        x_star: Some(hi),
        lower: lo,
        resolution: hi - lo,
        probes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStrategy {
    Xor,
    Optimize,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedPoint {
    pub bound: f64,
    pub success_probability: f64,
    pub strategy_label: StrategyLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub x: f64,
    pub xor_bound: f64,
    pub xor_success_probability: f64,
    /// Present when the sweep optimizes; `Err` carries the failure message.
    pub optimized: Option<std::result::Result<OptimizedPoint, String>>,
}

/// One row per `(n, x)` in lexicographic order. The XOR column comes from
/// the closed forms; optimizer failures are recorded per row without
/// stopping the sweep.
///
/// When optimizing, each `x` after the first also starts from the best rows
/// found at the previous `x` for the same `n`, which keeps a strategy found
/// once from being lost to unlucky restarts further along the curve. Pair
/// counts run in parallel; the `x` grid of one `n` runs in order.
pub fn sweep(
    ns: &[usize],
    x_grid: &[f64],
    config: &OptimizationConfig,
    strategy: SweepStrategy,
) -> Result<Vec<SweepRow>> {
    if ns.is_empty() || x_grid.is_empty() {
        return Err(Error::Precondition("sweep grids must be nonempty".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) || x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(
            "sweep grids must be strictly increasing".into(),
        ));
    }
    let xs = x_grid
        .iter()
        .map(|&x| SingletFraction::new(x))
        .collect::<Result<Vec<_>>>()?;
    for &n in ns {
        if n == 0 || (strategy != SweepStrategy::Xor && n > MAX_OPTIMIZE_PAIRS) {
            return Err(Error::PairCount {
                n,
                min: 1,
                max: MAX_OPTIMIZE_PAIRS,
            });
        }
    }
    let optimize = strategy != SweepStrategy::Xor;

    let per_n: Vec<Vec<SweepRow>> = ns
        .par_iter()
        .map(|&n| -> Result<Vec<SweepRow>> {
            let mut previous: Option<(RowPair, RowPair)> = None;
            let mut rows = Vec::with_capacity(xs.len());
            for &x in &xs {
                let closed = crate::protocol::xor_reduced_closed_form(n, x)?;
                let optimized = if optimize {
                    let starts: Vec<_> = previous.take().into_iter().collect();
                    Some(match maximize_bound_from(n, x, config, &starts) {
                        Ok(r) => {
                            previous = Some((r.best_rows.clone(), r.best_partner.clone()));
                            Ok(OptimizedPoint {
                                bound: r.bell.bound,
                                success_probability: r.success_probability,
                                strategy_label: r.strategy_label,
                            })
                        }
                        Err(e) => Err(e.to_string()),
                    })
                } else {
                    None
                };
                rows.push(SweepRow {
                    n,
                    x: x.value(),
                    xor_bound: xor_bound_closed_form(n, x)?,
                    xor_success_probability: closed.success_probability,
                    optimized,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(x: f64) -> SingletFraction {
        SingletFraction::new(x).unwrap()
    }

    fn small(restarts: usize) -> OptimizationConfig {
        OptimizationConfig {
            restarts,
            ..OptimizationConfig::default()
        }
    }

    #[test]
    fn orthonormalize_examples() {
        let e = |dim: usize, i: usize| {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            v
        };
        assert_eq!(
            orthonormalize(&e(4, 0), &e(4, 3)).unwrap(),
            xor_rows(2).unwrap()
        );

        let r = orthonormalize(&[2.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.u0(), &[1.0, 0.0]);
        assert_eq!(r.u1(), &[0.0, 1.0]);

        assert!(matches!(
            orthonormalize(&[1.0, 2.0], &[-2.0, -4.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            orthonormalize(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizationConfig::default().validate().is_ok());
        assert!(small(0).validate().is_err());
        let bad = OptimizationConfig {
            rel_tolerance: 0.0,
            ..OptimizationConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_pair_bound_is_constant_over_rows() {
        // n = 1: every row pair is a local rotation of the Werner state, so
        // M = 2x² everywhere.
        let problem = Problem::new(1, sf(0.5), true).unwrap();
        let out = powell_minimize(
            |p| problem.objective(p),
            &[0.3, -1.2, 0.8, 0.4],
            &OptimizationConfig::default(),
        );
        assert!((-out.value - 0.5).abs() < 1e-9);
        let r = maximize_bound(1, sf(0.5), &small(4)).unwrap();
        assert!((r.bell.m_value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_pairs_stay_on_xor() {
        let r = maximize_bound(2, sf(0.6), &small(8)).unwrap();
        assert!(
            (r.bell.bound - 4.0 * 0.6 / 1.36f64.sqrt()).abs() < 1e-6,
            "{}",
            r.bell.bound
        );
        assert_eq!(r.strategy_label, StrategyLabel::XorEquivalent);
        let max = r.restart_values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((r.bell.bound - max).abs() < 1e-12);
    }

    #[test]
    fn three_pairs_at_half_stay_on_xor() {
        let r = maximize_bound(3, sf(0.5), &small(8)).unwrap();
        let want = 2.0 * ((2.0f64 / 7.0).powi(2) + (13.0f64 / 14.0).powi(2)).sqrt();
        assert!((r.bell.bound - want).abs() < 1e-6, "{}", r.bell.bound);
        assert_eq!(r.strategy_label, StrategyLabel::XorEquivalent);
    }

    #[test]
    fn three_pairs_at_high_fraction_leave_xor() {
        let r = maximize_bound(3, sf(0.8), &small(8)).unwrap();
        let xor = xor_bound_closed_form(3, sf(0.8)).unwrap();
        assert!(r.bell.bound > xor + 1e-3, "{} vs {xor}", r.bell.bound);
        assert_eq!(r.strategy_label, StrategyLabel::General);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let c = small(1);
        assert!(sweep(&[], &[0.5], &c, SweepStrategy::Xor).is_err());
        assert!(sweep(&[1], &[], &c, SweepStrategy::Xor).is_err());
        assert!(sweep(&[2, 1], &[0.5], &c, SweepStrategy::Xor).is_err());
        assert!(sweep(&[1], &[0.5, 0.4], &c, SweepStrategy::Xor).is_err());
        assert!(sweep(&[1], &[1.5], &c, SweepStrategy::Xor).is_err());
        assert!(sweep(&[6], &[0.5], &c, SweepStrategy::Optimize).is_err());
    }

    #[test]
    fn sweep_single_pair_line() {
        let rows = sweep(&[1], &[0.0, 0.5, 1.0], &small(1), SweepStrategy::Xor).unwrap();
        let bounds: Vec<f64> = rows.iter().map(|r| r.xor_bound).collect();
        let want = [0.0, 2f64.sqrt(), 2.0 * 2f64.sqrt()];
        for (b, w) in bounds.iter().zip(want) {
            assert!((b - w).abs() < 1e-14);
        }
        assert!(rows.iter().all(|r| r.optimized.is_none()));
    }
}
