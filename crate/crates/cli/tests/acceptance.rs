//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the report stays
//! readable under `cargo test`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use collective_chsh::oracle::{
    run_invariance_suite, DIRECT_COARSE_STEP_DEG, DIRECT_REFINE_ITERATIONS,
};
use collective_chsh::protocol::{werner_pairs, xor_reduced_closed_form};
use collective_chsh::{
    correlation_matrix, dense_reduce, direct_chsh_max, horodecki_bound, maximize_bound,
    reduce_pairs, run_equivalence_suite, tie_partner_rows, xor_bound_closed_form, xor_rows,
    OptimizationConfig, SingletFraction, StrategyLabel,
};
use collective_chsh_cli::{
    cmd_bound, cmd_crossover, cmd_sweep, sweep_lines, BoundArgs, CrossoverArgs, Format, Strategy,
    SweepArgs, SweepLine,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn sf(x: f64) -> SingletFraction {
    SingletFraction::new(x).expect("x in [0, 1]")
}

/// Bound of the post-selected pair for XOR rows through the fast reduction.
fn pipeline_bound(n: usize, x: f64) -> Result<f64, String> {
    let u = xor_rows(n).map_err(|e| e.to_string())?;
    let v = tie_partner_rows(&u);
    let reduced = reduce_pairs(&werner_pairs(n, sf(x)), &u, &v).map_err(|e| e.to_string())?;
    let t = correlation_matrix(&reduced.rho_new).map_err(|e| e.to_string())?;
    Ok(horodecki_bound(&t).bound)
}

/// Root of `f(x) = 2` in `[lo, hi]` for increasing `f`, by bisection.
fn crossing<F: Fn(f64) -> Result<f64, String>>(
    f: F,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, String> {
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn single_pair_line() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let b = pipeline_bound(1, x)?;
        worst = worst.max((b - 2.0 * 2f64.sqrt() * x).abs());
    }
    let root = crossing(|x| pipeline_bound(1, x), 0.5, 0.9)?;
    let dev = (root - FRAC_1_SQRT_2).abs();
    let detail =
        format!("max |bound - 2√2·x| = {worst:.2e}, crossing at {root:.9} (|Δ| = {dev:.1e})");
    if worst <= 1e-9 && dev <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn two_pair_optimality() -> Check {
    let started = Instant::now();
    let config = OptimizationConfig::default();
    let mut worst: f64 = 0.0;
    let mut labels_ok = true;
    for i in 1..=9 {
        let x = i as f64 / 10.0;
        let r = maximize_bound(2, sf(x), &config).map_err(|e| e.to_string())?;
        worst = worst.max((r.bell.bound - 4.0 * x / (1.0 + x * x).sqrt()).abs());
        labels_ok &= r.strategy_label == StrategyLabel::XorEquivalent;
    }
    let elapsed = started.elapsed();
    let detail = format!(
        "max |opt - 4x/√(1+x²)| = {worst:.2e}, all xor_equivalent: {labels_ok}, {:.1} s",
        elapsed.as_secs_f64()
    );
    if worst <= 1e-6 && labels_ok && elapsed <= Duration::from_secs(120) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn five_pair_violation() -> Check {
    let x = sf(0.5);
    let closed = xor_bound_closed_form(5, x).map_err(|e| e.to_string())?;
    let closed_state = xor_reduced_closed_form(5, x).map_err(|e| e.to_string())?;
    let u = xor_rows(5).map_err(|e| e.to_string())?;
    let v = tie_partner_rows(&u);
    let pairs = werner_pairs(5, x);
    let fast = reduce_pairs(&pairs, &u, &v).map_err(|e| e.to_string())?;
    let dense = dense_reduce(&pairs, &(&u).into(), &(&v).into()).map_err(|e| e.to_string())?;
    let bound_of = |rho| -> Result<f64, String> {
        Ok(horodecki_bound(&correlation_matrix(rho).map_err(|e| e.to_string())?).bound)
    };
    let b_fast = bound_of(&fast.rho_new)?;
    let b_dense = bound_of(&dense.rho_new)?;
    let b_state = bound_of(&closed_state.rho_new)?;
    let direct = direct_chsh_max(
        &fast.rho_new,
        DIRECT_COARSE_STEP_DEG,
        DIRECT_REFINE_ITERATIONS,
    )
    .map_err(|e| e.to_string())?;
    let spread = [b_fast, b_dense, b_state]
        .iter()
        .map(|b| (b - closed).abs())
        .fold(0.0, f64::max);
    let expected_p = 488.0 / 32768.0;
    let p_dev = [
        fast.success_probability,
        dense.success_probability,
        closed_state.success_probability,
    ]
    .iter()
    .map(|p| (p - expected_p).abs())
    .fold(0.0, f64::max);
    let direct_gap = closed - direct;
    let detail = format!(
        "bound {closed:.10} (fast/dense/closed spread {spread:.1e}, direct settings {direct:.7}), \
         success prob {:.10} (|Δ| = {p_dev:.1e}); printed 2.0087 differs by {:.7}",
        fast.success_probability,
        2.0087 - closed
    );
    let ok = closed > 2.0
        && b_fast > 2.0
        && spread <= 1e-12
        && (-1e-9..=1e-3).contains(&direct_gap)
        && p_dev <= 1e-12
        && (closed - 2.0 * (14897.0f64 / 14884.0).sqrt()).abs() <= 1e-12;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn crossovers() -> Check {
    let started = Instant::now();
    let mut found = Vec::new();
    let mut ok = true;
    for (n, target) in [(3usize, 0.57), (4, 0.52)] {
        let out = cmd_crossover(&CrossoverArgs {
            pairs: n,
            tol: 1e-4,
            restarts: 128,
            seed: 0,
        });
        let json: serde_json::Value =
            serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
        let x_star = json["x_star"].as_f64();
        let resolution = json["resolution"].as_f64().unwrap_or(f64::INFINITY);
        match x_star {
            Some(xs) => {
                ok &= out.code == 0 && (xs - target).abs() <= 0.03 && resolution <= 0.005;
                found.push(format!(
                    "n={n}: x* = {xs:.4} (target {target} ± 0.03, resolution {resolution:.4})"
                ));
            }
            None => {
                ok = false;
                found.push(format!("n={n}: not found (exit {})", out.code));
            }
        }
    }
    let elapsed = started.elapsed();
    ok &= elapsed <= Duration::from_secs(480);
    let detail = format!(
        "{}; {:.0} s at 128 restarts",
        found.join(", "),
        elapsed.as_secs_f64()
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn curves(lines: &[SweepLine], ns: &[usize]) -> Result<Vec<Vec<(f64, f64)>>, String> {
    ns.iter()
        .map(|&n| {
            lines
                .iter()
                .filter(|l| l.n == n)
                .map(|l| {
                    l.bound
                        .map(|b| (l.x, b))
                        .ok_or(format!("NA at n={n}, x={}", l.x))
                })
                .collect()
        })
        .collect()
}

fn curve_properties(curves: &[Vec<(f64, f64)>], slack: f64) -> (bool, bool) {
    let increasing_in_n = curves.windows(2).all(|w| {
        w[0].iter()
            .zip(&w[1])
            .filter(|(a, _)| a.0 > 0.0 && a.0 < 1.0)
            .all(|(a, b)| b.1 > a.1)
    });
    let nondecreasing_in_x = curves
        .iter()
        .all(|c| c.windows(2).all(|w| w[1].1 >= w[0].1 - slack));
    (increasing_in_n, nondecreasing_in_x)
}

fn figure_one() -> Check {
    let started = Instant::now();
    let ns = [1usize, 2, 3, 4];
    let grid_args = |strategy, restarts| SweepArgs {
        pairs: ns.to_vec(),
        x_min: 0.0,
        x_max: 1.0,
        x_step: 0.01,
        strategy,
        restarts,
        seed: 0,
        out: None,
    };
    let lines = sweep_lines(&grid_args(Strategy::Optimize, 4)).map_err(|o| o.stderr)?;
    let opt = curves(&lines, &ns)?;
    let xor = curves(
        &sweep_lines(&grid_args(Strategy::Xor, 0)).map_err(|o| o.stderr)?,
        &ns,
    )?;
    let (inc_n, nondec_x) = curve_properties(&opt, 1e-9);
    let above_xor = opt
        .iter()
        .zip(&xor)
        .all(|(o, x)| o.iter().zip(x).all(|(a, b)| a.1 >= b.1 - 1e-9));

    // Thresholds: first grid x whose optimized bound exceeds 2, and the
    // exact crossing of the XOR curves (XOR is optimal there).
    let grid: Vec<f64> = opt
        .iter()
        .map(|c| c.iter().find(|(_, b)| *b > 2.0).map_or(f64::NAN, |p| p.0))
        .collect();
    let exact: Vec<f64> = ns
        .iter()
        .map(|&n| crossing(|x| pipeline_bound(n, x), 0.3, 0.9))
        .collect::<Result<_, _>>()?;
    let derived = [FRAC_1_SQRT_2, 1.0 / 3f64.sqrt(), 0.533_013_75, 0.511_081_08];
    let thresholds_ok = grid.windows(2).all(|w| w[1] < w[0])
        && exact.windows(2).all(|w| w[1] < w[0])
        && exact
            .iter()
            .zip(&derived)
            .all(|(a, b)| (a - b).abs() < 1e-6)
        && grid
            .iter()
            .zip(&exact)
            .all(|(g, e)| *g >= *e && *g - *e < 0.01 + 1e-9);

    let detail =
        format!(
        "{} optimized rows (4 restarts + XOR + continuation); strictly increasing in n: {inc_n}, \
         nondecreasing in x: {nondec_x}, ≥ XOR: {above_xor}; thresholds {} (grid {}); {:.0} s",
        lines.len(),
        exact.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(" > "),
        grid.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>().join(" > "),
        started.elapsed().as_secs_f64()
    );
    if lines.len() == 404 && inc_n && nondec_x && above_xor && thresholds_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Check {
    let r = run_equivalence_suite(1, 200).map_err(|e| e.to_string())?;
    let detail = format!(
        "200 cases: reduction {:.1e}, symmetric path {:.1e}, direct settings {:.1e}, closed forms {:.1e}",
        r.reduction.max_abs_deviation,
        r.symmetric_path.max_abs_deviation,
        r.direct_settings.max_abs_deviation,
        r.closed_forms.max_abs_deviation
    );
    if r.passed() && r.case_count == 200 {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; failures: {:?}",
            r.reduction.failures.first()
        ))
    }
}

fn invariance() -> Check {
    let r = run_invariance_suite(1, 128).map_err(|e| e.to_string())?;
    let detail = format!(
        "128 cases: row gauge {:.1e}, pair gauge {:.1e}, validity {:.1e}, ceiling excess {:.1e}",
        r.row_gauge.max_abs_deviation,
        r.pair_gauge.max_abs_deviation,
        r.validity.max_abs_deviation,
        r.ceiling.max_abs_deviation
    );
    if r.passed() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sweep_bytes = |name: &str, strategy, threads| -> Result<(Vec<u8>, Vec<u8>), String> {
        let out = dir.path().join(name);
        let args = SweepArgs {
            pairs: vec![1, 2, 3],
            x_min: 0.3,
            x_max: 0.9,
            x_step: 0.15,
            strategy,
            restarts: 6,
            seed: 11,
            out: Some(out.clone()),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let o = pool.install(|| cmd_sweep(&args));
        if o.code != 0 {
            return Err(o.stderr);
        }
        let csv = std::fs::read(&out).map_err(|e| e.to_string())?;
        let dat = std::fs::read(collective_chsh_cli::dat_path(&out)).map_err(|e| e.to_string())?;
        Ok((csv, dat))
    };
    let mut identical = true;
    for strategy in [Strategy::Xor, Strategy::Optimize] {
        let a = sweep_bytes("a.csv", strategy, 1)?;
        let b = sweep_bytes("b.csv", strategy, 1)?;
        let c = sweep_bytes("c.csv", strategy, 3)?;
        identical &= a == b && a == c;
    }
    for (strategy, format) in [
        (Strategy::Xor, Format::Json),
        (Strategy::Optimize, Format::Csv),
    ] {
        let args = BoundArgs {
            pairs: 3,
            x: 0.55,
            strategy,
            restarts: 8,
            seed: 7,
            format,
            manifest: None,
        };
        let first = cmd_bound(&args);
        let second = cmd_bound(&args);
        identical &= first.code == 0 && first == second;
    }
    let detail = format!(
        "sweep CSV/.dat and bound output byte-identical across runs and thread counts: {identical}"
    );
    if identical {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("single-pair line", single_pair_line),
        ("two-pair optimality", two_pair_optimality),
        ("five-pair violation at x=0.5", five_pair_violation),
        ("crossovers n=3,4", crossovers),
        ("bound-vs-x curves n=1..4", figure_one),
        ("oracle equivalence", oracle_equivalence),
        ("invariance suites", invariance),
        ("determinism", determinism),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] {}. {name}: {detail} ({:.1} s)",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.0} s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
