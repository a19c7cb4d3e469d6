//! Powell's direction-set minimization with Brent line searches.

use serde::Serialize;

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105_1;
const GLIMIT: f64 = 100.0;
const TINY: f64 = 1e-20;
const ZEPS: f64 = 1e-12;
const BRACKET_STEPS: usize = 60;
const BRENT_STEPS: usize = 100;

/// Fractional tolerance of each line minimization.
pub const LINE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowellOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Completed direction-set cycles.
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration budget ran out before a full cycle improved
    /// the value by less than the relative tolerance.
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, p: &[f64]) -> f64 {
        self.evaluations += 1;
        (self.f)(p)
    }
}

/// Minimizes `objective` from `start`.
///
/// Stops when one full cycle of line minimizations improves the value by
/// less than `rel_tolerance` relative, i.e.
/// `2(f_start − f_end) ≤ rel_tolerance·(|f_start| + |f_end|)`, or after
/// `max_iterations` cycles (reported with `converged = false`). The result
/// depends only on `objective`, `start` and the two limits.
pub fn powell<F>(
    objective: F,
    start: &[f64],
    rel_tolerance: f64,
    max_iterations: usize,
) -> PowellOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut f = Counted {
        f: objective,
        evaluations: 0,
    };
    let mut p = start.to_vec();
    let mut fret = f.eval(&p);
    let mut directions: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut d = vec![0.0; dim];
            d[i] = 1.0;
            d
        })
        .collect();
    let mut pt = p.clone();

    for iteration in 1..=max_iterations {
        let fp = fret;
        let mut biggest = 0;
        let mut biggest_drop = 0.0;
        for (i, dir) in directions.iter_mut().enumerate() {
            let before = fret;
            fret = line_minimize(&mut f, &mut p, dir, fret);
            if before - fret > biggest_drop {
                biggest_drop = before - fret;
                biggest = i;
            }
        }

        if 2.0 * (fp - fret) <= rel_tolerance * (fp.abs() + fret.abs()) + TINY {
            return PowellOutcome {
                point: p,
                value: fret,
                iterations: iteration,
                evaluations: f.evaluations,
                converged: true,
            };
        }

        let extrapolated: Vec<f64> = p.iter().zip(&pt).map(|(a, b)| 2.0 * a - b).collect();
        let mut average_dir: Vec<f64> = p.iter().zip(&pt).map(|(a, b)| a - b).collect();
        pt.clone_from(&p);
        let fe = f.eval(&extrapolated);
        if fe < fp {
            let t = 2.0 * (fp - 2.0 * fret + fe) * (fp - fret - biggest_drop).powi(2)
                - biggest_drop * (fp - fe).powi(2);
            if t < 0.0 {
                fret = line_minimize(&mut f, &mut p, &mut average_dir, fret);
                directions[biggest] = directions[dim - 1].clone();
                directions[dim - 1] = average_dir;
            }
        }
    }

    PowellOutcome {
        point: p,
        value: fret,
        iterations: max_iterations,
        evaluations: f.evaluations,
        converged: false,
    }
}

/// Minimizes along `dir` from `p`. After a strict improvement `p` is the
/// minimizer and `dir` the step actually taken; otherwise both are left
/// untouched.
fn line_minimize<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    p: &mut [f64],
    dir: &mut [f64],
    f_at_p: f64,
) -> f64 {
    let mut trial = vec![0.0; p.len()];
    let mut along = |t: f64, f: &mut Counted<F>| {
        for ((out, base), d) in trial.iter_mut().zip(p.iter()).zip(dir.iter()) {
            *out = base + t * d;
        }
        f.eval(&trial)
    };

    let (ax, bx, cx, fb) = bracket(0.0, 1.0, f_at_p, &mut along, f);
    let (tmin, fmin) = brent(ax, bx, cx, fb, &mut along, f);

    if fmin >= f_at_p {
        // Only move on strict improvement; the direction is kept as is.
        return f_at_p;
    }
    for (pi, di) in p.iter_mut().zip(dir.iter_mut()) {
        *di *= tmin;
        *pi += *di;
    }
    fmin
}

/// Downhill bracketing of a minimum starting from `a` and `b`.
fn bracket<F, G>(
    mut a: f64,
    mut b: f64,
    fa0: f64,
    along: &mut G,
    f: &mut Counted<F>,
) -> (f64, f64, f64, f64)
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(f64, &mut Counted<F>) -> f64,
{
    let mut fa = fa0;
    let mut fb = along(b, f);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = along(c, f);
    let mut steps = 0;
    while fb > fc && steps < BRACKET_STEPS {
        steps += 1;
        let r = (b - a) * (fb - fc);
        let q = (b - c) * (fb - fa);
        let denom = 2.0 * (q - r).abs().max(TINY).copysign(q - r);
        let mut u = b - ((b - c) * q - (b - a) * r) / denom;
        let ulim = b + GLIMIT * (c - b);
        let fu;
        if (b - u) * (u - c) > 0.0 {
            let fu_try = along(u, f);
            if fu_try < fc {
                return (b, u, c, fu_try);
            } else if fu_try > fb {
                return (a, b, u, fb);
            }
            u = c + GOLD * (c - b);
            fu = along(u, f);
        } else if (c - u) * (u - ulim) > 0.0 {
            let mut fu_try = along(u, f);
            if fu_try < fc {
                b = c;
                c = u;
                u = c + GOLD * (c - b);
                fb = fc;
                fc = fu_try;
                fu_try = along(u, f);
            }
            fu = fu_try;
        } else if (u - ulim) * (ulim - c) >= 0.0 {
            u = ulim;
            fu = along(u, f);
        } else {
            u = c + GOLD * (c - b);
            fu = along(u, f);
        }
        a = b;
        b = c;
        c = u;
        fa = fb;
        fb = fc;
        fc = fu;
    }
    let _ = fa;
    (a, b, c, fb)
}

/// Brent's parabolic/golden-section minimization inside `[a, c]`, starting
/// from the interior point `b` with value `fb`.
fn brent<F, G>(ax: f64, bx: f64, cx: f64, fb: f64, along: &mut G, f: &mut Counted<F>) -> (f64, f64)
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(f64, &mut Counted<F>) -> f64,
{
    let mut a = ax.min(cx);
    let mut b = ax.max(cx);
    let (mut x, mut w, mut v) = (bx, bx, bx);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..BRENT_STEPS {
        let xm = 0.5 * (a + b);
        let tol1 = LINE_TOLERANCE * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = along(u, f);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}
