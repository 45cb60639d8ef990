//! Scalar root finding for monotone residuals: bracket by expansion, then Illinois.

/// Outcome of a failed search: evaluations spent and the smallest residual seen.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NoRoot {
    pub evaluations: usize,
    pub best: f64,
}

/// Root of `g` near `x0`, where `g` changes sign somewhere.
///
/// The bracket grows geometrically from `x0 +- step`, in the direction in
/// which `|g|` decreases. Stops when `|g| <= ftol`
/// or the bracket collapses to adjacent floats.
pub(crate) fn find_root(
    mut g: impl FnMut(f64) -> f64,
    x0: f64,
    step: f64,
    ftol: f64,
    max_evals: usize,
) -> Result<f64, NoRoot> {
    let mut evals = 0;
    let mut best = f64::INFINITY;
    let mut eval = |x: f64, evals: &mut usize, best: &mut f64| {
        *evals += 1;
        let v = g(x);
        *best = best.min(v.abs());
        v
    };
    let f0 = eval(x0, &mut evals, &mut best);
    if f0.abs() <= ftol {
        return Ok(x0);
    }
    // walk downhill in |g| until the sign flips; both ways while |g| is flat
    let mut width = step;
    let (mut a, mut fa) = (x0, f0);
    let (mut b, mut fb);
    let first = eval(x0 + width, &mut evals, &mut best);
    if first.abs() <= ftol {
        return Ok(x0 + width);
    }
    let direction = if first.signum() != f0.signum() {
        0.0
    } else if first.abs() < f0.abs() {
        1.0
    } else if first.abs() > f0.abs() {
        -1.0
    } else {
        0.0
    };
    if first.signum() != f0.signum() {
        (b, fb) = (x0 + width, first);
    } else if direction != 0.0 {
        if direction > 0.0 {
            (a, fa) = (x0 + width, first);
        }
        loop {
            width *= 2.0;
            let x = x0 + direction * width;
            let v = eval(x, &mut evals, &mut best);
            if v.abs() <= ftol {
                return Ok(x);
            }
            if v.signum() != f0.signum() {
                (b, fb) = (x, v);
                break;
            }
            (a, fa) = (x, v);
            if evals >= max_evals || !width.is_finite() {
                return Err(NoRoot { evaluations: evals, best });
            }
        }
    } else {
        loop {
            let down = eval(x0 - width, &mut evals, &mut best);
            if down.abs() <= ftol {
                return Ok(x0 - width);
            }
            if down.signum() != f0.signum() {
                (b, fb) = (x0 - width, down);
                break;
            }
            width *= 2.0;
            let up = eval(x0 + width, &mut evals, &mut best);
            if up.abs() <= ftol {
                return Ok(x0 + width);
            }
            if up.signum() != f0.signum() {
                (b, fb) = (x0 + width, up);
                break;
            }
            if evals >= max_evals || !width.is_finite() {
                return Err(NoRoot { evaluations: evals, best });
            }
        }
    }
    // Illinois regula falsi on [a, b]
    let mut side = 0;
    while evals < max_evals {
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        if x == a || x == b {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        let fx = eval(x, &mut evals, &mut best);
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            (b, fb) = (x, fx);
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            (a, fa) = (x, fx);
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(NoRoot { evaluations: evals, best })
}
