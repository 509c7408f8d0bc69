//! Secant root finding with fallbacks for step-like functions.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SecantError {
    #[error("secant solver did not converge after {iterations} iterations (best x = {best_x}, residual = {residual})")]
    DidNotConverge {
        best_x: f64,
        residual: f64,
        iterations: u32,
    },
    #[error("secant initial points must differ and be finite (x0 = {x0}, x1 = {x1})")]
    InvalidStart { x0: f64, x1: f64 },
    #[error("function value is not finite at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecantRoot {
    pub root: f64,
    pub iterations: u32,
    pub residual: f64,
}

/// Secant iteration `x_{k+1} = x_k - f(x_k) (x_k - x_{k-1}) / (f(x_k) - f(x_{k-1}))`.
///
/// When the denominator vanishes the solver bisects the tightest known sign
/// change, or, with no sign change yet, perturbs the iterate by
/// `perturbation` against the sign of `f` (assuming `f` is nondecreasing).
/// Iterates leaving a known bracket are replaced by its midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantSolver {
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Closed interval every iterate is clamped into.
    pub bounds: Option<(f64, f64)>,
    /// A sign-change bracket this narrow counts as converged.
    pub x_resolution: Option<f64>,
    /// Step used when the denominator vanishes and no sign change is known;
    /// `None` uses `|x1 - x0|`.
    pub perturbation: Option<f64>,
    pub max_perturbations: u32,
}

impl SecantSolver {
    pub fn new(tolerance: f64, max_iterations: u32) -> Self {
        SecantSolver {
            tolerance,
            max_iterations,
            bounds: None,
            x_resolution: None,
            perturbation: None,
            max_perturbations: 8,
        }
    }

    pub fn solve<F>(&self, mut f: F, x0: f64, x1: f64) -> Result<SecantRoot, SecantError>
    where
        F: FnMut(f64) -> f64,
    {
        if !x0.is_finite() || !x1.is_finite() || x0 == x1 {
            return Err(SecantError::InvalidStart { x0, x1 });
        }
        let perturbation = self.perturbation.unwrap_or((x1 - x0).abs());
        let clamp = |x: f64| match self.bounds {
            Some((lo, hi)) => x.clamp(lo, hi),
            None => x,
        };

        let mut eval = |x: f64| -> Result<f64, SecantError> {
            let y = f(x);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(SecantError::NonFinite(x))
            }
        };

        let (mut x_prev, mut x_curr) = (clamp(x0), clamp(x1));
        let mut f_prev = eval(x_prev)?;
        let mut f_curr = eval(x_curr)?;
        let mut track = Tracker::default();
        track.observe(x_prev, f_prev);
        track.observe(x_curr, f_curr);

        let mut perturbations = 0;
        let mut iterations = 0;
        loop {
            if f_prev.abs() <= self.tolerance && f_curr.abs() > self.tolerance {
                // The first initial point already satisfies the tolerance.
                return Ok(SecantRoot {
                    root: x_prev,
                    iterations,
                    residual: f_prev,
                });
            }
            if f_curr.abs() <= self.tolerance {
                return Ok(SecantRoot {
                    root: x_curr,
                    iterations,
                    residual: f_curr,
                });
            }
            if let (Some(res), Some(width)) = (self.x_resolution, track.bracket_width()) {
                if width <= res {
                    let (root, residual) = track.best;
                    return Ok(SecantRoot {
                        root,
                        iterations,
                        residual,
                    });
                }
            }
            if iterations >= self.max_iterations {
                break;
            }
            iterations += 1;

            let denom = f_curr - f_prev;
            let scale = f_curr.abs().max(f_prev.abs());
            let mut x_next = if denom.abs() <= f64::EPSILON * scale {
                match track.midpoint() {
                    Some(mid) => mid,
                    None => {
                        perturbations += 1;
                        if perturbations > self.max_perturbations {
                            break;
                        }
                        x_curr - f_curr.signum() * perturbation
                    }
                }
            } else {
                x_curr - f_curr * (x_curr - x_prev) / denom
            };
            if !x_next.is_finite() || !track.inside_bracket(x_next) {
                if let Some(mid) = track.midpoint() {
                    x_next = mid;
                }
            }
            x_next = clamp(x_next);

            x_prev = x_curr;
            f_prev = f_curr;
            x_curr = x_next;
            f_curr = eval(x_curr)?;
            track.observe(x_curr, f_curr);
        }

        let (best_x, residual) = track.best;
        Err(SecantError::DidNotConverge {
            best_x,
            residual,
            iterations,
        })
    }
}

/// Best point so far plus the tightest sign-change bracket.
#[derive(Debug)]
struct Tracker {
    best: (f64, f64),
    neg: Option<(f64, f64)>,
    pos: Option<(f64, f64)>,
}

impl Default for Tracker {
    fn default() -> Self {
        Tracker {
            best: (f64::NAN, f64::INFINITY),
            neg: None,
            pos: None,
        }
    }
}

impl Tracker {
    fn observe(&mut self, x: f64, y: f64) {
        if y.abs() < self.best.1.abs() {
            self.best = (x, y);
        }
        let both = self.neg.is_some() && self.pos.is_some();
        if y < 0.0 && (!both || self.inside_bracket(x)) {
            self.neg = Some((x, y));
        } else if y > 0.0 && (!both || self.inside_bracket(x)) {
            self.pos = Some((x, y));
        }
    }

    fn bracket(&self) -> Option<(f64, f64)> {
        match (self.neg, self.pos) {
            (Some((a, _)), Some((b, _))) => Some((a.min(b), a.max(b))),
            _ => None,
        }
    }

    fn bracket_width(&self) -> Option<f64> {
        self.bracket().map(|(a, b)| b - a)
    }

    fn midpoint(&self) -> Option<f64> {
        self.bracket().map(|(a, b)| a + 0.5 * (b - a))
    }

    fn inside_bracket(&self, x: f64) -> bool {
        match self.bracket() {
            Some((a, b)) => a < x && x < b,
            None => true,
        }
    }
}

/// Plain secant solve with default fallbacks.
pub fn secant_solve<F>(f: F, x0: f64, x1: f64, tolerance: f64, max_iterations: u32) -> Result<SecantRoot, SecantError>
where
    F: FnMut(f64) -> f64,
{
    SecantSolver::new(tolerance, max_iterations).solve(f, x0, x1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent bisection used as the reference root.
    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
        let mut fa = f(a);
        while b - a > tol {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn exact_on_affine_functions() {
        let r = secant_solve(|x| x - 3.0, 0.0, 1.0, 1e-12, 10).unwrap();
        assert_eq!(r.root, 3.0);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn sqrt_two_matches_bisection() {
        let f = |x: f64| x * x - 2.0;
        let r = secant_solve(f, 1.0, 2.0, 1e-10, 50).unwrap();
        let reference = bisect(f, 1.0, 2.0, 1e-13);
        assert!((r.root - reference).abs() < 1e-10, "{} vs {reference}", r.root);
        assert!((r.root - std::f64::consts::SQRT_2).abs() < 1e-8);
    }

    #[test]
    fn flat_function_without_sign_change_fails() {
        let err = secant_solve(|_| 1.0, 0.0, 1.0, 1e-9, 100).unwrap_err();
        match err {
            SecantError::DidNotConverge { residual, .. } => assert_eq!(residual, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_identical_start() {
        assert!(matches!(
            secant_solve(|x| x, 1.0, 1.0, 1e-9, 10),
            Err(SecantError::InvalidStart { .. })
        ));
    }

    #[test]
    fn non_finite_values_are_errors() {
        assert!(matches!(
            secant_solve(|x| if x > 1.5 { f64::NAN } else { x - 2.0 }, 0.0, 1.0, 1e-9, 10),
            Err(SecantError::NonFinite(_))
        ));
    }

    #[test]
    fn step_function_falls_back_to_bisection() {
        // Unit steps: no exact root, a sign change between 4 and 5.
        let f = |x: f64| x.floor() - 4.5;
        let solver = SecantSolver {
            x_resolution: Some(1.0),
            ..SecantSolver::new(1e-9, 64)
        };
        let r = solver.solve(f, 0.5, 1.5).unwrap();
        assert_eq!(r.residual.abs(), 0.5);
        assert!((4.0..6.0).contains(&r.root), "{}", r.root);
    }

    #[test]
    fn perturbation_escapes_flat_start() {
        // Flat on [0, 2), then increasing; the start points see equal values.
        let f = |x: f64| if x < 2.0 { -1.0 } else { x - 3.0 };
        let solver = SecantSolver {
            perturbation: Some(1.0),
            ..SecantSolver::new(1e-12, 50)
        };
        let r = solver.solve(f, 0.0, 1.0).unwrap();
        assert!((r.root - 3.0).abs() < 1e-9);
    }

    #[test]
    fn iterates_respect_bounds() {
        let mut seen = Vec::new();
        let solver = SecantSolver {
            bounds: Some((0.0, 2.0)),
            ..SecantSolver::new(1e-12, 20)
        };
        let _ = solver.solve(
            |x| {
                seen.push(x);
                x - 10.0
            },
            0.5,
            1.0,
        );
        assert!(seen.iter().all(|x| (0.0..=2.0).contains(x)));
    }
}
