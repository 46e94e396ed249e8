//! Dense BFGS minimizer with a Wolfe line search.
//!
//! Near the optimum, differences of the objective fall below its rounding
//! noise while the analytic gradient is still informative, so a trial step
//! is also accepted under the approximate Wolfe conditions of Hager and
//! Zhang: no increase beyond the noise level and a directional derivative
//! that has shrunk by a fixed factor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 60;
const MAX_ZOOM: usize = 40;
const NOISE_REL: f64 = 1e-13;
const STALL_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once the largest absolute gradient entry is at or below this.
    pub gradient_tolerance: f64,
    /// Relative decrease regarded as no progress.
    pub objective_tolerance: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iterations: 500, gradient_tolerance: 1e-8, objective_tolerance: f64::EPSILON }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Gradient norm reached the tolerance.
    GradientTolerance,
    /// No decrease is attainable along the steepest-descent direction at
    /// the objective's floating-point resolution.
    Stalled,
    MaxIterations,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective value after each accepted step, starting with the initial
    /// point.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteStart;

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Trial {
    alpha: f64,
    value: f64,
    gradient: DVector<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a DVector<f64>,
    dir: &'a DVector<f64>,
    f0: f64,
    slope0: f64,
    noise: f64,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Trial {
        self.evaluations += 1;
        let point = self.x + self.dir * alpha;
        let (value, grad) = (self.objective)(point.as_slice());
        let gradient = DVector::from_vec(grad);
        let finite = value.is_finite() && gradient.iter().all(|g| g.is_finite());
        if !finite {
            return Trial { alpha, value: f64::INFINITY, gradient, slope: f64::NAN };
        }
        let slope = gradient.dot(self.dir);
        Trial { alpha, value, gradient, slope }
    }

    fn sufficient(&self, t: &Trial) -> bool {
        if !t.value.is_finite() {
            return false;
        }
        let armijo = t.value <= self.f0 + C1 * t.alpha * self.slope0;
        let approximate = t.value <= self.f0 + self.noise && t.slope <= (2.0 * C1 - 1.0) * self.slope0;
        armijo || approximate
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.slope.abs() <= -C2 * self.slope0
    }

    fn run(&mut self, alpha_init: f64) -> Option<Trial> {
        let mut prev = Trial { alpha: 0.0, value: self.f0, gradient: DVector::zeros(0), slope: self.slope0 };
        let mut alpha = alpha_init;
        for i in 0..MAX_BRACKET {
            let t = self.eval(alpha);
            if !t.value.is_finite() {
                // step left the region where the objective is defined
                return self.zoom(prev, t);
            }
            if !self.sufficient(&t) || (i > 0 && t.value >= prev.value) {
                return self.zoom(prev, t);
            }
            if self.curvature(&t) {
                return Some(t);
            }
            if t.slope >= 0.0 {
                return self.zoom(t, prev);
            }
            alpha = 2.0 * t.alpha;
            prev = t;
        }
        (prev.alpha > 0.0).then_some(prev)
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Option<Trial> {
        for _ in 0..MAX_ZOOM {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs()) {
                break;
            }
            let alpha = interpolate(&lo, &hi);
            let t = self.eval(alpha);
            if !self.sufficient(&t) || t.value >= lo.value {
                hi = t;
                continue;
            }
            if self.curvature(&t) {
                return Some(t);
            }
            if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
        // fall back to the best sufficient-decrease point seen, if any
        (lo.alpha > 0.0 && lo.value < self.f0).then_some(lo)
    }
}

// Cubic interpolation between two trials, safeguarded to the interior of
// the bracket; bisection when information is missing.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    let (lo_bound, hi_bound) = (a.min(b), a.max(b));
    let guard = 0.1 * (hi_bound - lo_bound);
    if !hi.value.is_finite() || !hi.slope.is_finite() || !lo.slope.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let alpha = b - (b - a) * (hi.slope + d2 - d1) / denom;
    if !alpha.is_finite() || alpha < lo_bound + guard || alpha > hi_bound - guard {
        mid
    } else {
        alpha
    }
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &BfgsOptions) -> Result<Minimum, NonFiniteStart>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut f, g0) = objective(x.as_slice());
    let mut g = DVector::from_vec(g0);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(NonFiniteStart);
    }
    let mut evaluations = 1;
    let mut history = vec![f];
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut stall = 0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if inf_norm(g.as_slice()) <= opts.gradient_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        let mut slope0 = g.dot(&dir);
        if !(slope0 < 0.0) {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            dir = -g.clone();
            slope0 = g.dot(&dir);
        }
        let alpha_init = if fresh { 1.0f64.min(1.0 / inf_norm(g.as_slice())) } else { 1.0 };
        let mut ls = LineSearch {
            objective: &mut objective,
            x: &x,
            dir: &dir,
            f0: f,
            slope0,
            noise: NOISE_REL * (1.0 + f.abs()),
            evaluations: 0,
        };
        let step = ls.run(alpha_init);
        evaluations += ls.evaluations;
        let Some(step) = step else {
            if fresh {
                termination = Termination::Stalled;
                break;
            }
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let s = &dir * step.alpha;
        let y = &step.gradient - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h_inv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H <- H - rho (s hy' + hy s') + (rho^2 yHy + rho) s s'
            h_inv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        let decrease = f - step.value;
        x += &s;
        f = step.value;
        g = step.gradient;
        history.push(f);
        if decrease <= opts.objective_tolerance * f.abs().max(1.0) {
            stall += 1;
            if stall >= STALL_WINDOW {
                termination = Termination::Stalled;
                break;
            }
        } else {
            stall = 0;
        }
    }
    if termination == Termination::MaxIterations && inf_norm(g.as_slice()) <= opts.gradient_tolerance {
        termination = Termination::GradientTolerance;
    }
    Ok(Minimum {
        x: x.as_slice().to_vec(),
        value: f,
        gradient: g.as_slice().to_vec(),
        iterations,
        evaluations,
        termination,
        history,
    })
}
