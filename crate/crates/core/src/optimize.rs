//! Box-constrained quasi-Newton minimizer.
//!
//! BFGS on the inverse Hessian, restricted each step to the variables that
//! are not pinned at a bound, with a backtracking Armijo search along the
//! projected path `P(x + αd)`.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn pinned(&self, x: &[f64], g: &[f64], i: usize) -> bool {
        (x[i] <= self.lower[i] && g[i] > 0.0) || (x[i] >= self.upper[i] && g[i] < 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub gradient_tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub projected_gradient: f64,
}

fn projected_gradient_norm(bounds: &Bounds, x: &[f64], g: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| ((x[i] - g[i]).clamp(bounds.lower[i], bounds.upper[i]) - x[i]).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` over the box. `f` returns the value and gradient.
pub fn minimize_box<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: &MinimizeOptions) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut pg = projected_gradient_norm(bounds, &x, &g);

    while iterations < opts.max_iterations {
        if !(pg > opts.gradient_tolerance) {
            break;
        }
        iterations += 1;
        let free: Vec<bool> = (0..n).map(|i| !bounds.pinned(&x, &g, i)).collect();
        let gv = DVector::from_iterator(n, (0..n).map(|i| if free[i] { g[i] } else { 0.0 }));
        let mut d = -(&hinv * &gv);
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if d.dot(&gv) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            d = -gv.clone();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
            bounds.project(&mut xn);
            let step: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let (fnew, gnew) = f(&xn);
            let decrease: f64 = (0..n).map(|i| g[i] * step[i]).sum();
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease {
                accepted = Some((xn, fnew, gnew, step));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fnew, gnew, step)) = accepted else {
            if fresh {
                break;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };

        let s = DVector::from_vec(step);
        let y = DVector::from_iterator(n, (0..n).map(|i| gnew[i] - g[i]));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        x = xn;
        fx = fnew;
        g = gnew;
        pg = projected_gradient_norm(bounds, &x, &g);
    }

    Minimum {
        converged: pg <= opts.gradient_tolerance,
        x,
        value: fx,
        iterations,
        projected_gradient: pg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let bounds = Bounds {
            lower: vec![-5.0; 2],
            upper: vec![5.0; 2],
        };
        let opts = MinimizeOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
        };
        let m = minimize_box(f, &[-1.2, 1.0], &bounds, &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn active_bound() {
        // minimum of (x-3)^2 + (y+1)^2 on [0,1]^2 is at (1, 0)
        let f = |x: &[f64]| {
            (
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)],
            )
        };
        let bounds = Bounds {
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
        };
        let opts = MinimizeOptions {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
        };
        let m = minimize_box(f, &[0.5, 0.5], &bounds, &opts);
        assert!(m.converged);
        assert_eq!(m.x, vec![1.0, 0.0]);
    }
}
