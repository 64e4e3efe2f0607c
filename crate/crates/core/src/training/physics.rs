//! Physics residuals for the PINN baselines, with derivatives taken by
//! central differences on a uniform collocation grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsPrior {
    /// `dP/dt + γ·P = 0`
    Incomplete,
    /// `d²P/dt² + 2ζω·dP/dt + ω²·(P − P_eq) = 0`
    Known,
}

/// Physical parameters in their constrained form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhysicsValues {
    Incomplete { gamma: f64 },
    Known { zeta: f64, omega: f64, p_eq: f64 },
}

impl PhysicsValues {
    pub fn prior(&self) -> PhysicsPrior {
        match self {
            PhysicsValues::Incomplete { .. } => PhysicsPrior::Incomplete,
            PhysicsValues::Known { .. } => PhysicsPrior::Known,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsLoss {
    /// Mean squared residual over interior grid points.
    pub value: f64,
    /// Gradient with respect to each grid value of `P`.
    pub d_p: Vec<f64>,
    /// Gradient with respect to the physical values, in declaration order.
    pub d_values: Vec<f64>,
}

/// `n` uniformly spaced collocation times covering `[start, end]`.
pub fn collocation_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "collocation grid needs at least 3 points, got {n}"
        )));
    }
    if !(start.is_finite() && end.is_finite() && end > start) {
        return Err(Error::InvalidInput(format!(
            "collocation range [{start}, {end}] is empty"
        )));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| start + (end - start) * (i as f64 / last)).collect())
}

/// Residual of the chosen prior for `P` sampled on a uniform grid with
/// spacing `h`.
pub fn pinn_residual(p: &[f64], h: f64, values: &PhysicsValues) -> Result<PhysicsLoss> {
    let n = p.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "physics residual needs at least 3 grid points, got {n}"
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!("grid spacing must be > 0, got {h}")));
    }
    let m = (n - 2) as f64;
    let mut value = 0.0;
    let mut d_p = vec![0.0; n];
    let mut d_values = vec![0.0; if values.prior() == PhysicsPrior::Known { 3 } else { 1 }];
    for i in 1..n - 1 {
        let d1 = (p[i + 1] - p[i - 1]) / (2.0 * h);
        match *values {
            PhysicsValues::Incomplete { gamma } => {
                let r = d1 + gamma * p[i];
                value += r * r;
                let g = 2.0 * r / m;
                d_p[i + 1] += g / (2.0 * h);
                d_p[i - 1] -= g / (2.0 * h);
                d_p[i] += g * gamma;
                d_values[0] += g * p[i];
            }
            PhysicsValues::Known { zeta, omega, p_eq } => {
                let d2 = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (h * h);
                let damp = 2.0 * zeta * omega;
                let w2 = omega * omega;
                let r = d2 + damp * d1 + w2 * (p[i] - p_eq);
                value += r * r;
                let g = 2.0 * r / m;
                let c_side = 1.0 / (h * h);
                let c_d1 = damp / (2.0 * h);
                d_p[i + 1] += g * (c_side + c_d1);
                d_p[i - 1] += g * (c_side - c_d1);
                d_p[i] += g * (-2.0 * c_side + w2);
                d_values[0] += g * 2.0 * omega * d1;
                d_values[1] += g * (2.0 * zeta * d1 + 2.0 * omega * (p[i] - p_eq));
                d_values[2] -= g * w2;
            }
        }
    }
    Ok(PhysicsLoss {
        value: value / m,
        d_p,
        d_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_satisfies_incomplete_prior() {
        let grid = collocation_grid(0.0, 8.0, 1024).unwrap();
        let h = grid[1] - grid[0];
        let p: Vec<f64> = grid.iter().map(|&t| (-0.2 * t).exp()).collect();
        let l = pinn_residual(&p, h, &PhysicsValues::Incomplete { gamma: 0.2 }).unwrap();
        assert!(l.value < 1e-4, "{}", l.value);
        let off = pinn_residual(&p, h, &PhysicsValues::Incomplete { gamma: 0.5 }).unwrap();
        assert!(off.value > 1e-3);
    }

    #[test]
    fn equilibrium_satisfies_known_prior() {
        let p = vec![0.37; 64];
        let l = pinn_residual(
            &p,
            0.01,
            &PhysicsValues::Known {
                zeta: 0.3,
                omega: 2.0,
                p_eq: 0.37,
            },
        )
        .unwrap();
        assert!(l.value < 1e-20);
    }

    #[test]
    fn cosine_satisfies_undamped_prior() {
        let omega = 2.0;
        let h = 1e-3;
        let p: Vec<f64> = (0..2001).map(|i| (omega * i as f64 * h).cos()).collect();
        let l = pinn_residual(
            &p,
            h,
            &PhysicsValues::Known {
                zeta: 0.0,
                omega,
                p_eq: 0.0,
            },
        )
        .unwrap();
        assert!(l.value < 1e-3, "{}", l.value);
    }

    #[test]
    fn short_grids_are_rejected() {
        assert!(collocation_grid(0.0, 1.0, 2).is_err());
        assert!(pinn_residual(&[0.1, 0.2], 0.1, &PhysicsValues::Incomplete { gamma: 1.0 }).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p: Vec<f64> = (0..9).map(|i| 0.5 + 0.3 * (0.7 * i as f64).sin()).collect();
        let h = 0.25;
        let known = |z: f64, w: f64, e: f64| PhysicsValues::Known {
            zeta: z,
            omega: w,
            p_eq: e,
        };
        let (z, w, e) = (0.3, 1.7, 0.4);
        let l = pinn_residual(&p, h, &known(z, w, e)).unwrap();
        let eps = 1e-6;
        for i in 0..p.len() {
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += eps;
            b[i] -= eps;
            let fd = (pinn_residual(&a, h, &known(z, w, e)).unwrap().value
                - pinn_residual(&b, h, &known(z, w, e)).unwrap().value)
                / (2.0 * eps);
            assert!((fd - l.d_p[i]).abs() < 1e-6 * fd.abs().max(1.0), "p[{i}]");
        }
        let f = |z: f64, w: f64, e: f64| pinn_residual(&p, h, &known(z, w, e)).unwrap().value;
        let fds = [
            (f(z + eps, w, e) - f(z - eps, w, e)) / (2.0 * eps),
            (f(z, w + eps, e) - f(z, w - eps, e)) / (2.0 * eps),
            (f(z, w, e + eps) - f(z, w, e - eps)) / (2.0 * eps),
        ];
        for (fd, an) in fds.iter().zip(&l.d_values) {
            assert!((fd - an).abs() < 1e-6 * fd.abs().max(1.0));
        }
        let inc = |g: f64| pinn_residual(&p, h, &PhysicsValues::Incomplete { gamma: g }).unwrap();
        let fd = (inc(0.3 + eps).value - inc(0.3 - eps).value) / (2.0 * eps);
        assert!((fd - inc(0.3).d_values[0]).abs() < 1e-6);
    }
}
