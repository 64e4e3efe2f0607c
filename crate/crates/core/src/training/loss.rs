//! Paraconsistent loss terms. Every function returns the value together with
//! its exact gradient with respect to the network outputs.

use serde::{Deserialize, Serialize};

use crate::dyngen::Regime;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_s: f64,
    pub lambda_n: f64,
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_s: 1.0,
            lambda_n: 0.5,
            lambda_c: 0.5,
        }
    }
}

impl LossWeights {
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Mixed => LossWeights {
                lambda_n: 0.8,
                ..Default::default()
            },
            _ => Default::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_n", self.lambda_n),
            ("lambda_c", self.lambda_c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// A scalar loss and its gradient with respect to one output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A scalar loss with gradients for both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DualLoss {
    pub value: f64,
    pub d_t: Vec<f64>,
    pub d_f: Vec<f64>,
}

/// Unweighted components of the composite loss, for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub signal: f64,
    pub noise: f64,
    pub contradiction: f64,
}

fn check_lengths(what: &str, a: usize, others: &[usize]) -> Result<()> {
    if a == 0 {
        return Err(Error::InvalidInput(format!("{what}: empty batch")));
    }
    if others.iter().any(|&n| n != a) {
        return Err(Error::Shape(format!("{what}: batch lengths differ")));
    }
    Ok(())
}

/// Mean squared error and its gradient.
pub fn loss_signal(t_hat: &[f64], t_star: &[f64]) -> Result<Loss> {
    check_lengths("loss_signal", t_hat.len(), &[t_star.len()])?;
    let n = t_hat.len() as f64;
    let mut value = 0.0;
    let grad = t_hat
        .iter()
        .zip(t_star)
        .map(|(&p, &q)| {
            let d = p - q;
            value += d * d;
            2.0 * d / n
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}

/// Fits the falsity channel to the absolute residual `|y − t*|`.
pub fn loss_noise(f_hat: &[f64], y: &[f64], t_star: &[f64]) -> Result<Loss> {
    check_lengths("loss_noise", f_hat.len(), &[y.len(), t_star.len()])?;
    let target: Vec<f64> = y.iter().zip(t_star).map(|(a, b)| (a - b).abs()).collect();
    loss_signal(f_hat, &target)
}

/// Squared hinge on `t̂ + f̂ − 1`. The gradient is the same for both channels.
pub fn loss_contradiction(t_hat: &[f64], f_hat: &[f64]) -> Result<Loss> {
    if t_hat.len() != f_hat.len() {
        return Err(Error::Shape("loss_contradiction: batch lengths differ".into()));
    }
    if t_hat.is_empty() {
        return Ok(Loss {
            value: 0.0,
            grad: Vec::new(),
        });
    }
    let n = t_hat.len() as f64;
    let mut value = 0.0;
    let grad = t_hat
        .iter()
        .zip(f_hat)
        .map(|(&t, &f)| {
            let excess = (t + f - 1.0).max(0.0);
            value += excess * excess;
            2.0 * excess / n
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}

/// `λs·L_signal + λn·L_noise + λc·L_contradiction` with the clean trace as
/// signal target.
pub fn paraconsistent_loss(
    t_hat: &[f64],
    f_hat: &[f64],
    y: &[f64],
    t_star: &[f64],
    w: &LossWeights,
) -> Result<(DualLoss, LossParts)> {
    let s = loss_signal(t_hat, t_star)?;
    let nz = loss_noise(f_hat, y, t_star)?;
    let c = loss_contradiction(t_hat, f_hat)?;
    let value = w.lambda_s * s.value + w.lambda_n * nz.value + w.lambda_c * c.value;
    let d_t = s
        .grad
        .iter()
        .zip(&c.grad)
        .map(|(gs, gc)| w.lambda_s * gs + w.lambda_c * gc)
        .collect();
    let d_f = nz
        .grad
        .iter()
        .zip(&c.grad)
        .map(|(gn, gc)| w.lambda_n * gn + w.lambda_c * gc)
        .collect();
    Ok((
        DualLoss { value, d_t, d_f },
        LossParts {
            signal: s.value,
            noise: nz.value,
            contradiction: c.value,
        },
    ))
}

/// Ground-truth-free variant: `t̂` fits the observation and `f̂` fits the
/// residual `|y − t̂|`, treated as a constant target. `λs` is not used.
pub fn loss_experimental(t_hat: &[f64], f_hat: &[f64], y: &[f64], w: &LossWeights) -> Result<DualLoss> {
    let fit = loss_signal(t_hat, y)?;
    // residual target built from t̂ but carries no gradient back into it
    let nz = loss_noise(f_hat, y, t_hat)?;
    let c = loss_contradiction(t_hat, f_hat)?;
    let value = fit.value + w.lambda_n * nz.value + w.lambda_c * c.value;
    let d_t = fit
        .grad
        .iter()
        .zip(&c.grad)
        .map(|(g, gc)| g + w.lambda_c * gc)
        .collect();
    let d_f = nz
        .grad
        .iter()
        .zip(&c.grad)
        .map(|(g, gc)| w.lambda_n * g + w.lambda_c * gc)
        .collect();
    Ok(DualLoss { value, d_t, d_f })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn signal_examples() {
        let l = loss_signal(&[0.5], &[0.0]).unwrap();
        assert!(close(l.value, 0.25));
        assert!(close(l.grad[0], 1.0));
        assert!(close(loss_signal(&[0.2, 0.8], &[0.0, 1.0]).unwrap().value, 0.04));
        assert_eq!(loss_signal(&[0.3, 0.7], &[0.3, 0.7]).unwrap().value, 0.0);
        assert!(loss_signal(&[], &[]).is_err());
        assert!(loss_signal(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn noise_examples() {
        assert!(close(loss_noise(&[0.0], &[0.9], &[0.7]).unwrap().value, 0.04));
        assert!(close(loss_noise(&[0.1], &[0.4], &[0.4]).unwrap().value, 0.01));
        assert!(close(loss_noise(&[0.2, 0.3], &[0.5, 0.1], &[0.3, 0.4]).unwrap().value, 0.0));
        assert!(loss_noise(&[], &[], &[]).is_err());
    }

    #[test]
    fn contradiction_examples() {
        let l = loss_contradiction(&[0.8], &[0.5]).unwrap();
        assert!(close(l.value, 0.09));
        assert!(close(l.grad[0], 0.6));
        assert_eq!(loss_contradiction(&[0.5], &[0.5]).unwrap().value, 0.0);
        let inactive = loss_contradiction(&[0.1, 0.4], &[0.2, 0.6]).unwrap();
        assert_eq!(inactive.value, 0.0);
        assert!(inactive.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn composite_is_weighted_sum() {
        let t = [0.9, 0.2, 0.6];
        let f = [0.3, 0.1, 0.5];
        let y = [1.0, 0.1, 0.4];
        let ts = [0.8, 0.25, 0.55];
        let w = LossWeights {
            lambda_s: 1.0,
            lambda_n: 0.8,
            lambda_c: 0.5,
        };
        let (total, parts) = paraconsistent_loss(&t, &f, &y, &ts, &w).unwrap();
        // components by hand
        let sig = ((0.1f64).powi(2) + (0.05f64).powi(2) + (0.05f64).powi(2)) / 3.0;
        let noi = ((0.3f64 - 0.2).powi(2) + (0.1f64 - 0.15).powi(2) + (0.5f64 - 0.15).powi(2)) / 3.0;
        let con = ((0.2f64).powi(2) + (0.1f64).powi(2)) / 3.0;
        assert!(close(parts.signal, sig));
        assert!(close(parts.noise, noi));
        assert!(close(parts.contradiction, con));
        assert_eq!(total.value, sig * 1.0 + noi * 0.8 + con * 0.5);
    }

    #[test]
    fn experimental_examples() {
        let w = LossWeights::default();
        let zero = loss_experimental(&[0.3, 0.6], &[0.0, 0.0], &[0.3, 0.6], &w).unwrap();
        assert_eq!(zero.value, 0.0);
        let l = loss_experimental(&[0.5], &[0.2], &[0.7], &w).unwrap();
        assert!(close(l.value, 0.04));
    }

    #[test]
    fn experimental_residual_is_detached() {
        // With λc = 0 and a zero fit term, d/dt̂ must be zero even though the
        // noise target depends on t̂.
        let w = LossWeights {
            lambda_s: 1.0,
            lambda_n: 0.5,
            lambda_c: 0.0,
        };
        let l = loss_experimental(&[0.4], &[0.9], &[0.4], &w).unwrap();
        assert_eq!(l.d_t[0], 0.0);
        assert!(l.d_f[0] != 0.0);
    }

    #[test]
    fn regime_weights() {
        assert_eq!(LossWeights::for_regime(Regime::Rabi), LossWeights::default());
        assert_eq!(LossWeights::for_regime(Regime::Mixed).lambda_n, 0.8);
        assert!(LossWeights {
            lambda_c: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
