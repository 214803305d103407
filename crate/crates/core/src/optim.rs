//! Optimizers: Adam with full-matrix preconditioning for camera fitting, and
//! normalized SGD with momentum for remeshing.
//!
//! Diagonal preconditioning is not rotation invariant: it has preferential
//! axes that can bias a pose estimate. With only a handful of parameters per
//! camera hypothesis, maintaining the full second-moment matrix and taking a
//! matrix inverse square root per step is cheap, and makes the update
//! equivariant to orthogonal reparameterizations.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Adam with a full `d x d` second-moment matrix.
///
/// Per step, with gradient `g`:
/// `m <- b1 m + (1-b1) g`, `V <- b2 V + (1-b2) g g^T`, both bias-corrected,
/// then `theta <- theta - alpha (V_hat + eps I)^(-1/2) m_hat`. The inverse
/// square root is taken through a symmetric eigendecomposition with
/// eigenvalues clamped at zero before adding `eps`.
#[derive(Debug, Clone)]
pub struct FullMatrixAdam {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: DVector<f64>,
    v: DMatrix<f64>,
}

/// Dimension cap: each step costs O(d^3).
pub const MAX_DIM: usize = 64;

impl FullMatrixAdam {
    pub fn new(dim: usize, alpha: f64) -> Self {
        assert!(dim > 0 && dim <= MAX_DIM, "full-matrix Adam is restricted to d <= {MAX_DIM}");
        FullMatrixAdam {
            alpha,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            t: 0,
            m: DVector::zeros(dim),
            v: DMatrix::zeros(dim, dim),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        let d = self.m.len();
        assert_eq!(params.len(), d);
        assert_eq!(grad.len(), d);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        self.t += 1;
        let g = DVector::from_column_slice(grad);
        self.m = &self.m * self.beta1 + &g * (1.0 - self.beta1);
        // V <- b2 V + (1-b2) g g^T, keeping exact symmetry.
        for i in 0..d {
            for j in 0..d {
                self.v[(i, j)] = self.beta2 * self.v[(i, j)] + (1.0 - self.beta2) * g[i] * g[j];
            }
        }
        let m_hat = &self.m / (1.0 - self.beta1.powi(self.t as i32));
        let v_hat = &self.v / (1.0 - self.beta2.powi(self.t as i32));

        let eig = nalgebra::SymmetricEigen::new(v_hat);
        // Floating-point can produce tiny negative eigenvalues; clamp before
        // the -1/2 power, then add eps as in (V_hat + eps I)^(-1/2).
        let inv_sqrt: DVector<f64> =
            eig.eigenvalues.map(|l| 1.0 / (l.max(0.0) + self.eps).sqrt());
        // update = Q diag(inv_sqrt) Q^T m_hat
        let qt_m = eig.eigenvectors.transpose() * &m_hat;
        let scaled = DVector::from_iterator(d, qt_m.iter().zip(inv_sqrt.iter()).map(|(x, s)| x * s));
        let update = &eig.eigenvectors * scaled;
        for i in 0..d {
            params[i] -= self.alpha * update[i];
        }
        Ok(())
    }
}

/// Learning-rate schedule for the remeshing optimizer: linear warm-up
/// followed by exponential decay, stopping once the rate falls below the
/// warm-up floor.
#[derive(Debug, Clone, Copy)]
pub struct MomentumSchedule {
    pub warmup_start: f64,
    pub warmup_end: f64,
    pub warmup_iters: u64,
    pub decay: f64,
    pub stop_below: f64,
}

impl Default for MomentumSchedule {
    fn default() -> Self {
        MomentumSchedule {
            warmup_start: 1e-4,
            warmup_end: 5e-4,
            warmup_iters: 500,
            decay: 0.9999,
            stop_below: 1e-4,
        }
    }
}

impl MomentumSchedule {
    /// Learning rate at (0-based) iteration `i`.
    pub fn lr_at(&self, i: u64) -> f64 {
        if i <= self.warmup_iters {
            let f = i as f64 / self.warmup_iters as f64;
            self.warmup_start + (self.warmup_end - self.warmup_start) * f
        } else {
            self.warmup_end * self.decay.powi((i - self.warmup_iters) as i32)
        }
    }
}

/// SGD with momentum over unit-normalized gradients.
#[derive(Debug, Clone)]
pub struct MomentumState {
    pub beta: f64,
    pub schedule: MomentumSchedule,
    velocity: Vec<f64>,
    iter: u64,
}

impl MomentumState {
    pub fn new(dim: usize, schedule: MomentumSchedule) -> Self {
        MomentumState { beta: 0.9, schedule, velocity: vec![0.0; dim], iter: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.schedule.lr_at(self.iter)
    }

    pub fn iter(&self) -> u64 {
        self.iter
    }

    /// True once the schedule has decayed below its stop threshold.
    pub fn finished(&self) -> bool {
        self.lr() < self.schedule.stop_below
    }

    /// One momentum update: `v <- beta v + g/|g|`, `theta <- theta - lr v`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        assert_eq!(params.len(), self.velocity.len());
        assert_eq!(grad.len(), self.velocity.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        let lr = self.lr();
        for i in 0..params.len() {
            self.velocity[i] = self.beta * self.velocity[i] + grad[i] * inv;
            params[i] -= lr * self.velocity[i];
        }
        self.iter += 1;
        Ok(())
    }
}
