use serde::{Deserialize, Serialize};

/// Adaptive-moment optimizer that ascends the supplied gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    /// One bias-corrected update: `params += lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "gradient length");
        assert_eq!(params.len(), self.m.len(), "optimizer state length");
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] += self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_counts_step() {
        let mut a = Adam::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        a.ascend(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(a.step, 1);
    }

    #[test]
    fn first_step_is_bias_corrected() {
        let mut a = Adam::new(2, 1e-3);
        let mut p = vec![0.0, 0.0];
        let g = [0.5, -4.0];
        a.ascend(&mut p, &g);
        for i in 0..2 {
            let expect = 1e-3 * g[i] / (g[i].abs() + 1e-8);
            assert!((p[i] - expect).abs() < 1e-18);
        }
    }

    #[test]
    fn maximizes_concave_quadratic() {
        // maximize -(x - 3)^2, gradient -2 (x - 3)
        let mut a = Adam::new(1, 0.05);
        let mut x: Vec<f64> = vec![0.0];
        let mut steps = 0;
        while (x[0] - 3.0).abs() >= 1e-6 || steps < 10 {
            let g = -2.0 * (x[0] - 3.0);
            a.ascend(&mut x, &[g]);
            steps += 1;
            assert!(steps <= 5000, "not converged, x = {}", x[0]);
        }
    }
}
