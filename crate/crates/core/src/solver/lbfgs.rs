use std::collections::VecDeque;

/// Limited-memory inverse-Hessian approximation applied via the two-loop
/// recursion.
#[derive(Debug, Clone)]
pub(crate) struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl Lbfgs {
    pub fn new(memory: usize) -> Self {
        Self { memory: memory.max(1), pairs: VecDeque::with_capacity(memory) }
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores `(s, y)` unless the curvature `s'y` is too small relative to
    /// `|s|^2`. Returns whether the pair was kept.
    pub fn update(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        if !(sy > 1e-10 * ss) || !sy.is_finite() {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Overwrites `q` with `H q`.
    pub fn apply(&self, q: &mut [f64]) {
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, q);
            axpy(q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, q);
            axpy(q, a - b, s);
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_inverse_of_diagonal_quadratic() {
        // Secant pairs of f = 1/2 x' diag(d) x along coordinate axes.
        let d = [2.0, 5.0, 0.5];
        let mut lbfgs = Lbfgs::new(5);
        for i in 0..3 {
            let mut s = vec![0.0; 3];
            s[i] = 1.0;
            let y: Vec<f64> = s.iter().zip(&d).map(|(s, d)| s * d).collect();
            assert!(lbfgs.update(s, y));
        }
        let mut q = vec![2.0, 5.0, 0.5];
        lbfgs.apply(&mut q);
        for v in q {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_curvature() {
        let mut lbfgs = Lbfgs::new(3);
        assert!(!lbfgs.update(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(lbfgs.is_empty());
    }
}
