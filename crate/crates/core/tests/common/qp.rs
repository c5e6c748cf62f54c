//! Coordination QP against exhaustive active-set enumeration.

use lanechange::coordinator::{solve_coordination_qp, ConsensusState, HeadwayEdge, HeadwayGraph, SlackMode};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const RHO: f64 = 100.0;
pub const D_HW: f64 = 15.0;

struct Instance {
    s: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    q: f64,
    mode: SlackMode,
}

impl Instance {
    fn random(rng: &mut ChaCha8Rng, n: usize, mode: SlackMode) -> Self {
        // leader 0 ahead of follower 1 by somewhere between a clear violation
        // and a comfortable gap
        let gap0 = rng.gen_range(5.0..25.0);
        let v0 = rng.gen_range(1.0..1.6);
        let v1 = rng.gen_range(1.0..1.6);
        let s = vec![
            (0..n).map(|j| gap0 + v0 * j as f64 + rng.gen_range(-0.3..0.3)).collect(),
            (0..n).map(|j| v1 * j as f64 + rng.gen_range(-0.3..0.3)).collect(),
        ];
        let lambda = (0..2).map(|_| (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect()).collect();
        Self { s, lambda, q: 10f64.powf(rng.gen_range(-1.0..3.0)), mode }
    }

    fn n(&self) -> usize {
        self.s[0].len()
    }

    fn n_slack(&self) -> usize {
        self.mode.count(1, self.n())
    }

    /// Objective written out from the coordination problem statement.
    fn objective(&self, z: &[Vec<f64>], eps: &[f64]) -> f64 {
        let mut v = self.q * eps.iter().sum::<f64>();
        for i in 0..2 {
            for j in 0..self.n() {
                let d = self.s[i][j] - z[i][j];
                v += -self.lambda[i][j] * z[i][j] + 0.5 * RHO * d * d;
            }
        }
        v
    }

    /// Rows `a x <= b` over `x = [z_0, z_1, eps]`.
    fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.n();
        let dim = 2 * n + self.n_slack();
        let mut rows = Vec::new();
        for j in 0..n {
            let mut a = vec![0.0; dim];
            a[n + j] = 1.0;
            a[j] = -1.0;
            a[2 * n + self.mode.index(0, j, n)] = -1.0;
            rows.push((a, -D_HW));
        }
        for k in 0..self.n_slack() {
            let mut a = vec![0.0; dim];
            a[2 * n + k] = -1.0;
            rows.push((a, 0.0));
        }
        rows
    }

    /// Tries every subset of rows as the active set and keeps the best
    /// feasible stationary point.
    fn brute_force(&self) -> (Vec<f64>, f64) {
        let n = self.n();
        let dim = 2 * n + self.n_slack();
        let rows = self.rows();
        let mut h = vec![RHO; 2 * n];
        h.resize(dim, 0.0);
        let mut c: Vec<f64> = (0..2).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| -self.lambda[i][j] - RHO * self.s[i][j]).collect();
        c.resize(dim, self.q);

        let mut best: Option<(Vec<f64>, f64)> = None;
        for mask in 0u32..(1 << rows.len()) {
            let active: Vec<usize> = (0..rows.len()).filter(|r| mask & (1 << r) != 0).collect();
            let m = active.len();
            let mut kkt = DMatrix::zeros(dim + m, dim + m);
            let mut rhs = DVector::zeros(dim + m);
            for i in 0..dim {
                kkt[(i, i)] = h[i];
                rhs[i] = -c[i];
            }
            for (r, &row) in active.iter().enumerate() {
                for i in 0..dim {
                    kkt[(dim + r, i)] = rows[row].0[i];
                    kkt[(i, dim + r)] = rows[row].0[i];
                }
                rhs[dim + r] = rows[row].1;
            }
            let sv = kkt.singular_values();
            if sv.min() < 1e-9 * sv.max() {
                continue;
            }
            let sol = kkt.full_piv_lu().solve(&rhs).expect("nonsingular by the check above");
            let x: Vec<f64> = sol.iter().take(dim).copied().collect();
            let feasible = rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() <= b + 1e-9);
            let dual_ok = (0..m).all(|r| sol[dim + r] >= -1e-9);
            if !(feasible && dual_ok) {
                continue;
            }
            let z = vec![x[..n].to_vec(), x[n..2 * n].to_vec()];
            let value = self.objective(&z, &x[2 * n..]);
            if best.as_ref().is_none_or(|(_, v)| value < *v) {
                best = Some((x, value));
            }
        }
        best.expect("a bounded convex QP has a KKT point")
    }
}

pub fn graph(q: f64, mode: SlackMode) -> HeadwayGraph {
    HeadwayGraph::new(vec![HeadwayEdge { follower: 1, leader: 0, slack_weight: q, until_lane_change_done: false }], D_HW, 2)
        .unwrap()
        .with_slack(mode)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct QpReport {
    pub checked: usize,
    /// Largest coordinate gap to the enumerated solution.
    pub worst_deviation: f64,
    /// Largest objective gap, relative to `max(1, |best|)`.
    pub worst_objective: f64,
    pub worst_kkt: f64,
}

/// Two agents, one edge, horizons 1 to 3 and both slack layouts; 40 random
/// instances per combination.
pub fn brute_force_check(seed: u64) -> QpReport {
    let mut rng = super::rng(seed);
    let mut report = QpReport::default();
    for mode in [SlackMode::PerEdge, SlackMode::PerStage] {
        for n in 1..=3 {
            for _ in 0..40 {
                let inst = Instance::random(&mut rng, n, mode);
                let state = ConsensusState::new(inst.s.clone(), inst.lambda.clone(), RHO).unwrap();
                let c = solve_coordination_qp(&inst.s, &state, &graph(inst.q, mode), &[0], None).unwrap();
                let (x, best) = inst.brute_force();
                let ours: Vec<f64> = c.z.iter().flatten().chain(&c.slack).copied().collect();
                for (a, b) in ours.iter().zip(&x) {
                    report.worst_deviation = report.worst_deviation.max((a - b).abs());
                }
                let value = inst.objective(&c.z, &c.slack);
                report.worst_objective = report.worst_objective.max((value - best).abs() / best.abs().max(1.0));
                report.worst_kkt = report.worst_kkt.max(c.kkt.max());
                report.checked += 1;
            }
        }
    }
    report
}
