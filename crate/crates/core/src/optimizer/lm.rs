//! Bounded Levenberg-Marquardt with Marquardt (diagonal) scaling.
//!
//! Damping starts at `initial_damping`, is multiplied by 10 on a rejected
//! step and divided by 10 on an accepted one. Scale knots sitting on a box
//! bound whose gradient points outward are held fixed for that step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CorrectionProblem, OptimizerConfig};

const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative cost decrease of an accepted step fell below the tolerance.
    CostConverged,
    /// Projected gradient ∞-norm fell below the tolerance.
    GradientConverged,
    /// No decreasing step exists even under maximal damping.
    DampingSaturated,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

pub(crate) struct Outcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

pub(crate) fn minimize(problem: &CorrectionProblem<'_>, mut x: DVector<f64>, config: &OptimizerConfig) -> Outcome {
    let tol = config.convergence_tol;
    let mut lambda = config.initial_damping;
    let mut residual = problem.residuals(&x);
    let mut cost = residual.norm_squared();
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(&x);
        let mut jtj = jac.tr_mul(&jac);
        let mut grad = jac.tr_mul(&residual);

        let n = x.len();
        let mut pinned = alloc::vec![false; n];
        for (i, p) in pinned.iter_mut().enumerate() {
            *p = match problem.at_lower_bound(&x, i) {
                Some(true) => grad[i] > 0.0,
                Some(false) => grad[i] < 0.0,
                None => false,
            };
        }
        for i in (0..n).filter(|&i| pinned[i]) {
            jtj.row_mut(i).fill(0.0);
            jtj.column_mut(i).fill(0.0);
            grad[i] = 0.0;
        }
        if grad.amax() * 2.0 < tol {
            return Outcome {
                x,
                iterations,
                termination: Termination::GradientConverged,
            };
        }

        let diag: DVector<f64> = jtj.diagonal().map(|d| d.max(1e-9));
        loop {
            let step = damped_step(&jtj, &grad, &diag, lambda, &pinned);
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    return Outcome {
                        x,
                        iterations,
                        termination: Termination::DampingSaturated,
                    };
                }
                continue;
            };
            let mut candidate = &x + &step;
            problem.project(&mut candidate);
            let cand_residual = problem.residuals(&candidate);
            let cand_cost = cand_residual.norm_squared();
            if cand_cost.is_finite() && cand_cost < cost {
                let decrease = (cost - cand_cost) / cost.max(f64::MIN_POSITIVE);
                x = candidate;
                residual = cand_residual;
                cost = cand_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if decrease < tol {
                    return Outcome {
                        x,
                        iterations,
                        termination: Termination::CostConverged,
                    };
                }
                break;
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                return Outcome {
                    x,
                    iterations,
                    termination: Termination::DampingSaturated,
                };
            }
        }
    }
    Outcome {
        x,
        iterations,
        termination: Termination::MaxIterations,
    }
}

fn damped_step(
    jtj: &DMatrix<f64>,
    grad: &DVector<f64>,
    diag: &DVector<f64>,
    lambda: f64,
    pinned: &[bool],
) -> Option<DVector<f64>> {
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += if pinned[i] { 1.0 } else { lambda * diag[i] };
    }
    let chol = a.cholesky()?;
    let step = -chol.solve(grad);
    step.iter().all(|v| v.is_finite()).then_some(step)
}
