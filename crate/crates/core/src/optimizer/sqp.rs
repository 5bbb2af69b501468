//! Sequential quadratic programming driver: damped BFGS approximation of the
//! Lagrangian Hessian, active-set quadratic subproblems, an l1 merit line
//! search, and a Gauss-Newton restoration fallback for inconsistent
//! linearizations.

use super::problem::{AscentProblem, EvalOutput};
use super::qp::{solve_qp, QpProblem, QpSolution};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct SqpOptions {
    /// Scaled KKT/stationarity and equality-feasibility tolerance.
    pub tol: f64,
    /// Scaled inequality-violation tolerance.
    pub ineq_tol: f64,
    pub max_iter: usize,
    /// Infinity-norm cap on a single step, solver units.
    pub max_step: f64,
    /// Per-iteration diagnostics on stderr.
    pub verbose: bool,
}

impl Default for SqpOptions {
    fn default() -> Self {
        SqpOptions {
            tol: 1e-6,
            ineq_tol: 1e-8,
            max_iter: 250,
            max_step: 2.0,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The solver could not make progress (restoration failed or the line
    /// search collapsed away from a KKT point).
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SqpOutcome {
    pub x: DVector<f64>,
    pub output: EvalOutput,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub eq_norm: f64,
    pub ineq_violation: f64,
    pub lambda_eq: DVector<f64>,
    pub mu_ineq: DVector<f64>,
}

fn ineq_violation(out: &EvalOutput) -> f64 {
    out.ineq.iter().fold(0.0, |acc, &v| acc.max(-v))
}

fn merit(out: &EvalOutput, penalty: f64) -> f64 {
    let eq_l1: f64 = out.eq.iter().map(|v| v.abs()).sum();
    let in_l1: f64 = out.ineq.iter().map(|v| (-v).max(0.0)).sum();
    out.objective + penalty * (eq_l1 + in_l1)
}

/// Minimize the problem from `x0`.
pub fn solve(problem: &AscentProblem, x0: DVector<f64>, options: &SqpOptions) -> SqpOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut out = problem.evaluate(&x, false);
    let mut hessian = DMatrix::identity(n, n);
    let mut penalty: f64 = 10.0;
    let mut lambda_eq = DVector::zeros(out.eq.len());
    let mut mu_ineq = DVector::zeros(out.ineq.len());
    let mut prev_grad_lagrangian: Option<DVector<f64>> = None;
    let mut prev_step: Option<DVector<f64>> = None;
    let mut stalled = false;
    let mut restarts_left = 2;
    let mut iterations = 0;

    for iter in 0..options.max_iter {
        iterations = iter + 1;
        let grads = problem.gradient(&x, &out);

        // BFGS update with the gradient of the Lagrangian at the new point
        let grad_lagrangian = &grads.grad
            - grads.j_eq.transpose() * &lambda_eq
            - grads.j_ineq.transpose() * &mu_ineq;
        if let (Some(prev_g), Some(step)) = (prev_grad_lagrangian.take(), prev_step.take()) {
            let y = &grad_lagrangian - prev_g;
            bfgs_update(&mut hessian, &step, &y);
        }

        // convergence check at the current point
        let kkt = grad_lagrangian.amax();
        let eq_norm = out.eq.amax();
        let viol = ineq_violation(&out);
        let complementarity = (0..out.ineq.len())
            .map(|j| (mu_ineq[j] * out.ineq[j]).abs())
            .fold(0.0, f64::max);
        if kkt <= options.tol
            && eq_norm <= options.tol
            && viol <= options.ineq_tol
            && complementarity <= options.tol.sqrt()
        {
            return SqpOutcome {
                output: problem.evaluate(&x, true),
                x,
                status: SolveStatus::Converged,
                iterations,
                kkt_residual: kkt,
                eq_norm,
                ineq_violation: viol,
                lambda_eq,
                mu_ineq,
            };
        }

        // quadratic subproblem around the current point
        let qp = QpProblem {
            g_mat: hessian.clone(),
            g_vec: grads.grad.clone(),
            a_eq: grads.j_eq.clone(),
            b_eq: -&out.eq,
            a_in: grads.j_ineq.clone(),
            b_in: -&out.ineq,
        };
        let (mut d, qp_sol): (DVector<f64>, Option<QpSolution>) = match solve_qp(&qp) {
            Ok(sol) => (sol.d.clone(), Some(sol)),
            Err(_) => (restoration_step(&grads.j_eq, &out.eq, &grads.j_ineq, &out.ineq), None),
        };

        // cap the step length
        let d_max = d.amax();
        if d_max > options.max_step {
            d *= options.max_step / d_max;
        }
        // exact-penalty weight: large enough to dominate the multipliers,
        // allowed to relax as they shrink
        if let Some(sol) = &qp_sol {
            let needed = (1.5 * sol.lambda_eq.amax().max(sol.mu_in.amax())).max(1.0);
            penalty = if needed > penalty {
                needed
            } else {
                (0.5 * (penalty + needed)).max(needed)
            }
            .min(1e8);
        }

        // l1 merit backtracking line search with a predicted-descent test
        let violation_l1 = out.eq.iter().map(|v| v.abs()).sum::<f64>()
            + out.ineq.iter().map(|v| (-v).max(0.0)).sum::<f64>();
        let descent = grads.grad.dot(&d) - penalty * violation_l1;
        let merit0 = merit(&out, penalty);
        let mut alpha = 1.0;
        let mut accepted: Option<(DVector<f64>, EvalOutput, DVector<f64>)> = None;
        for backtrack in 0..30 {
            let x_trial = &x + alpha * &d;
            let trial = problem.evaluate(&x_trial, false);
            let target = if descent < 0.0 {
                merit0 + 1e-4 * alpha * descent
            } else {
                merit0 - 1e-12 * merit0.abs().max(1.0)
            };
            if !trial.penalized && merit(&trial, penalty) <= target {
                accepted = Some((x_trial, trial, alpha * &d));
                break;
            }
            // second-order correction after the first full-step rejection:
            // re-offset the equality linearization at the trial point
            if backtrack == 0 && !trial.penalized && qp_sol.is_some() {
                let soc_qp = QpProblem {
                    g_mat: hessian.clone(),
                    g_vec: grads.grad.clone(),
                    a_eq: grads.j_eq.clone(),
                    b_eq: &grads.j_eq * &d - &trial.eq,
                    a_in: grads.j_ineq.clone(),
                    b_in: -&out.ineq,
                };
                if let Ok(soc) = solve_qp(&soc_qp) {
                    let x_soc = &x + &soc.d;
                    let trial_soc = problem.evaluate(&x_soc, false);
                    if !trial_soc.penalized && merit(&trial_soc, penalty) <= target {
                        let step = soc.d.clone();
                        accepted = Some((x_soc, trial_soc, step));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        if options.verbose {
            eprintln!(
                "iter {iterations:3}  f {:12.4}  eq {eq_norm:9.2e}  viol {viol:9.2e}  \
                 kkt {kkt:9.2e}  pen {penalty:8.2e}  alpha {:8.2e}  qp {}",
                out.objective,
                accepted.as_ref().map_or(0.0, |(_, _, s)| s.amax() / d.amax().max(1e-300)),
                if qp_sol.is_some() { "ok" } else { "restore" },
            );
        }

        match accepted {
            Some((x_new, out_new, step)) => {
                prev_grad_lagrangian = Some(
                    &grads.grad
                        - grads.j_eq.transpose()
                            * qp_sol.as_ref().map_or(&lambda_eq, |s| &s.lambda_eq)
                        - grads.j_ineq.transpose()
                            * qp_sol.as_ref().map_or(&mu_ineq, |s| &s.mu_in),
                );
                prev_step = Some(step);
                x = x_new;
                out = out_new;
                if let Some(sol) = qp_sol {
                    lambda_eq = sol.lambda_eq;
                    mu_ineq = sol.mu_in;
                }
            }
            None => {
                // the merit function refuses every step: restart with a
                // fresh Hessian before giving up
                if restarts_left > 0 {
                    restarts_left -= 1;
                    hessian = DMatrix::identity(n, n);
                    prev_grad_lagrangian = None;
                    prev_step = None;
                    if options.verbose {
                        eprintln!("iter {iterations:3}  line search collapsed; Hessian reset");
                    }
                    continue;
                }
                stalled = !(kkt <= 100.0 * options.tol
                    && eq_norm <= 10.0 * options.tol
                    && viol <= 1e-6);
                break;
            }
        }
    }

    let grads = problem.gradient(&x, &out);
    let grad_lagrangian =
        &grads.grad - grads.j_eq.transpose() * &lambda_eq - grads.j_ineq.transpose() * &mu_ineq;
    let kkt = grad_lagrangian.amax();
    let eq_norm = out.eq.amax();
    let viol = ineq_violation(&out);
    let status = if kkt <= options.tol && eq_norm <= options.tol && viol <= options.ineq_tol {
        SolveStatus::Converged
    } else if stalled {
        SolveStatus::Stalled
    } else {
        SolveStatus::MaxIterations
    };
    SqpOutcome {
        output: problem.evaluate(&x, true),
        x,
        status,
        iterations,
        kkt_residual: kkt,
        eq_norm,
        ineq_violation: viol,
        lambda_eq,
        mu_ineq,
    }
}

/// Damped BFGS update keeping the approximation positive definite.
fn bfgs_update(hessian: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let s_norm = s.norm();
    if s_norm < 1e-14 {
        return;
    }
    let bs = &*hessian * s;
    let s_bs = s.dot(&bs);
    let s_y = s.dot(y);
    // Powell damping toward the current curvature
    let theta = if s_y >= 0.2 * s_bs {
        1.0
    } else {
        0.8 * s_bs / (s_bs - s_y)
    };
    let y_damped = theta * y + (1.0 - theta) * &bs;
    let s_yd = s.dot(&y_damped);
    if s_yd <= 1e-12 * s_norm * y_damped.norm().max(1e-12) {
        return;
    }
    let rank1_a = &y_damped * y_damped.transpose() / s_yd;
    let rank1_b = &bs * bs.transpose() / s_bs;
    *hessian += rank1_a - rank1_b;
}

/// Damped Gauss-Newton step toward constraint feasibility, used when the
/// quadratic subproblem is inconsistent: minimize the squared violation of
/// the equalities and of the violated inequalities.
fn restoration_step(
    j_eq: &DMatrix<f64>,
    c_eq: &DVector<f64>,
    j_in: &DMatrix<f64>,
    c_in: &DVector<f64>,
) -> DVector<f64> {
    let n = j_eq.ncols();
    let mut jtj = DMatrix::zeros(n, n);
    let mut jtc = DVector::zeros(n);
    for i in 0..c_eq.len() {
        let row = j_eq.row(i).transpose();
        jtj += &row * row.transpose();
        jtc += row * c_eq[i];
    }
    for j in 0..c_in.len() {
        if c_in[j] < 0.0 {
            let row = j_in.row(j).transpose();
            jtj += &row * row.transpose();
            jtc += row * c_in[j];
        }
    }
    for i in 0..n {
        jtj[(i, i)] += 1e-6;
    }
    jtj.full_piv_lu()
        .solve(&(-jtc))
        .unwrap_or_else(|| DVector::zeros(n))
}
