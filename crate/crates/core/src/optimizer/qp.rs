//! Dense strictly-convex quadratic subproblem solver (dual active-set
//! method): minimize 1/2 d'G d + g'd subject to linear equalities and
//! inequalities. Starts at the unconstrained minimum and adds violated
//! constraints one at a time, taking dual steps that keep the multipliers
//! sign-feasible, so it needs no feasible starting point and terminates
//! finitely for positive definite G.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Quadratic subproblem in standard form:
/// minimize 1/2 d' G d + g' d
/// s.t.     a_eq_i' d = b_eq_i        (i in equalities)
///          a_in_j' d >= b_in_j       (j in inequalities)
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    /// Equality rows (one per row of the matrix).
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    /// Inequality rows.
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub d: DVector<f64>,
    /// Multipliers of the equality rows.
    pub lambda_eq: DVector<f64>,
    /// Multipliers of the inequality rows (non-negative, zero when inactive).
    pub mu_in: DVector<f64>,
}

const FEAS_TOL: f64 = 1e-9;

struct DualState {
    /// Inverse of the (positive definite) Hessian.
    g_inv: DMatrix<f64>,
    x: DVector<f64>,
    /// Active constraint normals, one column each.
    normals: Vec<DVector<f64>>,
    /// Multiplier per active constraint.
    multipliers: Vec<f64>,
    /// Row identity per active constraint: equality index or inequality index.
    members: Vec<Member>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Member {
    Equality(usize),
    Inequality(usize),
}

impl DualState {
    /// Step directions for a candidate normal: `z` is the primal direction,
    /// `r` the dual response of the active multipliers. Errors when the
    /// active normals have degenerated (numerically dependent set).
    fn directions(&self, normal: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let m = self.normals.len();
        if m == 0 {
            return Ok((&self.g_inv * normal, DVector::zeros(0)));
        }
        let n = normal.len();
        let mut n_mat = DMatrix::zeros(n, m);
        for (j, col) in self.normals.iter().enumerate() {
            n_mat.set_column(j, col);
        }
        let gi_n = &self.g_inv * &n_mat;
        let m_mat = n_mat.transpose() * &gi_n;
        let rhs = n_mat.transpose() * (&self.g_inv * normal);
        let r = m_mat
            .full_piv_lu()
            .solve(&rhs)
            .ok_or_else(|| Error::QpFailure("active-set normals are dependent".into()))?;
        let z = &self.g_inv * normal - gi_n * &r;
        Ok((z, r))
    }
}

/// Solve the subproblem. Errors when the constraints are inconsistent.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    let n = problem.g_vec.len();
    let m_eq = problem.b_eq.len();
    let m_in = problem.b_in.len();

    let g_inv = problem
        .g_mat
        .clone()
        .cholesky()
        .ok_or_else(|| Error::QpFailure("Hessian is not positive definite".into()))?
        .inverse();

    let mut state = DualState {
        x: -(&g_inv * &problem.g_vec),
        g_inv,
        normals: Vec::new(),
        multipliers: Vec::new(),
        members: Vec::new(),
    };

    // install the equality constraints first; their multipliers are free
    for i in 0..m_eq {
        let normal = problem.a_eq.row(i).transpose();
        let slack = normal.dot(&state.x) - problem.b_eq[i];
        let (z, r) = state.directions(&normal)?;
        let ztn = z.dot(&normal);
        if ztn.abs() < 1e-12 {
            if slack.abs() > 1e-7 {
                return Err(Error::QpFailure(format!(
                    "equality row {i} is inconsistent with the previous rows"
                )));
            }
            // redundant equality: keep it out of the active set
            continue;
        }
        let t = -slack / ztn;
        state.x += t * &z;
        for (k, u) in state.multipliers.iter_mut().enumerate() {
            *u -= t * r[k];
        }
        state.normals.push(normal);
        state.multipliers.push(t);
        state.members.push(Member::Equality(i));
    }

    // dual iterations over the inequalities
    let max_iter = 10 * (n + m_eq + m_in) + 50;
    for _ in 0..max_iter {
        // most violated inequality not in the active set
        let mut candidate: Option<(usize, f64)> = None;
        for j in 0..m_in {
            if state.members.contains(&Member::Inequality(j)) {
                continue;
            }
            let slack = problem.a_in.row(j).transpose().dot(&state.x) - problem.b_in[j];
            if slack < -FEAS_TOL && candidate.map_or(true, |(_, s)| slack < s) {
                candidate = Some((j, slack));
            }
        }
        let Some((p, _)) = candidate else {
            // optimal: collect multipliers
            let mut lambda_eq = DVector::zeros(m_eq);
            let mut mu_in = DVector::zeros(m_in);
            for (k, member) in state.members.iter().enumerate() {
                match member {
                    Member::Equality(i) => lambda_eq[*i] = state.multipliers[k],
                    Member::Inequality(j) => mu_in[*j] = state.multipliers[k].max(0.0),
                }
            }
            return Ok(QpSolution {
                d: state.x,
                lambda_eq,
                mu_in,
            });
        };

        let normal = problem.a_in.row(p).transpose();
        let mut u_p: f64 = 0.0;

        // inner loop: take full or partial steps until constraint p becomes
        // active or the problem is declared infeasible. Constraints join the
        // active set only through a full step, which keeps the active
        // normals linearly independent.
        let inner_cap = 2 * (n + m_eq + m_in) + 10;
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > inner_cap {
                return Err(Error::QpFailure("dual inner loop did not settle".into()));
            }
            let slack = normal.dot(&state.x) - problem.b_in[p];
            let (z, r) = state.directions(&normal)?;
            let ztn = z.dot(&normal);

            // partial step bound: first active inequality whose multiplier
            // would cross zero
            let mut t1 = f64::INFINITY;
            let mut drop_idx: Option<usize> = None;
            for (k, member) in state.members.iter().enumerate() {
                if let Member::Inequality(_) = member {
                    if r[k] > 1e-14 {
                        let bound = state.multipliers[k] / r[k];
                        if bound < t1 {
                            t1 = bound;
                            drop_idx = Some(k);
                        }
                    }
                }
            }
            let t2 = if ztn > 1e-12 {
                (-slack / ztn).max(0.0)
            } else {
                f64::INFINITY
            };

            if !t1.is_finite() && !t2.is_finite() {
                return Err(Error::QpFailure(format!(
                    "inequality row {p} makes the subproblem infeasible"
                )));
            }

            let t = t1.min(t2);
            state.x += t * &z;
            for (k, u) in state.multipliers.iter_mut().enumerate() {
                *u -= t * r[k];
            }
            u_p += t;
            if t2 <= t1 {
                // full step: p becomes active with an independent normal
                state.normals.push(normal.clone());
                state.multipliers.push(u_p.max(0.0));
                state.members.push(Member::Inequality(p));
                break;
            }
            // partial step: retire the blocking constraint and try again
            let k = drop_idx.expect("finite t1 implies a blocking constraint");
            state.normals.remove(k);
            state.multipliers.remove(k);
            state.members.remove(k);
        }
    }
    Err(Error::QpFailure("dual iteration limit exceeded".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn unconstrained_minimum() {
        let p = QpProblem {
            g_mat: DMatrix::identity(2, 2),
            g_vec: dv(&[1.0, -2.0]),
            a_eq: DMatrix::zeros(0, 2),
            b_eq: dv(&[]),
            a_in: DMatrix::zeros(0, 2),
            b_in: dv(&[]),
        };
        let s = solve_qp(&p).unwrap();
        assert_relative_eq!(s.d[0], -1.0, max_relative = 1e-12);
        assert_relative_eq!(s.d[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn equality_constrained_minimum() {
        // min 1/2 |d|^2 s.t. d0 + d1 = 1 -> d = (0.5, 0.5)
        let p = QpProblem {
            g_mat: DMatrix::identity(2, 2),
            g_vec: dv(&[0.0, 0.0]),
            a_eq: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            b_eq: dv(&[1.0]),
            a_in: DMatrix::zeros(0, 2),
            b_in: dv(&[]),
        };
        let s = solve_qp(&p).unwrap();
        assert_relative_eq!(s.d[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(s.d[1], 0.5, max_relative = 1e-12);
        assert_relative_eq!(s.lambda_eq[0], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn active_inequality_binds() {
        // min 1/2 |d - (2,0)|^2 s.t. d0 <= 1, i.e. -d0 >= -1
        let p = QpProblem {
            g_mat: DMatrix::identity(2, 2),
            g_vec: dv(&[-2.0, 0.0]),
            a_eq: DMatrix::zeros(0, 2),
            b_eq: dv(&[]),
            a_in: DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            b_in: dv(&[-1.0]),
        };
        let s = solve_qp(&p).unwrap();
        assert_relative_eq!(s.d[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.d[1], 0.0, max_relative = 1e-9, epsilon = 1e-12);
        assert!(s.mu_in[0] > 0.0);
    }

    #[test]
    fn detects_infeasible_rows() {
        // d0 >= 1 and -d0 >= 0 cannot both hold
        let p = QpProblem {
            g_mat: DMatrix::identity(1, 1),
            g_vec: dv(&[0.0]),
            a_eq: DMatrix::zeros(0, 1),
            b_eq: dv(&[]),
            a_in: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            b_in: dv(&[1.0, 0.0]),
        };
        assert!(solve_qp(&p).is_err());
    }

    /// KKT re-solve for a fixed active set, used only by the enumeration
    /// oracle below.
    fn kkt_for_active(
        p: &QpProblem,
        active: &[usize],
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = p.g_vec.len();
        let m_eq = p.b_eq.len();
        let m = m_eq + active.len();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.g_mat);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&p.g_vec));
        for i in 0..m_eq {
            for c in 0..n {
                kkt[(c, n + i)] = -p.a_eq[(i, c)];
                kkt[(n + i, c)] = p.a_eq[(i, c)];
            }
            rhs[n + i] = p.b_eq[i];
        }
        for (pos, &j) in active.iter().enumerate() {
            let row = n + m_eq + pos;
            for c in 0..n {
                kkt[(c, row)] = -p.a_in[(j, c)];
                kkt[(row, c)] = p.a_in[(j, c)];
            }
            rhs[row] = p.b_in[j];
        }
        let det_threshold = 1e-10;
        let lu = kkt.full_piv_lu();
        if lu.determinant().abs() < det_threshold {
            return None;
        }
        let sol = lu.solve(&rhs)?;
        Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
    }

    /// Enumeration oracle: try every subset of inequalities as the active
    /// set, keep the best KKT-consistent feasible point.
    fn oracle(p: &QpProblem) -> Option<DVector<f64>> {
        let m_in = p.b_in.len();
        let m_eq = p.b_eq.len();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0..(1usize << m_in) {
            let active: Vec<usize> = (0..m_in).filter(|j| mask & (1 << j) != 0).collect();
            let Some((d, lambda)) = kkt_for_active(p, &active) else {
                continue;
            };
            if active
                .iter()
                .enumerate()
                .any(|(pos, _)| lambda[m_eq + pos] < -1e-8)
            {
                continue;
            }
            let feasible = (0..m_in)
                .all(|j| p.a_in.row(j).transpose().dot(&d) - p.b_in[j] >= -1e-7)
                && (0..m_eq)
                    .all(|i| (p.a_eq.row(i).transpose().dot(&d) - p.b_eq[i]).abs() <= 1e-7);
            if !feasible {
                continue;
            }
            let obj = 0.5 * (&p.g_mat * &d).dot(&d) + p.g_vec.dot(&d);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, d));
            }
        }
        best.map(|(_, d)| d)
    }

    #[test]
    fn matches_enumeration_oracle_on_random_problems() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut compared = 0;
        for _ in 0..400 {
            let n = rng.gen_range(2..=5);
            let m_eq = rng.gen_range(0..n.min(2));
            let m_in = rng.gen_range(0..=7);

            // positive definite G = A'A + I
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let g_mat = &a.transpose() * &a + DMatrix::identity(n, n);
            let g_vec = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let a_eq = DMatrix::from_fn(m_eq, n, |_, _| rng.gen_range(-1.0..1.0));
            let b_eq = DVector::from_fn(m_eq, |_, _| rng.gen_range(-1.0..1.0));
            let a_in = DMatrix::from_fn(m_in, n, |_, _| rng.gen_range(-1.0..1.0));
            let b_in = DVector::from_fn(m_in, |_, _| rng.gen_range(-1.5..0.5));

            let p = QpProblem {
                g_mat,
                g_vec,
                a_eq,
                b_eq,
                a_in,
                b_in,
            };
            let Some(reference) = oracle(&p) else {
                continue;
            };
            let s = solve_qp(&p).expect("solver should succeed where the oracle found a point");
            let obj = |d: &DVector<f64>| 0.5 * (&p.g_mat * d).dot(d) + p.g_vec.dot(d);
            assert_relative_eq!(obj(&s.d), obj(&reference), max_relative = 1e-6, epsilon = 1e-8);
            compared += 1;
        }
        assert!(compared > 100, "only {compared} problems were comparable");
    }

    #[test]
    fn stationarity_of_the_returned_point() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = 4;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let p = QpProblem {
                g_mat: &a.transpose() * &a + DMatrix::identity(n, n),
                g_vec: DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)),
                a_eq: DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0)),
                b_eq: DVector::from_fn(1, |_, _| rng.gen_range(-0.5..0.5)),
                a_in: DMatrix::from_fn(4, n, |_, _| rng.gen_range(-1.0..1.0)),
                b_in: DVector::from_fn(4, |_, _| rng.gen_range(-1.0..0.2)),
            };
            let Ok(s) = solve_qp(&p) else { continue };
            // gradient of the Lagrangian vanishes
            let grad = &p.g_mat * &s.d + &p.g_vec
                - p.a_eq.transpose() * &s.lambda_eq
                - p.a_in.transpose() * &s.mu_in;
            assert!(grad.amax() < 1e-7, "stationarity residual {}", grad.amax());
            // complementarity and primal feasibility
            for j in 0..p.b_in.len() {
                let slack = p.a_in.row(j).transpose().dot(&s.d) - p.b_in[j];
                assert!(s.mu_in[j] * slack < 1e-6);
                assert!(slack > -1e-7);
            }
        }
    }
}
