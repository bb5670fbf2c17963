//! Numerical reference for the feasible-case primal, independent of the dual
//! derivation: projected gradient in whitened coordinates, where the trust
//! region becomes a ball and the projection onto ball ∩ halfspaces is computed
//! exactly by enumerating active sets.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::env::SimRng;
use crate::error::{contract, Error, Result};
use crate::linalg::DenseMatrix;

/// `min ĝᵀx  s.t.  b̂_iᵀx + c_i ≤ 0,  ½xᵀHx ≤ δ` with dense `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub h: DenseMatrix<f64>,
    pub ghat: Vec<f64>,
    pub constraints: Vec<(Vec<f64>, f64)>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iters: usize,
    /// Initial step, in units of `radius / ‖g̃‖`.
    pub step_scale: f64,
    /// Stop once an iteration moves less than `tol * radius`.
    pub tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { max_iters: 100_000, step_scale: 1e3, tol: 1e-15 }
    }
}

fn to_matrix(h: &DenseMatrix<f64>) -> DMatrix<f64> {
    let n = (h.as_slice().len() as f64).sqrt() as usize;
    DMatrix::from_row_slice(n, n, h.as_slice())
}

/// Projection onto `{‖y‖ ≤ radius} ∩ {a_iᵀy ≤ e_i}`.
struct Projector {
    radius: f64,
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

impl Projector {
    fn feasible(&self, y: &DVector<f64>) -> bool {
        let slack = 1e-12 * self.radius.max(1.0);
        y.norm() <= self.radius * (1.0 + 1e-12)
            && self.normals.iter().zip(&self.offsets).all(|(a, &e)| a.dot(y) <= e + slack * a.norm())
    }

    /// Projection onto `{a_iᵀy = e_i, i ∈ set}` and the minimum-norm point of that set.
    fn affine(&self, set: &[usize], z: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let k = set.len();
        let n = z.len();
        let a = DMatrix::from_fn(n, k, |r, c| self.normals[set[c]][r]);
        let e = DVector::from_iterator(k, set.iter().map(|&i| self.offsets[i]));
        let gram = a.transpose() * &a;
        let lu = gram.clone().lu();
        let det = lu.determinant();
        if det.abs() <= 1e-12 * gram.iter().map(|v| v * v).sum::<f64>().max(1e-300) {
            return None;
        }
        let w = lu.solve(&(a.transpose() * z - &e))?;
        let m = lu.solve(&e)?;
        Some((z - &a * w, &a * m))
    }

    fn project(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut consider = |y: DVector<f64>| {
            if self.feasible(&y) {
                let d = (&y - z).norm();
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, y));
                }
            }
        };
        consider(z.clone());
        let zn = z.norm();
        if zn > 0.0 {
            consider(z * (self.radius / zn));
        }
        let m = self.normals.len();
        let subsets: Vec<Vec<usize>> = (1..(1usize << m))
            .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
        for set in &subsets {
            let Some((za, p0)) = self.affine(set, z) else { continue };
            consider(za.clone());
            let rho2 = self.radius * self.radius - p0.norm_squared();
            if rho2 < 0.0 {
                continue;
            }
            let d = &za - &p0;
            let dn = d.norm();
            if dn > 0.0 {
                consider(&p0 + d * (rho2.sqrt() / dn));
            }
        }
        best.map(|b| b.1)
    }
}

/// Projected gradient with diminishing steps `η_k = η_0 / sqrt(k + 1)`.
pub fn solve_qp(inst: &QpInstance, settings: QpSettings) -> Result<QpSolution> {
    let n = inst.ghat.len();
    let h = to_matrix(&inst.h);
    if h.nrows() != n || inst.constraints.iter().any(|(b, _)| b.len() != n) {
        return Err(contract("qp instance dimensions disagree"));
    }
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Numerical("qp oracle needs a positive definite H".into()))?;
    let l = chol.l();
    let whiten = |v: &[f64]| -> Result<DVector<f64>> {
        l.solve_lower_triangular(&DVector::from_column_slice(v))
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))
    };
    let g = whiten(&inst.ghat)?;
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for (b, c) in &inst.constraints {
        normals.push(whiten(b)?);
        offsets.push(-c);
    }
    let radius = (2.0 * inst.delta).sqrt();
    let proj = Projector { radius, normals, offsets };

    let mut y = proj
        .project(&DVector::zeros(n))
        .ok_or_else(|| Error::InfeasibleSubproblem("qp oracle found no feasible point".into()))?;
    let gn = g.norm();
    let eta0 = if gn > 0.0 { settings.step_scale * radius / gn } else { 0.0 };
    let mut iterations = 0;
    let mut converged = gn == 0.0;
    while !converged && iterations < settings.max_iters {
        let eta = eta0 / ((iterations + 1) as f64).sqrt();
        let next = proj
            .project(&(&y - &g * eta))
            .ok_or_else(|| Error::Numerical("projection failed".into()))?;
        iterations += 1;
        converged = (&next - &y).norm() <= settings.tol * radius;
        y = next;
    }
    let x = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok(QpSolution { objective: g.dot(&y), x: x.iter().copied().collect(), iterations, converged })
}

/// Random instance with SPD `H = AᵀA/n + ½I` whose origin is feasible: each
/// `c_i = -u_i sqrt(2δ s_i)` with `u_i ∈ (0, 1.5)`, so constraints range from
/// cutting deep into the trust region to being slack. Constraint normals are
/// tilted toward `-ĝ` by a random amount so that all four cases occur.
pub fn random_feasible_instance(rng: &mut SimRng, dim: usize) -> QpInstance {
    let normal = |rng: &mut SimRng| -> f64 { StandardNormal.sample(rng) };
    let a = DMatrix::from_fn(dim, dim, |_, _| normal(rng));
    let h = a.transpose() * &a / dim as f64 + DMatrix::identity(dim, dim) * 0.5;
    let ghat: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let gnorm = ghat.iter().map(|g| g * g).sum::<f64>().sqrt();
    let delta = Uniform::new(0.01, 1.0).expect("valid range").sample(rng);
    let hinv = h.clone().cholesky().expect("SPD by construction").inverse();
    let u = Uniform::new(0.01, 1.5).expect("valid range");
    let constraints = (0..2)
        .map(|_| {
            // lean against the objective so the constraint tends to bind
            let lean = Uniform::new(0.0, 2.0).expect("valid range").sample(rng) / gnorm;
            let b: Vec<f64> = ghat.iter().map(|g| normal(rng) - lean * g * (dim as f64).sqrt()).collect();
            let bv = DVector::from_column_slice(&b);
            let s = bv.dot(&(&hinv * &bv));
            let c = -u.sample(rng) * (2.0 * delta * s).sqrt();
            (b, c)
        })
        .collect();
    let mut row_major = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            row_major.push(h[(i, j)]);
        }
    }
    QpInstance { h: DenseMatrix::from_row_major(dim, row_major), ghat, constraints, delta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::seeded_rng;

    #[test]
    fn unconstrained_ball_optimum() {
        let inst = QpInstance {
            h: DenseMatrix::identity(2),
            ghat: vec![1.0, 0.0],
            constraints: vec![],
            delta: 0.5,
        };
        let sol = solve_qp(&inst, QpSettings::default()).unwrap();
        assert!((sol.x[0] + 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
    }

    #[test]
    fn single_halfspace_example() {
        // x1 ≥ 0.5 inside the unit ball
        let inst = QpInstance {
            h: DenseMatrix::identity(2),
            ghat: vec![1.0, 1.0],
            constraints: vec![(vec![-1.0, 0.0], 0.5)],
            delta: 0.5,
        };
        let sol = solve_qp(&inst, QpSettings::default()).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] + 0.75f64.sqrt()).abs() < 1e-9);
        assert!((sol.objective - (0.5 - 0.75f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn random_instances_have_feasible_origin() {
        let mut rng = seeded_rng(4);
        for dim in [5, 17, 50] {
            let inst = random_feasible_instance(&mut rng, dim);
            assert!(inst.constraints.iter().all(|(_, c)| *c < 0.0));
            let sol = solve_qp(&inst, QpSettings::default()).unwrap();
            assert!(sol.converged, "dim {dim} took {} iterations", sol.iterations);
        }
    }
}
