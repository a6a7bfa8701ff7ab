//! Per-frequency constrained least squares:
//!
//! ```text
//! minimize ||G w - b||^2   subject to   d^T w = 1,   |d^T w|^2 / (w^H w) >= gamma
//! ```
//!
//! With the distortionless constraint active the WNG bound is `||w||^2 <= 1/gamma`.
//! Writing `w = w0 + V z` with `w0 = conj(d)/||d||^2` and `V` an orthonormal
//! basis of `{v : d^T v = 0}` gives `||w||^2 = ||w0||^2 + ||z||^2`, and the
//! problem becomes a trust-region subproblem in `z`, solved through the ridge
//! normal equations `(A^H A + lambda I) z = A^H r` with `lambda` found by
//! bisection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::steering::SteeringMatrix;

/// Relative tolerance on `||z||` when the WNG constraint is active.
pub const NORM_REL_TOL: f64 = 1e-10;
/// Cap on bracket doublings and on bisection steps.
pub const MAX_BISECTION_STEPS: usize = 200;

/// Optimal weights at one design frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowbandWeights {
    pub freq_hz: f64,
    pub w: Vec<Complex64>,
    /// Ridge multiplier of the WNG constraint (0 when inactive).
    pub lambda: f64,
    /// `||G w - b||^2`
    pub residual: f64,
    /// Achieved `|w^T d|^2 / (w^H w)`.
    pub wng_linear: f64,
}

impl NarrowbandWeights {
    pub fn wng_db(&self) -> f64 {
        10.0 * self.wng_linear.log10()
    }
}

/// Householder reflector whose first column is parallel to `c` (unit norm);
/// the remaining columns span the orthogonal complement of `c`.
fn complement_basis(c: &DVector<Complex64>) -> DMatrix<Complex64> {
    let n = c.len();
    let mut e1 = DVector::from_element(n, Complex64::new(0.0, 0.0));
    e1[0] = Complex64::new(1.0, 0.0);
    let phase = if c[0].norm() > 0.0 {
        c[0] / c[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    // v = c + phase * e1 reflects c onto -phase * e1 without cancellation.
    let v = c + e1 * phase;
    let vv = v.dotc(&v).re;
    let mut h = DMatrix::<Complex64>::identity(n, n);
    if vv > 0.0 {
        h -= (&v * v.adjoint()) * Complex64::new(2.0 / vv, 0.0);
    }
    h.columns(1, n - 1).into_owned()
}

fn ridge_solution(
    gram: &DMatrix<Complex64>,
    rhs: &DVector<Complex64>,
    lambda: f64,
) -> Result<DVector<Complex64>> {
    let mut m = gram.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += Complex64::new(lambda, 0.0);
    }
    m.cholesky()
        .map(|ch| ch.solve(rhs))
        .ok_or_else(|| Error::Singular(format!("ridge system not positive definite at lambda={lambda}")))
}

/// Solves the robust LS problem at one frequency.
pub fn solve_narrowband(
    sm: &SteeringMatrix,
    desired: &DVector<Complex64>,
    gamma_linear: f64,
) -> Result<NarrowbandWeights> {
    let g = &sm.entries;
    let d = &sm.look_vector;
    let (m, n) = g.shape();
    if m == 0 || n == 0 {
        return Err(Error::Singular("empty steering matrix".into()));
    }
    if desired.len() != m {
        return Err(Error::InvalidArgument(format!(
            "desired response has {} entries for {m} directions",
            desired.len()
        )));
    }
    if !(gamma_linear > 0.0) || !gamma_linear.is_finite() {
        return Err(Error::InvalidArgument(format!("WNG bound must be positive, got {gamma_linear}")));
    }
    let d_norm2 = d.norm_squared();
    if !(d_norm2 > 0.0) {
        return Err(Error::Singular("look vector has zero norm".into()));
    }
    if gamma_linear > d_norm2 * (1.0 + 1e-12) {
        return Err(Error::InfeasibleWng {
            gamma_db: 10.0 * gamma_linear.log10(),
            max_wng_db: 10.0 * d_norm2.log10(),
        });
    }

    let d_conj = d.map(|x| x.conj());
    let w0 = &d_conj / Complex64::new(d_norm2, 0.0);
    let radius2 = (1.0 / gamma_linear - 1.0 / d_norm2).max(0.0);
    let radius = radius2.sqrt();

    let (z, lambda) = if n == 1 {
        (DVector::zeros(0), 0.0)
    } else {
        let basis = complement_basis(&(&d_conj / Complex64::new(d_norm2.sqrt(), 0.0)));
        let a = g * &basis;
        let r = desired - g * &w0;
        let z = solve_trust_region(&a, &r, radius, g.norm())?;
        (basis * z.0, z.1)
    };

    let w = w0 + z;
    let resid = (g * &w - desired).norm_squared();
    let gain = d.transpose() * &w;
    let wng = gain[(0, 0)].norm_sqr() / w.norm_squared();
    Ok(NarrowbandWeights {
        freq_hz: sm.freq_hz,
        w: w.iter().copied().collect(),
        lambda,
        residual: resid,
        wng_linear: wng,
    })
}

/// `min ||A z - r||` subject to `||z|| <= radius`; returns `(z, lambda)`.
fn solve_trust_region(
    a: &DMatrix<Complex64>,
    r: &DVector<Complex64>,
    radius: f64,
    scale: f64,
) -> Result<(DVector<Complex64>, f64)> {
    let k = a.ncols();
    if r.norm() == 0.0 || radius == 0.0 {
        return Ok((DVector::zeros(k), 0.0));
    }
    // Interior check with the minimum-norm least-squares solution. Singular
    // values are judged against ||G||, since A = G V can vanish up to rounding.
    let scale = scale.max(1e-300);
    let z0 = a
        .clone()
        .svd(true, true)
        .solve(r, 1e-13 * scale)
        .map_err(|e| Error::Singular(e.to_string()))?;
    if z0.norm() <= radius {
        return Ok((z0, 0.0));
    }

    let gram = a.adjoint() * a;
    let rhs = a.adjoint() * r;
    let norm_at = |lambda: f64| -> Result<(DVector<Complex64>, f64)> {
        let z = ridge_solution(&gram, &rhs, lambda)?;
        let nz = z.norm();
        Ok((z, nz))
    };

    let mut hi = 1.0;
    let mut best = norm_at(hi)?;
    let mut doublings = 0;
    while best.1 > radius {
        doublings += 1;
        if doublings > MAX_BISECTION_STEPS {
            return Err(Error::Singular("could not bracket the ridge multiplier".into()));
        }
        hi *= 2.0;
        best = norm_at(hi)?;
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTION_STEPS {
        if (best.1 - radius).abs() <= NORM_REL_TOL * radius {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let trial = norm_at(mid)?;
        if trial.1 > radius {
            lo = mid;
        } else {
            hi = mid;
            best = trial;
        }
    }
    Ok((best.0, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{direction_grid, ArrayGeometry, Direction};
    use crate::steering::{steering_matrix, SteeringModel};

    #[test]
    fn complement_is_orthonormal() {
        let c = DVector::from_vec(vec![
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.5, 0.1),
            Complex64::new(0.0, 0.7),
        ]);
        let c = &c / Complex64::new(c.norm(), 0.0);
        let v = complement_basis(&c);
        let gram = v.adjoint() * &v;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((c.adjoint() * &v).norm() < 1e-14);
    }

    #[test]
    fn single_look_direction_is_delay_and_sum() {
        let geom = ArrayGeometry::default_head();
        let look = Direction::new(90.0, 90.0).unwrap();
        let sm = steering_matrix(&SteeringModel::free_field(), &geom, &[look], &look, 2500.0).unwrap();
        let b = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let out = solve_narrowband(&sm, &b, 1.0).unwrap();
        for (wn, dn) in out.w.iter().zip(sm.look_vector.iter()) {
            assert!((wn - dn.conj() / 5.0).norm() < 1e-12);
        }
        assert!(out.residual < 1e-24);
        assert!((out.wng_linear - 5.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bound_is_reported() {
        let geom = ArrayGeometry::default_head();
        let dirs = direction_grid(0.0, 180.0, 10.0, 90.0).unwrap();
        let look = dirs[9];
        let sm = steering_matrix(&SteeringModel::free_field(), &geom, &dirs, &look, 1000.0).unwrap();
        let b = DVector::from_fn(dirs.len(), |i, _| Complex64::new(if i == 9 { 1.0 } else { 0.0 }, 0.0));
        let gamma_db = 10.0 * 5f64.log10() + 0.1;
        match solve_narrowband(&sm, &b, 10f64.powf(gamma_db / 10.0)) {
            Err(Error::InfeasibleWng { max_wng_db, .. }) => {
                assert!((max_wng_db - 10.0 * 5f64.log10()).abs() < 1e-9)
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn constraints_hold_when_active() {
        let geom = ArrayGeometry::default_head();
        let dirs = direction_grid(0.0, 180.0, 5.0, 90.0).unwrap();
        let look = dirs[18];
        let b = DVector::from_fn(dirs.len(), |i, _| Complex64::new(if i == 18 { 1.0 } else { 0.0 }, 0.0));
        for f in [200.0, 800.0, 3000.0] {
            let sm = steering_matrix(&SteeringModel::free_field(), &geom, &dirs, &look, f).unwrap();
            let gamma = 0.1;
            let out = solve_narrowband(&sm, &b, gamma).unwrap();
            let w = DVector::from_vec(out.w.clone());
            let resp = (sm.look_vector.transpose() * &w)[(0, 0)];
            assert!((resp - Complex64::new(1.0, 0.0)).norm() <= 1e-8);
            assert!(w.norm_squared() <= (1.0 / gamma) * (1.0 + 1e-8));
            assert!(out.lambda * (1.0 / gamma - w.norm_squared()) <= 1e-6 / gamma);
        }
    }
}
