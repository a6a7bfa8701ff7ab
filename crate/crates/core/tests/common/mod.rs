//! Independent reference computations shared by integration tests.
#![allow(dead_code)]

use beamkit::steering::SteeringMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A random constrained LS instance: look vector is row 0 of `G`, `b[0] = 1`.
/// About 80% of instances have an active WNG bound.
pub struct Instance {
    pub sm: SteeringMatrix,
    pub desired: DVector<Complex64>,
    pub gamma: f64,
}

pub fn random_instance(seed: u64, max_n: usize, max_m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let g = DMatrix::from_fn(m, n, |_, _| cgauss(&mut rng));
    let d = g.row(0).transpose();
    let desired = DVector::from_fn(m, |i, _| {
        if i == 0 {
            c(1.0, 0.0)
        } else if rng.random_bool(0.3) {
            c(rng.random_range(0.0..0.5), 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    // Place gamma between the unconstrained solution's WNG and the maximum
    // ||d||^2 (active bound) for most instances, below it otherwise.
    let free = penalized_solution(&g, &d, &desired, 1e-12 * g.norm_squared());
    let wng_free = 1.0 / free.norm_squared();
    let max_wng = d.norm_squared();
    let gamma = if rng.random_bool(0.8) && wng_free < max_wng * 0.999 {
        wng_free * (max_wng / wng_free).powf(rng.random_range(0.05..0.95))
    } else {
        wng_free.min(max_wng) * 10f64.powf(-rng.random_range(0.1..1.0))
    };
    Instance {
        sm: SteeringMatrix::new(1000.0, g, d).unwrap(),
        desired,
        gamma,
    }
}

/// `argmin ||G w - b||^2 + lambda ||w||^2` subject to `d^T w = 1`, from the
/// bordered KKT system in `w` directly.
pub fn penalized_solution(
    g: &DMatrix<Complex64>,
    d: &DVector<Complex64>,
    b: &DVector<Complex64>,
    lambda: f64,
) -> DVector<Complex64> {
    let n = g.ncols();
    let mut k = DMatrix::from_element(n + 1, n + 1, c(0.0, 0.0));
    let gram = g.adjoint() * g;
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = gram[(i, j)];
        }
        k[(i, i)] += c(lambda, 0.0);
        k[(i, n)] = d[i].conj();
        k[(n, i)] = d[i];
    }
    let gb = g.adjoint() * b;
    let mut rhs = DVector::from_element(n + 1, c(0.0, 0.0));
    rhs.rows_mut(0, n).copy_from(&gb);
    rhs[n] = c(1.0, 0.0);
    let sol = k.lu().solve(&rhs).expect("bordered KKT system is nonsingular");
    sol.rows(0, n).into_owned()
}

pub fn objective(g: &DMatrix<Complex64>, b: &DVector<Complex64>, w: &DVector<Complex64>) -> f64 {
    (g * w - b).norm_squared()
}

/// Best feasible objective over a dense log-spaced `lambda` grid, refined
/// around the feasibility boundary. Returns `(objective, w)`.
pub fn lambda_grid_oracle(
    g: &DMatrix<Complex64>,
    d: &DVector<Complex64>,
    b: &DVector<Complex64>,
    gamma: f64,
    points: usize,
) -> (f64, DVector<Complex64>) {
    let bound = 1.0 / gamma;
    let scale = g.norm_squared().max(1e-300);
    let feasible = |w: &DVector<Complex64>| {
        w.norm_squared() <= bound * (1.0 + 1e-12) && ((d.transpose() * w)[(0, 0)] - c(1.0, 0.0)).norm() <= 1e-8
    };
    let mut best: Option<(f64, DVector<Complex64>)> = None;
    let consider = |w: DVector<Complex64>, best: &mut Option<(f64, DVector<Complex64>)>| {
        if feasible(&w) {
            let f = objective(g, b, &w);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                *best = Some((f, w));
            }
        }
    };
    let (lo_exp, hi_exp) = (-14.0f64, 6.0f64);
    let lambdas: Vec<f64> = (0..points)
        .map(|i| scale * 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (points - 1) as f64))
        .collect();
    let mut first_feasible = None;
    for (i, &l) in lambdas.iter().enumerate() {
        let w = penalized_solution(g, d, b, l);
        if first_feasible.is_none() && feasible(&w) {
            first_feasible = Some(i);
        }
        consider(w, &mut best);
    }
    // Refine linearly between the last infeasible and first feasible lambda.
    if let Some(i) = first_feasible.filter(|&i| i > 0) {
        let (mut lo, mut hi) = (lambdas[i - 1], lambdas[i]);
        for _ in 0..6 {
            let steps = 200;
            let mut new_hi = hi;
            let mut new_lo = lo;
            for s in 0..=steps {
                let l = lo + (hi - lo) * s as f64 / steps as f64;
                let w = penalized_solution(g, d, b, l);
                if feasible(&w) {
                    new_hi = l;
                    consider(w, &mut best);
                    break;
                }
                new_lo = l;
            }
            lo = new_lo;
            hi = new_hi;
        }
    }
    best.expect("delay-and-sum limit is always feasible")
}

/// Stationarity residual of `G^H(Gw - b) + lambda w + nu conj(d) = 0`
/// with the best-fitting `nu`, relative to `||G^H b||`.
pub fn stationarity_residual(
    g: &DMatrix<Complex64>,
    d: &DVector<Complex64>,
    b: &DVector<Complex64>,
    w: &DVector<Complex64>,
    lambda: f64,
) -> f64 {
    let r = g.adjoint() * (g * w - b) + w * c(lambda, 0.0);
    let dc = d.map(|x| x.conj());
    let nu = -dc.dotc(&r) / dc.norm_squared();
    (r + dc * nu).norm() / (g.adjoint() * b).norm().max(1e-300)
}

/// Direct `sum_l t_l exp(-j 2 pi f l / fs)`.
pub fn brute_dtft(taps: &[f64], f: f64, fs: f64) -> Complex64 {
    taps.iter()
        .enumerate()
        .map(|(l, &t)| c(t, 0.0) * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * l as f64 / fs))
        .sum()
}

/// Triple-loop filter-and-sum.
pub fn direct_filter_and_sum(taps: &[Vec<f64>], x: &[Vec<f64>]) -> Vec<f64> {
    let len = x[0].len() + taps[0].len() - 1;
    let mut y = vec![0.0; len];
    for (t, xn) in taps.iter().zip(x) {
        for (i, &xi) in xn.iter().enumerate() {
            for (l, &tl) in t.iter().enumerate() {
                y[i + l] += tl * xi;
            }
        }
    }
    y
}
