//! Point source scattered by a rigid sphere.
//!
//! Time convention is `exp(+j omega t)`, so outgoing waves use spherical Hankel
//! functions of the second kind `h_m = j_m - i y_m`. Values are normalized by
//! the free-field pressure the source would produce at the sphere center.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative size below which a term counts as negligible.
pub const SERIES_TOL: f64 = 1e-10;

/// Frequencies below this are evaluated at this value (sphere acoustics have a
/// finite static limit but the series is written in terms of `1/k`).
const MIN_FREQ_HZ: f64 = 1e-2;

/// Spherical Bessel functions `j_0..=j_nmax` by downward recurrence.
pub(crate) fn spherical_j(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = nmax + 20 + (x.abs() as usize) + ((x.abs().sqrt() * 10.0) as usize);
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    for n in (1..=start).rev() {
        let prev = (2 * n + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if n - 1 <= nmax {
            out[n - 1] = cur;
        }
        // Rescale to dodge overflow on long runs.
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() {
        j0 / out[0]
    } else {
        j1 / out[1.min(nmax)]
    };
    if nmax == 0 {
        return vec![j0];
    }
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Spherical Neumann functions `y_0..=y_nmax` by upward recurrence.
pub(crate) fn spherical_y(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    out[0] = -x.cos() / x;
    if nmax >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for n in 1..nmax {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    out
}

/// Spherical Hankel functions of the second kind.
pub(crate) fn spherical_h2(nmax: usize, x: f64) -> Vec<Complex64> {
    spherical_j(nmax, x)
        .into_iter()
        .zip(spherical_y(nmax, x))
        .map(|(j, y)| Complex64::new(j, -y))
        .collect()
}

/// Derivatives `f_n'(x) = f_{n-1}(x) - (n+1)/x f_n(x)`, `f_0' = -f_1`.
/// `values` must hold orders up to `nmax + 1`.
fn derivative<T>(values: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    let nmax = values.len() - 2;
    (0..=nmax)
        .map(|n| {
            if n == 0 {
                -values[1]
            } else {
                values[n - 1] - values[n] * ((n + 1) as f64 / x)
            }
        })
        .collect()
}

/// Legendre polynomials `P_0..=P_nmax` at `t`.
pub(crate) fn legendre(nmax: usize, t: f64) -> Vec<f64> {
    let mut out = vec![1.0; nmax + 1];
    if nmax >= 1 {
        out[1] = t;
    }
    for n in 1..nmax {
        out[n + 1] = ((2 * n + 1) as f64 * t * out[n] - n as f64 * out[n - 1]) / (n + 1) as f64;
    }
    out
}

/// Sphere geometry for one evaluation: where the mic sits and where the source is.
#[derive(Debug, Clone, Copy)]
pub struct SphereProblem {
    pub radius_m: f64,
    /// Radial position of the field point; equal to `radius_m` on the surface.
    pub mic_radius_m: f64,
    pub source_distance_m: f64,
    /// Angle between the mic position vector and the source direction.
    pub mic_angle_rad: f64,
    pub speed_of_sound: f64,
}

/// Transfer value from a point source to a point on (or outside) a rigid sphere,
/// relative to free-field pressure at the sphere center.
pub fn sphere_field_response(problem: &SphereProblem, freq_hz: f64, max_order: usize) -> Result<Complex64> {
    let SphereProblem {
        radius_m: a,
        mic_radius_m: rm,
        source_distance_m: rs,
        mic_angle_rad,
        speed_of_sound: c,
    } = *problem;
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {a}")));
    }
    if max_order < 1 {
        return Err(Error::InvalidArgument("max_order must be at least 1".into()));
    }
    if !(rs > a) || !(rs > rm) {
        return Err(Error::SourceInsideSphere {
            distance_m: rs,
            radius_m: a.max(rm),
        });
    }
    if rm < a * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "field point at radius {rm} m lies inside the sphere of radius {a} m"
        )));
    }
    let on_surface = (rm - a).abs() <= 1e-9 * a;

    let f = freq_hz.max(MIN_FREQ_HZ);
    let k = 2.0 * std::f64::consts::PI * f / c;
    let ka = k * a;
    let nmax = max_order;

    let h_src = spherical_h2(nmax, k * rs);
    let h_a = spherical_h2(nmax + 1, ka);
    let dh_a = derivative(&h_a, ka);
    let p = legendre(nmax, mic_angle_rad.cos());

    let (j_m, h_m, dj_a) = if on_surface {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let j_a = spherical_j(nmax + 1, ka);
        (
            spherical_j(nmax, k * rm),
            spherical_h2(nmax, k * rm),
            derivative(&j_a, ka),
        )
    };

    // Terms do not decay before the order passes the largest electrical size
    // the series has to resolve.
    let transition = k * rm;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut small_run = 0;
    let mut last_ratio = f64::INFINITY;
    for m in 0..=nmax {
        let weight = (2 * m + 1) as f64 * p[m];
        let term = if on_surface {
            let ratio = h_src[m] / dh_a[m];
            if ratio.is_finite() {
                weight * ratio
            } else {
                Complex64::new(0.0, 0.0)
            }
        } else {
            let scatter = dj_a[m] / dh_a[m];
            let scattered = if scatter.is_finite() && scatter.norm() > 0.0 {
                let s = scatter * h_m[m];
                if s.is_finite() {
                    s
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else {
                Complex64::new(0.0, 0.0)
            };
            weight * h_src[m] * (j_m[m] - scattered)
        };
        sum += term;
        last_ratio = if sum.norm() > 0.0 {
            term.norm() / sum.norm()
        } else {
            f64::INFINITY
        };
        if (m as f64) > transition && last_ratio < SERIES_TOL {
            small_run += 1;
            if small_run >= 2 {
                return Ok(finish(sum, on_surface, k, a, rs));
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence {
        max_order,
        ratio: last_ratio,
    })
}

fn finish(sum: Complex64, on_surface: bool, k: f64, a: f64, rs: f64) -> Complex64 {
    let phase = Complex64::from_polar(1.0, k * rs);
    if on_surface {
        -(rs / (k * a * a)) * phase * sum
    } else {
        Complex64::new(0.0, -k * rs) * phase * sum
    }
}

/// Normalized pressure on the surface of a rigid sphere of radius `radius_m`
/// at great-circle angle `mic_angle_rad` from the source direction.
pub fn sphere_response(
    radius_m: f64,
    source_distance_m: f64,
    mic_angle_rad: f64,
    freq_hz: f64,
    max_order: usize,
    speed_of_sound: f64,
) -> Result<Complex64> {
    sphere_field_response(
        &SphereProblem {
            radius_m,
            mic_radius_m: radius_m,
            source_distance_m,
            mic_angle_rad,
            speed_of_sound,
        },
        freq_hz,
        max_order,
    )
}
