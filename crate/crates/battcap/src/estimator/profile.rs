use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CRate, EstimatorError};

/// How far past the new-battery rate the capacity profile extends.
const PROFILE_SPAN_C: f64 = 2.5;
/// Restarts from jittered initial parameters before giving up.
const FIT_RESTARTS: usize = 4;
const FIT_MAX_ITERS: usize = 300;

/// One point of a capacity-vs-rate profile: rate increment over the
/// new-battery rate, and the remaining capacity fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub delta_c: f64,
    pub fcc_fraction: f64,
}

/// Tabulate how capacity decays as the charging rate rises above `c_new`.
///
/// For `C_now` stepping from `c_new` to `c_new + 2.5` by `step`, the implied
/// capacity is `i_bat / C_now`, and the emitted fraction normalizes by the
/// new capacity `i_bat / c_new` — so the fraction is `c_new / C_now`
/// regardless of the current used.
pub fn build_capacity_profile(c_new: CRate, i_bat_ma: f64, step: f64) -> Vec<ProfilePoint> {
    let step = if step > 0.0 { step } else { 0.01 };
    let fcc_new = i_bat_ma / c_new.value();
    let mut points = Vec::new();
    let mut k = 0usize;
    loop {
        let delta_c = k as f64 * step;
        if delta_c > PROFILE_SPAN_C * (1.0 + 1e-12) {
            break;
        }
        let c_now = c_new.value() + delta_c;
        points.push(ProfilePoint {
            delta_c,
            fcc_fraction: (i_bat_ma / c_now) / fcc_new,
        });
        k += 1;
    }
    points
}

/// Two-term exponential capacity model:
/// `fraction(dC) = a*exp(b*dC) + c*exp(d*dC)` with `dC = C_now - C_new`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpCapacityModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r_squared: f64,
    pub rmse: f64,
}

impl ExpCapacityModel {
    /// Remaining capacity fraction at the given rate increment.
    pub fn fraction_at(&self, delta_c: f64) -> f64 {
        self.a * (self.b * delta_c).exp() + self.c * (self.d * delta_c).exp()
    }
}

/// Fit the two-term exponential to a capacity profile by damped least
/// squares. Starts from (0.5, -1, 0.5, -3) and restarts from jittered seeds
/// when the solve stalls or lands on a non-decaying model.
pub fn fit_exp_model(profile: &[ProfilePoint]) -> Result<ExpCapacityModel, EstimatorError> {
    if profile.len() < 8 {
        return Err(EstimatorError::InsufficientData(format!(
            "exponential fit needs >= 8 points, got {}",
            profile.len()
        )));
    }
    let span = profile.iter().map(|p| p.delta_c).fold(f64::NEG_INFINITY, f64::max)
        - profile.iter().map(|p| p.delta_c).fold(f64::INFINITY, f64::min);
    if span.is_nan() || span < 2.0 {
        return Err(EstimatorError::InsufficientData(format!(
            "profile must span at least 2 C, got {span:.3}"
        )));
    }
    let xs: Vec<f64> = profile.iter().map(|p| p.delta_c).collect();
    let ys: Vec<f64> = profile.iter().map(|p| p.fcc_fraction).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let base = [0.5, -1.0, 0.5, -3.0];
    let mut attempt = 0usize;
    loop {
        let init = if attempt == 0 {
            base
        } else {
            [
                base[0] * rng.gen_range(0.5..1.5),
                base[1] * rng.gen_range(0.3..2.0),
                base[2] * rng.gen_range(0.5..1.5),
                base[3] * rng.gen_range(0.3..2.0),
            ]
        };
        if let Some(params) = levenberg_marquardt(&xs, &ys, init) {
            let decaying = params[1] <= 0.0 && params[3] <= 0.0;
            if decaying {
                let sse: f64 = xs
                    .iter()
                    .zip(&ys)
                    .map(|(&x, &y)| {
                        let m = params[0] * (params[1] * x).exp() + params[2] * (params[3] * x).exp();
                        (m - y).powi(2)
                    })
                    .sum();
                let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
                let sst: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
                return Ok(ExpCapacityModel {
                    a: params[0],
                    b: params[1],
                    c: params[2],
                    d: params[3],
                    r_squared: 1.0 - sse / sst,
                    rmse: (sse / xs.len() as f64).sqrt(),
                });
            }
        }
        attempt += 1;
        if attempt > FIT_RESTARTS {
            return Err(EstimatorError::FitDiverged(FIT_RESTARTS));
        }
    }
}

fn model(p: &[f64; 4], x: f64) -> f64 {
    p[0] * (p[1] * x).exp() + p[2] * (p[3] * x).exp()
}

fn sse(p: &[f64; 4], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (model(p, x) - y).powi(2)).sum()
}

/// Damped Gauss-Newton (Levenberg-Marquardt) on the four parameters with
/// analytic partials. Returns `None` when it cannot reduce the residual.
fn levenberg_marquardt(xs: &[f64], ys: &[f64], init: [f64; 4]) -> Option<[f64; 4]> {
    let mut p = init;
    let mut lambda = 1e-3;
    let mut current_sse = sse(&p, xs, ys);

    for _ in 0..FIT_MAX_ITERS {
        // Normal equations J^T J and J^T r.
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let eb = (p[1] * x).exp();
            let ed = (p[3] * x).exp();
            let jac = [eb, p[0] * x * eb, ed, p[2] * x * ed];
            let r = model(&p, x) - y;
            for i in 0..4 {
                jtr[i] += jac[i] * r;
                for j in 0..4 {
                    jtj[i][j] += jac[i] * jac[j];
                }
            }
        }

        let mut improved = false;
        for _ in 0..16 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3]];
            let Some(step) = solve4(a, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            if !candidate.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let candidate_sse = sse(&candidate, xs, ys);
            if candidate_sse < current_sse {
                let rel = (current_sse - candidate_sse) / current_sse.max(1e-300);
                p = candidate;
                current_sse = candidate_sse;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    return Some(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // Stalled: accept if the fit is already tight, else give up.
            return if current_sse / xs.len() as f64 <= 1e-4 { Some(p) } else { None };
        }
    }
    Some(p)
}

/// Gaussian elimination with partial pivoting for the 4x4 normal equations.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (k, coeff) in a[row].iter_mut().enumerate().skip(col) {
                *coeff -= f * pivot_row[k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
