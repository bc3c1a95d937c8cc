//! Power-law and Gaussian model fits for the radial and angular
//! distributions.

use super::RadialPsf;
use crate::error::{EblError, Result};
use crate::transport::{Channel, DepositionRecord};

/// Least-squares power law `density = a * r^-b` fitted in log-log space.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    /// Prefactor in the density's own units.
    pub a: f64,
    /// Positive decay exponent.
    pub b: f64,
    pub fit_range_nm: (f64, f64),
    pub r_squared: f64,
    /// Standard errors of ln(a) and b from the linear regression.
    pub stderr_ln_a: f64,
    pub stderr_b: f64,
}

impl PowerLawFit {
    pub fn density_at(&self, r_nm: f64) -> f64 {
        self.a * r_nm.powf(-self.b)
    }

    /// Fractional decay 1 - E(r1)/E(r0) implied by the fitted exponent.
    pub fn decay_between(&self, r0: f64, r1: f64) -> f64 {
        1.0 - (r1 / r0).powf(-self.b)
    }
}

/// Fit `density = a * r^-b` over bins whose centers lie in
/// `[r_min, r_max]` and whose density is positive.
pub fn fit_power_law(
    psf: &RadialPsf,
    channel: Channel,
    r_min_nm: f64,
    r_max_nm: f64,
) -> Result<PowerLawFit> {
    if !(r_min_nm < r_max_nm) {
        return Err(EblError::validation(
            "fit_range",
            format!("r_min ({r_min_nm}) must be < r_max ({r_max_nm})"),
        ));
    }
    let density = psf.density(channel);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (center, &d) in psf.bin_centers().iter().zip(density) {
        if *center >= r_min_nm && *center <= r_max_nm && d > 0.0 {
            xs.push(center.ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 5 {
        return Err(EblError::numeric(format!(
            "power-law fit needs >= 5 positive bins in [{r_min_nm}, {r_max_nm}] nm, found {}",
            xs.len()
        )));
    }
    let (slope, intercept, r_squared, se_slope, se_intercept) = linear_regression(&xs, &ys);
    Ok(PowerLawFit {
        a: intercept.exp(),
        b: -slope,
        fit_range_nm: (r_min_nm, r_max_nm),
        r_squared,
        stderr_ln_a: se_intercept,
        stderr_b: se_slope,
    })
}

/// Ordinary least squares y = slope x + intercept.
/// Returns (slope, intercept, r^2, se_slope, se_intercept).
fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    // A perfectly flat set has no variance to explain; call that a perfect fit.
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (xs.len().max(3) - 2) as f64;
    let sigma2 = ss_res / dof;
    let se_slope = (sigma2 / sxx).sqrt();
    let se_intercept = (sigma2 * (1.0 / n + mean_x * mean_x / sxx)).sqrt();
    (slope, intercept, r_squared, se_slope, se_intercept)
}

/// Gaussian fit of the energy-weighted backscattered exit-angle histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFit {
    /// Center of the fitted normal, degrees.
    pub mu_deg: f64,
    /// Width of the fitted normal, degrees.
    pub sigma_deg: f64,
    pub bin_centers_deg: Vec<f64>,
    /// Energy weight per bin, eV.
    pub weights_ev: Vec<f64>,
    /// Approximate standard errors from the Gauss-Newton normal equations.
    pub stderr_mu: f64,
    pub stderr_sigma: f64,
}

/// Histogram exit angles over [0, 90] degrees weighted by exit energy, then
/// fit `A exp(-(theta-mu)^2 / (2 sigma^2))` by Levenberg-Marquardt.
pub fn fit_angular(record: &DepositionRecord, bins: usize) -> Result<AngularFit> {
    if record.backscattered_exits.is_empty() {
        return Err(EblError::numeric(
            "no backscattered exits: cannot fit the angular distribution",
        ));
    }
    if bins < 4 {
        return Err(EblError::validation("bins", "must be >= 4"));
    }
    let width = 90.0 / bins as f64;
    let mut weights = vec![0.0f64; bins];
    for exit in &record.backscattered_exits {
        let b = ((exit.theta_deg / width) as usize).min(bins - 1);
        weights[b] += exit.energy_ev;
    }
    let centers: Vec<f64> = (0..bins).map(|i| (i as f64 + 0.5) * width).collect();

    // Moment-based initialization.
    let total: f64 = weights.iter().sum();
    let mu0 = centers
        .iter()
        .zip(&weights)
        .map(|(c, w)| c * w)
        .sum::<f64>()
        / total;
    let var0 = centers
        .iter()
        .zip(&weights)
        .map(|(c, w)| (c - mu0) * (c - mu0) * w)
        .sum::<f64>()
        / total;
    let sigma0 = var0.sqrt().max(width / 2.0);
    let a0 = weights.iter().cloned().fold(0.0, f64::max);

    let (a, mu, sigma, jtj) = gaussian_lm(&centers, &weights, a0, mu0, sigma0)?;
    let _ = a;
    // Residual variance for parameter standard errors.
    let ss: f64 = centers
        .iter()
        .zip(&weights)
        .map(|(&c, &w)| {
            let f = a * (-(c - mu) * (c - mu) / (2.0 * sigma * sigma)).exp();
            (w - f) * (w - f)
        })
        .sum();
    let dof = (bins.max(4) - 3) as f64;
    let sigma2 = ss / dof;
    let (stderr_mu, stderr_sigma) = invert_for_errors(&jtj, sigma2);

    Ok(AngularFit {
        mu_deg: mu,
        sigma_deg: sigma.abs(),
        bin_centers_deg: centers,
        weights_ev: weights,
        stderr_mu,
        stderr_sigma,
    })
}

/// Levenberg-Marquardt for y = A exp(-(x-mu)^2/(2 sigma^2)).
/// Returns (A, mu, sigma, final JtJ).
fn gaussian_lm(
    xs: &[f64],
    ys: &[f64],
    mut a: f64,
    mut mu: f64,
    mut sigma: f64,
) -> Result<(f64, f64, f64, [[f64; 3]; 3])> {
    let mut lambda = 1e-3;
    let mut cost = gaussian_cost(xs, ys, a, mu, sigma);
    let mut jtj = [[0.0; 3]; 3];
    for _ in 0..200 {
        let mut jtr = [0.0; 3];
        jtj = [[0.0; 3]; 3];
        for (&x, &y) in xs.iter().zip(ys) {
            let s2 = sigma * sigma;
            let d = x - mu;
            let e = (-d * d / (2.0 * s2)).exp();
            let f = a * e;
            let res = y - f;
            // Partial derivatives of f.
            let j = [e, f * d / s2, f * d * d / (s2 * sigma)];
            for p in 0..3 {
                jtr[p] += j[p] * res;
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let mut damped = jtj;
        for (p, row) in damped.iter_mut().enumerate() {
            row[p] *= 1.0 + lambda;
        }
        let Some(delta) = solve3(&damped, &jtr) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let (na, nmu, nsigma) = (a + delta[0], mu + delta[1], sigma + delta[2]);
        let ncost = gaussian_cost(xs, ys, na, nmu, nsigma);
        if ncost.is_finite() && ncost < cost {
            let improvement = (cost - ncost) / cost.max(1e-300);
            a = na;
            mu = nmu;
            sigma = nsigma;
            cost = ncost;
            lambda = (lambda * 0.3).max(1e-12);
            if improvement < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    if !(a.is_finite() && mu.is_finite() && sigma.is_finite()) {
        return Err(EblError::numeric("Gaussian fit diverged"));
    }
    Ok((a, mu, sigma, jtj))
}

fn gaussian_cost(xs: &[f64], ys: &[f64], a: f64, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let d = x - mu;
            let f = a * (-d * d / (2.0 * sigma * sigma)).exp();
            (y - f) * (y - f)
        })
        .sum()
}

/// Solve a 3x3 linear system by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)] // elimination reads one row while writing another
fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut b = *rhs;
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for (k, xk) in x.iter().enumerate().skip(row + 1) {
            s -= a[row][k] * xk;
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Standard errors of (mu, sigma) from the final JtJ and residual variance.
fn invert_for_errors(jtj: &[[f64; 3]; 3], sigma2: f64) -> (f64, f64) {
    // Solve JtJ * col = e_i for the diagonal of the inverse.
    let mut diag = [0.0; 3];
    for i in 0..3 {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        if let Some(col) = solve3(jtj, &e) {
            diag[i] = col[i].max(0.0);
        }
    }
    ((sigma2 * diag[1]).sqrt(), (sigma2 * diag[2]).sqrt())
}
