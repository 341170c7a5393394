//! Sum-of-Gaussians fit to a pulse-area histogram.
//!
//! The model integrates each Gaussian over the bin, so the fitted `area` is
//! directly a count. Parameters are fitted by Levenberg–Marquardt with
//! `log σ` in place of `σ`. Every trial step is projected onto a box: peak
//! `k` stays within a quarter gain of `k · gain_hint`, widths stay between a
//! quarter bin and half a gain, and areas stay non-negative. Without the box,
//! peaks seeded on empty stretches of the histogram drift off to infinity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::distribution::PhotonNumberDistribution;
use crate::error::{Error, Result};
use crate::histogram::Histogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub sigma: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    /// Sorted by center.
    pub peaks: Vec<Peak>,
    /// Root of the summed squared deviance residuals.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub n_peaks: usize,
    /// Expected peak spacing; seeds centers at `k · gain_hint`.
    pub gain_hint: f64,
    /// Tie centers to `c0 + k s` instead of fitting each freely.
    pub shared_spacing: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_peaks: 1,
            gain_hint: 1.0,
            shared_spacing: false,
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

pub fn fit_peaks(h: &Histogram, n_peaks: usize, gain_hint: f64) -> Result<PeakFit> {
    fit_peaks_with(
        h,
        &FitOptions {
            n_peaks,
            gain_hint,
            ..FitOptions::default()
        },
    )
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `z · φ(z)`, zero at infinite `z`.
fn z_pdf(z: f64, pdf: f64) -> f64 {
    if z.is_finite() {
        z * pdf
    } else {
        0.0
    }
}

#[derive(Clone)]
struct Model<'a> {
    h: &'a Histogram,
    n_peaks: usize,
    shared: bool,
    gain: f64,
}

/// Smallest expected count per bin, keeps the deviance finite far from peaks.
const MODEL_FLOOR: f64 = 1e-9;

/// Signed Poisson deviance residual for observed `y` and expected `mu`, and
/// its derivative in `mu`.
fn deviance_residual(y: f64, mu: f64) -> (f64, f64) {
    let mu = mu.max(MODEL_FLOOR);
    let dev = if y > 0.0 {
        2.0 * (mu - y + y * (y / mu).ln())
    } else {
        2.0 * mu
    }
    .max(0.0);
    let r = (y - mu).signum() * dev.sqrt();
    let dr = if r.abs() > 1e-8 * (1.0 + mu.sqrt()) {
        (1.0 - y / mu) / r
    } else {
        -1.0 / mu.sqrt()
    };
    (r, dr)
}

impl Model<'_> {
    fn project(&self, theta: &mut [f64]) {
        let g = self.gain;
        let log_sigma = ((self.h.width / 4.0).min(g / 4.0).ln(), (g / 2.0).ln());
        let clamp = |v: &mut f64, lo: f64, hi: f64| *v = v.clamp(lo, hi);
        if self.shared {
            clamp(&mut theta[0], -g / 2.0, g / 2.0);
            clamp(&mut theta[1], g / 2.0, 1.5 * g);
            for k in 0..self.n_peaks {
                clamp(&mut theta[2 + 2 * k], log_sigma.0, log_sigma.1);
                theta[3 + 2 * k] = theta[3 + 2 * k].max(0.0);
            }
        } else {
            for k in 0..self.n_peaks {
                let c = k as f64 * g;
                clamp(&mut theta[3 * k], c - g / 4.0, c + g / 4.0);
                clamp(&mut theta[3 * k + 1], log_sigma.0, log_sigma.1);
                theta[3 * k + 2] = theta[3 * k + 2].max(0.0);
            }
        }
    }

    fn n_params(&self) -> usize {
        if self.shared {
            2 + 2 * self.n_peaks
        } else {
            3 * self.n_peaks
        }
    }

    /// Layout: free `[c_k, ln σ_k, a_k]*`, shared `[c0, s, (ln σ_k, a_k)*]`.
    fn peaks(&self, theta: &[f64]) -> Vec<Peak> {
        (0..self.n_peaks)
            .map(|k| {
                if self.shared {
                    Peak {
                        center: theta[0] + k as f64 * theta[1],
                        sigma: theta[2 + 2 * k].exp(),
                        area: theta[3 + 2 * k],
                    }
                } else {
                    Peak {
                        center: theta[3 * k],
                        sigma: theta[3 * k + 1].exp(),
                        area: theta[3 * k + 2],
                    }
                }
            })
            .collect()
    }

    fn pack(&self, peaks: &[Peak]) -> Vec<f64> {
        if self.shared {
            let spacing = if peaks.len() > 1 {
                peaks[1].center - peaks[0].center
            } else {
                1.0
            };
            let mut t = vec![peaks[0].center, spacing];
            for p in peaks {
                t.extend([p.sigma.ln(), p.area]);
            }
            t
        } else {
            peaks
                .iter()
                .flat_map(|p| [p.center, p.sigma.ln(), p.area])
                .collect()
        }
    }

    /// Deviance residuals and their Jacobian. Two trailing cells hold the
    /// model mass below the first and above the last bin, where the
    /// histogram recorded nothing.
    fn evaluate(&self, theta: &[f64], jacobian: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let peaks = self.peaks(theta);
        let m = self.h.len();
        let (first, last) = (self.h.low, self.h.bin_high(m - 1));
        let mut r = DVector::zeros(m + 2);
        let mut jac = jacobian.then(|| DMatrix::zeros(m + 2, self.n_params()));
        for b in 0..m + 2 {
            // Cell edges in units of each peak's z; infinities for overflow.
            let (lo, hi, y) = match b {
                b if b < m => (self.h.bin_low(b), self.h.bin_high(b), self.h.counts[b]),
                b if b == m => (f64::NEG_INFINITY, first, 0.0),
                _ => (last, f64::INFINITY, 0.0),
            };
            let mut mu = 0.0;
            for (k, p) in peaks.iter().enumerate() {
                let zl = (lo - p.center) / p.sigma;
                let zh = (hi - p.center) / p.sigma;
                let mass = std_normal_cdf(zh) - std_normal_cdf(zl);
                mu += p.area * mass;
                if let Some(j) = jac.as_mut() {
                    let (pl, ph) = (std_normal_pdf(zl), std_normal_pdf(zh));
                    let d_center = p.area * (pl - ph) / p.sigma;
                    let d_log_sigma = p.area * (z_pdf(zl, pl) - z_pdf(zh, ph));
                    if self.shared {
                        j[(b, 0)] += d_center;
                        j[(b, 1)] += d_center * k as f64;
                        j[(b, 2 + 2 * k)] = d_log_sigma;
                        j[(b, 3 + 2 * k)] = mass;
                    } else {
                        j[(b, 3 * k)] = d_center;
                        j[(b, 3 * k + 1)] = d_log_sigma;
                        j[(b, 3 * k + 2)] = mass;
                    }
                }
            }
            let (rb, dr) = deviance_residual(y, mu);
            r[b] = rb;
            if let Some(j) = jac.as_mut() {
                // Residual falls as the model rises; LM expects d(-r)/dθ.
                j.row_mut(b).scale_mut(-dr);
            }
        }
        (r, jac)
    }
}

/// Damped Gauss-Newton on the deviance residuals, with every trial step
/// projected onto the parameter box. Returns `(θ, Σr², iterations, converged)`.
fn levenberg_marquardt(
    model: &Model<'_>,
    mut theta: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> (Vec<f64>, f64, usize, bool) {
    model.project(&mut theta);
    let (mut r, _) = model.evaluate(&theta, false);
    let mut ssr = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = ssr == 0.0;

    while !converged && iterations < max_iterations {
        iterations += 1;
        let (_, jac) = model.evaluate(&theta, true);
        let jac = jac.expect("jacobian requested");
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let diag_floor = jtj.diagonal().max() * 1e-12;

        // Raise damping until a step lowers the residual.
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => a
                    .svd(true, true)
                    .solve(&jtr, 1e-14)
                    .expect("U and V were computed"),
            };
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            model.project(&mut trial);
            let (r_trial, _) = model.evaluate(&trial, false);
            let ssr_trial = r_trial.norm_squared();
            if ssr_trial.is_finite() && ssr_trial <= ssr {
                let rel = (ssr - ssr_trial) / ssr.max(f64::MIN_POSITIVE);
                theta = trial;
                r = r_trial;
                ssr = ssr_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No damped step improves the fit: stationary point.
            converged = true;
        }
    }
    (theta, ssr, iterations, converged)
}

/// Least-squares fit of `n_peaks` Gaussians on Poisson deviance residuals,
/// i.e. a maximum-likelihood fit for counted bins. Centers start at `k · gain_hint`,
/// widths at `gain_hint / 4`, areas at the histogram mass within half a gain
/// of each center.
///
/// Converges when an accepted step changes the squared residual by less than
/// `tolerance` (relative), or when no damped step improves it.
pub fn fit_peaks_with(h: &Histogram, opts: &FitOptions) -> Result<PeakFit> {
    if h.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if opts.n_peaks < 1 {
        return Err(Error::InvalidParameter {
            name: "n_peaks",
            value: 0.0,
            reason: "need at least one peak",
        });
    }
    if !(opts.gain_hint > 0.0) || !opts.gain_hint.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gain_hint",
            value: opts.gain_hint,
            reason: "must be finite and > 0",
        });
    }
    let g = opts.gain_hint;
    let model = Model {
        h,
        n_peaks: opts.n_peaks,
        shared: opts.shared_spacing && opts.n_peaks > 1,
        gain: g,
    };
    let seed = |k: usize, area: f64| Peak {
        center: k as f64 * g,
        sigma: g / 4.0,
        area,
    };
    let local_mass = |k: usize| {
        let c = k as f64 * g;
        h.mass_between(c - g / 2.0, c + g / 2.0)
    };

    let mut iterations = 0;
    let (theta, ssr, converged) = if model.shared {
        let initial: Vec<Peak> = (0..opts.n_peaks).map(|k| seed(k, local_mass(k))).collect();
        let (theta, ssr, it, converged) =
            levenberg_marquardt(&model, model.pack(&initial), opts.tolerance, opts.max_iterations);
        iterations += it;
        (theta, ssr, converged)
    } else {
        // Add peaks one at a time. Each new peak is seeded with the mass its
        // window still holds beyond what the lower peaks already explain, so
        // a sparse peak does not start out owning its neighbor's tail.
        let mut peaks = vec![seed(0, local_mass(0))];
        let mut last = None;
        for j in 1..=opts.n_peaks {
            if j > 1 {
                let k = j - 1;
                let c = k as f64 * g;
                let explained: f64 = peaks
                    .iter()
                    .map(|p| {
                        p.area
                            * (std_normal_cdf((c + g / 2.0 - p.center) / p.sigma)
                                - std_normal_cdf((c - g / 2.0 - p.center) / p.sigma))
                    })
                    .sum();
                peaks.push(seed(k, (local_mass(k) - explained).max(0.0)));
            }
            let stage = Model { n_peaks: j, ..model.clone() };
            let (theta, ssr, it, converged) = levenberg_marquardt(
                &stage,
                stage.pack(&peaks),
                opts.tolerance,
                opts.max_iterations,
            );
            iterations += it;
            peaks = stage.peaks(&theta);
            last = Some((theta, ssr, converged));
        }
        last.expect("at least one peak")
    };

    let mut peaks = model.peaks(&theta);
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    let fit = PeakFit {
        peaks,
        residual: ssr.sqrt(),
        iterations,
        converged,
    };
    if !converged {
        return Err(Error::FitNotConverged {
            iterations,
            residual: fit.residual,
            fit: Box::new(fit),
        });
    }
    // Peaks holding less than one count carry no shape information.
    for (k, pair) in fit.peaks.windows(2).enumerate() {
        if pair[0].area < 1.0 || pair[1].area < 1.0 {
            continue;
        }
        let spacing = pair[1].center - pair[0].center;
        let sigma = pair[0].sigma.max(pair[1].sigma);
        if spacing < sigma / 2.0 {
            return Err(Error::DegeneratePeaks {
                first: k,
                second: k + 1,
                spacing,
                half_sigma: sigma / 2.0,
            });
        }
    }
    Ok(fit)
}

/// Normalizes peak areas into a detected photon-number distribution, peak `k`
/// in center order being `k` photons. Negative fitted areas count as zero.
pub fn detected_distribution(fit: &PeakFit) -> Result<PhotonNumberDistribution> {
    let mut peaks = fit.peaks.clone();
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    let areas: Vec<f64> = peaks.iter().map(|p| p.area.max(0.0)).collect();
    if let Some(i) = areas.iter().position(|a| !a.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    PhotonNumberDistribution::from_weights(&areas)
}
