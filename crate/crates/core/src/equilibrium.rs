//! Phase-locked equilibria of the isothermal phase equations and
//! classification of asymptotic configurations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{asymptotic_temperature, ModelParams};

/// Default angular tolerance of [`classify_bipolar`], in radians.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-6;

const NEWTON_TOL: f64 = 1e-13;
const MAX_ITERS: usize = 1000;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLockedState {
    pub phases: Vec<f64>,
    pub t_infinity: f64,
    /// Max-norm of the N equilibrium equations and the sum constraint.
    pub residual: f64,
    pub phase_sum: f64,
    /// Natural frequencies sum to zero (checked before solving).
    pub nat_freq_balanced: bool,
    pub iterations: usize,
}

/// `ν_α + κ₁/(N T∞) Σ_β ψ_{αβ} sin(θ_β − θ_α)` for every α.
pub fn locking_equations(phases: &[f64], params: &ModelParams, t_infinity: f64) -> Vec<f64> {
    let n = phases.len();
    let c = params.kappa1 / (n as f64 * t_infinity);
    (0..n)
        .map(|a| {
            let s: f64 = (0..n)
                .map(|b| params.psi.get(a, b) * (phases[b] - phases[a]).sin())
                .sum();
            params.nat_freq[a] + c * s
        })
        .collect()
}

/// Max-norm of [`locking_equations`].
pub fn locking_residual(phases: &[f64], params: &ModelParams, t_infinity: f64) -> f64 {
    locking_equations(phases, params, t_infinity)
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
}

fn balanced(params: &ModelParams) -> bool {
    let scale: f64 = params.nat_freq.iter().map(|v| v.abs()).sum();
    params.nat_freq_sum().abs() <= 1e-12 * (1.0 + scale)
}

/// Augmented residual: the first N−1 locking equations and `Σθ − phase_sum`.
fn augmented(phases: &[f64], params: &ModelParams, t_inf: f64, phase_sum: f64) -> DVector<f64> {
    let mut f = locking_equations(phases, params, t_inf);
    let last = f.len() - 1;
    f[last] = phases.iter().sum::<f64>() - phase_sum;
    DVector::from_vec(f)
}

fn augmented_jacobian(phases: &[f64], params: &ModelParams, t_inf: f64) -> DMatrix<f64> {
    let n = phases.len();
    let c = params.kappa1 / (n as f64 * t_inf);
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n - 1 {
        let mut diag = 0.0;
        for b in 0..n {
            if b != a {
                let v = c * params.psi.get(a, b) * (phases[b] - phases[a]).cos();
                j[(a, b)] = v;
                diag -= v;
            }
        }
        j[(a, a)] = diag;
    }
    for b in 0..n {
        j[(n - 1, b)] = 1.0;
    }
    j
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `ν_α + κ₁/(N T∞) Σ_β ψ_{αβ} sin(θ_β − θ_α) = 0` with `Σ θ_α = phase_sum`.
///
/// The rotation null direction of the locking equations is removed by
/// replacing the last equation with the sum constraint. The square system is
/// solved by pseudo-transient continuation: each step solves
/// `(J − I/τ) δ = −F`, which follows the phase flow while `τ` is small and
/// turns into Newton's method as the residual falls and `τ` grows.
/// Equilibria reached this way are those attracting the guess under the flow.
pub fn solve_phase_locked(
    params: &ModelParams,
    t_infinity: f64,
    phase_sum: f64,
    initial_guess: &[f64],
) -> Result<PhaseLockedState> {
    params.validate()?;
    let n = params.n();
    if initial_guess.len() != n {
        return Err(Error::Dimension {
            what: "initial guess",
            expected: n,
            got: initial_guess.len(),
        });
    }
    if !(t_infinity.is_finite() && t_infinity > 0.0) {
        return Err(Error::InvalidParams(format!(
            "t_infinity must be positive, got {t_infinity}"
        )));
    }
    if !balanced(params) {
        return Err(Error::Infeasible(format!(
            "natural frequencies sum to {:e}; phase locking needs a zero sum",
            params.nat_freq_sum()
        )));
    }

    let scale = params.kappa1 * params.psi_max() / t_infinity;
    let tau0 = 0.1 / scale.max(f64::MIN_POSITIVE);
    let mut tau = tau0;
    let mut theta = initial_guess.to_vec();
    let mut f = augmented(&theta, params, t_infinity, phase_sum);
    let mut norm = max_norm(&f);
    let mut iterations = 0;
    while norm > NEWTON_TOL * (1.0 + phase_sum.abs()) {
        if iterations == MAX_ITERS {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
                last_iterate: theta,
            });
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut jac = augmented_jacobian(&theta, params, t_infinity);
            for a in 0..n - 1 {
                jac[(a, a)] -= 1.0 / tau;
            }
            let Some(step) = jac.lu().solve(&(-&f)) else {
                tau *= 0.5;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            let f_trial = augmented(&trial, params, t_infinity, phase_sum);
            let n_trial = max_norm(&f_trial);
            if n_trial.is_finite() && (n_trial < norm || tau <= tau0) {
                tau *= (norm / n_trial).clamp(0.5, 10.0);
                tau = tau.max(tau0);
                theta = trial;
                f = f_trial;
                norm = n_trial;
                accepted = true;
                break;
            }
            tau = (0.5 * tau).max(tau0);
        }
        if !accepted {
            // Stagnation at round-off level counts as converged.
            if norm <= 1e-11 * (1.0 + phase_sum.abs()) {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
                last_iterate: theta,
            });
        }
    }

    let sum: f64 = theta.iter().sum();
    let residual = locking_residual(&theta, params, t_infinity).max((sum - phase_sum).abs());
    Ok(PhaseLockedState {
        phases: theta,
        t_infinity,
        residual,
        phase_sum: sum,
        nat_freq_balanced: true,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    /// All phases equal `phase` modulo 2π.
    Coherent {
        phase: f64,
    },
    /// Phases sit at `phase` (indices `at_phase`) or `phase + π` (indices `antipodal`).
    /// `at_phase` is the larger group; ties go to the group holding index 0.
    Bipolar {
        phase: f64,
        at_phase: Vec<usize>,
        antipodal: Vec<usize>,
    },
    Other,
}

impl Classification {
    pub fn is_coherent_or_bipolar(&self) -> bool {
        !matches!(self, Classification::Other)
    }
}

/// Wraps into `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Axis of `Σ e^{2iθ}`, or `None` when that sum (nearly) vanishes.
fn doubled_axis(phases: &[f64]) -> Option<f64> {
    if phases.is_empty() {
        return None;
    }
    let (re, im) = phases.iter().fold((0.0, 0.0), |(re, im), &t| {
        (re + (2.0 * t).cos(), im + (2.0 * t).sin())
    });
    if re.hypot(im) / (phases.len() as f64) < 1e-9 {
        return None;
    }
    Some(0.5 * im.atan2(re))
}

/// Largest angular distance from a phase to the nearer end of the common
/// axis `{φ, φ + π}`; zero exactly for coherent and bipolar configurations.
pub fn bipolar_deviation(phases: &[f64]) -> Option<f64> {
    let axis = doubled_axis(phases)?;
    Some(phases.iter().fold(0.0, |m: f64, &t| {
        let d = wrap_angle(t - axis).abs();
        m.max(d.min(PI - d))
    }))
}

/// Detects coherent (`{φ}`) and bipolar (`{φ, φ + π}`) configurations.
///
/// The common axis is taken from the argument of `Σ e^{2iθ}`, which is
/// insensitive to which side of the axis each phase sits on.
pub fn classify_bipolar(phases: &[f64], angle_tol: f64) -> Classification {
    let Some(axis) = doubled_axis(phases) else {
        return Classification::Other;
    };
    let mut near = Vec::new();
    let mut far = Vec::new();
    for (i, &t) in phases.iter().enumerate() {
        let d = wrap_angle(t - axis);
        if d.abs() <= angle_tol {
            near.push(i);
        } else if wrap_angle(d - PI).abs() <= angle_tol {
            far.push(i);
        } else {
            return Classification::Other;
        }
    }
    let (mut at, mut anti, mut phase) = (near, far, axis);
    if anti.len() > at.len() || (anti.len() == at.len() && anti.first() == Some(&0)) {
        std::mem::swap(&mut at, &mut anti);
        phase = wrap_angle(axis + PI);
    }
    if anti.is_empty() {
        Classification::Coherent { phase }
    } else {
        Classification::Bipolar {
            phase,
            at_phase: at,
            antipodal: anti,
        }
    }
}

/// Upper bound on the drift `|θ_c^∞ − θ_c^in|` of the average phase caused by
/// unequal initial temperatures:
///
/// `(κ₁ψ_max/(κ₂ζ_min)) · T_N²(T*² + η²T_N)(T_N − T_1) / (T*² T∞ T_1)`
///
/// with `T_1`, `T_N` the extreme initial temperatures. Infinite when
/// `κ₂ζ_min = 0` and the temperatures differ.
pub fn shift_bound(params: &ModelParams, temps_in: &[f64]) -> Result<f64> {
    let t_inf = asymptotic_temperature(temps_in, params.eta, params.t_star)?;
    let t1 = temps_in.iter().copied().fold(f64::INFINITY, f64::min);
    let tn = temps_in.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tn == t1 {
        return Ok(0.0);
    }
    let ts2 = params.t_star * params.t_star;
    let relax = params.kappa2 * params.zeta_min();
    if relax <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(params.kappa1 * params.psi_max() / relax
        * tn
        * tn
        * (ts2 + params.eta * params.eta * tn)
        * (tn - t1)
        / (ts2 * t_inf * t1))
}
