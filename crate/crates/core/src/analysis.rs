//! Closed-form rate bounds, decay-rate fitting and claim verification over
//! sampled TK trajectories.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{bipolar_deviation, classify_bipolar, locking_residual};
use crate::error::{Error, Result};
use crate::integrate::TkTrajectory;
use crate::model::{asymptotic_temperature, order_functional, ModelParams, NetworkKind};

/// Per-step tolerance for monotonicity checks, scaled by `1 + |value|`.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Relative drift allowed in the conserved functional.
pub const CONSERVED_TOL: f64 = 1e-6;
/// Slack added to the quarter-circle bound.
pub const QUARTER_CIRCLE_TOL: f64 = 1e-3;
/// Fraction of samples treated as the tail of a run.
pub const TAIL_FRACTION: f64 = 0.1;
/// Measured rates must reach this fraction of the bound.
pub const RATE_FACTOR: f64 = 0.9;
/// Final temperatures must match the predicted limit to this accuracy.
pub const T_INFINITY_TOL: f64 = 1e-8;
/// Allowed residual of the locking equations at the final sample.
pub const LOCKING_TOL: f64 = 1e-6;
/// Maximal phase change over the tail for a run to count as converged.
pub const TAIL_CERTIFICATE: f64 = 1e-8;
/// Allowed tail variation of `Σθ − tΣν`.
pub const PHASE_SUM_TOL: f64 = 1e-6;
/// Angular tolerance of the coherent-or-bipolar check.
pub const BIPOLAR_ANGLE_TOL: f64 = 1e-4;
/// Default floor below which decay series are not fitted.
pub const DEFAULT_FLOOR: f64 = 1e-12;
/// Rate fits also stop once the series has fallen by this factor.
pub const RELATIVE_FLOOR: f64 = 1e-9;
/// Trailing fraction of the above-floor samples used by rate fits.
pub const RATE_WINDOW: f64 = 0.5;
/// Monotonicity checks need at least this many samples.
pub const MIN_SAMPLES: usize = 100;

/// `κ₂ζ_min T*² / (T∞²(T*² + η²T∞))`.
pub fn temp_decay_bound(params: &ModelParams, t_infinity: f64) -> f64 {
    let ts2 = params.t_star * params.t_star;
    params.kappa2 * params.zeta_min() * ts2
        / (t_infinity * t_infinity * (ts2 + params.eta * params.eta * t_infinity))
}

/// `κ₁ψ_min / T∞`. Zero (degenerate) when some `ψ_{αβ}` vanishes.
pub fn sync_rate_bound(params: &ModelParams, t_infinity: f64) -> f64 {
    params.kappa1 * params.psi_min() / t_infinity
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PracticalBound {
    Angle { value: f64 },
    Infeasible { argument: f64 },
}

impl PracticalBound {
    pub fn angle(self) -> Option<f64> {
        match self {
            PracticalBound::Angle { value } => Some(value),
            PracticalBound::Infeasible { .. } => None,
        }
    }
}

/// `arcsin(d_nu · t_ref / (κ₁ψ_min))` when the argument is below one.
pub fn practical_sync_bound(d_nu: f64, t_ref: f64, params: &ModelParams) -> PracticalBound {
    let argument = if d_nu == 0.0 {
        0.0
    } else {
        d_nu * t_ref / (params.kappa1 * params.psi_min())
    };
    if (0.0..1.0).contains(&argument) {
        PracticalBound::Angle {
            value: argument.asin(),
        }
    } else {
        PracticalBound::Infeasible { argument }
    }
}

/// `Σ_α |a_α − b_α|`.
pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "phases",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// `(κ₁ψ_min/T∞) · sin(2D∞)/(2D∞)` for `D∞ ∈ (θ*, π/2]`, with `θ*` taken at `T∞`.
pub fn l1_stability_rate_bound(params: &ModelParams, t_infinity: f64, d_inf: f64) -> Result<f64> {
    let theta_star = practical_sync_bound(params.nat_freq_diameter(), t_infinity, params)
        .angle()
        .ok_or_else(|| Error::Infeasible("D(ν)T∞/(κ₁ψ_min) ≥ 1".into()))?;
    if !(d_inf > theta_star && d_inf <= FRAC_PI_2) {
        return Err(Error::InvalidParams(format!(
            "d_inf = {d_inf} outside ({theta_star}, π/2]"
        )));
    }
    Ok(sync_rate_bound(params, t_infinity) * (2.0 * d_inf).sin() / (2.0 * d_inf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub floor_reached: bool,
}

/// Least-squares exponential rate over the trailing `window_fraction` of the
/// samples preceding the first value at or below `floor`.
pub fn fit_decay(series: &[(f64, f64)], window_fraction: f64, floor: f64) -> Result<DecayFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "window fraction {window_fraction} outside (0, 1]"
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidParams(format!(
            "floor {floor} must be positive"
        )));
    }
    let above = series
        .iter()
        .position(|&(_, v)| !(v > floor))
        .unwrap_or(series.len());
    let floor_reached = above < series.len();
    let k = (above as f64 * window_fraction).ceil() as usize;
    if k < 10 {
        return Err(Error::Fit {
            reason: format!("{k} samples above floor {floor:e} in window, need 10"),
            floor_reached,
        });
    }
    let pts = &series[above - k..above];
    let kf = k as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / kf;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / kf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in pts {
        let (dx, dy) = (t - tm, v.ln() - ym);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Fit {
            reason: "window has zero time extent".into(),
            floor_reached,
        });
    }
    let slope = sxy / sxx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 1e-24 * kf * (1.0 + ym * ym) {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate: -slope,
        window: (pts[0].0, pts[k - 1].0),
        r_squared,
        floor_reached,
    })
}

/// Rate fit with the floor set to `max(DEFAULT_FLOOR, RELATIVE_FLOOR · first value)`.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<DecayFit> {
    let start = series.first().map_or(0.0, |p| p.1);
    fit_decay(
        series,
        RATE_WINDOW,
        DEFAULT_FLOOR.max(RELATIVE_FLOOR * start),
    )
}

/// Largest change of any phase across the trailing `fraction` of the run.
pub fn tail_variation(traj: &TkTrajectory, fraction: f64) -> f64 {
    let tail = traj.tail(fraction);
    let Some(first) = tail.first() else {
        return 0.0;
    };
    (0..first.state.n())
        .map(|a| {
            let (lo, hi) = tail
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s.state.phases[a]), hi.max(s.state.phases[a]))
                });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Claims checked by [`verify_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClaimId {
    EntropyMonotone,
    TempBounds,
    ConservedG,
    DiameterContraction,
    QuarterCircle,
    PhaseSumConvergence,
    OrderFunctionalMonotone,
    TempConsensusRate,
    AsymptoticTemperature,
    SyncRate,
    PhaseLocking,
    CoherentOrBipolar,
}

impl ClaimId {
    pub const ALL: [ClaimId; 12] = [
        ClaimId::EntropyMonotone,
        ClaimId::TempBounds,
        ClaimId::ConservedG,
        ClaimId::DiameterContraction,
        ClaimId::QuarterCircle,
        ClaimId::PhaseSumConvergence,
        ClaimId::OrderFunctionalMonotone,
        ClaimId::TempConsensusRate,
        ClaimId::AsymptoticTemperature,
        ClaimId::SyncRate,
        ClaimId::PhaseLocking,
        ClaimId::CoherentOrBipolar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimId::EntropyMonotone => "entropy-monotone",
            ClaimId::TempBounds => "temp-bounds",
            ClaimId::ConservedG => "conserved-g",
            ClaimId::DiameterContraction => "diameter-contraction",
            ClaimId::QuarterCircle => "quarter-circle",
            ClaimId::PhaseSumConvergence => "phase-sum-convergence",
            ClaimId::OrderFunctionalMonotone => "order-functional-monotone",
            ClaimId::TempConsensusRate => "temp-consensus-rate",
            ClaimId::AsymptoticTemperature => "asymptotic-temperature",
            ClaimId::SyncRate => "sync-rate",
            ClaimId::PhaseLocking => "phase-locking",
            ClaimId::CoherentOrBipolar => "coherent-or-bipolar",
        }
    }

    /// Parses a comma-separated list.
    pub fn parse_list(text: &str) -> Result<Vec<ClaimId>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClaimId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClaimId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown claim id `{s}`")))
    }
}

impl TryFrom<String> for ClaimId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClaimId> for String {
    fn from(c: ClaimId) -> Self {
        c.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimVerdict {
    pub claim_id: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Distance from failing; nonnegative exactly when `pass` holds.
    pub margin: f64,
    pub notes: String,
}

impl ClaimVerdict {
    fn upper(id: ClaimId, measured: f64, bound: f64, tolerance: f64, notes: String) -> Self {
        let margin = bound + tolerance - measured;
        ClaimVerdict {
            claim_id: id.to_string(),
            measured,
            bound,
            tolerance,
            pass: margin >= 0.0,
            margin,
            notes,
        }
    }

    fn lower(id: ClaimId, measured: f64, bound: f64, factor: f64, notes: String) -> Self {
        let margin = measured - factor * bound;
        ClaimVerdict {
            claim_id: id.to_string(),
            measured,
            bound,
            tolerance: factor,
            pass: margin >= 0.0,
            margin,
            notes,
        }
    }

    /// A claim whose measurement could not be made.
    pub fn inconclusive(id: ClaimId, bound: f64, tolerance: f64, reason: String) -> Self {
        ClaimVerdict {
            claim_id: id.to_string(),
            measured: f64::NAN,
            bound,
            tolerance,
            pass: false,
            margin: f64::NAN,
            notes: format!("inconclusive: {reason}"),
        }
    }
}

/// Worst slack-adjusted violation of monotonicity; nonpositive when monotone.
/// Returns `(largest raw step against the direction, largest step minus slack)`.
fn monotone_violation(values: impl Iterator<Item = f64>, increasing: bool) -> (f64, f64) {
    let sign = if increasing { 1.0 } else { -1.0 };
    let mut prev: Option<f64> = None;
    let mut raw = f64::NEG_INFINITY;
    let mut excess = f64::NEG_INFINITY;
    for v in values {
        if let Some(p) = prev {
            let drop = sign * (p - v);
            raw = raw.max(drop);
            excess = excess.max(drop - MONOTONE_SLACK * (1.0 + p.abs()));
        }
        prev = Some(v);
    }
    if raw == f64::NEG_INFINITY {
        (0.0, 0.0)
    } else {
        (raw, excess)
    }
}

fn monotone_verdict(id: ClaimId, values: Vec<f64>, increasing: bool, what: &str) -> ClaimVerdict {
    let (raw, excess) = monotone_violation(values.into_iter(), increasing);
    ClaimVerdict {
        claim_id: id.to_string(),
        measured: raw,
        bound: 0.0,
        tolerance: MONOTONE_SLACK,
        pass: excess <= 0.0,
        margin: -excess,
        notes: format!("largest step against monotone {what}"),
    }
}

/// Checked before claims that need ν = 0.
fn require_homogeneous(params: &ModelParams, id: ClaimId) -> Result<()> {
    if params.is_homogeneous() {
        Ok(())
    } else {
        Err(Error::Infeasible(format!(
            "identical-frequencies: {id} needs ν = 0"
        )))
    }
}

fn require_positive(params: &ModelParams, id: ClaimId) -> Result<()> {
    if params.network_kind() != NetworkKind::Positive || params.kappa2 <= 0.0 {
        return Err(Error::Infeasible(format!(
            "positivity: {id} needs κ₂ > 0 and strictly positive ψ, ζ"
        )));
    }
    Ok(())
}

/// Verdicts for each requested claim, in request order.
///
/// Claims whose framework is not met by `params` or the initial sample yield
/// an infeasible error naming the condition.
pub fn verify_trajectory(
    traj: &TkTrajectory,
    params: &ModelParams,
    claims: &[ClaimId],
) -> Result<Vec<ClaimVerdict>> {
    let (Some(first), Some(last)) = (traj.first(), traj.last()) else {
        return Err(Error::InvalidParams("empty trajectory".into()));
    };
    if traj.len() < MIN_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "trajectory has {} samples, verification needs {MIN_SAMPLES}",
            traj.len()
        )));
    }
    let temps_in = &first.state.temps;
    let t_inf = asymptotic_temperature(temps_in, params.eta, params.t_star)?;
    let t_max_in = temps_in.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d_nu = params.nat_freq_diameter();

    claims
        .iter()
        .map(|&id| {
            Ok(match id {
                ClaimId::EntropyMonotone => monotone_verdict(
                    id,
                    traj.samples.iter().map(|s| s.obs.entropy).collect(),
                    true,
                    "entropy",
                ),
                ClaimId::TempBounds => {
                    let min_t = traj
                        .samples
                        .iter()
                        .map(|s| s.state.temps.iter().copied().fold(f64::INFINITY, f64::min));
                    let max_t = traj.samples.iter().map(|s| {
                        s.state
                            .temps
                            .iter()
                            .copied()
                            .fold(f64::NEG_INFINITY, f64::max)
                    });
                    let (r1, e1) = monotone_violation(min_t, true);
                    let (r2, e2) = monotone_violation(max_t, false);
                    let excess = e1.max(e2);
                    ClaimVerdict {
                        claim_id: id.to_string(),
                        measured: r1.max(r2),
                        bound: 0.0,
                        tolerance: MONOTONE_SLACK,
                        pass: excess <= 0.0,
                        margin: -excess,
                        notes: "largest step against rising min / falling max temperature".into(),
                    }
                }
                ClaimId::ConservedG => {
                    let g0 = first.obs.conserved_g;
                    let drift = traj
                        .samples
                        .iter()
                        .map(|s| (s.obs.conserved_g - g0).abs())
                        .fold(0.0, f64::max)
                        / g0.abs();
                    ClaimVerdict::upper(id, drift, 0.0, CONSERVED_TOL, "relative drift".into())
                }
                ClaimId::DiameterContraction => {
                    require_homogeneous(params, id)?;
                    let d_in = first.obs.phase_diameter;
                    if d_in >= std::f64::consts::PI {
                        return Err(Error::Infeasible(format!(
                            "{id}: D(Θ^in) = {d_in} is not below π"
                        )));
                    }
                    let peak = traj
                        .samples
                        .iter()
                        .map(|s| s.obs.phase_diameter)
                        .fold(f64::NEG_INFINITY, f64::max);
                    ClaimVerdict::upper(
                        id,
                        peak,
                        d_in,
                        MONOTONE_SLACK * (1.0 + d_in),
                        "max D(Θ) against D(Θ^in)".into(),
                    )
                }
                ClaimId::QuarterCircle => {
                    require_positive(params, id)?;
                    check_practical_framework(params, first.obs.phase_diameter, t_max_in)?;
                    let bound = practical_sync_bound(d_nu, t_inf, params)
                        .angle()
                        .expect("T∞ ≤ T_N^in keeps the argument below one");
                    let tail_max = traj
                        .tail(TAIL_FRACTION)
                        .iter()
                        .map(|s| s.obs.phase_diameter)
                        .fold(f64::NEG_INFINITY, f64::max);
                    ClaimVerdict::upper(
                        id,
                        tail_max,
                        bound,
                        QUARTER_CIRCLE_TOL,
                        "tail max D(Θ) against arcsin(D(ν)T∞/(κ₁ψ_min))".into(),
                    )
                }
                ClaimId::PhaseSumConvergence => {
                    let nu_sum = params.nat_freq_sum();
                    let (lo, hi) = traj.tail(TAIL_FRACTION).iter().fold(
                        (f64::INFINITY, f64::NEG_INFINITY),
                        |(lo, hi), s| {
                            let v = s.obs.phase_sum - s.time * nu_sum;
                            (lo.min(v), hi.max(v))
                        },
                    );
                    ClaimVerdict::upper(
                        id,
                        hi - lo,
                        0.0,
                        PHASE_SUM_TOL,
                        "tail variation of Σθ − tΣν".into(),
                    )
                }
                ClaimId::OrderFunctionalMonotone => {
                    require_homogeneous(params, id)?;
                    monotone_verdict(
                        id,
                        traj.samples
                            .iter()
                            .map(|s| order_functional(&s.state.phases, &params.psi))
                            .collect(),
                        true,
                        "Σψcos(θ_α − θ_β)",
                    )
                }
                ClaimId::TempConsensusRate => {
                    require_positive(params, id)?;
                    let bound = temp_decay_bound(params, t_inf);
                    match fit_rate(&traj.series(|s| s.obs.temp_diameter)) {
                        Ok(fit) => ClaimVerdict::lower(
                            id,
                            fit.rate,
                            bound,
                            RATE_FACTOR,
                            format!(
                                "D(T) fit on [{:.4}, {:.4}], r² = {:.6}",
                                fit.window.0, fit.window.1, fit.r_squared
                            ),
                        ),
                        Err(e) => ClaimVerdict::inconclusive(id, bound, RATE_FACTOR, e.to_string()),
                    }
                }
                ClaimId::AsymptoticTemperature => {
                    let dev = last
                        .state
                        .temps
                        .iter()
                        .map(|t| (t - t_inf).abs())
                        .fold(0.0, f64::max);
                    ClaimVerdict::upper(
                        id,
                        dev,
                        0.0,
                        T_INFINITY_TOL,
                        format!("max |T_α(t_end) − T∞| with T∞ = {t_inf:.17}"),
                    )
                }
                ClaimId::SyncRate => {
                    require_homogeneous(params, id)?;
                    require_positive(params, id)?;
                    let bound = sync_rate_bound(params, t_inf);
                    match fit_rate(&traj.series(|s| s.obs.phase_diameter)) {
                        Ok(fit) => ClaimVerdict::lower(
                            id,
                            fit.rate,
                            bound,
                            RATE_FACTOR,
                            format!(
                                "D(Θ) fit on [{:.4}, {:.4}], r² = {:.6}",
                                fit.window.0, fit.window.1, fit.r_squared
                            ),
                        ),
                        Err(e) => ClaimVerdict::inconclusive(id, bound, RATE_FACTOR, e.to_string()),
                    }
                }
                ClaimId::PhaseLocking => {
                    if params.nat_freq_sum().abs() > 1e-12 * (1.0 + d_nu) {
                        return Err(Error::Infeasible(format!(
                            "{id}: natural frequencies sum to {:e}",
                            params.nat_freq_sum()
                        )));
                    }
                    let variation = tail_variation(traj, TAIL_FRACTION);
                    if variation >= TAIL_CERTIFICATE {
                        ClaimVerdict::inconclusive(
                            id,
                            0.0,
                            LOCKING_TOL,
                            format!("tail variation {variation:e} not below {TAIL_CERTIFICATE:e}"),
                        )
                    } else {
                        let r = locking_residual(&last.state.phases, params, t_inf);
                        ClaimVerdict::upper(
                            id,
                            r,
                            0.0,
                            LOCKING_TOL,
                            format!("locking residual; tail variation {variation:e}"),
                        )
                    }
                }
                ClaimId::CoherentOrBipolar => {
                    require_homogeneous(params, id)?;
                    if params.psi.min() != 1.0 || params.psi.max() != 1.0 {
                        return Err(Error::Infeasible(format!("{id}: needs ψ ≡ 1")));
                    }
                    if first.obs.order_parameter <= 0.0 {
                        return Err(Error::Infeasible(format!("{id}: needs R^in > 0")));
                    }
                    let phases = &last.state.phases;
                    let dev = bipolar_deviation(phases).unwrap_or(f64::INFINITY);
                    let class = classify_bipolar(phases, BIPOLAR_ANGLE_TOL);
                    let mut v = ClaimVerdict::upper(
                        id,
                        dev,
                        0.0,
                        BIPOLAR_ANGLE_TOL,
                        format!("final classification {class:?}"),
                    );
                    v.pass = class.is_coherent_or_bipolar();
                    v
                }
            })
        })
        .collect()
}

/// The practical-synchronization framework: `D(ν)T_N^in/(κ₁ψ_min) < 1` and
/// `D(Θ^in) < π − θ*`. Errors name the violated condition.
pub fn check_practical_framework(
    params: &ModelParams,
    d_theta_in: f64,
    t_max_in: f64,
) -> Result<f64> {
    let d_nu = params.nat_freq_diameter();
    let theta_star = match practical_sync_bound(d_nu, t_max_in, params) {
        PracticalBound::Angle { value } => value,
        PracticalBound::Infeasible { argument } => {
            return Err(Error::Infeasible(format!(
                "frequency-spread: D(ν)T_N^in/(κ₁ψ_min) = {argument} ≥ 1"
            )))
        }
    };
    if d_theta_in >= std::f64::consts::PI - theta_star {
        return Err(Error::Infeasible(format!(
            "initial-diameter: D(Θ^in) = {d_theta_in} ≥ π − θ* = {}",
            std::f64::consts::PI - theta_star
        )));
    }
    Ok(theta_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate_tk, IntegratorOptions};
    use crate::model::{EnsembleState, Network};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn base() -> ModelParams {
        ModelParams::homogeneous(3, 1.0, 1.0, 1.0, 1.0)
    }

    #[test]
    fn bound_examples() {
        assert_relative_eq!(temp_decay_bound(&base(), 1.0), 0.5, epsilon = 1e-15);
        let mut p = base();
        p.eta = 0.0;
        assert_relative_eq!(temp_decay_bound(&p, 2.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(sync_rate_bound(&base(), 2.0), 0.5, epsilon = 1e-15);
        let mut flat = Network::uniform(3, 1.0).rows();
        flat[0][1] = 0.0;
        flat[1][0] = 0.0;
        let p0 = base().with_psi(Network::from_rows(flat).unwrap());
        assert_eq!(sync_rate_bound(&p0, 1.0), 0.0);
    }

    #[test]
    fn practical_bound_examples() {
        let p = base();
        assert_eq!(
            practical_sync_bound(0.0, 1.0, &p),
            PracticalBound::Angle { value: 0.0 }
        );
        assert_relative_eq!(
            practical_sync_bound(0.5, 1.0, &p).angle().unwrap(),
            PI / 6.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            practical_sync_bound(1.0, 1.0, &p),
            PracticalBound::Infeasible { .. }
        ));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l1_distance(&[1.0, 2.0], &[0.0, 4.0]).unwrap(), 3.0);
        assert!(l1_distance(&[1.0], &[1.0, 2.0]).is_err());
        let p = ModelParams::homogeneous(2, 1.0, 1.0, 0.0, 1.0);
        assert_relative_eq!(
            l1_stability_rate_bound(&p, 1.0, PI / 4.0).unwrap(),
            2.0 / PI,
            epsilon = 1e-15
        );
        assert!(l1_stability_rate_bound(&p, 1.0, FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!(l1_stability_rate_bound(&p, 1.0, 2.0).is_err());
    }

    fn exp_series(rate: f64, n: usize, dt: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| (i as f64 * dt, (-rate * i as f64 * dt).exp()))
            .collect()
    }

    #[test]
    fn fit_exact_exponential() {
        let fit = fit_decay(&exp_series(2.0, 200, 0.05), 0.5, 1e-12).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-8);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(!fit.floor_reached);
        assert!(fit.window.0 < fit.window.1);
    }

    #[test]
    fn fit_constant_series() {
        let s: Vec<_> = (0..50).map(|i| (i as f64, 3.0)).collect();
        let fit = fit_decay(&s, 1.0, 1e-12).unwrap();
        assert!(fit.rate.abs() < 1e-15);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn fit_noisy_series_within_one_percent() {
        // Oracle: multiplicative noise of relative size 1e-3 on a·e^{−λt}.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(a, lambda) in &[(1.0, 0.7), (5.0, 3.0), (0.01, 0.2)] {
            let s: Vec<_> = (0..400)
                .map(|i| {
                    let t = i as f64 * 10.0 / (lambda * 400.0);
                    let noise = 1.0 + 1e-3 * rng.random_range(-1.0..1.0);
                    (t, a * (-lambda * t).exp() * noise)
                })
                .collect();
            let fit = fit_decay(&s, 0.5, 1e-12).unwrap();
            assert!((fit.rate - lambda).abs() <= 0.01 * lambda, "{fit:?}");
        }
    }

    #[test]
    fn fit_reports_floor() {
        let s = exp_series(5.0, 100, 1.0);
        match fit_decay(&s, 0.5, 1e-12) {
            Err(Error::Fit { floor_reached, .. }) => assert!(floor_reached),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn claim_ids_round_trip() {
        for c in ClaimId::ALL {
            assert_eq!(c.as_str().parse::<ClaimId>().unwrap(), c);
        }
        assert!(matches!("nope".parse::<ClaimId>(), Err(Error::Config(_))));
        assert_eq!(
            ClaimId::parse_list("conserved-g, sync-rate").unwrap(),
            vec![ClaimId::ConservedG, ClaimId::SyncRate]
        );
    }

    fn run(p: &ModelParams, phases: Vec<f64>, temps: Vec<f64>, t_end: f64) -> TkTrajectory {
        let opts = IntegratorOptions::adaptive(1e-10, t_end, t_end / 400.0);
        integrate_tk(&EnsembleState::new(0.0, phases, temps), p, &opts).unwrap()
    }

    #[test]
    fn equilibrium_data_passes_with_zero_margin() {
        let p = ModelParams::homogeneous(4, 1.0, 1.0, 0.5, 1.0);
        let traj = run(&p, vec![0.3; 4], vec![1.2; 4], 5.0);
        let claims = [
            ClaimId::EntropyMonotone,
            ClaimId::TempBounds,
            ClaimId::ConservedG,
            ClaimId::DiameterContraction,
            ClaimId::OrderFunctionalMonotone,
        ];
        for v in verify_trajectory(&traj, &p, &claims).unwrap() {
            assert!(v.pass, "{v:?}");
            assert_eq!(v.measured, 0.0, "{v:?}");
        }
    }

    #[test]
    fn corrupted_entropy_fails() {
        let p = ModelParams::homogeneous(3, 1.0, 1.0, 0.0, 1.0);
        let mut traj = run(&p, vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0], 5.0);
        traj.samples[50].obs.entropy = traj.samples[49].obs.entropy - 1e-6;
        let v = &verify_trajectory(&traj, &p, &[ClaimId::EntropyMonotone]).unwrap()[0];
        assert!(!v.pass);
        assert!(v.margin < 0.0);
    }

    #[test]
    fn homogeneous_half_circle_claims_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::homogeneous(5, 1.0, 2.0, 0.3, 1.0);
        for _ in 0..3 {
            let phases = (0..5).map(|_| rng.random_range(-1.4..1.4)).collect();
            let temps = (0..5).map(|_| rng.random_range(1.0..2.0)).collect();
            let traj = run(&p, phases, temps, 30.0);
            let claims = [
                ClaimId::EntropyMonotone,
                ClaimId::TempBounds,
                ClaimId::ConservedG,
                ClaimId::DiameterContraction,
                ClaimId::OrderFunctionalMonotone,
            ];
            for v in verify_trajectory(&traj, &p, &claims).unwrap() {
                assert!(v.pass, "{v:?}");
            }
        }
    }

    #[test]
    fn framework_violations_are_infeasible() {
        let p = ModelParams::homogeneous(2, 1.0, 1.0, 0.0, 1.0).with_nat_freq(vec![-0.1, 0.1]);
        let traj = run(&p, vec![0.0, 0.1], vec![1.0, 1.0], 5.0);
        assert!(matches!(
            verify_trajectory(&traj, &p, &[ClaimId::SyncRate]),
            Err(Error::Infeasible(_))
        ));
        assert!(check_practical_framework(&p, 3.1, 1.0).is_err());
        let big = p.clone().with_nat_freq(vec![-1.0, 1.0]);
        let err = check_practical_framework(&big, 0.1, 1.0).unwrap_err();
        assert!(err.to_string().contains("frequency-spread"));
    }

    proptest! {
        #[test]
        fn bounds_follow_formula_monotonicity(
            k1 in 0.1f64..5.0, k2 in 0.1f64..5.0, eta in 0.0f64..2.0,
            ts in 0.2f64..3.0, t in 0.2f64..5.0, s in 1.01f64..3.0,
        ) {
            let p = ModelParams::homogeneous(3, k1, k2, eta, ts);
            prop_assert!(temp_decay_bound(&p, t * s) < temp_decay_bound(&p, t));
            prop_assert!(sync_rate_bound(&p, t * s) < sync_rate_bound(&p, t));
            let mut q = p.clone();
            q.kappa2 *= s;
            prop_assert!(temp_decay_bound(&q, t) > temp_decay_bound(&p, t));
            q.kappa1 *= s;
            prop_assert!((sync_rate_bound(&q, t) - s * sync_rate_bound(&p, t)).abs() < 1e-12 * s * k1 / t);
            let mut e = p.clone();
            e.eta += 0.5;
            prop_assert!(temp_decay_bound(&e, t) < temp_decay_bound(&p, t));
            let mut st = p.clone();
            st.t_star *= s;
            prop_assert!(temp_decay_bound(&st, t) >= temp_decay_bound(&p, t));
        }

        #[test]
        fn practical_bound_increases_with_frequency_spread(
            d in 0.0f64..0.5, t in 0.5f64..1.5, s in 1.01f64..1.3,
        ) {
            let p = ModelParams::homogeneous(3, 2.0, 1.0, 0.0, 1.0);
            let a = practical_sync_bound(d, t, &p).angle().unwrap();
            let b = practical_sync_bound(d * s, t, &p).angle().unwrap();
            prop_assert!(b >= a);
            prop_assert!((0.0..=FRAC_PI_2).contains(&a));
        }

        #[test]
        fn l1_bound_decreases_in_d_inf(d in 0.05f64..1.4, step in 0.01f64..0.15) {
            let p = ModelParams::homogeneous(3, 1.0, 1.0, 0.0, 1.0);
            let a = l1_stability_rate_bound(&p, 1.0, d).unwrap();
            let b = l1_stability_rate_bound(&p, 1.0, (d + step).min(FRAC_PI_2)).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn verdicts_deterministic(seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = ModelParams::homogeneous(3, 1.0, 1.0, 0.0, 1.0);
            let phases: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let temps: Vec<f64> = (0..3).map(|_| rng.random_range(1.0..2.0)).collect();
            let a = run(&p, phases.clone(), temps.clone(), 3.0);
            let b = run(&p, phases, temps, 3.0);
            let va = verify_trajectory(&a, &p, &ClaimId::ALL[..3]).unwrap();
            let vb = verify_trajectory(&b, &p, &ClaimId::ALL[..3]).unwrap();
            prop_assert_eq!(
                serde_json::to_string(&va).unwrap(),
                serde_json::to_string(&vb).unwrap()
            );
        }
    }
}
