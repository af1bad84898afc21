//! Packaged scenarios: framework validation, single and paired runs, and
//! randomized campaigns.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    check_practical_framework, fit_rate, l1_distance, l1_stability_rate_bound,
    practical_sync_bound, sync_rate_bound, tail_variation, temp_decay_bound, verify_trajectory,
    ClaimId, ClaimVerdict, DecayFit, MONOTONE_SLACK, RATE_FACTOR, TAIL_CERTIFICATE, TAIL_FRACTION,
};
use crate::equilibrium::shift_bound;
use crate::error::{Error, Result};
use crate::integrate::{
    integrate, integrate_kuramoto, integrate_tcs, integrate_tk, Dynamics, IntegratorOptions,
    TcsTrajectory, TkTrajectory,
};
use crate::model::{
    asymptotic_temperature, diameter, kuramoto_rhs_into, order_parameter, EnsembleState,
    ModelParams, Network,
};
use crate::par::{map_indexed, Execution};
use crate::tcs::{
    ansatz_embed, ansatz_project_continued, galilean_shift, ring_lattice, TcsState, Vec2,
};

/// Random phase intervals stay this far inside the admissible diameter.
pub const RANDOM_MARGIN: f64 = 0.05;
/// Allowed spread of `θ^final − φ^final` around its mean.
pub const SHADOW_SPREAD_TOL: f64 = 1e-5;
/// Slack on `|z| ≤ shift_bound`.
pub const SHADOW_SHIFT_TOL: f64 = 1e-8;
/// Added to the measured tail diameter when choosing `D∞`.
pub const D_INF_OFFSET: f64 = 0.01;
/// Relative drift allowed in flocking momentum and energy.
pub const TCS_DRIFT_TOL: f64 = 1e-8;
/// Allowed discrepancy between the two Galilean paths.
pub const GALILEAN_TOL: f64 = 1e-6;
/// Velocity shift used by the Galilean two-path check.
pub const GALILEAN_SHIFT: Vec2 = [0.5, -0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit {
        phases: Vec<f64>,
        temps: Vec<f64>,
    },
    /// Phases uniform on `[center − diameter/2, center + diameter/2]`,
    /// temperatures uniform on `[temp_min, temp_max]`.
    Random {
        phase_center: f64,
        phase_diameter: f64,
        temp_min: f64,
        temp_max: f64,
        seed: u64,
    },
    Tcs {
        positions: Vec<Vec2>,
        velocities: Vec<Vec2>,
        temps: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pairing {
    #[default]
    None,
    KuramotoShadow,
    TcsReduction {
        lattice_radius: f64,
    },
    /// Second Kuramoto solution displaced by a zero-sum perturbation with
    /// entries of size at most `amplitude`.
    TwinL1 {
        amplitude: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub initial: InitialSpec,
    pub options: IntegratorOptions,
    pub claims: Vec<ClaimId>,
    #[serde(default)]
    pub pairing: Pairing,
}

/// Concrete initial data of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Tk(EnsembleState),
    Tcs(TcsState),
}

impl Scenario {
    /// Hex SHA-256 of the canonical JSON of every field except `name`, with
    /// claims sorted and deduplicated.
    pub fn hash(&self) -> String {
        let mut claims = self.claims.clone();
        claims.sort();
        claims.dedup();
        let canonical = serde_json::json!({
            "params": self.params,
            "initial": self.initial,
            "options": self.options,
            "claims": claims,
            "pairing": self.pairing,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn seed(&self) -> Option<u64> {
        match (&self.initial, &self.pairing) {
            (InitialSpec::Random { seed, .. }, _) => Some(*seed),
            (_, Pairing::TwinL1 { seed, .. }) => Some(*seed),
            _ => None,
        }
    }

    pub fn instantiate(&self) -> Result<InitialData> {
        let n = self.params.n();
        let data = match &self.initial {
            InitialSpec::Explicit { phases, temps } => {
                InitialData::Tk(EnsembleState::new(0.0, phases.clone(), temps.clone()))
            }
            InitialSpec::Random {
                phase_center,
                phase_diameter,
                temp_min,
                temp_max,
                seed,
            } => {
                if !(*phase_diameter >= 0.0 && temp_min > &0.0 && temp_max >= temp_min) {
                    return Err(Error::InvalidParams(
                        "random initial data needs phase_diameter ≥ 0 and 0 < temp_min ≤ temp_max"
                            .into(),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let half = 0.5 * phase_diameter;
                let phases = (0..n)
                    .map(|_| phase_center + half * rng.random_range(-1.0..=1.0))
                    .collect();
                let temps = (0..n)
                    .map(|_| temp_min + (temp_max - temp_min) * rng.random_range(0.0..=1.0))
                    .collect();
                InitialData::Tk(EnsembleState::new(0.0, phases, temps))
            }
            InitialSpec::Tcs {
                positions,
                velocities,
                temps,
            } => InitialData::Tcs(TcsState {
                time: 0.0,
                positions: positions.clone(),
                velocities: velocities.clone(),
                temps: temps.clone(),
            }),
        };
        match &data {
            InitialData::Tk(s) => {
                if s.n() != n {
                    return Err(Error::Dimension {
                        what: "initial phases",
                        expected: n,
                        got: s.n(),
                    });
                }
                s.validate()?;
            }
            InitialData::Tcs(s) => {
                if s.n() != n {
                    return Err(Error::Dimension {
                        what: "initial temps",
                        expected: n,
                        got: s.n(),
                    });
                }
                s.validate()?;
            }
        }
        Ok(data)
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Infeasible(msg()))
    }
}

fn check_positivity(p: &ModelParams) -> Result<()> {
    require(p.kappa2 > 0.0 && p.zeta_min() > 0.0, || {
        format!(
            "positivity: needs κ₂ > 0 and ζ_min > 0, got κ₂ = {}, ζ_min = {}",
            p.kappa2,
            p.zeta_min()
        )
    })
}

fn check_coupling(p: &ModelParams) -> Result<()> {
    require(p.psi_min() > 0.0, || {
        format!("coupling: needs ψ_min > 0, got {}", p.psi_min())
    })
}

fn check_identical(p: &ModelParams) -> Result<()> {
    require(p.is_homogeneous(), || {
        format!(
            "identical-frequencies: needs ν = 0, got D(ν) = {}",
            p.nat_freq_diameter()
        )
    })
}

fn check_balanced(p: &ModelParams) -> Result<()> {
    let scale: f64 = p.nat_freq.iter().map(|v| v.abs()).sum();
    require(p.nat_freq_sum().abs() <= 1e-12 * (1.0 + scale), || {
        format!(
            "balanced-frequencies: needs Σν = 0, got {:e}",
            p.nat_freq_sum()
        )
    })
}

/// Largest admissible initial diameter for a random spec: the framework
/// limit minus [`RANDOM_MARGIN`].
fn check_diameter(spec: &InitialSpec, d_in: f64, limit: f64, name: &str) -> Result<()> {
    match spec {
        InitialSpec::Random { phase_diameter, .. } => {
            require(*phase_diameter <= limit - RANDOM_MARGIN, || {
                format!(
                    "{name}: random phase diameter {phase_diameter} exceeds {} − {RANDOM_MARGIN}",
                    limit
                )
            })
        }
        _ => require(d_in < limit, || {
            format!("{name}: D(Θ^in) = {d_in} ≥ {limit}")
        }),
    }
}

/// Checks every framework condition required by the scenario's claims and
/// pairing. Errors name the violated condition.
pub fn validate_frameworks(scenario: &Scenario, data: &InitialData) -> Result<()> {
    let p = &scenario.params;
    p.validate()?;
    scenario.options.validate()?;
    let state = match data {
        InitialData::Tk(s) => s,
        InitialData::Tcs(_) => {
            return require(
                scenario.claims.is_empty() && scenario.pairing == Pairing::None,
                || "flocking initial data supports no phase claims or pairings".into(),
            );
        }
    };
    let d_in = diameter(&state.phases);
    let t_max = state
        .temps
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let spec = &scenario.initial;

    let practical = |limit_name: &str| -> Result<()> {
        check_positivity(p)?;
        check_coupling(p)?;
        check_balanced(p)?;
        let theta_star = match practical_sync_bound(p.nat_freq_diameter(), t_max, p).angle() {
            Some(a) => a,
            None => {
                return check_practical_framework(p, d_in, t_max).map(|_| ());
            }
        };
        check_diameter(spec, d_in, PI - theta_star, limit_name)?;
        check_practical_framework(p, d_in.min(PI - theta_star - f64::EPSILON), t_max).map(|_| ())
    };

    for &claim in &scenario.claims {
        match claim {
            ClaimId::EntropyMonotone | ClaimId::TempBounds | ClaimId::ConservedG => {}
            ClaimId::TempConsensusRate
            | ClaimId::AsymptoticTemperature
            | ClaimId::PhaseSumConvergence => check_positivity(p)?,
            ClaimId::DiameterContraction | ClaimId::SyncRate => {
                check_identical(p)?;
                check_positivity(p)?;
                check_coupling(p)?;
                check_diameter(spec, d_in, PI, "half-circle")?;
            }
            ClaimId::OrderFunctionalMonotone => check_identical(p)?,
            ClaimId::CoherentOrBipolar => {
                check_identical(p)?;
                require(p.psi.min() == 1.0 && p.psi.max() == 1.0, || {
                    "unit-network: needs ψ ≡ 1".into()
                })?;
                require(order_parameter(&state.phases) > 0.0, || {
                    "nonzero-order: needs R^in > 0".into()
                })?;
            }
            ClaimId::QuarterCircle | ClaimId::PhaseLocking => practical("initial-diameter")?,
        }
    }

    match &scenario.pairing {
        Pairing::None => {}
        Pairing::KuramotoShadow => practical("initial-diameter")?,
        Pairing::TcsReduction { lattice_radius } => {
            check_identical(p)?;
            require(p.eta > 0.0, || "heading-scale: needs η > 0".into())?;
            require(*lattice_radius >= 0.0, || {
                "lattice radius must be nonnegative".into()
            })?;
        }
        Pairing::TwinL1 { amplitude, .. } => {
            check_coupling(p)?;
            check_balanced(p)?;
            let t_inf = asymptotic_temperature(&state.temps, p.eta, p.t_star)?;
            let theta_star = practical_sync_bound(p.nat_freq_diameter(), t_inf, p)
                .angle()
                .ok_or_else(|| {
                    Error::Infeasible("stability-spread: D(ν)T∞/(κ₁ψ_min) ≥ 1".into())
                })?;
            require(*amplitude >= 0.0, || {
                "twin amplitude must be nonnegative".into()
            })?;
            // Both twins must start inside π − θ*; the perturbation moves the
            // diameter by at most twice its amplitude.
            check_diameter(
                spec,
                d_in + 2.0 * amplitude,
                PI - theta_star,
                "twin-diameter",
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub name: String,
    pub fitted: Option<DecayFit>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub z: f64,
    pub spread: f64,
    pub shift_bound: f64,
    pub t_infinity: f64,
    pub tk_tail_variation: f64,
    pub kuramoto_tail_variation: f64,
    pub converged: bool,
    pub verdict: ClaimVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    pub initial_l1: f64,
    pub final_l1: f64,
    pub d_inf: f64,
    pub bound: f64,
    pub fit: Option<DecayFit>,
    /// Largest increase of the ℓ¹ distance between consecutive tail samples.
    pub max_tail_increase: f64,
    pub verdicts: Vec<ClaimVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub t: f64,
    pub phase_deviation: f64,
    pub temp_deviation: f64,
    pub ansatz_residual: f64,
}

/// Findings of the flocking reduction; carries no verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub max_phase_deviation: f64,
    pub max_temp_deviation: f64,
    pub max_ansatz_residual: f64,
    pub series: Vec<ReductionPoint>,
    pub galilean_discrepancy: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairingReport {
    KuramotoShadow(ShadowReport),
    TwinL1(L1Report),
    TcsReduction(ReductionReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: Option<u64>,
    pub verdicts: Vec<ClaimVerdict>,
    pub rates: Vec<RateReport>,
    pub bounds: BTreeMap<String, f64>,
    pub pairing: Option<PairingReport>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trajectory: Option<TkTrajectory>,
    pub tcs_trajectory: Option<TcsTrajectory>,
    pub report: VerificationReport,
}

/// Validates, integrates and verifies a scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    let data = scenario.instantiate()?;
    validate_frameworks(scenario, &data)?;
    let p = &scenario.params;
    let mut report = VerificationReport {
        scenario: scenario.name.clone(),
        scenario_hash: scenario.hash(),
        seed: scenario.seed(),
        verdicts: Vec::new(),
        rates: Vec::new(),
        bounds: BTreeMap::new(),
        pairing: None,
        pass: true,
    };

    let state = match data {
        InitialData::Tcs(s) => {
            let (traj, verdicts) = tcs_conservation(&s, p, &scenario.options)?;
            report.verdicts = verdicts;
            report.pass = report.verdicts.iter().all(|v| v.pass);
            return Ok(ScenarioRun {
                trajectory: None,
                tcs_trajectory: Some(traj),
                report,
            });
        }
        InitialData::Tk(s) => s,
    };

    let traj = integrate_tk(&state, p, &scenario.options)?;
    report.verdicts = verify_trajectory(&traj, p, &scenario.claims)?;

    let t_inf = asymptotic_temperature(&state.temps, p.eta, p.t_star)?;
    let t_max = state
        .temps
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    report.bounds.insert("t_infinity".into(), t_inf);
    report
        .bounds
        .insert("temp_decay".into(), temp_decay_bound(p, t_inf));
    report
        .bounds
        .insert("sync_rate".into(), sync_rate_bound(p, t_inf));
    report
        .bounds
        .insert("shift".into(), shift_bound(p, &state.temps)?);
    if let Some(a) = practical_sync_bound(p.nat_freq_diameter(), t_max, p).angle() {
        report.bounds.insert("theta_star".into(), a);
    }
    if let Some(a) = practical_sync_bound(p.nat_freq_diameter(), t_inf, p).angle() {
        report.bounds.insert("quarter_circle".into(), a);
    }
    report.rates.push(RateReport {
        name: "temp_diameter".into(),
        fitted: fit_rate(&traj.series(|s| s.obs.temp_diameter)).ok(),
        bound: temp_decay_bound(p, t_inf),
    });
    if p.is_homogeneous() {
        report.rates.push(RateReport {
            name: "phase_diameter".into(),
            fitted: fit_rate(&traj.series(|s| s.obs.phase_diameter)).ok(),
            bound: sync_rate_bound(p, t_inf),
        });
    }

    report.pairing = match &scenario.pairing {
        Pairing::None => None,
        Pairing::KuramotoShadow => {
            let r = kuramoto_shadow_from(&traj, p, &scenario.options)?;
            report.verdicts.push(r.verdict.clone());
            Some(PairingReport::KuramotoShadow(r))
        }
        Pairing::TwinL1 { amplitude, seed } => {
            let other = zero_sum_perturbation(&state.phases, *amplitude, *seed);
            let r = twin_l1(&state.phases, &other, p, t_inf, &scenario.options)?;
            report.verdicts.extend(r.verdicts.iter().cloned());
            report.rates.push(RateReport {
                name: "l1_distance".into(),
                fitted: r.fit,
                bound: r.bound,
            });
            Some(PairingReport::TwinL1(r))
        }
        Pairing::TcsReduction { lattice_radius } => Some(PairingReport::TcsReduction(
            tcs_reduction_from(&traj, &state, p, *lattice_radius, &scenario.options)?,
        )),
    };
    report.pass = report.verdicts.iter().all(|v| v.pass);
    Ok(ScenarioRun {
        trajectory: Some(traj),
        tcs_trajectory: None,
        report,
    })
}

/// TK against Kuramoto at `T∞` from the same phases.
pub fn kuramoto_shadow(scenario: &Scenario) -> Result<ShadowReport> {
    let InitialData::Tk(state) = scenario.instantiate()? else {
        return Err(Error::Config(
            "kuramoto shadow needs phase initial data".into(),
        ));
    };
    let mut s = scenario.clone();
    s.pairing = Pairing::KuramotoShadow;
    validate_frameworks(&s, &InitialData::Tk(state.clone()))?;
    let traj = integrate_tk(&state, &s.params, &s.options)?;
    kuramoto_shadow_from(&traj, &s.params, &s.options)
}

fn kuramoto_shadow_from(
    tk: &TkTrajectory,
    params: &ModelParams,
    options: &IntegratorOptions,
) -> Result<ShadowReport> {
    let first = tk.first().expect("trajectories hold the initial sample");
    let t_inf = asymptotic_temperature(&first.state.temps, params.eta, params.t_star)?;
    let ku = integrate_kuramoto(&first.state.phases, params, t_inf, options)?;
    let theta = &tk.last().expect("nonempty").state.phases;
    let phi = &ku.last().expect("nonempty").state.phases;
    let n = theta.len() as f64;
    let z = theta.iter().zip(phi).map(|(a, b)| a - b).sum::<f64>() / n;
    let spread = theta
        .iter()
        .zip(phi)
        .map(|(a, b)| (a - b - z).abs())
        .fold(0.0, f64::max);
    let bound = shift_bound(params, &first.state.temps)?;
    let tk_var = tail_variation(tk, TAIL_FRACTION);
    let ku_var = tail_variation(&ku, TAIL_FRACTION);
    let converged = tk_var < TAIL_CERTIFICATE && ku_var < TAIL_CERTIFICATE;
    let verdict = if converged {
        let margin = (bound + SHADOW_SHIFT_TOL - z.abs()).min(SHADOW_SPREAD_TOL - spread);
        ClaimVerdict {
            claim_id: "kuramoto-shadow".into(),
            measured: z.abs(),
            bound,
            tolerance: SHADOW_SHIFT_TOL,
            pass: margin >= 0.0,
            margin,
            notes: format!(
                "|z| against shift bound; spread {spread:e} (limit {SHADOW_SPREAD_TOL:e})"
            ),
        }
    } else {
        let mut v = ClaimVerdict::upper_inconclusive(
            "kuramoto-shadow",
            bound,
            format!("tail variation TK {tk_var:e}, Kuramoto {ku_var:e}"),
        );
        v.measured = z.abs();
        v
    };
    Ok(ShadowReport {
        z,
        spread,
        shift_bound: bound,
        t_infinity: t_inf,
        tk_tail_variation: tk_var,
        kuramoto_tail_variation: ku_var,
        converged,
        verdict,
    })
}

/// `base + δ` with `δ` of zero sum and entries in `[−amplitude, amplitude]`.
pub fn zero_sum_perturbation(base: &[f64], amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d: Vec<f64> = (0..base.len())
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let peak = d.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    base.iter().zip(&d).map(|(b, x)| b + scale * x).collect()
}

/// Two Kuramoto solutions advanced as one system so that they share step sizes.
struct TwinDynamics<'a> {
    params: &'a ModelParams,
    t_infinity: f64,
}

#[derive(Debug, Clone)]
struct TwinState {
    time: f64,
    y: Vec<f64>,
}

impl Dynamics for TwinDynamics<'_> {
    type State = TwinState;
    type Obs = f64;

    fn params(&self) -> &ModelParams {
        self.params
    }
    fn pack(&self, s: &TwinState) -> Vec<f64> {
        s.y.clone()
    }
    fn unpack(&self, time: f64, y: &[f64]) -> TwinState {
        TwinState {
            time,
            y: y.to_vec(),
        }
    }
    fn time_of(&self, s: &TwinState) -> f64 {
        s.time
    }
    fn validate(&self, s: &TwinState) -> Result<()> {
        if s.y.len() != 2 * self.params.n() {
            return Err(Error::Dimension {
                what: "twin phases",
                expected: 2 * self.params.n(),
                got: s.y.len(),
            });
        }
        Ok(())
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.params.n();
        let (ya, yb) = y.split_at(n);
        let (da, db) = dy.split_at_mut(n);
        kuramoto_rhs_into(ya, self.params, self.t_infinity, da)?;
        kuramoto_rhs_into(yb, self.params, self.t_infinity, db)
    }
    fn observe(&self, s: &TwinState) -> f64 {
        let n = self.params.n();
        s.y[..n]
            .iter()
            .zip(&s.y[n..])
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// ℓ¹ contraction between two equal-sum Kuramoto solutions at `T∞`.
pub fn twin_l1(
    phases_a: &[f64],
    phases_b: &[f64],
    params: &ModelParams,
    t_infinity: f64,
    options: &IntegratorOptions,
) -> Result<L1Report> {
    let initial_l1 = l1_distance(phases_a, phases_b)?;
    let (sa, sb): (f64, f64) = (phases_a.iter().sum(), phases_b.iter().sum());
    let scale: f64 = phases_a.iter().chain(phases_b).map(|x| x.abs()).sum();
    if (sa - sb).abs() > 1e-12 * (1.0 + scale) {
        return Err(Error::Domain {
            index: 0,
            what: "twin phase sums differ by",
            value: sa - sb,
        });
    }
    let sys = TwinDynamics { params, t_infinity };
    let init = TwinState {
        time: 0.0,
        y: phases_a.iter().chain(phases_b).copied().collect(),
    };
    let traj = integrate(&sys, &init, options)?;
    let n = params.n();
    let tail = traj.tail(TAIL_FRACTION);
    let tail_diam = tail
        .iter()
        .map(|s| diameter(&s.state.y[..n]).max(diameter(&s.state.y[n..])))
        .fold(0.0, f64::max);
    let theta_star = practical_sync_bound(params.nat_freq_diameter(), t_infinity, params)
        .angle()
        .ok_or_else(|| Error::Infeasible("stability-spread: D(ν)T∞/(κ₁ψ_min) ≥ 1".into()))?;
    let d_inf = (tail_diam.max(theta_star) + D_INF_OFFSET).min(FRAC_PI_2 - 1e-9);
    let bound = l1_stability_rate_bound(params, t_infinity, d_inf)?;
    let series = traj.series(|s| s.obs);
    let fit = fit_rate(&series).ok();

    let max_tail_increase = tail
        .windows(2)
        .map(|w| w[1].obs - w[0].obs)
        .fold(f64::NEG_INFINITY, f64::max);
    let tail_excess = tail
        .windows(2)
        .map(|w| w[1].obs - w[0].obs - MONOTONE_SLACK * (1.0 + w[0].obs.abs()))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut verdicts = Vec::new();
    if initial_l1 == 0.0 {
        let final_l1 = traj.last().map_or(0.0, |s| s.obs);
        verdicts.push(ClaimVerdict {
            claim_id: "l1-rate".into(),
            measured: final_l1,
            bound: 0.0,
            tolerance: 0.0,
            pass: final_l1 == 0.0,
            margin: -final_l1,
            notes: "identical twins".into(),
        });
    } else {
        verdicts.push(match &fit {
            Some(f) => {
                let margin = f.rate - RATE_FACTOR * bound;
                ClaimVerdict {
                    claim_id: "l1-rate".into(),
                    measured: f.rate,
                    bound,
                    tolerance: RATE_FACTOR,
                    pass: margin >= 0.0,
                    margin,
                    notes: format!("D∞ = {d_inf:.6}, fit r² = {:.6}", f.r_squared),
                }
            }
            None => ClaimVerdict::upper_inconclusive("l1-rate", bound, "ℓ¹ fit failed".into()),
        });
    }
    let excess = if tail_excess.is_finite() {
        tail_excess
    } else {
        0.0
    };
    verdicts.push(ClaimVerdict {
        claim_id: "l1-tail-monotone".into(),
        measured: if max_tail_increase.is_finite() {
            max_tail_increase
        } else {
            0.0
        },
        bound: 0.0,
        tolerance: MONOTONE_SLACK,
        pass: excess <= 0.0,
        margin: -excess,
        notes: "largest ℓ¹ increase between consecutive tail samples".into(),
    });

    Ok(L1Report {
        initial_l1,
        final_l1: traj.last().map_or(0.0, |s| s.obs),
        d_inf,
        bound,
        fit,
        max_tail_increase: if max_tail_increase.is_finite() {
            max_tail_increase
        } else {
            0.0
        },
        verdicts,
    })
}

/// `max |final(path A shifted) − final(path B)|` for the Galilean shift by `c`:
/// path A integrates then shifts, path B shifts then integrates.
pub fn galilean_discrepancy(
    initial: &TcsState,
    params: &ModelParams,
    options: &IntegratorOptions,
    c: Vec2,
) -> Result<f64> {
    let a = integrate_tcs(initial, params, options)?;
    let b = integrate_tcs(&galilean_shift(initial, c), params, options)?;
    let fa = galilean_shift(&a.last().expect("nonempty").state, c);
    let fb = &b.last().expect("nonempty").state;
    let mut worst: f64 = 0.0;
    for k in 0..fa.n() {
        for d in 0..2 {
            worst = worst
                .max((fa.positions[k][d] - fb.positions[k][d]).abs())
                .max((fa.velocities[k][d] - fb.velocities[k][d]).abs());
        }
        worst = worst.max((fa.temps[k] - fb.temps[k]).abs());
    }
    Ok(worst)
}

fn tcs_drifts(traj: &TcsTrajectory) -> (f64, f64) {
    let first = traj.first().expect("nonempty");
    let p0 = first.obs.momentum;
    let e0 = first.obs.energy;
    let scale = first
        .state
        .velocities
        .iter()
        .map(|v| v[0].hypot(v[1]))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut dp: f64 = 0.0;
    let mut de: f64 = 0.0;
    for s in &traj.samples {
        dp = dp.max((s.obs.momentum[0] - p0[0]).hypot(s.obs.momentum[1] - p0[1]) / scale);
        de = de.max((s.obs.energy - e0).abs() / e0.abs());
    }
    (dp, de)
}

/// Momentum, energy, entropy and Galilean checks on a flocking run.
pub fn tcs_conservation(
    initial: &TcsState,
    params: &ModelParams,
    options: &IntegratorOptions,
) -> Result<(TcsTrajectory, Vec<ClaimVerdict>)> {
    let traj = integrate_tcs(initial, params, options)?;
    let (dp, de) = tcs_drifts(&traj);
    let upper = |id: &str, measured: f64, tol: f64, notes: &str| ClaimVerdict {
        claim_id: id.into(),
        measured,
        bound: 0.0,
        tolerance: tol,
        pass: measured <= tol,
        margin: tol - measured,
        notes: notes.into(),
    };
    let mut entropy_excess = f64::NEG_INFINITY;
    let mut entropy_drop: f64 = 0.0;
    for w in traj.samples.windows(2) {
        let (a, b) = (w[0].obs.entropy, w[1].obs.entropy);
        entropy_drop = entropy_drop.max(a - b);
        entropy_excess = entropy_excess.max(a - b - MONOTONE_SLACK * (1.0 + a.abs()));
    }
    let entropy_excess = if entropy_excess.is_finite() {
        entropy_excess
    } else {
        0.0
    };
    let gal = galilean_discrepancy(initial, params, options, GALILEAN_SHIFT)?;
    let verdicts = vec![
        upper(
            "tcs-momentum",
            dp,
            TCS_DRIFT_TOL,
            "max |P(t) − P(0)| / Σ|v_α(0)|",
        ),
        upper(
            "tcs-energy",
            de,
            TCS_DRIFT_TOL,
            "max |E(t) − E(0)| / |E(0)|",
        ),
        ClaimVerdict {
            claim_id: "tcs-entropy".into(),
            measured: entropy_drop,
            bound: 0.0,
            tolerance: MONOTONE_SLACK,
            pass: entropy_excess <= 0.0,
            margin: -entropy_excess,
            notes: "largest entropy decrease between samples".into(),
        },
        upper(
            "tcs-galilean",
            gal,
            GALILEAN_TOL,
            "two-path discrepancy, max norm",
        ),
    ];
    Ok((traj, verdicts))
}

/// Flocking reduction findings for a TK scenario with `ν = 0`.
pub fn tcs_reduction(scenario: &Scenario, lattice_radius: f64) -> Result<ReductionReport> {
    let InitialData::Tk(state) = scenario.instantiate()? else {
        return Err(Error::Config("reduction needs phase initial data".into()));
    };
    let mut s = scenario.clone();
    s.pairing = Pairing::TcsReduction { lattice_radius };
    validate_frameworks(&s, &InitialData::Tk(state.clone()))?;
    let traj = integrate_tk(&state, &s.params, &s.options)?;
    tcs_reduction_from(&traj, &state, &s.params, lattice_radius, &s.options)
}

fn tcs_reduction_from(
    tk: &TkTrajectory,
    state: &EnsembleState,
    params: &ModelParams,
    lattice_radius: f64,
    options: &IntegratorOptions,
) -> Result<ReductionReport> {
    if !params.is_homogeneous() {
        return Err(Error::Infeasible(
            "identical-frequencies: reduction needs ν = 0".into(),
        ));
    }
    let init = ansatz_embed(state, params, &ring_lattice(state.n(), lattice_radius))?;
    let tcs = integrate_tcs(&init, params, options)?;
    let mut series = Vec::with_capacity(tcs.len());
    for (a, b) in tk.samples.iter().zip(&tcs.samples) {
        let proj = ansatz_project_continued(&b.state, params, Some(&a.state.phases))?;
        let dev = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        };
        series.push(ReductionPoint {
            t: a.time,
            phase_deviation: dev(&proj.phases, &a.state.phases),
            temp_deviation: dev(&proj.temps, &a.state.temps),
            ansatz_residual: proj.residual,
        });
    }
    let max = |f: fn(&ReductionPoint) -> f64| series.iter().map(f).fold(0.0, f64::max);
    let (dp, de) = tcs_drifts(&tcs);
    Ok(ReductionReport {
        max_phase_deviation: max(|p| p.phase_deviation),
        max_temp_deviation: max(|p| p.temp_deviation),
        max_ansatz_residual: max(|p| p.ansatz_residual),
        galilean_discrepancy: galilean_discrepancy(&init, params, options, GALILEAN_SHIFT)?,
        momentum_drift: dp,
        energy_drift: de,
        series,
    })
}

impl ClaimVerdict {
    fn upper_inconclusive(id: &str, bound: f64, reason: String) -> Self {
        ClaimVerdict {
            claim_id: id.into(),
            measured: f64::NAN,
            bound,
            tolerance: 0.0,
            pass: false,
            margin: f64::NAN,
            notes: format!("inconclusive: {reason}"),
        }
    }
}

/// Targets of randomized campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Experiment {
    Claim(ClaimId),
    KuramotoShadow,
    TwinL1,
    TcsConservation,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Experiment::Claim(c) => write!(f, "{c}"),
            Experiment::KuramotoShadow => f.write_str("kuramoto-shadow"),
            Experiment::TwinL1 => f.write_str("l1-stability"),
            Experiment::TcsConservation => f.write_str("tcs-conservation"),
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kuramoto-shadow" => Ok(Experiment::KuramotoShadow),
            "l1-stability" => Ok(Experiment::TwinL1),
            "tcs-conservation" => Ok(Experiment::TcsConservation),
            other => other.parse().map(Experiment::Claim),
        }
    }
}

impl TryFrom<String> for Experiment {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Experiment> for String {
    fn from(e: Experiment) -> Self {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub scenario_hash: String,
    pub pass: bool,
    pub worst_margin: f64,
    pub verdicts: Vec<ClaimVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub experiment: String,
    pub n_trials: usize,
    pub seed: u64,
    pub passed: usize,
    pub pass_rate: Option<f64>,
    /// Smallest margin per verdict id over all trials.
    pub worst_margins: BTreeMap<String, f64>,
    pub trials: Vec<TrialOutcome>,
}

fn symmetric(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Network {
    let w: Vec<f64> = (0..n * n).map(|_| rng.random_range(lo..=hi)).collect();
    Network::from_fn(n, |a, b| w[a.min(b) * n + a.max(b)])
}

/// Zero-sum frequencies with diameter exactly `d` (up to rounding).
fn balanced_frequencies(n: usize, d: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if d == 0.0 {
        return vec![0.0; n];
    }
    let mut nu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mean = nu.iter().sum::<f64>() / n as f64;
    nu.iter_mut().for_each(|v| *v -= mean);
    let span = diameter(&nu);
    nu.iter_mut().for_each(|v| *v *= d / span);
    let mean = nu.iter().sum::<f64>() / n as f64;
    nu.iter_mut().for_each(|v| *v -= mean);
    nu
}

fn uniform_phases(n: usize, width: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let center = rng.random_range(-PI..PI);
    (0..n)
        .map(|_| center + 0.5 * width * rng.random_range(-1.0..=1.0))
        .collect()
}

/// `κ₂` for which the temperature decay bound equals `rate`.
fn kappa2_for(rate: f64, zeta_min: f64, eta: f64, t_star: f64, t_inf: f64) -> f64 {
    let ts2 = t_star * t_star;
    rate * t_inf * t_inf * (ts2 + eta * eta * t_inf) / (zeta_min * ts2)
}

fn adaptive(t_end: f64) -> IntegratorOptions {
    IntegratorOptions::adaptive(1e-10, t_end.min(200.0), t_end.min(200.0) / 400.0)
}

/// Draws one scenario inside the framework of `exp`.
pub fn sample_scenario(exp: Experiment, index: usize, rng: &mut ChaCha8Rng) -> Scenario {
    let n: usize = rng.random_range(3..=10);
    let eta = rng.random_range(0.0..=1.0);
    let t_star = rng.random_range(0.5..=2.0);
    let temp_min = rng.random_range(0.5..=1.5);
    let temp_max = temp_min * rng.random_range(1.2..=2.5);
    let temps: Vec<f64> = (0..n)
        .map(|_| rng.random_range(temp_min..=temp_max))
        .collect();
    let t_inf = asymptotic_temperature(&temps, eta, t_star).expect("positive temperatures");
    let t_max = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let name = format!("{exp}-{index}");
    let psi = symmetric(n, rng, 0.5, 1.5);
    let zeta = symmetric(n, rng, 0.5, 1.5);
    let explicit = |phases: Vec<f64>| InitialSpec::Explicit {
        phases,
        temps: temps.clone(),
    };
    let mk =
        |params: ModelParams, initial: InitialSpec, t_end: f64, claims: Vec<ClaimId>, pairing| {
            Scenario {
                name: name.clone(),
                params,
                initial,
                options: adaptive(t_end),
                claims,
                pairing,
            }
        };

    match exp {
        Experiment::Claim(ClaimId::EntropyMonotone | ClaimId::TempBounds | ClaimId::ConservedG) => {
            // General ensembles: heterogeneous frequencies and some vanishing ζ.
            let d_nu = rng.random_range(0.0..=1.0);
            let nu: Vec<f64> = (0..n)
                .map(|_| d_nu * rng.random_range(-0.5..=0.5))
                .collect();
            let psi = symmetric(n, rng, 0.0, 1.5);
            let mut zeta_rows = symmetric(n, rng, 0.0, 1.5).rows();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(0.2) {
                        zeta_rows[a][b] = 0.0;
                        zeta_rows[b][a] = 0.0;
                    }
                }
            }
            let zeta = Network::from_rows(zeta_rows).expect("symmetric");
            let mut params = ModelParams::homogeneous(
                n,
                rng.random_range(0.5..=3.0),
                rng.random_range(0.2..=3.0),
                eta,
                t_star,
            )
            .with_nat_freq(nu)
            .with_psi(psi)
            .with_zeta(zeta);
            params.kappa2 = params.kappa2.max(0.2);
            let phases = uniform_phases(n, rng.random_range(0.0..=2.0 * PI), rng);
            mk(
                params,
                explicit(phases),
                20.0,
                vec![
                    ClaimId::EntropyMonotone,
                    ClaimId::TempBounds,
                    ClaimId::ConservedG,
                ],
                Pairing::None,
            )
        }
        Experiment::Claim(
            c @ (ClaimId::TempConsensusRate
            | ClaimId::AsymptoticTemperature
            | ClaimId::PhaseSumConvergence),
        ) => {
            let rate = rng.random_range(0.3..=1.5);
            let d_nu: f64 = if c == ClaimId::PhaseSumConvergence {
                rng.random_range(0.0..=0.2)
            } else {
                0.0
            };
            let k2 = kappa2_for(rate, zeta.min(), eta, t_star, t_inf);
            let k1 = rng.random_range(0.5..=2.0) * t_inf / psi.min();
            let nu = balanced_frequencies(n, d_nu.min(0.5 * k1 * psi.min() / t_max), rng);
            let params = ModelParams::homogeneous(n, k1, k2, eta, t_star)
                .with_psi(psi)
                .with_zeta(zeta)
                .with_nat_freq(nu);
            let phases = uniform_phases(n, rng.random_range(0.0..=PI - 0.2), rng);
            let claims = if c == ClaimId::PhaseSumConvergence {
                vec![c, ClaimId::ConservedG]
            } else {
                vec![
                    ClaimId::TempConsensusRate,
                    ClaimId::AsymptoticTemperature,
                    ClaimId::ConservedG,
                ]
            };
            mk(params, explicit(phases), 40.0 / rate, claims, Pairing::None)
        }
        Experiment::Claim(ClaimId::DiameterContraction | ClaimId::SyncRate) => {
            let rate = rng.random_range(0.3..=1.5);
            let k1 = rate * t_inf / psi.min();
            let k2 = kappa2_for(3.0 * rate, zeta.min(), eta, t_star, t_inf);
            let params = ModelParams::homogeneous(n, k1, k2, eta, t_star)
                .with_psi(psi)
                .with_zeta(zeta);
            let width = rng.random_range(0.1..=PI - 0.1 - RANDOM_MARGIN);
            let phases = uniform_phases(n, width, rng);
            mk(
                params,
                explicit(phases),
                40.0 / rate,
                vec![
                    ClaimId::DiameterContraction,
                    ClaimId::SyncRate,
                    ClaimId::ConservedG,
                ],
                Pairing::None,
            )
        }
        Experiment::TcsConservation => {
            let params = ModelParams::homogeneous(
                n,
                rng.random_range(0.5..=2.0),
                rng.random_range(0.2..=2.0),
                eta,
                t_star,
            )
            .with_psi(psi)
            .with_zeta(zeta);
            let positions = (0..n)
                .map(|_| [rng.random_range(-5.0..=5.0), rng.random_range(-5.0..=5.0)])
                .collect();
            let velocities = (0..n)
                .map(|_| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
                .collect();
            mk(
                params,
                InitialSpec::Tcs {
                    positions,
                    velocities,
                    temps: temps.clone(),
                },
                20.0,
                vec![],
                Pairing::None,
            )
        }
        // Practical-synchronization, twin and unit-network frameworks.
        _ => {
            let rate = rng.random_range(0.3..=1.5);
            let unit = matches!(exp, Experiment::Claim(ClaimId::CoherentOrBipolar));
            let psi = if unit { Network::uniform(n, 1.0) } else { psi };
            let k1 = rate * t_inf / psi.min();
            let k2 = kappa2_for(2.0 * rate, zeta.min(), eta, t_star, t_inf);
            let homogeneous = matches!(
                exp,
                Experiment::Claim(ClaimId::CoherentOrBipolar | ClaimId::OrderFunctionalMonotone)
            );
            let q = if homogeneous {
                0.0
            } else {
                rng.random_range(0.05..=0.6)
            };
            // q = D(ν)T_ref/(κ₁ψ_min), with T_ref = T∞ for the twins and T_N^in otherwise.
            let t_ref = if exp == Experiment::TwinL1 {
                t_inf
            } else {
                t_max
            };
            let nu = balanced_frequencies(n, q * k1 * psi.min() / t_ref, rng);
            let theta_star = q.asin();
            let params = ModelParams::homogeneous(n, k1, k2, eta, t_star)
                .with_psi(psi)
                .with_zeta(zeta)
                .with_nat_freq(nu);
            let (phases, pairing, claims) = match exp {
                Experiment::KuramotoShadow => {
                    let w = rng.random_range(0.05..=PI - theta_star - RANDOM_MARGIN);
                    (
                        uniform_phases(n, w, rng),
                        Pairing::KuramotoShadow,
                        vec![ClaimId::ConservedG],
                    )
                }
                Experiment::TwinL1 => {
                    let amplitude = rng.random_range(0.01..=0.2);
                    let w =
                        rng.random_range(0.05..=PI - theta_star - RANDOM_MARGIN - 2.0 * amplitude);
                    let seed = rng.random();
                    (
                        uniform_phases(n, w, rng),
                        Pairing::TwinL1 { amplitude, seed },
                        vec![],
                    )
                }
                Experiment::Claim(
                    ClaimId::CoherentOrBipolar | ClaimId::OrderFunctionalMonotone,
                ) => {
                    let claim = match exp {
                        Experiment::Claim(c) => c,
                        _ => unreachable!(),
                    };
                    (
                        uniform_phases(n, 2.0 * PI, rng),
                        Pairing::None,
                        vec![claim, ClaimId::ConservedG],
                    )
                }
                Experiment::Claim(c) => {
                    let w = rng.random_range(0.05..=PI - theta_star - RANDOM_MARGIN);
                    (
                        uniform_phases(n, w, rng),
                        Pairing::None,
                        vec![c, ClaimId::ConservedG],
                    )
                }
                Experiment::TcsConservation => unreachable!(),
            };
            mk(params, explicit(phases), 60.0 / rate, claims, pairing)
        }
    }
}

/// Runs `n_trials` scenarios drawn inside the framework of `exp`. Trial `i`
/// draws from stream `i` of a ChaCha8 generator seeded with `seed`, so the
/// report does not depend on `exec` or on scheduling.
pub fn monte_carlo(
    exp: Experiment,
    n_trials: usize,
    seed: u64,
    exec: Execution,
) -> MonteCarloReport {
    let trials = map_indexed(n_trials, exec, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let scenario = sample_scenario(exp, i, &mut rng);
        run_trial(&scenario, i)
    });
    let passed = trials.iter().filter(|t| t.pass).count();
    let mut worst_margins: BTreeMap<String, f64> = BTreeMap::new();
    for t in &trials {
        for v in &t.verdicts {
            let m = if v.margin.is_nan() {
                f64::NEG_INFINITY
            } else {
                v.margin
            };
            worst_margins
                .entry(v.claim_id.clone())
                .and_modify(|w| *w = w.min(m))
                .or_insert(m);
        }
    }
    MonteCarloReport {
        experiment: exp.to_string(),
        n_trials,
        seed,
        passed,
        pass_rate: (n_trials > 0).then(|| passed as f64 / n_trials as f64),
        worst_margins,
        trials,
    }
}

/// Runs one scenario and condenses it to a trial outcome. Errors count as
/// failures and are recorded.
pub fn run_trial(scenario: &Scenario, index: usize) -> TrialOutcome {
    match run_scenario(scenario) {
        Ok(run) => {
            let worst = run
                .report
                .verdicts
                .iter()
                .map(|v| {
                    if v.margin.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        v.margin
                    }
                })
                .fold(f64::INFINITY, f64::min);
            TrialOutcome {
                index,
                scenario_hash: run.report.scenario_hash,
                pass: run.report.pass,
                worst_margin: worst,
                verdicts: run.report.verdicts,
                error: None,
            }
        }
        Err(e) => TrialOutcome {
            index,
            scenario_hash: scenario.hash(),
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            verdicts: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}
