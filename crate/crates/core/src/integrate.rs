//! Time stepping for the TK, Kuramoto and flocking systems.
//!
//! Two methods are provided: classical fixed-step RK4 and the Dormand–Prince
//! 5(4) embedded pair with step-size control. Samples are taken on a uniform
//! grid of spacing `dt * output_stride`; the adaptive stepper clips its steps
//! so that every grid point is hit exactly.
//!
//! Temperatures must stay above `positivity_floor`. A step that violates this
//! is rejected and retried at half the step size (adaptive) or aborts the run
//! (fixed). Values are never clipped.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    kuramoto_rhs_into, observables, tk_rhs_into, EnsembleState, ModelParams, Observables,
};
use crate::tcs::{tcs_rhs_parts, TcsObservables, TcsState, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Fixed step, or initial step for the adaptive method.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Final time of the run.
    pub t_end: f64,
    /// Output sampling interval, in units of `dt`.
    pub output_stride: usize,
    pub positivity_floor: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            method: Method::Rk45Adaptive,
            dt: 0.01,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_end: 50.0,
            output_stride: 10,
            positivity_floor: 1e-12,
        }
    }
}

impl IntegratorOptions {
    pub fn fixed(dt: f64, t_end: f64, output_stride: usize) -> Self {
        IntegratorOptions {
            method: Method::Rk4Fixed,
            dt,
            t_end,
            output_stride,
            ..Default::default()
        }
    }

    pub fn adaptive(rel_tol: f64, t_end: f64, sample_interval: f64) -> Self {
        IntegratorOptions {
            method: Method::Rk45Adaptive,
            dt: sample_interval,
            rel_tol,
            abs_tol: rel_tol * 1e-2,
            t_end,
            output_stride: 1,
            ..Default::default()
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.output_stride as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(format!("integrator: {m}")));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if self.output_stride == 0 {
            return bad("output_stride must be positive");
        }
        if !(self.positivity_floor > 0.0) {
            return bad("positivity_floor must be positive");
        }
        Ok(())
    }
}

/// Dimensional estimate of the fastest local rate, scaled by 1/100:
/// `0.01 · min(T_min/(κ₁ψ_max), T_min²/(κ₂ζ_max))`.
pub fn default_dt(params: &ModelParams, temps: &[f64]) -> f64 {
    let t_min = temps.iter().copied().fold(f64::INFINITY, f64::min);
    let phase = t_min / (params.kappa1 * params.psi_max());
    let heat = if params.kappa2 * params.zeta_max() > 0.0 {
        t_min * t_min / (params.kappa2 * params.zeta_max())
    } else {
        f64::INFINITY
    };
    0.01 * phase.min(heat)
}

/// A system the integrator can advance. States are packed into a flat vector.
pub trait Dynamics {
    type State: Clone;
    type Obs: Clone;

    fn params(&self) -> &ModelParams;
    fn pack(&self, state: &Self::State) -> Vec<f64>;
    fn unpack(&self, time: f64, y: &[f64]) -> Self::State;
    fn time_of(&self, state: &Self::State) -> f64;
    fn validate(&self, state: &Self::State) -> Result<()>;
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;
    fn observe(&self, state: &Self::State) -> Self::Obs;
    /// Components that must stay above the positivity floor.
    fn positive_range(&self, _dim: usize) -> Range<usize> {
        0..0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample<S, O> {
    pub time: f64,
    pub state: S,
    pub obs: O,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub positivity_rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub params: ModelParams,
    pub options: IntegratorOptions,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S, O> {
    pub samples: Vec<Sample<S, O>>,
    pub meta: TrajectoryMeta,
}

pub type TkTrajectory = Trajectory<EnsembleState, Observables>;
pub type TcsTrajectory = Trajectory<TcsState, TcsObservables>;

impl<S, O> Trajectory<S, O> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn first(&self) -> Option<&Sample<S, O>> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample<S, O>> {
        self.samples.last()
    }

    /// Samples in the trailing `fraction` of the run (at least two when available).
    pub fn tail(&self, fraction: f64) -> &[Sample<S, O>] {
        let n = self.samples.len();
        let k = ((n as f64 * fraction).ceil() as usize).clamp(n.min(2), n);
        &self.samples[n - k..]
    }

    /// `(t, f(sample))` pairs.
    pub fn series(&self, f: impl Fn(&Sample<S, O>) -> f64) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.time, f(s))).collect()
    }
}

/// Phase/temperature dynamics.
pub struct TkDynamics<'a> {
    pub params: &'a ModelParams,
}

impl Dynamics for TkDynamics<'_> {
    type State = EnsembleState;
    type Obs = Observables;

    fn params(&self) -> &ModelParams {
        self.params
    }
    fn pack(&self, s: &EnsembleState) -> Vec<f64> {
        s.phases.iter().chain(&s.temps).copied().collect()
    }
    fn unpack(&self, time: f64, y: &[f64]) -> EnsembleState {
        let n = y.len() / 2;
        EnsembleState::new(time, y[..n].to_vec(), y[n..].to_vec())
    }
    fn time_of(&self, s: &EnsembleState) -> f64 {
        s.time
    }
    fn validate(&self, s: &EnsembleState) -> Result<()> {
        s.validate()?;
        if s.n() != self.params.n() {
            return Err(Error::Dimension {
                what: "initial state",
                expected: self.params.n(),
                got: s.n(),
            });
        }
        Ok(())
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = y.len() / 2;
        let (dp, dt) = dy.split_at_mut(n);
        tk_rhs_into(&y[..n], &y[n..], self.params, dp, dt)
    }
    fn observe(&self, s: &EnsembleState) -> Observables {
        observables(s, self.params)
    }
    fn positive_range(&self, dim: usize) -> Range<usize> {
        dim / 2..dim
    }
}

/// Isothermal Kuramoto phases at temperature `t_infinity`. The state carries
/// constant temperatures so that TK observables apply unchanged.
pub struct KuramotoDynamics<'a> {
    pub params: &'a ModelParams,
    pub t_infinity: f64,
}

impl Dynamics for KuramotoDynamics<'_> {
    type State = EnsembleState;
    type Obs = Observables;

    fn params(&self) -> &ModelParams {
        self.params
    }
    fn pack(&self, s: &EnsembleState) -> Vec<f64> {
        s.phases.clone()
    }
    fn unpack(&self, time: f64, y: &[f64]) -> EnsembleState {
        EnsembleState::new(time, y.to_vec(), vec![self.t_infinity; y.len()])
    }
    fn time_of(&self, s: &EnsembleState) -> f64 {
        s.time
    }
    fn validate(&self, s: &EnsembleState) -> Result<()> {
        if s.n() != self.params.n() {
            return Err(Error::Dimension {
                what: "initial phases",
                expected: self.params.n(),
                got: s.n(),
            });
        }
        match s.phases.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(Error::Domain {
                index: i,
                what: "phase",
                value: s.phases[i],
            }),
            None => Ok(()),
        }
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        kuramoto_rhs_into(y, self.params, self.t_infinity, dy)
    }
    fn observe(&self, s: &EnsembleState) -> Observables {
        observables(s, self.params)
    }
}

/// Planar flocking with temperatures.
pub struct TcsDynamics<'a> {
    pub params: &'a ModelParams,
}

impl Dynamics for TcsDynamics<'_> {
    type State = TcsState;
    type Obs = TcsObservables;

    fn params(&self) -> &ModelParams {
        self.params
    }
    fn pack(&self, s: &TcsState) -> Vec<f64> {
        s.pack()
    }
    fn unpack(&self, time: f64, y: &[f64]) -> TcsState {
        TcsState::unpack(time, y)
    }
    fn time_of(&self, s: &TcsState) -> f64 {
        s.time
    }
    fn validate(&self, s: &TcsState) -> Result<()> {
        s.validate()?;
        if s.n() != self.params.n() {
            return Err(Error::Dimension {
                what: "initial state",
                expected: self.params.n(),
                got: s.n(),
            });
        }
        Ok(())
    }
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = y.len() / 5;
        let temps = &y[4 * n..];
        crate::model::check_temps(temps)?;
        let vel: Vec<Vec2> = y[2 * n..4 * n].chunks(2).map(|c| [c[0], c[1]]).collect();
        let mut dx = vec![[0.0; 2]; n];
        let mut dv = vec![[0.0; 2]; n];
        let mut de = vec![0.0; n];
        let mut dt = vec![0.0; n];
        tcs_rhs_parts(&vel, temps, self.params, &mut dx, &mut dv, &mut de, &mut dt);
        for a in 0..n {
            dy[2 * a] = dx[a][0];
            dy[2 * a + 1] = dx[a][1];
            dy[2 * n + 2 * a] = dv[a][0];
            dy[2 * n + 2 * a + 1] = dv[a][1];
            dy[4 * n + a] = dt[a];
        }
        Ok(())
    }
    fn observe(&self, s: &TcsState) -> TcsObservables {
        s.observables()
    }
    fn positive_range(&self, dim: usize) -> Range<usize> {
        4 * dim / 5..dim
    }
}

/// Advances `initial` to `options.t_end`, sampling every `dt * output_stride`.
pub fn integrate<D: Dynamics>(
    system: &D,
    initial: &D::State,
    options: &IntegratorOptions,
) -> Result<Trajectory<D::State, D::Obs>> {
    options.validate()?;
    system.validate(initial)?;
    let t0 = system.time_of(initial);
    let y0 = system.pack(initial);
    let pos = system.positive_range(y0.len());
    if let Some(i) = y0[pos.clone()]
        .iter()
        .position(|v| *v < options.positivity_floor)
    {
        return Err(Error::Domain {
            index: i,
            what: "initial temperature below positivity floor",
            value: y0[pos.start + i],
        });
    }
    if options.t_end <= t0 {
        return Err(Error::InvalidParams(format!(
            "t_end = {} must exceed the initial time {t0}",
            options.t_end
        )));
    }

    let mut stepper = Stepper::new(system, options, pos, y0.len());
    let mut samples = Vec::new();
    let mut push = |t: f64, y: &[f64]| {
        let state = system.unpack(t, y);
        let obs = system.observe(&state);
        samples.push(Sample {
            time: t,
            state,
            obs,
        });
    };

    let interval = options.sample_interval();
    let n_intervals = (((options.t_end - t0) / interval) - 1e-9).ceil().max(1.0) as usize;
    let mut y = y0;
    let mut t = t0;
    push(t, &y);
    for k in 1..=n_intervals {
        let target = if k == n_intervals {
            options.t_end
        } else {
            t0 + k as f64 * interval
        };
        match options.method {
            Method::Rk4Fixed => stepper.rk4_to(&mut t, &mut y, target)?,
            Method::Rk45Adaptive => stepper.dopri_to(&mut t, &mut y, target)?,
        }
        push(target, &y);
    }

    Ok(Trajectory {
        samples,
        meta: TrajectoryMeta {
            params: system.params().clone(),
            options: options.clone(),
            stats: stepper.stats,
        },
    })
}

pub fn integrate_tk(
    initial: &EnsembleState,
    params: &ModelParams,
    options: &IntegratorOptions,
) -> Result<TkTrajectory> {
    params.validate()?;
    integrate(&TkDynamics { params }, initial, options)
}

/// Kuramoto run from `phases` at time zero with frozen temperature `t_infinity`.
pub fn integrate_kuramoto(
    phases: &[f64],
    params: &ModelParams,
    t_infinity: f64,
    options: &IntegratorOptions,
) -> Result<TkTrajectory> {
    params.validate()?;
    let sys = KuramotoDynamics { params, t_infinity };
    let init = EnsembleState::new(0.0, phases.to_vec(), vec![t_infinity; phases.len()]);
    integrate(&sys, &init, options)
}

pub fn integrate_tcs(
    initial: &TcsState,
    params: &ModelParams,
    options: &IntegratorOptions,
) -> Result<TcsTrajectory> {
    params.validate()?;
    integrate(&TcsDynamics { params }, initial, options)
}

const MAX_STEPS: usize = 20_000_000;

struct Stepper<'a, D: Dynamics> {
    system: &'a D,
    opts: &'a IntegratorOptions,
    pos: Range<usize>,
    h: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    stats: StepStats,
}

impl<'a, D: Dynamics> Stepper<'a, D> {
    fn new(system: &'a D, opts: &'a IntegratorOptions, pos: Range<usize>, dim: usize) -> Self {
        Stepper {
            system,
            opts,
            pos,
            h: opts.dt,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            stats: StepStats::default(),
        }
    }

    fn below_floor(&self, y: &[f64]) -> Option<usize> {
        y[self.pos.clone()]
            .iter()
            .position(|v| !(*v >= self.opts.positivity_floor))
            .map(|i| i + self.pos.start)
    }

    fn fail(&self, t: f64, y: &[f64], reason: String) -> Error {
        Error::Integration {
            reason,
            last_time: t,
            last_state: y.to_vec(),
        }
    }

    /// Fixed RK4 with equal substeps no longer than `dt`.
    fn rk4_to(&mut self, t: &mut f64, y: &mut Vec<f64>, target: f64) -> Result<()> {
        let span = target - *t;
        let m = ((span / self.opts.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / m as f64;
        for _ in 0..m {
            if let Err(e) = self.rk4_step(y, h) {
                return Err(self.fail(*t, y, format!("right-hand side failed: {e}")));
            }
            if let Some(i) = self.below_floor(&self.y_new) {
                return Err(self.fail(
                    *t,
                    y,
                    format!(
                        "component {i} would drop to {:e}, below the positivity floor {:e}; reduce dt",
                        self.y_new[i], self.opts.positivity_floor
                    ),
                ));
            }
            std::mem::swap(y, &mut self.y_new);
            *t += h;
            self.stats.accepted += 1;
        }
        *t = target;
        Ok(())
    }

    fn rk4_step(&mut self, y: &[f64], h: f64) -> Result<()> {
        let n = y.len();
        let sys = self.system;
        let [k1, k2, k3, k4, ..] = &mut self.k;
        sys.rhs(y, k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        sys.rhs(&self.tmp, k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        sys.rhs(&self.tmp, k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(&self.tmp, k4)?;
        for i in 0..n {
            self.y_new[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    fn dopri_to(&mut self, t: &mut f64, y: &mut Vec<f64>, target: f64) -> Result<()> {
        let mut steps = 0usize;
        while *t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(self.fail(*t, y, "step budget exhausted".into()));
            }
            let remaining = target - *t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(self.fail(*t, y, format!("step size underflow (h = {h:e})")));
            }
            let err = match self.dopri_step(y, h) {
                Ok(e) => e,
                Err(_) => {
                    // Stage left the admissible domain.
                    self.stats.rejected += 1;
                    self.stats.positivity_rejections += 1;
                    self.h = h * 0.5;
                    continue;
                }
            };
            if self.below_floor(&self.y_new).is_some() {
                self.stats.rejected += 1;
                self.stats.positivity_rejections += 1;
                self.h = h * 0.5;
                continue;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                std::mem::swap(y, &mut self.y_new);
                *t = if clipped { target } else { *t + h };
                self.stats.accepted += 1;
                // A step shortened to hit the grid says nothing about the
                // admissible size; keep the larger proposal.
                let proposal = h * factor;
                self.h = if clipped {
                    proposal.max(self.h)
                } else {
                    proposal
                };
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
            }
        }
        Ok(())
    }

    /// One Dormand–Prince step; returns the scaled RMS error estimate.
    fn dopri_step(&mut self, y: &[f64], h: f64) -> Result<f64> {
        const A21: f64 = 1.0 / 5.0;
        const A31: f64 = 3.0 / 40.0;
        const A32: f64 = 9.0 / 40.0;
        const A41: f64 = 44.0 / 45.0;
        const A42: f64 = -56.0 / 15.0;
        const A43: f64 = 32.0 / 9.0;
        const A51: f64 = 19372.0 / 6561.0;
        const A52: f64 = -25360.0 / 2187.0;
        const A53: f64 = 64448.0 / 6561.0;
        const A54: f64 = -212.0 / 729.0;
        const A61: f64 = 9017.0 / 3168.0;
        const A62: f64 = -355.0 / 33.0;
        const A63: f64 = 46732.0 / 5247.0;
        const A64: f64 = 49.0 / 176.0;
        const A65: f64 = -5103.0 / 18656.0;
        const B1: f64 = 35.0 / 384.0;
        const B3: f64 = 500.0 / 1113.0;
        const B4: f64 = 125.0 / 192.0;
        const B5: f64 = -2187.0 / 6784.0;
        const B6: f64 = 11.0 / 84.0;
        const E1: f64 = 71.0 / 57600.0;
        const E3: f64 = -71.0 / 16695.0;
        const E4: f64 = 71.0 / 1920.0;
        const E5: f64 = -17253.0 / 339200.0;
        const E6: f64 = 22.0 / 525.0;
        const E7: f64 = -1.0 / 40.0;

        let n = y.len();
        let sys = self.system;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.rhs(y, k1)?;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(tmp, k2)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(tmp, k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(tmp, k4)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(tmp, k5)?;
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(tmp, k6)?;
        for i in 0..n {
            self.y_new[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        sys.rhs(&self.y_new, k7)?;
        let mut acc = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.opts.abs_tol + self.opts.rel_tol * y[i].abs().max(self.y_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        Ok((acc / n as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// y' = −y on one "temperature" component, for step-control tests.
    struct Decay<'a>(&'a ModelParams);

    impl Dynamics for Decay<'_> {
        type State = (f64, f64);
        type Obs = ();
        fn params(&self) -> &ModelParams {
            self.0
        }
        fn pack(&self, s: &(f64, f64)) -> Vec<f64> {
            vec![s.1]
        }
        fn unpack(&self, t: f64, y: &[f64]) -> (f64, f64) {
            (t, y[0])
        }
        fn time_of(&self, s: &(f64, f64)) -> f64 {
            s.0
        }
        fn validate(&self, _: &(f64, f64)) -> Result<()> {
            Ok(())
        }
        fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -y[0];
            Ok(())
        }
        fn observe(&self, _: &(f64, f64)) {}
        fn positive_range(&self, dim: usize) -> Range<usize> {
            0..dim
        }
    }

    #[test]
    fn adaptive_exponential_decay() {
        let p = ModelParams::homogeneous(1, 1.0, 1.0, 0.0, 1.0);
        let opts = IntegratorOptions::adaptive(1e-10, 5.0, 0.5);
        let traj = integrate(&Decay(&p), &(0.0, 1.0), &opts).unwrap();
        assert_eq!(traj.len(), 11);
        for s in &traj.samples {
            assert_relative_eq!(s.state.1, (-s.time).exp(), max_relative = 1e-9);
        }
        assert_relative_eq!(traj.last().unwrap().time, 5.0);
    }

    #[test]
    fn fixed_step_aborts_on_positivity_violation() {
        let p = ModelParams::homogeneous(1, 1.0, 1.0, 0.0, 1.0);
        // One RK4 step of size 1 maps 1 to 0.375, below the floor.
        let mut opts = IntegratorOptions::fixed(1.0, 10.0, 1);
        opts.positivity_floor = 0.5;
        match integrate(&Decay(&p), &(0.0, 1.0), &opts) {
            Err(Error::Integration { last_time, .. }) => assert!(last_time >= 0.0),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn adaptive_rejects_rather_than_clips() {
        // The adaptive stepper halves until steps stay above the floor, then
        // fails once it cannot (the exact solution crosses the floor).
        let p = ModelParams::homogeneous(1, 1.0, 1.0, 0.0, 1.0);
        let mut opts = IntegratorOptions::adaptive(1e-8, 10.0, 1.0);
        opts.positivity_floor = 0.01;
        match integrate(&Decay(&p), &(0.0, 1.0), &opts) {
            Err(Error::Integration {
                last_time,
                last_state,
                ..
            }) => {
                assert!(
                    last_time > 4.0 && last_time < (100.0f64).ln() + 1e-6,
                    "{last_time}"
                );
                assert!(last_state[0] >= 0.01);
            }
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs() {
        let p = ModelParams::homogeneous(2, 1.0, 1.0, 0.0, 1.0);
        let s = EnsembleState::new(0.0, vec![0.0, 1.0], vec![1.0, -1.0]);
        assert!(matches!(
            integrate_tk(&s, &p, &IntegratorOptions::default()),
            Err(Error::Domain { .. })
        ));
        let s = EnsembleState::new(0.0, vec![0.0, 1.0], vec![1.0, 1.0]);
        let o = IntegratorOptions {
            dt: 0.0,
            ..Default::default()
        };
        assert!(integrate_tk(&s, &p, &o).is_err());
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = ModelParams::homogeneous(4, 1.3, 0.7, 0.5, 1.0);
        let s = EnsembleState::new(0.0, vec![0.2; 4], vec![1.5; 4]);
        for opts in [
            IntegratorOptions::fixed(0.05, 10.0, 4),
            IntegratorOptions::adaptive(1e-10, 10.0, 0.2),
        ] {
            let traj = integrate_tk(&s, &p, &opts).unwrap();
            for smp in &traj.samples {
                assert_eq!(smp.state.phases, s.phases);
                assert_eq!(smp.state.temps, s.temps);
            }
        }
    }

    #[test]
    fn sampling_grid_and_tail() {
        let p = ModelParams::homogeneous(2, 1.0, 1.0, 0.0, 1.0);
        let s = EnsembleState::new(0.0, vec![0.0, 1.0], vec![1.0, 2.0]);
        let traj = integrate_tk(&s, &p, &IntegratorOptions::fixed(0.01, 1.05, 10)).unwrap();
        let times = traj.times();
        assert_eq!(times.len(), 12);
        assert_relative_eq!(times[1], 0.1, epsilon = 1e-15);
        assert_eq!(*times.last().unwrap(), 1.05);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.tail(0.1).len(), 2);
    }

    #[test]
    fn default_dt_heuristic() {
        let p = ModelParams::homogeneous(3, 2.0, 4.0, 0.0, 1.0);
        assert_relative_eq!(
            default_dt(&p, &[0.5, 1.0, 2.0]),
            0.01 * (0.25f64).min(0.0625)
        );
        let mut p0 = p.clone();
        p0.kappa2 = 0.0;
        assert_relative_eq!(default_dt(&p0, &[0.5, 1.0]), 0.0025);
    }
}
