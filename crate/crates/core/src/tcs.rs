//! Planar thermodynamic Cucker–Smale flocking with temperatures, and the
//! heading-angle ansatz `v_α = η (T_α/T*) e^{iθ_α}` that links it to the
//! phase/temperature model.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_temps, diameter, EnsembleState, ModelParams};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcsState {
    pub time: f64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub temps: Vec<f64>,
}

/// Time derivative of a [`TcsState`]. `denergy` is the derivative of the
/// per-particle energy `T_α + |v_α|²/2`; `dtemps` is recovered from it.
#[derive(Debug, Clone, PartialEq)]
pub struct TcsDerivative {
    pub dx: Vec<Vec2>,
    pub dv: Vec<Vec2>,
    pub denergy: Vec<f64>,
    pub dtemps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcsObservables {
    pub momentum: Vec2,
    pub energy: f64,
    pub entropy: f64,
    pub temp_diameter: f64,
}

impl TcsState {
    pub fn n(&self) -> usize {
        self.temps.len()
    }

    pub fn avg_velocity(&self) -> Vec2 {
        let n = self.velocities.len().max(1) as f64;
        let s = self.momentum();
        [s[0] / n, s[1] / n]
    }

    pub fn momentum(&self) -> Vec2 {
        self.velocities
            .iter()
            .fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]])
    }

    /// `Σ_α (T_α + |v_α|²/2)`.
    pub fn total_energy(&self) -> f64 {
        self.temps
            .iter()
            .zip(&self.velocities)
            .map(|(t, v)| t + 0.5 * (v[0] * v[0] + v[1] * v[1]))
            .sum()
    }

    pub fn observables(&self) -> TcsObservables {
        TcsObservables {
            momentum: self.momentum(),
            energy: self.total_energy(),
            entropy: self.temps.iter().map(|t| t.ln()).sum(),
            temp_diameter: diameter(&self.temps),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.temps.len();
        for (what, got) in [
            ("positions", self.positions.len()),
            ("velocities", self.velocities.len()),
        ] {
            if got != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    got,
                });
            }
        }
        check_temps(&self.temps)
    }

    /// Flat layout `[x.., v.., T..]` used by the integrator.
    pub(crate) fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(5 * self.n());
        y.extend(self.positions.iter().flatten());
        y.extend(self.velocities.iter().flatten());
        y.extend(&self.temps);
        y
    }

    pub(crate) fn unpack(time: f64, y: &[f64]) -> TcsState {
        let n = y.len() / 5;
        let pairs = |s: &[f64]| s.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
        TcsState {
            time,
            positions: pairs(&y[..2 * n]),
            velocities: pairs(&y[2 * n..4 * n]),
            temps: y[4 * n..].to_vec(),
        }
    }
}

/// Full (non rest-frame) flocking vector field.
///
/// Velocities enter only through `u_α = v_α − v̄`; with `v̄` conserved, this is
/// the rest-frame system applied to the relative velocities, and positions
/// advance with the absolute velocity.
pub fn tcs_rhs(state: &TcsState, params: &ModelParams) -> Result<TcsDerivative> {
    let n = params.n();
    if state.n() != n {
        return Err(Error::Dimension {
            what: "tcs state",
            expected: n,
            got: state.n(),
        });
    }
    state.validate()?;
    let mut out = TcsDerivative {
        dx: vec![[0.0; 2]; n],
        dv: vec![[0.0; 2]; n],
        denergy: vec![0.0; n],
        dtemps: vec![0.0; n],
    };
    tcs_rhs_parts(
        &state.velocities,
        &state.temps,
        params,
        &mut out.dx,
        &mut out.dv,
        &mut out.denergy,
        &mut out.dtemps,
    );
    Ok(out)
}

pub(crate) fn tcs_rhs_parts(
    velocities: &[Vec2],
    temps: &[f64],
    params: &ModelParams,
    dx: &mut [Vec2],
    dv: &mut [Vec2],
    denergy: &mut [f64],
    dtemps: &mut [f64],
) {
    let n = temps.len();
    let nf = n as f64;
    let mean = velocities.iter().fold([0.0, 0.0], |acc, v| {
        [acc[0] + v[0] / nf, acc[1] + v[1] / nf]
    });
    let scaled: Vec<Vec2> = velocities
        .iter()
        .zip(temps)
        .map(|(v, t)| [(v[0] - mean[0]) / t, (v[1] - mean[1]) / t])
        .collect();
    let k1 = params.kappa1 / nf;
    let k2 = params.kappa2 / nf;
    for a in 0..n {
        dx[a] = velocities[a];
        let mut acc = [0.0, 0.0];
        let mut heat = 0.0;
        for b in 0..n {
            let w = params.psi.get(a, b);
            acc[0] += w * (scaled[b][0] - scaled[a][0]);
            acc[1] += w * (scaled[b][1] - scaled[a][1]);
            heat += params.zeta.get(a, b) * (1.0 / temps[a] - 1.0 / temps[b]);
        }
        dv[a] = [k1 * acc[0], k1 * acc[1]];
        let u = [velocities[a][0] - mean[0], velocities[a][1] - mean[1]];
        let dv_dot_mean = dv[a][0] * mean[0] + dv[a][1] * mean[1];
        // d(T + |v|²/2) = heat exchange + work of the alignment force against v̄.
        denergy[a] = k2 * heat + dv_dot_mean;
        dtemps[a] = k2 * heat - (u[0] * dv[a][0] + u[1] * dv[a][1]);
    }
}

/// `(x, v, T) → (x + t c, v + c, T)`.
pub fn galilean_shift(state: &TcsState, c: Vec2) -> TcsState {
    let t = state.time;
    TcsState {
        time: t,
        positions: state
            .positions
            .iter()
            .map(|x| [x[0] + t * c[0], x[1] + t * c[1]])
            .collect(),
        velocities: state
            .velocities
            .iter()
            .map(|v| [v[0] + c[0], v[1] + c[1]])
            .collect(),
        temps: state.temps.clone(),
    }
}

/// `n` points evenly spaced on a circle of the given radius.
pub fn ring_lattice(n: usize, radius: f64) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n.max(1) as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// Places each oscillator at its lattice site with velocity `η (T_α/T*) e^{iθ_α}`.
pub fn ansatz_embed(
    tk_state: &EnsembleState,
    params: &ModelParams,
    lattice_positions: &[Vec2],
) -> Result<TcsState> {
    let n = tk_state.n();
    if lattice_positions.len() != n {
        return Err(Error::Dimension {
            what: "lattice positions",
            expected: n,
            got: lattice_positions.len(),
        });
    }
    tk_state.validate()?;
    let velocities = tk_state
        .phases
        .iter()
        .zip(&tk_state.temps)
        .map(|(th, t)| {
            let speed = params.eta * t / params.t_star;
            [speed * th.cos(), speed * th.sin()]
        })
        .collect();
    Ok(TcsState {
        time: tk_state.time,
        positions: lattice_positions.to_vec(),
        velocities,
        temps: tk_state.temps.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzProjection {
    pub phases: Vec<f64>,
    pub temps: Vec<f64>,
    /// `max_α | |v_α| T* / (η T_α) − 1 |`.
    pub residual: f64,
}

/// Reads headings back off a flocking state; phases land in `(−π, π]`.
pub fn ansatz_project(state: &TcsState, params: &ModelParams) -> Result<AnsatzProjection> {
    ansatz_project_continued(state, params, None)
}

/// Like [`ansatz_project`], but each heading is taken on the branch of
/// `atan2 + 2πk` nearest to `reference[α]`.
pub fn ansatz_project_continued(
    state: &TcsState,
    params: &ModelParams,
    reference: Option<&[f64]>,
) -> Result<AnsatzProjection> {
    state.validate()?;
    if !(params.eta > 0.0) {
        return Err(Error::InvalidParams(
            "the heading ansatz needs eta > 0".into(),
        ));
    }
    if let Some(r) = reference {
        if r.len() != state.n() {
            return Err(Error::Dimension {
                what: "reference phases",
                expected: state.n(),
                got: r.len(),
            });
        }
    }
    let mut phases = Vec::with_capacity(state.n());
    let mut residual: f64 = 0.0;
    for (a, (v, t)) in state.velocities.iter().zip(&state.temps).enumerate() {
        let speed = v[0].hypot(v[1]);
        if speed == 0.0 {
            return Err(Error::DegenerateHeading(a));
        }
        let raw = v[1].atan2(v[0]);
        let th = match reference {
            Some(r) => raw + TAU * ((r[a] - raw) / TAU).round(),
            None => raw,
        };
        phases.push(if reference.is_none() && th == -PI {
            PI
        } else {
            th
        });
        residual = residual.max((speed * params.t_star / (params.eta * t) - 1.0).abs());
    }
    Ok(AnsatzProjection {
        phases,
        temps: state.temps.clone(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: usize) -> ModelParams {
        ModelParams::homogeneous(n, 1.0, 1.0, 1.0, 1.0)
    }

    #[test]
    fn equilibrium_has_zero_derivative() {
        let s = TcsState {
            time: 0.0,
            positions: ring_lattice(3, 1.0),
            velocities: vec![[0.0; 2]; 3],
            temps: vec![1.5; 3],
        };
        let d = tcs_rhs(&s, &params(3)).unwrap();
        assert!(d.dx.iter().flatten().all(|x| *x == 0.0));
        assert!(d.dv.iter().flatten().all(|x| *x == 0.0));
        assert!(d.dtemps.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn two_particle_head_on() {
        let s = TcsState {
            time: 0.0,
            positions: vec![[0.0; 2]; 2],
            velocities: vec![[1.0, 0.0], [-1.0, 0.0]],
            temps: vec![1.0, 1.0],
        };
        let d = tcs_rhs(&s, &params(2)).unwrap();
        assert_eq!(d.dv, vec![[-1.0, 0.0], [1.0, 0.0]]);
        // Kinetic energy is dissipated into heat: dT = −v·dv = 1.
        assert_eq!(d.dtemps, vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_temperature() {
        let s = TcsState {
            time: 0.0,
            positions: vec![[0.0; 2]; 2],
            velocities: vec![[1.0, 0.0], [-1.0, 0.0]],
            temps: vec![1.0, -1.0],
        };
        assert!(matches!(
            tcs_rhs(&s, &params(2)),
            Err(Error::Domain { index: 1, .. })
        ));
    }

    #[test]
    fn galilean_shift_identity_and_relative_velocities() {
        let s = TcsState {
            time: 2.0,
            positions: vec![[0.0, 1.0], [2.0, 0.5]],
            velocities: vec![[1.0, 0.2], [-0.3, 0.7]],
            temps: vec![1.0, 2.0],
        };
        assert_eq!(galilean_shift(&s, [0.0, 0.0]), s);
        let shifted = galilean_shift(&s, [3.0, -1.0]);
        assert_eq!(shifted.positions[0], [6.0, -1.0]);
        let rel = |st: &TcsState| {
            let m = st.avg_velocity();
            st.velocities
                .iter()
                .map(|v| [v[0] - m[0], v[1] - m[1]])
                .collect::<Vec<_>>()
        };
        for (a, b) in rel(&s).iter().zip(rel(&shifted)) {
            assert_relative_eq!(a[0], b[0], epsilon = 1e-14);
            assert_relative_eq!(a[1], b[1], epsilon = 1e-14);
        }
    }

    #[test]
    fn embed_then_project_is_exact() {
        let p = ModelParams::homogeneous(4, 1.0, 1.0, 0.7, 1.3);
        let tk = EnsembleState::new(0.0, vec![0.3, -2.0, 3.0, 5.0], vec![1.0, 2.0, 0.5, 1.1]);
        let tcs = ansatz_embed(&tk, &p, &ring_lattice(4, 1.0)).unwrap();
        let back = ansatz_project(&tcs, &p).unwrap();
        assert!(back.residual < 1e-14);
        for (a, b) in back.phases.iter().zip(&tk.phases) {
            let d = (a - b).rem_euclid(TAU);
            assert!(d < 1e-12 || TAU - d < 1e-12);
            assert!(*a > -PI && *a <= PI);
        }
        let cont = ansatz_project_continued(&tcs, &p, Some(&tk.phases)).unwrap();
        for (a, b) in cont.phases.iter().zip(&tk.phases) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_data_gives_identical_velocities() {
        let p = params(3);
        let tk = EnsembleState::new(0.0, vec![0.4; 3], vec![2.0; 3]);
        let tcs = ansatz_embed(&tk, &p, &ring_lattice(3, 1.0)).unwrap();
        assert!(tcs.velocities.iter().all(|v| *v == tcs.velocities[0]));
    }

    #[test]
    fn zero_velocity_heading_is_degenerate() {
        let s = TcsState {
            time: 0.0,
            positions: vec![[0.0; 2]; 2],
            velocities: vec![[1.0, 0.0], [0.0, 0.0]],
            temps: vec![1.0, 1.0],
        };
        assert!(matches!(
            ansatz_project(&s, &params(2)),
            Err(Error::DegenerateHeading(1))
        ));
    }

    fn state_strategy() -> impl Strategy<Value = (ModelParams, TcsState)> {
        (2usize..7).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..2.0, n * n),
                prop::collection::vec(-3.0f64..3.0, 2 * n),
                prop::collection::vec(0.1f64..5.0, n),
                0.1f64..3.0,
                0.0f64..3.0,
            )
                .prop_map(move |(w, v, t, k1, k2)| {
                    let net = crate::model::Network::from_fn(n, |a, b| w[a.min(b) * n + a.max(b)]);
                    let p = ModelParams::homogeneous(n, k1, k2, 0.5, 1.0)
                        .with_psi(net.clone())
                        .with_zeta(net);
                    let s = TcsState {
                        time: 0.0,
                        positions: vec![[0.0; 2]; n],
                        velocities: v.chunks(2).map(|c| [c[0], c[1]]).collect(),
                        temps: t,
                    };
                    (p, s)
                })
        })
    }

    proptest! {
        #[test]
        fn momentum_and_energy_derivatives_vanish((p, s) in state_strategy()) {
            let d = tcs_rhs(&s, &p).unwrap();
            let mom = d.dv.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
            prop_assert!(mom[0].abs() < 1e-12 && mom[1].abs() < 1e-12);
            let e: f64 = d.denergy.iter().sum();
            let scale: f64 = d.denergy.iter().map(|x| x.abs()).sum();
            prop_assert!(e.abs() <= 1e-12 * (1.0 + scale));
            // Energy derivative agrees with dT + v·dv.
            for a in 0..s.n() {
                let v = s.velocities[a];
                let alt = d.dtemps[a] + v[0] * d.dv[a][0] + v[1] * d.dv[a][1];
                prop_assert!((alt - d.denergy[a]).abs() <= 1e-12 * (1.0 + alt.abs()));
            }
        }

        #[test]
        fn entropy_production_nonnegative((p, s) in state_strategy()) {
            let d = tcs_rhs(&s, &p).unwrap();
            let ds: f64 = d.dtemps.iter().zip(&s.temps).map(|(dt, t)| dt / t).sum();
            prop_assert!(ds >= -1e-12);
        }

        #[test]
        fn field_commutes_with_velocity_shift((p, s) in state_strategy(), c0 in -5.0f64..5.0, c1 in -5.0f64..5.0) {
            let d0 = tcs_rhs(&s, &p).unwrap();
            let d1 = tcs_rhs(&galilean_shift(&s, [c0, c1]), &p).unwrap();
            for a in 0..s.n() {
                prop_assert!((d0.dx[a][0] + c0 - d1.dx[a][0]).abs() < 1e-12);
                for k in 0..2 {
                    prop_assert!((d0.dv[a][k] - d1.dv[a][k]).abs() < 1e-10);
                }
                prop_assert!((d0.dtemps[a] - d1.dtemps[a]).abs() < 1e-10 * (1.0 + d0.dtemps[a].abs()));
            }
        }
    }
}
