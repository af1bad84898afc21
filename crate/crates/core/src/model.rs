//! Phase/temperature state space, the thermodynamic Kuramoto vector field, its
//! isothermal Kuramoto limit, and the scalar observables used everywhere else.
//!
//! Phases are kept unwrapped on the real line. The diameter and the phase sum
//! are real-line quantities; only the order parameter goes through `e^{iθ}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric interaction weights between oscillators, stored row-major.
///
/// Diagonal entries are part of the matrix (they enter `min`/`max`) even though
/// they are dynamically inert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Network {
    n: usize,
    weights: Vec<f64>,
}

impl Network {
    pub fn uniform(n: usize, value: f64) -> Self {
        Network {
            n,
            weights: vec![value; n * n],
        }
    }

    /// Ring lattice: nearest neighbours (lattice distance 1) interact with
    /// weight `neighbor`, every other pair and the diagonal with `base`.
    pub fn ring(n: usize, base: f64, neighbor: f64) -> Self {
        Self::from_fn(n, |a, b| {
            let d = a.abs_diff(b);
            if d.min(n - d) == 1 {
                neighbor
            } else {
                base
            }
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut weights = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                weights.push(f(a, b));
            }
        }
        Network { n, weights }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut weights = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParams(format!(
                    "matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            weights.extend(row);
        }
        Ok(Network { n, weights })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .chunks(self.n.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.n + b]
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest violation `|w_ab - w_ba|` of symmetry, if any entry pair differs.
    pub fn asymmetry(&self) -> Option<(usize, usize, f64)> {
        let mut worst: Option<(usize, usize, f64)> = None;
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                let gap = (self.get(a, b) - self.get(b, a)).abs();
                if gap > 0.0 && worst.is_none_or(|w| gap > w.2) {
                    worst = Some((a, b, gap));
                }
            }
        }
        worst
    }

    /// Applies a relabeling: entry `(a, b)` of the result is entry
    /// `(perm[a], perm[b])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.n, |a, b| self.get(perm[a], perm[b]))
    }

    fn validate(&self, name: &str, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Dimension {
                what: if name == "psi" { "psi" } else { "zeta" },
                expected: n,
                got: self.n,
            });
        }
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParams(format!(
                "{name}[{}][{}] = {} must be finite and nonnegative",
                i / n,
                i % n,
                self.weights[i]
            )));
        }
        if let Some((a, b, _)) = self.asymmetry() {
            return Err(Error::InvalidParams(format!(
                "{name} is not symmetric: {name}[{a}][{b}] = {} but {name}[{b}][{a}] = {}",
                self.get(a, b),
                self.get(b, a)
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for Network {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Network::from_rows(rows)
    }
}

impl From<Network> for Vec<Vec<f64>> {
    fn from(m: Network) -> Self {
        m.rows()
    }
}

/// Whether every weight is strictly positive or only nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Positive,
    Nonnegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_oscillators: usize,
    /// Phase coupling strength.
    pub kappa1: f64,
    /// Temperature coupling strength.
    pub kappa2: f64,
    /// Speed-dimension constant.
    pub eta: f64,
    /// Reference temperature.
    pub t_star: f64,
    pub nat_freq: Vec<f64>,
    pub psi: Network,
    pub zeta: Network,
}

impl ModelParams {
    /// All-to-all unit networks and zero natural frequencies.
    pub fn homogeneous(n: usize, kappa1: f64, kappa2: f64, eta: f64, t_star: f64) -> Self {
        ModelParams {
            n_oscillators: n,
            kappa1,
            kappa2,
            eta,
            t_star,
            nat_freq: vec![0.0; n],
            psi: Network::uniform(n, 1.0),
            zeta: Network::uniform(n, 1.0),
        }
    }

    pub fn with_nat_freq(mut self, nu: Vec<f64>) -> Self {
        self.nat_freq = nu;
        self
    }

    pub fn with_psi(mut self, psi: Network) -> Self {
        self.psi = psi;
        self
    }

    pub fn with_zeta(mut self, zeta: Network) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn n(&self) -> usize {
        self.n_oscillators
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_oscillators;
        if n == 0 {
            return Err(Error::InvalidParams(
                "n_oscillators must be positive".into(),
            ));
        }
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParams(msg.into()))
            }
        };
        check(
            self.kappa1.is_finite() && self.kappa1 > 0.0,
            "kappa1 must be positive",
        )?;
        check(
            self.kappa2.is_finite() && self.kappa2 >= 0.0,
            "kappa2 must be nonnegative",
        )?;
        check(
            self.eta.is_finite() && self.eta >= 0.0,
            "eta must be nonnegative",
        )?;
        check(
            self.t_star.is_finite() && self.t_star > 0.0,
            "t_star must be positive",
        )?;
        if self.nat_freq.len() != n {
            return Err(Error::Dimension {
                what: "nat_freq",
                expected: n,
                got: self.nat_freq.len(),
            });
        }
        check(
            self.nat_freq.iter().all(|v| v.is_finite()),
            "natural frequencies must be finite",
        )?;
        self.psi.validate("psi", n)?;
        self.zeta.validate("zeta", n)
    }

    pub fn psi_min(&self) -> f64 {
        self.psi.min()
    }
    pub fn psi_max(&self) -> f64 {
        self.psi.max()
    }
    pub fn zeta_min(&self) -> f64 {
        self.zeta.min()
    }
    pub fn zeta_max(&self) -> f64 {
        self.zeta.max()
    }

    pub fn network_kind(&self) -> NetworkKind {
        if self.psi_min() > 0.0 && self.zeta_min() > 0.0 {
            NetworkKind::Positive
        } else {
            NetworkKind::Nonnegative
        }
    }

    /// Diameter `D(ν)` of the natural frequencies.
    pub fn nat_freq_diameter(&self) -> f64 {
        diameter(&self.nat_freq)
    }

    pub fn nat_freq_sum(&self) -> f64 {
        self.nat_freq.iter().sum()
    }

    /// Identical natural frequencies (the homogeneous ensemble, up to a rotating frame).
    pub fn is_homogeneous(&self) -> bool {
        self.nat_freq_diameter() == 0.0
    }

    /// `η² / (2 T*²)`, the quadratic weight of the conserved temperature functional.
    pub fn quadratic_weight(&self) -> f64 {
        quadratic_weight(self.eta, self.t_star)
    }
}

/// Phases and temperatures at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub time: f64,
    pub phases: Vec<f64>,
    pub temps: Vec<f64>,
}

impl EnsembleState {
    pub fn new(time: f64, phases: Vec<f64>, temps: Vec<f64>) -> Self {
        EnsembleState {
            time,
            phases,
            temps,
        }
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.temps.len() != self.phases.len() {
            return Err(Error::Dimension {
                what: "temps",
                expected: self.phases.len(),
                got: self.temps.len(),
            });
        }
        if let Some(i) = self.phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::Domain {
                index: i,
                what: "phase",
                value: self.phases[i],
            });
        }
        check_temps(&self.temps)
    }
}

/// Scalar summaries of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub entropy: f64,
    pub phase_diameter: f64,
    pub temp_diameter: f64,
    pub order_parameter: f64,
    pub conserved_g: f64,
    pub phase_sum: f64,
    pub avg_phase: f64,
}

pub(crate) fn check_temps(temps: &[f64]) -> Result<()> {
    match temps.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        Some(i) => Err(Error::Domain {
            index: i,
            what: "temperature",
            value: temps[i],
        }),
        None => Ok(()),
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

pub fn quadratic_weight(eta: f64, t_star: f64) -> f64 {
    eta * eta / (2.0 * t_star * t_star)
}

/// `max x - min x`; zero for empty input.
pub fn diameter(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// `|N⁻¹ Σ e^{iθ}|`, clamped into `[0, 1]`.
pub fn order_parameter(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let (re, im) = phases
        .iter()
        .fold((0.0, 0.0), |(re, im), &th| (re + th.cos(), im + th.sin()));
    let n = phases.len() as f64;
    (re.hypot(im) / n).clamp(0.0, 1.0)
}

/// `Σ_α (T_α + η²/(2T*²) T_α²)`, conserved along the temperature flow.
pub fn conserved_functional(temps: &[f64], eta: f64, t_star: f64) -> f64 {
    let a = quadratic_weight(eta, t_star);
    temps.iter().map(|t| t + a * t * t).sum()
}

/// `Σ_{α,β} ψ_{αβ} cos(θ_α − θ_β)`, nondecreasing along homogeneous flows.
pub fn order_functional(phases: &[f64], psi: &Network) -> f64 {
    let n = phases.len();
    let mut total = 0.0;
    for a in 0..n {
        total += psi.get(a, a);
        for b in (a + 1)..n {
            total += 2.0 * psi.get(a, b) * (phases[a] - phases[b]).cos();
        }
    }
    total
}

/// `s_α = Σ_β ψ_{αβ} sin(θ_β − θ_α)`, one sine per unordered pair.
///
/// TK and Kuramoto right-hand sides share this routine so that the isothermal
/// TK phase velocity and the Kuramoto velocity agree bit for bit.
pub(crate) fn phase_coupling_sums(phases: &[f64], psi: &Network, out: &mut [f64]) {
    let n = phases.len();
    out.iter_mut().for_each(|s| *s = 0.0);
    for a in 0..n {
        for b in (a + 1)..n {
            let s = (phases[b] - phases[a]).sin();
            let w = psi.get(a, b);
            out[a] += w * s;
            out[b] -= w * s;
        }
    }
}

/// In-place TK vector field; `dphases` and `dtemps` must have length `N`.
pub fn tk_rhs_into(
    phases: &[f64],
    temps: &[f64],
    params: &ModelParams,
    dphases: &mut [f64],
    dtemps: &mut [f64],
) -> Result<()> {
    let n = params.n();
    check_len("phases", n, phases.len())?;
    check_len("temps", n, temps.len())?;
    check_temps(temps)?;

    phase_coupling_sums(phases, &params.psi, dphases);
    let k1 = params.kappa1 / n as f64;
    for a in 0..n {
        dphases[a] = params.nat_freq[a] + k1 * dphases[a] / temps[a];
    }

    let k2 = params.kappa2 / n as f64;
    let ts2 = params.t_star * params.t_star;
    let eta2 = params.eta * params.eta;
    for a in 0..n {
        let inv_a = 1.0 / temps[a];
        let flux: f64 = (0..n)
            .map(|b| params.zeta.get(a, b) * (inv_a - 1.0 / temps[b]))
            .sum();
        dtemps[a] = k2 * ts2 / (ts2 + eta2 * temps[a]) * flux;
    }
    Ok(())
}

/// TK vector field: phase and temperature velocities.
pub fn tk_rhs(state: &EnsembleState, params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = params.n();
    let mut dp = vec![0.0; n];
    let mut dt = vec![0.0; n];
    tk_rhs_into(&state.phases, &state.temps, params, &mut dp, &mut dt)?;
    Ok((dp, dt))
}

pub fn kuramoto_rhs_into(
    phases: &[f64],
    params: &ModelParams,
    t_infinity: f64,
    dphases: &mut [f64],
) -> Result<()> {
    let n = params.n();
    check_len("phases", n, phases.len())?;
    if !(t_infinity.is_finite() && t_infinity > 0.0) {
        return Err(Error::InvalidParams(format!(
            "t_infinity must be positive, got {t_infinity}"
        )));
    }
    phase_coupling_sums(phases, &params.psi, dphases);
    let k1 = params.kappa1 / n as f64;
    for a in 0..n {
        dphases[a] = params.nat_freq[a] + k1 * dphases[a] / t_infinity;
    }
    Ok(())
}

/// Kuramoto vector field with every temperature frozen at `t_infinity`.
pub fn kuramoto_rhs(phases: &[f64], params: &ModelParams, t_infinity: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.n()];
    kuramoto_rhs_into(phases, params, t_infinity, &mut out)?;
    Ok(out)
}

/// `S = Σ ln T_α`.
pub fn entropy(state: &EnsembleState) -> Result<f64> {
    check_temps(&state.temps)?;
    Ok(state.temps.iter().map(|t| t.ln()).sum())
}

/// `dS/dt = Σ_α Ṫ_α / T_α`, evaluated from the vector field directly.
pub fn entropy_production(state: &EnsembleState, params: &ModelParams) -> Result<f64> {
    let (_, dtemps) = tk_rhs(state, params)?;
    Ok(dtemps.iter().zip(&state.temps).map(|(dt, t)| dt / t).sum())
}

pub fn observables(state: &EnsembleState, params: &ModelParams) -> Observables {
    let n = state.n().max(1) as f64;
    let phase_sum: f64 = state.phases.iter().sum();
    Observables {
        entropy: state.temps.iter().map(|t| t.ln()).sum(),
        phase_diameter: diameter(&state.phases),
        temp_diameter: diameter(&state.temps),
        order_parameter: order_parameter(&state.phases),
        conserved_g: conserved_functional(&state.temps, params.eta, params.t_star),
        phase_sum,
        avg_phase: phase_sum / n,
    }
}

/// Common temperature limit: the positive root of `T + a T² = mean_α (T_α + a T_α²)`
/// with `a = η²/(2T*²)`.
pub fn asymptotic_temperature(temps_in: &[f64], eta: f64, t_star: f64) -> Result<f64> {
    if temps_in.is_empty() {
        return Err(Error::InvalidParams("no temperatures given".into()));
    }
    check_temps(temps_in)?;
    let a = quadratic_weight(eta, t_star);
    let c = conserved_functional(temps_in, eta, t_star) / temps_in.len() as f64;
    if a == 0.0 {
        return Ok(c);
    }
    // 2c / (1 + sqrt(1 + 4ac)) is the positive root without cancellation.
    Ok(2.0 * c / (1.0 + (1.0 + 4.0 * a * c).sqrt()))
}
