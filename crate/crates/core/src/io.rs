//! Scenario files (TOML), trajectory CSV, JSON reports and SVG plots.
//!
//! A scenario file has the sections `[model]`, `[initial]`, `[integrator]`
//! and `[claims]`:
//!
//! ```toml
//! name = "homogeneous"
//!
//! [model]
//! n = 10
//! kappa1 = 1.0
//! kappa2 = 2.0
//! eta = 0.5             # default 0
//! t_star = 1.0          # default 1
//! nat_freq = "zero"     # or "spread: d", or a list
//! psi = "uniform: 1.0"  # or "ring: base, neighbor", or a list of rows
//! zeta = "ring: 0.5, 1.0"
//!
//! [initial]
//! kind = "random"       # or "explicit" (phases, temps) or "tcs"
//! phase_center = 0.0
//! phase_diameter = 2.5
//! temp_min = 1.0
//! temp_max = 2.0
//! seed = 7
//!
//! [integrator]          # every field optional
//! method = "rk45_adaptive"
//! rel_tol = 1e-10
//! t_end = 60.0
//!
//! [claims]
//! ids = ["entropy-monotone", "sync-rate"]
//! pairing = { kind = "twin_l1", amplitude = 0.1, seed = 3 }
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::ClaimId;
use crate::error::{Error, Result};
use crate::experiments::{InitialSpec, Pairing, Scenario};
use crate::integrate::{IntegratorOptions, Sample, TcsTrajectory, TkTrajectory};
use crate::model::{EnsembleState, ModelParams, Network, Observables};

/// Options of one CLI invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub out_dir: PathBuf,
    /// `key=value` pairs; keys are dotted paths such as `model.kappa1`.
    pub overrides: Vec<(String, String)>,
    pub plot: bool,
    pub verbosity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Shorthand(String),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum FreqSpec {
    Shorthand(String),
    List(Vec<f64>),
}

fn default_t_star() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n: usize,
    kappa1: f64,
    kappa2: f64,
    #[serde(default)]
    eta: f64,
    #[serde(default = "default_t_star")]
    t_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nat_freq: Option<FreqSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zeta: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaims {
    #[serde(default)]
    ids: Vec<ClaimId>,
    #[serde(default)]
    pairing: Pairing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: String,
    model: RawModel,
    initial: InitialSpec,
    #[serde(default)]
    integrator: IntegratorOptions,
    #[serde(default)]
    claims: RawClaims,
}

fn numbers(field: &str, text: &str, count: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::field(field, format!("`{}` is not a number", s.trim())))
        })
        .collect::<Result<_>>()?;
    if vals.len() != count {
        return Err(Error::field(
            field,
            format!("expected {count} number(s), got {}", vals.len()),
        ));
    }
    Ok(vals)
}

fn matrix(field: &str, spec: Option<MatrixSpec>, n: usize) -> Result<Network> {
    match spec {
        None => Ok(Network::uniform(n, 1.0)),
        Some(MatrixSpec::Rows(rows)) => Network::from_rows(rows),
        Some(MatrixSpec::Shorthand(s)) => {
            let (kind, rest) = s
                .split_once(':')
                .ok_or_else(|| Error::field(field, format!("unrecognized matrix `{s}`")))?;
            match kind.trim() {
                "uniform" => Ok(Network::uniform(n, numbers(field, rest, 1)?[0])),
                "ring" => {
                    let v = numbers(field, rest, 2)?;
                    Ok(Network::ring(n, v[0], v[1]))
                }
                other => Err(Error::field(
                    field,
                    format!("unknown matrix shorthand `{other}`"),
                )),
            }
        }
    }
}

/// `ν_α = d (α/(N−1) − 1/2)`: evenly spaced, zero sum, diameter `d`.
fn spread(n: usize, d: f64) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|a| d * (a as f64 / (n - 1) as f64 - 0.5))
        .collect()
}

fn frequencies(spec: Option<FreqSpec>, n: usize) -> Result<Vec<f64>> {
    match spec {
        None => Ok(vec![0.0; n]),
        Some(FreqSpec::List(v)) => Ok(v),
        Some(FreqSpec::Shorthand(s)) => {
            let s = s.trim();
            if s == "zero" {
                return Ok(vec![0.0; n]);
            }
            match s.split_once(':') {
                Some((k, rest)) if k.trim() == "spread" => {
                    Ok(spread(n, numbers("model.nat_freq", rest, 1)?[0]))
                }
                _ => Err(Error::field(
                    "model.nat_freq",
                    format!("unknown shorthand `{s}`"),
                )),
            }
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn from_toml_text(text: &str) -> Result<RawScenario> {
    toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        field: None,
        message: e.message().to_string(),
    })
}

fn into_scenario(raw: RawScenario) -> Result<Scenario> {
    let m = raw.model;
    let params = ModelParams {
        n_oscillators: m.n,
        kappa1: m.kappa1,
        kappa2: m.kappa2,
        eta: m.eta,
        t_star: m.t_star,
        nat_freq: frequencies(m.nat_freq, m.n)?,
        psi: matrix("model.psi", m.psi, m.n)?,
        zeta: matrix("model.zeta", m.zeta, m.n)?,
    };
    params.validate()?;
    raw.integrator.validate()?;
    let scenario = Scenario {
        name: raw.name,
        params,
        initial: raw.initial,
        options: raw.integrator,
        claims: raw.claims.ids,
        pairing: raw.claims.pairing,
    };
    scenario.instantiate()?;
    Ok(scenario)
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    into_scenario(from_toml_text(text)?)
}

/// Parses a value given on the command line: TOML syntax when it parses,
/// a bare string otherwise.
fn override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies dotted-path overrides, then parses. Keys must name fields of the
/// schema; intermediate tables are created as needed.
pub fn parse_scenario_with(text: &str, overrides: &[(String, String)]) -> Result<Scenario> {
    if overrides.is_empty() {
        return parse_scenario(text);
    }
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        field: None,
        message: e.message().to_string(),
    })?;
    for (key, value) in overrides {
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().expect("split yields one part");
        let mut table = &mut doc;
        for p in path {
            let entry = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::field(key.clone(), format!("`{p}` is not a table")))?;
        }
        table.insert(last.to_string(), override_value(value));
    }
    let rewritten = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
    from_toml_text(&rewritten)
        .map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                line: None,
                field: None,
                message: format!("after overrides: {message}"),
            },
            other => other,
        })
        .and_then(into_scenario)
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub fn load_scenario(path: &Path, overrides: &[(String, String)]) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario_with(&text, overrides)
}

/// Writes a scenario with matrices as explicit rows.
pub fn emit_scenario(s: &Scenario) -> Result<String> {
    let raw = RawScenario {
        name: s.name.clone(),
        model: RawModel {
            n: s.params.n_oscillators,
            kappa1: s.params.kappa1,
            kappa2: s.params.kappa2,
            eta: s.params.eta,
            t_star: s.params.t_star,
            nat_freq: Some(FreqSpec::List(s.params.nat_freq.clone())),
            psi: Some(MatrixSpec::Rows(s.params.psi.rows())),
            zeta: Some(MatrixSpec::Rows(s.params.zeta.rows())),
        },
        initial: s.initial.clone(),
        integrator: s.options.clone(),
        claims: RawClaims {
            ids: s.claims.clone(),
            pairing: s.pairing.clone(),
        },
    };
    toml::to_string(&raw).map_err(|e| Error::Config(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column names of the TK trajectory CSV for `n` oscillators.
pub fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("theta_{i}")));
    h.extend((1..=n).map(|i| format!("temp_{i}")));
    h.extend(
        [
            "entropy",
            "phase_diameter",
            "temp_diameter",
            "order_parameter",
            "conserved_g",
            "phase_sum",
        ]
        .map(String::from),
    );
    h
}

pub fn trajectory_csv(traj: &TkTrajectory) -> String {
    let n = traj.meta.params.n();
    let mut out = csv_header(n).join(",");
    out.push('\n');
    for s in &traj.samples {
        let o = &s.obs;
        let row: Vec<String> = std::iter::once(s.time)
            .chain(s.state.phases.iter().copied())
            .chain(s.state.temps.iter().copied())
            .chain([
                o.entropy,
                o.phase_diameter,
                o.temp_diameter,
                o.order_parameter,
                o.conserved_g,
                o.phase_sum,
            ])
            .map(num)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(traj: &TkTrajectory, path: &Path) -> Result<()> {
    write_file(path, &trajectory_csv(traj))
}

/// Flocking trajectory: `t, x_i, y_i, vx_i, vy_i, temp_i, momentum_x,
/// momentum_y, energy, entropy, temp_diameter`.
pub fn write_tcs_csv(traj: &TcsTrajectory, path: &Path) -> Result<()> {
    let n = traj.meta.params.n();
    let mut h = vec!["t".to_string()];
    for prefix in ["x", "y", "vx", "vy", "temp"] {
        h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    h.extend(
        [
            "momentum_x",
            "momentum_y",
            "energy",
            "entropy",
            "temp_diameter",
        ]
        .map(String::from),
    );
    let mut out = h.join(",");
    out.push('\n');
    for s in &traj.samples {
        let st = &s.state;
        let row: Vec<String> = std::iter::once(s.time)
            .chain(st.positions.iter().map(|p| p[0]))
            .chain(st.positions.iter().map(|p| p[1]))
            .chain(st.velocities.iter().map(|v| v[0]))
            .chain(st.velocities.iter().map(|v| v[1]))
            .chain(st.temps.iter().copied())
            .chain([
                s.obs.momentum[0],
                s.obs.momentum[1],
                s.obs.energy,
                s.obs.entropy,
                s.obs.temp_diameter,
            ])
            .map(num)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn write_report_json<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

/// A numeric CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let Some((_, head)) = lines.next() else {
            return Err(Error::Parse {
                line: Some(1),
                field: None,
                message: "missing header row".into(),
            });
        };
        let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<f64> = line
                .split(',')
                .zip(&header)
                .map(|(cell, name)| {
                    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: Some(i + 1),
                        field: Some(name.clone()),
                        message: format!("`{}` is not a number", cell.trim()),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != header.len() || line.split(',').count() != header.len() {
                return Err(Error::Parse {
                    line: Some(i + 1),
                    field: None,
                    message: format!("expected {} columns", header.len()),
                });
            }
            rows.push(row);
        }
        Ok(CsvTable { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Rebuilds TK samples from a table written by [`write_trajectory_csv`].
    pub fn to_samples(&self) -> Result<Vec<Sample<EnsembleState, Observables>>> {
        let n = self
            .header
            .iter()
            .filter(|h| h.starts_with("theta_"))
            .count();
        if self.header != csv_header(n) {
            return Err(Error::Parse {
                line: Some(1),
                field: None,
                message: "header does not match the trajectory layout".into(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|r| {
                let phases = r[1..=n].to_vec();
                let temps = r[n + 1..=2 * n].to_vec();
                let o = &r[2 * n + 1..];
                Sample {
                    time: r[0],
                    obs: Observables {
                        entropy: o[0],
                        phase_diameter: o[1],
                        temp_diameter: o[2],
                        order_parameter: o[3],
                        conserved_g: o[4],
                        phase_sum: o[5],
                        avg_phase: o[5] / n.max(1) as f64,
                    },
                    state: EnsembleState::new(r[0], phases, temps),
                }
            })
            .collect())
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line plot of CSV columns against `t`. With `log_y`, values are plotted
/// as `log10` and nonpositive entries are dropped.
pub fn plot_svg(table: &CsvTable, channels: &[String], log_y: bool) -> Result<String> {
    let t = table
        .column("t")
        .ok_or_else(|| Error::Config("table has no `t` column".into()))?;
    let mut series = Vec::new();
    for ch in channels {
        let ys = table
            .column(ch)
            .ok_or_else(|| Error::Config(format!("unknown channel `{ch}`")))?;
        let pts: Vec<(f64, f64)> = t
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite() && (!log_y || *y > 0.0))
            .map(|(&x, y)| (x, if log_y { y.log10() } else { y }))
            .collect();
        series.push((ch.as_str(), pts));
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = all.fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (w, h, ml, mr, mt, mb) = (800.0, 500.0, 80.0, 160.0, 20.0, 50.0);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let ylabel = if log_y {
            format!("1e{yv:.1}")
        } else {
            format!("{yv:.3e}")
        };
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{mt}" x2="{:.2}" y2="{:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"##,
            px(xv),
            px(xv),
            h - mb,
            px(xv),
            h - mb + 18.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{ml}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{ylabel}</text>"##,
            py(yv),
            w - mr,
            py(yv),
            ml - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">t</text>"#,
        (ml + w - mr) / 2.0,
        h - 10.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = mt + 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{name}{}</text>"#,
            w - mr + 10.0,
            w - mr + 30.0,
            w - mr + 36.0,
            ly + 4.0,
            if log_y { " (log)" } else { "" }
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_plot_svg(
    table: &CsvTable,
    channels: &[String],
    log_y: bool,
    path: &Path,
) -> Result<()> {
    write_file(path, &plot_svg(table, channels, log_y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate_tk;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[model]
n = 3
kappa1 = 1
kappa2 = 0.5

[initial]
kind = "explicit"
phases = [0.0, 0.5, 1.0]
temps = [1.0, 2.0, 3.0]
"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.params.eta, 0.0);
        assert_eq!(s.params.t_star, 1.0);
        assert_eq!(s.params.nat_freq, vec![0.0; 3]);
        assert_eq!(s.params.psi, Network::uniform(3, 1.0));
        assert_eq!(s.options, IntegratorOptions::default());
        assert!(s.claims.is_empty());
        assert_eq!(s.pairing, Pairing::None);
    }

    #[test]
    fn shorthands_expand() {
        let text = MINIMAL.replace(
            "kappa2 = 0.5",
            "kappa2 = 0.5\npsi = \"ring: 0.2, 1.5\"\nzeta = \"uniform: 2e-1\"\nnat_freq = \"spread: 0.4\"",
        );
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.params.zeta, Network::uniform(3, 0.2));
        assert_eq!(s.params.psi, Network::ring(3, 0.2, 1.5));
        assert_eq!(s.params.nat_freq, vec![-0.2, 0.0, 0.2]);
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let text = MINIMAL.replace(
            "kappa2 = 0.5",
            "kappa2 = 0.5\npsi = [[1, 0.5, 1], [0.6, 1, 1], [1, 1, 1]]",
        );
        assert!(matches!(
            parse_scenario(&text),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn schema_errors_carry_lines() {
        let text = MINIMAL.replace("kappa2 = 0.5", "kappa2 = 0.5\nbogus = 1");
        match parse_scenario(&text) {
            Err(Error::Parse { line, message, .. }) => {
                assert!(line.is_some());
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_scenario(
            &MINIMAL
                .replace("psi", "x")
                .replace("kappa2 = 0.5", "kappa2 = 0.5\npsi = \"blob: 1\""),
        ) {
            Err(Error::Parse { field, .. }) => assert_eq!(field.as_deref(), Some("model.psi")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = MINIMAL.replace("kappa2 = 0.5", "kappa2 = 0.5\nnat_freq = \"spread: 0.3\"")
            + "\n[claims]\nids = [\"sync-rate\", \"conserved-g\"]\npairing = { kind = \"twin_l1\", amplitude = 0.1, seed = 4 }\n";
        let s = parse_scenario(&text).unwrap();
        let again = parse_scenario(&emit_scenario(&s).unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn overrides_apply() {
        let o = vec![
            ("model.kappa1".to_string(), "2.5".to_string()),
            ("integrator.t_end".to_string(), "7".to_string()),
            ("model.psi".to_string(), "uniform: 0.5".to_string()),
        ];
        let s = parse_scenario_with(MINIMAL, &o).unwrap();
        assert_eq!(s.params.kappa1, 2.5);
        assert_eq!(s.options.t_end, 7.0);
        assert_eq!(s.params.psi, Network::uniform(3, 0.5));
        let bad = vec![("model.kapa1".to_string(), "1".to_string())];
        assert!(parse_scenario_with(MINIMAL, &bad).is_err());
    }

    #[test]
    fn empty_trajectory_csv_is_header_only() {
        let s = parse_scenario(MINIMAL).unwrap();
        let mut traj = integrate_tk(
            &EnsembleState::new(0.0, vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]),
            &s.params,
            &IntegratorOptions::adaptive(1e-8, 1.0, 0.1),
        )
        .unwrap();
        traj.samples.clear();
        let text = trajectory_csv(&traj);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), csv_header(3).join(","));
    }

    #[test]
    fn csv_round_trip_to_fifteen_digits() {
        let s = parse_scenario(MINIMAL).unwrap();
        let traj = integrate_tk(
            &EnsembleState::new(0.0, vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]),
            &s.params,
            &IntegratorOptions::adaptive(1e-10, 5.0, 0.05),
        )
        .unwrap();
        let table = CsvTable::parse(&trajectory_csv(&traj)).unwrap();
        let back = table.to_samples().unwrap();
        assert_eq!(back.len(), traj.len());
        let close =
            |a: f64, b: f64| (a - b).abs() <= 1e-15 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        for (a, b) in traj.samples.iter().zip(&back) {
            assert!(close(a.time, b.time));
            for (x, y) in a.state.phases.iter().zip(&b.state.phases) {
                assert!(close(*x, *y));
            }
            for (x, y) in a.state.temps.iter().zip(&b.state.temps) {
                assert!(close(*x, *y));
            }
            assert!(close(a.obs.conserved_g, b.obs.conserved_g));
            assert!(close(a.obs.entropy, b.obs.entropy));
        }
    }

    #[test]
    fn malformed_csv_reports_line() {
        match CsvTable::parse("t,a\n1,2\n3,x\n") {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, Some(3));
                assert_eq!(field.as_deref(), Some("a"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn svg_lists_channels() {
        let table = CsvTable::parse("t,a,b\n0,1,2\n1,0.1,1\n2,0.01,0\n").unwrap();
        let svg = plot_svg(&table, &["a".into(), "b".into()], true).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(plot_svg(&table, &["c".into()], false).is_err());
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        (
            2usize..6,
            0.1f64..5.0,
            0.0f64..5.0,
            0.0f64..2.0,
            0.1f64..3.0,
            any::<u64>(),
            0.0f64..3.0,
        )
            .prop_map(|(n, k1, k2, eta, ts, seed, d)| Scenario {
                name: format!("s{seed}"),
                params: ModelParams::homogeneous(n, k1, k2, eta, ts)
                    .with_nat_freq(spread(n, d / 7.0))
                    .with_psi(Network::ring(n, 0.3 + d, 1.0 / 3.0)),
                initial: InitialSpec::Random {
                    phase_center: d - 1.0,
                    phase_diameter: d,
                    temp_min: 0.7,
                    temp_max: 0.7 + d,
                    seed,
                },
                options: IntegratorOptions::adaptive(1e-9, 10.0 + d, 0.1),
                claims: vec![ClaimId::EntropyMonotone, ClaimId::TempBounds],
                pairing: Pairing::TwinL1 {
                    amplitude: d / 10.0,
                    seed,
                },
            })
    }

    proptest! {
        #[test]
        fn emit_parse_identity(s in arb_scenario()) {
            let text = emit_scenario(&s).unwrap();
            prop_assert_eq!(parse_scenario(&text).unwrap(), s);
        }

        #[test]
        fn hash_tracks_semantic_changes(s in arb_scenario(), bump in 1e-9f64..1.0) {
            let mut t = s.clone();
            prop_assert_eq!(s.hash(), t.hash());
            t.params.t_star += bump;
            prop_assert_ne!(s.hash(), t.hash());
            let mut u = s.clone();
            u.options.rel_tol *= 2.0;
            prop_assert_ne!(s.hash(), u.hash());
        }
    }
}
