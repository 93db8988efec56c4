//! Run configuration, check drivers and the JSON/CSV report format.
//!
//! A run resolves its subject (catalog space, Toda potential `u`, or harmonic
//! profile `V`), samples probes with the seeded chart sampler and collects
//! one [`CheckRecord`] per check. Gate failures become records with status
//! `gated` instead of errors so that nothing is skipped silently.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::charts::field::{Differentiation, DEFAULT_FD_STEP};
use crate::charts::{Chart, Interval, Point, ScalarField};
use crate::error::{Error, Result};
use crate::toda::{
    build_toda, linearize, obstruction_cy, obstruction_orth, structure_jet, toda_residual,
    toda_structure_count, CountOptions, StructureCount,
};
use crate::ward::{
    catalog, closed_form_crosscheck, eigenfunction_residual, harmonic_residual,
    s2h2_quotient_check, ward_build, CatalogEntry, HarmonicProfile,
};
use crate::weylgeom::geometry::max_abs;
use crate::weylgeom::killing::{killing_gauge_checks, killing_residual};
use crate::weylgeom::{VectorField, WeylStructure};

/// Tolerance floor for quantities that involve finite-difference partials.
pub const FD_TOLERANCE: f64 = 1e-6;
pub const EW_TOLERANCE: f64 = 1e-6;
pub const TODA_TOLERANCE: f64 = 1e-8;
pub const HARMONIC_TOLERANCE: f64 = 1e-8;
pub const CROSSCHECK_TOLERANCE: f64 = 1e-8;
pub const QUOTIENT_TOLERANCE: f64 = 1e-7;
pub const KILLING_GATE_ANALYTIC: f64 = 1e-6;
pub const KILLING_GATE_FD: f64 = 1e-4;
pub const ORTH_TOLERANCE: f64 = 1e-6;
pub const COTTON_YORK_TOLERANCE: f64 = 1e-5;
/// `|F|` below which the Killing-gauge identities degenerate.
const FARADAY_VANISH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Ew,
    Toda,
    Harmonic,
    Crosscheck,
    Killing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub space: Option<String>,
    pub params: Vec<(String, f64)>,
    /// Toda potential on `(x, y, z)`.
    pub u: Option<String>,
    /// Harmonic profile on `(rho, eta, psi)`.
    pub v: Option<String>,
    /// Replaces the chart domain.
    pub domain: Option<[(f64, f64); 3]>,
    pub probes: usize,
    pub seed: u64,
    pub fd_step: f64,
    /// Overrides every default tolerance of the run.
    pub tol: Option<f64>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            space: None,
            params: Vec::new(),
            u: None,
            v: None,
            domain: None,
            probes: 20,
            seed: 0,
            fd_step: DEFAULT_FD_STEP,
            tol: None,
            format: Format::Json,
        }
    }

    pub fn space(mut self, label: &str, params: &[(&str, f64)]) -> Self {
        self.space = Some(label.to_string());
        self.params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let given = [self.space.is_some(), self.u.is_some(), self.v.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::InvalidParams(
                "give exactly one of --space, --u, --V".into(),
            ));
        }
        if self.probes == 0 {
            return Err(Error::InvalidParams("probe count must be at least 1".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParams(format!("tolerance {t} must be positive")));
            }
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidParams(format!("FD step {} must be positive", self.fd_step)));
        }
        Ok(())
    }

    fn tolerance(&self, default: f64, analytic: bool) -> f64 {
        self.tol
            .unwrap_or(if analytic { default } else { default.max(FD_TOLERANCE) })
    }

    fn override_chart(&self, chart: Chart) -> Result<Chart> {
        match self.domain {
            Some(d) => chart.with_domain(d.map(|(lo, hi)| Interval::new(lo, hi))),
            None => Ok(chart),
        }
    }

    fn user_field(&self, text: &str, chart: &Chart) -> Result<ScalarField> {
        Ok(ScalarField::parse(text, chart)?
            .with_mode(Differentiation::FiniteDifference { step: self.fd_step }))
    }

    /// Resolves the space, potential or profile named by the config.
    pub fn subject(&self) -> Result<Subject> {
        self.validate()?;
        if let Some(label) = &self.space {
            let mut entry = catalog(label, &self.params)?;
            if self.domain.is_some() {
                entry.structure.chart = self.override_chart(entry.structure.chart.clone())?;
                if let Some(p) = &mut entry.profile {
                    p.chart = self.override_chart(p.chart.clone())?;
                }
            }
            return Ok(Subject {
                label: label.clone(),
                structure: entry.structure.clone(),
                profile: entry.profile.clone(),
                u: None,
                analytic: true,
                entry: Some(entry),
            });
        }
        if !self.params.is_empty() {
            return Err(Error::InvalidParams("--params needs --space".into()));
        }
        if let Some(text) = &self.u {
            let chart = self.override_chart(Chart::cartesian([(-1.0, 1.0), (-1.0, 1.0), (0.5, 2.0)])?)?;
            let u = self.user_field(text, &chart)?;
            return Ok(Subject {
                label: format!("toda:{text}"),
                structure: build_toda(chart, u.clone()),
                profile: None,
                u: Some(u),
                analytic: false,
                entry: None,
            });
        }
        let text = self.v.as_deref().unwrap_or_default();
        let chart = self.override_chart(Chart::axial((0.2, 3.0), (-2.0, 2.0))?)?;
        let mut profile = HarmonicProfile::new(text, &[], text, chart)?;
        profile.v = self.user_field(text, &profile.chart)?;
        Ok(Subject {
            label: format!("ward:{text}"),
            structure: ward_build(&profile)?,
            profile: Some(profile),
            u: None,
            analytic: false,
            entry: None,
        })
    }
}

/// Parses `a=1,b=2.5` into name/value pairs.
pub fn parse_params(text: &str) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("expected name=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParams(format!("`{}` is not a number", v.trim())))?;
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("`{k}` is not finite")));
            }
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Subject {
    pub label: String,
    pub structure: WeylStructure,
    pub profile: Option<HarmonicProfile>,
    pub u: Option<ScalarField>,
    /// All partials are exact.
    pub analytic: bool,
    pub entry: Option<CatalogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Gated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub points: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: Status,
}

impl CheckRecord {
    pub fn from_values(name: &str, values: &[f64], tolerance: f64) -> Self {
        let max_abs = values.iter().fold(0.0f64, |m, v| {
            if v.is_nan() {
                f64::INFINITY
            } else {
                m.max(v.abs())
            }
        });
        let mean_abs = if values.is_empty() {
            0.0
        } else {
            values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
        };
        let pass = max_abs < tolerance;
        CheckRecord {
            name: name.to_string(),
            points: values.len(),
            max_abs,
            mean_abs,
            tolerance,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
        }
    }

    /// A precondition that failed; the checks behind it did not run.
    pub fn gated(name: &str, values: &[f64], tolerance: f64) -> Self {
        CheckRecord {
            pass: false,
            status: Status::Gated,
            ..Self::from_values(name, values, tolerance)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureBlock {
    pub upper_bound: usize,
    pub confirmed: usize,
    pub loop_residual: f64,
    pub gap: f64,
    pub singular_values: Vec<f64>,
    pub homothety: Vec<f64>,
    pub base: Point,
}

impl From<&StructureCount> for StructureBlock {
    fn from(c: &StructureCount) -> Self {
        StructureBlock {
            upper_bound: c.upper_bound,
            confirmed: c.confirmed,
            loop_residual: c.loop_residual,
            gap: c.gap,
            singular_values: c.singular_values.clone(),
            homothety: c.homothety.clone(),
            base: c.base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub checks: Vec<CheckRecord>,
    pub structure_count: Option<StructureBlock>,
    pub wall_time_ms: u64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn gated(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Gated)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the wall time zeroed, for reproducibility comparisons.
    pub fn to_stable_json(&self) -> String {
        Report {
            wall_time_ms: 0,
            ..self.clone()
        }
        .to_json()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<28} {:>6} points  max {:.3e}  mean {:.3e}  tol {:.1e}  {}",
                c.name,
                c.points,
                c.max_abs,
                c.mean_abs,
                c.tolerance,
                match c.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Gated => "GATED",
                }
            );
        }
        if let Some(s) = &self.structure_count {
            let _ = writeln!(
                out,
                "structures: upper bound {}, confirmed {}, loop residual {:.3e}, gap {:.3e}",
                s.upper_bound, s.confirmed, s.loop_residual, s.gap
            );
        }
        out
    }
}

fn par_values<F>(probes: &[Point], f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> Result<f64> + Sync,
{
    probes.par_iter().map(|&p| f(p)).collect()
}

fn ew_values(w: &WeylStructure, probes: &[Point]) -> Result<Vec<f64>> {
    par_values(probes, |p| Ok(max_abs(&w.geometry(p, 2)?.ew_residual())))
}

/// Einstein-Weyl gate shared by the structure commands.
fn ew_gate(subject: &Subject, probes: &[Point], cfg: &RunConfig) -> Result<(CheckRecord, f64)> {
    let tol = cfg.tolerance(EW_TOLERANCE, subject.analytic);
    let values = ew_values(&subject.structure, probes)?;
    let rec = CheckRecord::from_values("einstein_weyl_gate", &values, tol);
    if rec.pass {
        Ok((rec, tol))
    } else {
        Ok((CheckRecord::gated("einstein_weyl_gate", &values, tol), tol))
    }
}

fn profile_of(subject: &Subject) -> Result<&HarmonicProfile> {
    subject.profile.as_ref().ok_or_else(|| {
        Error::InvalidParams(format!("`{}` has no harmonic profile", subject.label))
    })
}

fn verify_checks(kind: CheckKind, cfg: &RunConfig, subject: &Subject) -> Result<Vec<CheckRecord>> {
    let w = &subject.structure;
    let analytic = subject.analytic;
    match kind {
        CheckKind::Ew => {
            let probes = w.chart.sample_points(cfg.probes, cfg.seed)?;
            let tol = cfg.tolerance(EW_TOLERANCE, analytic);
            Ok(vec![CheckRecord::from_values("ew_residual", &ew_values(w, &probes)?, tol)])
        }
        CheckKind::Toda => {
            let u = subject.u.as_ref().ok_or_else(|| {
                Error::InvalidParams("verify toda needs --u".into())
            })?;
            let probes = w.chart.sample_points(cfg.probes, cfg.seed)?;
            let values = par_values(&probes, |p| toda_residual(u, &w.chart, p))?;
            let tol = cfg.tolerance(TODA_TOLERANCE, analytic);
            Ok(vec![CheckRecord::from_values("toda_residual", &values, tol)])
        }
        CheckKind::Harmonic => {
            let profile = profile_of(subject)?;
            let probes = profile.chart.sample_points(cfg.probes, cfg.seed)?;
            let tol = cfg.tolerance(HARMONIC_TOLERANCE, analytic);
            let h = par_values(&probes, |p| harmonic_residual(profile, p))?;
            let e = par_values(&probes, |p| eigenfunction_residual(profile, p))?;
            Ok(vec![
                CheckRecord::from_values("harmonic_residual", &h, tol),
                CheckRecord::from_values("eigenfunction_residual", &e, tol),
            ])
        }
        CheckKind::Crosscheck => {
            let entry = subject.entry.as_ref().ok_or_else(|| {
                Error::InvalidParams("verify crosscheck needs --space".into())
            })?;
            if entry.label == "s2h2-quotient" {
                let (b, c) = (entry.param("b").unwrap_or(1.0), entry.param("c").unwrap_or(1.0));
                let probes = w.chart.sample_points(cfg.probes, cfg.seed)?;
                let pairs: Vec<_> = probes
                    .par_iter()
                    .map(|&p| s2h2_quotient_check(b, c, p))
                    .collect::<Result<_>>()?;
                let tol = cfg.tolerance(QUOTIENT_TOLERANCE, true);
                let conf: Vec<f64> = pairs.iter().map(|r| r.conformal).collect();
                let om: Vec<f64> = pairs.iter().map(|r| r.omega).collect();
                return Ok(vec![
                    CheckRecord::from_values("quotient_conformal", &conf, tol),
                    CheckRecord::from_values("quotient_omega", &om, tol),
                ]);
            }
            let closed = entry.closed_form.as_ref().ok_or_else(|| {
                Error::InvalidParams(format!("`{}` has no closed form to crosscheck", entry.label))
            })?;
            let probes = closed.chart.sample_points(cfg.probes, cfg.seed)?;
            let values = par_values(&probes, |p| closed_form_crosscheck(entry, p))?;
            let tol = cfg.tolerance(CROSSCHECK_TOLERANCE, true);
            Ok(vec![CheckRecord::from_values("closed_form_deviation", &values, tol)])
        }
        CheckKind::Killing => {
            let probes = w.chart.sample_points(cfg.probes, cfg.seed)?;
            let gate = if analytic { KILLING_GATE_ANALYTIC } else { KILLING_GATE_FD };
            if w.source.max_order() < 3 {
                return Ok(vec![CheckRecord::gated("killing_order_gate", &[], 3.0)]);
            }
            let kill = par_values(&probes, |p| {
                let geo = w.geometry(p, 2)?;
                Ok(killing_residual(&geo, &geo.omega_up))
            })?;
            let rec = CheckRecord::from_values("killing_gate", &kill, gate);
            if !rec.pass {
                return Ok(vec![CheckRecord::gated("killing_gate", &kill, gate)]);
            }
            let r = killing_gauge_checks(w, &probes, gate, FARADAY_VANISH)?;
            let tol = cfg.tolerance(FD_TOLERANCE, analytic);
            let n = probes.len();
            // the gauge checks report maxima only
            let summary = |name: &str, v: f64| CheckRecord {
                points: n,
                ..CheckRecord::from_values(name, &[v], tol)
            };
            let mut out = vec![
                rec,
                summary("faraday_identity", r.faraday_identity),
                summary("cotton_york_identity", r.cotton_york_identity),
            ];
            if let Some(s) = r.symmetry {
                out.push(summary("star_faraday_symmetry", s.worst()));
            }
            Ok(out)
        }
    }
}

fn count_options(cfg: &RunConfig) -> CountOptions {
    CountOptions {
        probes: cfg.probes,
        seed: cfg.seed,
        ..CountOptions::default()
    }
}

fn obstruction_checks(
    cfg: &RunConfig,
    subject: &Subject,
    congruence: Option<&[String; 3]>,
    probes: &[Point],
    ew_tol: f64,
) -> Result<(Vec<CheckRecord>, Option<StructureBlock>)> {
    let w = &subject.structure;
    let orth_tol = cfg.tolerance(ORTH_TOLERANCE, subject.analytic);
    let cy_tol = cfg.tolerance(COTTON_YORK_TOLERANCE, subject.analytic);
    let mut samples: Vec<(Point, Vector3<f64>, f64)> = Vec::new();
    let mut records = Vec::new();
    let mut block = None;
    match congruence {
        Some(texts) => {
            let chi = VectorField::parse(&w.chart, [&texts[0], &texts[1], &texts[2]])?;
            let lin: Vec<_> = probes
                .par_iter()
                .map(|&p| linearize(w, &chi, p, orth_tol).map(|l| (p, l)))
                .collect();
            let mut residuals = Vec::new();
            for r in lin {
                match r {
                    Ok((p, l)) => {
                        residuals.push(l.congruence.worst());
                        samples.push((p, l.jet.vector(), l.jet.sigma.value()));
                    }
                    Err(Error::Precondition(_)) => {
                        let worst: Vec<f64> = probes
                            .iter()
                            .map(|&p| {
                                crate::toda::congruence_decompose(w, &chi, p)
                                    .map_or(f64::INFINITY, |c| c.worst())
                            })
                            .collect();
                        return Ok((vec![CheckRecord::gated("toda_congruence", &worst, orth_tol)], None));
                    }
                    Err(e) => return Err(e),
                }
            }
            records.push(CheckRecord::from_values("toda_congruence", &residuals, orth_tol));
        }
        None => {
            let opts = CountOptions {
                ew_tol,
                ..count_options(cfg)
            };
            let count = toda_structure_count(w, &opts)?;
            let jets: Vec<_> = count
                .basis
                .par_iter()
                .flat_map_iter(|s| probes.iter().map(move |&p| (s, p)))
                .map(|(s, p)| structure_jet(w, s, p, 0).map(|j| (p, j.vector(), j.sigma.value())))
                .collect::<Result<_>>()?;
            samples = jets;
            block = Some(StructureBlock::from(&count));
        }
    }
    let evaluated: Vec<(f64, f64, f64)> = samples
        .par_iter()
        .map(|(p, x, sigma)| {
            let orth = obstruction_orth(w, x, *p)?;
            let cy = obstruction_cy(w, x, *sigma, *p)?;
            Ok((orth, cy.residual_norm(), cy.null))
        })
        .collect::<Result<_>>()?;
    let col = |f: fn(&(f64, f64, f64)) -> f64| evaluated.iter().map(f).collect::<Vec<_>>();
    records.push(CheckRecord::from_values("orth_star_faraday", &col(|t| t.0), orth_tol));
    records.push(CheckRecord::from_values("cotton_york_identity", &col(|t| t.1), cy_tol));
    records.push(CheckRecord::from_values("cotton_york_null", &col(|t| t.2), cy_tol));
    Ok((records, block))
}

/// What a run does.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Verify(CheckKind),
    Structures,
    /// Obstruction identities for the confirmed structures, or for the
    /// linearization of a congruence given by its three components.
    Obstruct { congruence: Option<[String; 3]> },
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<Report> {
    let start = Instant::now();
    let subject = cfg.subject()?;
    let mut report = Report {
        config: cfg.clone(),
        checks: Vec::new(),
        structure_count: None,
        wall_time_ms: 0,
    };
    match command {
        Command::Verify(kind) => report.checks = verify_checks(*kind, cfg, &subject)?,
        Command::Structures | Command::Obstruct { .. } => {
            let probes = subject.structure.chart.sample_points(cfg.probes, cfg.seed)?;
            let (gate, ew_tol) = ew_gate(&subject, &probes, cfg)?;
            let gated = gate.status == Status::Gated;
            report.checks.push(gate);
            if !gated {
                if let Command::Obstruct { congruence } = command {
                    let (records, block) =
                        obstruction_checks(cfg, &subject, congruence.as_ref(), &probes, ew_tol)?;
                    report.checks.extend(records);
                    report.structure_count = block;
                } else {
                    let opts = CountOptions {
                        ew_tol,
                        ..count_options(cfg)
                    };
                    let count = toda_structure_count(&subject.structure, &opts)?;
                    report.structure_count = Some(StructureBlock::from(&count));
                }
            }
        }
    }
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// Column names of [`export_grid`] output after the three coordinates.
pub const CSV_FIELDS: [&str; 10] = [
    "g00", "g01", "g02", "g11", "g12", "g22", "omega0", "omega1", "omega2", "ew_residual",
];

fn grid_axis(iv: Interval, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![iv.mid()];
    }
    (0..n)
        .map(|i| iv.lo + (iv.hi - iv.lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Evaluates the structure on an `n₀ × n₁ × n₂` grid spanning the chart
/// domain, endpoints included. Returns CSV text and a report holding the
/// Einstein-Weyl residual over the grid.
pub fn export_grid(cfg: &RunConfig, dims: [usize; 3]) -> Result<(String, Report)> {
    let start = Instant::now();
    if dims.contains(&0) {
        return Err(Error::InvalidParams("grid dimensions must be at least 1".into()));
    }
    let subject = cfg.subject()?;
    let w = &subject.structure;
    let axes: Vec<Vec<f64>> = (0..3).map(|i| grid_axis(w.chart.domain[i], dims[i])).collect();
    let mut points = Vec::with_capacity(dims.iter().product());
    for &x in &axes[0] {
        for &y in &axes[1] {
            for &z in &axes[2] {
                points.push([x, y, z]);
            }
        }
    }
    for &p in &points {
        w.chart.check(p)?;
    }
    let rows: Vec<[f64; 13]> = points
        .par_iter()
        .map(|&p| {
            let geo = w.geometry(p, 2)?;
            let g = geo.metric();
            let om = geo.one_form();
            let ew = max_abs(&geo.ew_residual());
            Ok([
                p[0], p[1], p[2], g[(0, 0)], g[(0, 1)], g[(0, 2)], g[(1, 1)], g[(1, 2)], g[(2, 2)],
                om[0], om[1], om[2], ew,
            ])
        })
        .collect::<Result<_>>()?;
    let mut csv = w.chart.coord_names().join(",");
    for f in CSV_FIELDS {
        csv.push(',');
        csv.push_str(f);
    }
    csv.push('\n');
    for row in &rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    let ew: Vec<f64> = rows.iter().map(|r| r[12]).collect();
    let tol = cfg.tolerance(EW_TOLERANCE, subject.analytic);
    let report = Report {
        config: cfg.clone(),
        checks: vec![CheckRecord::from_values("ew_residual", &ew, tol)],
        structure_count: None,
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    Ok((csv, report))
}
