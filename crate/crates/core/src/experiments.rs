//! Scenario data generation and the seeded repetition harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{sample_into, Copula, CopulaFamily, FamilyKind};
use crate::divergence::DivergenceSpec;
use crate::empirical::{pseudo_observations, PseudoSample};
use crate::error::{Error, Result};
use crate::estimation::{fit_mcde, fit_mle, FitOptions};
use crate::matrix::DataMatrix;
use crate::selection::{cv_select_exponent, CvConfig};
use crate::special::{norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CorrectClayton,
    MixtureI,
    MarginalII,
    HighDimContaminated,
    HighDimCorrect,
    CvStudy,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::CorrectClayton => "correct_clayton",
            ScenarioKind::MixtureI => "mixture_i",
            ScenarioKind::MarginalII => "marginal_ii",
            ScenarioKind::HighDimContaminated => "high_dim_contaminated",
            ScenarioKind::HighDimCorrect => "high_dim_correct",
            ScenarioKind::CvStudy => "cv_study",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            ScenarioKind::CorrectClayton,
            ScenarioKind::MixtureI,
            ScenarioKind::MarginalII,
            ScenarioKind::HighDimContaminated,
            ScenarioKind::HighDimCorrect,
            ScenarioKind::CvStudy,
        ];
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        all.into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown scenario kind '{s}'")))
    }
}

/// Copula the contaminated rows are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Contaminant {
    StudentT { rho: f64, dof: f64 },
    Independence,
}

impl Default for Contaminant {
    fn default() -> Self {
        Contaminant::StudentT { rho: -0.5, dof: 5.0 }
    }
}

impl fmt::Display for Contaminant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contaminant::StudentT { rho, dof } => write!(f, "t:{rho}:{dof}"),
            Contaminant::Independence => write!(f, "independence"),
        }
    }
}

impl FromStr for Contaminant {
    type Err = Error;

    /// `t:RHO:DOF` or `independence`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad contaminant '{s}'")));
        match parts.as_slice() {
            ["independence"] => Ok(Contaminant::Independence),
            ["t", rho, dof] => Ok(Contaminant::StudentT {
                rho: num(rho)?,
                dof: num(dof)?,
            }),
            _ => Err(Error::Config(format!("bad contaminant '{s}'"))),
        }
    }
}

/// Marginal transform applied to the copula sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Marginal {
    /// Leave the uniform margins untouched.
    #[default]
    Uniform,
    /// First column through the quantile of `(1−w)N(0,1) + wN(shift,1)`,
    /// the others through the standard normal quantile.
    NormalMixture { weight: f64, shift: f64 },
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Uniform => write!(f, "uniform"),
            Marginal::NormalMixture { weight, shift } => write!(f, "normal_mixture:{weight}:{shift}"),
        }
    }
}

impl FromStr for Marginal {
    type Err = Error;

    /// `uniform` or `normal_mixture:WEIGHT:SHIFT`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad marginal '{s}'")));
        match parts.as_slice() {
            ["uniform"] => Ok(Marginal::Uniform),
            ["normal_mixture", w, shift] => Ok(Marginal::NormalMixture {
                weight: num(w)?,
                shift: num(shift)?,
            }),
            _ => Err(Error::Config(format!("bad marginal '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub d: usize,
    pub n: usize,
    pub theta_true: f64,
    /// Contamination rate π of the ε-mixture.
    pub pi: f64,
    pub contaminant: Contaminant,
    pub marginal: Marginal,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Defaults for each scenario kind.
    pub fn preset(kind: ScenarioKind) -> Self {
        let base = ScenarioConfig {
            kind,
            d: 2,
            n: 200,
            theta_true: 0.5,
            pi: 0.0,
            contaminant: Contaminant::default(),
            marginal: Marginal::Uniform,
            seed: 1,
        };
        match kind {
            ScenarioKind::CorrectClayton | ScenarioKind::CvStudy => base,
            ScenarioKind::MixtureI => ScenarioConfig { pi: 0.025, ..base },
            ScenarioKind::MarginalII => ScenarioConfig {
                marginal: Marginal::NormalMixture {
                    weight: 0.05,
                    shift: 5.0,
                },
                ..base
            },
            ScenarioKind::HighDimCorrect => ScenarioConfig {
                d: 20,
                n: 2500,
                theta_true: 2.0,
                contaminant: Contaminant::Independence,
                ..base
            },
            ScenarioKind::HighDimContaminated => ScenarioConfig {
                d: 20,
                n: 2500,
                theta_true: 2.0,
                pi: 0.05,
                contaminant: Contaminant::Independence,
                ..base
            },
        }
    }

    /// Parses JSON (text starting with `{`) or `key=value` lines. In the
    /// line format `kind` comes first and fills in that kind's defaults;
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let cfg: ScenarioConfig = serde_json::from_str(trimmed)?;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut cfg: Option<ScenarioConfig> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "kind" {
                cfg = Some(ScenarioConfig::preset(value.parse()?));
                continue;
            }
            let c = cfg
                .as_mut()
                .ok_or_else(|| Error::Config("the first entry must be kind=...".into()))?;
            let bad = || Error::Config(format!("line {}: bad value for {key}", lineno + 1));
            match key {
                "d" => c.d = value.parse().map_err(|_| bad())?,
                "n" => c.n = value.parse().map_err(|_| bad())?,
                "theta" | "theta_true" => c.theta_true = value.parse().map_err(|_| bad())?,
                "pi" => c.pi = value.parse().map_err(|_| bad())?,
                "seed" => c.seed = value.parse().map_err(|_| bad())?,
                "contaminant" => c.contaminant = value.parse()?,
                "marginal" => c.marginal = value.parse()?,
                _ => return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        let cfg = cfg.ok_or_else(|| Error::Config("empty scenario".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pi) {
            return Err(Error::Config(format!("π must lie in [0, 1), got {}", self.pi)));
        }
        if self.d < 2 || self.n < self.d + 1 {
            return Err(Error::Config(format!("need d ≥ 2 and n ≥ d + 1, got d={} n={}", self.d, self.n)));
        }
        self.model().map_err(|e| Error::Config(e.to_string()))?;
        if self.pi > 0.0 {
            self.contaminant_copula().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Marginal::NormalMixture { weight, shift } = self.marginal {
            if !(0.0..1.0).contains(&weight) || !shift.is_finite() {
                return Err(Error::Config("normal-mixture weight must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> CopulaFamily {
        CopulaFamily {
            kind: FamilyKind::Clayton,
            dim: self.d,
        }
    }

    pub fn model(&self) -> Result<Copula> {
        Copula::new(CopulaFamily::new(FamilyKind::Clayton, self.d)?, vec![self.theta_true])
    }

    fn contaminant_copula(&self) -> Result<Copula> {
        match self.contaminant {
            Contaminant::Independence => Copula::independence(self.d),
            Contaminant::StudentT { rho, dof } => {
                Copula::new(CopulaFamily::new(FamilyKind::StudentT { dof }, self.d)?, vec![rho])
            }
        }
    }
}

/// CDF of `(1−w)N(0,1) + wN(shift,1)`.
fn mixture_cdf(x: f64, weight: f64, shift: f64) -> f64 {
    (1.0 - weight) * norm_cdf(x) + weight * norm_cdf(x - shift)
}

fn mixture_quantile(u: f64, weight: f64, shift: f64) -> f64 {
    let (mut lo, mut hi) = {
        let a = norm_quantile(u);
        if shift >= 0.0 {
            (a, a + shift)
        } else {
            (a + shift, a)
        }
    };
    while hi - lo > 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mixture_cdf(mid, weight, shift) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dependence sample only: each row from the model, or from the contaminant
/// with probability π. No uniform is consumed when π = 0.
pub fn generate_copula_sample(cfg: &ScenarioConfig) -> Result<DataMatrix> {
    cfg.validate()?;
    let model = cfg.model()?;
    let contaminant = if cfg.pi > 0.0 { Some(cfg.contaminant_copula()?) } else { None };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = DataMatrix::from_row_major(vec![0.0; cfg.n * cfg.d], cfg.n, cfg.d)?;
    for i in 0..cfg.n {
        let source = match &contaminant {
            Some(c) if rng.random::<f64>() < cfg.pi => c,
            _ => &model,
        };
        sample_into(source, &mut rng, out.row_mut(i));
    }
    Ok(out)
}

/// Raw `n × d` data for a scenario.
pub fn generate_dataset(cfg: &ScenarioConfig) -> Result<DataMatrix> {
    let mut data = generate_copula_sample(cfg)?;
    if let Marginal::NormalMixture { weight, shift } = cfg.marginal {
        data.map_column(0, |u| mixture_quantile(u, weight, shift));
        for j in 1..cfg.d {
            data.map_column(j, norm_quantile);
        }
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Estimator {
    Mle,
    Mcde { spec: DivergenceSpec },
    /// β chosen by cross-validation, then refitted on the full sample.
    OptBeta { cv: CvConfig },
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Mle => "MLE".into(),
            Estimator::Mcde { spec } => format!("{spec}-MCDE"),
            Estimator::OptBeta { .. } => "Opt-beta-MCDE".into(),
        }
    }

    /// θ̂ for one sample; `None` when the fit errs or does not converge.
    pub fn estimate(&self, u: &PseudoSample, family: &CopulaFamily, seed: u64) -> Option<Vec<f64>> {
        let opts = FitOptions::default();
        let fit = match self {
            Estimator::Mle => fit_mle(u, family, &opts),
            Estimator::Mcde { spec } => fit_mcde(u, family, spec, &opts),
            Estimator::OptBeta { cv } => {
                let cfg = CvConfig { seed, ..cv.clone() };
                let chosen = cv_select_exponent(u, family, &cfg).ok()?;
                fit_mcde(u, family, &DivergenceSpec::beta(chosen.beta_opt).ok()?, &cv.fit)
            }
        };
        fit.ok().filter(|f| f.converged).map(|f| f.theta_hat)
    }
}

/// The α-, β- and γ-MCDE at exponent 0.1 together with the MLE.
pub fn standard_estimators() -> Vec<Estimator> {
    let mut v = vec![Estimator::Mle];
    for spec in [
        DivergenceSpec::alpha(0.1),
        DivergenceSpec::beta(0.1),
        DivergenceSpec::gamma(0.1),
    ] {
        v.push(Estimator::Mcde { spec: spec.expect("valid exponent") });
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub estimator: String,
    pub mean: f64,
    pub stddev: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Successful repetitions the statistics are based on.
    pub reps: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub theta_true: f64,
    pub repetitions: usize,
    pub rows: Vec<MetricsRow>,
    /// `estimates[e][r]`: first parameter of estimator `e` at repetition `r`.
    pub estimates: Vec<Vec<Option<f64>>>,
    /// Caveats about how the scenario was generated.
    pub notes: Vec<String>,
}

impl MetricsTable {
    pub fn row(&self, estimator: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// Concatenates tables from several scenarios (e.g. a multi-panel preset).
    pub fn concat(tables: Vec<MetricsTable>) -> MetricsTable {
        let mut out = MetricsTable {
            theta_true: tables.first().map_or(f64::NAN, |t| t.theta_true),
            repetitions: tables.first().map_or(0, |t| t.repetitions),
            rows: vec![],
            estimates: vec![],
            notes: vec![],
        };
        for t in tables {
            out.rows.extend(t.rows);
            out.estimates.extend(t.estimates);
            for n in t.notes {
                if !out.notes.contains(&n) {
                    out.notes.push(n);
                }
            }
        }
        out
    }

    /// CSV with columns `scenario,estimator,mean,stddev,bias,rmse,reps,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "estimator", "mean", "stddev", "bias", "rmse", "reps", "failures"])?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.estimator.clone(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.stddev),
                format!("{:.6}", r.bias),
                format!("{:.6}", r.rmse),
                r.reps.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-repetition seeds drawn from one stream seeded by `master_seed`.
pub fn repetition_seeds(master_seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..reps).map(|_| rng.next_u64()).collect()
}

fn summarize(scenario: &str, estimator: String, values: &[Option<f64>], truth: f64) -> MetricsRow {
    let mut ok: Vec<f64> = values.iter().flatten().copied().collect();
    ok.sort_by(f64::total_cmp);
    let m = ok.len();
    let failures = values.len() - m;
    let mean = ok.iter().sum::<f64>() / m as f64;
    let var = if m > 1 {
        ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64
    } else {
        f64::NAN
    };
    let mse = ok.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / m as f64;
    MetricsRow {
        scenario: scenario.to_string(),
        estimator,
        mean,
        stddev: var.sqrt(),
        bias: mean - truth,
        rmse: mse.sqrt(),
        reps: m,
        failures,
    }
}

/// Runs every estimator on `reps` seeded datasets and aggregates θ̂.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    estimators: &[Estimator],
    reps: usize,
    master_seed: u64,
) -> Result<MetricsTable> {
    run_labelled(cfg.kind.name(), cfg, estimators, reps, master_seed)
}

pub fn run_labelled(
    label: &str,
    cfg: &ScenarioConfig,
    estimators: &[Estimator],
    reps: usize,
    master_seed: u64,
) -> Result<MetricsTable> {
    if reps < 2 {
        return Err(Error::Config(format!("need at least 2 repetitions, got {reps}")));
    }
    if estimators.is_empty() {
        return Err(Error::Config("no estimators given".into()));
    }
    cfg.validate()?;
    let family = cfg.family();
    let seeds = repetition_seeds(master_seed, reps);
    let per_rep: Vec<Vec<Option<f64>>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<Option<f64>>> {
            let data = generate_dataset(&ScenarioConfig { seed, ..cfg.clone() })?;
            let u = pseudo_observations(&data)?;
            Ok(estimators
                .iter()
                .map(|e| e.estimate(&u, &family, seed ^ 0x5DEE_CE66).map(|t| t[0]))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(estimators.len());
    let mut estimates = Vec::with_capacity(estimators.len());
    for (e, est) in estimators.iter().enumerate() {
        let column: Vec<Option<f64>> = per_rep.iter().map(|r| r[e]).collect();
        rows.push(summarize(label, est.label(), &column, cfg.theta_true));
        estimates.push(column);
    }
    let mut notes = Vec::new();
    if cfg.kind == ScenarioKind::HighDimContaminated {
        notes.push(format!(
            "contaminated high-dimensional rows are drawn from the {} copula at rate {}; this recipe is an assumption",
            cfg.contaminant, cfg.pi
        ));
    }
    Ok(MetricsTable {
        theta_true: cfg.theta_true,
        repetitions: reps,
        rows,
        estimates,
        notes,
    })
}

/// Named reproduction runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Table2,
    Table3,
    Table3b,
    Table4,
    Table5,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table2" => Ok(Preset::Table2),
            "table3" => Ok(Preset::Table3),
            "table3b" => Ok(Preset::Table3b),
            "table4" => Ok(Preset::Table4),
            "table5" => Ok(Preset::Table5),
            _ => Err(Error::Usage(format!(
                "unknown scenario '{s}' (expected table2, table3, table3b, table4 or table5)"
            ))),
        }
    }
}

/// One panel of a preset: a label, a scenario and its estimators.
#[derive(Debug, Clone)]
pub struct Panel {
    pub label: String,
    pub config: ScenarioConfig,
    pub estimators: Vec<Estimator>,
}

impl Preset {
    pub fn default_reps(&self) -> usize {
        match self {
            Preset::Table2 | Preset::Table5 => 50,
            Preset::Table3 | Preset::Table3b | Preset::Table4 => 100,
        }
    }

    pub fn panels(&self) -> Vec<Panel> {
        let panel = |label: &str, config: ScenarioConfig, estimators: Vec<Estimator>| Panel {
            label: label.to_string(),
            config,
            estimators,
        };
        match self {
            Preset::Table2 => vec![panel(
                "correct",
                ScenarioConfig::preset(ScenarioKind::CorrectClayton),
                standard_estimators(),
            )],
            Preset::Table3 => vec![panel(
                "misspecified_i",
                ScenarioConfig::preset(ScenarioKind::MixtureI),
                standard_estimators(),
            )],
            Preset::Table3b => vec![panel(
                "misspecified_ii",
                ScenarioConfig::preset(ScenarioKind::MarginalII),
                standard_estimators(),
            )],
            Preset::Table4 => {
                let ests = vec![
                    Estimator::Mle,
                    Estimator::Mcde {
                        spec: DivergenceSpec::beta(0.1).expect("valid"),
                    },
                ];
                let mut out = Vec::new();
                for d in [10, 15, 20] {
                    for kind in [ScenarioKind::HighDimCorrect, ScenarioKind::HighDimContaminated] {
                        let tag = if kind == ScenarioKind::HighDimCorrect { "correct" } else { "contaminated" };
                        out.push(panel(
                            &format!("d{d}_{tag}"),
                            ScenarioConfig {
                                d,
                                ..ScenarioConfig::preset(kind)
                            },
                            ests.clone(),
                        ));
                    }
                }
                out
            }
            Preset::Table5 => {
                let ests = cv_study_estimators();
                vec![
                    panel("correct", ScenarioConfig::preset(ScenarioKind::CvStudy), ests.clone()),
                    panel(
                        "misspecified",
                        ScenarioConfig {
                            pi: 0.1,
                            ..ScenarioConfig::preset(ScenarioKind::CvStudy)
                        },
                        ests,
                    ),
                ]
            }
        }
    }

    /// Runs every panel; panel `i` uses a master seed derived from `seed` and `i`.
    pub fn run(&self, reps: usize, seed: u64) -> Result<MetricsTable> {
        let panels = self.panels();
        let seeds = repetition_seeds(seed, panels.len());
        let tables = panels
            .iter()
            .zip(seeds)
            .map(|(p, s)| run_labelled(&p.label, &p.config, &p.estimators, reps, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsTable::concat(tables))
    }
}

/// MLE, fixed β ∈ {1, 0.1}, and the cross-validated β.
pub fn cv_study_estimators() -> Vec<Estimator> {
    vec![
        Estimator::Mle,
        Estimator::Mcde {
            spec: DivergenceSpec::beta(1.0).expect("valid"),
        },
        Estimator::Mcde {
            spec: DivergenceSpec::beta(0.1).expect("valid"),
        },
        Estimator::OptBeta { cv: CvConfig::default() },
    ]
}
