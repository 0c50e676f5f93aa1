//! K-fold cross-validation of the divergence exponent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaFamily;
use crate::divergence::{divergence_between, DivergenceSpec, Reference};
use crate::empirical::PseudoSample;
use crate::error::{Error, Result};
use crate::estimation::{fit_mcde, FitOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    /// Candidate β exponents.
    pub grid: Vec<f64>,
    /// Exponent of the out-of-sample β-divergence used to score candidates.
    pub anchor_beta: f64,
    pub seed: u64,
    /// Reuse the full-sample ranks inside each fold instead of re-ranking.
    #[serde(default)]
    pub global_ranks: bool,
    #[serde(default)]
    pub fit: FitOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 5,
            grid: vec![0.1, 0.25, 0.5, 1.0],
            anchor_beta: 0.1,
            seed: 20240601,
            global_ranks: false,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub exponent: f64,
    pub score: f64,
    /// Folds whose fit failed; such a fold scores `+∞`.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub beta_opt: f64,
    pub cv_scores: Vec<CvScore>,
    /// `fold_estimates[e][j]`: θ̂ for exponent `grid[e]` trained without fold `j`.
    pub fold_estimates: Vec<Vec<Option<Vec<f64>>>>,
    pub folds: Vec<Vec<usize>>,
}

/// Random partition of `0..n` into `k` folds; the first `n mod k` folds get one
/// extra row. Each fold is returned sorted.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let len = base + usize::from(j < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    out
}

fn validate(cfg: &CvConfig, n: usize) -> Result<()> {
    if cfg.k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {}", cfg.k)));
    }
    if cfg.grid.is_empty() {
        return Err(Error::Config("the exponent grid is empty".into()));
    }
    for &b in &cfg.grid {
        DivergenceSpec::beta(b).map_err(|e| Error::Config(e.to_string()))?;
    }
    DivergenceSpec::beta(cfg.anchor_beta).map_err(|e| Error::Config(e.to_string()))?;
    if n / cfg.k < 3 {
        return Err(Error::Config(format!(
            "{n} rows give folds smaller than 3 rows with k = {}",
            cfg.k
        )));
    }
    if n < 5 * cfg.k {
        return Err(Error::Config(format!(
            "need at least {} rows for {}-fold CV, got {n}",
            5 * cfg.k,
            cfg.k
        )));
    }
    Ok(())
}

/// Selects β by minimising the summed anchor divergence between each held-out
/// fold's empirical copula and the model fitted without that fold.
pub fn cv_select_exponent(sample: &PseudoSample, family: &CopulaFamily, cfg: &CvConfig) -> Result<CvResult> {
    let n = sample.n();
    validate(cfg, n)?;
    let anchor = DivergenceSpec::beta(cfg.anchor_beta)?;
    let folds = make_folds(n, cfg.k, cfg.seed);

    let mut parts = Vec::with_capacity(cfg.k);
    for fold in &folds {
        let mut in_fold = vec![false; n];
        for &i in fold {
            in_fold[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
        let (train, held) = if cfg.global_ranks {
            (sample.subset(&train), sample.subset(fold))
        } else {
            (sample.rerank_subset(&train)?, sample.rerank_subset(fold)?)
        };
        parts.push((train, held));
    }

    let tasks: Vec<(usize, usize)> = (0..cfg.grid.len())
        .flat_map(|e| (0..cfg.k).map(move |j| (e, j)))
        .collect();
    let outcomes: Vec<(Option<Vec<f64>>, f64)> = tasks
        .par_iter()
        .map(|&(e, j)| {
            let (train, held) = &parts[j];
            let spec = DivergenceSpec::beta(cfg.grid[e]).expect("validated");
            let Ok(fit) = fit_mcde(train, family, &spec, &cfg.fit) else {
                return (None, f64::INFINITY);
            };
            let score = fit
                .copula(*family)
                .and_then(|c| divergence_between(&anchor, Reference::Empirical(held), &c, 0, 0))
                .map(|d| d.value)
                .unwrap_or(f64::INFINITY);
            (Some(fit.theta_hat), score)
        })
        .collect();

    let mut cv_scores = Vec::with_capacity(cfg.grid.len());
    let mut fold_estimates = Vec::with_capacity(cfg.grid.len());
    for (e, &exponent) in cfg.grid.iter().enumerate() {
        let row = &outcomes[e * cfg.k..(e + 1) * cfg.k];
        let score = row.iter().map(|(_, s)| s).sum::<f64>();
        let failures = row.iter().filter(|(t, _)| t.is_none()).count();
        cv_scores.push(CvScore {
            exponent,
            score,
            failures,
        });
        fold_estimates.push(row.iter().map(|(t, _)| t.clone()).collect());
    }
    let best = cv_scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.score.total_cmp(&b.1.score).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    if !cv_scores[best].score.is_finite() {
        return Err(Error::Numerical {
            detail: "every candidate exponent failed in some fold".into(),
            condition_number: f64::NAN,
        });
    }
    Ok(CvResult {
        beta_opt: cfg.grid[best],
        cv_scores,
        fold_estimates,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{Copula, FamilyKind};
    use crate::empirical::pseudo_observations;

    fn data(n: usize, seed: u64) -> PseudoSample {
        let c = Copula::with_theta(FamilyKind::Clayton, 2, 0.5).unwrap();
        pseudo_observations(&c.sample(n, seed).unwrap()).unwrap()
    }

    #[test]
    fn folds_partition_rows() {
        let folds = make_folds(23, 5, 4);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, make_folds(23, 5, 4));
        assert_ne!(folds, make_folds(23, 5, 5));
    }

    #[test]
    fn deterministic_and_argmin() {
        let u = data(200, 3);
        let fam = CopulaFamily::bivariate(FamilyKind::Clayton);
        let cfg = CvConfig::default();
        let a = cv_select_exponent(&u, &fam, &cfg).unwrap();
        let b = cv_select_exponent(&u, &fam, &cfg).unwrap();
        assert_eq!(a, b);
        let min = a.cv_scores.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
        let at = a.cv_scores.iter().find(|s| s.score == min).unwrap().exponent;
        assert_eq!(a.beta_opt, at);
        assert_eq!(a.fold_estimates.len(), 4);
        assert!(a.fold_estimates.iter().all(|r| r.len() == 5 && r.iter().all(Option::is_some)));
    }

    #[test]
    fn singleton_grid_matches_plain_fold_fits() {
        let u = data(120, 9);
        let fam = CopulaFamily::bivariate(FamilyKind::Clayton);
        let cfg = CvConfig {
            grid: vec![0.1],
            ..CvConfig::default()
        };
        let r = cv_select_exponent(&u, &fam, &cfg).unwrap();
        assert_eq!(r.beta_opt, 0.1);
        let spec = DivergenceSpec::beta(0.1).unwrap();
        for (j, fold) in r.folds.iter().enumerate() {
            let train: Vec<usize> = (0..u.n()).filter(|i| !fold.contains(i)).collect();
            let fit = fit_mcde(&u.rerank_subset(&train).unwrap(), &fam, &spec, &FitOptions::default()).unwrap();
            assert_eq!(r.fold_estimates[0][j].as_ref().unwrap(), &fit.theta_hat);
        }
    }

    #[test]
    fn global_ranks_flag_changes_training_data() {
        let u = data(100, 2);
        let fam = CopulaFamily::bivariate(FamilyKind::Clayton);
        let base = CvConfig::default();
        let global = CvConfig {
            global_ranks: true,
            ..base.clone()
        };
        let a = cv_select_exponent(&u, &fam, &base).unwrap();
        let b = cv_select_exponent(&u, &fam, &global).unwrap();
        assert_eq!(a.folds, b.folds);
        assert_ne!(a.fold_estimates, b.fold_estimates);
    }

    #[test]
    fn anchor_prefers_truth_on_average() {
        let anchor = DivergenceSpec::beta(0.1).unwrap();
        let truth = Copula::with_theta(FamilyKind::Clayton, 2, 0.5).unwrap();
        let far = Copula::with_theta(FamilyKind::Clayton, 2, 2.5).unwrap();
        let (mut s_true, mut s_far) = (0.0, 0.0);
        for seed in 0..20 {
            let held = data(40, 100 + seed);
            s_true += divergence_between(&anchor, Reference::Empirical(&held), &truth, 0, 0).unwrap().value;
            s_far += divergence_between(&anchor, Reference::Empirical(&held), &far, 0, 0).unwrap().value;
        }
        assert!(s_true < s_far);
    }

    #[test]
    fn config_errors() {
        let u = data(20, 1);
        let fam = CopulaFamily::bivariate(FamilyKind::Clayton);
        let bad = |cfg: CvConfig| matches!(cv_select_exponent(&u, &fam, &cfg), Err(Error::Config(_)));
        assert!(bad(CvConfig::default()));
        assert!(bad(CvConfig { k: 1, ..CvConfig::default() }));
        assert!(bad(CvConfig { k: 2, grid: vec![], ..CvConfig::default() }));
        assert!(bad(CvConfig { k: 2, grid: vec![-2.0], ..CvConfig::default() }));
    }
}
