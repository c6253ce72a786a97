use serde::{Deserialize, Serialize};

use super::certify::{bm_lower_certified, CertifyOptions};
use super::search::bm_upper_search;
use crate::error::{invalid, Result};
use crate::io::{fmt_g17, CSV_HEADER};
use crate::polytope::{build_basis_enriched, build_pure, VPolytope};
use crate::rng::{map_trials, RngSeed};
use crate::sampling::{sample, DistributionSpec, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolytopeModel {
    /// `absconv{e_i, x_j/√n}`.
    BasisEnriched,
    /// `absconv{x_j}`.
    Pure,
}

impl PolytopeModel {
    pub fn build(self, spec: &DistributionSpec, m: usize, seed: RngSeed) -> Result<VPolytope> {
        let s = sample(spec, m, seed)?;
        Ok(match self {
            PolytopeModel::BasisEnriched => build_basis_enriched(&s),
            PolytopeModel::Pure => build_pure(&s),
        })
    }
}

fn default_family() -> Family {
    Family::Gaussian
}
fn default_gamma() -> f64 {
    1.0
}
fn default_c0() -> f64 {
    2.0
}
fn default_restarts() -> usize {
    6
}
fn default_steps() -> usize {
    400
}
fn default_resolution() -> f64 {
    0.05
}
fn default_budget() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluskinConfig {
    pub model: PolytopeModel,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_family", with = "crate::sampling::family_field")]
    pub family: Family,
    /// Persisted calibration constant; does not enter the distance computation.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Rank parameter, `⌊n/2⌋` when absent.
    #[serde(default)]
    pub k: Option<usize>,
    pub trials: usize,
    pub seed: RngSeed,
    /// Build `Y` from the same stream as `X`.
    #[serde(default)]
    pub same_seed: bool,
    /// The pure model needs `m ≥ c0·n`.
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_resolution")]
    pub net_resolution: f64,
    #[serde(default = "default_budget")]
    pub refine_budget: usize,
    /// Run the certified lower bound (planar only).
    #[serde(default)]
    pub certify: Option<bool>,
}

impl GluskinConfig {
    pub fn new(model: PolytopeModel, n: usize, m: usize, trials: usize, seed: RngSeed) -> Self {
        GluskinConfig {
            model,
            n,
            m,
            family: default_family(),
            gamma: default_gamma(),
            k: None,
            trials,
            seed,
            same_seed: false,
            c0: default_c0(),
            restarts: default_restarts(),
            steps: default_steps(),
            net_resolution: default_resolution(),
            refine_budget: default_budget(),
            certify: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 16 {
            return invalid(format!("n = {} outside [1, 16]", self.n));
        }
        if self.m == 0 || self.trials == 0 {
            return invalid("m and trials must be positive");
        }
        if !(self.gamma > 0.0) {
            return invalid("gamma must be positive");
        }
        if self.model == PolytopeModel::Pure && (self.m as f64) < self.c0 * self.n as f64 {
            return invalid(format!("pure model needs m >= {}·n, got m = {}", self.c0, self.m));
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.n {
                return invalid(format!("k = {k} outside [1, n]"));
            }
        }
        if self.certify == Some(true) && self.n != 2 {
            return invalid("certified lower bounds need n = 2");
        }
        Ok(())
    }

    fn certifies(&self) -> bool {
        self.certify.unwrap_or(self.n == 2)
    }

    pub fn rank(&self) -> usize {
        self.k.unwrap_or(self.n / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluskinRow {
    pub trial: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// `d̂ ln(1 + m/n) / n` with `d̂` the search upper bound.
    pub normalized_statistic: Option<f64>,
    pub discarded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluskinReport {
    pub config: GluskinConfig,
    pub rows: Vec<GluskinRow>,
    pub kept: usize,
    pub discarded: usize,
    pub median_lower: Option<f64>,
    pub median_upper: Option<f64>,
    pub median_normalized: Option<f64>,
    /// Trials with `lower > upper + 1e-6`.
    pub coupling_violations: usize,
}

impl GluskinReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
        let mut out = format!("{CSV_HEADER}\ntrial,lower,upper,normalized_statistic,discarded_flag\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.trial,
                opt(r.lower),
                opt(r.upper),
                opt(r.normalized_statistic),
                u8::from(r.discarded)
            ));
        }
        out
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 { values[k / 2] } else { 0.5 * (values[k / 2 - 1] + values[k / 2]) })
}

/// Independent random pairs `(B_m, A_m)` with their distance bounds.
pub fn gluskin_pair_experiment(config: &GluskinConfig) -> Result<GluskinReport> {
    config.validate()?;
    let spec = DistributionSpec::new(config.family.clone(), config.n);
    let ratio = (1.0 + config.m as f64 / config.n as f64).ln() / config.n as f64;
    let rows = map_trials(config.trials, |i| -> Result<GluskinRow> {
        let root = config.seed.trial(i);
        let x = config.model.build(&spec, config.m, root.derive(0))?;
        let y = config.model.build(&spec, config.m, root.derive(if config.same_seed { 0 } else { 1 }))?;
        let trial = i as usize;
        if !x.full_dimensional || !y.full_dimensional {
            return Ok(GluskinRow { trial, lower: None, upper: None, normalized_statistic: None, discarded: true });
        }
        let up = bm_upper_search(&x, &y, config.restarts, config.steps, root.derive(2))?;
        let lower = if config.certifies() {
            let opts = CertifyOptions {
                net_resolution: config.net_resolution,
                refine_budget: config.refine_budget,
                upper_hint: Some(up.upper),
            };
            Some(bm_lower_certified(&x, &y, &opts, root.derive(3))?.lower)
        } else {
            None
        };
        Ok(GluskinRow {
            trial,
            lower,
            upper: Some(up.upper),
            normalized_statistic: Some(up.upper * ratio),
            discarded: false,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let kept: Vec<&GluskinRow> = rows.iter().filter(|r| !r.discarded).collect();
    let col = |f: fn(&GluskinRow) -> Option<f64>| median(&mut kept.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    let median_lower = col(|r| r.lower);
    let median_upper = col(|r| r.upper);
    let median_normalized = col(|r| r.normalized_statistic);
    let coupling_violations = kept
        .iter()
        .filter(|r| matches!((r.lower, r.upper), (Some(l), Some(u)) if l > u + 1e-6))
        .count();
    Ok(GluskinReport {
        config: config.clone(),
        kept: kept.len(),
        discarded: rows.len() - kept.len(),
        rows,
        median_lower,
        median_upper,
        median_normalized,
        coupling_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_distance_one() {
        let mut c = GluskinConfig::new(PolytopeModel::BasisEnriched, 2, 4, 3, RngSeed::new(4));
        c.same_seed = true;
        c.refine_budget = 1000;
        let r = gluskin_pair_experiment(&c).unwrap();
        for row in &r.rows {
            assert!((row.upper.unwrap() - 1.0).abs() < 1e-12);
            assert!(row.lower.unwrap() <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn pure_model_needs_enough_points() {
        let c = GluskinConfig::new(PolytopeModel::Pure, 4, 6, 1, RngSeed::new(0));
        assert!(gluskin_pair_experiment(&c).is_err());
    }

    #[test]
    fn csv_is_reproducible() {
        let mut c = GluskinConfig::new(PolytopeModel::BasisEnriched, 2, 4, 4, RngSeed::new(9));
        c.refine_budget = 2000;
        let a = gluskin_pair_experiment(&c).unwrap().to_csv();
        let b = gluskin_pair_experiment(&c).unwrap().to_csv();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 6);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
