//! Configuration-driven experiment runs with JSON reports and CSV tables, and the invariant
//! battery behind `verify`.

mod runs;
mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{GlabError, Result};
use crate::io::SCHEMA_VERSION;
use crate::report::EstimateReport;
use crate::rng::RngSeed;

pub use runs::BodySpec;
pub use verify::{verify_suite, CheckOutcome, VerifyLevel, VerifyOptions, VerifySummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    RadiusBand,
    PaourisTail,
    SmallBall,
    ZpProfile,
    DgtInclusion,
    VolumeRadius,
    PolarVolume,
    Concentration,
    Pi1,
    UnconditionalCertificate,
    GluskinPair,
    SkCriterion,
    ProjectionScan,
    MixingScan,
    NetEntropy,
    OperatorBallVolume,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 16] = [
        ExperimentName::RadiusBand,
        ExperimentName::PaourisTail,
        ExperimentName::SmallBall,
        ExperimentName::ZpProfile,
        ExperimentName::DgtInclusion,
        ExperimentName::VolumeRadius,
        ExperimentName::PolarVolume,
        ExperimentName::Concentration,
        ExperimentName::Pi1,
        ExperimentName::UnconditionalCertificate,
        ExperimentName::GluskinPair,
        ExperimentName::SkCriterion,
        ExperimentName::ProjectionScan,
        ExperimentName::MixingScan,
        ExperimentName::NetEntropy,
        ExperimentName::OperatorBallVolume,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::RadiusBand => "radius_band",
            ExperimentName::PaourisTail => "paouris_tail",
            ExperimentName::SmallBall => "small_ball",
            ExperimentName::ZpProfile => "zp_profile",
            ExperimentName::DgtInclusion => "dgt_inclusion",
            ExperimentName::VolumeRadius => "volume_radius",
            ExperimentName::PolarVolume => "polar_volume",
            ExperimentName::Concentration => "concentration",
            ExperimentName::Pi1 => "pi1",
            ExperimentName::UnconditionalCertificate => "unconditional_certificate",
            ExperimentName::GluskinPair => "gluskin_pair",
            ExperimentName::SkCriterion => "sk_criterion",
            ExperimentName::ProjectionScan => "projection_scan",
            ExperimentName::MixingScan => "mixing_scan",
            ExperimentName::NetEntropy => "net_entropy",
            ExperimentName::OperatorBallVolume => "operator_ball_volume",
        }
    }

    /// The library operation an experiment dispatches to.
    pub fn owner(self) -> &'static str {
        match self {
            ExperimentName::RadiusBand => "sampling::radius_band_check",
            ExperimentName::PaourisTail => "sampling::paouris_tail_check",
            ExperimentName::SmallBall => "sampling::small_ball_check",
            ExperimentName::ZpProfile => "polytope::zp_inclusion_check",
            ExperimentName::DgtInclusion => "polytope::dgt_inclusion_check",
            ExperimentName::VolumeRadius => "estimators::volume_radius_profile",
            ExperimentName::PolarVolume => "estimators::polar_volume_check",
            ExperimentName::Concentration => "estimators::concentration_constants",
            ExperimentName::Pi1 => "estimators::pi1_bounds",
            ExperimentName::UnconditionalCertificate => "estimators::unconditional_distance_certificate",
            ExperimentName::GluskinPair => "bm::gluskin_pair_experiment",
            ExperimentName::SkCriterion => "bm::sk_criterion_scan",
            ExperimentName::ProjectionScan => "bm::projection_norm_scan",
            ExperimentName::MixingScan => "bm::mixing_norm_scan",
            ExperimentName::NetEntropy => "operators::greedy_net",
            ExperimentName::OperatorBallVolume => "operators::operator_ball_volume_check",
        }
    }
}

/// Accepts a bare integer or `{"seed": .., "stream_index": ..}`.
fn seed_repr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<RngSeed, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Plain(u64),
        Full(RngSeed),
    }
    Ok(match Repr::deserialize(d)? {
        Repr::Plain(s) => RngSeed::new(s),
        Repr::Full(s) => s,
    })
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default = "empty_object")]
    pub parameters: serde_json::Value,
    #[serde(deserialize_with = "seed_repr")]
    pub seed: RngSeed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName, parameters: serde_json::Value, seed: RngSeed) -> Self {
        ExperimentConfig { experiment, parameters, seed, output_dir: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GlabError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the parameters against the experiment's schema without running anything.
    pub fn validate(&self) -> Result<()> {
        runs::validate(self).map(|_| ())
    }
}

/// A metric compared against a declared interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub metric: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pass: bool,
}

impl Band {
    pub fn new(metric: impl Into<String>, value: f64, min: Option<f64>, max: Option<f64>) -> Self {
        let pass = value.is_finite() && min.is_none_or(|lo| value >= lo) && max.is_none_or(|hi| value <= hi);
        Band { metric: metric.into(), value, min, max, pass }
    }
}

/// A CSV artifact: written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub owner: String,
    pub metrics: BTreeMap<String, f64>,
    pub estimates: BTreeMap<String, EstimateReport>,
    /// The owning operation's full report.
    pub details: serde_json::Value,
    pub bands: Vec<Band>,
    pub pass: bool,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl RunReport {
    /// Everything the run computed, serialized; equal strings mean identical results.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(&(&self.metrics, &self.estimates, &self.details, &self.bands)).unwrap_or_default()
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.name == name).map(|t| t.csv.as_str())
    }

    /// Writes `report.json` and the tables into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.artifacts = self.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
        self.artifacts.push("report.json".into());
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), &t.csv)?;
        }
        let json = serde_json::to_string_pretty(self).map_err(|e| GlabError::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json + "\n")?;
        Ok(())
    }
}

/// What an experiment produced before it is wrapped into a [`RunReport`].
#[derive(Default)]
pub(crate) struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub estimates: BTreeMap<String, EstimateReport>,
    pub details: serde_json::Value,
    pub bands: Vec<Band>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    pub fn estimate(&mut self, name: &str, e: EstimateReport) {
        self.estimates.insert(name.into(), e);
    }

    pub fn band(&mut self, name: &str, value: f64, min: Option<f64>, max: Option<f64>) {
        self.bands.push(Band::new(name, value, min, max));
    }

    pub fn table(&mut self, name: &str, csv: String) {
        self.tables.push(Table { name: name.into(), csv });
    }

    pub fn details<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.details = serde_json::to_value(value).map_err(|e| GlabError::NumericalFailure(e.to_string()))?;
        Ok(())
    }
}

/// Validates, dispatches to the owning operation and, when `output_dir` is set, writes
/// `report.json` plus one CSV per table.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let plan = runs::validate(config)?;
    let start = Instant::now();
    let out = runs::execute(plan, config.seed)?;
    let pass = out.bands.iter().all(|b| b.pass);
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        owner: config.experiment.owner().into(),
        metrics: out.metrics,
        estimates: out.estimates,
        details: out.details,
        bands: out.bands,
        pass,
        artifacts: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
        tables: out.tables,
    };
    if let Some(dir) = &config.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

/// Reruns the embedded config and reports whether every computed value is reproduced exactly.
pub fn replay(report: &RunReport) -> Result<bool> {
    let mut config = report.config.clone();
    config.output_dir = None;
    Ok(run_experiment(&config)?.fingerprint() == report.fingerprint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn names_round_trip_and_owners_are_distinct() {
        let mut owners = std::collections::BTreeSet::new();
        for name in ExperimentName::ALL {
            let parsed: ExperimentName = serde_json::from_value(json!(name.as_str())).unwrap();
            assert_eq!(parsed, name);
            assert!(owners.insert(name.owner()), "{} shares an owner", name.as_str());
        }
    }

    #[test]
    fn every_name_has_a_default_schema() {
        // Defaults exist for every parameter except those that must be chosen explicitly.
        for name in ExperimentName::ALL {
            let params = runs::minimal_parameters(name);
            let c = ExperimentConfig::new(name, params, RngSeed::new(1));
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", name.as_str()));
        }
    }

    #[test]
    fn unknown_name_and_keys_are_rejected() {
        let bad = ExperimentConfig::from_json(r#"{"experiment":"nope","seed":1}"#);
        assert!(matches!(bad, Err(GlabError::Usage(_))));
        let typo = ExperimentConfig::from_json(r#"{"experiment":"pi1","seed":1,"paramters":{}}"#);
        assert!(typo.is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment":"pi1","seed":1,"parameters":{"nn":3}}"#).unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn seed_accepts_both_forms() {
        let a = ExperimentConfig::from_json(r#"{"experiment":"pi1","seed":5}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"experiment":"pi1","seed":{"seed":5,"stream_index":0}}"#).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radius_band_rejects_inverted_band() {
        let c = ExperimentConfig::new(
            ExperimentName::RadiusBand,
            json!({"n": 4, "m": 100, "eps0": 3.5, "b": 3.0}),
            RngSeed::new(2),
        );
        let e = run_experiment(&c).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn report_replays() {
        let c = ExperimentConfig::new(ExperimentName::RadiusBand, json!({"n": 3, "m": 2000}), RngSeed::new(3));
        let r = run_experiment(&c).unwrap();
        assert!(replay(&r).unwrap());
        let text = serde_json::to_string(&r).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.fingerprint(), r.fingerprint());
        assert!(replay(&back).unwrap());
    }
}
