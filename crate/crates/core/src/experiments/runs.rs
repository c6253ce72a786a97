use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{ExperimentConfig, ExperimentName, Outcome};
use crate::bm::{
    gluskin_pair_experiment, mixing_family, mixing_norm_scan, projection_norm_scan, sk_criterion_scan, GluskinConfig,
    OperatorSamples, PolytopeModel, ProjectionFamily, SkConfig,
};
use crate::error::{invalid, GlabError, Result};
use crate::estimators::{
    concentration_constants, pi1_bounds, polar_volume_check, profile_spread, unconditional_distance_certificate,
    volume_radius_profile,
};
use crate::io::{fmt_g17, table_csv, CSV_HEADER};
use crate::linalg::{orthonormal_columns, random_gaussian_matrix};
use crate::operators::{
    entropy_bound_mb, greedy_net, operator_ball_volume_check, LinearMap, OperatorBallKind, OperatorBallSpec, DEFAULT_C0,
};
use crate::oracles::gaussian_moment_oracle;
use crate::polytope::{dgt_inclusion_check, sphere_direction, zp_inclusion_check, zp_support_estimate, VPolytope, ZpSource};
use crate::rng::RngSeed;
use crate::sampling::{
    family_field, paouris_tail_check, radius_band_check, sample, small_ball_check, DistributionSpec, Family, SampleSet,
};

fn gaussian() -> Family {
    Family::Gaussian
}

/// A named body for experiments that take a fixed unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    CrossPolytope { n: usize },
    Cube { n: usize },
    RegularPolygon { vertices: usize },
    Generators { rows: Vec<Vec<f64>> },
}

impl BodySpec {
    pub fn build(&self) -> Result<VPolytope> {
        let p = match self {
            BodySpec::CrossPolytope { n } | BodySpec::Cube { n } if *n == 0 => return invalid("body dimension must be positive"),
            BodySpec::CrossPolytope { n } => VPolytope::cross_polytope(*n),
            BodySpec::Cube { n } => VPolytope::cube(*n),
            BodySpec::RegularPolygon { vertices } => VPolytope::regular_polygon(*vertices)?,
            BodySpec::Generators { rows } => VPolytope::from_rows(rows, "custom")?,
        };
        if !p.full_dimensional {
            return invalid("body is not full-dimensional");
        }
        Ok(p)
    }
}

macro_rules! params {
    ($name:ident { $($field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub(crate) struct $name {
            $(pub $field: $ty,)*
        }
        impl Default for $name {
            fn default() -> Self {
                $name { $($field: $default,)* }
            }
        }
    };
}

/// Like [`params!`] with a `family` field that accepts a bare family name.
macro_rules! sampled_params {
    ($name:ident { $($field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub(crate) struct $name {
            #[serde(with = "family_field")]
            pub family: Family,
            $(pub $field: $ty,)*
        }
        impl Default for $name {
            fn default() -> Self {
                $name { family: gaussian(), $($field: $default,)* }
            }
        }
        impl $name {
            fn spec(&self, n: usize) -> DistributionSpec {
                DistributionSpec::new(self.family.clone(), n)
            }
        }
    };
}

sampled_params!(RadiusBand { n: usize = 4, m: usize = 10_000, eps0: f64 = 0.3, b: f64 = 3.0, max_fraction: f64 = 0.01 });
sampled_params!(PaourisTail { n: usize = 4, t_values: Vec<f64> = vec![1.0, 1.5, 2.0], c: f64 = 3.0, trials: usize = 100_000 });
sampled_params!(SmallBall {
    n: usize = 4,
    eps: f64 = 0.1,
    center: Option<Vec<f64>> = None,
    c0: f64 = 0.25,
    trials: usize = 100_000,
});
sampled_params!(ZpProfile {
    n: usize = 4,
    p_values: Vec<f64> = vec![1.0, 2.0, 4.0],
    directions: usize = 20,
    trials: usize = 100_000,
    c: f64 = 2.0,
    inclusion_directions: usize = 50,
    tolerance: f64 = 0.02,
});
sampled_params!(DgtInclusion {
    n: usize = 4,
    m: usize = 400,
    reference_m: usize = 20_000,
    c1: f64 = 0.25,
    directions: usize = 200,
    max_failure_fraction: f64 = 0.0,
});
sampled_params!(VolumeRadius {
    n: usize = 4,
    m_list: Vec<usize> = vec![8, 16, 32, 64, 128, 256, 512],
    trials: usize = 20_000,
    max_spread: f64 = 3.0,
});
sampled_params!(PolarVolume { n: usize = 3, m: usize = 30, c: f64 = 0.46, trials: usize = 200_000 });
sampled_params!(Concentration { n: usize = 4, m: usize = 400, directions: usize = 200, descent_steps: usize = 200 });
sampled_params!(Pi1 {
    n: usize = 8,
    m: usize = 800,
    directions: usize = 200,
    descent_steps: usize = 200,
    band_low: f64 = 0.5,
    band_high: f64 = 2.0,
});
sampled_params!(Unconditional {
    n: usize = 3,
    m: usize = 6,
    points: Option<Vec<Vec<f64>>> = None,
    trials: usize = 200_000,
    min_certificate: Option<f64> = None,
    max_certificate: Option<f64> = None,
});
sampled_params!(ProjectionScan {
    model: PolytopeModel = PolytopeModel::Pure,
    n: usize = 8,
    m: usize = 2048,
    rank_low: Option<usize> = None,
    rank_high: Option<usize> = None,
    trials: usize = 500,
    families: Vec<ProjectionFamily> = ProjectionFamily::ALL.to_vec(),
    floor: Option<f64> = None,
    compare_cross_polytope: bool = true,
});
sampled_params!(MixingScan {
    model: PolytopeModel = PolytopeModel::Pure,
    n: usize = 6,
    m: usize = 200,
    projections: usize = 20,
    rank: Option<usize> = None,
    lambdas: Vec<f64> = vec![-3.0, 0.0, 1.0, 10.0],
    gamma: Option<f64> = None,
    shift_tolerance: f64 = 1e-10,
});
params!(NetEntropy {
    body: BodySpec = BodySpec::CrossPolytope { n: 2 },
    t_values: Vec<f64> = vec![0.25, 0.5, 1.0],
    budget: usize = 2_000_000,
    heldout: usize = 1000,
    c0: f64 = DEFAULT_C0,
});
params!(OperatorBallVolume { body: BodySpec = BodySpec::Cube { n: 2 }, trials: usize = 1_000_000, tolerance: f64 = 0.05 });

/// Validated parameters, one variant per experiment.
pub(crate) enum Plan {
    RadiusBand(RadiusBand),
    PaourisTail(PaourisTail),
    SmallBall(SmallBall),
    ZpProfile(ZpProfile),
    DgtInclusion(DgtInclusion),
    VolumeRadius(VolumeRadius),
    PolarVolume(PolarVolume),
    Concentration(Concentration),
    Pi1(Pi1),
    Unconditional(Unconditional),
    GluskinPair(GluskinConfig),
    SkCriterion(SkConfig, usize, Option<f64>),
    ProjectionScan(ProjectionScan),
    MixingScan(MixingScan),
    NetEntropy(NetEntropy),
    OperatorBallVolume(OperatorBallVolume),
}

fn usage(name: ExperimentName, e: impl std::fmt::Display) -> GlabError {
    GlabError::Usage(format!("{}: {e}", name.as_str()))
}

fn parse<T: DeserializeOwned>(name: ExperimentName, v: &Value) -> Result<T> {
    let v = if v.is_null() { json!({}) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| usage(name, e))
}

/// Parameters as an object with the run seed inserted; `extra` keys are split off first.
fn with_seed(name: ExperimentName, v: &Value, seed: RngSeed, extra: &[&str]) -> Result<(Value, Map<String, Value>)> {
    let mut obj = match v {
        Value::Null => Map::new(),
        Value::Object(o) => o.clone(),
        _ => return Err(usage(name, "parameters must be an object")),
    };
    if obj.contains_key("seed") {
        return Err(usage(name, "the seed is set at the top level of the config"));
    }
    let mut taken = Map::new();
    for k in extra {
        if let Some(x) = obj.remove(*k) {
            taken.insert((*k).into(), x);
        }
    }
    obj.insert("seed".into(), serde_json::to_value(seed).map_err(|e| usage(name, e))?);
    Ok((Value::Object(obj), taken))
}

fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        invalid(msg)
    }
}

fn check_dim(n: usize) -> Result<()> {
    check((1..=64).contains(&n), format!("n = {n} outside [1, 64]"))
}

/// Parses and validates the parameters; nothing is computed.
pub(crate) fn validate(config: &ExperimentConfig) -> Result<Plan> {
    use ExperimentName as E;
    let name = config.experiment;
    let v = &config.parameters;
    let plan = match name {
        E::RadiusBand => {
            let p: RadiusBand = parse(name, v)?;
            check_dim(p.n)?;
            check(p.m > 0, "m must be positive")?;
            check(p.eps0 >= 0.0 && p.eps0 < p.b, format!("radius band needs 0 <= eps0 < b (got {}, {})", p.eps0, p.b))?;
            Plan::RadiusBand(p)
        }
        E::PaourisTail => {
            let p: PaourisTail = parse(name, v)?;
            check_dim(p.n)?;
            check(p.trials > 0 && !p.t_values.is_empty(), "need trials and t values")?;
            check(p.t_values.iter().all(|&t| t >= 1.0), "tail parameters must be >= 1")?;
            Plan::PaourisTail(p)
        }
        E::SmallBall => {
            let p: SmallBall = parse(name, v)?;
            check_dim(p.n)?;
            check(p.eps > 0.0 && p.eps <= 1.0, "eps must lie in (0, 1]")?;
            check(p.center.as_ref().is_none_or(|c| c.len() == p.n), "center has the wrong dimension")?;
            check(p.trials > 0, "trials must be positive")?;
            Plan::SmallBall(p)
        }
        E::ZpProfile => {
            let p: ZpProfile = parse(name, v)?;
            check_dim(p.n)?;
            check(!p.p_values.is_empty() && p.p_values.iter().all(|&x| x >= 1.0), "p values must be >= 1")?;
            check(p.directions > 0 && p.trials > 1, "need directions and trials")?;
            Plan::ZpProfile(p)
        }
        E::DgtInclusion => {
            let p: DgtInclusion = parse(name, v)?;
            check_dim(p.n)?;
            check(p.m >= p.n && p.reference_m >= 2 && p.directions > 0, "need m >= n, a reference sample and directions")?;
            check(p.c1 > 0.0, "c1 must be positive")?;
            Plan::DgtInclusion(p)
        }
        E::VolumeRadius => {
            let p: VolumeRadius = parse(name, v)?;
            check((1..=8).contains(&p.n), "volume profiles need n <= 8")?;
            check(!p.m_list.is_empty() && p.m_list.iter().all(|&m| m >= p.n), "every m must be >= n")?;
            check(p.trials > 0 && p.max_spread >= 1.0, "need trials and a spread band >= 1")?;
            Plan::VolumeRadius(p)
        }
        E::PolarVolume => {
            let p: PolarVolume = parse(name, v)?;
            check((2..=4).contains(&p.n), "polar volume needs 2 <= n <= 4")?;
            check(p.m >= p.n && p.trials > 0 && p.c > 0.0 && p.c <= 1.0, "need m >= n, trials and c in (0, 1]")?;
            Plan::PolarVolume(p)
        }
        E::Concentration => {
            let p: Concentration = parse(name, v)?;
            check_dim(p.n)?;
            check(p.m >= p.n && p.directions > 0, "need m >= n and directions")?;
            Plan::Concentration(p)
        }
        E::Pi1 => {
            let p: Pi1 = parse(name, v)?;
            check_dim(p.n)?;
            check(p.m >= p.n && p.directions > 0, "need m >= n and directions")?;
            check(p.band_low <= p.band_high, "band_low must not exceed band_high")?;
            Plan::Pi1(p)
        }
        E::UnconditionalCertificate => {
            let p: Unconditional = parse(name, v)?;
            let n = p.points.as_ref().and_then(|r| r.first()).map_or(p.n, |r| r.len());
            check((1..=4).contains(&n), "the certificate needs n <= 4")?;
            check(p.points.is_some() || p.m >= p.n, "need m >= n")?;
            check(p.trials > 0, "trials must be positive")?;
            Plan::Unconditional(p)
        }
        E::GluskinPair => {
            let (obj, _) = with_seed(name, v, config.seed, &[])?;
            let c: GluskinConfig = serde_json::from_value(obj).map_err(|e| usage(name, e))?;
            c.validate()?;
            Plan::GluskinPair(c)
        }
        E::SkCriterion => {
            let (obj, extra) = with_seed(name, v, config.seed, &["operators", "max_fraction"])?;
            let c: SkConfig = serde_json::from_value(obj).map_err(|e| usage(name, e))?;
            let ops: usize = match extra.get("operators") {
                Some(x) => serde_json::from_value(x.clone()).map_err(|e| usage(name, e))?,
                None => 200,
            };
            let max_fraction: Option<f64> = match extra.get("max_fraction") {
                Some(x) => Some(serde_json::from_value(x.clone()).map_err(|e| usage(name, e))?),
                None => None,
            };
            check((2..=16).contains(&c.n) && c.m > 0 && ops > 0, "need 2 <= n <= 16, m > 0 and operators > 0")?;
            Plan::SkCriterion(c, ops, max_fraction)
        }
        E::ProjectionScan => {
            let p: ProjectionScan = parse(name, v)?;
            check((2..=16).contains(&p.n), "projection scans need 2 <= n <= 16")?;
            check(p.m > 0 && p.trials > 0 && !p.families.is_empty(), "need m, trials and families")?;
            let (lo, hi) = rank_range(&p);
            check(lo >= 1 && lo <= hi && hi < p.n, format!("rank range [{lo}, {hi}] must lie within [1, n-1]"))?;
            Plan::ProjectionScan(p)
        }
        E::MixingScan => {
            let p: MixingScan = parse(name, v)?;
            check((2..=16).contains(&p.n), "mixing scans need 2 <= n <= 16")?;
            let r = p.rank.unwrap_or(p.n / 2);
            check(r >= 1 && r < p.n, "rank must lie in [1, n-1]")?;
            check(p.m > 0 && p.projections > 0 && !p.lambdas.is_empty(), "need m, projections and shifts")?;
            check(p.lambdas.iter().all(|&l| l.is_finite() && l != -2.0), "shifts must be finite and not -2")?;
            Plan::MixingScan(p)
        }
        E::NetEntropy => {
            let p: NetEntropy = parse(name, v)?;
            let b = p.body.build()?;
            check(b.n <= 3, "operator nets need n <= 3")?;
            check(!p.t_values.is_empty() && p.t_values.iter().all(|&t| t > 0.0), "net radii must be positive")?;
            check(p.budget > 0 && p.c0 > 0.0, "need a budget and c0 > 0")?;
            Plan::NetEntropy(p)
        }
        E::OperatorBallVolume => {
            let p: OperatorBallVolume = parse(name, v)?;
            let b = p.body.build()?;
            check(b.n <= 3, "operator-ball volumes need n <= 3")?;
            check(p.trials > 0 && p.tolerance > 0.0, "need trials and a positive tolerance")?;
            Plan::OperatorBallVolume(p)
        }
    };
    Ok(plan)
}

fn rank_range(p: &ProjectionScan) -> (usize, usize) {
    (p.rank_low.unwrap_or(p.n.div_ceil(4)), p.rank_high.unwrap_or(3 * p.n / 4))
}

/// Parameters that make every experiment valid; all but two are empty.
pub(crate) fn minimal_parameters(name: ExperimentName) -> Value {
    match name {
        ExperimentName::GluskinPair => json!({"model": "basis_enriched", "n": 2, "m": 4, "trials": 2}),
        ExperimentName::SkCriterion => json!({"model": "basis_enriched", "n": 4, "m": 8}),
        _ => json!({}),
    }
}

fn model_body(model: PolytopeModel, spec: &DistributionSpec, m: usize, seed: RngSeed) -> Result<VPolytope> {
    let b = model.build(spec, m, seed)?;
    if !b.full_dimensional {
        return Err(GlabError::DegenerateSample("model polytope is not full-dimensional".into()));
    }
    Ok(b)
}

pub(crate) fn execute(plan: Plan, seed: RngSeed) -> Result<Outcome> {
    let mut out = Outcome::default();
    match plan {
        Plan::RadiusBand(p) => {
            let s = sample(&p.spec(p.n), p.m, seed.derive(0))?;
            let est = radius_band_check(&s, p.eps0, p.b)?;
            out.metric("fraction_outside", est.value);
            out.band("fraction_outside", est.value, None, Some(p.max_fraction));
            out.table(
                "radius_band",
                table_csv(
                    &["n", "m", "eps0", "b", "fraction_outside", "ci_low", "ci_high"],
                    &[vec![p.n as f64, p.m as f64, p.eps0, p.b, est.value, est.ci_low, est.ci_high]],
                ),
            );
            out.estimate("fraction_outside", est);
        }
        Plan::PaourisTail(p) => {
            let checks = paouris_tail_check(&p.spec(p.n), &p.t_values, p.c, p.trials, seed.derive(0))?;
            let violations = checks.iter().filter(|c| !c.pass).count();
            out.metric("violations", violations as f64);
            out.band("violations", violations as f64, None, Some(0.0));
            let rows: Vec<Vec<f64>> = p
                .t_values
                .iter()
                .zip(&checks)
                .map(|(&t, c)| vec![t, c.estimate.value, c.estimate.ci_low, c.estimate.ci_high, c.bound, f64::from(u8::from(c.pass))])
                .collect();
            out.table("paouris_tail", table_csv(&["t", "probability", "ci_low", "ci_high", "bound", "pass"], &rows));
            for c in &checks {
                out.estimate(&c.label, c.estimate.clone());
            }
            out.details(&checks)?;
        }
        Plan::SmallBall(p) => {
            let y = p.center.clone().unwrap_or_else(|| vec![0.0; p.n]);
            let c = small_ball_check(&p.spec(p.n), p.eps, &y, p.c0, p.trials, seed.derive(0))?;
            out.metric("probability", c.estimate.value);
            out.metric("bound", c.bound);
            out.band("ci_high_over_bound", c.estimate.ci_high / c.bound, None, Some(1.0));
            out.table(
                "small_ball",
                table_csv(
                    &["eps", "probability", "ci_low", "ci_high", "bound"],
                    &[vec![p.eps, c.estimate.value, c.estimate.ci_low, c.estimate.ci_high, c.bound]],
                ),
            );
            out.estimate("probability", c.estimate.clone());
            out.details(&c)?;
        }
        Plan::ZpProfile(p) => zp_profile(&p, seed, &mut out)?,
        Plan::DgtInclusion(p) => {
            let s = sample(&p.spec(p.n), p.m, seed.derive(0))?;
            let r = sample(&p.spec(p.n), p.reference_m, seed.derive(1))?;
            let rep = dgt_inclusion_check(&s, &r, p.c1, p.directions, seed.derive(2))?;
            out.metric("failure_fraction", rep.failure_fraction);
            out.metric("max_passing_c1", rep.max_passing_c1);
            out.band("failure_fraction", rep.failure_fraction, None, Some(p.max_failure_fraction));
            out.table(
                "dgt_inclusion",
                table_csv(
                    &["n", "m", "q", "c1", "failure_fraction", "max_passing_c1"],
                    &[vec![p.n as f64, p.m as f64, rep.q, rep.c1, rep.failure_fraction, rep.max_passing_c1]],
                ),
            );
            out.details(&rep)?;
        }
        Plan::VolumeRadius(p) => {
            let rows = volume_radius_profile(&p.spec(p.n), &p.m_list, p.trials, seed.derive(0))?;
            let spread = profile_spread(&rows);
            out.metric("spread", spread);
            out.band("spread", spread, None, Some(p.max_spread));
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.m as f64,
                        r.volume.value,
                        r.volume.ci_low,
                        r.volume.ci_high,
                        r.normalized.value,
                        r.normalized.ci_low,
                        r.normalized.ci_high,
                    ]
                })
                .collect();
            out.table(
                "volume_radius",
                table_csv(
                    &["m", "volume", "volume_ci_low", "volume_ci_high", "normalized", "normalized_ci_low", "normalized_ci_high"],
                    &table,
                ),
            );
            for r in &rows {
                out.estimate(&format!("normalized_m{}", r.m), r.normalized.clone());
            }
            out.details(&rows)?;
        }
        Plan::PolarVolume(p) => {
            let s = sample(&p.spec(p.n), p.m, seed.derive(0))?;
            let rep = polar_volume_check(&s, p.c, p.trials, seed.derive(1))?;
            out.metric("product", rep.product);
            out.metric("ratio", rep.ratio);
            out.band("ratio", rep.ratio, Some(rep.lower), Some(1.0));
            out.table(
                "polar_volume",
                table_csv(
                    &["n", "vol_body", "vol_polar", "product", "omega_sq", "ratio"],
                    &[vec![p.n as f64, rep.vol_body, rep.vol_polar, rep.product, rep.omega_sq, rep.ratio]],
                ),
            );
            out.details(&rep)?;
        }
        Plan::Concentration(p) => {
            let s = sample(&p.spec(p.n), p.m, seed.derive(0))?;
            let rep = concentration_constants(&s, p.directions, p.descent_steps, seed.derive(1))?;
            out.metric("c1_hat", rep.c1_hat);
            out.metric("c2_hat", rep.c2_hat);
            out.band("c1_hat", rep.c1_hat, Some(1e-12), Some(rep.c2_hat));
            out.table(
                "concentration",
                table_csv(&["n", "m", "c1_hat", "c2_hat"], &[vec![p.n as f64, p.m as f64, rep.c1_hat, rep.c2_hat]]),
            );
            out.details(&rep)?;
        }
        Plan::Pi1(p) => {
            let s = sample(&p.spec(p.n), p.m, seed.derive(0))?;
            let b = pi1_bounds(&s, p.directions, p.descent_steps, seed.derive(1))?;
            out.metric("lower", b.lower);
            out.metric("upper", b.upper);
            out.band("upper_minus_lower", b.upper - b.lower, Some(0.0), None);
            out.band("lower", b.lower, Some(p.band_low), Some(p.band_high));
            out.band("upper", b.upper, Some(p.band_low), Some(p.band_high));
            out.table("pi1", table_csv(&["n", "m", "lower", "upper"], &[vec![p.n as f64, p.m as f64, b.lower, b.upper]]));
            out.details(&b)?;
        }
        Plan::Unconditional(p) => {
            let s = match &p.points {
                Some(rows) => SampleSet::from_rows(rows, "given", seed)?,
                None => sample(&p.spec(p.n), p.m, seed.derive(0))?,
            };
            let rep = unconditional_distance_certificate(&s, p.trials, seed.derive(1))?;
            out.metric("certificate", rep.certificate);
            if p.min_certificate.is_some() || p.max_certificate.is_some() {
                out.band("certificate", rep.certificate, p.min_certificate, p.max_certificate);
            }
            out.table(
                "unconditional_certificate",
                table_csv(
                    &["n", "m", "certificate", "polar_volume", "pi1_upper", "parallelepiped_factor"],
                    &[vec![s.n as f64, s.m as f64, rep.certificate, rep.polar_volume, rep.pi1_upper, rep.parallelepiped_factor]],
                ),
            );
            out.details(&rep)?;
        }
        Plan::GluskinPair(c) => {
            let rep = gluskin_pair_experiment(&c)?;
            let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
            out.metric("median_upper", opt(rep.median_upper));
            out.metric("median_normalized", opt(rep.median_normalized));
            if let Some(l) = rep.median_lower {
                out.metric("median_lower", l);
            }
            out.metric("kept", rep.kept as f64);
            out.metric("discarded", rep.discarded as f64);
            out.band("coupling_violations", rep.coupling_violations as f64, None, Some(0.0));
            out.table("gluskin_pair", rep.to_csv());
            out.details(&rep)?;
        }
        Plan::SkCriterion(c, ops, max_fraction) => {
            let rep = sk_criterion_scan(&c, &OperatorSamples::Gaussian(ops))?;
            out.metric("fraction", rep.fraction);
            out.metric("min_norm", rep.min_norm);
            out.metric("threshold", rep.threshold);
            if let Some(f) = max_fraction {
                out.band("fraction", rep.fraction, None, Some(f));
            }
            let rows: Vec<Vec<f64>> =
                rep.norms.iter().enumerate().map(|(i, &v)| vec![i as f64, v, f64::from(u8::from(v < rep.threshold))]).collect();
            out.table("sk_criterion", table_csv(&["operator", "norm", "below_threshold"], &rows));
            out.details(&rep)?;
        }
        Plan::ProjectionScan(p) => {
            let b = model_body(p.model, &p.spec(p.n), p.m, seed.derive(0))?;
            let range = rank_range(&p);
            let rep = projection_norm_scan(&b, range, p.trials, &p.families, seed.derive(1))?;
            out.metric("min_projection_norm", rep.min_projection_norm_found);
            out.metric("reference_scale", rep.reference_scale);
            if let Some(f) = p.floor {
                out.band("min_projection_norm", rep.min_projection_norm_found, Some(f), None);
            }
            let mut rows = vec![vec![0.0, rep.min_projection_norm_found, rep.argmin_rank as f64]];
            if p.compare_cross_polytope {
                let cross = projection_norm_scan(&VPolytope::cross_polytope(p.n), range, p.trials, &p.families, seed.derive(1))?;
                out.metric("cross_polytope_min", cross.min_projection_norm_found);
                out.band(
                    "min_projection_norm_minus_cross",
                    rep.min_projection_norm_found - cross.min_projection_norm_found,
                    Some(0.0),
                    None,
                );
                rows.push(vec![1.0, cross.min_projection_norm_found, cross.argmin_rank as f64]);
            }
            out.table("projection_scan", table_csv(&["cross_polytope", "min_projection_norm", "argmin_rank"], &rows));
            out.details(&rep)?;
        }
        Plan::MixingScan(p) => {
            let b = model_body(p.model, &p.spec(p.n), p.m, seed.derive(0))?;
            let r = p.rank.unwrap_or(p.n / 2);
            let projections = (0..p.projections)
                .map(|i| {
                    let mut rng = seed.derive(1).trial(i as u64).rng();
                    let q = orthonormal_columns(&random_gaussian_matrix(&mut rng, p.n, r), 1e-10);
                    LinearMap::new(q.transpose() * q)
                })
                .collect::<Result<Vec<_>>>()?;
            let family = mixing_family(&projections, &p.lambdas)?;
            let rep = mixing_norm_scan(&b, &family, p.gamma)?;
            out.metric("min_norm", rep.min_norm);
            out.metric("max_margin_shift", rep.max_margin_shift);
            out.metric("max_norm_shift", rep.max_norm_shift);
            out.band("max_margin_shift", rep.max_margin_shift, None, Some(p.shift_tolerance));
            let rows: Vec<Vec<f64>> = family
                .iter()
                .zip(rep.norms.iter().zip(&rep.margins))
                .map(|(m, (&nv, &mg))| vec![m.base as f64, m.lambda, nv, mg])
                .collect();
            out.table("mixing_scan", table_csv(&["projection", "lambda", "norm", "margin"], &rows));
            out.details(&rep)?;
        }
        Plan::NetEntropy(p) => {
            let b = p.body.build()?;
            let spec = OperatorBallSpec { kind: OperatorBallKind::MB(b.clone()), n: b.n };
            let mut rows = Vec::new();
            let mut slack = f64::INFINITY;
            let mut uncovered = 0usize;
            let mut reports = Vec::new();
            for (i, &t) in p.t_values.iter().enumerate() {
                let net = greedy_net(&spec, t, p.budget, p.heldout, seed.derive(i as u64))?;
                let bound = entropy_bound_mb(&b, t, p.c0)?;
                slack = slack.min(bound - net.net.len() as f64);
                uncovered += net.heldout - net.heldout_covered;
                rows.push(vec![
                    t,
                    net.net.len() as f64,
                    bound,
                    net.members_sampled as f64,
                    net.heldout_covered as f64,
                    net.heldout as f64,
                    net.max_heldout_distance,
                ]);
                reports.push(json!({
                    "t": t,
                    "net_size": net.net.len(),
                    "entropy_bound": bound,
                    "members_sampled": net.members_sampled,
                    "heldout": net.heldout,
                    "heldout_covered": net.heldout_covered,
                    "max_heldout_distance": net.max_heldout_distance,
                }));
            }
            out.metric("min_bound_slack", slack);
            out.metric("uncovered_heldout", uncovered as f64);
            out.band("min_bound_slack", slack, Some(0.0), None);
            out.band("uncovered_heldout", uncovered as f64, None, Some(0.0));
            out.table(
                "net_entropy",
                table_csv(
                    &["t", "net_size", "entropy_bound", "members_sampled", "heldout_covered", "heldout", "max_heldout_distance"],
                    &rows,
                ),
            );
            out.details(&reports)?;
        }
        Plan::OperatorBallVolume(p) => {
            let b = p.body.build()?;
            let rep = operator_ball_volume_check(&b, p.trials, seed.derive(0))?;
            let rel = rep.relative_error.unwrap_or(f64::NAN);
            out.metric("volume", rep.estimate.value);
            out.metric("relative_error", rel);
            out.band("relative_error", rel, None, Some(p.tolerance));
            out.table(
                "operator_ball_volume",
                table_csv(
                    &["n", "volume", "ci_low", "ci_high", "expected", "relative_error"],
                    &[vec![
                        rep.n as f64,
                        rep.estimate.value,
                        rep.estimate.ci_low,
                        rep.estimate.ci_high,
                        rep.expected.unwrap_or(f64::NAN),
                        rel,
                    ]],
                ),
            );
            out.estimate("volume", rep.estimate.clone());
            out.details(&rep)?;
        }
    }
    Ok(out)
}

fn zp_profile(p: &ZpProfile, seed: RngSeed, out: &mut Outcome) -> Result<()> {
    let spec = p.spec(p.n);
    let is_gaussian = p.family == Family::Gaussian;
    let mut rng = seed.derive(0).rng();
    let dirs: Vec<Vec<f64>> = (0..p.directions).map(|_| sphere_direction(&mut rng, p.n)).collect();
    let mut csv = format!("{CSV_HEADER}\ndirection,p,estimate,ci_low,ci_high,oracle\n");
    let mut worst = 0.0f64;
    for (d, u) in dirs.iter().enumerate() {
        for (k, &pv) in p.p_values.iter().enumerate() {
            let est = zp_support_estimate(ZpSource::Spec(&spec), u, pv, p.trials, seed.derive(1).trial((d * 64 + k) as u64))?;
            let oracle = if is_gaussian { Some(gaussian_moment_oracle(pv)?) } else { None };
            if let Some(o) = oracle {
                worst = worst.max((est.value / o - 1.0).abs());
            }
            csv.push_str(&format!(
                "{d},{},{},{},{},{}\n",
                fmt_g17(pv),
                fmt_g17(est.value),
                fmt_g17(est.ci_low),
                fmt_g17(est.ci_high),
                oracle.map(fmt_g17).unwrap_or_default()
            ));
        }
    }
    out.table("zp_profile", csv);
    if is_gaussian {
        out.metric("max_relative_deviation", worst);
        out.band("max_relative_deviation", worst, None, Some(p.tolerance));
    }
    let mut sorted = p.p_values.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut reports = Vec::new();
    for (i, w) in sorted.windows(2).enumerate() {
        let rep = zp_inclusion_check(&spec, w[0], w[1], p.c, p.inclusion_directions, p.trials, seed.derive(2).trial(i as u64))?;
        out.band(&format!("inclusion_p{}_q{}", w[0], w[1]), f64::from(u8::from(rep.pass)), Some(1.0), None);
        reports.push(rep);
    }
    out.details(&reports)
}
