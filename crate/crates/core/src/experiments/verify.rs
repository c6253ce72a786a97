use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{replay, run_experiment, runs, ExperimentConfig, ExperimentName};
use crate::bm::{bm_lower_certified, bm_upper_search, gluskin_pair_experiment, CertifyOptions, GluskinConfig, PolytopeModel};
use crate::error::{GlabError, Result};
use crate::estimators::{pi1_bounds, profile_spread, volume_exact_lowdim, volume_mc, volume_radius_profile, Body};
use crate::io::SCHEMA_VERSION;
use crate::linalg::{dot, norm1, random_gaussian_matrix};
use crate::lp::{solve_lp_with, LpOptions, LpProblem, LpStatus};
use crate::operators::{det_normalize, mixing_check, op_norm_polytopes, LinearMap, Subspace};
use crate::oracles::{bm_grid_oracle_2d, lp_vertex_oracle, opnorm_sphere_oracle};
use crate::polytope::{
    build_basis_enriched, inradius_estimate, minkowski_norm_with, polar_vertices, sphere_direction, support_function,
    VPolytope,
};
use crate::rng::RngSeed;
use crate::sampling::{covariance_distance, isotropic_constant, isotropize, sample, DistributionSpec, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub level: VerifyLevel,
    pub seed: RngSeed,
    /// Tolerances for every LP solved by the battery; loosening them must make the oracle
    /// comparisons fail.
    pub lp: LpOptions,
}

impl VerifyOptions {
    pub fn new(level: VerifyLevel, seed: RngSeed) -> Self {
        VerifyOptions { level, seed, lp: LpOptions::default() }
    }

    fn pick(&self, quick: usize, full: usize) -> usize {
        match self.level {
            VerifyLevel::Quick => quick,
            VerifyLevel::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    /// `topic/check`.
    pub key: String,
    pub pass: bool,
    /// The worst value seen, in the units named by `measure`.
    pub worst: f64,
    pub measure: String,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub schema_version: u32,
    pub level: VerifyLevel,
    pub seed: RngSeed,
    pub checks: Vec<CheckOutcome>,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

impl VerifySummary {
    pub fn checklist(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "[{}] {:<40} {} = {:.3e} over {} cases\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.key,
                c.measure,
                c.worst,
                c.cases
            ));
        }
        s.push_str(&format!("{} passed, {} failed\n", self.passed, self.failed));
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| GlabError::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json + "\n")?;
        Ok(())
    }
}

struct Battery {
    checks: Vec<CheckOutcome>,
}

impl Battery {
    /// Records a check; an error counts as a failure with an infinite worst value.
    fn run(&mut self, key: &str, measure: &str, f: impl FnOnce() -> Result<(bool, f64, usize)>) {
        let (pass, worst, cases) = f().unwrap_or((false, f64::INFINITY, 0));
        self.checks.push(CheckOutcome { key: key.into(), pass, worst, measure: measure.into(), cases });
    }
}

const BUILTINS: [Family; 4] = [Family::Gaussian, Family::CubeUniform, Family::ProductExponential, Family::BallUniform];

fn random_body(seed: RngSeed, n: usize, m: usize) -> Result<VPolytope> {
    let mut k = 0;
    loop {
        let b = PolytopeModel::Pure.build(&DistributionSpec::gaussian(n), m, seed.derive(k))?;
        if b.full_dimensional {
            return Ok(b);
        }
        k += 1;
    }
}

fn random_map(seed: RngSeed, n: usize) -> Result<LinearMap> {
    LinearMap::new(random_gaussian_matrix(&mut seed.rng(), n, n))
}

/// A feasible LP over `x >= 0` with `Σ x <= U`, so every instance is bounded.
fn random_lp(seed: RngSeed, max_vars: usize) -> LpProblem {
    let mut rng = seed.rng();
    let v = rng.gen_range(1..=max_vars);
    let rows = rng.gen_range(1..=3);
    let x0: Vec<f64> = (0..v).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut p = LpProblem::new((0..v).map(|_| rng.gen_range(-1.0..1.0)).collect());
    for _ in 0..rows {
        let a: Vec<f64> = (0..v).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = dot(&a, &x0) + rng.gen_range(0.0..0.5);
        p.add_le(a, b);
    }
    if rng.gen_bool(0.3) {
        let a: Vec<f64> = (0..v).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = dot(&a, &x0);
        p.add_eq(a, b);
    }
    p.add_le(vec![1.0; v], v as f64);
    p
}

fn lp_checks(o: &VerifyOptions, bat: &mut Battery) {
    let count = o.pick(40, 200);
    let seed = o.seed.derive(1);
    bat.run("lp/vertex_enumeration_oracle", "max |simplex - oracle|", || {
        let mut worst = 0.0f64;
        for i in 0..count {
            let p = random_lp(seed.trial(i as u64), 20);
            let exact = lp_vertex_oracle(&p)?.value;
            let got = solve_lp_with(&p, &o.lp)
                .ok()
                .filter(|s| s.status == LpStatus::Optimal)
                .map_or(f64::INFINITY, |s| s.objective_value);
            worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
        }
        Ok((worst <= 1e-6, worst, count))
    });
    bat.run("lp/row_permutation", "max |objective difference|", || {
        let mut worst = 0.0f64;
        for i in 0..count {
            let p = random_lp(seed.trial(i as u64), 20);
            let mut q = p.clone();
            q.ineq_matrix.reverse();
            q.ineq_rhs.reverse();
            let a = solve_lp_with(&p, &o.lp)?;
            let b = solve_lp_with(&q, &o.lp)?;
            if a.status != b.status {
                return Ok((false, f64::INFINITY, count));
            }
            worst = worst.max((a.objective_value - b.objective_value).abs());
        }
        Ok((worst <= 1e-8, worst, count))
    });
}

/// Runs `f` inside a dedicated pool with `threads` workers.
fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| GlabError::NumericalFailure(e.to_string()))?;
    Ok(pool.install(f))
}

fn sampling_checks(o: &VerifyOptions, bat: &mut Battery) {
    let seed = o.seed.derive(2);
    bat.run("sampling/determinism", "mismatched sample sets", || {
        let m = o.pick(2000, 20_000);
        let mut bad = 0;
        for (k, fam) in BUILTINS.iter().enumerate() {
            let spec = DistributionSpec::new(fam.clone(), 4);
            let s = seed.derive(k as u64);
            let a = in_pool(1, || sample(&spec, m, s))??;
            let b = in_pool(3, || sample(&spec, m, s))??;
            let c = sample(&spec, m, s)?;
            bad += usize::from(a != b || a != c);
        }
        Ok((bad == 0, bad as f64, BUILTINS.len()))
    });
    bat.run("sampling/isotropy", "max deviation / allowed", || {
        let m = o.pick(10_000, 100_000);
        let sm = (m as f64).sqrt();
        let mut worst = 0.0f64;
        let mut cases = 0;
        for (k, fam) in BUILTINS.iter().enumerate() {
            for n in [2usize, 4, 8] {
                let s = sample(&DistributionSpec::new(fam.clone(), n), m, seed.derive(100 + 10 * k as u64 + n as u64))?;
                let mean = s.mean().iter().fold(0.0f64, |a, x| a.max(x.abs()));
                worst = worst.max(mean * sm / 5.0).max(covariance_distance(&s) * sm / 10.0);
                cases += 1;
            }
        }
        Ok((worst <= 1.0, worst, cases))
    });
    bat.run("sampling/isotropic_constant_range", "worst distance outside [0.2, 1]", || {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for fam in BUILTINS {
            for n in [2usize, 4, 8] {
                let l = isotropic_constant(&DistributionSpec::new(fam.clone(), n))?;
                worst = worst.max((0.2 - l).max(l - 1.0).max(0.0));
                cases += 1;
            }
        }
        Ok((worst == 0.0, worst, cases))
    });
    bat.run("sampling/isotropize_idempotent", "max coordinate change", || {
        let mut worst = 0.0f64;
        for (k, fam) in BUILTINS.iter().enumerate() {
            let raw = sample(&DistributionSpec::new(fam.clone(), 4), 500, seed.derive(200 + k as u64))?;
            let once = isotropize(&raw)?.samples;
            let twice = isotropize(&once)?.samples;
            worst = once.points.iter().zip(&twice.points).fold(worst, |a, (x, y)| a.max((x - y).abs()));
        }
        Ok((worst <= 1e-8, worst, BUILTINS.len()))
    });
}

/// Maximum of `⟨y, x⟩` over `absconv{g_j}` as an LP in `λ = λ⁺ - λ⁻`, `Σ λ⁺ + λ⁻ <= 1`.
fn support_lp(p: &VPolytope, y: &[f64], opts: &LpOptions) -> Result<f64> {
    let k = p.num_generators();
    let mut c = Vec::with_capacity(2 * k);
    for j in 0..k {
        c.push(-dot(p.generator(j), y));
    }
    for j in 0..k {
        c.push(dot(p.generator(j), y));
    }
    let mut lp = LpProblem::new(c);
    lp.add_le(vec![1.0; 2 * k], 1.0);
    let s = solve_lp_with(&lp, opts)?;
    Ok(-s.objective_value)
}

fn polytope_checks(o: &VerifyOptions, bat: &mut Battery) {
    let seed = o.seed.derive(3);
    let count = o.pick(10, 50);
    let bodies: Vec<Result<VPolytope>> = (0..count).map(|i| random_body(seed.trial(i as u64), 2 + i % 3, 12)).collect();
    let points = |i: usize, n: usize, k: usize| -> Vec<Vec<f64>> {
        let mut rng = seed.derive(50).trial(i as u64).rng();
        (0..k).map(|_| sphere_direction(&mut rng, n).into_iter().map(|x| x * rng.gen_range(0.1..3.0)).collect()).collect()
    };
    bat.run("polytope/support_norm_duality", "max |support - generator max|, |support - LP|", || {
        let mut worst = 0.0f64;
        for (i, b) in bodies.iter().enumerate() {
            let b = b.as_ref().map_err(Clone::clone)?;
            for y in points(i, b.n, 5) {
                let h = support_function(b, &y);
                let direct = b.generator_rows().map(|g| dot(g, &y).abs()).fold(0.0, f64::max);
                let lp = support_lp(b, &y, &o.lp)?;
                worst = worst.max((h - direct).abs()).max((h - lp).abs());
            }
        }
        Ok((worst <= 1e-9, worst, count * 5))
    });
    bat.run("polytope/generators_in_body", "max norm of a generator - 1", || {
        let mut worst = f64::NEG_INFINITY;
        for b in &bodies {
            let b = b.as_ref().map_err(Clone::clone)?;
            for g in b.generator_rows() {
                worst = worst.max(minkowski_norm_with(b, g, &o.lp)? - 1.0);
            }
        }
        Ok((worst <= 1e-9, worst, count))
    });
    bat.run("polytope/homogeneity_triangle", "max violation", || {
        let mut worst = 0.0f64;
        for (i, b) in bodies.iter().enumerate() {
            let b = b.as_ref().map_err(Clone::clone)?;
            let pts = points(i, b.n, 6);
            for w in pts.chunks_exact(3) {
                let (x, y, a) = (&w[0], &w[1], w[2][0]);
                let nx = minkowski_norm_with(b, x, &o.lp)?;
                let ny = minkowski_norm_with(b, y, &o.lp)?;
                let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
                let sum: Vec<f64> = x.iter().zip(y).map(|(p, q)| p + q).collect();
                let hom = (minkowski_norm_with(b, &ax, &o.lp)? - a.abs() * nx).abs();
                let tri = minkowski_norm_with(b, &sum, &o.lp)? - nx - ny;
                worst = worst.max(hom).max(tri);
            }
        }
        Ok((worst <= 1e-8, worst, count * 2))
    });
    bat.run("polytope/polar_duality", "max <x,y> - |x|_P h_P(y)", || {
        let mut worst = f64::NEG_INFINITY;
        for (i, b) in bodies.iter().enumerate() {
            let b = b.as_ref().map_err(Clone::clone)?;
            let pts = points(i + 1000, b.n, 8);
            for w in pts.chunks_exact(2) {
                let gap = dot(&w[0], &w[1]) - minkowski_norm_with(b, &w[0], &o.lp)? * support_function(b, &w[1]);
                worst = worst.max(gap);
            }
        }
        Ok((worst <= 1e-8, worst, count * 4))
    });
    bat.run("polytope/basis_enriched_contains_cross", "max norm - l1 norm", || {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..count {
            let n = 2 + i % 4;
            let s = sample(&DistributionSpec::gaussian(n), 3 * n, seed.derive(300).trial(i as u64))?;
            let b = build_basis_enriched(&s);
            for z in points(i + 2000, n, 5) {
                worst = worst.max(minkowski_norm_with(&b, &z, &o.lp)? - norm1(&z));
            }
        }
        Ok((worst <= 1e-9, worst, count * 5))
    });
}

fn operator_checks(o: &VerifyOptions, bat: &mut Battery) {
    let seed = o.seed.derive(4);
    let count = o.pick(10, 50);
    bat.run("operators/submultiplicative", "max relative excess", || {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..count {
            let s = seed.trial(i as u64);
            let n = 2 + i % 3;
            let (x, y, z) = (random_body(s.derive(0), n, 10)?, random_body(s.derive(1), n, 10)?, random_body(s.derive(2), n, 10)?);
            let (t, u) = (random_map(s.derive(3), n)?, random_map(s.derive(4), n)?);
            let ut = u.compose(&t)?;
            let lhs = op_norm_polytopes(&ut, &x, &z)?;
            let rhs = op_norm_polytopes(&t, &x, &y)? * op_norm_polytopes(&u, &y, &z)?;
            worst = worst.max(lhs / rhs - 1.0);
        }
        Ok((worst <= 1e-8, worst, count))
    });
    bat.run("operators/identity_norm", "max |norm(I) - 1|", || {
        let mut worst = 0.0f64;
        for i in 0..count {
            let n = 2 + i % 4;
            let x = random_body(seed.derive(100).trial(i as u64), n, 3 * n)?;
            worst = worst.max((op_norm_polytopes(&LinearMap::identity(n), &x, &x)? - 1.0).abs());
        }
        Ok((worst <= 1e-9, worst, count))
    });
    bat.run("operators/inradius_sandwich", "max relative violation", || {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..count {
            let s = seed.derive(200).trial(i as u64);
            let n = 2 + i % 2;
            let x = random_body(s.derive(0), n, 10)?;
            let rep = inradius_estimate(&x, 200, 50, s.derive(1))?;
            let k = rep.circumradius / rep.inradius;
            let t = random_map(s.derive(2), n)?;
            let v = op_norm_polytopes(&t, &x, &x)?;
            let op = t.op_norm();
            worst = worst.max(op / k / v - 1.0).max(v / (k * op) - 1.0);
        }
        Ok((worst <= 1e-8, worst, count))
    });
    bat.run("operators/mixing_argmin", "max margin discrepancy", || {
        let mut worst = 0.0f64;
        for i in 0..count {
            let s = seed.derive(300).trial(i as u64);
            let n = 3 + i % 5;
            let k = 1 + i % (n / 2);
            let mut rng = s.rng();
            let t = random_map(s.derive(1), n)?;
            let rows: Vec<Vec<f64>> = (0..k).map(|_| sphere_direction(&mut rng, n)).collect();
            let e = Subspace::span(n, &rows)?;
            let margin = mixing_check(&t, &e, 0.0)?.achieved_margin;
            let c = e.complement();
            let restricted = &c * &t.matrix * e.basis.transpose();
            let svd = restricted.clone().svd(true, true);
            let (idx, smin) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (j, &v)| if v < a.1 { (j, v) } else { a });
            let v_t = svd.v_t.as_ref().ok_or_else(|| GlabError::NumericalFailure("svd".into()))?;
            let w = v_t.row(idx).transpose();
            let at_vector = (&restricted * w).norm();
            let mut sampled = f64::INFINITY;
            for _ in 0..1000 {
                let a = nalgebra::DVector::from_vec(sphere_direction(&mut rng, k));
                sampled = sampled.min((&restricted * a).norm());
            }
            worst = worst.max((at_vector - margin).abs()).max((smin - margin).abs()).max(margin - sampled);
        }
        Ok((worst <= 1e-6, worst, count))
    });
    bat.run("operators/det_normalize_idempotent", "max entry change", || {
        let mut worst = 0.0f64;
        for i in 0..count {
            let t = random_map(seed.derive(400).trial(i as u64), 2 + i % 5)?;
            let a = det_normalize(&t)?;
            let b = det_normalize(&a)?;
            worst = worst.max((&a.matrix - &b.matrix).amax());
        }
        Ok((worst <= 1e-12, worst, count))
    });
}

/// Largest miss count whose binomial tail at 5% is still above 1%.
fn allowed_misses(cases: usize) -> Result<usize> {
    let b = Binomial::new(0.05, cases as u64).map_err(|e| GlabError::NumericalFailure(e.to_string()))?;
    Ok((0..=cases).find(|&k| 1.0 - b.cdf(k as u64) <= 0.01).unwrap_or(cases))
}

fn estimator_checks(o: &VerifyOptions, bat: &mut Battery) {
    let seed = o.seed.derive(5);
    bat.run("estimators/volume_mc_vs_exact", "interval misses", || {
        let count = o.pick(10, 50);
        let trials = o.pick(20_000, 100_000);
        let mut misses = 0;
        for i in 0..count {
            let b = random_body(seed.trial(i as u64), 2 + i % 2, 8)?;
            let exact = volume_exact_lowdim(&b)?;
            let est = volume_mc(Body::V(&b), b.circumradius(), trials, seed.derive(1).trial(i as u64))?;
            misses += usize::from(!est.contains(exact));
        }
        Ok((misses <= allowed_misses(count)?, misses as f64, count))
    });
    bat.run("estimators/worker_count_invariance", "mismatched reports", || {
        let b = random_body(seed.derive(2), 3, 10)?;
        let trials = o.pick(20_000, 200_000);
        let s = seed.derive(3);
        let a = in_pool(1, || volume_mc(Body::V(&b), b.circumradius(), trials, s))??;
        let c = in_pool(4, || volume_mc(Body::V(&b), b.circumradius(), trials, s))??;
        Ok((a == c, f64::from(u8::from(a != c)), 1))
    });
    bat.run("estimators/pi1_ordering", "max lower - upper", || {
        let count = o.pick(2, 6);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..count {
            let n = 3 + i % 2;
            let s = sample(&DistributionSpec::gaussian(n), o.pick(60, 200), seed.derive(4).trial(i as u64))?;
            let b = pi1_bounds(&s, 100, 100, seed.derive(5).trial(i as u64))?;
            worst = worst.max(b.lower - b.upper);
        }
        Ok((worst <= 0.0, worst, count))
    });
    bat.run("estimators/volume_radius_band", "max/min normalized ratio", || {
        let m_list: Vec<usize> = match o.level {
            VerifyLevel::Quick => vec![8, 32, 128, 512],
            VerifyLevel::Full => vec![8, 16, 32, 64, 128, 256, 512],
        };
        let rows = volume_radius_profile(&DistributionSpec::gaussian(4), &m_list, o.pick(5000, 20_000), seed.derive(6))?;
        let spread = profile_spread(&rows);
        Ok((spread <= 3.0, spread, rows.len()))
    });
}

fn planar_pair(seed: RngSeed) -> Result<(VPolytope, VPolytope)> {
    let spec = DistributionSpec::gaussian(2);
    let mut k = 0;
    loop {
        let x = PolytopeModel::BasisEnriched.build(&spec, 4, seed.derive(2 * k))?;
        let y = PolytopeModel::BasisEnriched.build(&spec, 4, seed.derive(2 * k + 1))?;
        if x.full_dimensional && y.full_dimensional {
            return Ok((x, y));
        }
        k += 1;
    }
}

fn bm_checks(o: &VerifyOptions, bat: &mut Battery) {
    let seed = o.seed.derive(6);
    let count = o.pick(2, 8);
    let pairs: Vec<Result<(VPolytope, VPolytope)>> = (0..count).map(|i| planar_pair(seed.trial(i as u64))).collect();
    let search = |x: &VPolytope, y: &VPolytope, i: usize| bm_upper_search(x, y, 6, 400, seed.derive(10).trial(i as u64));
    let uppers: Vec<Result<f64>> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| p.as_ref().map_err(Clone::clone).and_then(|(x, y)| Ok(search(x, y, i)?.upper)))
        .collect();
    bat.run("bm/similarity_invariance", "max |upper(SX,SY) - upper(X,Y)|", || {
        let mut worst = 0.0f64;
        for (i, (p, u)) in pairs.iter().zip(&uppers).enumerate() {
            let (x, y) = p.as_ref().map_err(Clone::clone)?;
            let u = u.as_ref().map_err(Clone::clone)?;
            let s = random_map(seed.derive(20).trial(i as u64), 2)?;
            let v = search(&x.mapped(&s.matrix)?, &y.mapped(&s.matrix)?, i)?.upper;
            worst = worst.max((v - u).abs());
        }
        Ok((worst <= 1e-6, worst, count))
    });
    bat.run("bm/certified_coupling", "max lower - upper", || {
        let mut worst = f64::NEG_INFINITY;
        for (i, (p, u)) in pairs.iter().zip(&uppers).enumerate() {
            let (x, y) = p.as_ref().map_err(Clone::clone)?;
            let u = *u.as_ref().map_err(Clone::clone)?;
            let opts = CertifyOptions { upper_hint: Some(u), ..CertifyOptions::default() };
            let l = bm_lower_certified(x, y, &opts, seed.derive(30).trial(i as u64))?.lower;
            worst = worst.max(l - u);
        }
        Ok((worst <= 1e-6, worst, count))
    });
    bat.run("bm/symmetry", "max relative difference", || {
        let mut worst = 0.0f64;
        for (i, (p, u)) in pairs.iter().zip(&uppers).enumerate() {
            let (x, y) = p.as_ref().map_err(Clone::clone)?;
            let u = u.as_ref().map_err(Clone::clone)?;
            let v = search(y, x, i)?.upper;
            worst = worst.max((v - u).abs() / u);
        }
        Ok((worst <= 0.05, worst, count))
    });
    bat.run("bm/polar_duality", "max relative difference", || {
        let mut worst = 0.0f64;
        for (i, (p, u)) in pairs.iter().zip(&uppers).enumerate() {
            let (x, y) = p.as_ref().map_err(Clone::clone)?;
            let u = u.as_ref().map_err(Clone::clone)?;
            let v = search(&polar_vertices(x)?, &polar_vertices(y)?, i)?.upper;
            worst = worst.max((v - u).abs() / u);
        }
        Ok((worst <= 0.05, worst, count))
    });
    bat.run("bm/gluskin_reproducible", "mismatched runs", || {
        let mut c = GluskinConfig::new(PolytopeModel::BasisEnriched, 2, 4, o.pick(2, 6), seed.derive(40));
        c.refine_budget = 20_000;
        let a = gluskin_pair_experiment(&c)?.to_csv();
        let b = in_pool(2, || gluskin_pair_experiment(&c))??.to_csv();
        Ok((a == b, f64::from(u8::from(a != b)), 1))
    });
}

fn oracle_checks(o: &VerifyOptions, bat: &mut Battery) {
    let seed = o.seed.derive(7);
    let count = o.pick(10, 50);
    let dirs = o.pick(2000, 20_000);
    bat.run("oracles/deterministic", "mismatched repeats", || {
        let x = random_body(seed.derive(1), 2, 6)?;
        let y = random_body(seed.derive(2), 2, 6)?;
        let t = random_map(seed.derive(3), 2)?;
        let a = opnorm_sphere_oracle(&t, &x, &y, 500, seed.derive(4))?;
        let b = opnorm_sphere_oracle(&t, &x, &y, 500, seed.derive(4))?;
        let g1 = bm_grid_oracle_2d(&x, &y, 16)?;
        let g2 = bm_grid_oracle_2d(&x, &y, 16)?;
        let bad = usize::from(a != b) + usize::from(g1 != g2);
        Ok((bad == 0, bad as f64, 2))
    });
    bat.run("oracles/sphere_below_exact", "max oracle / exact - 1", || {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..count {
            let s = seed.derive(10).trial(i as u64);
            let n = 2 + i % 2;
            let (a, b) = (random_body(s.derive(0), n, 8)?, random_body(s.derive(1), n, 8)?);
            let t = random_map(s.derive(2), n)?;
            let lower = opnorm_sphere_oracle(&t, &a, &b, dirs, s.derive(3))?.value;
            worst = worst.max(lower / op_norm_polytopes(&t, &a, &b)? - 1.0);
        }
        Ok((worst <= 1e-9, worst, count))
    });
}

fn experiment_checks(o: &VerifyOptions, bat: &mut Battery) {
    bat.run("experiments/replay", "mismatched replays", || {
        let c = ExperimentConfig::new(
            ExperimentName::RadiusBand,
            serde_json::json!({"n": 4, "m": o.pick(2000, 20_000)}),
            o.seed.derive(8),
        );
        let r = run_experiment(&c)?;
        let ok = replay(&r)?;
        Ok((ok, f64::from(u8::from(!ok)), 1))
    });
    bat.run("experiments/name_table_total", "unmapped names", || {
        let mut owners = std::collections::BTreeSet::new();
        let mut bad = 0;
        for name in ExperimentName::ALL {
            let parsed: ExperimentName = serde_json::from_value(serde_json::json!(name.as_str()))?;
            let c = ExperimentConfig::new(name, runs::minimal_parameters(name), o.seed);
            bad += usize::from(parsed != name || !owners.insert(name.owner()) || c.validate().is_err());
        }
        Ok((bad == 0, bad as f64, ExperimentName::ALL.len()))
    });
}

/// Runs the invariant battery of every module and summarizes it; nothing is timed, so equal
/// options give byte-identical summaries.
pub fn verify_suite(options: &VerifyOptions) -> VerifySummary {
    let mut bat = Battery { checks: Vec::new() };
    lp_checks(options, &mut bat);
    sampling_checks(options, &mut bat);
    polytope_checks(options, &mut bat);
    operator_checks(options, &mut bat);
    estimator_checks(options, &mut bat);
    bm_checks(options, &mut bat);
    oracle_checks(options, &mut bat);
    experiment_checks(options, &mut bat);
    let failed = bat.checks.iter().filter(|c| !c.pass).count();
    VerifySummary {
        schema_version: SCHEMA_VERSION,
        level: options.level,
        seed: options.seed,
        passed: bat.checks.len() - failed,
        failed,
        pass: failed == 0,
        checks: bat.checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::VarBound;

    #[test]
    fn allowed_misses_grow_with_cases() {
        assert_eq!(allowed_misses(10).unwrap(), 3);
        assert!(allowed_misses(50).unwrap() >= 6);
    }

    #[test]
    fn lp_fixtures_are_bounded_and_feasible() {
        for i in 0..20 {
            let p = random_lp(RngSeed::new(i), 8);
            assert!(lp_vertex_oracle(&p).unwrap().value.is_finite());
        }
    }

    #[test]
    fn loose_lp_tolerance_breaks_oracle_agreement() {
        let mut o = VerifyOptions::new(VerifyLevel::Quick, RngSeed::new(1));
        o.lp.optimality_tol = 1e3;
        let mut bat = Battery { checks: Vec::new() };
        lp_checks(&o, &mut bat);
        assert!(!bat.checks[0].pass);
        let mut fine = Battery { checks: Vec::new() };
        lp_checks(&VerifyOptions::new(VerifyLevel::Quick, RngSeed::new(1)), &mut fine);
        assert!(fine.checks.iter().all(|c| c.pass), "{:?}", fine.checks);
    }

    #[test]
    fn row_sum_lp_matches_oracle() {
        let mut p = LpProblem::new(vec![-1.0, -1.0]);
        p.bounds = vec![VarBound::Lower(0.0); 2];
        p.add_le(vec![1.0, 2.0], 2.0);
        p.add_le(vec![2.0, 1.0], 2.0);
        let s = solve_lp_with(&p, &LpOptions::default()).unwrap();
        assert!((s.objective_value - lp_vertex_oracle(&p).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn checklist_lists_every_check() {
        let s = VerifySummary {
            schema_version: 1,
            level: VerifyLevel::Quick,
            seed: RngSeed::new(0),
            checks: vec![CheckOutcome { key: "a/b".into(), pass: false, worst: 1.0, measure: "x".into(), cases: 2 }],
            passed: 0,
            failed: 1,
            pass: false,
        };
        assert!(s.checklist().contains("[FAIL] a/b"));
    }
}
