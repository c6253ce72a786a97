use serde::{Deserialize, Serialize};

use crate::error::{invalid, GlabError, Result};
use crate::linalg::{dot, norm2, random_unit};
use crate::polytope::build_pure;
use crate::rng::RngSeed;
use crate::sampling::SampleSet;

/// Largest number of `(n-1)`-subsets enumerated for the exact minimum.
const EXACT_SUBSET_CAP: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// Minimum over the unit sphere of `f(y) = (1/m) Σ |<y, x_j>|`.
    pub c1_hat: f64,
    /// Maximum of `f` over the unit sphere found by ascent.
    pub c2_hat: f64,
    pub directions: usize,
    /// True when `c1_hat` came from the facet enumeration of the zonotope `{f <= 1}°`.
    pub c1_exact: bool,
}

fn mean_abs(samples: &SampleSet, y: &[f64]) -> f64 {
    samples.rows().map(|x| dot(x, y).abs()).sum::<f64>() / samples.m as f64
}

/// `(1/m) Σ sign(<y, x_j>) x_j`, a subgradient of `f` at `y`.
fn subgradient(samples: &SampleSet, y: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; samples.n];
    for x in samples.rows() {
        let s = dot(x, y);
        let s = if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        };
        g.iter_mut().zip(x).for_each(|(a, b)| *a += s * b);
    }
    g.iter_mut().for_each(|a| *a /= samples.m as f64);
    g
}

fn binomial(n: u64, k: u64) -> u64 {
    let mut r: u64 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Unit normal to the span of `n-1` vectors, or `None` if they are dependent.
fn normal_of(rows: &[&[f64]], n: usize) -> Option<Vec<f64>> {
    // Gram-Schmidt on the rows, then on the standard basis for the leftover direction
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for r in rows {
        let mut v = r.to_vec();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(a, q)| *a -= c * q);
        }
        let len = norm2(&v);
        if len <= 1e-10 * norm2(r).max(1e-300) {
            return None;
        }
        basis.push(v.into_iter().map(|a| a / len).collect());
    }
    let mut best: Option<Vec<f64>> = None;
    let mut best_len = 0.0;
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(a, q)| *a -= c * q);
        }
        let len = norm2(&v);
        if len > best_len {
            best_len = len;
            best = Some(v.into_iter().map(|a| a / len).collect());
        }
    }
    best
}

/// Exact minimum of `f` on the sphere: attained at a facet normal of the zonotope, which is
/// orthogonal to some `n-1` of the points.
fn exact_c1(samples: &SampleSet) -> Option<f64> {
    let (n, m) = (samples.n, samples.m);
    if n == 1 {
        return Some(mean_abs(samples, &[1.0]));
    }
    if m < n - 1 || binomial(m as u64, (n - 1) as u64) > EXACT_SUBSET_CAP {
        return None;
    }
    let mut idx: Vec<usize> = (0..n - 1).collect();
    let mut best = f64::INFINITY;
    loop {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| samples.row(i)).collect();
        if let Some(u) = normal_of(&rows, n) {
            best = best.min(mean_abs(samples, &u));
        }
        // next combination
        let mut i = n - 1;
        loop {
            if i == 0 {
                return best.is_finite().then_some(best);
            }
            i -= 1;
            if idx[i] < m - (n - 1) + i {
                idx[i] += 1;
                for j in i + 1..n - 1 {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `c1_hat` and `c2_hat` of `y ↦ (1/m) Σ |<y, x_j>|` on the unit sphere.
///
/// `c1_hat` is exact when the subset enumeration is small enough; otherwise it is the best of
/// `directions` projected-subgradient descents (an upper bound of the true minimum).
pub fn concentration_constants(samples: &SampleSet, directions: usize, descent_steps: usize, seed: RngSeed) -> Result<ConcentrationReport> {
    if samples.m == 0 || directions == 0 {
        return invalid("need m >= 1 and at least one start direction");
    }
    let n = samples.n;
    let mut rng = seed.rng();
    let exact = exact_c1(samples);
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for _ in 0..directions {
        let start = random_unit(&mut rng, n);
        // descent for the minimum
        let mut y = start.clone();
        let mut val = mean_abs(samples, &y);
        let mut best = val;
        for step in 0..descent_steps {
            let g = subgradient(samples, &y);
            let radial = dot(&g, &y);
            let tangent: Vec<f64> = g.iter().zip(&y).map(|(a, b)| a - radial * b).collect();
            let tn = norm2(&tangent);
            if tn < 1e-15 {
                break;
            }
            let eta = 0.5 / (1.0 + step as f64).sqrt();
            let mut cand: Vec<f64> = y.iter().zip(&tangent).map(|(a, t)| a - eta * t / tn).collect();
            let len = norm2(&cand);
            cand.iter_mut().for_each(|a| *a /= len);
            y = cand;
            val = mean_abs(samples, &y);
            best = best.min(val);
        }
        c1 = c1.min(best);
        // fixed-point ascent for the maximum: y <- normalise(subgradient)
        let mut y = start;
        let mut val = mean_abs(samples, &y);
        for _ in 0..descent_steps.max(10) {
            let g = subgradient(samples, &y);
            let len = norm2(&g);
            if len < 1e-15 {
                break;
            }
            let cand: Vec<f64> = g.iter().map(|a| a / len).collect();
            let v = mean_abs(samples, &cand);
            if v <= val * (1.0 + 1e-15) {
                break;
            }
            y = cand;
            val = v;
        }
        c2 = c2.max(val);
    }
    let (c1, c1_exact) = match exact {
        Some(v) => (v, true),
        None => (c1, false),
    };
    Ok(ConcentrationReport { c1_hat: c1, c2_hat: c2.max(c1), directions, c1_exact })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pi1Bounds {
    pub lower: f64,
    pub upper: f64,
    pub concentration: ConcentrationReport,
}

/// Bracket for `π₁(I_n : X_{B_m}^* → ℓ₂^n)`: `upper = 1/c1_hat`,
/// `lower = ((1/m) Σ |x_j|) / (c2_hat R)` with `R` the circumradius of `B_m`.
pub fn pi1_bounds(samples: &SampleSet, directions: usize, descent_steps: usize, seed: RngSeed) -> Result<Pi1Bounds> {
    let b = build_pure(samples);
    if !b.full_dimensional {
        return Err(GlabError::DegenerateSample("B_m is not full-dimensional".into()));
    }
    let conc = concentration_constants(samples, directions, descent_steps, seed)?;
    if !(conc.c1_hat > 1e-12) {
        return Err(GlabError::DegenerateSample(format!("c1_hat = {:e}", conc.c1_hat)));
    }
    let mean_len = samples.rows().map(norm2).sum::<f64>() / samples.m as f64;
    let r = b.circumradius();
    Ok(Pi1Bounds { lower: mean_len / (conc.c2_hat * r), upper: 1.0 / conc.c1_hat, concentration: conc })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_basis(n: usize) -> SampleSet {
        let mut rows = Vec::new();
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; n];
                r[i] = s;
                rows.push(r);
            }
        }
        SampleSet::from_rows(&rows, "signed_basis", RngSeed::new(0)).unwrap()
    }

    #[test]
    fn signed_basis_constants() {
        // f(y) = 2|y|_1 / (2n) = |y|_1 / n: minimum 1/n at e_1, maximum 1/√n
        let n = 3;
        let r = concentration_constants(&signed_basis(n), 16, 200, RngSeed::new(1)).unwrap();
        assert!(r.c1_exact);
        assert!((r.c1_hat - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.c2_hat - 1.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn scaling_doubles_constants() {
        let s = signed_basis(2);
        let a = concentration_constants(&s, 8, 100, RngSeed::new(2)).unwrap();
        let b = concentration_constants(&s.scaled(2.0), 8, 100, RngSeed::new(2)).unwrap();
        assert!((b.c1_hat - 2.0 * a.c1_hat).abs() < 1e-12);
        assert!((b.c2_hat - 2.0 * a.c2_hat).abs() < 1e-9);
    }

    #[test]
    fn collinear_samples_are_degenerate() {
        let s = SampleSet::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]], "line", RngSeed::new(0)).unwrap();
        assert!(matches!(pi1_bounds(&s, 8, 50, RngSeed::new(0)), Err(GlabError::DegenerateSample(_))));
    }
}
