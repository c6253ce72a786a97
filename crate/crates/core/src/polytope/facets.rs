//! Facet enumeration for symmetric polytopes in dimensions 1 to 3.
//!
//! A facet is stored as the vector `a` with `<a, y> = 1` on the facet, so that the gauge is
//! `max_j |<a_j, y>|`. Both members of each `±a` pair are kept.

use crate::error::{GlabError, Result};
use crate::linalg::{dot, norm2};

/// Largest generator count accepted by the brute-force 3-d enumeration.
pub const MAX_FACET_GENERATORS: usize = 400;

/// The symmetric point cloud `{±g_j}`, with duplicates and zeros removed.
fn symmetric_points(n: usize, gens: &[f64]) -> Vec<Vec<f64>> {
    let scale = gens.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for g in gens.chunks_exact(n) {
        if norm2(g) <= 1e-14 * scale.max(1e-300) {
            continue;
        }
        for sign in [1.0, -1.0] {
            let p: Vec<f64> = g.iter().map(|x| sign * x).collect();
            if !pts.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-14 * scale)) {
                pts.push(p);
            }
        }
    }
    pts
}

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull of planar points, collinear points dropped.
pub fn hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts.iter().fold(0.0f64, |a, p| a.max(p[0].abs()).max(p[1].abs()));
    let eps = 1e-13 * scale * scale;
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoelace area of a counter-clockwise polygon.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let k = poly.len();
    (0..k)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % k]);
            p[0] * q[1] - p[1] * q[0]
        })
        .sum::<f64>()
        / 2.0
}

/// Facet vectors and the face vertex sets of a full-dimensional symmetric polytope.
#[derive(Debug, Clone)]
pub struct FacetList {
    pub n: usize,
    /// Row-major, one facet vector `a` per row.
    pub normals: Vec<f64>,
    pub volume: f64,
}

impl FacetList {
    pub fn count(&self) -> usize {
        self.normals.len() / self.n
    }

    pub fn gauge(&self, z: &[f64]) -> f64 {
        self.normals.chunks_exact(self.n).fold(0.0f64, |a, u| a.max(dot(u, z).abs()))
    }

    /// Radius of the largest centred Euclidean ball inside the body.
    pub fn inradius(&self) -> f64 {
        self.normals.chunks_exact(self.n).map(|u| 1.0 / norm2(u)).fold(f64::INFINITY, f64::min)
    }
}

pub fn enumerate_facets(n: usize, gens: &[f64]) -> Result<FacetList> {
    let k = gens.len() / n.max(1);
    match n {
        1 => {
            let r = gens.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if r == 0.0 {
                return Err(GlabError::UnboundedPolar);
            }
            Ok(FacetList { n, normals: vec![1.0 / r, -1.0 / r], volume: 2.0 * r })
        }
        2 => {
            let pts: Vec<[f64; 2]> =
                symmetric_points(2, gens).into_iter().map(|p| [p[0], p[1]]).collect();
            let hull = hull_2d(&pts);
            if hull.len() < 3 {
                return Err(GlabError::UnboundedPolar);
            }
            let area = polygon_area(&hull);
            let scale = hull.iter().fold(0.0f64, |a, p| a.max(p[0].hypot(p[1])));
            if area <= 1e-14 * scale * scale {
                return Err(GlabError::UnboundedPolar);
            }
            let mut normals = Vec::with_capacity(2 * hull.len());
            for i in 0..hull.len() {
                let (p, q) = (hull[i], hull[(i + 1) % hull.len()]);
                let nrm = [q[1] - p[1], p[0] - q[0]];
                let c = nrm[0] * p[0] + nrm[1] * p[1];
                normals.push(nrm[0] / c);
                normals.push(nrm[1] / c);
            }
            Ok(FacetList { n, normals, volume: area })
        }
        3 => {
            if k > MAX_FACET_GENERATORS {
                return Err(GlabError::UnsupportedDimension(
                    n,
                    format!("facet enumeration limited to {MAX_FACET_GENERATORS} generators"),
                ));
            }
            facets_3d(&symmetric_points(3, gens))
        }
        _ => Err(GlabError::UnsupportedDimension(n, "facet enumeration needs n <= 3".into())),
    }
}

fn sub3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn facets_3d(pts: &[Vec<f64>]) -> Result<FacetList> {
    let k = pts.len();
    let scale = pts.iter().fold(0.0f64, |a, p| a.max(norm2(p)));
    if k < 6 || scale == 0.0 {
        return Err(GlabError::UnboundedPolar);
    }
    let mut planes: Vec<[f64; 3]> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let e1 = sub3(&pts[j], &pts[i]);
            for l in j + 1..k {
                let e2 = sub3(&pts[l], &pts[i]);
                let mut nrm = cross3(&e1, &e2);
                let len = norm2(&nrm);
                if len <= 1e-12 * scale * scale {
                    continue;
                }
                let mut c = dot(&nrm, &pts[i]);
                if c.abs() <= 1e-12 * len * scale {
                    continue;
                }
                if c < 0.0 {
                    nrm = [-nrm[0], -nrm[1], -nrm[2]];
                    c = -c;
                }
                let tol = 1e-10 * len * scale;
                if pts.iter().all(|p| dot(&nrm, p) <= c + tol) {
                    let a = [nrm[0] / c, nrm[1] / c, nrm[2] / c];
                    let an = norm2(&a);
                    if !planes.iter().any(|b| norm2(&sub3(b, &a)) <= 1e-9 * an) {
                        planes.push(a);
                    }
                }
            }
        }
    }
    if planes.len() < 4 {
        return Err(GlabError::UnboundedPolar);
    }
    let mut volume = 0.0;
    for a in &planes {
        let an = norm2(a);
        let unit = [a[0] / an, a[1] / an, a[2] / an];
        // orthonormal frame of the facet plane
        let helper = if unit[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let u = cross3(&unit, &helper);
        let un = norm2(&u);
        let u = [u[0] / un, u[1] / un, u[2] / un];
        let v = cross3(&unit, &u);
        let face: Vec<[f64; 2]> = pts
            .iter()
            .filter(|p| dot(a, p) >= 1.0 - 1e-9)
            .map(|p| [dot(&u, p), dot(&v, p)])
            .collect();
        let hull = hull_2d(&face);
        if hull.len() >= 3 {
            volume += polygon_area(&hull).abs() / an / 3.0;
        }
    }
    Ok(FacetList { n: 3, normals: planes.concat(), volume })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_polytope_2d() {
        let f = enumerate_facets(2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.count(), 4);
        assert!((f.volume - 2.0).abs() < 1e-15);
        assert!((f.inradius() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((f.gauge(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cube_and_octahedron_3d() {
        let cube = enumerate_facets(3, &[1., 1., 1., 1., 1., -1., 1., -1., 1., 1., -1., -1.]).unwrap();
        assert_eq!(cube.count(), 6);
        assert!((cube.volume - 8.0).abs() < 1e-12);
        let oct = enumerate_facets(3, &[1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        assert_eq!(oct.count(), 8);
        assert!((oct.volume - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn flat_bodies_are_rejected() {
        assert!(enumerate_facets(2, &[1.0, 1.0, 2.0, 2.0]).is_err());
        assert!(enumerate_facets(3, &[1., 0., 0., 0., 1., 0.]).is_err());
    }
}
