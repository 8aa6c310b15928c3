//! Star-shaped hypersurfaces given by gauge functions.
//!
//! A surface is the level set Sigma = j^{-1}(1) of a positively homogeneous
//! degree-1 gauge j : R^{2n} -> [0, inf). All dynamics downstream use the
//! quadratic Hamiltonian F = j^2 / 2, whose gradient restricted to Sigma is
//! exactly the outward normal with the normalization N(y) . y = 1, so the
//! Hamiltonian flow of F on Sigma is the characteristic flow itself.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Default on-surface tolerance |j(y) - 1|.
pub const ON_SURFACE_TOL: f64 = 1e-9;

/// Documented minimum sampling budget for [`SurfaceModel::metrics`].
pub const MIN_METRICS_BUDGET: usize = 128;

/// Even quartic polynomial on the unit sphere, p(u) = sum c_ab u_a^2 u_b^2.
///
/// Coefficients are listed over unordered pairs a <= b in lexicographic
/// order; the list may be shorter than the full pair count (missing entries
/// are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePolynomial {
    dim: usize,
    /// Symmetric coefficient matrix C with p = sum_{a,b} C_ab x_a^2 x_b^2.
    coeff: DMatrix<f64>,
}

impl SpherePolynomial {
    pub fn from_pair_coeffs(dim: usize, coeffs: &[f64]) -> Result<Self> {
        let pairs = dim * (dim + 1) / 2;
        if coeffs.len() > pairs {
            return Err(Error::Config(format!(
                "perturbation coeffs has {} entries, at most {} allowed for dimension {}",
                coeffs.len(),
                pairs,
                dim
            )));
        }
        let mut coeff = DMatrix::zeros(dim, dim);
        let mut idx = 0;
        'outer: for a in 0..dim {
            for b in a..dim {
                if idx >= coeffs.len() {
                    break 'outer;
                }
                if a == b {
                    coeff[(a, a)] = coeffs[idx];
                } else {
                    coeff[(a, b)] = coeffs[idx] / 2.0;
                    coeff[(b, a)] = coeffs[idx] / 2.0;
                }
                idx += 1;
            }
        }
        Ok(Self { dim, coeff })
    }

    /// Homogeneous quartic P(x) = sum C_ab x_a^2 x_b^2.
    fn quartic(&self, x: &DVector<f64>) -> f64 {
        let sq = x.map(|v| v * v);
        (&self.coeff * &sq).dot(&sq)
    }

    fn quartic_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let sq = x.map(|v| v * v);
        let w = &self.coeff * &sq;
        DVector::from_fn(self.dim, |i, _| 4.0 * x[i] * w[i])
    }

    fn quartic_hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let sq = x.map(|v| v * v);
        let w = &self.coeff * &sq;
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let mut h = 8.0 * self.coeff[(i, j)] * x[i] * x[j];
            if i == j {
                h += 4.0 * w[i];
            }
            h
        })
    }

    /// p(x/|x|) as the degree-0 homogeneous extension q(x) = P(x)/|x|^4.
    pub fn eval_ray(&self, x: &DVector<f64>) -> f64 {
        let s = x.norm_squared();
        self.quartic(x) / (s * s)
    }

    fn ray_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = x.norm_squared();
        let inv4 = 1.0 / (s * s);
        let p = self.quartic(x);
        self.quartic_grad(x) * inv4 - x * (4.0 * p * inv4 / s)
    }

    fn ray_hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = x.norm_squared();
        let inv4 = 1.0 / (s * s);
        let inv6 = inv4 / s;
        let inv8 = inv6 / s;
        let p = self.quartic(x);
        let gp = self.quartic_grad(x);
        let mut h = self.quartic_hess(x) * inv4;
        h -= (&gp * x.transpose() + x * gp.transpose()) * (4.0 * inv6);
        h -= DMatrix::identity(self.dim, self.dim) * (4.0 * p * inv6);
        h += x * x.transpose() * (24.0 * p * inv8);
        h
    }

    /// Extremes over a deterministic sphere sample, (min, max).
    fn sampled_range(&self, samples: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for u in sphere_points(samples, self.dim, 0) {
            let v = self.eval_ray(&u);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Surface family.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceKind {
    /// j(x)^2 = sum_k (x_k^2 + x_{n+k}^2) / r_k^2; axis r_k is shared by the
    /// conjugate pair (x_k, x_{n+k}).
    Ellipsoid { axes: Vec<f64> },
    /// j(x) = j0(x) * (1 + eps * p(x/|x|)) over a base ellipsoid gauge j0.
    PerturbedGauge {
        axes: Vec<f64>,
        epsilon: f64,
        poly: SpherePolynomial,
    },
}

/// A compact star-shaped hypersurface in R^{2n}.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    dim_n: usize,
    kind: SurfaceKind,
    /// Diagonal of the base quadratic form, 1/r_k^2 repeated per pair.
    diag: DVector<f64>,
}

/// Estimated inner radius, outer radius and minimal support distance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SurfaceMetrics {
    pub inner_radius_r: f64,
    pub outer_radius_big_r: f64,
    pub support_dist_d: f64,
}

impl SurfaceMetrics {
    /// Pinching predicate R^2 < 2 d^2.
    pub fn pinched(&self) -> bool {
        self.outer_radius_big_r.powi(2) < 2.0 * self.support_dist_d.powi(2)
    }
}

fn pair_diag(n: usize, axes: &[f64]) -> DVector<f64> {
    let mut diag = DVector::zeros(2 * n);
    for k in 0..n {
        let inv = 1.0 / (axes[k] * axes[k]);
        diag[k] = inv;
        diag[n + k] = inv;
    }
    diag
}

impl SurfaceModel {
    pub fn ellipsoid(axes: &[f64]) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("ellipsoid needs at least one axis".into()));
        }
        if axes.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::Config("ellipsoid axes must be positive".into()));
        }
        Ok(Self {
            dim_n: axes.len(),
            diag: pair_diag(axes.len(), axes),
            kind: SurfaceKind::Ellipsoid {
                axes: axes.to_vec(),
            },
        })
    }

    pub fn sphere(n: usize, radius: f64) -> Result<Self> {
        Self::ellipsoid(&vec![radius; n])
    }

    /// Builds a perturbed gauge and rejects perturbations that destroy the
    /// gauge (1 + eps * p must stay positive with margin on the sphere).
    pub fn perturbed(axes: &[f64], epsilon: f64, coeffs: &[f64]) -> Result<Self> {
        let base = Self::ellipsoid(axes)?;
        let n = axes.len();
        let poly = SpherePolynomial::from_pair_coeffs(2 * n, coeffs)?;
        let (lo, hi) = poly.sampled_range(4096);
        let margin = (1.0 + epsilon * lo).min(1.0 + epsilon * hi);
        if margin < 0.05 {
            return Err(Error::PerturbationTooLarge { margin });
        }
        Ok(Self {
            dim_n: n,
            diag: base.diag,
            kind: SurfaceKind::PerturbedGauge {
                axes: axes.to_vec(),
                epsilon,
                poly,
            },
        })
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn phase_dim(&self) -> usize {
        2 * self.dim_n
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    fn base_gauge(&self, x: &DVector<f64>) -> f64 {
        let mut q = 0.0;
        for i in 0..x.len() {
            q += self.diag[i] * x[i] * x[i];
        }
        q.sqrt()
    }

    /// Gauge value j(x). j(0) = 0 and j(y) = 1 exactly on the surface.
    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        let j0 = self.base_gauge(x);
        match &self.kind {
            SurfaceKind::Ellipsoid { .. } => j0,
            SurfaceKind::PerturbedGauge { epsilon, poly, .. } => {
                if j0 == 0.0 {
                    0.0
                } else {
                    j0 * (1.0 + epsilon * poly.eval_ray(x))
                }
            }
        }
    }

    /// Gauge gradient; undefined at the origin.
    pub fn gauge_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let j0 = self.base_gauge(x);
        if j0 == 0.0 {
            return Err(Error::OriginEvaluation);
        }
        let grad0 = DVector::from_fn(x.len(), |i, _| self.diag[i] * x[i] / j0);
        match &self.kind {
            SurfaceKind::Ellipsoid { .. } => Ok(grad0),
            SurfaceKind::PerturbedGauge { epsilon, poly, .. } => {
                let g = 1.0 + epsilon * poly.eval_ray(x);
                Ok(grad0 * g + poly.ray_grad(x) * (*epsilon * j0))
            }
        }
    }

    /// Hessian of the gauge j itself (degree -1 homogeneous).
    fn gauge_hess_j(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let j0 = self.base_gauge(x);
        if j0 == 0.0 {
            return Err(Error::OriginEvaluation);
        }
        let dx = DVector::from_fn(x.len(), |i, _| self.diag[i] * x[i]);
        let mut h0 = DMatrix::from_diagonal(&self.diag) / j0;
        h0 -= &dx * dx.transpose() / (j0 * j0 * j0);
        match &self.kind {
            SurfaceKind::Ellipsoid { .. } => Ok(h0),
            SurfaceKind::PerturbedGauge { epsilon, poly, .. } => {
                let g = 1.0 + epsilon * poly.eval_ray(x);
                let grad0 = dx / j0;
                let qg = poly.ray_grad(x);
                let mut h = h0 * g;
                h += (&grad0 * qg.transpose() + &qg * grad0.transpose()) * *epsilon;
                h += poly.ray_hess(x) * (*epsilon * j0);
                Ok(h)
            }
        }
    }

    /// Gradient of the computational Hamiltonian F = j^2/2, i.e. j * grad j.
    /// On the surface this is the outward normal with N(y) . y = 1.
    pub fn hamiltonian_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.gauge_grad(x)? * self.gauge(x))
    }

    /// Hessian of F = j^2/2: grad j grad j^T + j Hess j. Constant diagonal
    /// for ellipsoids.
    pub fn gauge_hess(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match &self.kind {
            SurfaceKind::Ellipsoid { .. } => Ok(DMatrix::from_diagonal(&self.diag)),
            SurfaceKind::PerturbedGauge { .. } => {
                let j = self.gauge(x);
                let grad = self.gauge_grad(x)?;
                Ok(&grad * grad.transpose() + self.gauge_hess_j(x)? * j)
            }
        }
    }

    /// Unit outward normal and support distance at a surface point.
    pub fn normal_and_support(&self, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let defect = (self.gauge(y) - 1.0).abs();
        if defect > ON_SURFACE_TOL * 10.0 {
            return Err(Error::OffSurface {
                defect,
                tol: ON_SURFACE_TOL * 10.0,
            });
        }
        let grad = self.gauge_grad(y)?;
        let norm = grad.norm();
        let normal = grad / norm;
        let support = normal.dot(y);
        if support <= 0.0 {
            return Err(Error::StarShapedness {
                witness: y.iter().cloned().collect(),
                support,
            });
        }
        Ok((normal, support))
    }

    /// Radial projection x -> x / j(x) onto the surface.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        x / self.gauge(x)
    }

    /// Estimates inner radius r, outer radius R and support distance d.
    ///
    /// Ellipsoids use closed forms; otherwise a low-discrepancy sphere sample
    /// of the requested budget is refined by tangential gradient steps. The
    /// result is deterministic for a fixed seed.
    pub fn metrics(&self, budget: usize) -> Result<SurfaceMetrics> {
        self.metrics_seeded(budget, 0)
    }

    pub fn metrics_seeded(&self, budget: usize, seed: u64) -> Result<SurfaceMetrics> {
        if budget < MIN_METRICS_BUDGET {
            return Err(Error::Config(format!(
                "metrics budget {} below documented minimum {}",
                budget, MIN_METRICS_BUDGET
            )));
        }
        if let SurfaceKind::Ellipsoid { axes } = &self.kind {
            let lo = axes.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = axes.iter().cloned().fold(0.0f64, f64::max);
            return Ok(SurfaceMetrics {
                inner_radius_r: lo,
                outer_radius_big_r: hi,
                support_dist_d: lo,
            });
        }

        // On the unit sphere:  |y| = 1/j(u),  d(y) = 1/|grad j(u)| (grad j is
        // homogeneous of degree 0), so all three metrics are extrema of
        // smooth functions of the direction u.
        let dim = self.phase_dim();
        let mut max_j = f64::NEG_INFINITY;
        let mut min_j = f64::INFINITY;
        let mut max_gn = f64::NEG_INFINITY;
        let mut arg_max_j = DVector::zeros(dim);
        let mut arg_min_j = DVector::zeros(dim);
        let mut arg_max_gn = DVector::zeros(dim);
        for u in sphere_points(budget, dim, seed) {
            let j = self.gauge(&u);
            if !(j > 0.0) {
                return Err(Error::StarShapedness {
                    witness: u.iter().cloned().collect(),
                    support: j,
                });
            }
            let gn = self.gauge_grad(&u)?.norm();
            if j > max_j {
                max_j = j;
                arg_max_j = u.clone();
            }
            if j < min_j {
                min_j = j;
                arg_min_j = u.clone();
            }
            if gn > max_gn {
                max_gn = gn;
                arg_max_gn = u;
            }
        }
        let max_j = self.refine_on_sphere(&arg_max_j, 1.0, |s, u| Ok(s.gauge(u)))?;
        let min_j = self.refine_on_sphere(&arg_min_j, -1.0, |s, u| Ok(s.gauge(u)))?;
        let max_gn = self.refine_on_sphere(&arg_max_gn, 1.0, |s, u| Ok(s.gauge_grad(u)?.norm()))?;

        let metrics = SurfaceMetrics {
            inner_radius_r: 1.0 / max_j,
            outer_radius_big_r: 1.0 / min_j,
            support_dist_d: 1.0 / max_gn,
        };
        if metrics.support_dist_d <= 0.0 {
            return Err(Error::StarShapedness {
                witness: arg_max_gn.iter().cloned().collect(),
                support: metrics.support_dist_d,
            });
        }
        Ok(metrics)
    }

    /// Pattern-search refinement of f over the unit sphere from a start
    /// direction; sign +1 maximizes, -1 minimizes.
    fn refine_on_sphere<F>(&self, start: &DVector<f64>, sign: f64, f: F) -> Result<f64>
    where
        F: Fn(&Self, &DVector<f64>) -> Result<f64>,
    {
        let dim = start.len();
        let mut u = start.normalize();
        let mut best = f(self, &u)?;
        let mut step = 0.1;
        while step > 1e-9 {
            let mut improved = false;
            for i in 0..dim {
                for dir in [1.0, -1.0] {
                    let mut cand = u.clone();
                    cand[i] += dir * step;
                    let cand = cand.normalize();
                    let val = f(self, &cand)?;
                    if sign * (val - best) > 0.0 {
                        best = val;
                        u = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok(best)
    }
}

fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * f;
        index /= base;
        f /= base as f64;
    }
    result
}

const HALTON_BASES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Deterministic low-discrepancy points on the unit sphere S^{dim-1}
/// (Halton sequence mapped through Box-Muller, then normalized).
pub fn sphere_points(count: usize, dim: usize, seed: u64) -> Vec<DVector<f64>> {
    assert!(dim <= 2 * HALTON_BASES.len());
    let offset = 17 + (seed % 65_536) as usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let idx = offset + i;
        let mut v = DVector::zeros(dim);
        for pair in 0..dim.div_ceil(2) {
            let u1 = radical_inverse(idx, HALTON_BASES[2 * pair]).max(1e-12);
            let u2 = radical_inverse(idx, HALTON_BASES[2 * pair + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            v[2 * pair] = rad * (2.0 * std::f64::consts::PI * u2).cos();
            if 2 * pair + 1 < dim {
                v[2 * pair + 1] = rad * (2.0 * std::f64::consts::PI * u2).sin();
            }
        }
        if v.norm() < 1e-9 {
            v[0] = 1.0;
        }
        out.push(v.normalize());
    }
    out
}

/// Deterministic low-discrepancy points on the surface itself.
pub fn surface_points(surface: &SurfaceModel, count: usize, seed: u64) -> Vec<DVector<f64>> {
    sphere_points(count, surface.phase_dim(), seed)
        .into_iter()
        .map(|u| surface.project(&u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vec4(a: f64, b: f64, c: f64, d: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c, d])
    }

    fn test_surfaces() -> Vec<SurfaceModel> {
        vec![
            SurfaceModel::sphere(2, 1.0).unwrap(),
            SurfaceModel::ellipsoid(&[1.0, 2.0]).unwrap(),
            SurfaceModel::ellipsoid(&[1.0, 1.1, 1.2]).unwrap(),
            SurfaceModel::perturbed(&[1.0, 1.2], 0.05, &[0.3, -0.2, 0.1, 0.4, -0.3]).unwrap(),
        ]
    }

    #[test]
    fn gauge_of_origin_is_zero() {
        for s in test_surfaces() {
            let zero = DVector::zeros(s.phase_dim());
            assert_eq!(s.gauge(&zero), 0.0);
        }
    }

    #[test]
    fn gauge_on_axis_points() {
        let e = SurfaceModel::ellipsoid(&[1.0, 2.0]).unwrap();
        assert_relative_eq!(e.gauge(&vec4(1.0, 0.0, 0.0, 0.0)), 1.0, epsilon = 1e-14);
        // point with second conjugate pair modulus 2 lies on the surface
        assert_relative_eq!(e.gauge(&vec4(0.0, 2.0, 0.0, 0.0)), 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.gauge(&vec4(0.0, 0.0, 0.0, 2.0)), 1.0, epsilon = 1e-14);
        // closed form: j^2 = x1^2/1 + x2^2/4 at (1,1,0,0)
        let j = e.gauge(&vec4(1.0, 1.0, 0.0, 0.0));
        assert_relative_eq!(j, (1.0 + 0.25f64).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn gradient_at_origin_errors() {
        let e = SurfaceModel::ellipsoid(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            e.gauge_grad(&DVector::zeros(4)),
            Err(Error::OriginEvaluation)
        ));
    }

    #[test]
    fn sphere_gradient_is_radial() {
        let s = SurfaceModel::sphere(2, 1.0).unwrap();
        let y = vec4(0.5, 0.5, 0.5, 0.5);
        let g = s.gauge_grad(&y).unwrap();
        assert_relative_eq!(g, y, epsilon = 1e-12);
    }

    #[test]
    fn ellipsoid_axis_gradient() {
        let e = SurfaceModel::ellipsoid(&[1.0, 2.0]).unwrap();
        let g = e.gauge_grad(&vec4(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(g, vec4(1.0, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_hessian_closed_forms() {
        let s = SurfaceModel::sphere(2, 1.0).unwrap();
        let h = s.gauge_hess(&vec4(0.3, -0.2, 0.9, 0.1)).unwrap();
        assert_relative_eq!(h, DMatrix::identity(4, 4), epsilon = 1e-12);

        let e = SurfaceModel::ellipsoid(&[1.0, 2.0]).unwrap();
        let h = e.gauge_hess(&vec4(0.3, -0.2, 0.9, 0.1)).unwrap();
        let expected =
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25, 1.0, 0.25]));
        assert_relative_eq!(h, expected, epsilon = 1e-12);
    }

    #[test]
    fn hessian_is_symmetric() {
        for s in test_surfaces() {
            let dim = s.phase_dim();
            for u in sphere_points(16, dim, 3) {
                let h = s.gauge_hess(&u).unwrap();
                let defect = (&h - h.transpose())
                    .iter()
                    .fold(0.0f64, |a, x| a.max(x.abs()));
                assert!(defect < 1e-11, "symmetry defect {defect}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for s in test_surfaces() {
            let dim = s.phase_dim();
            for u in sphere_points(8, dim, 7) {
                let g = s.gauge_grad(&u).unwrap();
                let h = 1e-6;
                for i in 0..dim {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let fd = (s.gauge(&up) - s.gauge(&dn)) / (2.0 * h);
                    assert_relative_eq!(g[i], fd, epsilon = 1e-6, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_hessian_matches_finite_differences_of_gradient() {
        for s in test_surfaces() {
            let dim = s.phase_dim();
            for u in sphere_points(6, dim, 11) {
                let hess = s.gauge_hess(&u).unwrap();
                let h = 1e-6;
                for i in 0..dim {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let fd = (s.hamiltonian_grad(&up).unwrap()
                        - s.hamiltonian_grad(&dn).unwrap())
                        / (2.0 * h);
                    for r in 0..dim {
                        assert_relative_eq!(
                            hess[(r, i)],
                            fd[r],
                            epsilon = 1e-6,
                            max_relative = 1e-5
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn normal_and_support_examples() {
        let s = SurfaceModel::sphere(2, 2.0).unwrap();
        let y = vec4(2.0, 0.0, 0.0, 0.0);
        let (_, d) = s.normal_and_support(&y).unwrap();
        assert_relative_eq!(d, 2.0, epsilon = 1e-12);

        // tangent-plane distance at the axis endpoints of Ellipsoid(1, 2)
        let e = SurfaceModel::ellipsoid(&[1.0, 2.0]).unwrap();
        let (_, d_short) = e.normal_and_support(&vec4(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(d_short, 1.0, epsilon = 1e-12);
        let (_, d_long) = e.normal_and_support(&vec4(0.0, 2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(d_long, 2.0, epsilon = 1e-12);

        assert!(matches!(
            e.normal_and_support(&vec4(3.0, 0.0, 0.0, 0.0)),
            Err(Error::OffSurface { .. })
        ));
    }

    #[test]
    fn metrics_closed_forms_and_pinching() {
        let s = SurfaceModel::sphere(2, 2.0).unwrap();
        let m = s.metrics(1000).unwrap();
        assert_eq!(
            (m.inner_radius_r, m.outer_radius_big_r, m.support_dist_d),
            (2.0, 2.0, 2.0)
        );

        let e = SurfaceModel::ellipsoid(&[1.0, 1.2]).unwrap();
        let m = e.metrics(1000).unwrap();
        assert_eq!(
            (m.inner_radius_r, m.outer_radius_big_r, m.support_dist_d),
            (1.0, 1.2, 1.0)
        );
        assert!(m.pinched(), "1.44 < 2");

        let wide = SurfaceModel::ellipsoid(&[1.0, 1.5]).unwrap();
        assert!(!wide.metrics(1000).unwrap().pinched());
    }

    #[test]
    fn metrics_ordering_holds_for_all_surfaces() {
        for s in test_surfaces() {
            let m = s.metrics(2048).unwrap();
            assert!(
                m.support_dist_d <= m.inner_radius_r + 1e-9
                    && m.inner_radius_r <= m.outer_radius_big_r + 1e-12,
                "ordering violated: {m:?}"
            );
        }
    }

    #[test]
    fn perturbed_metrics_match_sampled_truth() {
        let s = SurfaceModel::perturbed(&[1.0, 1.2], 0.04, &[0.5, -0.5, 0.25]).unwrap();
        let m = s.metrics(4096).unwrap();
        // brute-force oracle over a denser independent sample
        let mut min_j = f64::INFINITY;
        let mut max_j = f64::NEG_INFINITY;
        for u in sphere_points(20_000, 4, 99) {
            let j = s.gauge(&u);
            min_j = min_j.min(j);
            max_j = max_j.max(j);
        }
        assert!(m.inner_radius_r <= 1.0 / max_j + 1e-6);
        assert!(m.outer_radius_big_r >= 1.0 / min_j - 1e-6);
    }

    #[test]
    fn builder_rejects_gauge_breaking_perturbation() {
        assert!(matches!(
            SurfaceModel::perturbed(&[1.0, 1.0], 2.5, &[-1.0]),
            Err(Error::PerturbationTooLarge { .. })
        ));
    }

    #[test]
    fn metrics_budget_minimum_enforced() {
        let s = SurfaceModel::sphere(2, 1.0).unwrap();
        assert!(s.metrics(10).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homogeneity(
            raw in prop::collection::vec(-2.0f64..2.0, 4),
            lambda in 0.01f64..50.0
        ) {
            let x = DVector::from_vec(raw);
            prop_assume!(x.norm() > 1e-3);
            for s in test_surfaces().into_iter().filter(|s| s.phase_dim() == 4) {
                let lhs = s.gauge(&(&x * lambda));
                let rhs = lambda * s.gauge(&x);
                prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn euler_identity(raw in prop::collection::vec(-2.0f64..2.0, 4)) {
            let x = DVector::from_vec(raw);
            prop_assume!(x.norm() > 1e-3);
            for s in test_surfaces().into_iter().filter(|s| s.phase_dim() == 4) {
                let g = s.gauge_grad(&x).unwrap();
                prop_assert!((g.dot(&x) - s.gauge(&x)).abs() < 1e-10);
            }
        }
    }
}
