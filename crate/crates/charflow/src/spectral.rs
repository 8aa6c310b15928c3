//! Monodromy spectra, ellipticity classification, and the Sp(4) basic
//! normal-form case taxonomy used by the index iteration formulas.

use crate::dynamics::SymplecticPath;
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Eigenvalue tolerance: |lambda - 1| below this counts toward the
/// eigenvalue-1 multiplicity.
pub const EIG_TOL: f64 = 1e-6;

/// Stability classification of a closed characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Elliptic,
    Hyperbolic,
    Mixed,
    DegenerateBeyondForced,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Elliptic => "elliptic",
            Classification::Hyperbolic => "hyperbolic",
            Classification::Mixed => "mixed",
            Classification::DegenerateBeyondForced => "degenerate-beyond-forced",
        };
        f.write_str(s)
    }
}

/// Basic normal-form case of the non-trivial 2x2 factor of an Sp(4)
/// monodromy, alongside the forced unit-eigenvalue block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum CaseTag {
    /// Transverse eigenvalue pair {-1, -1}; b is the shear sign in N1(-1, b).
    Case1 { b: i8 },
    /// Transverse elliptic pair e^{+-i theta}, theta in (0,pi) U (pi,2pi).
    Case2 { theta: f64 },
    /// Transverse eigenvalue pair {1, 1} with shear sign b in {0, 1}.
    Case3 { b: u8 },
    /// Transverse eigenvalue pair {1, 1} with negative shear (N1(1,-1)).
    Case4,
    /// Transverse real pair lambda, 1/lambda off the unit circle.
    Hyperbolic,
    /// Not recognized (degenerate frame or ambiguous data).
    Other,
}

impl CaseTag {
    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::Case1 { .. } => "case1",
            CaseTag::Case2 { .. } => "case2",
            CaseTag::Case3 { .. } => "case3",
            CaseTag::Case4 => "case4",
            CaseTag::Hyperbolic => "hyperbolic",
            CaseTag::Other => "other",
        }
    }
}

/// Floquet data of a closed characteristic.
#[derive(Debug, Clone)]
pub struct FloquetData {
    pub monodromy: DMatrix<f64>,
    /// All 2n multipliers, sorted by (re, im).
    pub multipliers: Vec<Complex64>,
    /// Algebraic multiplicity of the eigenvalue 1.
    pub nullity_nu: usize,
    pub classification: Classification,
    /// Normalized transverse 2x2 factor (Sp(4) orbits only).
    pub transverse: Option<Matrix2<f64>>,
    pub case_tag: Option<CaseTag>,
}

impl FloquetData {
    /// Non-degenerate = eigenvalue 1 has algebraic multiplicity exactly 2.
    pub fn non_degenerate(&self) -> bool {
        self.nullity_nu == 2
    }

    /// Max over multipliers of the distance to the closest inverse partner.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for lam in &self.multipliers {
            if lam.norm() < 1e-12 {
                return f64::INFINITY;
            }
            let inv = 1.0 / lam;
            let best = self
                .multipliers
                .iter()
                .map(|mu| (mu - inv).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        worst
    }
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut eigs: Vec<Complex64> = m.clone().complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    eigs
}

/// Algebraic multiplicity of the eigenvalue 1, from the rank of (M - I)^2
/// cross-checked against eigenvalue clustering. Ambiguity at the tolerance
/// boundary is an error rather than a silent classification.
fn multiplicity_of_one(m: &DMatrix<f64>, eigs: &[Complex64]) -> Result<usize> {
    let mut cluster = 0usize;
    for lam in eigs {
        let d = (lam - Complex64::new(1.0, 0.0)).norm();
        if d < EIG_TOL {
            cluster += 1;
        } else if d < 10.0 * EIG_TOL {
            return Err(Error::ToleranceBoundary {
                gap: d,
                context: "eigenvalue-1 multiplicity".into(),
            });
        }
    }
    let dim = m.nrows();
    let shifted = m - DMatrix::identity(dim, dim);
    let squared = &shifted * &shifted;
    let scale = squared.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let kernel_dim = dim - linalg::rank_at(&squared, 1e-8 * scale);
    if kernel_dim != cluster {
        return Err(Error::ToleranceBoundary {
            gap: EIG_TOL,
            context: format!(
                "rank-based multiplicity {kernel_dim} disagrees with cluster count {cluster}"
            ),
        });
    }
    Ok(cluster)
}

fn classify(eigs: &[Complex64], nu: usize) -> Classification {
    if nu > 2 {
        return Classification::DegenerateBeyondForced;
    }
    let on_circle = |lam: &Complex64| (lam.norm() - 1.0).abs() < EIG_TOL;
    let all_on = eigs.iter().all(on_circle);
    if all_on {
        return Classification::Elliptic;
    }
    let nontrivial_off = eigs
        .iter()
        .filter(|lam| (*lam - Complex64::new(1.0, 0.0)).norm() >= EIG_TOL)
        .all(|lam| !on_circle(lam));
    if nu == 2 && nontrivial_off {
        Classification::Hyperbolic
    } else {
        Classification::Mixed
    }
}

/// Builds Floquet data from a monodromy matrix alone.
pub fn from_monodromy(m: &DMatrix<f64>) -> Result<FloquetData> {
    let defect = linalg::symplecticity_defect(m);
    if defect > 1e-6 {
        return Err(Error::SymplecticityDefect {
            defect,
            bound: 1e-6,
        });
    }
    let eigs = sorted_eigenvalues(m);
    let nu = multiplicity_of_one(m, &eigs)?;
    let classification = classify(&eigs, nu);
    let data = FloquetData {
        monodromy: m.clone(),
        multipliers: eigs,
        nullity_nu: nu,
        classification,
        transverse: None,
        case_tag: None,
    };
    let sym = data.symmetry_defect();
    if sym > 1e-7 {
        return Err(Error::SpectrumSymmetry { defect: sym });
    }
    Ok(data)
}

/// Floquet data of the path's endpoint monodromy gamma(tau).
pub fn floquet(path: &SymplecticPath, period_tau: f64) -> Result<FloquetData> {
    let t_end = path.t_end();
    if (t_end - period_tau).abs() > 1e-6 * period_tau.max(1.0) {
        return Err(Error::Config(format!(
            "path covers [0, {t_end:.6}] but period is {period_tau:.6}"
        )));
    }
    from_monodromy(path.end_matrix())
}

/// Extracts the transverse 2x2 factor of an orbit monodromy using the
/// orbit frame: the plane spanned by the base point and the flow direction
/// is invariant (both are fixed vectors of the quadratic-gauge monodromy),
/// and the factor acts on its symplectic complement.
pub fn transverse_factor(
    m: &DMatrix<f64>,
    base_point: &DVector<f64>,
    flow_dir: &DVector<f64>,
) -> Result<Matrix2<f64>> {
    let dim = m.nrows();
    if dim != 4 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            actual: dim / 2,
        });
    }
    // rows of the constraint matrix: v in W iff <v, J y0> = 0 and <v, J xi> = 0
    let mut constraints = DMatrix::zeros(2, dim);
    let jy = linalg::j_mul_vec(base_point);
    let jf = linalg::j_mul_vec(flow_dir);
    for c in 0..dim {
        constraints[(0, c)] = jy[c];
        constraints[(1, c)] = jf[c];
    }
    let kernel = linalg::kernel_basis(&constraints, 1e-8);
    if kernel.len() != 2 {
        return Err(Error::Config(
            "orbit frame does not determine a 2-dimensional transverse space".into(),
        ));
    }
    let u1 = kernel[0].clone();
    let s = linalg::omega(&u1, &kernel[1]);
    if s.abs() < 1e-10 {
        return Err(Error::Config("transverse space is omega-degenerate".into()));
    }
    let w2 = &kernel[1] / s;
    let mu1 = m * &u1;
    let mw2 = m * &w2;
    // coordinates in the basis (u1, w2) with omega(u1, w2) = 1
    let coords = |v: &DVector<f64>| {
        Vector2::new(linalg::omega(v, &w2), linalg::omega(&u1, v))
    };
    let c1 = coords(&mu1);
    let c2 = coords(&mw2);
    Ok(Matrix2::new(c1[0], c2[0], c1[1], c2[1]))
}

/// Symmetrized form B(v, w) = (omega((T - sigma I)v, w) + omega((T - sigma I)w, v))/2
/// on R^2; its signature carries the shear sign of N1(sigma, b).
fn shear_form(t: &Matrix2<f64>, sigma: f64) -> Matrix2<f64> {
    let n = t - Matrix2::identity() * sigma;
    let j2 = Matrix2::new(0.0, -1.0, 1.0, 0.0);
    let a = j2 * n;
    (a + a.transpose()) * 0.5
}

fn shear_sign(t: &Matrix2<f64>, sigma: f64) -> i8 {
    let b = shear_form(t, sigma);
    let eigs = b.symmetric_eigenvalues();
    let scale = t.norm().max(1.0);
    let tol = 1e-7 * scale;
    let pos = eigs.iter().any(|x| *x > tol);
    let neg = eigs.iter().any(|x| *x < -tol);
    match (pos, neg) {
        (true, false) => 1,
        (false, true) => -1,
        _ => 0,
    }
}

/// Krein-positive rotation angle of an elliptic 2x2 symplectic matrix:
/// theta in (0, pi) u (pi, 2 pi) with T conjugate to R(theta) in Sp(2).
fn elliptic_angle(t: &Matrix2<f64>) -> f64 {
    let half_tr = (t.trace() / 2.0).clamp(-1.0, 1.0);
    let theta_up = half_tr.acos(); // in (0, pi)
    let lam = Complex64::new(half_tr, (1.0 - half_tr * half_tr).max(0.0).sqrt());
    // eigenvector for the upper-half-plane eigenvalue
    let row1 = (
        Complex64::new(t[(0, 1)], 0.0),
        lam - Complex64::new(t[(0, 0)], 0.0),
    );
    let row2 = (
        lam - Complex64::new(t[(1, 1)], 0.0),
        Complex64::new(t[(1, 0)], 0.0),
    );
    let (xi1, xi2) = if row1.0.norm() + row1.1.norm() > row2.0.norm() + row2.1.norm() {
        row1
    } else {
        row2
    };
    // Krein form Im(conj(xi)^T J2 xi); positive iff T ~ R(theta_up)
    let krein = (xi1.conj() * (-xi2) + xi2.conj() * xi1).im;
    if krein >= 0.0 {
        theta_up
    } else {
        2.0 * std::f64::consts::PI - theta_up
    }
}

/// Classifies the transverse factor into the basic normal-form cases.
pub fn classify_transverse(t: &Matrix2<f64>) -> Result<CaseTag> {
    let tr = t.trace();
    let tol = 1e-6 * t.norm().max(1.0);
    if (tr - 2.0).abs() < tol {
        return Ok(match shear_sign(t, 1.0) {
            1 => CaseTag::Case3 { b: 1 },
            0 => CaseTag::Case3 { b: 0 },
            _ => CaseTag::Case4,
        });
    }
    if (tr + 2.0).abs() < tol {
        return Ok(CaseTag::Case1 {
            b: shear_sign(t, -1.0),
        });
    }
    if (tr - 2.0).abs() < 10.0 * tol || (tr + 2.0).abs() < 10.0 * tol {
        return Err(Error::ToleranceBoundary {
            gap: (tr.abs() - 2.0).abs(),
            context: "transverse trace at the degeneracy boundary".into(),
        });
    }
    if tr.abs() < 2.0 {
        Ok(CaseTag::Case2 {
            theta: elliptic_angle(t),
        })
    } else {
        Ok(CaseTag::Hyperbolic)
    }
}

/// Identifies the basic-form case of the stored transverse factor.
pub fn normal_form_case(data: &FloquetData) -> Result<CaseTag> {
    if data.monodromy.nrows() != 4 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            actual: data.monodromy.nrows() / 2,
        });
    }
    match &data.transverse {
        Some(t) => classify_transverse(t),
        None => Err(Error::MissingParameter(
            "transverse factor (set by the orbit pipeline or a block constructor)",
        )),
    }
}

/// Floquet data of an orbit monodromy with its transverse factor and case
/// tag resolved from the orbit frame (Sp(4) only for the tag).
pub fn floquet_for_orbit(
    path: &SymplecticPath,
    period_tau: f64,
    base_point: &DVector<f64>,
    flow_dir: &DVector<f64>,
) -> Result<FloquetData> {
    let mut data = floquet(path, period_tau)?;
    if data.monodromy.nrows() == 4 {
        let t = transverse_factor(&data.monodromy, base_point, flow_dir)?;
        data.transverse = Some(t);
        data.case_tag = Some(classify_transverse(&t)?);
    }
    Ok(data)
}

/// Embeds 2x2 symplectic blocks into Sp(2n), block k acting on the
/// conjugate pair (x_k, x_{n+k}).
pub fn embed_blocks(blocks: &[Matrix2<f64>]) -> DMatrix<f64> {
    let n = blocks.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (k, b) in blocks.iter().enumerate() {
        m[(k, k)] = b[(0, 0)];
        m[(k, n + k)] = b[(0, 1)];
        m[(n + k, k)] = b[(1, 0)];
        m[(n + k, n + k)] = b[(1, 1)];
    }
    m
}

/// Builds Floquet data for a constructed forced-block/transverse pair.
pub fn from_blocks(forced: Matrix2<f64>, transverse: Matrix2<f64>) -> Result<FloquetData> {
    let m = embed_blocks(&[forced, transverse]);
    let mut data = from_monodromy(&m)?;
    data.transverse = Some(transverse);
    data.case_tag = Some(classify_transverse(&transverse)?);
    Ok(data)
}

/// Planar rotation matrix R(theta).
pub fn rot2(theta: f64) -> Matrix2<f64> {
    Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos())
}

/// Shear block N1(sigma, b) = [[sigma, b], [0, sigma]].
pub fn n1(sigma: f64, b: f64) -> Matrix2<f64> {
    Matrix2::new(sigma, b, 0.0, sigma)
}

/// Best rational approximation p/q of x with 1 <= q <= q_max.
pub fn best_rational(x: f64, q_max: i64) -> (i64, i64, f64) {
    let mut best = (x.round() as i64, 1i64, (x - x.round()).abs());
    for q in 1..=q_max {
        let p = (x * q as f64).round() as i64;
        let err = (x - p as f64 / q as f64).abs();
        if err < best.2 * (1.0 - 1e-12) {
            let g = gcd(p.unsigned_abs(), q.unsigned_abs());
            best = (p / g as i64, q / g as i64, err);
        }
    }
    best
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Rotation angle report for elliptic transverse factors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RotationAngle {
    pub theta: f64,
    /// Best rational approximation p/q of theta/pi with q <= 64.
    pub approx_p: i64,
    pub approx_q: i64,
    pub approx_err: f64,
}

/// Extracts the rotation angle from a Case 2 tag and reports the best
/// rational approximation of theta/pi (q <= 64) with its error.
pub fn rotation_angle(data: &FloquetData) -> Result<RotationAngle> {
    match data.case_tag {
        Some(CaseTag::Case2 { theta }) => {
            let ratio = theta / std::f64::consts::PI;
            let (p, q, err) = best_rational(ratio, 64);
            Ok(RotationAngle {
                theta,
                approx_p: p,
                approx_q: q,
                approx_err: err,
            })
        }
        Some(tag) => Err(Error::CaseMismatch {
            got: tag.name().into(),
        }),
        None => Err(Error::MissingParameter("case tag")),
    }
}
