//! Characteristic flow and its linearization.
//!
//! The flow integrated here is x' = J grad F(x) with F = j^2/2; on the
//! surface this coincides with the characteristic flow normalized by
//! N(y) . y = 1. The linearization z' = J F''(x(t)) z is integrated jointly
//! with the orbit so the fundamental-solution samples align with the orbit
//! samples.

use crate::error::{Error, Result};
use crate::linalg;
use crate::surface::SurfaceModel;
use nalgebra::{DMatrix, DVector};

/// Default absolute/relative integration tolerance.
pub const DEFAULT_TOL: f64 = 1e-11;

/// Minimum number of samples per integration interval.
pub const MIN_SAMPLES: usize = 64;

/// Bound on the stored-path symplecticity defect before the linearization is
/// declared numerically unstable.
pub const SYMPLECTICITY_BOUND: f64 = 1e-7;

/// Result of integrating the characteristic flow.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub end_point: DVector<f64>,
    /// Time-ordered samples (t, x(t)), starting at (0, x0).
    pub samples: Vec<(f64, DVector<f64>)>,
    /// Max |j(x) - 1| over accepted steps, measured before reprojection.
    pub energy_drift: f64,
}

impl FlowResult {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn start_point(&self) -> &DVector<f64> {
        &self.samples[0].1
    }
}

/// Discretized fundamental solution gamma(t) in Sp(2n) with gamma(0) = I.
#[derive(Debug, Clone)]
pub struct SymplecticPath {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
    /// Symmetric generators S(t_k) with gamma' = J S gamma, sampled at the
    /// same times. Used by index computations for crossing forms.
    pub generators: Vec<DMatrix<f64>>,
}

impl SymplecticPath {
    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_matrix(&self) -> &DMatrix<f64> {
        self.matrices.last().unwrap()
    }

    /// Max over stored samples of the symplecticity defect.
    pub fn max_symplecticity_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(linalg::symplecticity_defect)
            .fold(0.0, f64::max)
    }

    /// Builds a path from closed-form samples; generators are optional and
    /// will be reconstructed from finite differences of the log when absent.
    pub fn from_samples(
        times: Vec<f64>,
        matrices: Vec<DMatrix<f64>>,
        generators: Option<Vec<DMatrix<f64>>>,
    ) -> Self {
        assert_eq!(times.len(), matrices.len());
        let generators = generators.unwrap_or_else(|| {
            let mut gens = Vec::with_capacity(times.len());
            for k in 0..times.len() {
                let (a, b) = if k + 1 < times.len() {
                    (k, k + 1)
                } else {
                    (k - 1, k)
                };
                let dt = times[b] - times[a];
                let step = matrices[a]
                    .clone()
                    .try_inverse()
                    .map(|inv| inv * &matrices[b])
                    .unwrap_or_else(|| DMatrix::identity(matrices[a].nrows(), matrices[a].nrows()));
                let l = linalg::mat_log_near_identity(&step)
                    .unwrap_or_else(|| DMatrix::zeros(step.nrows(), step.ncols()))
                    / dt;
                // gamma' = gamma L  =>  generator in left-trivialized form is
                // gamma L gamma^{-1}; S = -J (gamma L gamma^{-1}).
                let g = &matrices[a];
                let ginv = g.clone().try_inverse().unwrap();
                let a_mat = g * &l * ginv;
                gens.push(-linalg::j_mul_mat(&a_mat));
            }
            gens
        });
        Self {
            times,
            matrices,
            generators,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct StepperConfig {
    tol: f64,
    h_max: f64,
}

/// Dormand-Prince 5(4) driver over a generic ODE right-hand side, with an
/// acceptance hook that can project the state and record samples.
fn dopri5<F, A>(
    dim: usize,
    y0: DVector<f64>,
    t_end: f64,
    cfg: StepperConfig,
    f: F,
    mut on_accept: A,
) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    A: FnMut(f64, &mut DVector<f64>),
{
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    if t_end == 0.0 {
        let mut y = y0;
        on_accept(0.0, &mut y);
        return Ok(y);
    }

    let mut t = 0.0;
    let mut y = y0;
    on_accept(0.0, &mut y);
    let mut h = (t_end / 256.0).min(cfg.h_max).max(t_end * 1e-8);
    let mut k1 = f(t, &y);

    while t < t_end {
        if h < 1e-14 * t_end {
            return Err(Error::Integration {
                reason: format!("step size underflow at t = {t:.6e}"),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        let y2 = &y + &k1 * (A21 * h);
        let k2 = f(t + h / 5.0, &y2);
        let y3 = &y + (&k1 * A31 + &k2 * A32) * h;
        let k3 = f(t + 3.0 * h / 10.0, &y3);
        let y4 = &y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h;
        let k4 = f(t + 4.0 * h / 5.0, &y4);
        let y5 = &y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h;
        let k5 = f(t + 8.0 * h / 9.0, &y5);
        let y6 = &y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h;
        let k6 = f(t + h, &y6);
        let y_new = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = f(t + h, &y_new);

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let mut err = 0.0f64;
        for i in 0..dim {
            let scale = cfg.tol + cfg.tol * y[i].abs().max(y_new[i].abs());
            err += (err_vec[i] / scale).powi(2);
        }
        err = (err / dim as f64).sqrt();

        if !err.is_finite() {
            return Err(Error::Integration {
                reason: format!("non-finite state at t = {t:.6e}"),
            });
        }

        if err <= 1.0 {
            t += h;
            y = y_new;
            on_accept(t, &mut y);
            // the acceptance hook may have projected y; refresh the FSAL slope
            k1 = f(t, &y);
        }

        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).min(cfg.h_max);
    }
    Ok(y)
}

fn check_on_surface(surface: &SurfaceModel, y0: &DVector<f64>) -> Result<()> {
    let defect = (surface.gauge(y0) - 1.0).abs();
    if defect > 1e-6 {
        return Err(Error::OffSurface { defect, tol: 1e-6 });
    }
    Ok(())
}

fn flow_field(surface: &SurfaceModel, x: &DVector<f64>, direction: f64) -> DVector<f64> {
    let grad = surface
        .hamiltonian_grad(x)
        .unwrap_or_else(|_| DVector::zeros(x.len()));
    linalg::j_mul_vec(&grad) * direction
}

fn integrate_orbit(
    surface: &SurfaceModel,
    y0: &DVector<f64>,
    t_end: f64,
    tol: f64,
    direction: f64,
) -> Result<FlowResult> {
    check_on_surface(surface, y0)?;
    let start = surface.project(y0);
    let dim = surface.phase_dim();
    let cfg = StepperConfig {
        tol,
        h_max: if t_end > 0.0 {
            t_end / MIN_SAMPLES as f64
        } else {
            f64::INFINITY
        },
    };
    let mut samples = Vec::new();
    let mut drift = 0.0f64;
    let end = dopri5(
        dim,
        start,
        t_end,
        cfg,
        |_, x| flow_field(surface, x, direction),
        |t, x| {
            let j = surface.gauge(x);
            drift = drift.max((j - 1.0).abs());
            *x /= j;
            samples.push((t, x.clone()));
        },
    )?;
    Ok(FlowResult {
        end_point: end,
        samples,
        energy_drift: drift,
    })
}

/// Integrates the characteristic flow from a surface point.
pub fn flow(
    surface: &SurfaceModel,
    y0: &DVector<f64>,
    t_end: f64,
    tol: f64,
) -> Result<FlowResult> {
    integrate_orbit(surface, y0, t_end, tol, 1.0)
}

/// Integrates the time-reversed flow x' = -J grad F(x).
pub fn flow_reverse(
    surface: &SurfaceModel,
    y0: &DVector<f64>,
    t_end: f64,
    tol: f64,
) -> Result<FlowResult> {
    integrate_orbit(surface, y0, t_end, tol, -1.0)
}

/// Integrates orbit and fundamental matrix as one augmented system.
///
/// Returns the orbit samples together with the aligned symplectic path
/// gamma(t), gamma(0) = I.
pub fn flow_with_path(
    surface: &SurfaceModel,
    y0: &DVector<f64>,
    t_end: f64,
    tol: f64,
) -> Result<(FlowResult, SymplecticPath)> {
    check_on_surface(surface, y0)?;
    let dim = surface.phase_dim();
    let aug_dim = dim + dim * dim;
    let mut state = DVector::zeros(aug_dim);
    let start = surface.project(y0);
    for i in 0..dim {
        state[i] = start[i];
    }
    for i in 0..dim {
        state[dim + i * dim + i] = 1.0;
    }

    let cfg = StepperConfig {
        tol,
        h_max: if t_end > 0.0 {
            t_end / MIN_SAMPLES as f64
        } else {
            f64::INFINITY
        },
    };

    let unpack = |s: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let x = DVector::from_fn(dim, |i, _| s[i]);
        let g = DMatrix::from_fn(dim, dim, |r, c| s[dim + c * dim + r]);
        (x, g)
    };

    let mut samples = Vec::new();
    let mut times = Vec::new();
    let mut matrices = Vec::new();
    let mut generators = Vec::new();
    let mut drift = 0.0f64;

    let end_state = dopri5(
        aug_dim,
        state,
        t_end,
        cfg,
        |_, s| {
            let (x, g) = unpack(s);
            let xdot = flow_field(surface, &x, 1.0);
            let hess = surface
                .gauge_hess(&x)
                .unwrap_or_else(|_| DMatrix::zeros(dim, dim));
            let gdot = linalg::j_mul_mat(&(hess * &g));
            let mut out = DVector::zeros(aug_dim);
            for i in 0..dim {
                out[i] = xdot[i];
            }
            for c in 0..dim {
                for r in 0..dim {
                    out[dim + c * dim + r] = gdot[(r, c)];
                }
            }
            out
        },
        |t, s| {
            let (x, g) = unpack(s);
            let j = surface.gauge(&x);
            drift = drift.max((j - 1.0).abs());
            let xp = &x / j;
            for i in 0..dim {
                s[i] = xp[i];
            }
            samples.push((t, xp.clone()));
            times.push(t);
            matrices.push(g);
            generators.push(
                surface
                    .gauge_hess(&xp)
                    .unwrap_or_else(|_| DMatrix::zeros(dim, dim)),
            );
        },
    )?;

    let (end_point, _) = unpack(&end_state);
    let flow_result = FlowResult {
        end_point,
        samples,
        energy_drift: drift,
    };
    let path = SymplecticPath {
        times,
        matrices,
        generators,
    };
    Ok((flow_result, path))
}

/// Fundamental solution of z' = J F''(x(t)) z along a previously computed
/// orbit, re-integrated jointly at the same accuracy class.
pub fn linearized_path(surface: &SurfaceModel, orbit: &FlowResult, tol: f64) -> Result<SymplecticPath> {
    let (_, path) = flow_with_path(surface, orbit.start_point(), orbit.t_end(), tol)?;
    let defect = path.max_symplecticity_defect();
    if defect > SYMPLECTICITY_BOUND {
        return Err(Error::SymplecticityDefect {
            defect,
            bound: SYMPLECTICITY_BOUND,
        });
    }
    Ok(path)
}
