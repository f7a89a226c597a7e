//! Solution maps: the additive-noise equation `y = xi + x + int b(y) ds` and
//! the rough equation `dy = f(y) dX`, plus Lipschitz-response probes.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::paths::{p_variation, pvar_distance, sobolev_norm, Interval, SampledPath, SobolevParams};
use crate::roughlift::{n_alpha, translate, RoughPath2};

/// Relative slack absorbing integrator error in inequality checks.
pub const INTEGRATOR_SLACK: f64 = 1e-3;

/// Sup of `|tanh''|`, attained at `tanh(y) = 1/sqrt(3)`.
const TANH_SECOND_DERIVATIVE_MAX: f64 = 0.769_800_358_919_501_2;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    /// `b = 0`, `f_i(y) = c_i`.
    Constant { fields: Vec<Vec<f64>> },
    /// `b(y) = A_0 y`, `f_i(y) = A_i y`.
    Linear {
        drift: DMatrix<f64>,
        fields: Vec<DMatrix<f64>>,
    },
    /// Scalar `b(y) = lambda y` with `lambda < 0`, single driver `f_1 = 1`.
    Contractive1D { lambda: f64 },
    /// `b(y) = A_0 tanh(y)`, `f_i(y) = A_i tanh(y) + c_i` (tanh componentwise).
    TanhLinear {
        drift: DMatrix<f64>,
        fields: Vec<DMatrix<f64>>,
        offsets: Vec<Vec<f64>>,
    },
}

/// A drift and driving fields with analytically known constants.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    kind: FieldKind,
    state_dim: usize,
    driver_dim: usize,
    /// Lipschitz bound of the drift.
    lipschitz: f64,
    /// Bound on the fields and their first two derivatives; infinite for unbounded fields.
    beta: f64,
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

fn check_square(a: &DMatrix<f64>, m: usize, what: &str) -> Result<()> {
    if a.nrows() != m || a.ncols() != m {
        return Err(LabError::arg(format!("{what} must be {m} x {m}")));
    }
    Ok(())
}

impl VectorFieldSpec {
    pub fn constant(fields: Vec<Vec<f64>>) -> Result<Self> {
        let m = fields.first().map(Vec::len).unwrap_or(0);
        if m == 0 || fields.iter().any(|c| c.len() != m) {
            return Err(LabError::arg("constant fields need a common nonzero state dimension"));
        }
        let beta = fields
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            state_dim: m,
            driver_dim: fields.len(),
            kind: FieldKind::Constant { fields },
            lipschitz: 0.0,
            beta,
        })
    }

    pub fn linear(drift: DMatrix<f64>, fields: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = drift.nrows();
        check_square(&drift, m, "drift matrix")?;
        for a in &fields {
            check_square(a, m, "field matrix")?;
        }
        if m == 0 {
            return Err(LabError::arg("state dimension must be positive"));
        }
        let lipschitz = spectral_norm(&drift);
        let beta = if fields.iter().all(|a| a.amax() == 0.0) {
            0.0
        } else {
            f64::INFINITY
        };
        Ok(Self {
            state_dim: m,
            driver_dim: fields.len(),
            kind: FieldKind::Linear { drift, fields },
            lipschitz,
            beta,
        })
    }

    /// Scalar linear drift `b(y) = lambda y`; the additive-noise probes draw `lambda` of either sign.
    pub fn scalar_linear(lambda: f64) -> Result<Self> {
        Self::linear(DMatrix::from_element(1, 1, lambda), vec![DMatrix::zeros(1, 1)])
    }

    pub fn contractive_1d(lambda: f64) -> Result<Self> {
        if !(lambda < 0.0 && lambda.is_finite()) {
            return Err(LabError::arg("contractive preset needs lambda < 0"));
        }
        Ok(Self {
            kind: FieldKind::Contractive1D { lambda },
            state_dim: 1,
            driver_dim: 1,
            lipschitz: -lambda,
            beta: 1.0,
        })
    }

    pub fn tanh_linear(
        drift: DMatrix<f64>,
        fields: Vec<DMatrix<f64>>,
        offsets: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = drift.nrows();
        check_square(&drift, m, "drift matrix")?;
        if m == 0 || fields.is_empty() || fields.len() != offsets.len() {
            return Err(LabError::arg("tanh preset needs one offset per field"));
        }
        for (a, c) in fields.iter().zip(&offsets) {
            check_square(a, m, "field matrix")?;
            if c.len() != m {
                return Err(LabError::arg("offset has wrong dimension"));
            }
        }
        let rm = (m as f64).sqrt();
        let beta = fields
            .iter()
            .zip(&offsets)
            .map(|(a, c)| {
                let s = spectral_norm(a);
                let c = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                (s * rm + c).max(s).max(TANH_SECOND_DERIVATIVE_MAX * s)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            lipschitz: spectral_norm(&drift),
            state_dim: m,
            driver_dim: fields.len(),
            kind: FieldKind::TanhLinear {
                drift,
                fields,
                offsets,
            },
            beta,
        })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn driver_dim(&self) -> usize {
        self.driver_dim
    }

    /// Lipschitz constant `L` of the drift.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `b(y)`.
    pub fn drift(&self, y: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Constant { .. } => out.fill(0.0),
            FieldKind::Linear { drift, .. } => mat_vec(drift, y, out),
            FieldKind::Contractive1D { lambda } => out[0] = lambda * y[0],
            FieldKind::TanhLinear { drift, .. } => {
                let t: Vec<f64> = y.iter().map(|v| v.tanh()).collect();
                mat_vec(drift, &t, out)
            }
        }
    }

    /// `f_i(y)`.
    pub fn field(&self, i: usize, y: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Constant { fields } => out.copy_from_slice(&fields[i]),
            FieldKind::Linear { fields, .. } => mat_vec(&fields[i], y, out),
            FieldKind::Contractive1D { .. } => out[0] = 1.0,
            FieldKind::TanhLinear {
                fields, offsets, ..
            } => {
                let t: Vec<f64> = y.iter().map(|v| v.tanh()).collect();
                mat_vec(&fields[i], &t, out);
                for (o, c) in out.iter_mut().zip(&offsets[i]) {
                    *o += c;
                }
            }
        }
    }

    /// `Df_j(y) v`.
    pub fn field_derivative(&self, j: usize, y: &[f64], v: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Constant { .. } | FieldKind::Contractive1D { .. } => out.fill(0.0),
            FieldKind::Linear { fields, .. } => mat_vec(&fields[j], v, out),
            FieldKind::TanhLinear { fields, .. } => {
                let w: Vec<f64> = y
                    .iter()
                    .zip(v)
                    .map(|(a, b)| {
                        let s = 1.0 / a.cosh();
                        s * s * b
                    })
                    .collect();
                mat_vec(&fields[j], &w, out)
            }
        }
    }
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum();
    }
}

fn finite_or_err(y: &[f64], step: usize) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LabError::num(format!("solution blew up at step {step}")));
    }
    Ok(())
}

/// `y = I_b(x, xi)`: Heun on the drift, exact on the additive noise.
pub fn ode_additive_solve(x: &SampledPath, b: &VectorFieldSpec, xi: &[f64]) -> Result<SampledPath> {
    let m = b.state_dim();
    if x.dim() != m || xi.len() != m {
        return Err(LabError::arg(format!(
            "additive noise needs driver and initial state of dimension {m}"
        )));
    }
    let n = x.len();
    let t = x.times();
    let mut values = Vec::with_capacity(n * m);
    values.extend_from_slice(xi);
    let mut y = xi.to_vec();
    let mut by = vec![0.0; m];
    let mut bp = vec![0.0; m];
    let mut pred = vec![0.0; m];
    let mut dx = vec![0.0; m];
    for k in 0..n - 1 {
        let dt = t[k + 1] - t[k];
        x.increment_into(k, k + 1, &mut dx);
        b.drift(&y, &mut by);
        for c in 0..m {
            pred[c] = y[c] + dx[c] + dt * by[c];
        }
        b.drift(&pred, &mut bp);
        for c in 0..m {
            y[c] += dx[c] + 0.5 * dt * (by[c] + bp[c]);
        }
        finite_or_err(&y, k + 1)?;
        values.extend_from_slice(&y);
    }
    SampledPath::new(t.to_vec(), values, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdditiveLipschitzReport {
    /// `||I_b(x+h) - I_b(x)||_{q-var}`.
    pub num: f64,
    /// `||h||_{q-var}`.
    pub den: f64,
    /// `exp(L T)`.
    pub bound: f64,
    pub holds: bool,
}

/// Response of the additive flow to a shift `h`, against `exp(L T) ||h||_{q-var}`.
pub fn additive_lipschitz_ratio(
    x: &SampledPath,
    h: &SampledPath,
    b: &VectorFieldSpec,
    xi: &[f64],
    q: f64,
) -> Result<AdditiveLipschitzReport> {
    x.check_same_grid(h)?;
    let y = ode_additive_solve(x, b, xi)?;
    let yh = ode_additive_solve(&x.add(h)?, b, xi)?;
    let num = pvar_distance(&yh, &y, q)?;
    let den = p_variation(h, q, h.full())?;
    let bound = (b.lipschitz() * x.horizon()).exp();
    Ok(AdditiveLipschitzReport {
        num,
        den,
        bound,
        holds: num <= bound * den * (1.0 + INTEGRATOR_SLACK),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevRatio {
    pub num: f64,
    pub den: f64,
    /// `num / den`, or `0` for `h = 0`.
    pub ratio: f64,
}

/// `||I_b(x+h) - I_b(x)||_{W^{delta,p}} / ||h||_{W^{delta,p}}`.
pub fn additive_sobolev_ratio(
    x: &SampledPath,
    h: &SampledPath,
    b: &VectorFieldSpec,
    xi: &[f64],
    params: SobolevParams,
) -> Result<SobolevRatio> {
    x.check_same_grid(h)?;
    let y = ode_additive_solve(x, b, xi)?;
    let yh = ode_additive_solve(&x.add(h)?, b, xi)?;
    let num = sobolev_norm(&yh.sub(&y)?, params)?;
    let den = sobolev_norm(h, params)?;
    let ratio = if den == 0.0 { 0.0 } else { num / den };
    Ok(SobolevRatio { num, den, ratio })
}

/// Step-2 Euler (Davie) scheme on the lift's grid:
/// `y_{k+1} = y_k + f_i(y_k) x^i + (Df_j f_i)(y_k) X^{ij}`.
pub fn rde_solve(rp: &RoughPath2, f: &VectorFieldSpec, xi: &[f64]) -> Result<SampledPath> {
    let m = f.state_dim();
    let d = f.driver_dim();
    if rp.dim() != d {
        return Err(LabError::arg(format!(
            "driver dimension {} does not match {d} fields",
            rp.dim()
        )));
    }
    if xi.len() != m {
        return Err(LabError::arg("initial state has wrong dimension"));
    }
    let base = rp.base();
    let n = base.len();
    let mut values = Vec::with_capacity(n * m);
    values.extend_from_slice(xi);
    let mut y = xi.to_vec();
    let mut dx = vec![0.0; d];
    let mut fi = vec![vec![0.0; m]; d];
    let mut tmp = vec![0.0; m];
    let mut next = vec![0.0; m];
    for k in 0..n - 1 {
        base.increment_into(k, k + 1, &mut dx);
        let area = rp.segment(k);
        for (i, out) in fi.iter_mut().enumerate() {
            f.field(i, &y, out);
        }
        next.copy_from_slice(&y);
        for i in 0..d {
            for c in 0..m {
                next[c] += fi[i][c] * dx[i];
            }
        }
        for i in 0..d {
            for j in 0..d {
                let a = area[i * d + j];
                if a == 0.0 {
                    continue;
                }
                f.field_derivative(j, &y, &fi[i], &mut tmp);
                for c in 0..m {
                    next[c] += tmp[c] * a;
                }
            }
        }
        y.copy_from_slice(&next);
        finite_or_err(&y, k + 1)?;
        values.extend_from_slice(&y);
    }
    SampledPath::new(base.times().to_vec(), values, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoughShiftReport {
    /// `d_{p-var}(y^1, y^2)`.
    pub d: f64,
    /// `||h||_{q-var} v ||h||_{q-var}^q`.
    pub hq: f64,
    /// `N_1(x)`.
    pub n1: usize,
    pub ratio: f64,
}

/// Compares the solutions driven by `rp` and by its translation `T_h(rp)`.
pub fn rde_shift_response(
    rp: &RoughPath2,
    h: &SampledPath,
    f: &VectorFieldSpec,
    xi: &[f64],
    p: f64,
    q: f64,
) -> Result<RoughShiftReport> {
    let y1 = rde_solve(rp, f, xi)?;
    let y2 = rde_solve(&translate(rp, h)?, f, xi)?;
    let d = pvar_distance(&y1, &y2, p)?;
    let hv = p_variation(h, q, h.full())?;
    let hq = hv.max(hv.powf(q));
    let n1 = n_alpha(rp, 1.0, p, Interval::full(rp.len()))?;
    let ratio = if hq == 0.0 { 0.0 } else { d / hq };
    Ok(RoughShiftReport { d, hq, n1, ratio })
}
