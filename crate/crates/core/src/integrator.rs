//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! The same stepper integrates either the bare state or the augmented
//! variational system `(y, Φ)` with `Φ' = J(y, t) Φ`, `Φ(t0) = I`, so the
//! principal fundamental matrix is carried along the trajectory exactly as
//! the state is. A fixed-step classical RK4 is kept as an independent oracle.

use log::trace;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, StateVector, MAX_DIM};
use crate::quadrature;
use crate::systems::SystemDefinition;

/// Widest augmented system: 3 state components plus a 3×3 fundamental matrix.
const MAX_WIDTH: usize = MAX_DIM + MAX_DIM * MAX_DIM;

type Buf = [f64; MAX_WIDTH];

/// Error-control settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
    /// Any state component exceeding this magnitude is reported as blow-up.
    pub escape_bound: f64,
    pub max_steps: usize,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-9, escape_bound: 1e6, max_steps: 100_000_000, max_step: f64::INFINITY }
    }
}

impl Tolerances {
    pub fn with_tolerances(mut self, abs: f64, rel: f64) -> Self {
        self.abs = abs;
        self.rel = rel;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs > 0.0 && self.rel >= 0.0 && self.escape_bound > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidInput(format!("invalid tolerances {self:?}")));
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) coefficients with Hairer's dense-output extension.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side of either the state equation or the variational system.
#[derive(Clone, Copy)]
struct Rhs<'a> {
    sys: &'a SystemDefinition,
    dim: usize,
    variational: bool,
}

impl Rhs<'_> {
    fn width(&self) -> usize {
        if self.variational {
            self.dim + self.dim * self.dim
        } else {
            self.dim
        }
    }

    fn eval(&self, t: f64, u: &Buf, du: &mut Buf) {
        let n = self.dim;
        self.sys.field_into(&u[..n], t, &mut du[..n]);
        if self.variational {
            let y = StateVector::from_slice(&u[..n]).expect("state dimension");
            let j = self.sys.jacobian(&y, t);
            // Φ is stored row-major after the state.
            for r in 0..n {
                for c in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += j.get(r, k) * u[n + k * n + c];
                    }
                    du[n + r * n + c] = acc;
                }
            }
        }
    }
}

/// Dense, time-ordered solution samples with 5th-order interpolation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    width: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    /// Per step: four coefficient vectors of length `width` (Hairer rcont2..rcont5).
    cont: Vec<f64>,
}

impl Trajectory {
    fn single(t: f64, u: &[f64], dim: usize) -> Self {
        Self { dim, width: u.len(), times: vec![t], values: u.to_vec(), cont: Vec::new() }
    }

    /// Interpolation order of the dense output.
    pub fn interpolation_order(&self) -> usize {
        5
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Stored state at sample index `i`.
    pub fn state(&self, i: usize) -> StateVector {
        let off = i * self.width;
        StateVector::from_slice(&self.values[off..off + self.dim]).unwrap()
    }

    pub fn states(&self) -> impl Iterator<Item = StateVector> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    pub fn last_state(&self) -> StateVector {
        self.state(self.len() - 1)
    }

    /// Whether the fundamental matrix is carried along.
    pub fn has_fundamental(&self) -> bool {
        self.width > self.dim
    }

    fn interpolate_into(&self, t: f64, out: &mut [f64]) -> bool {
        let (t0, t1) = (self.t_start(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return false;
        }
        let w = self.width;
        let idx = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => {
                out.copy_from_slice(&self.values[i * w..(i + 1) * w]);
                return true;
            }
            Err(i) => i - 1,
        };
        let h = self.times[idx + 1] - self.times[idx];
        let theta = (t - self.times[idx]) / h;
        let theta1 = 1.0 - theta;
        let base = &self.values[idx * w..(idx + 1) * w];
        let c = &self.cont[idx * 4 * w..(idx + 1) * 4 * w];
        for k in 0..w {
            let (r2, r3, r4, r5) = (c[k], c[w + k], c[2 * w + k], c[3 * w + k]);
            out[k] = base[k] + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        true
    }

    /// Dense-output state at time `t`, or `None` outside the covered span.
    pub fn at(&self, t: f64) -> Option<StateVector> {
        let mut buf = [0.0; MAX_WIDTH];
        self.interpolate_into(t, &mut buf[..self.width])
            .then(|| StateVector::from_slice(&buf[..self.dim]).unwrap())
    }

    /// Fundamental matrix Φ(t) (relative to the trajectory start), when carried.
    pub fn fundamental_at(&self, t: f64) -> Option<Matrix> {
        if !self.has_fundamental() {
            return None;
        }
        let mut buf = [0.0; MAX_WIDTH];
        if !self.interpolate_into(t, &mut buf[..self.width]) {
            return None;
        }
        Some(unpack_matrix(&buf[self.dim..self.width], self.dim))
    }

    /// Largest absolute state component over all stored samples.
    pub fn max_abs(&self) -> f64 {
        self.states().fold(0.0, |m, s| m.max(s.max_abs()))
    }
}

fn unpack_matrix(flat: &[f64], n: usize) -> Matrix {
    let mut m = Matrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            m.set(r, c, flat[r * n + c]);
        }
    }
    m
}

/// Principal fundamental matrix over [t0, t1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalMatrix {
    pub t0: f64,
    pub t1: f64,
    pub phi: Matrix,
}

impl FundamentalMatrix {
    pub fn identity(t0: f64, dim: usize) -> Self {
        Self { t0, t1: t0, phi: Matrix::identity(dim) }
    }

    pub fn span(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// What the stepper should record.
enum Sink<'a> {
    Discard,
    Dense(&'a mut Trajectory),
}

fn weighted_rms(err: &Buf, y: &Buf, ynew: &Buf, n: usize, tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let sk = tol.abs + tol.rel * y[i].abs().max(ynew[i].abs());
        acc += (err[i] / sk).powi(2);
    }
    (acc / n as f64).sqrt()
}

fn initial_step(rhs: &Rhs, t0: f64, y0: &Buf, f0: &Buf, span: f64, tol: &Tolerances) -> f64 {
    let n = rhs.width();
    let (mut d0, mut d1) = (0.0, 0.0);
    for i in 0..n {
        let sk = tol.abs + tol.rel * y0[i].abs();
        d0 += (y0[i] / sk).powi(2);
        d1 += (f0[i] / sk).powi(2);
    }
    let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span).min(tol.max_step);
    let mut y1 = [0.0; MAX_WIDTH];
    for i in 0..n {
        y1[i] = y0[i] + h * f0[i];
    }
    let mut f1 = [0.0; MAX_WIDTH];
    rhs.eval(t0 + h, &y1, &mut f1);
    let mut d2 = 0.0;
    for i in 0..n {
        let sk = tol.abs + tol.rel * y0[i].abs();
        d2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let d2 = (d2 / n as f64).sqrt() / h;
    let h1 = if d1.max(d2) <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h).min(h1).min(span).min(tol.max_step)
}

/// Core adaptive loop; returns the final augmented state.
fn run(rhs: Rhs, u0: &Buf, t0: f64, t1: f64, tol: &Tolerances, mut sink: Sink) -> Result<Buf> {
    tol.validate()?;
    let n = rhs.width();
    let dim = rhs.dim;
    let span = t1 - t0;
    let mut t = t0;
    let mut y = *u0;
    let mut k1 = [0.0; MAX_WIDTH];
    rhs.eval(t, &y, &mut k1);
    let mut h = initial_step(&rhs, t0, &y, &k1, span, tol);

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        ([0.0; MAX_WIDTH], [0.0; MAX_WIDTH], [0.0; MAX_WIDTH], [0.0; MAX_WIDTH], [0.0; MAX_WIDTH], [0.0; MAX_WIDTH]);
    let mut ytmp = [0.0; MAX_WIDTH];
    let mut ynew = [0.0; MAX_WIDTH];
    let mut err = [0.0; MAX_WIDTH];
    let (beta, safe) = (0.04, 0.9);
    let expo1 = 0.2 - beta * 0.75;
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0usize;

    while t < t1 {
        if steps >= tol.max_steps {
            return Err(Error::TooManySteps { t });
        }
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StiffnessFailure { t });
        }
        steps += 1;

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs.eval(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs.eval(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs.eval(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs.eval(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let tph = if last { t1 } else { t + h };
        rhs.eval(tph, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs.eval(tph, &ynew, &mut k7);
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = weighted_rms(&err, &y, &ynew, n, tol);
        if !e.is_finite() {
            // Non-finite stages: shrink hard and retry.
            h *= 0.1;
            reject = true;
            continue;
        }

        let fac11 = e.powf(expo1);
        if e <= 1.0 {
            let mut fac = fac11 / facold.powf(beta);
            fac = (fac / safe).clamp(0.1, 5.0);
            let mut hnew = h / fac;
            facold = e.max(1e-4);

            if let Sink::Dense(traj) = &mut sink {
                let base = traj.cont.len();
                traj.cont.resize(base + 4 * n, 0.0);
                let c = &mut traj.cont[base..];
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    c[i] = ydiff;
                    c[n + i] = bspl;
                    c[2 * n + i] = ydiff - h * k7[i] - bspl;
                    c[3 * n + i] =
                        h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
            }

            t = tph;
            y = ynew;
            k1 = k7;

            if y[..dim].iter().any(|x| !x.is_finite() || x.abs() > tol.escape_bound) {
                return Err(Error::BlowUp { t });
            }
            if let Sink::Dense(traj) = &mut sink {
                traj.times.push(t);
                traj.values.extend_from_slice(&y[..n]);
            }
            if reject {
                hnew = hnew.min(h);
            }
            reject = false;
            h = hnew.min(tol.max_step);
        } else {
            h /= (fac11 / safe).min(5.0);
            reject = true;
        }
    }
    trace!("integrated [{t0}, {t1}] in {steps} steps");
    Ok(y)
}

fn check_span(sys: &SystemDefinition, y0: &StateVector, t0: f64, t1: f64) -> Result<()> {
    if y0.dim() != sys.dimension() {
        return Err(Error::DimensionMismatch { expected: sys.dimension(), got: y0.dim() });
    }
    if !y0.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite initial state {y0:?}")));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidInput(format!("require t1 > t0, got [{t0}, {t1}]")));
    }
    Ok(())
}

fn state_buf(y0: &StateVector) -> Buf {
    let mut u = [0.0; MAX_WIDTH];
    u[..y0.dim()].copy_from_slice(y0.as_slice());
    u
}

/// Integrates the state equation over [t0, t1] and keeps the dense output.
pub fn integrate(sys: &SystemDefinition, y0: &StateVector, t0: f64, t1: f64, tol: &Tolerances) -> Result<Trajectory> {
    check_span(sys, y0, t0, t1)?;
    let rhs = Rhs { sys, dim: sys.dimension(), variational: false };
    let u0 = state_buf(y0);
    let mut traj = Trajectory::single(t0, y0.as_slice(), rhs.dim);
    run(rhs, &u0, t0, t1, tol, Sink::Dense(&mut traj))?;
    Ok(traj)
}

/// Integrates without storing samples and returns the end state.
pub fn advance(sys: &SystemDefinition, y0: &StateVector, t0: f64, t1: f64, tol: &Tolerances) -> Result<StateVector> {
    if t1 == t0 {
        return Ok(*y0);
    }
    check_span(sys, y0, t0, t1)?;
    let rhs = Rhs { sys, dim: sys.dimension(), variational: false };
    let u = run(rhs, &state_buf(y0), t0, t1, tol, Sink::Discard)?;
    Ok(StateVector::from_slice(&u[..rhs.dim]).unwrap())
}

/// Integrates the state together with Φ' = J(y, t)Φ, Φ(t0) = I.
///
/// An empty span (`t1 == t0`) yields a single-sample trajectory and Φ = I.
pub fn integrate_with_fundamental(
    sys: &SystemDefinition,
    y0: &StateVector,
    t0: f64,
    t1: f64,
    tol: &Tolerances,
) -> Result<(Trajectory, FundamentalMatrix)> {
    let n = sys.dimension();
    let rhs = Rhs { sys, dim: n, variational: true };
    let mut u0 = state_buf(y0);
    for i in 0..n {
        u0[n + i * n + i] = 1.0;
    }
    if t1 == t0 && y0.dim() == n && y0.is_finite() {
        let traj = Trajectory::single(t0, &u0[..rhs.width()], n);
        return Ok((traj, FundamentalMatrix::identity(t0, n)));
    }
    check_span(sys, y0, t0, t1)?;
    let mut traj = Trajectory::single(t0, &u0[..rhs.width()], n);
    let u = run(rhs, &u0, t0, t1, tol, Sink::Dense(&mut traj))?;
    let phi = unpack_matrix(&u[n..rhs.width()], n);
    Ok((traj, FundamentalMatrix { t0, t1, phi }))
}

/// Fundamental matrix only, without keeping samples.
pub fn fundamental_matrix(
    sys: &SystemDefinition,
    y0: &StateVector,
    t0: f64,
    t1: f64,
    tol: &Tolerances,
) -> Result<(StateVector, FundamentalMatrix)> {
    let n = sys.dimension();
    if t1 == t0 {
        return Ok((*y0, FundamentalMatrix::identity(t0, n)));
    }
    check_span(sys, y0, t0, t1)?;
    let rhs = Rhs { sys, dim: n, variational: true };
    let mut u0 = state_buf(y0);
    for i in 0..n {
        u0[n + i * n + i] = 1.0;
    }
    let u = run(rhs, &u0, t0, t1, tol, Sink::Discard)?;
    let phi = unpack_matrix(&u[n..rhs.width()], n);
    Ok((StateVector::from_slice(&u[..n]).unwrap(), FundamentalMatrix { t0, t1, phi }))
}

/// Classical fixed-step RK4 end state; an independent cross-check of the adaptive method.
pub fn rk4_endpoint(sys: &SystemDefinition, y0: &StateVector, t0: f64, t1: f64, dt: f64) -> StateVector {
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut y = *y0;
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = sys.field(&y, t);
        let k2 = sys.field(&(y + k1.scale(h / 2.0)), t + h / 2.0);
        let k3 = sys.field(&(y + k2.scale(h / 2.0)), t + h / 2.0);
        let k4 = sys.field(&(y + k3.scale(h)), t + h);
        y = y + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    y
}

/// |ln det Φ − ∫ tr J(y(s), s) ds| over the span of `phi`, using the trajectory's dense output.
pub fn liouville_check(sys: &SystemDefinition, trajectory: &Trajectory, phi: &FundamentalMatrix) -> f64 {
    let span = phi.span();
    let log_det = phi.phi.determinant().ln();
    if span == 0.0 {
        return log_det.abs();
    }
    let integral: f64 = quadrature::simpson(phi.t0, phi.t1, quadrature::panels_for(span))
        .into_iter()
        .map(|(t, w)| {
            let y = trajectory.at(t).expect("trajectory covers the fundamental-matrix span");
            w * sys.jacobian(&y, t).trace()
        })
        .sum();
    (log_det - integral).abs()
}
