//! The four exponent estimators and their window-averaged report.
//!
//! * `LE_J`: eigenvalues of the time-averaged Jacobian.
//! * `LE_O`: eigenvalues of the symmetric part of that average.
//! * `LE_V`: time average of the real parts of the frozen eigenvalues.
//! * `GFE`: generalized Floquet exponents from the window's fundamental matrix.
//!
//! Only real parts are reported. Every estimator's components sum to the
//! window average of the divergence.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::format::g6;
use crate::integrator::{self, Tolerances, Trajectory};
use crate::linalg::{Matrix, StateVector};
use crate::quadrature::{panels_for, simpson};
use crate::smalleig::{eigen, floquet_from_monodromy};
use crate::systems::{SystemDefinition, SystemInfo};

/// Magnitude below which an averaged component is rendered as `0*`.
pub const DEFAULT_ZERO_STAR: f64 = 5e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LE_J")]
    LeJ,
    #[serde(rename = "LE_O")]
    LeO,
    #[serde(rename = "LE_V")]
    LeV,
    #[serde(rename = "GFE")]
    Gfe,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LeJ, Method::LeO, Method::LeV, Method::Gfe];

    pub fn label(self) -> &'static str {
        match self {
            Method::LeJ => "LE_J",
            Method::LeO => "LE_O",
            Method::LeV => "LE_V",
            Method::Gfe => "GFE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "LE_J" | "LEJ" | "J" => Ok(Method::LeJ),
            "LE_O" | "LEO" | "O" => Ok(Method::LeO),
            "LE_V" | "LEV" | "V" => Ok(Method::LeV),
            "GFE" => Ok(Method::Gfe),
            _ => Err(Error::InvalidInput(format!("unknown method `{s}` (expected LE_J, LE_O, LE_V or GFE)"))),
        }
    }
}

/// Partition of the time axis into `count` windows of length `window`.
///
/// The run starts at `t_start`; the first `transient` time units are
/// discarded, and window k covers `[a_k, a_k + window]` with
/// `a_k = t_start + transient + k·window`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub t_start: f64,
    #[serde(rename = "T")]
    pub window: f64,
    #[serde(rename = "m")]
    pub count: usize,
    pub transient: f64,
}

impl WindowPlan {
    pub fn new(window: f64, count: usize) -> Self {
        WindowPlan { t_start: 0.0, window, count, transient: 0.0 }
    }

    pub fn with_transient(mut self, transient: f64) -> Self {
        self.transient = transient;
        self
    }

    pub fn with_start(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::InvalidInput(format!("window length must be positive, got {}", self.window)));
        }
        if self.count < 1 {
            return Err(Error::InvalidInput("window count must be at least 1".into()));
        }
        if !(self.transient >= 0.0 && self.transient.is_finite()) || !self.t_start.is_finite() {
            return Err(Error::InvalidInput("transient must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Start time of window `k`.
    pub fn window_start(&self, k: usize) -> f64 {
        self.t_start + self.transient + k as f64 * self.window
    }
}

/// Frozen-coefficient quantities of one window, from a single pass over the
/// quadrature nodes.
#[derive(Clone, Debug)]
struct FrozenWindow {
    mean_jacobian: Matrix,
    trace_average: f64,
    le_v: Vec<f64>,
}

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn permutations(n: usize) -> &'static [&'static [usize]] {
    match n {
        2 => &[&[0, 1], &[1, 0]],
        _ => &[&[0, 1, 2], &[0, 2, 1], &[1, 0, 2], &[1, 2, 0], &[2, 0, 1], &[2, 1, 0]],
    }
}

/// Reorders `current` so that entry k continues branch k of `previous`
/// (least total squared distance over all pairings).
fn continue_branches(previous: &[Complex64], current: &[Complex64]) -> Vec<Complex64> {
    let best = permutations(current.len())
        .iter()
        .map(|p| (p, previous.iter().zip(p.iter()).map(|(a, &j)| (a - current[j]).norm_sqr()).sum::<f64>()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| *p)
        .unwrap();
    best.iter().map(|&j| current[j]).collect()
}

fn frozen_window(sys: &SystemDefinition, traj: &Trajectory, a: f64, t: f64) -> FrozenWindow {
    let n = sys.dimension();
    let mut mean = Matrix::zeros(n);
    let mut trace = 0.0;
    let mut branch_sums = vec![0.0; n];
    let mut previous: Option<Vec<Complex64>> = None;
    for (s, w) in simpson(a, a + t, panels_for(t)) {
        let y = traj.at(s).expect("window lies inside the trajectory");
        let j = sys.jacobian(&y, s);
        mean.add_scaled(&j, w);
        trace += w * j.trace();
        let eig = eigen(&j).eigenvalues;
        let ordered = match &previous {
            None => eig,
            Some(prev) => continue_branches(prev, &eig),
        };
        for (acc, z) in branch_sums.iter_mut().zip(&ordered) {
            *acc += w * z.re;
        }
        previous = Some(ordered);
    }
    FrozenWindow {
        mean_jacobian: mean.scale(1.0 / t),
        trace_average: trace / t,
        le_v: descending(branch_sums.into_iter().map(|x| x / t).collect()),
    }
}

/// Real parts of the eigenvalues of (1/T)∫ J over `[a, a + t]`, descending.
pub fn window_le_j(sys: &SystemDefinition, traj: &Trajectory, a: f64, t: f64) -> Vec<f64> {
    let w = frozen_window(sys, traj, a, t);
    descending(eigen(&w.mean_jacobian).real_parts())
}

/// Eigenvalues of the symmetric part of the averaged Jacobian, descending.
pub fn window_le_o(sys: &SystemDefinition, traj: &Trajectory, a: f64, t: f64) -> Vec<f64> {
    let w = frozen_window(sys, traj, a, t);
    descending(eigen(&w.mean_jacobian.symmetric_part()).real_parts())
}

/// Time average of the frozen eigenvalue real parts, descending.
///
/// Eigenvalues are followed continuously from node to node, so each
/// component is the average along one eigenvalue branch.
pub fn window_le_v(sys: &SystemDefinition, traj: &Trajectory, a: f64, t: f64) -> Vec<f64> {
    frozen_window(sys, traj, a, t).le_v
}

/// (1/T)∫ tr J over the window.
pub fn window_trace_average(sys: &SystemDefinition, traj: &Trajectory, a: f64, t: f64) -> f64 {
    frozen_window(sys, traj, a, t).trace_average
}

/// Real parts of the generalized Floquet exponents over `[a, a + t]`, descending.
pub fn window_gfe(sys: &SystemDefinition, y: &StateVector, a: f64, t: f64, tol: &Tolerances) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("window length must be positive, got {t}")));
    }
    let (_, phi) = integrator::fundamental_matrix(sys, y, a, a + t, tol)?;
    Ok(floquet_from_monodromy(&phi)?.real)
}

/// Per-method results across all windows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    /// One descending component array per window.
    pub windows: Vec<Vec<f64>>,
    /// k-th components averaged across windows.
    pub average: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentReport {
    pub system: SystemInfo,
    pub dimension: usize,
    pub plan: WindowPlan,
    pub methods: Vec<MethodResult>,
    /// Window-by-window (1/T)∫ tr J.
    pub window_traces: Vec<f64>,
    /// (1/(mT))∫ tr J over all windows.
    pub trace_average: f64,
    pub zero_star: f64,
}

/// Knobs shared by every suite run.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub tolerances: Tolerances,
    pub zero_star: f64,
    pub execution: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { tolerances: Tolerances::default(), zero_star: DEFAULT_ZERO_STAR, execution: Execution::default() }
    }
}

struct WindowOutcome {
    components: Vec<Vec<f64>>,
    trace: f64,
}

fn evaluate_window(
    sys: &SystemDefinition,
    y: &StateVector,
    a: f64,
    t: f64,
    methods: &[Method],
    tol: &Tolerances,
) -> Result<WindowOutcome> {
    let wants_gfe = methods.contains(&Method::Gfe);
    let (traj, gfe) = if wants_gfe {
        let (traj, phi) = integrator::integrate_with_fundamental(sys, y, a, a + t, tol)?;
        (traj, Some(floquet_from_monodromy(&phi)?.real))
    } else {
        (integrator::integrate(sys, y, a, a + t, tol)?, None)
    };
    let frozen = frozen_window(sys, &traj, a, t);
    let components = methods
        .iter()
        .map(|m| match m {
            Method::LeJ => descending(eigen(&frozen.mean_jacobian).real_parts()),
            Method::LeO => descending(eigen(&frozen.mean_jacobian.symmetric_part()).real_parts()),
            Method::LeV => frozen.le_v.clone(),
            Method::Gfe => gfe.clone().expect("fundamental matrix integrated"),
        })
        .collect();
    Ok(WindowOutcome { components, trace: frozen.trace_average })
}

/// Runs the requested estimators over every window of `plan` starting from `y0`.
///
/// Window-start states come from one sequential pass; the windows themselves
/// are then evaluated independently and assembled in window order.
pub fn exponent_suite(
    sys: &SystemDefinition,
    y0: &StateVector,
    plan: &WindowPlan,
    methods: &[Method],
    options: &SuiteOptions,
) -> Result<ExponentReport> {
    plan.validate()?;
    if y0.dim() != sys.dimension() {
        return Err(Error::DimensionMismatch { expected: sys.dimension(), got: y0.dim() });
    }
    let mut methods: Vec<Method> = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidInput("no exponent method requested".into()));
    }
    let tol = &options.tolerances;

    let mut y = integrator::advance(sys, y0, plan.t_start, plan.window_start(0), tol)?;
    let mut starts = Vec::with_capacity(plan.count);
    for k in 0..plan.count {
        starts.push((plan.window_start(k), y));
        if k + 1 < plan.count {
            y = integrator::advance(sys, &y, plan.window_start(k), plan.window_start(k + 1), tol)?;
        }
    }

    let outcomes = options
        .execution
        .map(&starts, |(a, y)| evaluate_window(sys, y, *a, plan.window, &methods, tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let n = sys.dimension();
    let results = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let windows: Vec<Vec<f64>> = outcomes.iter().map(|o| o.components[i].clone()).collect();
            let average = (0..n).map(|k| windows.iter().map(|w| w[k]).sum::<f64>() / windows.len() as f64).collect();
            MethodResult { method, windows, average }
        })
        .collect();
    let window_traces: Vec<f64> = outcomes.iter().map(|o| o.trace).collect();
    let trace_average = window_traces.iter().sum::<f64>() / window_traces.len() as f64;
    Ok(ExponentReport {
        system: SystemInfo::from(sys),
        dimension: n,
        plan: *plan,
        methods: results,
        window_traces,
        trace_average,
        zero_star: options.zero_star,
    })
}

/// Renders components as `+`, `0*` or `-` against `threshold`, e.g. `(0*, -, -)`.
pub fn signature_of(components: &[f64], threshold: f64) -> String {
    let parts: Vec<&str> = components
        .iter()
        .map(|&c| {
            if c.abs() < threshold {
                "0*"
            } else if c > 0.0 {
                "+"
            } else {
                "-"
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

/// Sign signature of a method's averaged components, if the method was run.
pub fn sign_signature(report: &ExponentReport, method: Method) -> Option<String> {
    report.method(method).map(|r| signature_of(&r.average, report.zero_star))
}

impl ExponentReport {
    pub fn method(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == method)
    }

    pub fn average(&self, method: Method) -> Option<&[f64]> {
        self.method(method).map(|r| r.average.as_slice())
    }

    /// One row per window per method: `window,method,c1..cn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window,method");
        for k in 1..=self.dimension {
            out.push_str(&format!(",c{k}"));
        }
        out.push('\n');
        for k in 0..self.plan.count {
            for r in &self.methods {
                out.push_str(&format!("{k},{}", r.method));
                for c in &r.windows[k] {
                    out.push(',');
                    out.push_str(&g6(*c));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Averages, signatures and the trace average as a JSON object.
    pub fn summary_json(&self) -> serde_json::Value {
        let methods: serde_json::Map<String, serde_json::Value> = self
            .methods
            .iter()
            .map(|r| {
                (
                    r.method.label().to_string(),
                    serde_json::json!({
                        "average": r.average,
                        "sum": r.average.iter().sum::<f64>(),
                        "signature": signature_of(&r.average, self.zero_star),
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "system": self.system,
            "plan": self.plan,
            "trace_average": self.trace_average,
            "zero_star": self.zero_star,
            "methods": methods,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::lookup_system;
    use std::f64::consts::PI;

    fn sys(name: &str) -> SystemDefinition {
        lookup_system(name, &[]).unwrap()
    }

    #[test]
    fn method_parsing() {
        assert_eq!("le_j".parse::<Method>().unwrap(), Method::LeJ);
        assert_eq!("GFE".parse::<Method>().unwrap(), Method::Gfe);
        assert!("foo".parse::<Method>().is_err());
    }

    #[test]
    fn signatures() {
        assert_eq!(signature_of(&[0.0002, -0.1456, -0.6542], 5e-3), "(0*, -, -)");
        assert_eq!(signature_of(&[0.1343, -0.1016, -0.3665], 5e-3), "(+, -, -)");
        assert_eq!(signature_of(&[0.0, 0.0, 0.0], 5e-3), "(0*, 0*, 0*)");
    }

    #[test]
    fn plan_validation() {
        assert!(WindowPlan::new(0.0, 1).validate().is_err());
        assert!(WindowPlan::new(1.0, 0).validate().is_err());
        assert!(WindowPlan::new(1.0, 1).with_transient(-1.0).validate().is_err());
        assert_eq!(WindowPlan::new(2.0, 3).with_transient(5.0).with_start(1.0).window_start(2), 10.0);
    }

    #[test]
    fn branch_continuation_follows_nearest() {
        let prev = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let cur = [Complex64::new(-0.9, 0.0), Complex64::new(0.9, 0.0)];
        let got = continue_branches(&prev, &cur);
        assert_eq!(got, vec![cur[1], cur[0]]);
    }

    #[test]
    fn rosenbrock_window_values() {
        let r = sys("rosenbrock");
        let t = PI / 3.0;
        let tol = Tolerances::default();
        let y0 = r.default_seed();
        let traj = integrator::integrate(&r, &y0, 0.0, t, &tol).unwrap();
        let lej = window_le_j(&r, &traj, 0.0, t);
        assert!(lej.iter().all(|c| (c + 5.5).abs() < 1e-6), "{lej:?}");
        let lev = window_le_v(&r, &traj, 0.0, t);
        assert!((lev[0] + 1.0).abs() < 1e-8 && (lev[1] + 10.0).abs() < 1e-8, "{lev:?}");
        let gfe = window_gfe(&r, &y0, 0.0, t, &tol).unwrap();
        assert!((gfe[0] - 2.0).abs() < 1e-6 && (gfe[1] + 13.0).abs() < 1e-6, "{gfe:?}");
    }

    #[test]
    fn lorenz_sums_equal_constant_divergence() {
        let l = sys("lorenz");
        let report = exponent_suite(&l, &l.default_seed(), &WindowPlan::new(0.4, 5), &Method::ALL, &SuiteOptions::default())
            .unwrap();
        assert!((report.trace_average + 41.0 / 3.0).abs() < 1e-9);
        for r in &report.methods {
            for w in &r.windows {
                assert_eq!(w.len(), 3);
                assert!(w.windows(2).all(|p| p[0] >= p[1]));
                let tol = if r.method == Method::Gfe { 1e-4 } else { 1e-9 };
                assert!((w.iter().sum::<f64>() + 41.0 / 3.0).abs() < tol, "{}: {w:?}", r.method);
            }
        }
    }

    #[test]
    fn le_o_is_real_and_shares_the_trace() {
        let s = sys("silnikov");
        let y = s.default_seed();
        let traj = integrator::integrate(&s, &y, 0.0, 3.0, &Tolerances::default()).unwrap();
        let lej = window_le_j(&s, &traj, 0.0, 3.0);
        let leo = window_le_o(&s, &traj, 0.0, 3.0);
        let w = frozen_window(&s, &traj, 0.0, 3.0);
        assert!(!eigen(&w.mean_jacobian.symmetric_part()).has_complex_pair());
        assert!((lej.iter().sum::<f64>() - leo.iter().sum::<f64>()).abs() < 1e-12);
        assert!((leo.iter().sum::<f64>() + 0.8).abs() < 1e-12);
    }

    #[test]
    fn single_window_average_is_the_window() {
        let s = sys("silnikov");
        let report = exponent_suite(&s, &s.default_seed(), &WindowPlan::new(1.5, 1), &Method::ALL, &SuiteOptions::default())
            .unwrap();
        for r in &report.methods {
            assert_eq!(r.average, r.windows[0]);
        }
    }

    #[test]
    fn short_windows_converge_to_frozen_eigenvalues() {
        let s = sys("silnikov");
        let y = StateVector::new3(0.4, -0.3, 0.2);
        let frozen = descending(eigen(&s.jacobian(&y, 0.0)).real_parts());
        let tol = Tolerances::default();
        let mut last = [f64::INFINITY; 3];
        for t in [1e-2, 1e-3, 1e-4] {
            let traj = integrator::integrate(&s, &y, 0.0, t, &tol).unwrap();
            let errs = [
                window_le_j(&s, &traj, 0.0, t),
                window_le_v(&s, &traj, 0.0, t),
                window_gfe(&s, &y, 0.0, t, &tol).unwrap(),
            ]
            .map(|v| v.iter().zip(&frozen).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            for (e, l) in errs.iter().zip(&last) {
                assert!(e < l, "{errs:?} vs {last:?}");
            }
            last = errs;
        }
        assert!(last.iter().all(|e| *e < 1e-3), "{last:?}");
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let s = sys("silnikov");
        let plan = WindowPlan::new(2.0, 6).with_transient(10.0);
        let seq = SuiteOptions { execution: Execution::Sequential, ..Default::default() };
        let a = exponent_suite(&s, &s.default_seed(), &plan, &Method::ALL, &seq).unwrap();
        let b = exponent_suite(&s, &s.default_seed(), &plan, &Method::ALL, &SuiteOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_and_json_shapes() {
        let s = sys("vanderpol");
        let report = exponent_suite(&s, &s.default_seed(), &WindowPlan::new(1.0, 3), &[Method::Gfe, Method::LeJ], &SuiteOptions::default())
            .unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "window,method,c1,c2");
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert!(lines[1].starts_with("0,LE_J,"));
        let json = report.summary_json();
        assert!(json["methods"]["GFE"]["signature"].is_string());
        assert_eq!(json["plan"]["m"], 3);
    }

    #[test]
    fn blow_up_is_reported() {
        let s = sys("silnikov");
        let err = exponent_suite(&s, &StateVector::new3(3.0, 0.0, 0.0), &WindowPlan::new(1.0, 5), &Method::ALL, &SuiteOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err:?}");
    }
}
