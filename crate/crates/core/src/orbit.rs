//! Closed-orbit detection by Poincaré returns, cycle clustering and
//! section-crossing export.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::format::g6;
use crate::integrator::{self, Tolerances, Trajectory};
use crate::linalg::StateVector;
use crate::systems::SystemDefinition;

/// Flow speed below which a reference point is treated as an equilibrium.
pub const EQUILIBRIUM_SPEED: f64 = 1e-9;
/// Section-function slope below which a crossing counts as grazing.
pub const GRAZING_SLOPE: f64 = 1e-8;
/// Time resolution of refined crossings.
pub const CROSSING_TIME_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

/// Hyperplane `normal · (y − anchor) = 0` with a crossing direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectionSpec {
    pub anchor: StateVector,
    pub normal: StateVector,
    pub orientation: Orientation,
}

impl SectionSpec {
    /// Normalizes `normal`; fails if it is zero or of the wrong dimension.
    pub fn new(anchor: StateVector, normal: StateVector, orientation: Orientation) -> Result<Self> {
        if anchor.dim() != normal.dim() {
            return Err(Error::DimensionMismatch { expected: anchor.dim(), got: normal.dim() });
        }
        let normal = normal
            .normalized()
            .ok_or_else(|| Error::InvalidInput("section normal must be nonzero".into()))?;
        Ok(SectionSpec { anchor, normal, orientation })
    }

    /// Coordinate plane `y[axis] = value`.
    pub fn axis(dim: usize, axis: usize, value: f64, orientation: Orientation) -> Result<Self> {
        if axis >= dim {
            return Err(Error::InvalidInput(format!("axis {axis} out of range for dimension {dim}")));
        }
        let mut anchor = StateVector::zeros(dim);
        anchor[axis] = value;
        let mut normal = StateVector::zeros(dim);
        normal[axis] = 1.0;
        SectionSpec::new(anchor, normal, orientation)
    }

    /// Signed distance of `y` from the plane.
    pub fn value(&self, y: &StateVector) -> f64 {
        self.normal.dot(&(*y - self.anchor))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub state: StateVector,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CrossingScan {
    pub crossings: Vec<Crossing>,
    /// Sign changes skipped because the trajectory was nearly tangent.
    pub grazing_skipped: usize,
}

/// Detection points inserted between consecutive samples.
const SUBDIVISIONS: usize = 4;

/// All oriented transversal crossings of `section` along `traj`, in time order.
pub fn find_crossings(traj: &Trajectory, section: &SectionSpec) -> CrossingScan {
    let mut scan = CrossingScan::default();
    if traj.len() < 2 {
        return scan;
    }
    let s = section.orientation.sign();
    let g = |t: f64| section.value(&traj.at(t).expect("time inside trajectory"));
    let times = traj.times();
    let mut prev_t = times[0];
    let mut prev_g = section.value(&traj.state(0));
    for i in 1..times.len() {
        let (ta, tb) = (times[i - 1], times[i]);
        for k in 1..=SUBDIVISIONS {
            let t = if k == SUBDIVISIONS { tb } else { ta + (tb - ta) * k as f64 / SUBDIVISIONS as f64 };
            let gt = if k == SUBDIVISIONS { section.value(&traj.state(i)) } else { g(t) };
            if s * prev_g < 0.0 && s * gt >= 0.0 {
                match refine(traj, &g, prev_t, t, s) {
                    Some(c) => scan.crossings.push(c),
                    None => scan.grazing_skipped += 1,
                }
            }
            prev_t = t;
            prev_g = gt;
        }
    }
    scan
}

fn refine(traj: &Trajectory, g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, s: f64) -> Option<Crossing> {
    while hi - lo > CROSSING_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if s * g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let d = 1e-6_f64.min(0.5 * (traj.t_end() - traj.t_start()));
    let (a, b) = ((t - d).max(traj.t_start()), (t + d).min(traj.t_end()));
    let slope = (g(b) - g(a)) / (b - a);
    if slope.abs() < GRAZING_SLOPE {
        return None;
    }
    Some(Crossing { t, state: traj.at(t)? })
}

/// Crossings along the solution from `y0` over `[t0, t1]`, integrated in chunks
/// so long runs never hold the whole dense output.
pub fn section_crossings(
    sys: &SystemDefinition,
    y0: &StateVector,
    t0: f64,
    t1: f64,
    section: &SectionSpec,
    tol: &Tolerances,
) -> Result<CrossingScan> {
    let mut scan = CrossingScan::default();
    let mut t = t0;
    let mut y = *y0;
    while t < t1 {
        let end = (t + CHUNK).min(t1);
        let traj = integrator::integrate(sys, &y, t, end, tol)?;
        let part = find_crossings(&traj, section);
        scan.crossings.extend(part.crossings);
        scan.grazing_skipped += part.grazing_skipped;
        y = traj.last_state();
        t = end;
    }
    Ok(scan)
}

/// Crossings as CSV rows `t,x1..xn`.
pub fn crossings_csv(crossings: &[Crossing], dim: usize) -> String {
    let mut out = String::from("t");
    for k in 1..=dim {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for c in crossings {
        out.push_str(&g6(c.t));
        for v in c.state.as_slice() {
            out.push(',');
            out.push_str(&g6(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitClass {
    Equilibrium,
    Closed,
    Unresolved,
}

impl std::fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrbitClass::Equilibrium => "equilibrium",
            OrbitClass::Closed => "closed",
            OrbitClass::Unresolved => "unresolved",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitDiagnosis {
    pub classification: OrbitClass,
    pub period: Option<f64>,
    pub rotation: Option<usize>,
    pub reference: StateVector,
    pub reference_time: f64,
    /// Distance of the closing return (closed) or the nearest return otherwise.
    pub closure_residual: f64,
    pub crossings: Vec<Crossing>,
    pub grazing_skipped: usize,
}

impl OrbitDiagnosis {
    pub fn is_closed(&self) -> bool {
        self.classification == OrbitClass::Closed
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OrbitOptions {
    pub transient: f64,
    pub closure_tol: f64,
    /// Integration budget after the transient.
    pub max_time: f64,
    pub tolerances: Tolerances,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { transient: 500.0, closure_tol: 1e-6, max_time: 1000.0, tolerances: Tolerances::default() }
    }
}

const CHUNK: f64 = 50.0;

/// Integrates past the transient, then watches same-orientation returns to
/// the flow-normal section through the reference point until one closes.
pub fn detect_period(sys: &SystemDefinition, seed: &StateVector, options: &OrbitOptions) -> Result<OrbitDiagnosis> {
    if !(options.closure_tol > 0.0) {
        return Err(Error::InvalidInput("closure tolerance must be positive".into()));
    }
    if !(options.transient >= 0.0 && options.max_time > 0.0) {
        return Err(Error::InvalidInput("transient must be non-negative and max time positive".into()));
    }
    let tol = &options.tolerances;
    let t_ref = options.transient;
    let y_ref = integrator::advance(sys, seed, 0.0, t_ref, tol)?;
    let f = sys.eval_field(&y_ref, t_ref)?;
    let mut diag = OrbitDiagnosis {
        classification: OrbitClass::Unresolved,
        period: None,
        rotation: None,
        reference: y_ref,
        reference_time: t_ref,
        closure_residual: f64::INFINITY,
        crossings: Vec::new(),
        grazing_skipped: 0,
    };
    if f.norm() < EQUILIBRIUM_SPEED {
        diag.classification = OrbitClass::Equilibrium;
        diag.closure_residual = 0.0;
        return Ok(diag);
    }
    let section = SectionSpec::new(y_ref, f, Orientation::Positive)?;
    let t_max = t_ref + options.max_time;
    let mut t = t_ref;
    let mut y = y_ref;
    while t < t_max {
        let end = (t + CHUNK).min(t_max);
        let traj = integrator::integrate(sys, &y, t, end, tol)?;
        let scan = find_crossings(&traj, &section);
        diag.grazing_skipped += scan.grazing_skipped;
        for c in scan.crossings {
            let dist = c.state.distance(&y_ref);
            diag.crossings.push(c);
            diag.closure_residual = diag.closure_residual.min(dist);
            if dist <= options.closure_tol {
                diag.classification = OrbitClass::Closed;
                diag.period = Some(c.t - t_ref);
                diag.closure_residual = dist;
                diag.rotation = Some(orbit_rotation(sys, &y_ref, t_ref, c.t - t_ref, tol)?.max(diag.crossings.len()));
                return Ok(diag);
            }
        }
        y = traj.last_state();
        t = end;
    }
    Ok(diag)
}

/// Phases at which the rotation number is measured.
const ROTATION_PHASES: usize = 64;

/// Largest count of same-orientation returns in one period to a flow-normal
/// section, over evenly spaced phases of the closed orbit. A single section can
/// miss strands where the loops fan apart, so one phase alone undercounts.
fn orbit_rotation(
    sys: &SystemDefinition,
    y_ref: &StateVector,
    t_ref: f64,
    period: f64,
    tol: &Tolerances,
) -> Result<usize> {
    let traj = integrator::integrate(sys, y_ref, t_ref, t_ref + 2.0 * period, tol)?;
    let mut best = 0;
    for j in 0..ROTATION_PHASES {
        let tj = t_ref + (j as f64 + 0.5) * period / ROTATION_PHASES as f64;
        let p = traj.at(tj).expect("phase inside trajectory");
        let Ok(section) = SectionSpec::new(p, sys.eval_field(&p, tj)?, Orientation::Positive) else {
            continue;
        };
        let (lo, hi) = (tj + 0.5 * period, tj + 1.5 * period);
        let count = find_crossings(&traj, &section).crossings.iter().filter(|c| c.t >= lo && c.t < hi).count();
        best = best.max(count);
    }
    Ok(best)
}

/// A closed orbit sampled as a loop of points for geometric comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRepresentative {
    pub seed: StateVector,
    pub diagnosis: OrbitDiagnosis,
    pub loop_points: Vec<StateVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleCount {
    pub count: usize,
    pub representatives: Vec<CycleRepresentative>,
    /// Seeds that did not close, with the reason.
    pub excluded: Vec<(StateVector, String)>,
}

/// Points per sampled loop.
pub const LOOP_SAMPLES: usize = 2000;

/// `LOOP_SAMPLES` points spaced uniformly in time over one period from the reference point.
pub fn sample_loop(sys: &SystemDefinition, diag: &OrbitDiagnosis, tol: &Tolerances) -> Result<Vec<StateVector>> {
    let period = diag.period.ok_or_else(|| Error::InvalidInput("orbit is not closed".into()))?;
    let t0 = diag.reference_time;
    let traj = integrator::integrate(sys, &diag.reference, t0, t0 + period, tol)?;
    Ok((0..LOOP_SAMPLES)
        .map(|k| traj.at(t0 + period * k as f64 / LOOP_SAMPLES as f64).unwrap())
        .collect())
}

fn point_segment_distance(p: &StateVector, a: &StateVector, b: &StateVector) -> f64 {
    let ab = *b - *a;
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = ((*p - *a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&(*a + ab.scale(s)))
}

fn directed_hausdorff(points: &[StateVector], polygon: &[StateVector]) -> f64 {
    let n = polygon.len();
    points
        .iter()
        .map(|p| {
            (0..n)
                .map(|i| point_segment_distance(p, &polygon[i], &polygon[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two closed polylines, measuring each
/// vertex against the other loop's segments.
pub fn loop_distance(a: &[StateVector], b: &[StateVector]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Detects the orbit reached from each seed and clusters the closed ones by
/// loop distance below `match_tol`.
pub fn count_distinct_cycles(
    sys: &SystemDefinition,
    seeds: &[StateVector],
    match_tol: f64,
    options: &OrbitOptions,
    exec: Execution,
) -> Result<CycleCount> {
    let outcomes = exec.map(seeds, |seed| -> Result<std::result::Result<CycleRepresentative, String>> {
        let diagnosis = detect_period(sys, seed, options)?;
        if !diagnosis.is_closed() {
            return Ok(Err(diagnosis.classification.to_string()));
        }
        let loop_points = sample_loop(sys, &diagnosis, &options.tolerances)?;
        Ok(Ok(CycleRepresentative { seed: *seed, diagnosis, loop_points }))
    });
    let mut representatives: Vec<CycleRepresentative> = Vec::new();
    let mut excluded = Vec::new();
    for (seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome? {
            Err(reason) => excluded.push((*seed, reason)),
            Ok(rep) => {
                if !representatives.iter().any(|r| loop_distance(&r.loop_points, &rep.loop_points) < match_tol) {
                    representatives.push(rep);
                }
            }
        }
    }
    Ok(CycleCount { count: representatives.len(), representatives, excluded })
}
