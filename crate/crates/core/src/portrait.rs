//! Attractiveness portraits: a trajectory decorated at sample points with
//! eigen-direction segments colored by the sign of the eigenvalue real part,
//! plus SVG projection and the phase-shift comparison of two time series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::format::g6;
use crate::integrator::{self, Tolerances, Trajectory};
use crate::linalg::{cross, StateVector};
use crate::smalleig::{eigen, EigenStructure};
use crate::systems::SystemDefinition;

pub const FORMAT_TAG: &str = "aportrait/1";
pub const DEFAULT_NEUTRAL_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Attract,
    Repel,
    Neutral,
}

impl Polarity {
    pub fn of(re: f64, neutral_threshold: f64) -> Self {
        if re < -neutral_threshold {
            Polarity::Attract
        } else if re > neutral_threshold {
            Polarity::Repel
        } else {
            Polarity::Neutral
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    RealLine,
    ComplexPlaneArm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PortraitSegment {
    /// Always the sample point; kept out of the JSON, which stores it once per sample.
    #[serde(skip)]
    pub center: StateVector,
    #[serde(rename = "dir")]
    pub direction: StateVector,
    pub half_len: f64,
    pub re: f64,
    pub im: f64,
    pub polarity: Polarity,
    pub kind: SegmentKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortraitSample {
    pub t: f64,
    pub point: StateVector,
    pub segments: Vec<PortraitSegment>,
    /// Every eigenvalue with multiplicity, as `[re, im]`.
    pub eigenvalues: Vec<[f64; 2]>,
    /// Some eigenvector was missing, so fewer segments were drawn.
    pub defective: bool,
}

/// Segments at `y` with half length `scale·|λ|`.
pub fn portrait_at(sys: &SystemDefinition, y: &StateVector, t: f64, scale: f64, neutral_threshold: f64) -> Result<PortraitSample> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
    }
    let j = sys.eval_jacobian(y, t)?;
    let spec = eigen(&j);
    let mut segments = Vec::new();
    for (z, st) in spec.eigenvalues.iter().zip(&spec.structures) {
        let polarity = Polarity::of(z.re, neutral_threshold);
        let half_len = scale * z.norm();
        let seg = |direction, kind| PortraitSegment { center: *y, direction, half_len, re: z.re, im: z.im, polarity, kind };
        match st {
            Some(EigenStructure::RealLine(v)) => segments.push(seg(*v, SegmentKind::RealLine)),
            Some(EigenStructure::ComplexPlane(u, w)) => {
                segments.push(seg(*u, SegmentKind::ComplexPlaneArm));
                segments.push(seg(*w, SegmentKind::ComplexPlaneArm));
            }
            None => {}
        }
    }
    Ok(PortraitSample {
        t,
        point: *y,
        segments,
        eigenvalues: spec.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        defective: spec.defective,
    })
}

/// How eigenvalue moduli map to segment half lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalePolicy {
    /// half length = factor · |λ|.
    Fixed(f64),
    /// The longest full segment spans this fraction of the bounding-box diagonal.
    DiagonalFraction(f64),
}

impl Default for ScalePolicy {
    fn default() -> Self {
        ScalePolicy::DiagonalFraction(0.05)
    }
}

impl ScalePolicy {
    fn resolve(&self, diagonal: f64, max_modulus: f64) -> f64 {
        match *self {
            ScalePolicy::Fixed(s) => s,
            ScalePolicy::DiagonalFraction(f) if diagonal > 0.0 && max_modulus > 0.0 => f * diagonal / (2.0 * max_modulus),
            ScalePolicy::DiagonalFraction(f) => f,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColorMap {
    pub attract: String,
    pub repel: String,
    pub neutral: String,
    pub trajectory: String,
}

impl Default for ColorMap {
    fn default() -> Self {
        ColorMap {
            attract: "#0000FF".into(),
            repel: "#FF0000".into(),
            neutral: "#888888".into(),
            trajectory: "#00AA00".into(),
        }
    }
}

impl ColorMap {
    pub fn of(&self, p: Polarity) -> &str {
        match p {
            Polarity::Attract => &self.attract,
            Polarity::Repel => &self.repel,
            Polarity::Neutral => &self.neutral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PortraitPlan {
    #[serde(rename = "T")]
    pub window: f64,
    pub m: usize,
    pub transient: f64,
    pub t_start: f64,
}

impl PortraitPlan {
    pub fn new(window: f64, m: usize) -> Self {
        PortraitPlan { window, m, transient: 0.0, t_start: 0.0 }
    }

    pub fn with_transient(mut self, transient: f64) -> Self {
        self.transient = transient;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    fn of(points: &[StateVector], dim: usize) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for k in 0..dim {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        if points.is_empty() {
            min.fill(0.0);
            max.fill(0.0);
        }
        BoundingBox { min, max }
    }

    pub fn diagonal(&self) -> f64 {
        self.min.iter().zip(&self.max).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortraitDocument {
    pub format: &'static str,
    pub system: String,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub dimension: usize,
    pub plan: PortraitPlan,
    pub scale: f64,
    pub neutral_threshold: f64,
    pub polyline: Vec<StateVector>,
    pub samples: Vec<PortraitSample>,
    pub colors: ColorMap,
    pub bounding_box: BoundingBox,
}

impl PortraitDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("document serializes")
    }

    pub fn segments(&self) -> impl Iterator<Item = &PortraitSegment> {
        self.samples.iter().flat_map(|s| s.segments.iter())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PortraitOptions {
    pub tolerances: Tolerances,
    pub scale: ScalePolicy,
    pub neutral_threshold: f64,
    /// Target time spacing of the drawn polyline.
    pub polyline_spacing: f64,
    pub execution: Execution,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        PortraitOptions {
            tolerances: Tolerances::default(),
            scale: ScalePolicy::default(),
            neutral_threshold: DEFAULT_NEUTRAL_THRESHOLD,
            polyline_spacing: 0.05,
            execution: Execution::default(),
        }
    }
}

/// Discards the transient, integrates over `m·T`, and decorates the samples
/// at `t = kT`, k = 0..=m. The polyline is a uniform time grid through every
/// sample time.
pub fn build_portrait(
    sys: &SystemDefinition,
    y0: &StateVector,
    plan: &PortraitPlan,
    options: &PortraitOptions,
) -> Result<PortraitDocument> {
    if !(plan.window > 0.0) || !(plan.transient >= 0.0) || !(options.polyline_spacing > 0.0) {
        return Err(Error::InvalidInput("window and polyline spacing must be positive, transient non-negative".into()));
    }
    if y0.dim() != sys.dimension() {
        return Err(Error::DimensionMismatch { expected: sys.dimension(), got: y0.dim() });
    }
    let tol = &options.tolerances;
    let ta = plan.t_start + plan.transient;
    let ya = integrator::advance(sys, y0, plan.t_start, ta, tol)?;
    let (sample_points, polyline) = if plan.m == 0 {
        (vec![(ta, ya)], vec![ya])
    } else {
        let tb = ta + plan.m as f64 * plan.window;
        let traj = integrator::integrate(sys, &ya, ta, tb, tol)?;
        let at = |t: f64| traj.at(t.min(tb)).expect("inside trajectory");
        let samples: Vec<(f64, StateVector)> = (0..=plan.m)
            .map(|k| {
                let t = if k == plan.m { tb } else { ta + k as f64 * plan.window };
                (t, at(t))
            })
            .collect();
        let per = (plan.window / options.polyline_spacing).ceil().max(1.0) as usize;
        let mut line = Vec::with_capacity(plan.m * per + 1);
        for (k, (t, y)) in samples.iter().enumerate() {
            line.push(*y);
            if k < plan.m {
                for j in 1..per {
                    line.push(at(t + plan.window * j as f64 / per as f64));
                }
            }
        }
        (samples, line)
    };

    let unit: Vec<PortraitSample> = options
        .execution
        .map(&sample_points, |(t, y)| portrait_at(sys, y, *t, 1.0, options.neutral_threshold))
        .into_iter()
        .collect::<Result<_>>()?;
    let bounding_box = BoundingBox::of(&polyline, sys.dimension());
    let max_modulus = unit.iter().flat_map(|s| s.segments.iter()).map(|s| s.half_len).fold(0.0, f64::max);
    let scale = options.scale.resolve(bounding_box.diagonal(), max_modulus);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale policy produced {scale}")));
    }
    let samples = unit
        .into_iter()
        .map(|mut s| {
            for seg in &mut s.segments {
                seg.half_len = scale * (seg.re * seg.re + seg.im * seg.im).sqrt();
            }
            s
        })
        .collect();
    let info = crate::systems::SystemInfo::from(sys);
    Ok(PortraitDocument {
        format: FORMAT_TAG,
        system: info.name,
        parameters: info.parameters,
        dimension: sys.dimension(),
        plan: *plan,
        scale,
        neutral_threshold: options.neutral_threshold,
        polyline,
        samples,
        colors: ColorMap::default(),
        bounding_box,
    })
}

/// Linear map from phase space to the drawing plane plus the output size.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub name: String,
    pub rows: [[f64; 3]; 2],
    pub width: f64,
    pub height: f64,
}

impl View {
    /// `xy`, `xz`, `yz`, or `iso` (x' = (x − y)cos30°, y' = (x + y)sin30° + z).
    pub fn named(name: &str) -> Result<Self> {
        let c = 30f64.to_radians().cos();
        let s = 30f64.to_radians().sin();
        let rows = match name {
            "xy" => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            "xz" => [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            "yz" => [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            "iso" => [[c, -c, 0.0], [s, s, 1.0]],
            _ => return Err(Error::InvalidInput(format!("unknown view `{name}` (expected xy, xz, yz or iso)"))),
        };
        Ok(View { name: name.into(), rows, width: 800.0, height: 800.0 })
    }

    fn project(&self, p: &StateVector) -> (f64, f64) {
        let v = p.padded();
        let dot = |r: &[f64; 3]| r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
        (dot(&self.rows[0]), dot(&self.rows[1]))
    }

    fn rank_ok(&self, dim: usize) -> bool {
        let mut a = self.rows[0];
        let mut b = self.rows[1];
        for k in dim..3 {
            a[k] = 0.0;
            b[k] = 0.0;
        }
        let c = cross(&a, &b);
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() > 1e-12
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgStyle {
    pub trajectory_width: f64,
    pub segment_width: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { trajectory_width: 0.6, segment_width: 0.8 }
    }
}

/// Static SVG: trajectory first, then segments, in raw projected coordinates
/// inside a y-flipped group. Output is byte-deterministic.
pub fn render_svg(doc: &PortraitDocument, view: &View, style: &SvgStyle) -> Result<String> {
    if !(view.width > 0.0 && view.height > 0.0) {
        return Err(Error::InvalidInput("viewport must have positive size".into()));
    }
    if !view.rank_ok(doc.dimension) {
        return Err(Error::DegenerateProjection);
    }
    let line: Vec<(f64, f64)> = doc.polyline.iter().map(|p| view.project(p)).collect();
    type Projected<'a> = ((f64, f64), (f64, f64), &'a str);
    let segs: Vec<Projected> = doc
        .segments()
        .map(|s| {
            let a = s.center - s.direction.scale(s.half_len);
            let b = s.center + s.direction.scale(s.half_len);
            (view.project(&a), view.project(&b), doc.colors.of(s.polarity))
        })
        .collect();

    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in line.iter().chain(segs.iter().flat_map(|(a, b, _)| [a, b])) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
    let (vx, vw) = (x0 - pad, x1 - x0 + 2.0 * pad);
    // The group flips y, so the visible band is [−y1, −y0].
    let (vy, vh) = (-y1 - pad, y1 - y0 + 2.0 * pad);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\">\n",
        g6(view.width),
        g6(view.height),
        g6(vx),
        g6(vy),
        g6(vw),
        g6(vh)
    ));
    out.push_str("<style>polyline,line{vector-effect:non-scaling-stroke;stroke-linecap:round}</style>\n");
    out.push_str(&format!("<g transform=\"scale(1,-1)\" data-view=\"{}\">\n", view.name));
    out.push_str(&format!(
        "<g id=\"trajectory\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\">\n",
        doc.colors.trajectory,
        g6(style.trajectory_width)
    ));
    if !line.is_empty() {
        out.push_str("<polyline points=\"");
        for (i, (x, y)) in line.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&g6(*x));
            out.push(',');
            out.push_str(&g6(*y));
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</g>\n");
    out.push_str(&format!("<g id=\"segments\" stroke-width=\"{}\">\n", g6(style.segment_width)));
    for ((ax, ay), (bx, by), color) in &segs {
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\"/>\n",
            g6(*ax),
            g6(*ay),
            g6(*bx),
            g6(*by),
            color
        ));
    }
    out.push_str("</g>\n</g>\n</svg>\n");
    Ok(out)
}

/// Result of aligning a chaotic series with a periodic one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    /// Best s with chaotic(t) ≈ periodic(t − s), in [0, period).
    pub shift: f64,
    /// Pearson correlation at the best shift.
    pub score: f64,
    /// Sample times relative to the chaotic trajectory's start.
    pub times: Vec<f64>,
    pub chaotic: Vec<f64>,
    pub periodic: Vec<f64>,
}

pub const COMPARE_SHIFTS: usize = 1024;
pub const COMPARE_SPACING: f64 = 0.1;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Scans `COMPARE_SHIFTS` phase shifts over one period and returns the one
/// maximizing the correlation of component `component`, sampled every
/// `COMPARE_SPACING` time units across the chaotic trajectory. The periodic
/// trajectory is read modulo `period` from its own start.
pub fn hidden_structure_compare(
    chaotic: &Trajectory,
    periodic: &Trajectory,
    component: usize,
    period: f64,
    exec: Execution,
) -> Result<Comparison> {
    if component >= chaotic.dim() || component >= periodic.dim() {
        return Err(Error::InvalidInput(format!("component {component} out of range")));
    }
    if !(period > 0.0) {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    let span = chaotic.t_end() - chaotic.t_start();
    if span < period {
        return Err(Error::ShortComparisonSpan { span, period });
    }
    let cover = periodic.t_end() - periodic.t_start();
    if cover < period * (1.0 - 1e-12) {
        return Err(Error::ShortComparisonSpan { span: cover, period });
    }
    let n = (span / COMPARE_SPACING).floor() as usize + 1;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * COMPARE_SPACING).collect();
    let c0 = chaotic.t_start();
    let chaotic_series: Vec<f64> = times.iter().map(|t| chaotic.at(c0 + t).unwrap()[component]).collect();
    let p0 = periodic.t_start();
    let periodic_series = |shift: f64| -> Vec<f64> {
        times
            .iter()
            .map(|t| {
                let phase = (t - shift).rem_euclid(period).min(cover);
                periodic.at(p0 + phase).unwrap()[component]
            })
            .collect()
    };
    let scores = exec.map_range(COMPARE_SHIFTS, |j| pearson(&chaotic_series, &periodic_series(period * j as f64 / COMPARE_SHIFTS as f64)));
    let (best, score) = scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &s)| if s > acc.1 { (j, s) } else { acc });
    let shift = period * best as f64 / COMPARE_SHIFTS as f64;
    Ok(Comparison { shift, score, periodic: periodic_series(shift), chaotic: chaotic_series, times })
}

impl Comparison {
    /// `t,chaotic,periodic` rows at six significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,chaotic,periodic\n");
        for ((t, a), b) in self.times.iter().zip(&self.chaotic).zip(&self.periodic) {
            out.push_str(&format!("{},{},{}\n", g6(*t), g6(*a), g6(*b)));
        }
        out
    }
}
