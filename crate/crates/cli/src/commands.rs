use anyhow::{anyhow, bail, Context, Result};
use gfe_core::exponents::{exponent_suite, signature_of, ExponentReport, Method, SuiteOptions, WindowPlan, DEFAULT_ZERO_STAR};
use gfe_core::format::g6;
use gfe_core::integrator::{advance, integrate};
use gfe_core::orbit::{
    count_distinct_cycles, crossings_csv, detect_period, section_crossings, OrbitClass, OrbitDiagnosis, OrbitOptions,
    Orientation,
    SectionSpec,
};
use gfe_core::portrait::{
    build_portrait, hidden_structure_compare, render_svg, PortraitOptions, PortraitPlan, ScalePolicy, SvgStyle, View,
    DEFAULT_NEUTRAL_THRESHOLD,
};
use gfe_core::{lookup_system, Execution, StateVector, SystemDefinition};

use crate::config::{merge_assignments, parse_list, parse_methods, RunConfig};
use crate::{CompareArgs, ExponentsArgs, PeriodArgs, PortraitArgs, SweepArgs};

/// Runs `f` on a pool of `workers` threads when a count is given.
fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().context("building worker pool")?;
        return Ok(pool.install(f));
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    Ok(f())
}

fn describe(sys: &SystemDefinition) -> String {
    let params: Vec<String> = sys.parameters().iter().map(|(k, v)| format!("{k}={}", g6(*v))).collect();
    if params.is_empty() {
        sys.name().to_string()
    } else {
        format!("{} ({})", sys.name(), params.join(", "))
    }
}

fn orbit_options(cfg: &RunConfig, closure_tol: Option<f64>, max_time: Option<f64>) -> OrbitOptions {
    let d = OrbitOptions::default();
    OrbitOptions {
        transient: cfg.orbit_transient(),
        closure_tol: closure_tol.unwrap_or(d.closure_tol),
        max_time: max_time.unwrap_or(d.max_time),
        tolerances: cfg.tolerances,
    }
}

/// Transient growth factor and retry count when the default transient leaves
/// the orbit unresolved. Convergence slows sharply near bifurcations.
const TRANSIENT_GROWTH: f64 = 4.0;
const TRANSIENT_RETRIES: usize = 2;

/// `detect_period`, retried with longer transients unless `--transient` was given.
fn find_orbit(cfg: &RunConfig, sys: &SystemDefinition, options: OrbitOptions) -> Result<OrbitDiagnosis> {
    search_orbit(sys, &cfg.seed, options, cfg.transient.is_none())
}

fn search_orbit(sys: &SystemDefinition, seed: &StateVector, options: OrbitOptions, escalate: bool) -> Result<OrbitDiagnosis> {
    let mut options = options;
    let mut d = detect_period(sys, seed, &options)?;
    let mut retries = 0;
    while d.classification == OrbitClass::Unresolved
        && escalate
        && options.transient > 0.0
        && retries < TRANSIENT_RETRIES
    {
        options.transient *= TRANSIENT_GROWTH;
        retries += 1;
        log::info!("orbit unresolved, retrying with transient {}", g6(options.transient));
        d = detect_period(sys, seed, &options)?;
    }
    Ok(d)
}

fn print_diagnosis(d: &OrbitDiagnosis) {
    println!("classification: {}", d.classification);
    if let (Some(p), Some(r)) = (d.period, d.rotation) {
        println!("period: {}", g6(p));
        println!("rotation: {r}");
    }
    println!("closure residual: {}", g6(d.closure_residual));
    let point: Vec<String> = d.reference.as_slice().iter().map(|v| g6(*v)).collect();
    println!("reference: ({}) at t = {}", point.join(", "), g6(d.reference_time));
    if d.grazing_skipped > 0 {
        println!("grazing crossings skipped: {}", d.grazing_skipped);
    }
}

fn print_report(report: &ExponentReport) {
    for r in &report.methods {
        let comps: Vec<String> = r.average.iter().map(|c| format!("{:>11}", g6(*c))).collect();
        println!("{:<5}{}  {}", r.method.label(), comps.join(""), signature_of(&r.average, report.zero_star));
    }
    println!("trace average: {}", g6(report.trace_average));
}

pub fn exponents(args: ExponentsArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common)?;
    let methods = parse_methods(cfg.file.pick("methods", args.methods)?)?;
    let zero_star = cfg.file.pick("zero-star", args.zero_star)?.unwrap_or(DEFAULT_ZERO_STAR);
    let options = SuiteOptions { tolerances: cfg.tolerances, zero_star, execution: cfg.execution() };
    let sys = &cfg.system;
    println!("system: {}", describe(sys));

    let report = with_workers(cfg.workers, || -> Result<ExponentReport> {
        let (y0, plan) = match cfg.window {
            Some(t) => (cfg.seed, WindowPlan::new(t, cfg.count.unwrap_or(1)).with_transient(cfg.attractor_transient())),
            None => {
                let d = find_orbit(&cfg, sys, orbit_options(&cfg, None, None))?;
                if !d.is_closed() {
                    bail!("no closed orbit found ({}); pass --T for fixed windows", d.classification);
                }
                let period = d.period.unwrap();
                println!("closed orbit: period {}, rotation {}", g6(period), d.rotation.unwrap());
                (d.reference, WindowPlan::new(period, cfg.count.unwrap_or(1)).with_start(d.reference_time))
            }
        };
        println!("plan: T={} m={} transient={}", g6(plan.window), plan.count, g6(plan.transient));
        Ok(exponent_suite(sys, &y0, &plan, &methods, &options)?)
    })??;

    print_report(&report);
    let csv = cfg.write("exponents.csv", &report.to_csv())?;
    let json = cfg.write("exponents.json", &(serde_json::to_string_pretty(&report.summary_json())? + "\n"))?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn parse_axis(s: &str, dim: usize) -> Result<usize> {
    let axis = match s.trim() {
        "x" | "q" => 0,
        "y" | "p" => 1,
        "z" | "zeta" => 2,
        other => other.parse().map_err(|_| anyhow!("unknown axis `{other}`"))?,
    };
    if axis >= dim {
        bail!("axis `{s}` out of range for a {dim}-dimensional system");
    }
    Ok(axis)
}

pub fn period(args: PeriodArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common)?;
    let closure_tol = cfg.file.pick("closure-tol", args.closure_tol)?;
    let max_time = cfg.file.pick("max-time", args.max_time)?;
    let section = cfg.file.pick("section", args.section)?;
    let want_crossings = cfg.file.flag("crossings", args.crossings)? || section.is_some();
    let options = orbit_options(&cfg, closure_tol, max_time);
    let sys = &cfg.system;
    println!("system: {}", describe(sys));

    let diag = find_orbit(&cfg, sys, options)?;
    print_diagnosis(&diag);

    if want_crossings {
        let (rows, note) = match section {
            Some(spec) => {
                let (axis, value) = spec.split_once('=').ok_or_else(|| anyhow!("--section expects AXIS=VALUE"))?;
                let value: f64 = value.trim().parse().map_err(|_| anyhow!("--section value `{value}` is not a number"))?;
                let plane = SectionSpec::axis(sys.dimension(), parse_axis(axis, sys.dimension())?, value, Orientation::Positive)?;
                let start = advance(sys, &cfg.seed, 0.0, options.transient, &cfg.tolerances)?;
                let scan = section_crossings(
                    sys,
                    &start,
                    options.transient,
                    options.transient + options.max_time,
                    &plane,
                    &cfg.tolerances,
                )?;
                (scan.crossings, format!("section {spec}"))
            }
            None => (diag.crossings.clone(), "flow-normal section".to_string()),
        };
        let path = cfg.write("crossings.csv", &crossings_csv(&rows, sys.dimension()))?;
        println!("wrote {} ({} crossings of the {note})", path.display(), rows.len());
    }
    Ok(())
}

pub fn portrait(args: PortraitArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common)?;
    let scale = match (cfg.file.pick("scale", args.scale)?, cfg.file.pick("scale-fraction", args.scale_fraction)?) {
        (Some(s), _) => ScalePolicy::Fixed(s),
        (None, Some(f)) => ScalePolicy::DiagonalFraction(f),
        (None, None) => ScalePolicy::default(),
    };
    let options = PortraitOptions {
        tolerances: cfg.tolerances,
        scale,
        neutral_threshold: cfg.file.pick("neutral", args.neutral)?.unwrap_or(DEFAULT_NEUTRAL_THRESHOLD),
        polyline_spacing: cfg.file.pick("spacing", args.spacing)?.unwrap_or(0.05),
        execution: cfg.execution(),
    };
    let views = cfg.views.iter().map(|v| View::named(v)).collect::<Result<Vec<_>, _>>()?;
    let plan = PortraitPlan::new(cfg.window.unwrap_or(0.4), cfg.count.unwrap_or(1000)).with_transient(cfg.attractor_transient());
    let sys = &cfg.system;
    println!("system: {}", describe(sys));
    println!("plan: T={} m={} transient={}", g6(plan.window), plan.m, g6(plan.transient));

    let doc = with_workers(cfg.workers, || build_portrait(sys, &cfg.seed, &plan, &options))??;
    let json = cfg.write("portrait.json", &doc.to_json())?;
    println!("wrote {} ({} samples, scale {})", json.display(), doc.samples.len(), g6(doc.scale));
    for view in &views {
        let svg = render_svg(&doc, view, &SvgStyle::default()).with_context(|| format!("view {}", view.name))?;
        let path = cfg.write(&format!("portrait_{}.svg", view.name), &svg)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

struct SweepRow {
    value: f64,
    classification: String,
    period: Option<f64>,
    rotation: Option<usize>,
    cycles: Option<usize>,
    components: Vec<Option<Vec<f64>>>,
    error: String,
}

fn sweep_row(
    cfg: &RunConfig,
    key: &str,
    value: f64,
    methods: &[Method],
    match_tol: f64,
    seeds: &[StateVector],
) -> SweepRow {
    let mut row = SweepRow {
        value,
        classification: "error".into(),
        period: None,
        rotation: None,
        cycles: None,
        components: vec![None; methods.len()],
        error: String::new(),
    };
    let result = (|| -> Result<()> {
        let mut overrides = cfg.overrides.clone();
        overrides.retain(|(k, _)| k != key);
        overrides.push((key.to_string(), value));
        let sys = lookup_system(cfg.system.name(), &overrides)?;
        let options = orbit_options(cfg, None, None);
        let count = count_distinct_cycles(&sys, seeds, match_tol, &options, Execution::Sequential)?;
        row.cycles = Some(count.count);
        let Some(rep) = count.representatives.first() else {
            row.classification = count.excluded.first().map(|e| e.1.clone()).unwrap_or_else(|| "unresolved".into());
            return Ok(());
        };
        let d = &rep.diagnosis;
        row.classification = d.classification.to_string();
        row.period = d.period;
        row.rotation = d.rotation;
        let plan = WindowPlan::new(d.period.unwrap(), 1).with_start(d.reference_time);
        let opts = SuiteOptions { tolerances: cfg.tolerances, execution: Execution::Sequential, ..Default::default() };
        let report = exponent_suite(&sys, &d.reference, &plan, methods, &opts)?;
        for (slot, m) in row.components.iter_mut().zip(methods) {
            *slot = report.average(*m).map(<[f64]>::to_vec);
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = format!("{e:#}");
    }
    row
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common)?;
    let key = cfg.file.pick::<String>("param", args.param)?.ok_or_else(|| anyhow!("--param is required"))?;
    if cfg.system.parameter(&key).is_none() {
        bail!("system `{}` has no parameter `{key}`", cfg.system.name());
    }
    let values: Vec<f64> = parse_list(&cfg.file.pick::<String>("values", args.values)?.ok_or_else(|| anyhow!("--values is required"))?)?;
    let methods = parse_methods(cfg.file.pick("methods", args.methods)?)?;
    let match_tol = cfg.file.pick("match-tol", args.match_tol)?.unwrap_or(1e-3);
    let seeds = [cfg.seed, cfg.seed.scale(-1.0)];
    let n = cfg.system.dimension();
    println!("system: {}; sweeping {key} over {} values", describe(&cfg.system), values.len());

    let exec = cfg.execution();
    let rows = with_workers(cfg.workers, || exec.map(&values, |v| sweep_row(&cfg, &key, *v, &methods, match_tol, &seeds)))?;

    let mut header = vec![key.clone(), "classification".into(), "period".into(), "rotation".into(), "cycles".into()];
    for m in &methods {
        for k in 1..=n {
            header.push(format!("{}_c{k}", m.label()));
        }
    }
    header.push("error".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    let opt = |x: Option<f64>| x.map(g6).unwrap_or_default();
    for r in &rows {
        let mut rec = vec![
            g6(r.value),
            r.classification.clone(),
            opt(r.period),
            r.rotation.map(|x| x.to_string()).unwrap_or_default(),
            r.cycles.map(|x| x.to_string()).unwrap_or_default(),
        ];
        for c in &r.components {
            match c {
                Some(v) => rec.extend(v.iter().map(|x| g6(*x))),
                None => rec.extend(std::iter::repeat_n(String::new(), n)),
            }
        }
        rec.push(r.error.clone());
        w.write_record(&rec)?;
        println!(
            "{key}={}: {} period={} rotation={} cycles={}{}",
            g6(r.value),
            r.classification,
            opt(r.period),
            r.rotation.map(|x| x.to_string()).unwrap_or("-".into()),
            r.cycles.map(|x| x.to_string()).unwrap_or("-".into()),
            if r.error.is_empty() { String::new() } else { format!(" ({})", r.error) }
        );
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    let path = cfg.write("sweep.csv", std::str::from_utf8(&bytes)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common)?;
    let sys = &cfg.system;
    let periodic_overrides = merge_assignments(
        &cfg.overrides.iter().map(|(k, v)| format!("{k}={v}")).chain(cfg.file.all("periodic-set").iter().cloned()).collect::<Vec<_>>(),
        &args.periodic_set,
    )?;
    let psys = lookup_system(sys.name(), &periodic_overrides)?;
    let component = parse_axis(&cfg.file.pick::<String>("component", args.component)?.unwrap_or_else(|| "x".into()), sys.dimension())?;
    let span = cfg.file.pick("span", args.span)?.unwrap_or(1000.0);
    if span.is_nan() || span <= 0.0 {
        bail!("--span must be positive");
    }
    println!("chaotic: {}", describe(sys));
    println!("periodic: {}", describe(&psys));

    let result = with_workers(cfg.workers, || -> Result<_> {
        let transient = cfg.attractor_transient();
        let start = advance(sys, &cfg.seed, 0.0, transient, &cfg.tolerances)?;
        let chaotic = integrate(sys, &start, transient, transient + span, &cfg.tolerances)?;
        // --transient belongs to the chaotic run; the orbit search keeps its own default.
        let orbit = OrbitOptions { tolerances: cfg.tolerances, ..Default::default() };
        let d = search_orbit(&psys, &cfg.seed, orbit, true)?;
        if !d.is_closed() {
            bail!("periodic parameter set gives no closed orbit ({})", d.classification);
        }
        let (t0, p) = (d.reference_time, d.period.unwrap());
        let periodic = integrate(&psys, &d.reference, t0, t0 + p, &cfg.tolerances)?;
        let cmp = hidden_structure_compare(&chaotic, &periodic, component, p, cfg.execution())?;
        Ok((d, cmp))
    })??;
    let (d, cmp) = result;
    println!("periodic orbit: period {}, rotation {}", g6(d.period.unwrap()), d.rotation.unwrap());
    println!("best shift: {}", g6(cmp.shift));
    println!("score: {}", g6(cmp.score));

    let mut out = String::from("t,chaotic,periodic,shift,score\n");
    let (shift, score) = (g6(cmp.shift), g6(cmp.score));
    for ((t, a), b) in cmp.times.iter().zip(&cmp.chaotic).zip(&cmp.periodic) {
        out.push_str(&format!("{},{},{},{shift},{score}\n", g6(*t), g6(*a), g6(*b)));
    }
    let path = cfg.write("compare.csv", &out)?;
    println!("wrote {}", path.display());
    Ok(())
}
