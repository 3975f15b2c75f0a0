use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use sepdist::dephasing::{
    dephase_forward, dephase_invert, invert_mean, phase_variance_from_degrees, DegreeReading, DephasingParams,
};
use sepdist::gaussian::{min_physicality_eigenvalue, GaussianState};
use sepdist::io::{self, VerdictReport, SCHEMA_VERSION};
use sepdist::linalg::{symmetric_eigenvalues, Matrix};
use sepdist::protocol::{
    a_posteriori_correct, estimate_covariance, run_protocol as run_trace, simulate_ensemble, EnsembleOptions,
    LossOrdering, NoisePlan, ProtocolConfig, Variant, CH_AP, CH_AX, CH_BP, CH_BX, STAGE_AFTER_AC,
};
use sepdist::separability::{classicality_check, optimize_gain, ppt_test, CriterionPoint};
use sepdist::tomography::{canonical_settings, tomography_report, BlockMode, MeasurementSetting, TomographyReport};
use sepdist::{reference, Error};

use crate::manifest::{out_path, RunManifest};
use crate::{
    AnalyzeArgs, DephaseArgs, OrderingArg, PairArg, ProtocolFlags, ReadingArg, ReportArgs, RunProtocolArgs,
    SamplingArg, SimulateArgs, TomographyArgs, VariantArg,
};

/// Bad flag combination that clap cannot express.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "usage: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("{what}: cannot parse `{t}` as a number"))))
        .collect()
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::BeforeBs => Variant::DisplaceBBeforeBs,
        VariantArg::AfterBs => Variant::DisplaceBAfterBs,
        VariantArg::APosteriori => Variant::APosteriori,
    }
}

fn protocol_config(f: &ProtocolFlags) -> Result<ProtocolConfig<f64>> {
    let grid = parse_list(&f.gain_grid, "--gain-grid")?;
    if grid.len() != 3 || grid[2].fract() != 0.0 || grid[2] < 2.0 {
        return Err(usage("--gain-grid expects `lo,hi,points` with an integer point count ≥ 2"));
    }
    let ordering = match f.loss_ordering {
        OrderingArg::ModulationThenLoss => LossOrdering::ModulationThenLoss,
        OrderingArg::LossThenModulation => LossOrdering::LossThenModulation,
    };
    let mut cfg = ProtocolConfig::new(f.r, variant(f.variant))
        .with_loss(f.loss)
        .with_detector_gain(f.detector_gain)
        .with_loss_ordering(ordering);
    cfg.gain_grid = (grid[0], grid[1], grid[2] as usize);
    cfg.validate()?;
    Ok(cfg)
}

fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

fn criterion_csv(curve: &[CriterionPoint<f64>]) -> String {
    let mut s = String::from("g,var_x_norm,var_p_norm,product\n");
    for p in curve {
        let _ = writeln!(s, "{},{},{},{}", sci(p.gain), sci(p.var_x_norm), sci(p.var_p_norm), sci(p.product));
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    io::write_text(path, text)?;
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub fn run_protocol(args: RunProtocolArgs) -> Result<()> {
    let cfg = protocol_config(&args.protocol)?;
    let trace = run_trace(&cfg)?;
    let trace_path = out_path(&args.out, "trace.json")?;
    let csv_path = out_path(&args.out, "criterion.csv")?;
    write(&trace_path, &io::to_json(&json!({ "schema_version": SCHEMA_VERSION, "trace": trace }))?)?;
    write(&csv_path, &criterion_csv(&trace.criterion_curve))?;

    let mut m = RunManifest::new("run-protocol", serde_json::to_value(&cfg)?, Some(args.seed));
    m.output(&trace_path)?;
    m.output(&csv_path)?;
    m.write(&out_path(&args.out, "manifest.json")?)?;

    println!("r = {}  variant = {:?}  bob_loss = {}", cfg.r, cfg.variant, cfg.bob_loss);
    for v in &trace.verdicts {
        println!(
            "  {:<12} {:<8} min eig {:>12.6}  {}",
            v.stage,
            v.cut,
            v.verdict.min_eigenvalue,
            if v.verdict.separable { "separable" } else { "entangled" }
        );
    }
    println!("  g_opt = {:.6}  min product = {:.6}", trace.optimum.g_opt, trace.optimum.point.product);
    if let Some(u) = &trace.uncorrected_optimum {
        println!("  uncorrected min product = {:.6}", u.point.product);
    }
    Ok(())
}

fn analysis(state: &GaussianState<f64>, args: &AnalyzeArgs) -> Result<VerdictReport> {
    let none = !(args.ppt || args.duan || args.physical || args.classical);
    let mut r = VerdictReport { schema_version: SCHEMA_VERSION, ..Default::default() };
    if args.ppt || none {
        let v = ppt_test(state, args.mode)?;
        r.eigenvalue_sum = Some(v.eigenvalues.iter().sum());
        r.eigenvalues = Some(v.eigenvalues);
        r.transposed_mode = Some(v.transposed_mode);
        r.separable = Some(v.separable);
    }
    if args.duan || (none && state.n_modes() == 2) {
        if state.n_modes() != 2 {
            return Err(Error::Validation(format!("--duan needs a two-mode state, got {} modes", state.n_modes())).into());
        }
        let opt = optimize_gain(state, args.g_min, args.g_max)?;
        r.g_opt = Some(opt.g_opt);
        r.product = Some(opt.point.product);
        r.entangled_by_product = Some(opt.point.product < 1.0);
    }
    if args.physical || none {
        let e = min_physicality_eigenvalue(state)?;
        r.physical_min_eigenvalue = Some(e);
        r.physical = Some(e >= -sepdist::gaussian::PHYSICALITY_TOL);
    }
    if args.classical || none {
        let c = classicality_check(state)?;
        r.gamma_eigenvalues = Some(symmetric_eigenvalues(state.gamma())?);
        r.classical = Some(!c.squeezed);
    }
    Ok(r)
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let state = io::read_state(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let report = analysis(&state, &args)?;
    let text = io::to_json(&report)?;
    print!("{text}");
    if let Some(out) = &args.out {
        write(out, &text)?;
        let config = json!({
            "mode": args.mode, "ppt": args.ppt, "duan": args.duan, "physical": args.physical,
            "classical": args.classical, "g_min": args.g_min, "g_max": args.g_max,
        });
        let mut m = RunManifest::new("analyze", config, None);
        m.input(&args.file)?;
        m.output(out)?;
        m.write(&manifest_path_for(out))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DephaseOutput {
    schema_version: u32,
    direction: &'static str,
    sigma2: f64,
    transmittance: f64,
    gamma: Matrix<f64>,
    mean: Vec<f64>,
    physical_min_eigenvalue: f64,
    physical: bool,
    gamma_eigenvalues: Vec<f64>,
    classical: bool,
}

fn reading(r: ReadingArg) -> DegreeReading {
    match r {
        ReadingArg::SquareDegrees => DegreeReading::SquareDegrees,
        ReadingArg::StdDevDegrees => DegreeReading::StdDevDegrees,
    }
}

pub fn dephase(args: DephaseArgs) -> Result<()> {
    let state = io::read_state(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let sigma2 = match (args.sigma2, args.phase_noise_deg) {
        (Some(s), _) => s,
        (None, Some(deg)) => phase_variance_from_degrees(deg, reading(args.reading)),
        (None, None) => return Err(usage("one of --sigma2 or --phase-noise-deg is required")),
    };
    let d = match &args.d {
        Some(text) => parse_list(text, "--d")?,
        None if args.invert => return Err(usage("--invert requires --d")),
        None => state.mean().to_vec(),
    };
    if d.len() != 4 {
        return Err(usage(format!("--d expects four numbers, got {}", d.len())));
    }
    let params = DephasingParams::new(sigma2, args.transmittance)?;
    let (gamma, mean, direction) = if args.invert {
        (dephase_invert(state.gamma(), &d, &params)?, invert_mean(&d, &params)?, "invert")
    } else {
        let (g, m) = dephase_forward(state.gamma(), &d, &params)?;
        (g, m, "forward")
    };
    let out_state = GaussianState::new(gamma.clone(), mean.clone())?;
    let phys = min_physicality_eigenvalue(&out_state)?;
    let classical = classicality_check(&out_state)?;
    let result = DephaseOutput {
        schema_version: SCHEMA_VERSION,
        direction,
        sigma2,
        transmittance: args.transmittance,
        gamma,
        mean,
        physical_min_eigenvalue: phys,
        physical: phys >= -sepdist::gaussian::PHYSICALITY_TOL,
        gamma_eigenvalues: symmetric_eigenvalues(out_state.gamma())?,
        classical: !classical.squeezed,
    };
    let text = io::to_json(&result)?;
    print!("{text}");
    if let Some(out) = &args.out {
        write(out, &text)?;
        let config = json!({
            "direction": direction, "d": d, "sigma2": sigma2, "transmittance": args.transmittance,
        });
        let mut m = RunManifest::new("dephase", config, None);
        m.input(&args.file)?;
        m.output(out)?;
        m.write(&manifest_path_for(out))?;
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = protocol_config(&args.protocol)?;
    let mut options = EnsembleOptions::new(args.n_outer, args.n_inner);
    if let SamplingArg::Grid = args.sampling {
        options = options.grid();
    }
    let mut set = simulate_ensemble(&cfg, options, args.seed)?;
    if args.correct {
        set = a_posteriori_correct(&set, &NoisePlan::new(cfg.r)?, args.fraction)?;
    }
    let csv_path = out_path(&args.out, "samples.csv")?;
    let side_path = out_path(&args.out, "samples.json")?;
    io::write_sample_set(&set, &csv_path, &side_path)?;

    let config = json!({
        "protocol": cfg, "options": options, "correct": args.correct, "fraction": args.fraction,
    });
    let mut m = RunManifest::new("simulate", config, Some(args.seed));
    m.output(&csv_path)?;
    m.output(&side_path)?;
    m.write(&out_path(&args.out, "manifest.json")?)?;

    let ab = estimate_covariance(&set.records, &[CH_AX, CH_AP, CH_BX, CH_BP])?;
    let opt = optimize_gain(&GaussianState::from_covariance(ab)?, cfg.gain_grid.0, cfg.gain_grid.1)?;
    println!("records = {}  seed = {}", set.len(), set.seed);
    if let Some(c) = &set.correction {
        println!("  correction fraction = {:.6}", c.fraction);
    }
    println!("  estimated A'B' min product = {:.6} at g = {:.6}", opt.point.product, opt.g_opt);
    Ok(())
}

fn parse_settings(text: &str) -> Result<Vec<MeasurementSetting>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let v = parse_list(pair, "--settings")?;
            if v.len() != 2 {
                return Err(usage(format!("--settings entry `{pair}` needs two angles")));
            }
            Ok(MeasurementSetting::new(v[0], v[1])?)
        })
        .collect()
}

#[derive(Serialize)]
struct TomographyOutput<'a> {
    schema_version: u32,
    pair: &'static str,
    #[serde(flatten)]
    report: &'a TomographyReport,
}

pub fn tomography(args: TomographyArgs) -> Result<()> {
    let sidecar = args.sidecar.clone().unwrap_or_else(|| args.samples.with_extension("json"));
    let set = io::read_sample_set(&args.samples, &sidecar)?;
    let (channels, pair) = match args.pair {
        PairArg::Ac => ([0, 1, 2, 3], "A'C'"),
        PairArg::Ab => ([CH_AX, CH_AP, CH_BX, CH_BP], "A'B'"),
    };
    let settings = match &args.settings {
        Some(t) => parse_settings(t)?,
        None => canonical_settings(),
    };
    let mode = args.shuffle_seed.map_or(BlockMode::Contiguous, |seed| BlockMode::Shuffled { seed });
    let report = tomography_report(&set.records, channels, &settings, args.blocks, mode)?;

    let json_path = out_path(&args.out, "tomography.json")?;
    let txt_path = out_path(&args.out, "tomography.txt")?;
    write(&json_path, &io::to_json(&TomographyOutput { schema_version: SCHEMA_VERSION, pair, report: &report })?)?;
    let mut table = format!("gamma_{pair} (value ± block std, {} blocks of {})\n", args.blocks, report.errors.block_len);
    table.push_str(&io::format_with_errors(&report.gamma, &report.errors.block_std));
    for c in &report.shape_stats {
        let _ = writeln!(
            table,
            "{}{}: skewness {:+.4e} ± {}  kurtosis {:.4} ± {}",
            c.mode,
            c.quadrature,
            c.stats.skewness,
            c.stats.skewness_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
            c.stats.kurtosis,
            c.stats.kurtosis_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
        );
    }
    write(&txt_path, &table)?;
    print!("{table}");

    let config = json!({
        "pair": pair, "settings": settings, "blocks": args.blocks, "block_mode": mode,
    });
    let mut m = RunManifest::new("tomography", config, Some(set.seed));
    m.input(&args.samples)?;
    m.input(&sidecar)?;
    m.output(&json_path)?;
    m.output(&txt_path)?;
    m.write(&out_path(&args.out, "manifest.json")?)?;
    Ok(())
}

#[derive(Serialize)]
struct PptReproduction {
    label: String,
    transposed_mode: usize,
    eigenvalues: Vec<f64>,
    published: Vec<f64>,
    max_relative_deviation: f64,
    eigenvalue_sum: f64,
    trace: f64,
}

#[derive(Serialize)]
struct DephasingReproduction {
    reading: DegreeReading,
    sigma2: f64,
    physical_min_eigenvalue: f64,
    gamma_eigenvalues: Vec<f64>,
    all_above_one: bool,
}

#[derive(Serialize)]
struct ProtocolReproduction {
    r: f64,
    bob_loss: f64,
    g_opt: f64,
    min_product: f64,
    c_prime_separable: bool,
}

fn ppt_reproduction(r: &reference::ReferenceMatrix) -> Result<PptReproduction> {
    let state = GaussianState::from_covariance(r.gamma.clone())?;
    let v = ppt_test(&state, r.ppt_transposed_mode)?;
    let max_relative_deviation = v
        .eigenvalues
        .iter()
        .zip(&r.ppt_eigenvalues)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    Ok(PptReproduction {
        label: r.label.clone(),
        transposed_mode: r.ppt_transposed_mode,
        eigenvalue_sum: v.eigenvalues.iter().sum(),
        eigenvalues: v.eigenvalues,
        published: r.ppt_eigenvalues.clone(),
        max_relative_deviation,
        trace: r.trace,
    })
}

pub fn report(args: ReportArgs) -> Result<()> {
    let ppt = vec![ppt_reproduction(&reference::gamma_ac())?, ppt_reproduction(&reference::gamma_ab())?];

    let inputs = reference::dephasing_inputs();
    let gamma_out = reference::gamma_ac().gamma;
    let mut dephasing = Vec::new();
    for reading in [DegreeReading::SquareDegrees, DegreeReading::StdDevDegrees] {
        let sigma2 = phase_variance_from_degrees(inputs.phase_noise_degrees, reading);
        let params = DephasingParams::new(sigma2, inputs.transmittance)?;
        let g = dephase_invert(&gamma_out, &inputs.mean, &params)?;
        let st = GaussianState::from_covariance(g)?;
        let eig = symmetric_eigenvalues(st.gamma())?;
        dephasing.push(DephasingReproduction {
            reading,
            sigma2,
            physical_min_eigenvalue: min_physicality_eigenvalue(&st)?,
            all_above_one: eig.iter().all(|&e| e > 1.0),
            gamma_eigenvalues: eig,
        });
    }

    let mut protocol = Vec::new();
    for (r, loss) in [(0.5, 0.5), (0.5, 0.0), (1.0, 0.5)] {
        let cfg = ProtocolConfig::new(r, Variant::DisplaceBBeforeBs).with_loss(loss);
        let t = run_trace(&cfg)?;
        protocol.push(ProtocolReproduction {
            r,
            bob_loss: loss,
            g_opt: t.optimum.g_opt,
            min_product: t.optimum.point.product,
            c_prime_separable: t.verdict(STAGE_AFTER_AC, "C'|A'B").is_some_and(|v| v.separable),
        });
    }

    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "ppt": ppt,
        "dephasing": dephasing,
        "protocol": protocol,
    });
    let path = out_path(&args.out, "report.json")?;
    write(&path, &io::to_json(&doc)?)?;
    let mut m = RunManifest::new("report", json!({}), None);
    m.output(&path)?;
    m.write(&out_path(&args.out, "report.manifest.json")?)?;

    for p in &ppt {
        println!(
            "{}: PPT eigenvalues (mode {}) {:?}  published {:?}  max rel dev {:.2e}  sum {:.4} (trace {})",
            p.label,
            p.transposed_mode,
            p.eigenvalues.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            p.published,
            p.max_relative_deviation,
            p.eigenvalue_sum,
            p.trace
        );
    }
    for d in &dephasing {
        println!(
            "dephasing inversion ({:?}, sigma2 = {:.4e}): min eig(γ+iΩ) = {:.4}, γ eigenvalues > 1: {}",
            d.reading, d.sigma2, d.physical_min_eigenvalue, d.all_above_one
        );
    }
    for p in &protocol {
        println!(
            "protocol r = {} loss = {}: g_opt = {:.4}, min product = {:.4}, C' separable: {}",
            p.r, p.bob_loss, p.g_opt, p.min_product, p.c_prime_separable
        );
    }
    Ok(())
}
