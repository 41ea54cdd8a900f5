use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use homtree::czmax::{
    cz_decompose, cz_threshold, fefferman_stein_check, good_lambda_check, hl_maximal, sharp_maximal, weak_11_check,
};
use homtree::function::TailConstantFunction;
use homtree::hardy_bmo::{atomic_decompose, bmo_norm, bmo_oscillation, conjugate_exponent, duality_pairing};
use homtree::io::{decomposition_doc, AtomDoc, CzOutputDoc, FunctionDoc};
use homtree::measure::MeasureParams;
use homtree::operators::{apply_operator, h1_l1_probe, hormander_constant, l2_operator_norm_with, lp_ratio_sweep, FiniteKernel};
use homtree::sampling::{random_atom, random_function, sample_rng};
use homtree::tree::TreeParams;
use homtree::verify::{run_suite, Suite, SuiteConfig, SuiteReport};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::config::{Cli, Command, Format, GridArgs, RunConfig, HARD_DEPTH_CAP};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn read_doc<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

/// Output sink plus the resolved configuration.
struct Ctx {
    config: RunConfig,
    timestamp: bool,
}

impl Ctx {
    fn measure(&self) -> Result<MeasureParams> {
        measure(self.config.q, self.config.alpha, self.config.max_depth)
    }

    fn write(&self, text: &str) -> Result<()> {
        match &self.config.output {
            Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("cannot write output: {e}")))
            }
        }
    }

    fn json_only(&self) -> Result<()> {
        if self.config.format == Format::Csv {
            return Err(CliError::Usage(format!("`{}` has no CSV output", self.config.command)));
        }
        Ok(())
    }

    /// A report wrapped with the configuration that produced it.
    fn report(&self, result: impl Serialize) -> Result<()> {
        self.json_only()?;
        let mut doc = json!({ "config": self.config, "result": result });
        if self.timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            doc["timestamp"] = json!(secs);
        }
        self.write(&(pretty(&doc)? + "\n"))
    }

    /// A bare document that the library can read back.
    fn document(&self, doc: impl Serialize) -> Result<()> {
        self.json_only()?;
        self.write(&(pretty(&doc)? + "\n"))
    }

    fn function(&self, mp: &MeasureParams, f: &TailConstantFunction) -> Result<()> {
        let doc = FunctionDoc::from_function(mp, f);
        match self.config.format {
            Format::Json => self.write(&(pretty(&doc)? + "\n")),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                write_row(&mut w, ["vertex", "re", "im"])?;
                for (k, re, im) in &doc.values {
                    write_row(&mut w, [k.0.to_string(), re.to_string(), im.to_string()])?;
                }
                self.write(&finish(w)?)
            }
        }
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Io(format!("cannot serialise report: {e}")))
}

fn write_row<I, S>(w: &mut csv::Writer<Vec<u8>>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| CliError::Io(e.to_string()))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn measure(q: u32, alpha: f64, max_depth: u32) -> Result<MeasureParams> {
    let tree = TreeParams::with_max_depth(q, max_depth).map_err(|e| CliError::Usage(e.to_string()))?;
    MeasureParams::from_tree(tree, alpha).map_err(|e| CliError::Usage(e.to_string()))
}

fn inputs(cmd: &Command) -> Vec<PathBuf> {
    match cmd {
        Command::Cz { input, .. }
        | Command::Maximal { input }
        | Command::Sharp { input }
        | Command::Bmo { input, .. }
        | Command::Atoms { input } => vec![input.clone()],
        Command::Pairing { input, atom } => vec![input.clone(), atom.clone()],
        Command::Hormander { kernel } | Command::Opnorm { kernel, .. } | Command::Probe { kernel, .. } => {
            vec![kernel.clone()]
        }
        Command::Apply { kernel, input } => vec![kernel.clone(), input.clone()],
        Command::Info | Command::Verify { .. } | Command::Sweep { .. } => Vec::new(),
    }
}

fn grid_of(cmd: &Command) -> Option<&GridArgs> {
    match cmd {
        Command::Probe { grid, .. } | Command::Verify { grid, .. } | Command::Sweep { grid, .. } => Some(grid),
        _ => None,
    }
}

/// Runs the command; `Ok(false)` reports a verified violation.
pub fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    if g.max_depth > HARD_DEPTH_CAP {
        return Err(CliError::Usage(format!("--max-depth {} exceeds the cap {HARD_DEPTH_CAP}", g.max_depth)));
    }
    // q and alpha default to those of the first input function, if any
    let mut doc_params = None;
    for path in inputs(&cli.command) {
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                let q = v.get("q").and_then(|x| x.as_u64());
                let a = v.get("alpha").and_then(|x| x.as_f64());
                if let (Some(q), Some(a)) = (q, a) {
                    doc_params = Some((q as u32, a));
                    break;
                }
            }
        }
    }
    let q = g.q.or(doc_params.map(|p| p.0)).unwrap_or(2);
    let alpha = g.alpha.or(doc_params.map(|p| p.1)).unwrap_or(2.0);
    measure(q, alpha, g.max_depth)?;
    let config = RunConfig {
        command: cli.command.name(),
        q,
        alpha,
        max_depth: g.max_depth,
        seed: g.seed,
        format: g.format,
        inputs: inputs(&cli.command),
        output: g.output.clone(),
        suite: match &cli.command {
            Command::Verify { suite, .. } => Some(suite.clone()),
            _ => None,
        },
        grid: grid_of(&cli.command).map(|grid| serde_json::to_value(grid).expect("grid serialises")),
    };
    let ctx = Ctx { config, timestamp: g.timestamp };

    match &cli.command {
        Command::Info => info(&ctx),
        Command::Cz { input, lambda } => {
            let mp = ctx.measure()?;
            let f = read_function(&mp, input)?;
            let out = cz_decompose(&mp, &f, *lambda)?;
            ctx.document(CzOutputDoc::from_output(&mp, &out))?;
            Ok(true)
        }
        Command::Maximal { input } => {
            let mp = ctx.measure()?;
            let f = read_function(&mp, input)?;
            ctx.function(&mp, &hl_maximal(&mp, &f))?;
            Ok(true)
        }
        Command::Sharp { input } => {
            let mp = ctx.measure()?;
            let f = read_function(&mp, input)?;
            ctx.function(&mp, &sharp_maximal(&mp, &f))?;
            Ok(true)
        }
        Command::Bmo { input, r } => {
            let mp = ctx.measure()?;
            let f = read_function(&mp, input)?;
            let norm = bmo_norm(&mp, &f, *r)?;
            let oscillation = bmo_oscillation(&mp, &f, *r)?;
            let integral = f.integral(&mp);
            ctx.report(json!({ "r": r, "bmo_norm": norm, "oscillation": oscillation, "integral": [integral.re, integral.im] }))?;
            Ok(true)
        }
        Command::Atoms { input } => {
            let mp = ctx.measure()?;
            let f = read_function(&mp, input)?;
            ctx.document(decomposition_doc(&mp, &atomic_decompose(&mp, &f)?))?;
            Ok(true)
        }
        Command::Pairing { input, atom } => {
            let mp = ctx.measure()?;
            let f = read_function(&mp, input)?;
            let a = read_doc::<AtomDoc>(atom)?.to_atom(&mp)?;
            let value = duality_pairing(&mp, &f, &a)?;
            let p_conj = conjugate_exponent(a.p());
            let bound = bmo_norm(&mp, &f, p_conj)?;
            let holds = value.norm() <= bound + 1e-9;
            ctx.report(json!({
                "pairing": [value.re, value.im],
                "modulus": value.norm(),
                "conjugate_exponent": if p_conj.is_finite() { json!(p_conj) } else { json!("inf") },
                "bmo_bound": bound,
                "holds": holds,
            }))?;
            Ok(holds)
        }
        Command::Hormander { kernel } => {
            let mp = ctx.measure()?;
            let k = read_kernel(&mp, kernel)?;
            ctx.report(hormander_constant(&mp, &k))?;
            Ok(true)
        }
        Command::Apply { kernel, input } => {
            let mp = ctx.measure()?;
            let k = read_kernel(&mp, kernel)?;
            let f = read_function(&mp, input)?;
            ctx.function(&mp, &apply_operator(&mp, &k, &f)?)?;
            Ok(true)
        }
        Command::Opnorm { kernel, tol, max_iterations } => {
            let mp = ctx.measure()?;
            let k = read_kernel(&mp, kernel)?;
            if !(*tol > 0.0) {
                return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
            }
            ctx.report(l2_operator_norm_with(&mp, &k, *tol, *max_iterations)?)?;
            Ok(true)
        }
        Command::Probe { kernel, reference_constant, threshold, grid } => probe(&ctx, kernel, *reference_constant, *threshold, grid),
        Command::Verify { suite, grid } => verify(&ctx, suite, grid),
        Command::Sweep { qs, alphas, grid } => sweep(&ctx, qs, alphas, grid),
    }
}

fn read_function(mp: &MeasureParams, path: &Path) -> Result<TailConstantFunction> {
    let doc: FunctionDoc = read_doc(path)?;
    if doc.boundary_depth > mp.tree().max_depth() {
        return Err(CliError::Precondition(format!(
            "boundary depth {} exceeds --max-depth {}",
            doc.boundary_depth,
            mp.tree().max_depth()
        )));
    }
    Ok(doc.to_function(mp)?)
}

fn read_kernel(mp: &MeasureParams, path: &Path) -> Result<FiniteKernel> {
    let k: FiniteKernel = read_doc(path)?;
    let depth = k.depth_bound(mp.tree());
    if depth >= mp.tree().max_depth() {
        return Err(CliError::Precondition(format!(
            "kernel depth {depth} needs --max-depth of at least {}",
            depth + 1
        )));
    }
    Ok(k)
}

fn info(ctx: &Ctx) -> Result<bool> {
    let mp = ctx.measure()?;
    let tree = mp.tree();
    let mut rows = Vec::new();
    for m in 0..=ctx.config.max_depth {
        let (lo, hi) = tree.level_range(m)?;
        rows.push((m, hi, hi - lo + 1, mp.point_mass_at_depth(m), mp.sector_or_total_mass_at_depth(m)));
    }
    match ctx.config.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            write_row(&mut w, ["m", "I_m", "sphere_size", "point_mass", "sector_mass"])?;
            for (m, i, s, p, t) in &rows {
                write_row(&mut w, [m.to_string(), i.to_string(), s.to_string(), p.to_string(), t.to_string()])?;
            }
            ctx.write(&finish(w)?)?;
        }
        Format::Json => {
            let table: Vec<_> = rows
                .iter()
                .map(|(m, i, s, p, t)| {
                    json!({ "m": m, "I_m": i.to_string(), "sphere_size": s.to_string(), "point_mass": p, "sector_mass": t })
                })
                .collect();
            ctx.report(json!({
                "total_mass": mp.total_mass(),
                "doubling_constant": mp.doubling_constant(),
                "sharp_doubling_constant": mp.sharp_doubling_constant(),
                "table": table,
            }))?;
        }
    }
    Ok(true)
}

fn probe(ctx: &Ctx, kernel: &Path, reference_constant: f64, threshold: f64, grid: &GridArgs) -> Result<bool> {
    let mp = ctx.measure()?;
    let k = read_kernel(&mp, kernel)?;
    let depth = (k.depth_bound(mp.tree()) + 1).min(ctx.config.max_depth).max(1);
    let samples = grid.samples.unwrap_or(100);
    let mut rng = sample_rng(ctx.config.seed, 0);
    let atoms = (0..samples).map(|_| random_atom(&mut rng, &mp, depth, f64::INFINITY)).collect::<homtree::error::Result<Vec<_>>>()?;
    let probe = h1_l1_probe(&mp, &k, &atoms, reference_constant)?;
    let mut rng = sample_rng(ctx.config.seed, 1);
    let functions =
        (0..samples).map(|_| random_function(&mut rng, mp.tree(), depth)).collect::<homtree::error::Result<Vec<_>>>()?;
    let ps = grid.ps.clone().unwrap_or_else(|| vec![1.5, 2.0, 3.0]);
    let sweep = lp_ratio_sweep(&mp, &k, &ps, &functions, probe.sup_l1, threshold)?;
    ctx.report(json!({ "h1_l1": probe, "lp_sweep": sweep }))?;
    Ok(true)
}

fn suite_config(q: u32, alpha: f64, seed: u64, max_depth: u32, grid: &GridArgs) -> Result<SuiteConfig> {
    let mut c = SuiteConfig::new(q, alpha, seed);
    if let Some(s) = grid.samples {
        c.samples = s;
        c.pairs = c.pairs.max(s);
    }
    if let Some(v) = &grid.lambdas {
        c.lambda_factors = v.clone();
    }
    if let Some(v) = &grid.gammas {
        c.gammas = v.clone();
    }
    if let Some(v) = &grid.ps {
        c.ps = v.clone();
    }
    if let Some(v) = &grid.rs {
        c.rs = v.clone();
    }
    if let Some(n) = grid.radii {
        c.radius_count = n;
    }
    if let Some(d) = grid.function_depth {
        c.function_depth = d;
    }
    if c.function_depth > max_depth {
        return Err(CliError::Usage(format!("function depth {} exceeds --max-depth {max_depth}", c.function_depth)));
    }
    Ok(c)
}

fn verify(ctx: &Ctx, suite: &str, grid: &GridArgs) -> Result<bool> {
    let suites: Vec<Suite> = if suite.eq_ignore_ascii_case("all") {
        Suite::ALL.to_vec()
    } else {
        suite
            .split(',')
            .map(|s| s.trim().parse::<Suite>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_>>()?
    };
    let cfg = suite_config(ctx.config.q, ctx.config.alpha, ctx.config.seed, ctx.config.max_depth, grid)?;
    let reports = suites.iter().map(|s| run_suite(*s, &cfg)).collect::<homtree::error::Result<Vec<SuiteReport>>>()?;
    let passed = reports.iter().all(SuiteReport::passed);
    match ctx.config.format {
        Format::Json => ctx.report(json!({ "passed": passed, "suites": reports }))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            write_row(&mut w, ["suite", "q", "alpha", "seed", "cases", "violations", "passed", "witness"])?;
            for r in &reports {
                write_row(
                    &mut w,
                    [
                        r.suite.to_string(),
                        r.q.to_string(),
                        r.alpha.to_string(),
                        r.seed.to_string(),
                        r.cases.to_string(),
                        r.violations.to_string(),
                        r.passed().to_string(),
                        r.witness.as_ref().map_or(String::new(), |w| w.description.clone()),
                    ],
                )?;
            }
            ctx.write(&finish(w)?)?;
        }
    }
    Ok(passed)
}

struct SweepRow {
    q: u32,
    alpha: f64,
    sample: usize,
    check: &'static str,
    lambda: Option<f64>,
    gamma: Option<f64>,
    p: Option<f64>,
    value: f64,
    bound: f64,
    holds: bool,
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn sweep(ctx: &Ctx, qs: &[u32], alphas: &[f64], grid: &GridArgs) -> Result<bool> {
    let mut rows = Vec::new();
    for &q in qs {
        for &alpha in alphas {
            let mp = measure(q, alpha, ctx.config.max_depth)?;
            let mut cfg = suite_config(q, alpha, ctx.config.seed, ctx.config.max_depth, grid)?;
            cfg.samples = grid.samples.unwrap_or(20);
            for i in 0..cfg.samples {
                let mut rng = sample_rng(cfg.seed, i as u64);
                let f = random_function(&mut rng, mp.tree(), cfg.function_depth)?;
                let threshold = cz_threshold(&mp, &f)?;
                let base = if threshold > 0.0 { threshold } else { 1.0 };
                let lambdas: Vec<f64> = cfg.lambda_factors.iter().map(|s| s * base).collect();
                for c in weak_11_check(&mp, &f, &lambdas)?.cases {
                    rows.push(SweepRow {
                        q,
                        alpha,
                        sample: i,
                        check: "weak11",
                        lambda: Some(c.lambda),
                        gamma: None,
                        p: None,
                        value: c.level_mass,
                        bound: c.bound,
                        holds: c.holds,
                    });
                }
                for &lambda in &lambdas {
                    for &gamma in &cfg.gammas {
                        let r = good_lambda_check(&mp, &f, lambda, gamma)?;
                        rows.push(SweepRow {
                            q,
                            alpha,
                            sample: i,
                            check: "goodlambda",
                            lambda: Some(lambda),
                            gamma: Some(gamma),
                            p: None,
                            value: r.left_mass,
                            bound: r.rhs,
                            holds: r.holds,
                        });
                    }
                }
                for &p in &cfg.ps {
                    let r = fefferman_stein_check(&mp, &f, p)?;
                    if let (Some(v), Some(h)) = (r.quotient_f, r.holds_f) {
                        rows.push(SweepRow {
                            q,
                            alpha,
                            sample: i,
                            check: "feffermanstein",
                            lambda: None,
                            gamma: None,
                            p: Some(p),
                            value: v,
                            bound: r.n_p,
                            holds: h,
                        });
                    }
                }
            }
        }
    }
    match ctx.config.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            write_row(&mut w, ["q", "alpha", "sample", "check", "lambda", "gamma", "p", "value", "bound", "holds"])?;
            for r in &rows {
                write_row(
                    &mut w,
                    [
                        r.q.to_string(),
                        r.alpha.to_string(),
                        r.sample.to_string(),
                        r.check.to_string(),
                        opt(r.lambda),
                        opt(r.gamma),
                        opt(r.p),
                        r.value.to_string(),
                        r.bound.to_string(),
                        r.holds.to_string(),
                    ],
                )?;
            }
            ctx.write(&finish(w)?)?;
        }
        Format::Json => {
            let list: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "q": r.q, "alpha": r.alpha, "sample": r.sample, "check": r.check,
                        "lambda": r.lambda, "gamma": r.gamma, "p": r.p,
                        "value": r.value, "bound": r.bound, "holds": r.holds,
                    })
                })
                .collect();
            ctx.report(json!({ "rows": list }))?;
        }
    }
    // a sweep records quotients; it does not judge them
    Ok(true)
}
