//! Acceptance criteria over q in {2, 3} and alpha in {1.2, 1.5, 2, 3}.
//!
//! Prints one PASS/FAIL line per criterion and parameter pair, then a
//! summary line per criterion; exits non-zero if any criterion failed.

use std::process::ExitCode;
use std::time::Instant;

use homtree::czmax::{cz_decompose, fefferman_stein_check, good_lambda_check, verify_cz};
use homtree::dyadic::DyadicSet;
use homtree::function::TailConstantFunction;
use homtree::measure::MeasureParams;
use homtree::region::Region;
use homtree::tree::VertexId;
use homtree::verify::{run_suite, Suite, SuiteConfig, SuiteReport};
use num_complex::Complex64;

const SEED: u64 = 7;
const QS: [u32; 2] = [2, 3];
const ALPHAS: [f64; 4] = [1.2, 1.5, 2.0, 3.0];

struct Criterion {
    id: u32,
    name: &'static str,
    passed: bool,
}

impl Criterion {
    fn new(id: u32, name: &'static str) -> Self {
        Criterion { id, name, passed: true }
    }

    fn line(&mut self, ok: bool, label: &str, detail: &str) {
        self.passed &= ok;
        println!("{} criterion {:>2} {:<14} {label}: {detail}", if ok { "PASS" } else { "FAIL" }, self.id, self.name);
    }

    fn suites(&mut self, label: &str, reports: &[SuiteReport]) {
        for r in reports {
            let mut detail = format!("{} cases, {} violations", r.cases, r.violations);
            if let Some(w) = &r.witness {
                if !r.passed() {
                    detail.push_str(&format!("; first: {}", w.description));
                }
            }
            self.line(r.passed(), &format!("{label} {}", r.suite), &detail);
        }
    }
}

fn label(q: u32, alpha: f64) -> String {
    format!("q={q} alpha={alpha}")
}

fn grid(mut f: impl FnMut(u32, f64)) {
    for q in QS {
        for alpha in ALPHAS {
            f(q, alpha);
        }
    }
}

fn run(suite: Suite, q: u32, alpha: f64) -> SuiteReport {
    run_suite(suite, &SuiteConfig::new(q, alpha, SEED)).expect("suite runs")
}

fn criterion_suites(id: u32, name: &'static str, suites: &[Suite]) -> Criterion {
    let mut c = Criterion::new(id, name);
    grid(|q, alpha| {
        let reports: Vec<_> = suites.iter().map(|s| run(*s, q, alpha)).collect();
        c.suites(&label(q, alpha), &reports);
    });
    c
}

fn geometry() -> Criterion {
    // geometry does not depend on alpha
    let mut c = Criterion::new(1, "geometry");
    for q in QS {
        c.suites(&format!("q={q}"), &[run(Suite::Geometry, q, 2.0)]);
    }
    c
}

fn cz() -> Criterion {
    let mut c = criterion_suites(5, "cz", &[Suite::Czd]);
    // the worked example: delta_o at lambda = 0.5 (q = 2, alpha = 2)
    let mp = MeasureParams::new(2, 2.0).unwrap();
    let d = TailConstantFunction::delta(*mp.tree(), VertexId::ORIGIN).unwrap();
    let out = cz_decompose(&mp, &d, 0.5).unwrap();
    let report = verify_cz(&mp, &d, &out).unwrap();
    let ok = out.q_sets == vec![DyadicSet::Singleton(VertexId::ORIGIN)]
        && out.b().unwrap().values().iter().all(|z| z.norm() == 0.0)
        && report.passed();
    c.line(ok, "delta_o lambda=0.5", &format!("Q = {:?}", out.q_sets));
    let below = cz_decompose(&mp, &d, 0.3);
    c.line(below.is_err(), "delta_o lambda=0.3", &below.err().map_or("accepted".into(), |e| e.to_string()));
    c
}

fn good_lambda() -> Criterion {
    let mut c = criterion_suites(6, "good-lambda", &[Suite::GoodLambda]);
    let mp = MeasureParams::new(2, 2.0).unwrap();
    let d = TailConstantFunction::delta(*mp.tree(), VertexId::ORIGIN).unwrap();
    let r = good_lambda_check(&mp, &d, 0.45, 0.01).unwrap();
    let ok = r.left.is_empty() && r.right == Region::singleton(VertexId::ORIGIN) && r.right_mass == 1.0 && r.holds;
    c.line(ok, "delta_o trace", &format!("left = {:?}, right = {:?}, right mass {}", r.left, r.right, r.right_mass));
    c
}

fn fefferman_stein() -> Criterion {
    let mut c = Criterion::new(7, "fefferman-stein");
    grid(|q, alpha| {
        let r = run(Suite::FeffermanStein, q, alpha);
        let worst: Vec<String> = r
            .metrics
            .iter()
            .filter(|(k, _)| k.starts_with("worst_quotient_f_"))
            .map(|(k, v)| format!("{}={v:.3}", &k["worst_quotient_f_".len()..]))
            .collect();
        let mut detail = format!("{} cases, {} violations; worst ||f||/||M#f||: {}", r.cases, r.violations, worst.join(" "));
        if let (false, Some(w)) = (r.passed(), &r.witness) {
            detail.push_str(&format!("; first: sample {:?}, {}", w.sample, w.description));
        }
        c.line(r.passed(), &label(q, alpha), &detail);
    });
    // a near-constant function, for reference
    let mp = MeasureParams::new(2, 2.0).unwrap();
    let f = TailConstantFunction::constant(*mp.tree(), Complex64::new(1.0, 0.0))
        .add(&TailConstantFunction::delta(*mp.tree(), VertexId::ORIGIN).unwrap().scale(Complex64::new(1e-4, 0.0)))
        .unwrap();
    let r = fefferman_stein_check(&mp, &f, 2.0).unwrap();
    println!(
        "INFO criterion  7 fefferman-stein f = 1 + 1e-4 delta_o (q=2 alpha=2 p=2): ||f||/||M#f|| = {:.1} vs N_p = {:.1}",
        r.quotient_f.unwrap_or(f64::NAN),
        r.n_p
    );
    c
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: Vec<Box<dyn Fn() -> Criterion>> = vec![
        Box::new(geometry),
        Box::new(|| criterion_suites(2, "measure", &[Suite::Doubling])),
        Box::new(|| criterion_suites(3, "dyadic", &[Suite::Dyadic])),
        Box::new(|| criterion_suites(4, "weak-(1,1)", &[Suite::Weak11])),
        Box::new(cz),
        Box::new(good_lambda),
        Box::new(fefferman_stein),
        Box::new(|| criterion_suites(8, "S-phi-eta", &[Suite::SupS])),
        Box::new(|| criterion_suites(9, "atoms-bmo", &[Suite::Atoms, Suite::Inboxing, Suite::Duality])),
        Box::new(|| criterion_suites(10, "operators", &[Suite::Operators])),
        Box::new(|| criterion_suites(11, "reference", &[Suite::Reference])),
    ];
    let mut results = Vec::new();
    for run in &criteria {
        results.push(run());
    }
    println!();
    for c in &results {
        println!("{} criterion {:>2} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name);
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
