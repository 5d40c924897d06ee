use std::fmt::Write as _;

use progeny_ldp::montecarlo::{empirical_rate, estimator_tail_ratio, reference_rate, replicate, LdpScenario};
use progeny_ldp::offspring::Pmf;
use progeny_ldp::progeny::{compound_progeny_pmf, extinction_probability, total_progeny_pmf_dwass, ProgenyModel};
use progeny_ldp::ratefn::{
    compare_rates, rate_bivariate, rate_bivariate_oracle, rate_estimator_deterministic, rate_estimator_meaninit,
    rate_estimator_ratio, rate_estimator_ratio_contraction, rate_offspring, rate_progeny_closed, rate_progeny_direct,
    Optimizer, RateFunction, RateKind,
};

use crate::config::{Command, RunConfig, Tolerances};
use crate::format::fmt_g;
use crate::CliError;

pub const DEFAULT_K_MAX: usize = 50;
pub const VERIFY_CHECKS: [&str; 6] = ["prop1", "prop2", "prop3_contraction", "prop4_bracket", "corollary1", "remark6"];

/// A named output: file name under the output directory and its contents.
pub struct Output {
    pub name: &'static str,
    pub body: String,
}

/// Everything a command produced, and whether it counts as success.
pub struct Report {
    pub outputs: Vec<Output>,
    pub failures: usize,
}

impl Report {
    fn single(name: &'static str, body: String) -> Self {
        Self { outputs: vec![Output { name, body }], failures: 0 }
    }
}

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    match config.command {
        Command::Rate => rate(config),
        Command::ProgenyPmf => progeny_pmf(config),
        Command::Extinction => extinction(config),
        Command::Compare => compare(config),
        Command::Simulate => simulate(config),
        Command::Verify => verify(config),
    }
}

fn optimizer_location(o: Optimizer) -> f64 {
    match o {
        Optimizer::Theta(t) | Optimizer::DomainEdge(t) | Optimizer::Saturated(t) | Optimizer::Minimizer(t) => t,
        Optimizer::ThetaToMinusInf => f64::NEG_INFINITY,
        Optimizer::ThetaToPlusInf => f64::INFINITY,
        Optimizer::OutsideSupport | Optimizer::Composite => f64::NAN,
    }
}

fn rate(config: &RunConfig) -> Result<Report, CliError> {
    let model = config.model()?;
    let grid = config.grid()?;
    let kind = config.rate.map_or(RateKind::Progeny, |r| r.kind);
    let route = config.rate.and_then(|r| r.route).unwrap_or_else(|| RateFunction::default_route(kind));
    let rf = RateFunction::new(&model, kind, route)?;
    let mut body = String::from("x,value,argmax_theta,route\n");
    for x in grid.values() {
        let v = rf.eval(x)?;
        writeln!(body, "{},{},{},{}", fmt_g(x), fmt_g(v.value), fmt_g(optimizer_location(v.optimizer)), route.as_str())
            .unwrap();
    }
    Ok(Report::single("rate.csv", body))
}

fn progeny_pmf(config: &RunConfig) -> Result<Report, CliError> {
    let model = config.model()?;
    let k_max = config.k_max.unwrap_or(DEFAULT_K_MAX);
    let pmf: Pmf = if model.g().degenerate_point() == Some(1) {
        total_progeny_pmf_dwass(model.f(), k_max)?
    } else {
        compound_progeny_pmf(&model, k_max)?
    };
    let mut body = String::from("k,pi_k\n");
    for k in 0..=k_max {
        writeln!(body, "{},{}", k, fmt_g(pmf.prob(k))).unwrap();
    }
    writeln!(body, "# deficit={}", fmt_g(pmf.deficit())).unwrap();
    Ok(Report::single("progeny_pmf.csv", body))
}

fn extinction(config: &RunConfig) -> Result<Report, CliError> {
    let model = config.model()?;
    let q = extinction_probability(model.f())?;
    Ok(Report::single("extinction.txt", format!("{}\n", fmt_g(q))))
}

fn compare(config: &RunConfig) -> Result<Report, CliError> {
    let model = config.model()?;
    let grid = config.grid()?;
    let table = compare_rates(&model, &grid.values())?;
    if table.extrapolated {
        eprintln!(
            "note: mu_g = {} is not an integer; J_diamond is an extrapolation beyond population sizes",
            fmt_g(table.mu_g)
        );
    }
    let mut body = String::from("x,J_random,J_diamond,I_f,leq_ok,strict\n");
    for r in &table.rows {
        writeln!(
            body,
            "{},{},{},{},{},{}",
            fmt_g(r.x),
            fmt_g(r.j_random),
            fmt_g(r.j_diamond),
            fmt_g(r.i_f),
            r.leq_ok,
            r.strict
        )
        .unwrap();
    }
    let failures = table.rows.iter().filter(|r| !r.leq_ok).count();
    Ok(Report { outputs: vec![Output { name: "compare.csv", body }], failures })
}

fn scenario(config: &RunConfig) -> Result<LdpScenario, CliError> {
    let mut s = config
        .scenario
        .clone()
        .ok_or_else(|| CliError::Config("scenario: missing (simulate needs a scenario file)".into()))?;
    if let Some(seed) = config.seed {
        s.master_seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn simulate(config: &RunConfig) -> Result<Report, CliError> {
    let s = scenario(config)?;
    let model = s.model()?;
    let mut rates = String::from("n,threshold,hits,trials,rate_estimate,ci_halfwidth,reference_rate,censored\n");
    for t in &s.thresholds {
        let reference = reference_rate(&model, t)?;
        for r in empirical_rate(&s, t)? {
            writeln!(
                rates,
                "{},{},{},{},{},{},{},{}",
                r.n,
                t.label(),
                r.hits,
                r.trials,
                fmt_g(r.rate_estimate),
                fmt_g(r.ci_halfwidth),
                fmt_g(reference),
                r.censored
            )
            .unwrap();
        }
    }
    let mut estimators = String::from("n,trial,est_ratio,est_meaninit\n");
    for r in replicate(&s)? {
        writeln!(estimators, "{},{},{},{}", r.n, r.trial, fmt_g(r.est_ratio), fmt_g(r.est_meaninit)).unwrap();
    }
    let mut outputs =
        vec![Output { name: "rates.csv", body: rates }, Output { name: "estimators.csv", body: estimators }];
    if let Some(eps) = config.tail_ratio_eps {
        let mut body = String::from("n,trials,hits_random,hits_deterministic,p_random,p_deterministic,ratio\n");
        for r in estimator_tail_ratio(&s, eps)? {
            writeln!(
                body,
                "{},{},{},{},{},{},{}",
                r.n,
                r.trials,
                r.hits_random,
                r.hits_deterministic,
                fmt_g(r.p_random),
                fmt_g(r.p_deterministic),
                r.ratio.map_or("nan".to_string(), fmt_g)
            )
            .unwrap();
        }
        outputs.push(Output { name: "tail_ratio.csv", body });
    }
    Ok(Report { outputs, failures: 0 })
}

enum CheckResult {
    Measured { deviation: f64, pass: bool },
    Skipped(String),
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

fn measured(deviation: f64, tol: f64) -> CheckResult {
    CheckResult::Measured { deviation, pass: deviation <= tol }
}

fn verify(config: &RunConfig) -> Result<Report, CliError> {
    let model = config.model()?;
    let tol = config.tolerances;
    let selected: Vec<String> = match &config.checks {
        Some(list) => {
            for c in list {
                if !VERIFY_CHECKS.contains(&c.as_str()) {
                    return Err(CliError::Config(format!(
                        "checks: unknown check {c:?} (known: {})",
                        VERIFY_CHECKS.join(", ")
                    )));
                }
            }
            list.clone()
        }
        None => VERIFY_CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    let mut body = String::from("check,status,max_deviation,tolerance,detail\n");
    let mut failures = 0;
    for name in &selected {
        let (result, tolerance) = run_check(name, &model, &tol)?;
        let (status, deviation, detail) = match result {
            CheckResult::Measured { deviation, pass } => {
                if !pass {
                    failures += 1;
                }
                (if pass { "pass" } else { "fail" }, fmt_g(deviation), String::new())
            }
            CheckResult::Skipped(why) => ("skipped", "nan".to_string(), why),
        };
        writeln!(body, "{name},{status},{deviation},{},{detail}", fmt_g(tolerance)).unwrap();
    }
    Ok(Report { outputs: vec![Output { name: "verify.csv", body }], failures })
}

fn run_check(name: &str, model: &ProgenyModel, tol: &Tolerances) -> Result<(CheckResult, f64), CliError> {
    let f = model.f();
    let subcritical = model.subcritical_strict();
    let estimator_ok = model.require_estimator_hypotheses().is_ok();
    Ok(match name {
        "prop1" => {
            if !subcritical {
                return Ok((CheckResult::Skipped("needs mu_f < 1".into()), tol.prop1));
            }
            let mut worst = 0.0f64;
            for y in linspace(1.05, 6.0, 60) {
                let d = (rate_progeny_direct(f, y)?.value - rate_progeny_closed(f, y)?.value).abs();
                worst = worst.max(d);
            }
            (measured(worst, tol.prop1), tol.prop1)
        }
        "prop2" => {
            if model.require_joint_mgf().is_err() {
                return Ok((CheckResult::Skipped("needs p_0 > 0; mu_f < 1; a finite mgf of g".into()), tol.prop2));
            }
            let r_min = model.r_min() as f64;
            let z_hi = model.g().max_support().map_or(6.0, |(h, _)| (h as f64).min(6.0)).max(r_min + 1.0);
            let f_max = f.max_support().map(|(h, _)| h as f64);
            let mut worst = 0.0f64;
            for i in 0..20 {
                let z = r_min + (z_hi - r_min) * (i as f64 + 0.5) / 20.0;
                let y_hi = 6.0f64.max(z + 1.0);
                for j in 0..20 {
                    let y = z + (y_hi - z) * (j as f64 + 1.0) / 20.0;
                    if matches!(f_max, Some(m) if (y - z) / y > m) {
                        continue;
                    }
                    let d = (rate_bivariate_oracle(model, y, z)?.value - rate_bivariate(model, y, z)?.value).abs();
                    if d.is_finite() {
                        worst = worst.max(d);
                    }
                }
            }
            (measured(worst, tol.prop2), tol.prop2)
        }
        "prop3_contraction" => {
            if !estimator_ok {
                return Ok((CheckResult::Skipped("needs q_0 = 0; p_0 > 0; mu_f < 1".into()), tol.prop3_contraction));
            }
            let mut worst = 0.0f64;
            for x in linspace(0.0, 0.9, 40) {
                let a = rate_estimator_ratio_contraction(model, x)?.value;
                let b = rate_estimator_ratio(model, x)?.value;
                if a.is_finite() || b.is_finite() {
                    worst = worst.max((a - b).abs());
                }
            }
            (measured(worst, tol.prop3_contraction), tol.prop3_contraction)
        }
        "prop4_bracket" => {
            if !estimator_ok {
                return Ok((CheckResult::Skipped("needs q_0 = 0; p_0 > 0; mu_f < 1".into()), tol.prop4_bracket));
            }
            // The located infimum must not exceed a brute-force scan of the
            // bracket [r_min, mu_g / (1 - x)].
            let r_min = model.r_min() as f64;
            let mut worst = 0.0f64;
            for x in linspace(-0.5, 0.9, 30) {
                let located = rate_estimator_meaninit(model, x)?.value;
                let y = model.mu_g() / (1.0 - x);
                if y < r_min {
                    continue;
                }
                let scan = linspace(r_min, y, 400)
                    .into_iter()
                    .map(|z| rate_bivariate(model, y, z).map(|v| v.value))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                if located.is_finite() {
                    worst = worst.max(located - scan);
                } else if scan.is_finite() {
                    worst = f64::INFINITY;
                }
            }
            (measured(worst.max(0.0), tol.prop4_bracket), tol.prop4_bracket)
        }
        "corollary1" => {
            if !estimator_ok {
                return Ok((CheckResult::Skipped("needs q_0 = 0; p_0 > 0; mu_f < 1".into()), tol.corollary1));
            }
            let table = compare_rates(model, &linspace(0.0, 0.95, 96))?;
            let worst = table
                .rows
                .iter()
                .filter(|r| r.j_random.is_finite())
                .map(|r| r.j_random - r.j_diamond)
                .fold(0.0f64, f64::max);
            (measured(worst, tol.corollary1), tol.corollary1)
        }
        "remark6" => {
            // Same initial population, no offspring.
            let none = Pmf::explicit(&[(0, 1.0)])?;
            let m = ProgenyModel::new(none.clone(), model.g().clone())?;
            if m.require_estimator_hypotheses().is_err() {
                return Ok((CheckResult::Skipped("needs q_0 = 0".into()), tol.remark6));
            }
            let mu_g = m.mu_g();
            let integer = (mu_g - mu_g.round()).abs() < 1e-12;
            let mut worst = 0.0f64;
            for x in linspace(0.0, 0.9, 10) {
                let j = rate_estimator_ratio(&m, x)?.value;
                let i = rate_offspring(&none, x)?.value;
                worst = worst.max(gap(j, i));
                if integer {
                    let d = rate_estimator_deterministic(&none, mu_g.round() as u64, x)?.value;
                    worst = worst.max(gap(j, d));
                }
            }
            (measured(worst, tol.remark6), tol.remark6)
        }
        other => return Err(CliError::Config(format!("checks: unknown check {other:?}"))),
    })
}

/// Distance between two rate values, treating equal infinities as equal.
fn gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}
