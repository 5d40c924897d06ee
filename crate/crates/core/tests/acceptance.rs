//! Acceptance criteria, one line each. Runs as a plain binary
//! (`harness = false`) so every line is printed even when some fail; the
//! process exits nonzero if any criterion fails.

use std::time::Instant;

use progeny_ldp::montecarlo::{
    empirical_rate, estimator_tail_ratio, replicate, trial_rng, EmpiricalRate, LdpScenario, ProgenySampler, Threshold,
    ThresholdKind, DEFAULT_POPULATION_CAP,
};
use progeny_ldp::offspring::{DistSpec, Pmf};
use progeny_ldp::progeny::{total_progeny_pgf, total_progeny_pmf_dwass, ProgenyModel};
use progeny_ldp::ratefn::{
    compare_rates, rate_bivariate, rate_bivariate_oracle, rate_estimator_deterministic, rate_estimator_meaninit,
    rate_estimator_ratio, rate_estimator_ratio_contraction, rate_initial, rate_offspring, rate_progeny_closed,
    rate_progeny_direct,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// Binary relative entropy against Bernoulli(1/2), written out directly.
fn kl_half(x: f64) -> f64 {
    let t = |u: f64| if u == 0.0 { 0.0 } else { u * u.ln() };
    2f64.ln() + t(x) + t(1.0 - x)
}

fn half() -> Pmf {
    Pmf::bernoulli(0.5).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let laws = [
        ("bernoulli(0.3)", Pmf::bernoulli(0.3).unwrap()),
        ("bernoulli(0.5)", half()),
        ("geometric(0.3)", Pmf::geometric(0.3, 200).unwrap()),
        ("poisson(0.6)", Pmf::poisson(0.6, 100).unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (name, f) in &laws {
        for y in linspace(1.05, 6.0, 60) {
            let closed = y * rate_offspring(f, (y - 1.0) / y).unwrap().value;
            let direct = rate_progeny_direct(f, y).unwrap().value;
            let d = (closed - direct).abs();
            if d > worst {
                worst = d;
                worst_at = format!("{name} y={y:.4}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs < 30.0, format!("max |direct - closed| = {worst:.3e} at {worst_at}; {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let f = half();
    let pi = total_progeny_pmf_dwass(&f, 200).unwrap();
    let pmf_err = (1..=50).map(|k| (pi.prob(k) - 0.5f64.powi(k as i32)).abs()).fold(0.0, f64::max);
    let pgf_err = linspace(0.0, 0.9, 91)
        .into_iter()
        .map(|s| {
            let series: f64 = pi.support().map(|(k, p)| p * s.powi(k as i32)).sum();
            (series - total_progeny_pgf(&f, s).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        pmf_err <= 1e-12 && pgf_err <= 1e-8,
        format!("max |pi_k - 0.5^k| = {pmf_err:.3e}; max |series - G(s)| = {pgf_err:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let m = ProgenyModel::new(half(), Pmf::explicit(&[(1, 0.5), (2, 0.5)]).unwrap()).unwrap();
    let mut worst = 0.0f64;
    let mut worst_at = (0.0, 0.0);
    for i in 0..20 {
        let z = 1.0 + 5.0 * (i as f64 + 0.5) / 20.0;
        for j in 0..20 {
            let y = z + (6.0 - z) * (j as f64 + 1.0) / 20.0;
            let d = (rate_bivariate_oracle(&m, y, z).unwrap().value - rate_bivariate(&m, y, z).unwrap().value).abs();
            if d > worst {
                worst = d;
                worst_at = (y, z);
            }
        }
    }
    let at_mean = rate_bivariate_oracle(&m, 3.0, 1.5).unwrap().value;
    outcome(
        worst <= 1e-5 && at_mean.abs() <= 1e-8,
        format!(
            "max |oracle - closed| = {worst:.3e} at (y,z)=({:.3},{:.3}); oracle(3,1.5) = {at_mean:.3e}",
            worst_at.0, worst_at.1
        ),
    )
}

fn criterion_4() -> Outcome {
    let g = Pmf::explicit(&[(1, 0.5), (2, 0.5)]).unwrap();
    let m = ProgenyModel::new(half(), g).unwrap();
    let worst = linspace(0.0, 0.9, 40)
        .into_iter()
        .map(|x| {
            (rate_estimator_ratio_contraction(&m, x).unwrap().value - rate_estimator_ratio(&m, x).unwrap().value).abs()
        })
        .fold(0.0, f64::max);
    let spot = rate_estimator_ratio(&m, 0.25).unwrap().value;
    let t = (-kl_half(0.25) / 0.75).exp();
    let oracle = -(0.5 * t + 0.5 * t * t).ln();
    // The stated spot value 0.257834 carries a rounding slip in its
    // intermediate t; the composition itself gives 0.2578262.
    let stated = 0.257834;
    outcome(
        worst <= 1e-6 && (spot - oracle).abs() <= 1e-9 && (spot - stated).abs() <= 1e-5,
        format!(
            "max |contraction - closed| = {worst:.3e}; J(0.25) = {spot:.7} (composition {oracle:.7}, stated {stated})"
        ),
    )
}

fn criterion_5() -> Outcome {
    let xs = linspace(0.0, 0.95, 39);
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, pairs) in [("g={1:.5,2:.5}", vec![(1, 0.5), (2, 0.5)]), ("g={1:.5,3:.5}", vec![(1, 0.5), (3, 0.5)])] {
        let m = ProgenyModel::new(half(), Pmf::explicit(&pairs).unwrap()).unwrap();
        let table = compare_rates(&m, &xs).unwrap();
        let leq = table.rows.iter().all(|r| r.leq_ok);
        let equal_only_at_mean =
            table.rows.iter().all(|r| ((r.j_diamond - r.j_random).abs() <= 1e-9) == ((r.x - m.mu_f()).abs() < 1e-12));
        pass &= leq && equal_only_at_mean;
        notes.push(format!("{name}: leq={leq} equality-only-at-mu_f={equal_only_at_mean}"));
    }
    let det = ProgenyModel::new(half(), Pmf::explicit(&[(2, 1.0)]).unwrap()).unwrap();
    let table = compare_rates(&det, &xs).unwrap();
    let exact = table.rows.iter().all(|r| r.j_random == r.j_diamond || (r.j_random - r.j_diamond).abs() <= 1e-12);
    pass &= exact;
    notes.push(format!("g={{2:1}}: pointwise equal={exact}"));
    outcome(pass, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let g = Pmf::explicit(&[(1, 0.5), (2, 0.5)]).unwrap();
    let m = ProgenyModel::new(Pmf::explicit(&[(0, 1.0)]).unwrap(), g.clone()).unwrap();
    let mut worst = 0.0f64;
    let mut inf_ok = true;
    for x in linspace(-0.5, 0.99, 60) {
        let a = rate_estimator_meaninit(&m, x).unwrap().value;
        let b = rate_initial(&g, 1.5 / (1.0 - x)).unwrap().value;
        if a.is_infinite() || b.is_infinite() {
            inf_ok &= a.is_infinite() && b.is_infinite();
        } else {
            worst = worst.max((a - b).abs());
        }
    }
    for x in [-0.5000001, -0.6, -1.0, -3.0] {
        inf_ok &= rate_estimator_meaninit(&m, x).unwrap().value.is_infinite();
    }
    let at_edge = rate_estimator_meaninit(&m, -0.5).unwrap().value;
    let ratio_is_i_f = linspace(0.0, 0.9, 10).into_iter().all(|x| {
        let j = rate_estimator_ratio(&m, x).unwrap().value;
        let d = rate_estimator_deterministic(m.f(), 1, x).unwrap().value;
        let i = rate_offspring(m.f(), x).unwrap().value;
        j == i && d == i
    });
    outcome(
        worst <= 1e-9 && inf_ok && (at_edge - 2f64.ln()).abs() <= 1e-9 && ratio_is_i_f,
        format!(
            "max |J_mu_g - I_g(1.5/(1-x))| = {worst:.3e}; infinite below -0.5: {inf_ok}; J(-0.5) - log 2 = {:.3e}; mu_f=0 ratio rate = I_f: {ratio_is_i_f}",
            at_edge - 2f64.ln()
        ),
    )
}

fn mean_ge_scenario(n_schedule: Vec<u64>) -> LdpScenario {
    let t = Threshold { kind: ThresholdKind::MeanGe, level: 3.0 };
    LdpScenario {
        f: DistSpec::bernoulli(0.5),
        g: DistSpec::explicit(&[(1, 1.0)]),
        n_schedule,
        trials: 1_000_000,
        thresholds: vec![t],
        master_seed: 20_240_601,
        population_cap: DEFAULT_POPULATION_CAP,
    }
}

fn reference_i_g3() -> f64 {
    rate_progeny_closed(&half(), 3.0).unwrap().value
}

fn criterion_7() -> Outcome {
    let s = mean_ge_scenario(vec![40]);
    let reference = reference_i_g3();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let r = pool.install(|| empirical_rate(&s, &s.thresholds[0]).unwrap())[0];
    let secs = start.elapsed().as_secs_f64();
    let in_band = (0.85 * reference..=1.15 * reference).contains(&r.rate_estimate);
    let covered = (r.rate_estimate - reference).abs() <= r.ci_halfwidth + 0.15 * reference;
    outcome(
        !r.censored && in_band && covered && secs < 120.0,
        format!(
            "n=40 hits={} rate={:.5} +/- {:.5} vs I_G(3)={reference:.6} (ratio {:.3}); single-threaded {secs:.1}s",
            r.hits,
            r.rate_estimate,
            r.ci_halfwidth,
            r.rate_estimate / reference
        ),
    )
}

fn criterion_8() -> Outcome {
    let s = mean_ge_scenario(vec![10, 20, 40]);
    let reference = reference_i_g3();
    let rates: Vec<EmpiricalRate> = empirical_rate(&s, &s.thresholds[0]).unwrap();
    let gaps: Vec<f64> = rates.iter().map(|r| (r.rate_estimate - reference).abs()).collect();
    let mut inversions = 0;
    let mut unexplained = 0;
    for i in 1..rates.len() {
        if gaps[i] > gaps[i - 1] {
            inversions += 1;
            if gaps[i] - gaps[i - 1] > rates[i].ci_halfwidth + rates[i - 1].ci_halfwidth {
                unexplained += 1;
            }
        }
    }
    let all_uncensored = rates.iter().all(|r| !r.censored);
    let listing: Vec<String> = rates.iter().map(|r| format!("n={} rate={:.4}", r.n, r.rate_estimate)).collect();
    outcome(
        all_uncensored && inversions <= 1 && unexplained == 0,
        format!("{}; |rate - {reference:.6}| = {:.4?}", listing.join(", "), gaps),
    )
}

fn criterion_9() -> Outcome {
    let s = LdpScenario {
        f: DistSpec::bernoulli(0.5),
        g: DistSpec::explicit(&[(1, 0.5), (3, 0.5)]),
        n_schedule: vec![10, 20, 40, 80],
        trials: 200_000,
        thresholds: vec![],
        master_seed: 4_242,
        population_cap: DEFAULT_POPULATION_CAP,
    };
    let rows = estimator_tail_ratio(&s, 0.15).unwrap();
    let ordered = rows.iter().filter(|r| r.ratio.is_some()).all(|r| r.p_deterministic <= r.p_random);
    let last = rows.iter().rev().find_map(|r| r.ratio.map(|q| (r.n, q)));
    let small_ratio = matches!(last, Some((_, q)) if q <= 0.5);
    let listing: Vec<String> = rows
        .iter()
        .map(|r| {
            let ratio = r.ratio.map_or("censored".to_string(), |q| format!("{q:.3}"));
            format!("n={} P_det={:.2e} P_rand={:.2e} ratio={ratio}", r.n, r.p_deterministic, r.p_random)
        })
        .collect();
    outcome(ordered && small_ratio, listing.join("; "))
}

fn criterion_10() -> Outcome {
    let mut violations = Vec::new();
    let laws =
        [half(), Pmf::bernoulli(0.3).unwrap(), Pmf::geometric(0.3, 200).unwrap(), Pmf::poisson(0.6, 100).unwrap()];
    for f in &laws {
        let fam = format!("{:?}", f.family().tag());
        if (f.pgf(1.0).unwrap() + f.deficit() - 1.0).abs() > 1e-12 {
            violations.push(format!("{fam}: normalization"));
        }
        let grid = linspace(0.05, 0.95, 19);
        for w in grid.windows(3) {
            let (a, b, c) = (f.pgf(w[0]).unwrap(), f.pgf(w[1]).unwrap(), f.pgf(w[2]).unwrap());
            if a + c - 2.0 * b < -1e-14 {
                violations.push(format!("{fam}: pgf convexity at {}", w[1]));
            }
        }
        if rate_offspring(f, f.exact_mean()).unwrap().value.abs() > 1e-9 {
            violations.push(format!("{fam}: I_f zero at mean"));
        }
        let ys = linspace(1.05, 6.0, 40);
        let rates: Vec<f64> = ys.iter().map(|&y| rate_progeny_closed(f, y).unwrap().value).collect();
        if rates.iter().any(|&v| v < 0.0) {
            violations.push(format!("{fam}: negative I_G"));
        }
        for w in rates.windows(3) {
            if w[0] + w[2] - 2.0 * w[1] < -1e-9 {
                violations.push(format!("{fam}: I_G convexity"));
            }
        }
        let nu = 1.0 / (1.0 - f.exact_mean());
        if rate_progeny_closed(f, nu).unwrap().value.abs() > 1e-9 {
            violations.push(format!("{fam}: I_G zero at mean"));
        }
    }
    let m = ProgenyModel::new(half(), Pmf::explicit(&[(1, 0.5), (3, 0.5)]).unwrap()).unwrap();
    let sampler = ProgenySampler::new(m.f(), m.g(), DEFAULT_POPULATION_CAP).unwrap();
    let mut rng = trial_rng(1, 0, 1, 0);
    for _ in 0..100_000 {
        let (y, z) = sampler.sample(&mut rng).unwrap();
        if !(y >= z && z >= 1) {
            violations.push(format!("ordering Y={y} Z={z}"));
            break;
        }
    }
    let s = LdpScenario {
        f: DistSpec::bernoulli(0.5),
        g: DistSpec::explicit(&[(1, 0.5), (3, 0.5)]),
        n_schedule: vec![5, 10],
        trials: 5000,
        thresholds: vec![],
        master_seed: 99,
        population_cap: DEFAULT_POPULATION_CAP,
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| replicate(&s).unwrap());
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| replicate(&s).unwrap());
    if one != many {
        violations.push("seed replay differs across thread counts".into());
    }
    let detail = if violations.is_empty() {
        "0 violations (normalization, convexity, zero-at-mean, Y >= Z >= 1, seed replay)".to_string()
    } else {
        format!("{} violations: {}", violations.len(), violations.join(", "))
    };
    outcome(violations.is_empty(), detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("total-progeny rate: direct transform vs offspring-rate identity", criterion_1),
        ("Dwass pmf vs fixed-point pgf", criterion_2),
        ("joint rate: variational oracle vs closed form", criterion_3),
        ("estimator rate via contraction", criterion_4),
        ("random start no slower than deterministic start", criterion_5),
        ("mean-initial estimator rate without offspring", criterion_6),
        ("Monte Carlo decay rate of Ybar_40 >= 3", criterion_7),
        ("Monte Carlo estimates approach the rate as n grows", criterion_8),
        ("tail ratio deterministic / random start", criterion_9),
        ("module invariant suites", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} {id}: {name} -- {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
