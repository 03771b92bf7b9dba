//! Acceptance suite: one test per shipping criterion, each printing a
//! pass/fail line (visible with `cargo test -- --nocapture`).

use num_bigint::BigInt;
use num_rational::BigRational;

use msmaxmin_core::engine::{EngineConfig, compute_c0, run};
use msmaxmin_core::gen::{GeneratorParams, gen_adversarial_flipflop, gen_random};
use msmaxmin_core::ratio::Rho;
use msmaxmin_core::solvers::ExactSolver;
use msmaxmin_core::verify::{
    CheckReport, check_dominance_implication, check_greedy_stability_optimality,
    check_guarantee, check_offline_dp, check_prefix_carryover_bound, check_stab_index,
    check_streaming_equivalence,
};

fn report_line(criterion: &str, ok: bool) {
    println!("criterion {criterion}: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed");
}

fn assert_clean(criterion: &str, report: CheckReport, min_cases: u64) {
    let ok = report.passed() && report.cases >= min_cases;
    println!(
        "criterion {criterion}: {} ({} cases, {:.0} ms)",
        if ok { "PASS" } else { "FAIL" },
        report.cases,
        report.elapsed_ms
    );
    assert!(
        report.cases >= min_cases,
        "criterion {criterion}: only {} cases (need {min_cases})",
        report.cases
    );
    assert!(
        report.passed(),
        "criterion {criterion} failed:\n{}",
        report.failures.join("\n")
    );
}

#[test]
fn criterion_01_threshold_weight_closed_form() {
    let c0 = compute_c0(Rho::ONE, 1).unwrap();
    let expected_c0 = 3f64.sqrt() - 1.0;
    let expected_ratio = 2.0 - 3f64.sqrt();
    let ok = (c0.as_f64() - expected_c0).abs() < 1e-9
        && (c0.competitive_ratio_f64() - expected_ratio).abs() < 1e-9;
    report_line("01 threshold weight closed form", ok);
}

#[test]
fn criterion_02_ratio_improvement_margin() {
    // For every rho on the 0.05 grid at lookahead 1, the guaranteed ratio
    // must beat rho/(4 rho + 2) by more than rho/10. Exact rationals; the
    // enclosure's upper endpoint makes the left side a safe lower bound.
    let one = BigRational::from(BigInt::from(1));
    let mut ok = true;
    for k in 1..=20u64 {
        let rho = Rho::new(k, 20).unwrap();
        let c0 = compute_c0(rho, 1).unwrap();
        let (_, hi) = c0.enclosure();
        let rho_q = rho.as_rational();
        let lhs = (&one - hi) * &rho_q;
        let four_rho_plus_two =
            BigRational::from(BigInt::from(4)) * &rho_q + BigRational::from(BigInt::from(2));
        let rhs = &rho_q / four_rho_plus_two + &rho_q / BigRational::from(BigInt::from(10));
        if lhs <= rhs {
            eprintln!("rho = {k}/20: guaranteed ratio does not clear the margin");
            ok = false;
        }
    }
    report_line("02 ratio improvement margin", ok);
}

#[test]
fn criterion_03_greedy_stability_optimality() {
    assert_clean(
        "03 greedy stability optimality",
        check_greedy_stability_optimality(1000, 0xACC3),
        1000,
    );
}

#[test]
fn criterion_04_dominance_conditions_imply_prefix_dominance() {
    assert_clean(
        "04 dominance implication",
        check_dominance_implication(1000, 0xACC4),
        1000,
    );
}

#[test]
fn criterion_05_prefix_carryover_bound() {
    assert_clean(
        "05 prefix carry-over bound",
        check_prefix_carryover_bound(300, 0xACC5),
        300,
    );
}

#[test]
fn criterion_06_competitive_guarantee() {
    assert_clean(
        "06 competitive guarantee",
        check_guarantee(500, 0xACC6),
        500,
    );
}

#[test]
fn criterion_07_running_time_structure() {
    // One solver call per step, periods tiling the horizon, and period
    // lengths bounded by the lookahead, across instance families.
    let solver = ExactSolver::default();
    let mut ok = true;
    let mut runs = 0u64;
    for seed in 0..60u64 {
        let params = GeneratorParams {
            players: 1 + (seed % 3) as u32,
            entities: 1 + (seed % 4) as u32,
            tau: 1 + (seed % 9) as u32,
            lookahead: 1 + (seed % 3) as u32,
            delta: seed % 7,
            value_max: 5,
            availability_density: 0.1 + 0.8 * ((seed % 10) as f64 / 10.0),
            churn: 0.5,
            seed,
        };
        let h = gen_random(&params).unwrap();
        let cfg = EngineConfig::new(params.lookahead, params.delta, Rho::ONE).unwrap();
        let trace = run(&h, &solver, &cfg).unwrap();
        runs += 1;
        if let Err(msg) = trace.check_structure(cfg.threshold()) {
            eprintln!("seed {seed}: {msg}");
            ok = false;
        }
    }
    for (n, m, tau, w) in [(2, 1, 4, 1), (3, 2, 7, 2), (2, 3, 9, 3)] {
        let h = gen_adversarial_flipflop(n, m, tau, 5).unwrap();
        let cfg = EngineConfig::new(w, 5, Rho::ONE).unwrap();
        let trace = run(&h, &solver, &cfg).unwrap();
        runs += 1;
        if trace.solver_calls != tau as u64 {
            eprintln!("flip-flop (n={n}, m={m}): {} calls for {tau} steps", trace.solver_calls);
            ok = false;
        }
        if let Err(msg) = trace.check_structure(cfg.threshold()) {
            eprintln!("flip-flop (n={n}, m={m}): {msg}");
            ok = false;
        }
    }
    println!("criterion 07 running-time structure: {} ({runs} runs)", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion 07 failed");
}

#[test]
fn criterion_08_stabbing_index_queries() {
    assert_clean(
        "08 stabbing index vs scan",
        check_stab_index(100_000, 0xACC8),
        100_000,
    );
}

#[test]
fn criterion_09_offline_dp_validity() {
    assert_clean("09 offline optimum validity", check_offline_dp(50, 0xACC9), 50);
}

#[test]
fn criterion_10_determinism_and_streaming() {
    assert_clean(
        "10 determinism and streaming equivalence",
        check_streaming_equivalence(100, 0xACCA),
        100,
    );
}
