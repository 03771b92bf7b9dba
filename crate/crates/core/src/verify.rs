//! Randomized verification suite pitting the engine and its subroutines
//! against the brute-force oracles. Each check reports how many cases it
//! examined and every counterexample it found (with the offending horizon in
//! line format, so a failure can be replayed).

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Branch, EngineConfig, OnlineEngine, run};
use crate::gen::{GeneratorParams, gen_random};
use crate::jsonl::save_horizon;
use crate::model::{
    AssignmentIntervalSet, EntityId, Horizon, Instance, PlayerId, TimeStep, Value,
};
use crate::oracle::{
    brute_stability_prefix_maxima, check_dominance_conditions, check_guarantee_bound,
    check_period_alignment, check_snapshot_stability, offline_exhaustive, offline_optimal,
};
use crate::ratio::Rho;
use crate::solvers::{ExactSolver, GreedySolver, Solver};
use crate::stable::{build_index, stable_entity};

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: u64,
    pub elapsed_ms: f64,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// One status line: `name: PASS (12345 cases, 17 ms)` or `FAIL`.
    pub fn status_line(&self) -> String {
        format!(
            "{}: {} ({} cases, {:.0} ms)",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases,
            self.elapsed_ms
        )
    }
}

fn finish(name: &'static str, started: Instant, cases: u64, failures: Vec<String>) -> CheckReport {
    CheckReport {
        name,
        cases,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        failures,
    }
}

/// Random availability window for a single entity: `n` players, steps
/// `[a, a + len - 1]`, each pair allowed independently with `density`.
fn random_window(
    rng: &mut ChaCha8Rng,
    a: TimeStep,
    len: usize,
    n: u32,
    density: f64,
) -> Vec<Instance> {
    (0..len)
        .map(|j| {
            let set: BTreeSet<PlayerId> = (0..n)
                .filter(|_| rng.random_bool(density))
                .map(PlayerId)
                .collect();
            let mut allowed = BTreeMap::new();
            if !set.is_empty() {
                allowed.insert(EntityId(0), set);
            }
            Instance::from_parts(a + j as TimeStep, allowed, BTreeMap::new()).unwrap()
        })
        .collect()
}

/// Random valid interval set: a random per-step choice sequence compressed
/// into maximal runs, then randomly re-split (interval sets need not be
/// maximal runs).
fn random_interval_set(
    rng: &mut ChaCha8Rng,
    entity: EntityId,
    a: TimeStep,
    window: &[Instance],
) -> AssignmentIntervalSet {
    let mut out = AssignmentIntervalSet::new(entity);
    let mut run: Option<(TimeStep, PlayerId)> = None;
    let close = |run: &mut Option<(TimeStep, PlayerId)>,
                     end: TimeStep,
                     out: &mut AssignmentIntervalSet,
                     rng: &mut ChaCha8Rng| {
        if let Some((start, p)) = run.take() {
            // Occasionally split the run into two touching intervals.
            if end > start && rng.random_bool(0.3) {
                let cut = rng.random_range(start..end);
                out.push(start, cut, p).unwrap();
                out.push(cut + 1, end, p).unwrap();
            } else {
                out.push(start, end, p).unwrap();
            }
        }
    };
    for (j, inst) in window.iter().enumerate() {
        let t = a + j as TimeStep;
        let options: Vec<PlayerId> = inst.allowed_players(entity).collect();
        let choice = if options.is_empty() || rng.random_bool(0.3) {
            None
        } else {
            Some(options[rng.random_range(0..options.len())])
        };
        match (run, choice) {
            (Some((_, p)), Some(q)) if p == q => {}
            (_, Some(q)) => {
                close(&mut run, t - 1, &mut out, rng);
                run = Some((t, q));
            }
            (_, None) => close(&mut run, t - 1, &mut out, rng),
        }
    }
    let b = a + window.len() as TimeStep - 1;
    close(&mut run, b, &mut out, rng);
    out
}

/// Greedy planning is optimal for every prefix: the plan's stability value
/// over `[a, a+j]` must equal the brute-force maximum for all `j`.
pub fn check_greedy_stability_optimality(trials: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for trial in 0..trials {
        let n = rng.random_range(1..=4u32);
        let len = rng.random_range(1..=6usize);
        let a = rng.random_range(1..=4u32);
        let density = rng.random_range(0.2..=0.9);
        let delta = rng.random_range(1..=5u64);
        let window = random_window(&mut rng, a, len, n, density);
        let b = a + len as TimeStep - 1;
        let plan = stable_entity(EntityId(0), a, b, &window);
        let maxima =
            brute_stability_prefix_maxima(EntityId(0), a, b, &window, delta).unwrap();
        for (j, &best) in maxima.iter().enumerate() {
            let got = plan.lambda(a, a + j as TimeStep, delta);
            if got != best {
                failures.push(format!(
                    "trial {trial}: prefix [{a}, {}] plan value {got} != brute maximum {best}",
                    a + j as TimeStep
                ));
            }
        }
        if failures.len() > 5 {
            break;
        }
    }
    finish("greedy stability optimality", started, trials, failures)
}

/// Whenever a pair of interval sets satisfies the structural dominance
/// conditions, prefix dominance must follow. Pairs mix the greedy plan
/// (which satisfies the conditions against anything) with random pairs that
/// satisfy them by chance.
pub fn check_dominance_implication(pairs: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut satisfied = 0u64;
    while satisfied < pairs && failures.len() < 5 {
        let n = rng.random_range(1..=4u32);
        let len = rng.random_range(1..=6usize);
        let a = rng.random_range(1..=3u32);
        let density = rng.random_range(0.2..=0.9);
        let window = random_window(&mut rng, a, len, n, density);
        let b = a + len as TimeStep - 1;
        let greedy = stable_entity(EntityId(0), a, b, &window);
        for _ in 0..4 {
            let x = random_interval_set(&mut rng, EntityId(0), a, &window);
            let from_greedy = rng.random_bool(0.5);
            let y = if from_greedy {
                greedy.clone()
            } else {
                random_interval_set(&mut rng, EntityId(0), a, &window)
            };
            let check = check_dominance_conditions(&x, &y, a, b);
            if from_greedy && !check.conditions_hold {
                failures.push(format!(
                    "greedy plan fails the dominance conditions against x={x:?} on [{a}, {b}]"
                ));
            }
            if check.conditions_hold {
                satisfied += 1;
                if !check.dominance_holds {
                    failures.push(format!(
                        "conditions hold but dominance fails for x={x:?} y={y:?} on [{a}, {b}]"
                    ));
                }
            }
        }
    }
    finish("dominance conditions imply prefix dominance", started, satisfied, failures)
}

fn small_random_horizon(
    rng: &mut ChaCha8Rng,
    n_max: u32,
    m_max: u32,
    tau_max: TimeStep,
    deltas: &[Value],
) -> Horizon {
    let params = GeneratorParams {
        players: rng.random_range(1..=n_max),
        entities: rng.random_range(1..=m_max),
        tau: rng.random_range(1..=tau_max),
        lookahead: 1,
        delta: deltas[rng.random_range(0..deltas.len())],
        value_max: rng.random_range(0..=6),
        availability_density: rng.random_range(0.2..=0.9),
        churn: rng.random_range(0.0..=0.8),
        seed: rng.random(),
    };
    gen_random(&params).unwrap()
}

/// No alternative plan for an entity can beat the engine's committed plan by
/// more than the `(w+1)/w` prefix factor: for every step `t` within reach of
/// the latest planned start `alpha`,
/// `w * max_X lambda(X[1..t]) <= (w+1) * lambda(S[1..alpha]) + w * lambda(S[alpha..t])`,
/// with both plan terms read from the snapshot taken at `alpha`.
pub fn check_prefix_carryover_bound(horizons: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solver = ExactSolver::default();
    let mut failures = Vec::new();
    let mut cases = 0u64;
    for trial in 0..horizons {
        let horizon = small_random_horizon(&mut rng, 3, 2, 6, &[1, 2, 3, 4, 5]);
        let w = rng.random_range(1..=2u32);
        let config = EngineConfig::new(w, horizon.delta(), Rho::ONE).unwrap();
        let trace = run(&horizon, &solver, &config).unwrap();
        let tau = horizon.tau();
        let delta = horizon.delta();
        for e in horizon.entity_ids() {
            // Per-prefix maxima over every alternative plan for this entity.
            let window: Vec<Instance> = (1..=tau).map(|t| horizon.instance(t).clone()).collect();
            let alt_maxima =
                brute_stability_prefix_maxima(e, 1, tau, &window, delta).unwrap();
            for t in 1..=tau {
                let snap_t = trace
                    .snapshot_at(trace.period_of(t).unwrap().start)
                    .unwrap();
                let plan_at_t = &snap_t.plans[e.0 as usize];
                let alpha = plan_at_t
                    .intervals()
                    .iter()
                    .map(|iv| iv.start)
                    .filter(|&s| s <= t)
                    .max();
                let Some(alpha) = alpha else { continue };
                if t > alpha + w {
                    continue;
                }
                let Some(snap_alpha) = trace.snapshot_at(alpha) else {
                    failures.push(format!(
                        "trial {trial}: planned start {alpha} has no period snapshot\n{}",
                        save_horizon(&horizon)
                    ));
                    continue;
                };
                let plan = &snap_alpha.plans[e.0 as usize];
                let alt = alt_maxima[(t - 1) as usize];
                let lhs = w as u128 * alt as u128;
                let rhs = (w as u128 + 1) * plan.lambda(1, alpha, delta) as u128
                    + w as u128 * plan.lambda(alpha, t, delta) as u128;
                cases += 1;
                if lhs > rhs {
                    failures.push(format!(
                        "trial {trial}: entity {e} t={t} alpha={alpha} w={w}: \
                         {lhs} > {rhs}\n{}",
                        save_horizon(&horizon)
                    ));
                }
            }
        }
        if failures.len() > 3 {
            break;
        }
    }
    finish("prefix carry-over bound", started, cases, failures)
}

/// The headline guarantee, certified per instance in exact arithmetic
/// against the offline optimum, plus the structural trace invariants.
pub fn check_guarantee(horizons: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solver = ExactSolver::default();
    let mut failures = Vec::new();
    for trial in 0..horizons {
        let horizon = small_random_horizon(&mut rng, 3, 3, 8, &[0, 1, 5]);
        let w = rng.random_range(1..=3u32);
        let config = EngineConfig::new(w, horizon.delta(), Rho::ONE).unwrap();
        let trace = run(&horizon, &solver, &config).unwrap();
        let mut fail = |msg: String| {
            failures.push(format!("trial {trial} (w={w}): {msg}\n{}", save_horizon(&horizon)));
        };
        if let Err(msg) = trace.check_structure(config.threshold()) {
            fail(msg);
            continue;
        }
        if let Err(msg) = check_period_alignment(&trace) {
            fail(msg);
            continue;
        }
        if let Err(msg) = check_snapshot_stability(&trace) {
            fail(msg);
            continue;
        }
        // The realized interval-form stability must equal the per-period
        // accounting: stable reward plus carried-over reward, summed over
        // the periods that kept their plans.
        let period_sum: u64 = trace
            .periods
            .iter()
            .filter(|p| p.chosen == Branch::Stable)
            .map(|p| p.stable_reward + p.left_reward)
            .sum();
        if period_sum != trace.lambda_interval_total {
            fail(format!(
                "interval stability {} disagrees with the period accounting {}",
                trace.lambda_interval_total, period_sum
            ));
            continue;
        }
        let offline = offline_optimal(&horizon).unwrap();
        if offline.total < trace.total_pairwise() {
            fail(format!(
                "offline total {} below the engine's {}",
                offline.total,
                trace.total_pairwise()
            ));
            continue;
        }
        match check_guarantee_bound(&trace, &offline, &config) {
            Ok(true) => {}
            Ok(false) => fail(format!(
                "guarantee violated: engine {} + {} vs offline nu={} lambda={}",
                trace.nu_total, trace.lambda_interval_total, offline.nu, offline.lambda
            )),
            Err(e) => fail(e.to_string()),
        }
        if failures.len() > 3 {
            break;
        }
    }
    finish("competitive guarantee", started, horizons, failures)
}

/// The offline dynamic program must agree with exhaustive trajectory
/// enumeration on micro horizons, trajectory included.
pub fn check_offline_dp(horizons: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    // Population shapes with at most 27 per-step states.
    let shapes = [(1u32, 3u32), (2, 2), (2, 3), (3, 2), (1, 4), (3, 1)];
    for trial in 0..horizons {
        let (n, m) = shapes[rng.random_range(0..shapes.len())];
        let params = GeneratorParams {
            players: n,
            entities: m,
            tau: rng.random_range(1..=4),
            lookahead: 1,
            delta: rng.random_range(0..=4),
            value_max: rng.random_range(0..=5),
            availability_density: rng.random_range(0.3..=1.0),
            churn: rng.random_range(0.0..=0.8),
            seed: rng.random(),
        };
        let horizon = gen_random(&params).unwrap();
        let dp = offline_optimal(&horizon).unwrap();
        let brute = offline_exhaustive(&horizon).unwrap();
        if dp.total != brute.total || dp.allocations != brute.allocations {
            failures.push(format!(
                "trial {trial}: dp total {} vs exhaustive {}\n{}",
                dp.total,
                brute.total,
                save_horizon(&horizon)
            ));
            if failures.len() > 3 {
                break;
            }
        }
    }
    finish("offline optimum dynamic program", started, horizons, failures)
}

/// The stabbing-max index must agree with the linear scan on every query.
pub fn check_stab_index(queries: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut asked = 0u64;
    while asked < queries && failures.len() < 5 {
        let n = rng.random_range(1..=6u32);
        let len = rng.random_range(1..=12usize);
        let a = rng.random_range(1..=8u32);
        let density = rng.random_range(0.1..=0.9);
        let window = random_window(&mut rng, a, len, n, density);
        let index = build_index(EntityId(0), &window);
        for i in a.saturating_sub(1)..=(a + len as TimeStep) {
            asked += 1;
            let fast = index.stab(i);
            let slow = index.stab_linear(i);
            if fast != slow {
                failures.push(format!("stab({i}) = {fast:?} but scan says {slow:?}"));
            }
        }
    }
    finish("stabbing index vs linear scan", started, asked, failures)
}

/// Batch runs and the streaming interface must commit identical allocations,
/// and repeated runs must be identical in every recorded detail.
pub fn check_streaming_equivalence(trials: u64, seed: u64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exact = ExactSolver::default();
    let greedy = GreedySolver;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let horizon = small_random_horizon(&mut rng, 3, 3, 10, &[0, 1, 5]);
        let w = rng.random_range(1..=3u32);
        let use_exact = rng.random_bool(0.7);
        let solver: &dyn Solver = if use_exact { &exact } else { &greedy };
        let rho = if use_exact {
            Rho::ONE
        } else {
            Rho::new(1, 2).unwrap()
        };
        let config = EngineConfig::new(w, horizon.delta(), rho).unwrap();
        let batch = run(&horizon, solver, &config).unwrap();
        let again = run(&horizon, solver, &config).unwrap();
        if batch != again {
            failures.push(format!(
                "trial {trial}: repeated runs differ\n{}",
                save_horizon(&horizon)
            ));
            continue;
        }

        // Streaming: feed one step at a time, polling eagerly as results
        // become available; close and drain the tail.
        let mut engine = OnlineEngine::new(
            horizon.player_count(),
            horizon.entity_count(),
            config.clone(),
            solver,
        );
        let mut streamed = Vec::new();
        for t in 1..=horizon.tau() {
            engine.feed(horizon.instance(t).clone()).unwrap();
            while let Ok(a) = engine.poll(streamed.len() as TimeStep + 1) {
                streamed.push(a.clone());
            }
        }
        engine.close().unwrap();
        while streamed.len() < horizon.tau() as usize {
            match engine.poll(streamed.len() as TimeStep + 1) {
                Ok(a) => streamed.push(a.clone()),
                Err(e) => {
                    failures.push(format!("trial {trial}: poll failed after close: {e}"));
                    break;
                }
            }
        }
        if streamed != batch.allocations {
            failures.push(format!(
                "trial {trial}: streaming allocations differ from the batch run\n{}",
                save_horizon(&horizon)
            ));
        }
        if failures.len() > 3 {
            break;
        }
    }
    finish("determinism and streaming equivalence", started, trials, failures)
}

/// Trial counts for a full verification pass.
#[derive(Debug, Clone, Copy)]
pub struct VerifyScale {
    pub greedy_trials: u64,
    pub dominance_pairs: u64,
    pub carryover_horizons: u64,
    pub guarantee_horizons: u64,
    pub dp_horizons: u64,
    pub stab_queries: u64,
    pub streaming_trials: u64,
}

impl VerifyScale {
    /// Scales every check from one knob; `trials = 500` roughly matches the
    /// acceptance workload.
    pub fn from_trials(trials: u64) -> Self {
        VerifyScale {
            greedy_trials: trials.max(1) * 2,
            dominance_pairs: trials.max(1) * 2,
            carryover_horizons: (trials * 3 / 5).max(10),
            guarantee_horizons: trials.max(10),
            dp_horizons: (trials / 10).max(5),
            stab_queries: trials.max(1) * 200,
            streaming_trials: (trials / 5).max(5),
        }
    }
}

/// Runs every check in the suite.
pub fn verify_all(scale: &VerifyScale, seed: u64) -> Vec<CheckReport> {
    vec![
        check_greedy_stability_optimality(scale.greedy_trials, seed),
        check_dominance_implication(scale.dominance_pairs, seed.wrapping_add(1)),
        check_prefix_carryover_bound(scale.carryover_horizons, seed.wrapping_add(2)),
        check_guarantee(scale.guarantee_horizons, seed.wrapping_add(3)),
        check_offline_dp(scale.dp_horizons, seed.wrapping_add(4)),
        check_stab_index(scale.stab_queries, seed.wrapping_add(5)),
        check_streaming_equivalence(scale.streaming_trials, seed.wrapping_add(6)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_verification_pass_is_clean() {
        let scale = VerifyScale {
            greedy_trials: 60,
            dominance_pairs: 60,
            carryover_horizons: 25,
            guarantee_horizons: 30,
            dp_horizons: 8,
            stab_queries: 2000,
            streaming_trials: 10,
        };
        for report in verify_all(&scale, 7) {
            assert!(
                report.passed(),
                "{}:\n{}",
                report.name,
                report.failures.join("\n")
            );
            assert!(report.cases > 0);
        }
    }

    #[test]
    fn status_lines_read_cleanly() {
        let r = check_stab_index(500, 3);
        let line = r.status_line();
        assert!(line.contains("PASS"));
        assert!(line.contains("cases"));
    }
}
