//! Cross-check of the production engine against a deliberately naive
//! reference: a straight-line transliteration of the period loop using
//! per-player availability scans and hand-rolled stability counting, with
//! none of the production shortcuts (no stabbing index, no binary searches,
//! no incremental state). Every committed allocation and every recorded
//! period must match exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msmaxmin_core::engine::{Branch, EngineConfig, run};
use msmaxmin_core::gen::{GeneratorParams, gen_adversarial_flipflop, gen_random};
use msmaxmin_core::model::{
    AllocationMap, EntityId, Horizon, Instance, PlayerId, TimeStep, Value, nu_step,
};
use msmaxmin_core::ratio::{Rho, ThresholdWeight};
use msmaxmin_core::solvers::Solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Iv {
    start: TimeStep,
    end: TimeStep,
    player: PlayerId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RefPeriod {
    start: TimeStep,
    end: TimeStep,
    left: Value,
    right: Value,
    stable: Value,
    approx: Value,
    took_solver: bool,
}

/// Stability of one entity's plan over `[a, b]`: delta per unit step
/// `[u, u+1]` covered by a single interval.
fn lam_entity(plan: &[Iv], a: TimeStep, b: TimeStep, delta: Value) -> Value {
    let mut units = 0u64;
    for u in a..b {
        if plan.iter().any(|iv| iv.start <= u && u + 1 <= iv.end) {
            units += 1;
        }
    }
    delta * units
}

/// Stability of the whole state: summed per entity.
fn lam(plans: &[Vec<Iv>], a: TimeStep, b: TimeStep, delta: Value) -> Value {
    plans.iter().map(|p| lam_entity(p, a, b, delta)).sum()
}

fn instance_at(horizon: &Horizon, t: TimeStep) -> Instance {
    if t <= horizon.tau() {
        horizon.instance(t).clone()
    } else {
        Instance::empty(t)
    }
}

/// Greedy per-entity planning over `[a, b]` by direct rescanning: at each
/// position take the player whose allowed run from here lasts longest,
/// smallest player index on ties.
fn ref_plan_entity(
    horizon: &Horizon,
    e: EntityId,
    a: TimeStep,
    b: TimeStep,
) -> Vec<Iv> {
    let n = horizon.player_count() as u32;
    let mut out = Vec::new();
    let mut i = a;
    while i <= b {
        let mut best: Option<(TimeStep, PlayerId)> = None;
        for q in (0..n).map(PlayerId) {
            if !instance_at(horizon, i).is_allowed(e, q) {
                continue;
            }
            let mut k = i;
            while k + 1 <= b && instance_at(horizon, k + 1).is_allowed(e, q) {
                k += 1;
            }
            let candidate = (k, q);
            best = Some(match best {
                None => candidate,
                Some((bk, bq)) => {
                    if k > bk || (k == bk && q < bq) {
                        candidate
                    } else {
                        (bk, bq)
                    }
                }
            });
        }
        match best {
            Some((k, p)) => {
                out.push(Iv { start: i, end: k, player: p });
                i = k + 1;
            }
            None => i += 1,
        }
    }
    out
}

fn ref_run(
    horizon: &Horizon,
    solver: &dyn Solver,
    w: u32,
    threshold: &ThresholdWeight,
) -> (Vec<AllocationMap>, Vec<RefPeriod>) {
    let tau = horizon.tau();
    let delta = horizon.delta();
    let n = horizon.player_count();
    let m = horizon.entity_count();
    let mut plans: Vec<Vec<Iv>> = vec![Vec::new(); m];
    let mut allocations = Vec::new();
    let mut periods = Vec::new();
    let mut period_start: TimeStep = 1;
    let mut prev: Option<(TimeStep, bool)> = None;

    for s in 1..=tau {
        if s != period_start {
            continue;
        }
        // Replan every entity not covered by an interval straddling s.
        for plan in plans.iter_mut() {
            let straddles = plan
                .iter()
                .any(|iv| iv.start < s && iv.start <= s && s <= iv.end);
            if straddles {
                continue;
            }
            plan.retain(|iv| iv.start < s);
        }
        for (ei, plan) in plans.iter_mut().enumerate() {
            if plan.iter().any(|iv| iv.start < s && s <= iv.end) {
                continue;
            }
            plan.extend(ref_plan_entity(horizon, EntityId(ei as u32), s, s + w));
        }

        // Candidate end times.
        let mut t = s + w;
        for plan in &plans {
            for iv in plan {
                if iv.end >= s && iv.end <= s + w {
                    t = t.min(iv.end);
                }
                if iv.start >= s + 1 && iv.start <= s + w {
                    t = t.min(iv.start - 1);
                }
            }
        }

        // Solver allocations for the period (empty past the horizon).
        let mut approx_allocs = Vec::new();
        let mut approx: Value = 0;
        for j in s..=t.min(tau) {
            let inst = horizon.instance(j);
            let mut b = solver.solve(inst, n).unwrap();
            b.strip_disallowed(inst);
            approx += nu_step(&b, inst, n).unwrap();
            approx_allocs.push(b);
        }

        let left = match prev {
            Some((r, true)) if s > 1 && s <= r + w => lam(&plans, s - 1, s, delta),
            _ => 0,
        };
        let right = if t < s + w { lam(&plans, t, t + 1, delta) } else { 0 };
        let stable = lam(&plans, s, t.min(tau), delta);

        let margin = approx as i128 - left as i128 - stable as i128;
        let took_solver = threshold.margin_meets(margin, right);

        for j in s..=t.min(tau) {
            if took_solver {
                allocations.push(approx_allocs[(j - s) as usize].clone());
            } else {
                let mut a = AllocationMap::empty(j);
                for (ei, plan) in plans.iter().enumerate() {
                    if let Some(iv) = plan.iter().find(|iv| iv.start <= j && j <= iv.end) {
                        a.insert(EntityId(ei as u32), iv.player);
                    }
                }
                allocations.push(a);
            }
        }
        periods.push(RefPeriod {
            start: s,
            end: t.min(tau),
            left,
            right,
            stable,
            approx,
            took_solver,
        });
        prev = Some((s, !took_solver));
        period_start = t + 1;
    }
    (allocations, periods)
}

fn assert_engines_agree(horizon: &Horizon, solver: &dyn Solver, w: u32, rho: Rho, label: &str) {
    let config = EngineConfig::new(w, horizon.delta(), rho).unwrap();
    let trace = run(horizon, solver, &config).unwrap();
    let (ref_allocs, ref_periods) = ref_run(horizon, solver, w, config.threshold());

    assert_eq!(trace.allocations, ref_allocs, "{label}: allocations diverge");
    assert_eq!(trace.periods.len(), ref_periods.len(), "{label}: period count");
    for (got, want) in trace.periods.iter().zip(&ref_periods) {
        assert_eq!((got.start, got.end), (want.start, want.end), "{label}: bounds");
        assert_eq!(got.left_reward, want.left, "{label}: left at {}", got.start);
        assert_eq!(got.right_reward, want.right, "{label}: right at {}", got.start);
        assert_eq!(got.stable_reward, want.stable, "{label}: stable at {}", got.start);
        assert_eq!(got.approx_value, want.approx, "{label}: approx at {}", got.start);
        assert_eq!(
            got.chosen == Branch::Approx,
            want.took_solver,
            "{label}: branch at {}",
            got.start
        );
    }
}

#[test]
fn production_engine_matches_the_naive_reference_on_random_horizons() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE5EF);
    let exact = msmaxmin_core::solvers::ExactSolver::default();
    let greedy = msmaxmin_core::solvers::GreedySolver;
    for trial in 0..300 {
        let params = GeneratorParams {
            players: rng.random_range(1..=3),
            entities: rng.random_range(1..=4),
            tau: rng.random_range(1..=10),
            lookahead: 1,
            delta: rng.random_range(0..=8),
            value_max: rng.random_range(0..=9),
            availability_density: rng.random_range(0.1..=1.0),
            churn: rng.random_range(0.0..=1.0),
            seed: rng.random(),
        };
        let horizon = gen_random(&params).unwrap();
        let w = rng.random_range(1..=3);
        if rng.random_bool(0.7) {
            assert_engines_agree(&horizon, &exact, w, Rho::ONE, &format!("trial {trial} exact"));
        } else {
            let rho = Rho::new(rng.random_range(1..=4), 4).unwrap();
            assert_engines_agree(&horizon, &greedy, w, rho, &format!("trial {trial} greedy"));
        }
    }
}

#[test]
fn production_engine_matches_the_reference_on_adversarial_families() {
    let exact = msmaxmin_core::solvers::ExactSolver::default();
    for (n, m, tau, delta, w) in [
        (2, 1, 6, 9, 1),
        (2, 3, 8, 1, 2),
        (3, 2, 9, 100, 3),
    ] {
        let h = gen_adversarial_flipflop(n, m, tau, delta).unwrap();
        assert_engines_agree(&h, &exact, w, Rho::ONE, &format!("flipflop n={n} m={m}"));
    }
    // Persistent single entity, zero values: stable branches throughout.
    for tau in [1u32, 2, 5, 6, 7, 12] {
        let insts: Vec<Instance> = (1..=tau)
            .map(|t| {
                let mut allowed = std::collections::BTreeMap::new();
                allowed.insert(EntityId(0), [PlayerId(0)].into_iter().collect());
                Instance::from_parts(t, allowed, std::collections::BTreeMap::new()).unwrap()
            })
            .collect();
        let h = Horizon::new(
            vec!["p1".into(), "p2".into()],
            vec!["e1".into()],
            10,
            insts,
        )
        .unwrap();
        for w in 1..=3 {
            assert_engines_agree(&h, &exact, w, Rho::ONE, &format!("persistent tau={tau} w={w}"));
        }
    }
}
