//! Deterministic instance generators. All randomness flows from the seed in
//! the parameters; no ambient entropy.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{EntityId, Horizon, Instance, PlayerId, TimeStep, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("{field} must be at least 1")]
    ZeroSize { field: &'static str },
    #[error("{field} = {value} is not a probability in [0, 1]")]
    BadProbability { field: &'static str, value: f64 },
    #[error("the flip-flop family needs at least 2 players, got {0}")]
    TooFewPlayers(u32),
}

/// Parameters for the random family. `lookahead` is carried for experiment
/// orchestration; the generated horizon itself does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub players: u32,
    pub entities: u32,
    pub tau: TimeStep,
    pub lookahead: u32,
    pub delta: Value,
    pub value_max: Value,
    /// Probability that an entity is allowed at a player per step.
    pub availability_density: f64,
    /// Probability that an entity's allowed set is re-rolled between steps.
    pub churn: f64,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), GenError> {
        for (field, v) in [
            ("players", self.players),
            ("entities", self.entities),
            ("tau", self.tau),
            ("lookahead", self.lookahead),
        ] {
            if v == 0 {
                return Err(GenError::ZeroSize { field });
            }
        }
        for (field, v) in [
            ("availability_density", self.availability_density),
            ("churn", self.churn),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(GenError::BadProbability { field, value: v });
            }
        }
        Ok(())
    }
}

fn default_names(prefix: &str, count: u32) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Random horizon: initial restriction lists are drawn per pair with the
/// configured density, re-rolled per entity between steps with the churn
/// probability, and values are drawn fresh each step for every allowed pair.
pub fn gen_random(params: &GeneratorParams) -> Result<Horizon, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.players;
    let m = params.entities;

    let roll_set = |rng: &mut ChaCha8Rng| -> BTreeSet<PlayerId> {
        (0..n)
            .filter(|_| rng.random_bool(params.availability_density))
            .map(PlayerId)
            .collect()
    };

    let mut current: Vec<BTreeSet<PlayerId>> =
        (0..m).map(|_| roll_set(&mut rng)).collect();
    let mut instances = Vec::with_capacity(params.tau as usize);
    for t in 1..=params.tau {
        if t > 1 {
            for set in current.iter_mut() {
                if rng.random_bool(params.churn) {
                    *set = roll_set(&mut rng);
                }
            }
        }
        let mut allowed = BTreeMap::new();
        let mut values = BTreeMap::new();
        for e in 0..m {
            let set = &current[e as usize];
            if set.is_empty() {
                continue;
            }
            allowed.insert(EntityId(e), set.clone());
            for &p in set {
                let v = rng.random_range(0..=params.value_max);
                values.insert((EntityId(e), p), v);
            }
        }
        instances.push(
            Instance::from_parts(t, allowed, values).expect("generated pairs are allowed"),
        );
    }
    Ok(Horizon::new(
        default_names("p", n),
        default_names("e", m),
        params.delta,
        instances,
    )
    .expect("generated horizon is well-formed"))
}

/// Adversarial family defeating strict online play: every entity's allowed
/// set alternates between two disjoint singletons each step, so no plan can
/// hold an entity in place and every stability potential is zero.
pub fn gen_adversarial_flipflop(
    players: u32,
    entities: u32,
    tau: TimeStep,
    delta: Value,
) -> Result<Horizon, GenError> {
    if players < 2 {
        return Err(GenError::TooFewPlayers(players));
    }
    for (field, v) in [("entities", entities), ("tau", tau)] {
        if v == 0 {
            return Err(GenError::ZeroSize { field });
        }
    }
    let mut instances = Vec::with_capacity(tau as usize);
    for t in 1..=tau {
        let mut allowed = BTreeMap::new();
        let mut values = BTreeMap::new();
        for e in 0..entities {
            let home = e % players;
            let away = (e + 1) % players;
            let p = PlayerId(if t % 2 == 1 { home } else { away });
            allowed.insert(EntityId(e), BTreeSet::from([p]));
            values.insert((EntityId(e), p), 1);
        }
        instances.push(Instance::from_parts(t, allowed, values).expect("singleton lists"));
    }
    Ok(Horizon::new(
        default_names("p", players),
        default_names("e", entities),
        delta,
        instances,
    )
    .expect("generated horizon is well-formed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Branch, EngineConfig, run};
    use crate::ratio::Rho;
    use crate::solvers::{ExactSolver, Solver};

    fn params(seed: u64) -> GeneratorParams {
        GeneratorParams {
            players: 3,
            entities: 4,
            tau: 5,
            lookahead: 1,
            delta: 2,
            value_max: 9,
            availability_density: 0.6,
            churn: 0.3,
            seed,
        }
    }

    #[test]
    fn same_seed_reproduces_the_horizon() {
        let a = gen_random(&params(99)).unwrap();
        let b = gen_random(&params(99)).unwrap();
        assert_eq!(a, b);
        let c = gen_random(&params(100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_density_empties_every_list() {
        let mut p = params(1);
        p.availability_density = 0.0;
        let h = gen_random(&p).unwrap();
        for inst in h.instances() {
            assert!(inst.is_empty());
        }
    }

    #[test]
    fn full_density_without_churn_allows_everything_everywhere() {
        let mut p = params(2);
        p.availability_density = 1.0;
        p.churn = 0.0;
        let h = gen_random(&p).unwrap();
        for inst in h.instances() {
            for e in h.entity_ids() {
                for q in h.player_ids() {
                    assert!(inst.is_allowed(e, q));
                }
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = params(3);
        p.tau = 0;
        assert!(matches!(gen_random(&p), Err(GenError::ZeroSize { .. })));
        let mut p = params(3);
        p.churn = 1.5;
        assert!(matches!(gen_random(&p), Err(GenError::BadProbability { .. })));
    }

    #[test]
    fn flipflop_alternates_disjoint_singletons() {
        let h = gen_adversarial_flipflop(3, 2, 4, 7).unwrap();
        for e in h.entity_ids() {
            let odd: Vec<PlayerId> = h.instance(1).allowed_players(e).collect();
            let even: Vec<PlayerId> = h.instance(2).allowed_players(e).collect();
            assert_eq!(odd.len(), 1);
            assert_eq!(even.len(), 1);
            assert_ne!(odd[0], even[0]);
            assert_eq!(h.instance(3).allowed_players(e).collect::<Vec<_>>(), odd);
        }
        assert!(gen_adversarial_flipflop(1, 2, 4, 7).is_err());
    }

    #[test]
    fn flipflop_runs_take_the_solver_branch_throughout() {
        let h = gen_adversarial_flipflop(2, 2, 6, 10).unwrap();
        let cfg = EngineConfig::new(2, 10, Rho::ONE).unwrap();
        let solver = ExactSolver::default();
        let trace = run(&h, &solver, &cfg).unwrap();
        assert_eq!(trace.lambda_interval_total, 0);
        for p in &trace.periods {
            assert_eq!(p.chosen, Branch::Approx);
            assert_eq!(p.stable_reward, 0);
            assert_eq!(p.left_reward, 0);
            assert_eq!(p.right_reward, 0);
        }
        // Every step's committed allocation equals the per-step solver output.
        for t in 1..=h.tau() {
            let b = solver.solve(h.instance(t), h.player_count()).unwrap();
            assert_eq!(trace.allocations[(t - 1) as usize], b);
        }
        let nu_b: Value = (1..=h.tau())
            .map(|t| {
                let b = solver.solve(h.instance(t), h.player_count()).unwrap();
                crate::model::nu_step(&b, h.instance(t), h.player_count()).unwrap()
            })
            .sum();
        assert_eq!(trace.total_pairwise(), nu_b);
    }

    #[test]
    fn flipflop_single_entity_plan_is_all_unit_intervals() {
        let h = gen_adversarial_flipflop(2, 1, 4, 3).unwrap();
        let cfg = EngineConfig::new(1, 3, Rho::ONE).unwrap();
        let trace = run(&h, &ExactSolver::default(), &cfg).unwrap();
        let plan = &trace.final_plans()[0];
        assert_eq!(plan.intervals().len(), 4);
        for iv in plan.intervals() {
            assert_eq!(iv.start, iv.end);
        }
    }
}
