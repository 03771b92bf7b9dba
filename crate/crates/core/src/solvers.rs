//! Pluggable single-shot maxmin solvers.
//!
//! The engine only needs the [`Solver`] contract: produce a valid allocation
//! for one instance and declare the approximation factor it guarantees. Two
//! implementations ship here: an exact branch-and-bound for desk-scale
//! instances and an unguaranteed greedy heuristic for everything larger.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{AllocationMap, EntityId, Instance, PlayerId, Value};
use crate::ratio::Rho;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error(
        "instance too large for the exact solver ({entities} entities > {entity_cap} or \
         {players} players > {player_cap}); use the greedy solver instead"
    )]
    TooLarge {
        entities: usize,
        entity_cap: usize,
        players: usize,
        player_cap: usize,
    },
    #[error("unknown solver {0:?}; available: exact, greedy")]
    UnknownSolver(String),
}

/// A single-shot maxmin solver with a declared approximation factor.
pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;

    /// The factor `rho` this solver guarantees, or `None` for heuristics
    /// without a guarantee (the caller must then assume one).
    fn declared_rho(&self) -> Option<Rho>;

    /// Produces an allocation for `inst` that respects the restriction
    /// lists. `player_count` is the size of the player population.
    fn solve(&self, inst: &Instance, player_count: usize) -> Result<AllocationMap, SolverError>;
}

/// Looks a solver up by its CLI name.
pub fn solver_by_name(name: &str) -> Result<Box<dyn Solver>, SolverError> {
    match name {
        "exact" => Ok(Box::new(ExactSolver::default())),
        "greedy" => Ok(Box::new(GreedySolver)),
        other => Err(SolverError::UnknownSolver(other.to_string())),
    }
}

/// Exact maxmin via branch and bound over entity → player choices.
///
/// Entities are branched in decreasing order of their maximum value, and a
/// node is pruned when no completion can lift the minimum above the
/// incumbent. Capped because the problem is NP-hard.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolver {
    pub entity_cap: usize,
    pub player_cap: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver {
            entity_cap: 12,
            player_cap: 6,
        }
    }
}

impl Solver for ExactSolver {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn declared_rho(&self) -> Option<Rho> {
        Some(Rho::ONE)
    }

    fn solve(&self, inst: &Instance, player_count: usize) -> Result<AllocationMap, SolverError> {
        let entities: Vec<EntityId> = inst.entities_with_options().collect();
        if entities.len() > self.entity_cap || player_count > self.player_cap {
            return Err(SolverError::TooLarge {
                entities: entities.len(),
                entity_cap: self.entity_cap,
                players: player_count,
                player_cap: self.player_cap,
            });
        }
        Ok(branch_and_bound(inst, player_count, entities))
    }
}

fn branch_and_bound(
    inst: &Instance,
    player_count: usize,
    mut entities: Vec<EntityId>,
) -> AllocationMap {
    // Assigning an entity never lowers any player's total, so an optimal
    // allocation assigns every entity that has options. Branch high-value
    // entities first.
    entities.sort_by_key(|&e| {
        let max = inst
            .allowed_players(e)
            .map(|p| inst.value(e, p))
            .max()
            .unwrap_or(0);
        (std::cmp::Reverse(max), e)
    });

    // Per-entity player choices, best value first for a good first incumbent.
    let choices: Vec<Vec<PlayerId>> = entities
        .iter()
        .map(|&e| {
            let mut ps: Vec<PlayerId> = inst.allowed_players(e).collect();
            ps.sort_by_key(|&p| (std::cmp::Reverse(inst.value(e, p)), p));
            ps
        })
        .collect();

    // suffix_potential[k][p]: total value player p could still gain from
    // entities[k..]. Bounds every player's final total from above.
    let mut suffix_potential = vec![vec![0u64; player_count]; entities.len() + 1];
    for k in (0..entities.len()).rev() {
        let e = entities[k];
        let (head, tail) = suffix_potential.split_at_mut(k + 1);
        for (p, slot) in head[k].iter_mut().enumerate() {
            *slot = tail[0][p] + inst.value(e, PlayerId(p as u32));
        }
    }
    // suffix_mass[k]: optimistic total mass of entities[k..]; the final
    // minimum cannot exceed (assigned mass + optimistic mass) / n.
    let mut suffix_mass = vec![0u64; entities.len() + 1];
    for k in (0..entities.len()).rev() {
        let e = entities[k];
        let max = inst
            .allowed_players(e)
            .map(|p| inst.value(e, p))
            .max()
            .unwrap_or(0);
        suffix_mass[k] = suffix_mass[k + 1] + max;
    }

    struct Search<'a> {
        inst: &'a Instance,
        entities: &'a [EntityId],
        choices: &'a [Vec<PlayerId>],
        suffix_potential: &'a [Vec<u64>],
        suffix_mass: &'a [u64],
        loads: Vec<u64>,
        picks: Vec<PlayerId>,
        best_nu: Option<Value>,
        best_picks: Vec<PlayerId>,
    }

    impl Search<'_> {
        fn upper_bound(&self, k: usize) -> u64 {
            let per_player = (0..self.loads.len())
                .map(|p| self.loads[p] + self.suffix_potential[k][p])
                .min()
                .unwrap_or(0);
            let total: u64 = self.loads.iter().sum::<u64>() + self.suffix_mass[k];
            per_player.min(total / self.loads.len() as u64)
        }

        fn dfs(&mut self, k: usize) {
            if k == self.entities.len() {
                let nu = self.loads.iter().copied().min().unwrap_or(0);
                if self.best_nu.is_none_or(|b| nu > b) {
                    self.best_nu = Some(nu);
                    self.best_picks = self.picks.clone();
                }
                return;
            }
            if let Some(b) = self.best_nu {
                if self.upper_bound(k) <= b {
                    return;
                }
            }
            let e = self.entities[k];
            for &p in &self.choices[k] {
                let v = self.inst.value(e, p);
                self.loads[p.0 as usize] += v;
                self.picks.push(p);
                self.dfs(k + 1);
                self.picks.pop();
                self.loads[p.0 as usize] -= v;
            }
        }
    }

    let mut search = Search {
        inst,
        entities: &entities,
        choices: &choices,
        suffix_potential: &suffix_potential,
        suffix_mass: &suffix_mass,
        loads: vec![0; player_count],
        picks: Vec::new(),
        best_nu: None,
        best_picks: Vec::new(),
    };
    search.dfs(0);

    let mut assign = BTreeMap::new();
    for (k, &p) in search.best_picks.iter().enumerate() {
        assign.insert(entities[k], p);
    }
    AllocationMap::from_assignments(inst.t(), assign)
}

/// Greedy heuristic: repeatedly give the currently poorest player its best
/// remaining allowed entity. No approximation guarantee is declared; engine
/// use requires an explicitly assumed factor.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedySolver;

impl Solver for GreedySolver {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn declared_rho(&self) -> Option<Rho> {
        None
    }

    fn solve(&self, inst: &Instance, player_count: usize) -> Result<AllocationMap, SolverError> {
        let mut remaining: Vec<EntityId> = inst.entities_with_options().collect();
        let mut loads = vec![0u64; player_count];
        let mut assign = BTreeMap::new();
        loop {
            // Best remaining entity per player; among the poorest players
            // able to take something, prefer the one with the better pick.
            let mut pick: Option<(u64, std::cmp::Reverse<Value>, PlayerId, EntityId)> = None;
            for p in 0..player_count {
                let p = PlayerId(p as u32);
                let best = remaining
                    .iter()
                    .filter(|&&e| inst.is_allowed(e, p))
                    .map(|&e| (std::cmp::Reverse(inst.value(e, p)), e))
                    .min();
                if let Some((std::cmp::Reverse(v), e)) = best {
                    let key = (loads[p.0 as usize], std::cmp::Reverse(v), p, e);
                    if pick.is_none_or(|cur| key < cur) {
                        pick = Some(key);
                    }
                }
            }
            let Some((_, std::cmp::Reverse(v), p, e)) = pick else {
                break;
            };
            loads[p.0 as usize] += v;
            assign.insert(e, p);
            remaining.retain(|&x| x != e);
        }
        Ok(AllocationMap::from_assignments(inst.t(), assign))
    }
}

/// Exhaustively enumerates every allocation (including leaving entities
/// unassigned) and returns the best maxmin value. Test oracle for the exact
/// solver; cost is `(n+1)^m`.
pub fn exhaustive_best_nu(inst: &Instance, player_count: usize) -> Value {
    let entities: Vec<EntityId> = inst.entities_with_options().collect();
    fn rec(
        inst: &Instance,
        entities: &[EntityId],
        k: usize,
        loads: &mut Vec<u64>,
        best: &mut Value,
    ) {
        if k == entities.len() {
            let nu = loads.iter().copied().min().unwrap_or(0);
            if nu > *best {
                *best = nu;
            }
            return;
        }
        let e = entities[k];
        rec(inst, entities, k + 1, loads, best);
        let ps: Vec<PlayerId> = inst.allowed_players(e).collect();
        for p in ps {
            let v = inst.value(e, p);
            loads[p.0 as usize] += v;
            rec(inst, entities, k + 1, loads, best);
            loads[p.0 as usize] -= v;
        }
    }
    let mut best = 0;
    let mut loads = vec![0u64; player_count];
    rec(inst, &entities, 0, &mut loads, &mut best);
    best
}
