//! Core domain types for multistage allocation instances, plus the two
//! objective evaluators: per-step maxmin value and stability value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Non-negative value of an entity to a player. Integral so that every
/// comparison made by the engine is exact.
pub type Value = u64;

/// 1-based time step index.
pub type TimeStep = u32;

/// An indivisible item assigned to at most one player per time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

/// A recipient whose received total defines the maxmin objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0 + 1)
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0 + 1)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("assigning {entity} to {player} at step {t} violates the restriction list")]
    RestrictionViolation {
        t: TimeStep,
        entity: EntityId,
        player: PlayerId,
    },
    #[error("value on ({entity}, {player}) at step {t} but {player} is not in the restriction list")]
    ValueOnDisallowedPair {
        t: TimeStep,
        entity: EntityId,
        player: PlayerId,
    },
    #[error("time range [{a}, {b}] is outside the horizon [1, {tau}]")]
    RangeOutOfBounds { a: TimeStep, b: TimeStep, tau: TimeStep },
    #[error("allocation at position {index} has t={got}, expected t={expected}")]
    MisnumberedStep {
        index: usize,
        got: TimeStep,
        expected: TimeStep,
    },
    #[error("horizon must have at least one player and one entity")]
    EmptyPopulation,
    #[error("id {id} out of range at step {t} ({kind} count is {count})")]
    IdOutOfRange {
        t: TimeStep,
        kind: &'static str,
        id: u32,
        count: usize,
    },
    #[error("intervals [{a_start}, {a_end}] and [{b_start}, {b_end}] for {entity} overlap")]
    OverlappingIntervals {
        entity: EntityId,
        a_start: TimeStep,
        a_end: TimeStep,
        b_start: TimeStep,
        b_end: TimeStep,
    },
    #[error("interval [{start}, {end}] is empty")]
    EmptyInterval { start: TimeStep, end: TimeStep },
}

/// One time step's input: restriction lists and values.
///
/// A value may only be recorded for an allowed (entity, player) pair; absent
/// pairs evaluate to zero. Zero-valued entries are normalized away so that
/// equal instances compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    t: TimeStep,
    allowed: BTreeMap<EntityId, BTreeSet<PlayerId>>,
    values: BTreeMap<(EntityId, PlayerId), Value>,
}

impl Instance {
    /// An instance with empty restriction lists for every entity.
    pub fn empty(t: TimeStep) -> Self {
        Instance {
            t,
            allowed: BTreeMap::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn from_parts(
        t: TimeStep,
        allowed: BTreeMap<EntityId, BTreeSet<PlayerId>>,
        values: BTreeMap<(EntityId, PlayerId), Value>,
    ) -> Result<Self, ModelError> {
        let mut allowed = allowed;
        allowed.retain(|_, ps| !ps.is_empty());
        let mut kept = BTreeMap::new();
        for (&(e, p), &v) in &values {
            let ok = allowed.get(&e).is_some_and(|ps| ps.contains(&p));
            if !ok {
                return Err(ModelError::ValueOnDisallowedPair {
                    t,
                    entity: e,
                    player: p,
                });
            }
            if v > 0 {
                kept.insert((e, p), v);
            }
        }
        Ok(Instance {
            t,
            allowed,
            values: kept,
        })
    }

    pub fn t(&self) -> TimeStep {
        self.t
    }

    pub fn is_allowed(&self, e: EntityId, p: PlayerId) -> bool {
        self.allowed.get(&e).is_some_and(|ps| ps.contains(&p))
    }

    /// Value of `e` to `p`; zero for absent or disallowed pairs.
    pub fn value(&self, e: EntityId, p: PlayerId) -> Value {
        self.values.get(&(e, p)).copied().unwrap_or(0)
    }

    pub fn allowed_players(&self, e: EntityId) -> impl Iterator<Item = PlayerId> + '_ {
        self.allowed.get(&e).into_iter().flatten().copied()
    }

    /// Entities with a non-empty restriction list.
    pub fn entities_with_options(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.allowed.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }
}

/// Player and entity populations, the stability reward, and the full input
/// sequence over the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Horizon {
    players: Vec<String>,
    entities: Vec<String>,
    delta: Value,
    instances: Vec<Instance>,
}

impl Horizon {
    pub fn new(
        players: Vec<String>,
        entities: Vec<String>,
        delta: Value,
        instances: Vec<Instance>,
    ) -> Result<Self, ModelError> {
        if players.is_empty() || entities.is_empty() {
            return Err(ModelError::EmptyPopulation);
        }
        for (k, inst) in instances.iter().enumerate() {
            let expected = (k + 1) as TimeStep;
            if inst.t != expected {
                return Err(ModelError::MisnumberedStep {
                    index: k,
                    got: inst.t,
                    expected,
                });
            }
            for (&e, ps) in &inst.allowed {
                if e.0 as usize >= entities.len() {
                    return Err(ModelError::IdOutOfRange {
                        t: inst.t,
                        kind: "entity",
                        id: e.0,
                        count: entities.len(),
                    });
                }
                for &p in ps {
                    if p.0 as usize >= players.len() {
                        return Err(ModelError::IdOutOfRange {
                            t: inst.t,
                            kind: "player",
                            id: p.0,
                            count: players.len(),
                        });
                    }
                }
            }
        }
        Ok(Horizon {
            players,
            entities,
            delta,
            instances,
        })
    }

    pub fn tau(&self) -> TimeStep {
        self.instances.len() as TimeStep
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn delta(&self) -> Value {
        self.delta
    }

    pub fn player_names(&self) -> &[String] {
        &self.players
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn player_ids(&self) -> impl Iterator<Item = PlayerId> {
        (0..self.players.len() as u32).map(PlayerId)
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    /// The instance at step `t`; panics when `t` is outside `[1, tau]`.
    pub fn instance(&self, t: TimeStep) -> &Instance {
        &self.instances[(t - 1) as usize]
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    /// The instance at `t`, padding with an empty instance beyond the horizon.
    pub fn instance_padded(&self, t: TimeStep) -> Instance {
        if t >= 1 && t <= self.tau() {
            self.instance(t).clone()
        } else {
            Instance::empty(t)
        }
    }
}

/// A partial assignment of entities to players at one time step. An entity
/// absent from the map is unassigned; there is no sentinel player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationMap {
    t: TimeStep,
    assign: BTreeMap<EntityId, PlayerId>,
}

impl AllocationMap {
    pub fn empty(t: TimeStep) -> Self {
        AllocationMap {
            t,
            assign: BTreeMap::new(),
        }
    }

    pub fn from_assignments(
        t: TimeStep,
        assign: BTreeMap<EntityId, PlayerId>,
    ) -> Self {
        AllocationMap { t, assign }
    }

    pub fn t(&self) -> TimeStep {
        self.t
    }

    pub fn player_of(&self, e: EntityId) -> Option<PlayerId> {
        self.assign.get(&e).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, PlayerId)> + '_ {
        self.assign.iter().map(|(&e, &p)| (e, p))
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn insert(&mut self, e: EntityId, p: PlayerId) {
        self.assign.insert(e, p);
    }

    /// Checks that every pair respects the instance's restriction lists.
    pub fn validate(&self, inst: &Instance) -> Result<(), ModelError> {
        debug_assert_eq!(self.t, inst.t());
        for (e, p) in self.iter() {
            if !inst.is_allowed(e, p) {
                return Err(ModelError::RestrictionViolation {
                    t: self.t,
                    entity: e,
                    player: p,
                });
            }
        }
        Ok(())
    }

    /// Drops every pair that violates the restriction lists. The dropped
    /// pairs carry zero value, so the step's maxmin value is unaffected.
    pub fn strip_disallowed(&mut self, inst: &Instance) {
        self.assign.retain(|&e, &mut p| inst.is_allowed(e, p));
    }
}

/// A run of consecutive steps during which one entity is held by one player.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentInterval {
    pub start: TimeStep,
    pub end: TimeStep,
    pub player: PlayerId,
}

impl AssignmentInterval {
    pub fn contains(&self, t: TimeStep) -> bool {
        self.start <= t && t <= self.end
    }

    /// Whether the unit step `[t, t+1]` lies inside this interval.
    pub fn covers_unit(&self, t: TimeStep) -> bool {
        self.start <= t && t < self.end
    }
}

/// Disjoint assignment intervals for one entity, sorted by start time.
///
/// Two touching intervals assigning the same player are deliberately kept
/// separate: the junction step between them earns no interval-form stability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentIntervalSet {
    entity: EntityId,
    intervals: Vec<AssignmentInterval>,
}

impl AssignmentIntervalSet {
    pub fn new(entity: EntityId) -> Self {
        AssignmentIntervalSet {
            entity,
            intervals: Vec::new(),
        }
    }

    pub fn entity(&self) -> EntityId {
        self.entity
    }

    pub fn intervals(&self) -> &[AssignmentInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn push(
        &mut self,
        start: TimeStep,
        end: TimeStep,
        player: PlayerId,
    ) -> Result<(), ModelError> {
        if start > end {
            return Err(ModelError::EmptyInterval { start, end });
        }
        let iv = AssignmentInterval { start, end, player };
        let pos = self.intervals.partition_point(|x| x.start < start);
        let overlaps_prev = pos > 0 && self.intervals[pos - 1].end >= start;
        let overlaps_next = pos < self.intervals.len() && self.intervals[pos].start <= end;
        if overlaps_prev || overlaps_next {
            let other = if overlaps_prev {
                self.intervals[pos - 1]
            } else {
                self.intervals[pos]
            };
            return Err(ModelError::OverlappingIntervals {
                entity: self.entity,
                a_start: other.start,
                a_end: other.end,
                b_start: start,
                b_end: end,
            });
        }
        self.intervals.insert(pos, iv);
        Ok(())
    }

    /// The interval containing `t`, if any.
    pub fn interval_at(&self, t: TimeStep) -> Option<&AssignmentInterval> {
        let pos = self.intervals.partition_point(|x| x.start <= t);
        if pos == 0 {
            return None;
        }
        let iv = &self.intervals[pos - 1];
        iv.contains(t).then_some(iv)
    }

    pub fn player_at(&self, t: TimeStep) -> Option<PlayerId> {
        self.interval_at(t).map(|iv| iv.player)
    }

    /// Removes every interval starting at or after `t`. Intervals straddling
    /// `t` are left untouched.
    pub fn truncate_from(&mut self, t: TimeStep) {
        self.intervals.retain(|iv| iv.start < t);
    }

    /// Stability value over `[a, b]`: `delta` per unit step `[t, t+1]`
    /// (`a <= t <= b-1`) contained in a single interval.
    ///
    /// Disjoint intervals sorted by start are also sorted by end, so the
    /// ones touching `[a, b]` form a contiguous run.
    pub fn lambda(&self, a: TimeStep, b: TimeStep, delta: Value) -> Value {
        assert!(a <= b, "lambda range must satisfy a <= b");
        let first = self.intervals.partition_point(|iv| iv.end < a);
        let mut units: u64 = 0;
        for iv in &self.intervals[first..] {
            if iv.start > b {
                break;
            }
            let lo = iv.start.max(a);
            let hi = iv.end.min(b);
            if hi > lo {
                units += (hi - lo) as u64;
            }
        }
        delta * units
    }
}

/// Maxmin value of one step: the minimum over all players of the total value
/// of entities assigned to that player. A player receiving nothing counts 0.
pub fn nu_step(
    alloc: &AllocationMap,
    inst: &Instance,
    player_count: usize,
) -> Result<Value, ModelError> {
    assert!(player_count > 0, "player population must be non-empty");
    alloc.validate(inst)?;
    let mut sums: BTreeMap<PlayerId, Value> = BTreeMap::new();
    for (e, p) in alloc.iter() {
        *sums.entry(p).or_insert(0) += inst.value(e, p);
    }
    if sums.len() < player_count {
        return Ok(0);
    }
    Ok(sums.values().copied().min().unwrap_or(0))
}

/// Sum of per-step maxmin values over `[a, b]`.
pub fn nu_sum(
    allocs: &[AllocationMap],
    horizon: &Horizon,
    a: TimeStep,
    b: TimeStep,
) -> Result<Value, ModelError> {
    if a < 1 || b > horizon.tau() || a > b {
        return Err(ModelError::RangeOutOfBounds {
            a,
            b,
            tau: horizon.tau(),
        });
    }
    let n = horizon.player_count();
    let mut total = 0;
    for t in a..=b {
        total += nu_step(&allocs[(t - 1) as usize], horizon.instance(t), n)?;
    }
    Ok(total)
}

/// Interval-form stability value of one entity's interval set over `[a, b]`.
pub fn lambda_intervals(
    iset: &AssignmentIntervalSet,
    a: TimeStep,
    b: TimeStep,
    delta: Value,
) -> Value {
    iset.lambda(a, b, delta)
}

/// Pairwise stability value over `[a, b]`: `delta` for every entity kept at
/// the same player across consecutive steps. This is the reported objective's
/// stability term and never undercounts the interval form.
pub fn lambda_pairwise(
    allocs: &[AllocationMap],
    delta: Value,
    a: TimeStep,
    b: TimeStep,
) -> Value {
    assert!(a >= 1 && a <= b, "pairwise range must satisfy 1 <= a <= b");
    let mut matches: u64 = 0;
    for t in a..b {
        let cur = &allocs[(t - 1) as usize];
        let next = &allocs[t as usize];
        for (e, p) in cur.iter() {
            if next.player_of(e) == Some(p) {
                matches += 1;
            }
        }
    }
    delta * matches
}

/// Objective components of a full allocation sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Objective {
    pub nu: Value,
    pub lambda: Value,
    pub total: Value,
}

/// Total objective over the whole horizon: maxmin sum plus the pairwise
/// stability term.
pub fn total_objective(
    allocs: &[AllocationMap],
    horizon: &Horizon,
) -> Result<Objective, ModelError> {
    let tau = horizon.tau();
    assert_eq!(allocs.len() as TimeStep, tau, "allocations must cover [1, tau]");
    let nu = nu_sum(allocs, horizon, 1, tau)?;
    let lambda = if tau >= 1 {
        lambda_pairwise(allocs, horizon.delta(), 1, tau)
    } else {
        0
    };
    Ok(Objective {
        nu,
        lambda,
        total: nu + lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(
        t: TimeStep,
        allowed: &[(u32, &[u32])],
        values: &[(u32, u32, Value)],
    ) -> Instance {
        let allowed = allowed
            .iter()
            .map(|&(e, ps)| (EntityId(e), ps.iter().map(|&p| PlayerId(p)).collect()))
            .collect();
        let values = values
            .iter()
            .map(|&(e, p, v)| ((EntityId(e), PlayerId(p)), v))
            .collect();
        Instance::from_parts(t, allowed, values).unwrap()
    }

    fn alloc(t: TimeStep, pairs: &[(u32, u32)]) -> AllocationMap {
        AllocationMap::from_assignments(
            t,
            pairs
                .iter()
                .map(|&(e, p)| (EntityId(e), PlayerId(p)))
                .collect(),
        )
    }

    #[test]
    fn nu_step_takes_min_of_player_sums() {
        let i = inst(
            1,
            &[(0, &[0]), (1, &[1])],
            &[(0, 0, 3), (1, 1, 5)],
        );
        let a = alloc(1, &[(0, 0), (1, 1)]);
        assert_eq!(nu_step(&a, &i, 2).unwrap(), 3);
    }

    #[test]
    fn nu_step_zero_when_a_player_receives_nothing() {
        let i = inst(1, &[(0, &[0])], &[(0, 0, 3)]);
        let a = alloc(1, &[(0, 0)]);
        assert_eq!(nu_step(&a, &i, 2).unwrap(), 0);
    }

    #[test]
    fn nu_step_matches_independent_resummation() {
        // n=3, m=4 with fixed values; recompute the player sums by hand.
        let i = inst(
            1,
            &[(0, &[0, 1]), (1, &[1, 2]), (2, &[0, 2]), (3, &[0, 1, 2])],
            &[
                (0, 0, 4),
                (0, 1, 7),
                (1, 1, 2),
                (1, 2, 9),
                (2, 0, 5),
                (2, 2, 1),
                (3, 0, 3),
                (3, 1, 6),
                (3, 2, 8),
            ],
        );
        let a = alloc(1, &[(0, 1), (1, 2), (2, 0), (3, 2)]);
        let mut sums = [0u64; 3];
        for (e, p) in a.iter() {
            sums[p.0 as usize] += i.value(e, p);
        }
        assert_eq!(nu_step(&a, &i, 3).unwrap(), *sums.iter().min().unwrap());
        assert_eq!(nu_step(&a, &i, 3).unwrap(), 5);
    }

    #[test]
    fn nu_step_rejects_restriction_violation() {
        let i = inst(2, &[(0, &[0])], &[]);
        let a = alloc(2, &[(0, 1)]);
        let err = nu_step(&a, &i, 2).unwrap_err();
        assert_eq!(
            err,
            ModelError::RestrictionViolation {
                t: 2,
                entity: EntityId(0),
                player: PlayerId(1),
            }
        );
    }

    #[test]
    fn nu_sum_single_step_equals_nu_step() {
        let i = inst(1, &[(0, &[0]), (1, &[1])], &[(0, 0, 3), (1, 1, 5)]);
        let h = Horizon::new(
            vec!["p1".into(), "p2".into()],
            vec!["e1".into(), "e2".into()],
            0,
            vec![i.clone()],
        )
        .unwrap();
        let a = vec![alloc(1, &[(0, 0), (1, 1)])];
        assert_eq!(
            nu_sum(&a, &h, 1, 1).unwrap(),
            nu_step(&a[0], &i, 2).unwrap()
        );
    }

    #[test]
    fn nu_sum_all_empty_is_zero() {
        let h = Horizon::new(
            vec!["p1".into()],
            vec!["e1".into()],
            0,
            (1..=3).map(Instance::empty).collect(),
        )
        .unwrap();
        let a: Vec<_> = (1..=3).map(AllocationMap::empty).collect();
        assert_eq!(nu_sum(&a, &h, 1, 3).unwrap(), 0);
    }

    #[test]
    fn nu_sum_adds_per_step_values() {
        // Per-step maxmin values 3, 0, 2 must sum to 5.
        let insts = vec![
            inst(1, &[(0, &[0]), (1, &[1])], &[(0, 0, 3), (1, 1, 4)]),
            inst(2, &[(0, &[0])], &[(0, 0, 9)]),
            inst(3, &[(0, &[0]), (1, &[1])], &[(0, 0, 2), (1, 1, 6)]),
        ];
        let h = Horizon::new(
            vec!["p1".into(), "p2".into()],
            vec!["e1".into(), "e2".into()],
            0,
            insts,
        )
        .unwrap();
        let allocs = vec![
            alloc(1, &[(0, 0), (1, 1)]),
            alloc(2, &[(0, 0)]),
            alloc(3, &[(0, 0), (1, 1)]),
        ];
        let per_step: Vec<Value> = (1..=3)
            .map(|t| nu_step(&allocs[(t - 1) as usize], h.instance(t), 2).unwrap())
            .collect();
        assert_eq!(per_step, vec![3, 0, 2]);
        assert_eq!(nu_sum(&allocs, &h, 1, 3).unwrap(), 5);
    }

    #[test]
    fn nu_sum_rejects_out_of_range() {
        let h = Horizon::new(
            vec!["p1".into()],
            vec!["e1".into()],
            0,
            vec![Instance::empty(1)],
        )
        .unwrap();
        let a = vec![AllocationMap::empty(1)];
        assert!(matches!(
            nu_sum(&a, &h, 1, 2),
            Err(ModelError::RangeOutOfBounds { .. })
        ));
    }

    #[test]
    fn lambda_counts_unit_steps_inside_one_interval() {
        let mut s = AssignmentIntervalSet::new(EntityId(0));
        s.push(1, 3, PlayerId(0)).unwrap();
        assert_eq!(s.lambda(1, 3, 1), 2);
    }

    #[test]
    fn lambda_earns_nothing_at_a_same_player_junction() {
        let mut s = AssignmentIntervalSet::new(EntityId(0));
        s.push(1, 2, PlayerId(0)).unwrap();
        s.push(3, 4, PlayerId(0)).unwrap();
        assert_eq!(s.lambda(1, 4, 1), 2);
    }

    #[test]
    fn lambda_of_a_point_range_is_zero() {
        let mut s = AssignmentIntervalSet::new(EntityId(0));
        s.push(1, 5, PlayerId(0)).unwrap();
        assert_eq!(s.lambda(3, 3, 7), 0);
    }

    #[test]
    fn lambda_is_additive_over_range_splits() {
        let mut s = AssignmentIntervalSet::new(EntityId(0));
        s.push(1, 3, PlayerId(0)).unwrap();
        s.push(5, 9, PlayerId(1)).unwrap();
        for c in 1..=9 {
            assert_eq!(
                s.lambda(1, 9, 2),
                s.lambda(1, c, 2) + s.lambda(c, 9, 2),
                "split at {c}"
            );
        }
    }

    #[test]
    fn interval_set_rejects_overlap() {
        let mut s = AssignmentIntervalSet::new(EntityId(0));
        s.push(2, 4, PlayerId(0)).unwrap();
        assert!(s.push(4, 6, PlayerId(1)).is_err());
        assert!(s.push(1, 2, PlayerId(1)).is_err());
        s.push(5, 6, PlayerId(1)).unwrap();
        assert_eq!(s.intervals().len(), 2);
    }

    #[test]
    fn pairwise_counts_matched_consecutive_assignments() {
        let a = vec![alloc(1, &[(0, 0), (1, 1)]), alloc(2, &[(0, 0), (1, 1)])];
        assert_eq!(lambda_pairwise(&a, 2, 1, 2), 4);
    }

    #[test]
    fn pairwise_zero_when_reassigned_every_step() {
        let a = vec![
            alloc(1, &[(0, 0)]),
            alloc(2, &[(0, 1)]),
            alloc(3, &[(0, 0)]),
        ];
        assert_eq!(lambda_pairwise(&a, 5, 1, 3), 0);
    }

    #[test]
    fn pairwise_dominates_interval_form_on_realized_sequences() {
        // Touching same-player intervals earn pairwise reward but no
        // interval reward across the junction.
        let mut s = AssignmentIntervalSet::new(EntityId(0));
        s.push(1, 2, PlayerId(0)).unwrap();
        s.push(3, 4, PlayerId(0)).unwrap();
        let allocs: Vec<AllocationMap> = (1..=4)
            .map(|t| {
                let mut a = AllocationMap::empty(t);
                if let Some(p) = s.player_at(t) {
                    a.insert(EntityId(0), p);
                }
                a
            })
            .collect();
        let pw = lambda_pairwise(&allocs, 1, 1, 4);
        let iv = s.lambda(1, 4, 1);
        assert!(pw >= iv);
        assert_eq!(pw, 3);
        assert_eq!(iv, 2);
    }

    #[test]
    fn nu_step_is_monotone_in_added_pairs() {
        let i = inst(
            1,
            &[(0, &[0]), (1, &[1]), (2, &[0, 1])],
            &[(0, 0, 3), (1, 1, 5), (2, 0, 2), (2, 1, 2)],
        );
        let base = alloc(1, &[(0, 0), (1, 1)]);
        let before = nu_step(&base, &i, 2).unwrap();
        let mut grown = base.clone();
        grown.insert(EntityId(2), PlayerId(0));
        assert!(nu_step(&grown, &i, 2).unwrap() >= before);
    }

    #[test]
    fn total_objective_single_step_has_no_stability_term() {
        let i = inst(1, &[(0, &[0])], &[(0, 0, 4)]);
        let h = Horizon::new(vec!["p1".into()], vec!["e1".into()], 9, vec![i]).unwrap();
        let a = vec![alloc(1, &[(0, 0)])];
        let obj = total_objective(&a, &h).unwrap();
        assert_eq!(obj.nu, 4);
        assert_eq!(obj.lambda, 0);
        assert_eq!(obj.total, 4);
    }

    #[test]
    fn total_objective_zero_values_zero_delta() {
        let insts = vec![
            inst(1, &[(0, &[0])], &[]),
            inst(2, &[(0, &[0])], &[]),
        ];
        let h = Horizon::new(vec!["p1".into()], vec!["e1".into()], 0, insts).unwrap();
        let a = vec![alloc(1, &[(0, 0)]), alloc(2, &[(0, 0)])];
        let obj = total_objective(&a, &h).unwrap();
        assert_eq!(obj.total, 0);
    }

    #[test]
    fn total_objective_with_zero_delta_equals_nu_sum() {
        let insts = vec![
            inst(1, &[(0, &[0]), (1, &[0, 1])], &[(0, 0, 1), (1, 1, 2)]),
            inst(2, &[(0, &[0]), (1, &[1])], &[(0, 0, 3), (1, 1, 1)]),
        ];
        let h = Horizon::new(
            vec!["p1".into(), "p2".into()],
            vec!["e1".into(), "e2".into()],
            0,
            insts,
        )
        .unwrap();
        let a = vec![alloc(1, &[(0, 0), (1, 1)]), alloc(2, &[(0, 0), (1, 1)])];
        let obj = total_objective(&a, &h).unwrap();
        assert_eq!(obj.total, nu_sum(&a, &h, 1, 2).unwrap());
    }

    #[test]
    fn tiny_horizon_matches_exhaustive_recomputation() {
        // 2 players, 2 entities, 3 steps: recompute nu and pairwise lambda
        // from first principles and compare against the evaluators.
        let insts = vec![
            inst(1, &[(0, &[0, 1]), (1, &[0, 1])], &[(0, 0, 2), (0, 1, 1), (1, 0, 1), (1, 1, 3)]),
            inst(2, &[(0, &[0, 1]), (1, &[0])], &[(0, 0, 1), (0, 1, 4), (1, 0, 2)]),
            inst(3, &[(0, &[1]), (1, &[0, 1])], &[(0, 1, 2), (1, 0, 1), (1, 1, 1)]),
        ];
        let h = Horizon::new(
            vec!["p1".into(), "p2".into()],
            vec!["e1".into(), "e2".into()],
            2,
            insts,
        )
        .unwrap();
        let allocs = vec![
            alloc(1, &[(0, 0), (1, 1)]),
            alloc(2, &[(0, 1), (1, 0)]),
            alloc(3, &[(0, 1), (1, 0)]),
        ];
        let mut nu = 0u64;
        for t in 1..=3u32 {
            let a = &allocs[(t - 1) as usize];
            let i = h.instance(t);
            let mut sums = [0u64; 2];
            for (e, p) in a.iter() {
                sums[p.0 as usize] += i.value(e, p);
            }
            nu += sums[0].min(sums[1]);
        }
        let mut matches = 0u64;
        for t in 0..2 {
            for (e, p) in allocs[t].iter() {
                if allocs[t + 1].player_of(e) == Some(p) {
                    matches += 1;
                }
            }
        }
        let obj = total_objective(&allocs, &h).unwrap();
        assert_eq!(obj.nu, nu);
        assert_eq!(obj.lambda, 2 * matches);
        assert_eq!(obj.total, nu + 2 * matches);
    }

    #[test]
    fn instance_normalizes_zero_values_and_empty_lists() {
        let a = inst(1, &[(0, &[0])], &[(0, 0, 0)]);
        let b = inst(1, &[(0, &[0])], &[]);
        assert_eq!(a, b);
        assert_eq!(a.value(EntityId(0), PlayerId(0)), 0);
        let mut allowed: BTreeMap<EntityId, BTreeSet<PlayerId>> = BTreeMap::new();
        allowed.insert(EntityId(1), BTreeSet::new());
        let c = Instance::from_parts(1, allowed, BTreeMap::new()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn instance_rejects_value_on_disallowed_pair() {
        let mut values = BTreeMap::new();
        values.insert((EntityId(0), PlayerId(1)), 3u64);
        let mut allowed: BTreeMap<EntityId, BTreeSet<PlayerId>> = BTreeMap::new();
        allowed.insert(EntityId(0), [PlayerId(0)].into_iter().collect());
        assert!(matches!(
            Instance::from_parts(1, allowed, values),
            Err(ModelError::ValueOnDisallowedPair { .. })
        ));
    }

    #[test]
    fn horizon_rejects_misnumbered_instances() {
        let err = Horizon::new(
            vec!["p1".into()],
            vec!["e1".into()],
            0,
            vec![Instance::empty(2)],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::MisnumberedStep { .. }));
    }
}
