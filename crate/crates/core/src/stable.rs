//! Greedy stability planning over a lookahead window.
//!
//! For each entity the planner scans the window left to right and always
//! claims the longest available run starting at the current step, which
//! maximizes the stability value over every prefix of the window. Run
//! lookups go through a stabbing-max index over per-player availability
//! runs; a linear scan is kept alongside as the test oracle.

use crate::model::{
    AssignmentInterval, AssignmentIntervalSet, EntityId, Instance, PlayerId, TimeStep,
};

/// A maximal run of consecutive steps at which one player may take the entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvailabilityRun {
    pub player: PlayerId,
    pub start: TimeStep,
    pub end: TimeStep,
}

/// Static stabbing-max index over the availability runs of one entity within
/// a window. `stab(i)` returns, among runs containing `i`, one with the
/// maximum right endpoint, ties broken toward the smallest player index.
#[derive(Debug, Clone)]
pub struct AvailabilityIndex {
    entity: EntityId,
    window: (TimeStep, TimeStep),
    /// Runs sorted by (start, player).
    runs: Vec<AvailabilityRun>,
    /// `best_prefix[k]`: index into `runs` of the best run among `runs[..=k]`,
    /// where best means largest end, then smallest player.
    best_prefix: Vec<usize>,
}

/// Builds the availability index for `entity` over a contiguous window.
/// `window[j]` must be the instance for step `a + j`.
pub fn build_index(entity: EntityId, window: &[Instance]) -> AvailabilityIndex {
    assert!(!window.is_empty(), "window must be non-empty");
    let a = window[0].t();
    let b = a + (window.len() as TimeStep - 1);
    debug_assert!(
        window.iter().enumerate().all(|(j, i)| i.t() == a + j as TimeStep),
        "window instances must be contiguous"
    );

    let mut runs: Vec<AvailabilityRun> = Vec::new();
    let mut open: Vec<(PlayerId, TimeStep)> = Vec::new();
    for (j, inst) in window.iter().enumerate() {
        let t = a + j as TimeStep;
        // Close runs whose player is no longer available.
        open.retain(|&(p, start)| {
            if inst.is_allowed(entity, p) {
                true
            } else {
                runs.push(AvailabilityRun {
                    player: p,
                    start,
                    end: t - 1,
                });
                false
            }
        });
        for p in inst.allowed_players(entity) {
            if !open.iter().any(|&(q, _)| q == p) {
                open.push((p, t));
            }
        }
    }
    for (p, start) in open {
        runs.push(AvailabilityRun {
            player: p,
            start,
            end: b,
        });
    }
    runs.sort_by_key(|r| (r.start, r.player));

    let mut best_prefix = Vec::with_capacity(runs.len());
    let mut best = 0usize;
    for (k, run) in runs.iter().enumerate() {
        if k == 0 || better(run, &runs[best]) {
            best = k;
        }
        best_prefix.push(best);
    }
    AvailabilityIndex {
        entity,
        window: (a, b),
        runs,
        best_prefix,
    }
}

fn better(x: &AvailabilityRun, incumbent: &AvailabilityRun) -> bool {
    (x.end, std::cmp::Reverse(x.player)) > (incumbent.end, std::cmp::Reverse(incumbent.player))
}

impl AvailabilityIndex {
    pub fn entity(&self) -> EntityId {
        self.entity
    }

    pub fn window(&self) -> (TimeStep, TimeStep) {
        self.window
    }

    pub fn runs(&self) -> &[AvailabilityRun] {
        &self.runs
    }

    /// Stabbing-max query in O(log runs): binary search the prefix of runs
    /// starting at or before `i`, then use the prefix best. Any run covering
    /// `i` lies in that prefix, and the prefix best covers `i` whenever any
    /// covering run exists.
    pub fn stab(&self, i: TimeStep) -> Option<AvailabilityRun> {
        let k = self.runs.partition_point(|r| r.start <= i);
        if k == 0 {
            return None;
        }
        let best = self.runs[self.best_prefix[k - 1]];
        (best.end >= i).then_some(best)
    }

    /// Linear-scan reference for `stab`, kept as the test oracle.
    pub fn stab_linear(&self, i: TimeStep) -> Option<AvailabilityRun> {
        self.runs
            .iter()
            .filter(|r| r.start <= i && i <= r.end)
            .copied()
            .reduce(|acc, r| if better(&r, &acc) { r } else { acc })
    }
}

/// Runs the greedy scan for one entity over `[a, b]` and returns the planned
/// assignment intervals. Every prefix of the output has the maximum possible
/// stability value among valid interval sets for the window.
pub fn stable_entity(
    entity: EntityId,
    a: TimeStep,
    b: TimeStep,
    window: &[Instance],
) -> AssignmentIntervalSet {
    debug_assert!(a <= b);
    debug_assert_eq!(window[0].t(), a);
    debug_assert_eq!(window[window.len() - 1].t(), b);
    let index = build_index(entity, window);
    let mut out = AssignmentIntervalSet::new(entity);
    let mut i = a;
    while i <= b {
        match index.stab(i) {
            Some(run) => {
                out.push(i, run.end, run.player)
                    .expect("greedy emits disjoint intervals");
                i = run.end + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// Mutable per-entity interval plans accumulated across period starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableState {
    plans: Vec<AssignmentIntervalSet>,
}

impl StableState {
    pub fn new(entity_count: usize) -> Self {
        StableState {
            plans: (0..entity_count as u32)
                .map(|e| AssignmentIntervalSet::new(EntityId(e)))
                .collect(),
        }
    }

    pub fn entity_count(&self) -> usize {
        self.plans.len()
    }

    pub fn plan(&self, e: EntityId) -> &AssignmentIntervalSet {
        &self.plans[e.0 as usize]
    }

    pub fn plans(&self) -> &[AssignmentIntervalSet] {
        &self.plans
    }

    /// The interval that starts strictly before `t` and contains `t`, if any.
    pub fn straddling(&self, e: EntityId, t: TimeStep) -> Option<&AssignmentInterval> {
        self.plan(e)
            .interval_at(t)
            .filter(|iv| iv.start < t)
    }

    /// Stability value of the whole state over `[a, b]`.
    pub fn lambda_range(&self, a: TimeStep, b: TimeStep, delta: crate::model::Value) -> crate::model::Value {
        self.plans.iter().map(|s| s.lambda(a, b, delta)).sum()
    }

    /// Stability value of the single unit step `[t, t+1]`.
    pub fn lambda_unit(&self, t: TimeStep, delta: crate::model::Value) -> crate::model::Value {
        self.lambda_range(t, t + 1, delta)
    }

    /// Candidate period end times visible from a period start `s`: interval
    /// end times within `[s, s+w]`, predecessors of interval start times
    /// within `[s+1, s+w]` (a start at `s` itself induces nothing), and the
    /// default `s + w`. Returns the minimum.
    pub fn candidate_period_end(&self, s: TimeStep, w: u32) -> TimeStep {
        let hi = s + w;
        let mut t = hi;
        for plan in &self.plans {
            let ivs = plan.intervals();
            let first = ivs.partition_point(|iv| iv.end < s);
            for iv in &ivs[first..] {
                if iv.start > hi {
                    break;
                }
                if iv.end >= s && iv.end <= hi {
                    t = t.min(iv.end);
                }
                if iv.start > s && iv.start <= hi {
                    t = t.min(iv.start - 1);
                }
            }
        }
        t
    }
}

/// Refreshes the plans for a period starting at `a` over the lookahead
/// window `[a, a+w]`. Entities whose current interval straddles `a` keep
/// their plan; every other entity is replanned from scratch on the window.
/// `window[j]` must be the instance for step `a + j` (instances beyond the
/// horizon are empty).
pub fn stable_allocate(state: &mut StableState, a: TimeStep, window: &[Instance]) {
    debug_assert_eq!(window[0].t(), a);
    let b = a + (window.len() as TimeStep - 1);
    for e in 0..state.plans.len() as u32 {
        let e = EntityId(e);
        if state.straddling(e, a).is_some() {
            continue;
        }
        let fresh = stable_entity(e, a, b, window);
        let plan = &mut state.plans[e.0 as usize];
        plan.truncate_from(a);
        for iv in fresh.intervals() {
            plan.push(iv.start, iv.end, iv.player)
                .expect("replanned intervals stay right of the frozen ones");
        }
    }
}
