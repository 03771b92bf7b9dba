//! The lookahead allocation engine.
//!
//! Time is consumed in dynamically sized periods. At each period start the
//! engine replans stability greedily over the lookahead window, derives the
//! period end from the planned interval endpoints, solves each step of the
//! period with the plugged single-shot solver, and then commits either the
//! stable plan or the solver plan for the whole period, whichever wins a
//! threshold comparison weighted by `c0`.

use thiserror::Error;

use crate::model::{
    AllocationMap, AssignmentIntervalSet, Horizon, Instance, ModelError, TimeStep, Value,
    lambda_pairwise, nu_step,
};
use crate::ratio::{RatioError, Rho, ThresholdWeight};
use crate::solvers::{Solver, SolverError};
use crate::stable::{StableState, stable_allocate};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error("solver failed at step {t}: {source}")]
    Solver {
        t: TimeStep,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("config delta {config} does not match horizon delta {horizon}")]
    DeltaMismatch { config: Value, horizon: Value },
    #[error("expected instance for step {expected}, got step {got}")]
    FeedOutOfOrder { expected: TimeStep, got: TimeStep },
    #[error("stream is closed; no further instances accepted")]
    FeedAfterClose,
}

/// Why a poll could not return an allocation yet.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PollError {
    #[error("step {t} is not decided yet; feed instances through step {needed} or close the stream")]
    NotReady { t: TimeStep, needed: TimeStep },
    #[error("step {t} is outside the closed stream of {tau} steps")]
    OutOfRange { t: TimeStep, tau: TimeStep },
    #[error("step {t} is invalid; steps are 1-based")]
    ZeroStep { t: TimeStep },
}

/// Engine parameters: lookahead depth, stability reward, and the assumed
/// approximation factor of the plugged solver (from which the threshold
/// weight is derived).
#[derive(Debug, Clone)]
pub struct EngineConfig {
    lookahead: u32,
    delta: Value,
    threshold: ThresholdWeight,
    record_snapshots: bool,
}

impl EngineConfig {
    pub fn new(lookahead: u32, delta: Value, rho: Rho) -> Result<Self, EngineError> {
        let threshold = ThresholdWeight::compute(rho, lookahead)?;
        Ok(EngineConfig {
            lookahead,
            delta,
            threshold,
            record_snapshots: true,
        })
    }

    /// Skips the per-period plan snapshots in the trace. They exist for the
    /// verification oracles and grow quadratically on long horizons.
    pub fn without_snapshots(mut self) -> Self {
        self.record_snapshots = false;
        self
    }

    pub fn lookahead(&self) -> u32 {
        self.lookahead
    }

    pub fn delta(&self) -> Value {
        self.delta
    }

    pub fn rho(&self) -> Rho {
        self.threshold.rho()
    }

    pub fn threshold(&self) -> &ThresholdWeight {
        &self.threshold
    }
}

/// The threshold weight `c0` for a `(rho, w)` pair.
pub fn compute_c0(rho: Rho, lookahead: u32) -> Result<ThresholdWeight, RatioError> {
    ThresholdWeight::compute(rho, lookahead)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Stable,
    Approx,
}

/// One committed period with the inputs of its branch decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodRecord {
    pub start: TimeStep,
    pub end: TimeStep,
    /// Carry-over reward from the previous period (`L`): non-zero only when
    /// the previous period chose the stable branch, this period starts within
    /// its lookahead reach, and a planned interval spans the boundary.
    pub left_reward: Value,
    /// Potential reward into the next period (`R`): non-zero only when the
    /// period ends before the lookahead edge.
    pub right_reward: Value,
    /// Stability value of the plan over the period.
    pub stable_reward: Value,
    /// Maxmin value of the solver allocations over the period.
    pub approx_value: Value,
    pub chosen: Branch,
}

/// Plan state as it stood when a period was decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSnapshot {
    pub period_start: TimeStep,
    pub plans: Vec<AssignmentIntervalSet>,
}

/// Full output of a run: the committed allocations, the periods with their
/// decision inputs, plan snapshots, and the objective components under both
/// stability scorings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub lookahead: u32,
    pub delta: Value,
    pub rho: Rho,
    pub solver_name: String,
    pub solver_declared_rho: Option<Rho>,
    pub tau: TimeStep,
    pub allocations: Vec<AllocationMap>,
    pub periods: Vec<PeriodRecord>,
    /// Plan state at each period's decision, present unless disabled.
    pub snapshots: Vec<PlanSnapshot>,
    /// Plan state at the end of the run.
    pub final_plans: Vec<AssignmentIntervalSet>,
    pub solver_calls: u64,
    pub nu_total: Value,
    pub lambda_interval_total: Value,
    pub lambda_pairwise_total: Value,
}

impl RunTrace {
    /// Objective under interval scoring (what the guarantee is stated for).
    pub fn total_interval(&self) -> Value {
        self.nu_total + self.lambda_interval_total
    }

    /// Objective under pairwise scoring (what the horizon objective pays).
    pub fn total_pairwise(&self) -> Value {
        self.nu_total + self.lambda_pairwise_total
    }

    pub fn final_plans(&self) -> &[AssignmentIntervalSet] {
        &self.final_plans
    }

    pub fn snapshot_at(&self, period_start: TimeStep) -> Option<&PlanSnapshot> {
        self.snapshots.iter().find(|s| s.period_start == period_start)
    }

    /// Period containing step `t`.
    pub fn period_of(&self, t: TimeStep) -> Option<&PeriodRecord> {
        self.periods.iter().find(|p| p.start <= t && t <= p.end)
    }

    /// Structural invariants every run must satisfy: periods tile `[1, tau]`
    /// with lengths at most `w + 1`, exactly one solver call per step, and
    /// each recorded decision consistent with the threshold inequality.
    pub fn check_structure(&self, threshold: &ThresholdWeight) -> Result<(), String> {
        let mut next = 1;
        for p in &self.periods {
            if p.start != next {
                return Err(format!("period starts at {} but {} expected", p.start, next));
            }
            if p.end < p.start {
                return Err(format!("period [{}, {}] is empty", p.start, p.end));
            }
            let len = p.end - p.start + 1;
            if len > self.lookahead + 1 {
                return Err(format!(
                    "period [{}, {}] longer than lookahead + 1",
                    p.start, p.end
                ));
            }
            let margin = p.approx_value as i128
                - p.left_reward as i128
                - p.stable_reward as i128;
            let should_approx = threshold.margin_meets(margin, p.right_reward);
            let is_approx = p.chosen == Branch::Approx;
            if should_approx != is_approx {
                return Err(format!(
                    "period [{}, {}] chose {:?} against the threshold",
                    p.start, p.end, p.chosen
                ));
            }
            next = p.end + 1;
        }
        if next != self.tau + 1 {
            return Err(format!("periods cover [1, {}], horizon is [1, {}]", next - 1, self.tau));
        }
        if self.solver_calls != self.tau as u64 {
            return Err(format!(
                "{} solver calls for {} steps",
                self.solver_calls, self.tau
            ));
        }
        Ok(())
    }
}

/// Streaming engine: feed instances in step order, poll decided allocations.
/// Decisions are irrevocable; a step's allocation is available once every
/// instance its period's lookahead needs has been fed (or the stream is
/// closed, which pads the window with empty instances).
pub struct OnlineEngine<'s> {
    solver: &'s dyn Solver,
    config: EngineConfig,
    player_count: usize,
    state: StableState,
    instances: Vec<Instance>,
    closed: bool,
    period_start: TimeStep,
    prev_period: Option<(TimeStep, Branch)>,
    allocations: Vec<AllocationMap>,
    periods: Vec<PeriodRecord>,
    snapshots: Vec<PlanSnapshot>,
    solver_calls: u64,
}

impl<'s> OnlineEngine<'s> {
    pub fn new(
        player_count: usize,
        entity_count: usize,
        config: EngineConfig,
        solver: &'s dyn Solver,
    ) -> Self {
        OnlineEngine {
            solver,
            config,
            player_count,
            state: StableState::new(entity_count),
            instances: Vec::new(),
            closed: false,
            period_start: 1,
            prev_period: None,
            allocations: Vec::new(),
            periods: Vec::new(),
            snapshots: Vec::new(),
            solver_calls: 0,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Accepts the instance for the next step. Steps must arrive in order.
    pub fn feed(&mut self, inst: Instance) -> Result<(), EngineError> {
        if self.closed {
            return Err(EngineError::FeedAfterClose);
        }
        let expected = self.instances.len() as TimeStep + 1;
        if inst.t() != expected {
            return Err(EngineError::FeedOutOfOrder {
                expected,
                got: inst.t(),
            });
        }
        self.instances.push(inst);
        self.advance()
    }

    /// Declares the stream complete; remaining periods are decided against
    /// empty instances beyond the end.
    pub fn close(&mut self) -> Result<(), EngineError> {
        self.closed = true;
        self.advance()
    }

    /// The allocation committed for step `t`, if decided. Repeated polls
    /// return the identical allocation.
    pub fn poll(&self, t: TimeStep) -> Result<&AllocationMap, PollError> {
        if t == 0 {
            return Err(PollError::ZeroStep { t });
        }
        if self.closed {
            let tau = self.instances.len() as TimeStep;
            if t > tau {
                return Err(PollError::OutOfRange { t, tau });
            }
        }
        self.allocations
            .get((t - 1) as usize)
            .ok_or(PollError::NotReady {
                t,
                needed: t + self.config.lookahead,
            })
    }

    fn tau_known(&self) -> Option<TimeStep> {
        self.closed.then_some(self.instances.len() as TimeStep)
    }

    fn instance_padded(&self, t: TimeStep) -> Instance {
        if t >= 1 && t <= self.instances.len() as TimeStep {
            self.instances[(t - 1) as usize].clone()
        } else {
            debug_assert!(self.closed, "padding only applies after close");
            Instance::empty(t)
        }
    }

    /// Processes every period whose lookahead window is satisfied.
    fn advance(&mut self) -> Result<(), EngineError> {
        let w = self.config.lookahead;
        loop {
            let s = self.period_start;
            let fed = self.instances.len() as TimeStep;
            if let Some(tau) = self.tau_known() {
                if s > tau {
                    return Ok(());
                }
            } else if fed < s + w {
                return Ok(());
            }
            self.process_period(s)?;
        }
    }

    fn process_period(&mut self, s: TimeStep) -> Result<(), EngineError> {
        let w = self.config.lookahead;
        let delta = self.config.delta;

        let window: Vec<Instance> = (s..=s + w).map(|t| self.instance_padded(t)).collect();
        stable_allocate(&mut self.state, s, &window);

        // Smallest candidate end time; may point past the horizon, in which
        // case only the in-horizon prefix is solved and committed.
        let t_raw = self.state.candidate_period_end(s, w);
        let t = match self.tau_known() {
            Some(tau) => t_raw.min(tau),
            None => t_raw,
        };

        let mut approx: Vec<AllocationMap> = Vec::with_capacity((t - s + 1) as usize);
        let mut approx_value: Value = 0;
        for j in s..=t {
            let inst = &window[(j - s) as usize];
            let mut b = self
                .solver
                .solve(inst, self.player_count)
                .map_err(|source| EngineError::Solver { t: j, source })?;
            b.strip_disallowed(inst);
            self.solver_calls += 1;
            approx_value += nu_step(&b, inst, self.player_count)?;
            approx.push(b);
        }

        let left_reward = match self.prev_period {
            Some((r, Branch::Stable)) if s > 1 && s <= r + w => {
                self.state.lambda_unit(s - 1, delta)
            }
            _ => 0,
        };
        let right_reward = if t_raw < s + w {
            self.state.lambda_unit(t_raw, delta)
        } else {
            0
        };
        let stable_reward = self.state.lambda_range(s, t, delta);

        let margin =
            approx_value as i128 - left_reward as i128 - stable_reward as i128;
        let chosen = if self.config.threshold.margin_meets(margin, right_reward) {
            Branch::Approx
        } else {
            Branch::Stable
        };

        for j in s..=t {
            let alloc = match chosen {
                Branch::Approx => approx[(j - s) as usize].clone(),
                Branch::Stable => {
                    let mut a = AllocationMap::empty(j);
                    for plan in self.state.plans() {
                        if let Some(p) = plan.player_at(j) {
                            a.insert(plan.entity(), p);
                        }
                    }
                    a
                }
            };
            debug_assert!(alloc.validate(&window[(j - s) as usize]).is_ok());
            self.allocations.push(alloc);
        }

        self.periods.push(PeriodRecord {
            start: s,
            end: t,
            left_reward,
            right_reward,
            stable_reward,
            approx_value,
            chosen,
        });
        if self.config.record_snapshots {
            self.snapshots.push(PlanSnapshot {
                period_start: s,
                plans: self.state.plans().to_vec(),
            });
        }
        self.prev_period = Some((s, chosen));
        self.period_start = t + 1;
        Ok(())
    }

    /// Finishes the run and assembles the trace. The stream must be closed.
    pub fn into_trace(mut self) -> Result<RunTrace, EngineError> {
        assert!(self.closed, "close the stream before taking the trace");
        self.advance()?;
        let tau = self.instances.len() as TimeStep;
        debug_assert_eq!(self.allocations.len() as TimeStep, tau);

        let mut nu_total = 0;
        for t in 1..=tau {
            nu_total += nu_step(
                &self.allocations[(t - 1) as usize],
                &self.instances[(t - 1) as usize],
                self.player_count,
            )?;
        }
        let lambda_pairwise_total = if tau >= 1 {
            lambda_pairwise(&self.allocations, self.config.delta, 1, tau)
        } else {
            0
        };
        let lambda_interval_total = self.realized_interval_lambda(tau);
        Ok(RunTrace {
            lookahead: self.config.lookahead,
            delta: self.config.delta,
            rho: self.config.rho(),
            solver_name: self.solver.name().to_string(),
            solver_declared_rho: self.solver.declared_rho(),
            tau,
            allocations: self.allocations,
            periods: self.periods,
            snapshots: self.snapshots,
            final_plans: self.state.plans().to_vec(),
            solver_calls: self.solver_calls,
            nu_total,
            lambda_interval_total,
            lambda_pairwise_total,
        })
    }

    /// Interval-form stability realized by the committed allocations: a unit
    /// step earns `delta` per entity when a single planned interval covers it
    /// and both of its endpoints fall in stable-branch periods. Solver-branch
    /// steps contribute singleton intervals and therefore nothing.
    fn realized_interval_lambda(&self, tau: TimeStep) -> Value {
        if tau == 0 {
            return 0;
        }
        let mut stable_at = vec![false; tau as usize + 1];
        for p in &self.periods {
            if p.chosen == Branch::Stable {
                for t in p.start..=p.end {
                    stable_at[t as usize] = true;
                }
            }
        }
        let mut units: u64 = 0;
        for plan in self.state.plans() {
            for iv in plan.intervals() {
                let lo = iv.start.max(1);
                let hi = iv.end.min(tau);
                for j in lo..hi {
                    if stable_at[j as usize] && stable_at[j as usize + 1] {
                        units += 1;
                    }
                }
            }
        }
        self.config.delta * units
    }
}

/// Runs the engine over a complete horizon.
pub fn run(
    horizon: &Horizon,
    solver: &dyn Solver,
    config: &EngineConfig,
) -> Result<RunTrace, EngineError> {
    if config.delta != horizon.delta() {
        return Err(EngineError::DeltaMismatch {
            config: config.delta,
            horizon: horizon.delta(),
        });
    }
    let mut engine = OnlineEngine::new(
        horizon.player_count(),
        horizon.entity_count(),
        config.clone(),
        solver,
    );
    for inst in horizon.instances() {
        engine.feed(inst.clone())?;
    }
    engine.close()?;
    engine.into_trace()
}
