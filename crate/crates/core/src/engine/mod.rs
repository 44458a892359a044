//! Event-scheduling kernel.
//!
//! Four event routines drive a requisition through its life:
//!
//! ```text
//! PrGeneration ──(approval + handling delay)──> PrHandling
//! PrHandling ──(RFQ scope empty: order delay)──> PoGeneration
//! PrHandling ──(per-supplier response delay)──> RfqResponse
//! RfqResponse (last one in) ──(order delay)──> PoGeneration
//! PrGeneration ──(renewal gap)──> PrGeneration
//! ```
//!
//! Termination is scheduled at the horizon during initialisation together
//! with the first trigger of every (vessel, category) pair.

mod audit;
mod queue;
mod rng;

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use self::audit::{audit_log, AuditViolation};
pub use self::queue::EventQueue;
pub use self::rng::{pair_entity, requisition_entity, Purpose, RngPlan};

use crate::demand::{build_requisition, demand_spec, InventoryState};
use crate::domain::{
    CategoryId, EventKind, EventLog, EventPayload, EventRecord, HandlingRecord, PrId, Requisition, Scenario,
    SupplierId, VesselId,
};
use crate::hazards::{exponential_delay_from_uniform, open_unit, sample_gap_with, DEFAULT_WINDOW_FRACTION};
use crate::market::{make_quote, ContractBook, Quote};
use crate::metrics::{ComplianceLedger, Counts, RunResult};
use crate::policy::{allocate_min_cost, build_cost_matrix, decide_rfq_scope, PolicyError, RfqScope};

/// Mean waiting times of the constant-rate pipeline stages, in days.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayConfig {
    pub creation_to_approval: f64,
    pub approval_to_handling: f64,
    /// Default RFQ response delay.
    pub rfq_response: f64,
    /// Per-supplier overrides of `rfq_response`.
    pub rfq_response_overrides: Vec<(SupplierId, f64)>,
    pub handling_to_po: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            creation_to_approval: 2.0,
            approval_to_handling: 5.0,
            rfq_response: 2.5,
            rfq_response_overrides: Vec::new(),
            handling_to_po: 0.1,
        }
    }
}

impl DelayConfig {
    pub fn rfq_mean(&self, supplier: SupplierId) -> f64 {
        self.rfq_response_overrides
            .iter()
            .find(|(s, _)| *s == supplier)
            .map_or(self.rfq_response, |&(_, m)| m)
    }

    pub(crate) fn check(&self) -> Result<(), &'static str> {
        let ok = |m: f64| m > 0.0 && m.is_finite();
        let all = [
            self.creation_to_approval,
            self.approval_to_handling,
            self.rfq_response,
            self.handling_to_po,
        ];
        if all.into_iter().all(ok) && self.rfq_response_overrides.iter().all(|&(_, m)| ok(m)) {
            Ok(())
        } else {
            Err("delay means must be positive")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Thinning window as a fraction of the Weibull scale.
    pub thinning_window_fraction: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            thinning_window_fraction: DEFAULT_WINDOW_FRACTION,
        }
    }
}

impl EngineConfig {
    pub(crate) fn check(&self) -> Result<(), &'static str> {
        let f = self.thinning_window_fraction;
        if f > 0.0 && f.is_finite() {
            Ok(())
        } else {
            Err("thinning window fraction must be positive")
        }
    }
}

/// How pipeline delays are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelaySampling {
    #[default]
    Exponential,
    /// Every delay equals its mean. Useful to trace the event chain by hand.
    Means,
}

/// Where requisitions come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DemandSource {
    /// Renewal timing plus the latent replenishment model.
    #[default]
    Renewal,
    /// Exactly these requisitions, at their `created_at` times.
    Scripted(Vec<Requisition>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub delays: DelaySampling,
    pub demand: DemandSource,
    /// Keep the event log in the result.
    pub record_log: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("allocation failed for requisition {pr} at t={time}: {source}")]
    Allocation {
        pr: PrId,
        time: f64,
        #[source]
        source: PolicyError,
    },
    #[error("invalid scripted requisition: {0}")]
    Script(#[from] crate::domain::ValidationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("run {run_index} failed: {source}")]
pub struct BatchError {
    pub run_index: u64,
    #[source]
    pub source: EngineError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SimEvent {
    PrGeneration {
        vessel: VesselId,
        category: CategoryId,
        script: Option<usize>,
    },
    PrHandling(PrId),
    RfqResponse(PrId, SupplierId),
    PoGeneration(PrId),
    Termination,
}

#[derive(Debug)]
struct PrState {
    entity: u64,
    requisition: Requisition,
    handling: Option<HandlingRecord>,
    scope: RfqScope,
    pending: usize,
    quotes: Vec<Quote>,
    ordered: bool,
}

struct Replication<'a> {
    scenario: &'a Scenario,
    options: &'a RunOptions,
    plan: RngPlan,
    run: u64,
    queue: EventQueue<SimEvent>,
    clock: f64,
    /// One inventory per vessel.
    inventories: Vec<InventoryState>,
    /// Demand streams and trigger counters per (vessel, category).
    timing: Vec<Vec<Option<rand_chacha::ChaCha8Rng>>>,
    contents: Vec<Vec<Option<rand_chacha::ChaCha8Rng>>>,
    triggers: Vec<Vec<u32>>,
    /// Eligible spot suppliers per category.
    spot_suppliers: Vec<Vec<SupplierId>>,
    prs: Vec<PrState>,
    ledger: ComplianceLedger,
    counts: Counts,
    cost: f64,
    cost_deltas: Vec<f64>,
    empty_draws: u64,
    log: EventLog,
}

impl<'a> Replication<'a> {
    fn new(scenario: &'a Scenario, run: u64, master_seed: u64, options: &'a RunOptions) -> Self {
        let n_v = scenario.vessels.len();
        let n_c = scenario.catalog.categories.len();
        let spot_suppliers = scenario
            .catalog
            .categories
            .iter()
            .map(|c| {
                c.eligible_suppliers
                    .iter()
                    .copied()
                    .filter(|s| scenario.suppliers[s.index()].spot)
                    .collect()
            })
            .collect();
        Self {
            scenario,
            options,
            plan: RngPlan::new(master_seed),
            run,
            queue: EventQueue::new(),
            clock: 0.0,
            inventories: vec![InventoryState::full(scenario.catalog.products.len(), 0.0); n_v],
            timing: vec![vec![None; n_c]; n_v],
            contents: vec![vec![None; n_c]; n_v],
            triggers: vec![vec![0; n_c]; n_v],
            spot_suppliers,
            prs: Vec::new(),
            ledger: ComplianceLedger::for_scenario(scenario),
            counts: Counts {
                rfq_responses: vec![0; scenario.suppliers.len()],
                ..Counts::default()
            },
            cost: 0.0,
            cost_deltas: Vec::new(),
            empty_draws: 0,
            log: Vec::new(),
        }
    }

    fn horizon(&self) -> f64 {
        self.scenario.horizon
    }

    fn schedule(&mut self, time: f64, event: SimEvent) {
        if time <= self.horizon() {
            self.queue.push(time, event);
        }
    }

    fn delay(&self, mean: f64, rng: &mut impl rand::Rng) -> f64 {
        match self.options.delays {
            DelaySampling::Exponential => exponential_delay_from_uniform(mean, open_unit(rng)),
            DelaySampling::Means => mean,
        }
    }

    fn record(&mut self, kind: EventKind, pr: Option<PrId>, supplier: Option<SupplierId>, payload: EventPayload) {
        if self.options.record_log {
            self.log.push(EventRecord {
                kind,
                time: self.clock,
                pr,
                supplier,
                payload,
            });
        }
    }

    fn init(&mut self) -> Result<(), EngineError> {
        self.queue.push(self.horizon(), SimEvent::Termination);
        match &self.options.demand {
            DemandSource::Renewal => {
                for (v, vessel) in self.scenario.vessels.iter().enumerate() {
                    for (c, _) in &vessel.demand {
                        self.schedule_next_trigger(VesselId::from(v), *c, 0.0);
                    }
                }
            }
            DemandSource::Scripted(list) => {
                for (i, req) in list.iter().enumerate() {
                    req.check(&self.scenario.catalog)?;
                    self.schedule(
                        req.created_at,
                        SimEvent::PrGeneration {
                            vessel: req.vessel,
                            category: req.category,
                            script: Some(i),
                        },
                    );
                }
            }
        }
        Ok(())
    }

    fn schedule_next_trigger(&mut self, vessel: VesselId, category: CategoryId, from: f64) {
        let (v, c) = (vessel.index(), category.index());
        let spec = demand_spec(&self.scenario.vessels[v], category).expect("demand spec exists");
        let plan = self.plan;
        let run = self.run;
        let rng = self.timing[v][c]
            .get_or_insert_with(|| plan.stream(run, Purpose::DemandTiming, pair_entity(vessel.0, category.0), 0));
        let window = self.scenario.engine.thinning_window_fraction;
        if let Some(t) = sample_gap_with(spec, from, self.scenario.horizon, window, rng) {
            self.schedule(
                t,
                SimEvent::PrGeneration {
                    vessel,
                    category,
                    script: None,
                },
            );
        }
    }

    fn execute(mut self) -> Result<RunResult, EngineError> {
        self.init()?;
        while let Some((time, _, event)) = self.queue.pop() {
            assert!(
                time >= self.clock,
                "event queue went back in time: {time} < {}",
                self.clock
            );
            self.clock = time;
            match event {
                SimEvent::PrGeneration {
                    vessel,
                    category,
                    script,
                } => self.on_generation(vessel, category, script),
                SimEvent::PrHandling(pr) => self.on_handling(pr),
                SimEvent::RfqResponse(pr, s) => self.on_response(pr, s),
                SimEvent::PoGeneration(pr) => self.on_order(pr)?,
                SimEvent::Termination => {
                    self.record(EventKind::Termination, None, None, EventPayload::None);
                    break;
                }
            }
        }
        let in_flight = self.prs.iter().filter(|p| !p.ordered).count() as u64;
        Ok(RunResult {
            run_index: self.run,
            terminal_cost: self.cost,
            compliance: self.ledger.compliance(),
            counts: self.counts,
            in_flight,
            empty_draws: self.empty_draws,
            cost_deltas: self.cost_deltas,
            log: self.options.record_log.then_some(self.log),
        })
    }

    fn on_generation(&mut self, vessel: VesselId, category: CategoryId, script: Option<usize>) {
        let (v, c) = (vessel.index(), category.index());
        let seq = self.triggers[v][c];
        self.triggers[v][c] += 1;
        let now = self.clock;

        let requisition = match script {
            Some(i) => {
                let DemandSource::Scripted(list) = &self.options.demand else {
                    unreachable!("scripted trigger without a script")
                };
                let req = list[i].clone();
                for (p, _) in req.included() {
                    self.inventories[v].replenish(p, now);
                }
                (!req.is_empty()).then_some(req)
            }
            None => {
                let plan = self.plan;
                let run = self.run;
                let rng = self.contents[v][c].get_or_insert_with(|| {
                    plan.stream(run, Purpose::DemandContents, pair_entity(vessel.0, category.0), 0)
                });
                let req = build_requisition(
                    &self.scenario.catalog,
                    vessel,
                    category,
                    &mut self.inventories[v],
                    now,
                    rng,
                );
                self.schedule_next_trigger(vessel, category, now);
                req
            }
        };

        let Some(requisition) = requisition else {
            self.empty_draws += 1;
            return;
        };
        let pr = PrId::from(self.prs.len());
        let entity = requisition_entity(vessel.0, category.0, seq);
        self.counts.requisitions += 1;
        self.record(
            EventKind::PrGeneration,
            Some(pr),
            None,
            EventPayload::Requisition(requisition.clone()),
        );
        self.prs.push(PrState {
            entity,
            requisition,
            handling: None,
            scope: RfqScope::default(),
            pending: 0,
            quotes: Vec::new(),
            ordered: false,
        });
        let mut rng = self.plan.stream(self.run, Purpose::HandlingDelay, entity, 0);
        let d = &self.scenario.delays;
        let wait = self.delay(d.creation_to_approval, &mut rng) + self.delay(d.approval_to_handling, &mut rng);
        self.schedule(now + wait, SimEvent::PrHandling(pr));
    }

    fn on_handling(&mut self, pr: PrId) {
        let now = self.clock;
        let state = &self.prs[pr.index()];
        let category = state.requisition.category;
        let eligible = &self.scenario.catalog.category(category).eligible_suppliers;
        let contracts = ContractBook::new(&self.scenario.contracts).snapshot(&state.requisition, eligible, now);
        let scope = decide_rfq_scope(
            &state.requisition,
            &contracts,
            self.scenario.policy.kind,
            &self.spot_suppliers[category.index()],
        );
        let entity = state.entity;
        let rfq_suppliers = scope.suppliers();
        self.counts.handled += 1;
        let handling = HandlingRecord {
            contracts,
            rfq_suppliers: rfq_suppliers.clone(),
        };
        self.record(
            EventKind::PrHandling,
            Some(pr),
            None,
            EventPayload::Handling(handling.clone()),
        );

        if rfq_suppliers.is_empty() {
            let mut rng = self.plan.stream(self.run, Purpose::PoDelay, entity, 0);
            let wait = self.delay(self.scenario.delays.handling_to_po, &mut rng);
            self.schedule(now + wait, SimEvent::PoGeneration(pr));
        } else {
            for &s in &rfq_suppliers {
                let mut rng = self.plan.stream(self.run, Purpose::RfqDelay, entity, u64::from(s.0));
                let wait = self.delay(self.scenario.delays.rfq_mean(s), &mut rng);
                self.schedule(now + wait, SimEvent::RfqResponse(pr, s));
            }
        }
        let state = &mut self.prs[pr.index()];
        state.pending = rfq_suppliers.len();
        state.scope = scope;
        state.handling = Some(handling);
    }

    fn on_response(&mut self, pr: PrId, supplier: SupplierId) {
        let now = self.clock;
        let state = &self.prs[pr.index()];
        let items = state.scope.items_for(supplier);
        let mut rng = self
            .plan
            .stream(self.run, Purpose::SpotNoise, state.entity, u64::from(supplier.0));
        let quote = make_quote(
            &self.scenario.spot,
            &self.scenario.catalog,
            &state.requisition,
            &items,
            supplier,
            self.scenario.suppliers[supplier.index()].spot_lead_time,
            now,
            &mut rng,
        );
        let entity = state.entity;
        self.counts.rfq_responses[supplier.index()] += 1;
        self.record(
            EventKind::RfqResponse,
            Some(pr),
            Some(supplier),
            EventPayload::Quote(quote.clone()),
        );
        let state = &mut self.prs[pr.index()];
        state.quotes.push(quote);
        state.pending -= 1;
        if state.pending == 0 {
            let mut rng = self.plan.stream(self.run, Purpose::PoDelay, entity, 0);
            let wait = self.delay(self.scenario.delays.handling_to_po, &mut rng);
            self.schedule(now + wait, SimEvent::PoGeneration(pr));
        }
    }

    fn on_order(&mut self, pr: PrId) -> Result<(), EngineError> {
        let state = &self.prs[pr.index()];
        let handling = state.handling.as_ref().expect("order after handling");
        let spot = &self.scenario.spot;
        let alloc_err = |source| EngineError::Allocation {
            pr,
            time: self.clock,
            source,
        };
        let matrix = build_cost_matrix(
            &state.requisition,
            &handling.contracts,
            &state.scope,
            &state.quotes,
            self.scenario.policy.kind,
            spot.competition_basis,
            spot.competition_slope,
        )
        .map_err(alloc_err)?;
        let allocation = allocate_min_cost(&matrix, self.scenario.policy.po_overhead).map_err(alloc_err)?;
        let delta = self.ledger.record_allocation(&allocation);
        self.cost += delta;
        self.cost_deltas.push(delta);
        self.counts.orders += 1;
        self.prs[pr.index()].ordered = true;
        self.record(
            EventKind::PoGeneration,
            Some(pr),
            None,
            EventPayload::Allocation(allocation),
        );
        Ok(())
    }
}

/// Executes one replication of `scenario` up to its horizon.
pub fn run_once(scenario: &Scenario, run_index: u64, master_seed: u64) -> Result<RunResult, EngineError> {
    run_once_with(
        scenario,
        run_index,
        master_seed,
        &RunOptions {
            record_log: true,
            ..RunOptions::default()
        },
    )
}

pub fn run_once_with(
    scenario: &Scenario,
    run_index: u64,
    master_seed: u64,
    options: &RunOptions,
) -> Result<RunResult, EngineError> {
    Replication::new(scenario, run_index, master_seed, options).execute()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Ordered by run index.
    pub runs: Vec<RunResult>,
    pub elapsed_secs: f64,
}

/// Runs `n_runs` independent replications on up to `parallelism` threads.
/// Results do not depend on `parallelism`.
pub fn run_batch(
    scenario: &Scenario,
    n_runs: u64,
    master_seed: u64,
    parallelism: usize,
    options: &RunOptions,
) -> Result<BatchResult, BatchError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let outcomes: Vec<Result<RunResult, EngineError>> = pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|i| run_once_with(scenario, i, master_seed, options))
            .collect()
    });
    let mut runs = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        runs.push(outcome.map_err(|source| BatchError {
            run_index: i as u64,
            source,
        })?);
    }
    Ok(BatchResult {
        runs,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
