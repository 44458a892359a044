//! Consistency checks over a finished event log.

use std::collections::BTreeMap;

use crate::domain::{EventKind, EventLog, EventPayload, HandlingRecord, PrId, Requisition, Scenario, SupplierId};
use crate::policy::{Allocation, PolicyKind, Provenance};

/// One broken invariant, with the offending log position.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub index: usize,
    pub message: String,
}

#[derive(Default)]
struct PrTrace<'a> {
    generated: Option<(f64, &'a Requisition)>,
    handled: Option<(f64, &'a HandlingRecord)>,
    responses: Vec<(f64, SupplierId)>,
    ordered: Option<f64>,
}

/// Checks clock monotonicity, per-requisition event ordering, lifecycle
/// completeness and allocation feasibility. Returns every violation found.
pub fn audit_log(log: &EventLog, scenario: &Scenario) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    let mut fail = |index: usize, message: String| out.push(AuditViolation { index, message });
    let mut traces: BTreeMap<PrId, PrTrace> = BTreeMap::new();
    let mut last = f64::NEG_INFINITY;
    let (mut n_pr, mut n_hl, mut n_po) = (0u64, 0u64, 0u64);

    for (i, rec) in log.iter().enumerate() {
        if rec.time < last {
            fail(i, format!("clock went back from {last} to {}", rec.time));
        }
        last = rec.time;
        if rec.time > scenario.horizon {
            fail(i, format!("event after the horizon at {}", rec.time));
        }
        if rec.kind == EventKind::Termination {
            if i + 1 != log.len() {
                fail(i, "termination is not the last event".into());
            }
            continue;
        }
        let Some(pr) = rec.pr else {
            fail(i, format!("{} without a requisition id", rec.kind.as_str()));
            continue;
        };
        let trace = traces.entry(pr).or_default();
        match (&rec.kind, &rec.payload) {
            (EventKind::PrGeneration, EventPayload::Requisition(req)) => {
                n_pr += 1;
                if trace.generated.is_some() {
                    fail(i, format!("requisition {pr} generated twice"));
                }
                if req.is_empty() {
                    fail(i, format!("requisition {pr} has no items"));
                }
                if let Err(e) = req.check(&scenario.catalog) {
                    fail(i, format!("requisition {pr}: {e}"));
                }
                trace.generated = Some((rec.time, req));
            }
            (EventKind::PrHandling, EventPayload::Handling(h)) => {
                n_hl += 1;
                match trace.generated {
                    None => fail(i, format!("requisition {pr} handled before generation")),
                    Some((t, _)) if rec.time < t => fail(i, format!("requisition {pr} handled before creation")),
                    _ => {}
                }
                if trace.handled.is_some() {
                    fail(i, format!("requisition {pr} handled twice"));
                }
                trace.handled = Some((rec.time, h));
            }
            (EventKind::RfqResponse, EventPayload::Quote(q)) => {
                let Some((t, h)) = trace.handled else {
                    fail(i, format!("quote for requisition {pr} before handling"));
                    continue;
                };
                if rec.time < t {
                    fail(i, format!("quote for requisition {pr} precedes handling"));
                }
                if Some(q.supplier) != rec.supplier || !h.rfq_suppliers.contains(&q.supplier) {
                    fail(i, format!("unsolicited quote from supplier {} for {pr}", q.supplier));
                }
                if trace.responses.iter().any(|&(_, s)| s == q.supplier) {
                    fail(i, format!("duplicate quote from supplier {} for {pr}", q.supplier));
                }
                if trace.ordered.is_some() {
                    fail(i, format!("quote for requisition {pr} after its order"));
                }
                trace.responses.push((rec.time, q.supplier));
            }
            (EventKind::PoGeneration, EventPayload::Allocation(a)) => {
                n_po += 1;
                if trace.ordered.is_some() {
                    fail(i, format!("requisition {pr} ordered twice"));
                }
                let (Some((_, req)), Some((_, h))) = (trace.generated, trace.handled) else {
                    fail(i, format!("requisition {pr} ordered before handling"));
                    continue;
                };
                if trace.responses.len() != h.rfq_suppliers.len() {
                    fail(
                        i,
                        format!(
                            "requisition {pr} ordered with {} of {} quotes",
                            trace.responses.len(),
                            h.rfq_suppliers.len()
                        ),
                    );
                }
                for msg in check_allocation(a, req, h, scenario) {
                    fail(i, format!("requisition {pr}: {msg}"));
                }
                trace.ordered = Some(rec.time);
            }
            _ => fail(i, format!("{} carries the wrong payload", rec.kind.as_str())),
        }
        if !(n_po <= n_hl && n_hl <= n_pr) {
            fail(
                i,
                format!("counting processes out of order: {n_pr} >= {n_hl} >= {n_po} fails"),
            );
        }
    }
    out
}

fn check_allocation(a: &Allocation, req: &Requisition, h: &HandlingRecord, scenario: &Scenario) -> Vec<String> {
    let mut msgs = Vec::new();
    let included: Vec<_> = req.included().collect();
    if a.assignments.len() != included.len() {
        msgs.push(format!(
            "{} items but {} assignments",
            included.len(),
            a.assignments.len()
        ));
    }
    let eligible = &scenario.catalog.category(req.category).eligible_suppliers;
    for (product, quantity) in included {
        let mine: Vec<_> = a.assignments.iter().filter(|x| x.product == product).collect();
        if mine.len() != 1 {
            msgs.push(format!("product {product} assigned {} times", mine.len()));
            continue;
        }
        let x = mine[0];
        if x.quantity != quantity {
            msgs.push(format!("product {product} quantity {} != {quantity}", x.quantity));
        }
        if !eligible.contains(&x.supplier) {
            msgs.push(format!("product {product} sent to ineligible supplier {}", x.supplier));
        }
        match x.provenance {
            Provenance::Contract { .. } => {
                if !h.contracts.terms_for(product).any(|t| t.supplier == x.supplier) {
                    msgs.push(format!(
                        "product {product} billed to contract {} not in force",
                        x.supplier
                    ));
                }
            }
            Provenance::Spot => {
                if !h.rfq_suppliers.contains(&x.supplier) {
                    msgs.push(format!(
                        "product {product} bought spot from unasked supplier {}",
                        x.supplier
                    ));
                }
                if scenario.policy.kind == PolicyKind::Naive && h.contracts.is_contracted(product) {
                    msgs.push(format!(
                        "contracted product {product} bought spot under the naive policy"
                    ));
                }
            }
        }
    }
    let used = a.suppliers();
    if used.len() != a.po_count {
        msgs.push(format!("po count {} but {} suppliers", a.po_count, used.len()));
    }
    let expected_overhead = scenario.policy.po_overhead * a.po_count.saturating_sub(1) as f64;
    if (a.overhead_cost - expected_overhead).abs() > 1e-9 * expected_overhead.max(1.0) {
        msgs.push(format!("overhead {} != {expected_overhead}", a.overhead_cost));
    }
    let items: f64 = a.assignments.iter().map(|x| x.cost()).sum();
    if (a.items_cost - items).abs() > 1e-9 * items.abs().max(1.0) {
        msgs.push(format!("items cost {} != {items}", a.items_cost));
    }
    msgs
}
