//! Order allocation policies and the minimum-cost allocation solver.
//!
//! Both policies end in the same optimisation: give every requested item
//! to exactly one supplier so that the purchase cost plus a fixed overhead
//! for every purchase order beyond the first is minimal. They differ in
//! which prices the solver gets to see.

use std::cmp::Ordering;

use thiserror::Error;

use crate::domain::{ContractSnapshot, ProductId, Requisition, SupplierId, MAX_CATEGORY_SUPPLIERS};
use crate::market::{CompetitionBasis, Quote};

/// Default cost of every purchase order beyond the first one of a requisition.
pub const DEFAULT_PO_OVERHEAD: f64 = 10.0;

/// Largest number of full assignments the non-separable solver enumerates.
pub const MAX_ENUMERATED_ASSIGNMENTS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PolicyKind {
    /// Contracted items go to contract suppliers; the spot market is asked
    /// only for items without a valid contract.
    #[default]
    Naive,
    /// Every item is quoted on the spot market and competes with its
    /// contract price, if any.
    Dynamic,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Naive => "naive",
            PolicyKind::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub po_overhead: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Naive,
            po_overhead: DEFAULT_PO_OVERHEAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Contract { contract: usize },
    Spot,
}

impl Provenance {
    pub fn is_contract(self) -> bool {
        matches!(self, Provenance::Contract { .. })
    }
}

/// One admissible way to buy an item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEntry {
    pub supplier: SupplierId,
    pub unit_cost: f64,
    pub provenance: Provenance,
    /// Extra unit cost per unit allocated to this supplier's spot entries
    /// across the whole requisition. Zero unless competition is charged on
    /// the supplier total.
    pub congestion_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub product: ProductId,
    pub quantity: u32,
    pub entries: Vec<CostEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostMatrix {
    pub rows: Vec<CostRow>,
}

impl CostMatrix {
    /// Distinct suppliers appearing anywhere in the matrix, ascending.
    pub fn suppliers(&self) -> Vec<SupplierId> {
        let mut out: Vec<SupplierId> = self
            .rows
            .iter()
            .flat_map(|r| r.entries.iter().map(|e| e.supplier))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn is_separable(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.entries.iter().all(|e| e.congestion_slope == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no quote from supplier {supplier} for product {product}")]
    MissingQuote { product: ProductId, supplier: SupplierId },
    #[error("product {0} has no admissible supplier")]
    Infeasible(ProductId),
    #[error("{0} candidate suppliers exceed the solver limit")]
    TooManySuppliers(usize),
    #[error("{0} assignments exceed the enumeration limit")]
    TooManyAssignments(u64),
    #[error("empty cost matrix")]
    Empty,
}

/// (item, supplier) pairs to request quotes for.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RfqScope {
    pub pairs: Vec<(ProductId, SupplierId)>,
}

impl RfqScope {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct suppliers in the scope, ascending.
    pub fn suppliers(&self) -> Vec<SupplierId> {
        let mut out: Vec<SupplierId> = self.pairs.iter().map(|&(_, s)| s).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn items_for(&self, supplier: SupplierId) -> Vec<ProductId> {
        self.pairs
            .iter()
            .filter(|&&(_, s)| s == supplier)
            .map(|&(p, _)| p)
            .collect()
    }

    pub fn contains(&self, product: ProductId, supplier: SupplierId) -> bool {
        self.pairs.contains(&(product, supplier))
    }
}

/// Items to be quoted and by whom. An empty scope means the requisition
/// goes straight to order generation.
pub fn decide_rfq_scope(
    requisition: &Requisition,
    contracts: &ContractSnapshot,
    kind: PolicyKind,
    spot_suppliers: &[SupplierId],
) -> RfqScope {
    let pairs = requisition
        .included()
        .filter(|&(p, _)| kind == PolicyKind::Dynamic || !contracts.is_contracted(p))
        .flat_map(|(p, _)| spot_suppliers.iter().map(move |&s| (p, s)))
        .collect();
    RfqScope { pairs }
}

/// Admissible prices for every included item under `kind`.
///
/// Naive: a contracted item only admits its contract prices, other items
/// admit their spot quotes. Dynamic: every item admits its contract prices
/// plus all of its spot quotes.
pub fn build_cost_matrix(
    requisition: &Requisition,
    contracts: &ContractSnapshot,
    scope: &RfqScope,
    quotes: &[Quote],
    kind: PolicyKind,
    basis: CompetitionBasis,
    competition_slope: f64,
) -> Result<CostMatrix, PolicyError> {
    let congestion_slope = match basis {
        CompetitionBasis::PerItem => 0.0,
        CompetitionBasis::PerSupplierTotal => competition_slope,
    };
    let mut rows = Vec::new();
    for (product, quantity) in requisition.included() {
        let mut entries: Vec<CostEntry> = contracts
            .terms_for(product)
            .map(|t| CostEntry {
                supplier: t.supplier,
                unit_cost: t.rate,
                provenance: Provenance::Contract { contract: t.contract },
                congestion_slope: 0.0,
            })
            .collect();
        let use_spot = kind == PolicyKind::Dynamic || entries.is_empty();
        if use_spot {
            for &(p, supplier) in scope.pairs.iter().filter(|(p, _)| *p == product) {
                let rate = quotes
                    .iter()
                    .find(|q| q.supplier == supplier)
                    .and_then(|q| q.rate_for(p))
                    .ok_or(PolicyError::MissingQuote { product: p, supplier })?;
                entries.push(CostEntry {
                    supplier,
                    unit_cost: rate,
                    provenance: Provenance::Spot,
                    congestion_slope,
                });
            }
        }
        rows.push(CostRow {
            product,
            quantity,
            entries,
        });
    }
    Ok(CostMatrix { rows })
}

/// The supplier and price chosen for one item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub product: ProductId,
    pub quantity: u32,
    pub supplier: SupplierId,
    /// Realised unit price, including any supplier-total surcharge.
    pub unit_cost: f64,
    pub provenance: Provenance,
}

impl Assignment {
    pub fn cost(&self) -> f64 {
        self.unit_cost * f64::from(self.quantity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub assignments: Vec<Assignment>,
    /// Number of distinct suppliers receiving at least one item.
    pub po_count: usize,
    pub items_cost: f64,
    pub overhead_cost: f64,
}

impl Allocation {
    pub fn total_cost(&self) -> f64 {
        self.items_cost + self.overhead_cost
    }

    /// `A(product, supplier)`.
    pub fn assigns(&self, product: ProductId, supplier: SupplierId) -> bool {
        self.assignments
            .iter()
            .any(|a| a.product == product && a.supplier == supplier)
    }

    /// Suppliers receiving a purchase order, ascending.
    pub fn suppliers(&self) -> Vec<SupplierId> {
        let mut s: Vec<SupplierId> = self.assignments.iter().map(|a| a.supplier).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Candidate solution ordering: cost (to within 1e-9 relative), then fewer
/// suppliers, then the lexicographically smaller supplier set.
fn better(cost: f64, used: &[SupplierId], best_cost: f64, best_used: &[SupplierId]) -> bool {
    let tol = 1e-9 * best_cost.abs().max(1.0);
    if cost < best_cost - tol {
        return true;
    }
    if cost > best_cost + tol {
        return false;
    }
    match used.len().cmp(&best_used.len()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => used < best_used,
    }
}

/// Cheapest entry of `row` among suppliers in `mask`. Ties prefer the lower
/// supplier id, then the contract entry.
fn cheapest_in<'a>(row: &'a CostRow, suppliers: &[SupplierId], mask: u32) -> Option<&'a CostEntry> {
    row.entries
        .iter()
        .filter(|e| {
            let bit = suppliers.binary_search(&e.supplier).expect("supplier listed");
            mask & (1 << bit) != 0
        })
        .min_by(|a, b| {
            a.unit_cost
                .total_cmp(&b.unit_cost)
                .then(a.supplier.cmp(&b.supplier))
                .then(b.provenance.is_contract().cmp(&a.provenance.is_contract()))
        })
}

/// Minimum-cost single-sourced allocation with `po_overhead` charged for
/// every purchase order after the first.
///
/// With separable costs the solver enumerates supplier subsets and gives
/// each item its cheapest entry inside the subset. When spot prices depend
/// on a supplier's total quantity it enumerates full assignments instead.
pub fn allocate_min_cost(matrix: &CostMatrix, po_overhead: f64) -> Result<Allocation, PolicyError> {
    if matrix.rows.is_empty() {
        return Err(PolicyError::Empty);
    }
    if let Some(row) = matrix.rows.iter().find(|r| r.entries.is_empty()) {
        return Err(PolicyError::Infeasible(row.product));
    }
    if matrix.is_separable() {
        allocate_by_subsets(matrix, po_overhead)
    } else {
        allocate_by_assignments(matrix, po_overhead)
    }
}

fn allocate_by_subsets(matrix: &CostMatrix, po_overhead: f64) -> Result<Allocation, PolicyError> {
    let suppliers = matrix.suppliers();
    if suppliers.len() > MAX_CATEGORY_SUPPLIERS {
        return Err(PolicyError::TooManySuppliers(suppliers.len()));
    }
    let mut best: Option<(f64, Vec<SupplierId>, Vec<&CostEntry>)> = None;
    let mut picks: Vec<&CostEntry> = Vec::with_capacity(matrix.rows.len());
    let mut used: Vec<SupplierId> = Vec::with_capacity(suppliers.len());
    'subsets: for mask in 1u32..(1u32 << suppliers.len()) {
        picks.clear();
        for row in &matrix.rows {
            match cheapest_in(row, &suppliers, mask) {
                Some(e) => picks.push(e),
                None => continue 'subsets,
            }
        }
        used.clear();
        used.extend(picks.iter().map(|e| e.supplier));
        used.sort_unstable();
        used.dedup();
        let items: f64 = picks
            .iter()
            .zip(&matrix.rows)
            .map(|(e, r)| e.unit_cost * f64::from(r.quantity))
            .sum();
        let total = items + po_overhead * (used.len() - 1) as f64;
        let replace = match &best {
            None => true,
            Some((bc, bu, _)) => better(total, &used, *bc, bu),
        };
        if replace {
            best = Some((total, used.clone(), picks.clone()));
        }
    }
    let (_, _, picks) = best.ok_or(PolicyError::Infeasible(matrix.rows[0].product))?;
    let chosen: Vec<CostEntry> = picks.into_iter().copied().collect();
    Ok(finish(matrix, &chosen, po_overhead))
}

fn allocate_by_assignments(matrix: &CostMatrix, po_overhead: f64) -> Result<Allocation, PolicyError> {
    let count = matrix
        .rows
        .iter()
        .try_fold(1u64, |acc, r| acc.checked_mul(r.entries.len() as u64))
        .unwrap_or(u64::MAX);
    if count > MAX_ENUMERATED_ASSIGNMENTS {
        return Err(PolicyError::TooManyAssignments(count));
    }
    let mut best: Option<(f64, Vec<SupplierId>, Vec<CostEntry>)> = None;
    let mut choice = vec![0usize; matrix.rows.len()];
    let mut chosen: Vec<CostEntry> = Vec::with_capacity(matrix.rows.len());
    for code in 0..count {
        let mut rest = code;
        for (slot, row) in choice.iter_mut().zip(&matrix.rows) {
            let n = row.entries.len() as u64;
            *slot = (rest % n) as usize;
            rest /= n;
        }
        chosen.clear();
        chosen.extend(choice.iter().zip(&matrix.rows).map(|(&k, r)| r.entries[k]));
        let realised = realise(matrix, &chosen);
        let items: f64 = realised
            .iter()
            .zip(&matrix.rows)
            .map(|(e, r)| e.unit_cost * f64::from(r.quantity))
            .sum();
        let mut used: Vec<SupplierId> = chosen.iter().map(|e| e.supplier).collect();
        used.sort_unstable();
        used.dedup();
        let total = items + po_overhead * (used.len() - 1) as f64;
        let replace = match &best {
            None => true,
            Some((bc, bu, _)) => better(total, &used, *bc, bu),
        };
        if replace {
            best = Some((total, used, chosen.clone()));
        }
    }
    let (_, _, chosen) = best.expect("at least one assignment");
    Ok(finish(matrix, &chosen, po_overhead))
}

/// Applies supplier-total surcharges to the chosen entries.
fn realise(matrix: &CostMatrix, chosen: &[CostEntry]) -> Vec<CostEntry> {
    chosen
        .iter()
        .map(|e| {
            if e.congestion_slope == 0.0 {
                return *e;
            }
            let total_qty: u32 = chosen
                .iter()
                .zip(&matrix.rows)
                .filter(|(o, _)| o.supplier == e.supplier && o.congestion_slope > 0.0)
                .map(|(_, r)| r.quantity)
                .sum();
            CostEntry {
                unit_cost: e.unit_cost + e.congestion_slope * f64::from(total_qty),
                ..*e
            }
        })
        .collect()
}

fn finish(matrix: &CostMatrix, chosen: &[CostEntry], po_overhead: f64) -> Allocation {
    let realised = realise(matrix, chosen);
    let assignments: Vec<Assignment> = realised
        .iter()
        .zip(&matrix.rows)
        .map(|(e, r)| Assignment {
            product: r.product,
            quantity: r.quantity,
            supplier: e.supplier,
            unit_cost: e.unit_cost,
            provenance: e.provenance,
        })
        .collect();
    let mut suppliers: Vec<SupplierId> = assignments.iter().map(|a| a.supplier).collect();
    suppliers.sort_unstable();
    suppliers.dedup();
    let po_count = suppliers.len();
    Allocation {
        items_cost: assignments.iter().map(Assignment::cost).sum(),
        overhead_cost: po_overhead * po_count.saturating_sub(1) as f64,
        assignments,
        po_count,
    }
}
