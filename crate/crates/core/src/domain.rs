//! In-memory model of one simulated procurement world.
//!
//! Entities are addressed by dense index newtypes (`ProductId(3)` is
//! `catalog.products[3]`); human-readable names travel alongside them and
//! are resolved by the scenario loader.

use std::fmt;

use thiserror::Error;

use crate::engine::{DelayConfig, EngineConfig};
use crate::hazards::HazardSpec;
use crate::market::{ContractTerms, Quote, SpotModel};
use crate::policy::{Allocation, PolicyConfig};

macro_rules! index_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                Self(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_id!(
    /// Position of a product in [`Catalog::products`].
    ProductId
);
index_id!(
    /// Position of a category in [`Catalog::categories`].
    CategoryId
);
index_id!(
    /// Position of a supplier in [`Scenario::suppliers`].
    SupplierId
);
index_id!(
    /// Position of a vessel in [`Scenario::vessels`].
    VesselId
);
index_id!(
    /// Position of a requisition in one run's requisition table.
    PrId
);

#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub name: String,
    pub family: String,
    /// Baseline stock `q0` the replenishment model restores to.
    pub baseline_stock: u32,
    /// Linear depletion rate in units per day.
    pub depletion_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub name: String,
    pub products: Vec<ProductId>,
    pub eligible_suppliers: Vec<SupplierId>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    pub products: Vec<Product>,
    pub categories: Vec<Category>,
}

impl Catalog {
    pub fn product(&self, id: ProductId) -> &Product {
        &self.products[id.index()]
    }

    pub fn category(&self, id: CategoryId) -> &Category {
        &self.categories[id.index()]
    }

    /// Category owning `product`, if any.
    pub fn category_of(&self, product: ProductId) -> Option<CategoryId> {
        self.categories
            .iter()
            .position(|c| c.products.contains(&product))
            .map(CategoryId::from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Supplier {
    pub name: String,
    /// Whether the supplier answers RFQs on the spot market.
    pub spot: bool,
    /// Lead time quoted with every spot response, in days.
    pub spot_lead_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vessel {
    pub name: String,
    /// Requisition timing model per category; categories without an entry
    /// never generate requisitions from this vessel.
    pub demand: Vec<(CategoryId, HazardSpec)>,
}

/// Half-open validity window `[start, end)` in simulation days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub start: f64,
    pub end: f64,
}

impl Validity {
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Validity) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    pub supplier: SupplierId,
    /// Fixed unit price per covered product.
    pub rates: Vec<(ProductId, f64)>,
    pub lead_time: f64,
    pub validity: Validity,
    /// Volume the buyer committed to over the validity window, in units.
    pub commitment: u32,
}

impl Contract {
    pub fn rate_for(&self, product: ProductId) -> Option<f64> {
        self.rates.iter().find(|(p, _)| *p == product).map(|&(_, r)| r)
    }
}

/// One line of a requisition. `quantity` is present exactly when the
/// product is included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestedItem {
    pub product: ProductId,
    pub quantity: Option<u32>,
}

impl RequestedItem {
    pub fn included(&self) -> bool {
        self.quantity.is_some()
    }
}

/// A purchase requisition raised by one vessel for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct Requisition {
    pub vessel: VesselId,
    pub category: CategoryId,
    pub created_at: f64,
    /// One entry per product of the category, in catalog order.
    pub items: Vec<RequestedItem>,
}

impl Requisition {
    /// Included products with their quantities.
    pub fn included(&self) -> impl Iterator<Item = (ProductId, u32)> + '_ {
        self.items.iter().filter_map(|it| it.quantity.map(|q| (it.product, q)))
    }

    pub fn quantity_of(&self, product: ProductId) -> Option<u32> {
        self.items
            .iter()
            .find(|it| it.product == product)
            .and_then(|it| it.quantity)
    }

    pub fn is_empty(&self) -> bool {
        self.items.iter().all(|it| !it.included())
    }

    pub fn check(&self, catalog: &Catalog) -> Result<(), ValidationError> {
        let Some(category) = catalog.categories.get(self.category.index()) else {
            return Err(ValidationError::new(
                "requisition.category",
                ValidationErrorKind::UnknownReference,
            ));
        };
        for (i, item) in self.items.iter().enumerate() {
            let path = || format!("requisition.items[{i}]");
            if !category.products.contains(&item.product) {
                return Err(ValidationError::new(
                    path(),
                    ValidationErrorKind::ProductOutsideCategory,
                ));
            }
            if item.quantity == Some(0) {
                return Err(ValidationError::new(path(), ValidationErrorKind::ZeroQuantity));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    PrGeneration,
    PrHandling,
    RfqResponse,
    PoGeneration,
    Termination,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PrGeneration => "pr_generation",
            EventKind::PrHandling => "pr_handling",
            EventKind::RfqResponse => "rfq_response",
            EventKind::PoGeneration => "po_generation",
            EventKind::Termination => "termination",
        }
    }
}

/// Contract terms visible for each included item when a requisition is handled.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContractSnapshot {
    pub time: f64,
    /// `(product, terms)` for every active contract covering an included
    /// product. Products absent here are not contracted at `time`.
    pub entries: Vec<(ProductId, ContractTerms)>,
}

impl ContractSnapshot {
    pub fn is_contracted(&self, product: ProductId) -> bool {
        self.entries.iter().any(|(p, _)| *p == product)
    }

    pub fn terms_for(&self, product: ProductId) -> impl Iterator<Item = &ContractTerms> {
        self.entries.iter().filter(move |(p, _)| *p == product).map(|(_, t)| t)
    }
}

/// What handling decided for a requisition: the contracts it saw and the
/// suppliers asked to quote.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HandlingRecord {
    pub contracts: ContractSnapshot,
    pub rfq_suppliers: Vec<SupplierId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    None,
    Requisition(Requisition),
    Handling(HandlingRecord),
    Quote(Quote),
    Allocation(Allocation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub kind: EventKind,
    pub time: f64,
    pub pr: Option<PrId>,
    pub supplier: Option<SupplierId>,
    pub payload: EventPayload,
}

/// Append-only record of everything that happened in one run.
pub type EventLog = Vec<EventRecord>;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Simulation end, in days from time zero.
    pub horizon: f64,
    pub suppliers: Vec<Supplier>,
    pub catalog: Catalog,
    pub vessels: Vec<Vessel>,
    pub contracts: Vec<Contract>,
    pub spot: SpotModel,
    pub policy: PolicyConfig,
    pub delays: DelayConfig,
    pub engine: EngineConfig,
}

impl Scenario {
    pub fn supplier_ids(&self) -> impl Iterator<Item = SupplierId> {
        (0..self.suppliers.len()).map(SupplierId::from)
    }

    /// Total committed volume per supplier, summed over its contracts.
    pub fn commitments(&self) -> Vec<u32> {
        let mut out = vec![0; self.suppliers.len()];
        for c in &self.contracts {
            out[c.supplier.index()] += c.commitment;
        }
        out
    }

    /// Whether `supplier` holds at least one contract.
    pub fn is_contract_supplier(&self, supplier: SupplierId) -> bool {
        self.contracts.iter().any(|c| c.supplier == supplier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationErrorKind {
    NonPositiveHorizon,
    EmptyValidityWindow,
    NonPositiveRate,
    ZeroQuantity,
    ZeroBaselineStock,
    NonPositiveDepletion,
    ProductInTwoCategories,
    ProductWithoutCategory,
    ProductOutsideCategory,
    UnknownReference,
    SupplierNotEligible,
    OverlappingContracts,
    MissingSpotPrice,
    TooManySuppliers(usize),
    InvalidParameter(&'static str),
}

impl fmt::Display for ValidationErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationErrorKind::*;
        match self {
            NonPositiveHorizon => f.write_str("horizon must be positive"),
            EmptyValidityWindow => f.write_str("empty validity window"),
            NonPositiveRate => f.write_str("rate must be positive"),
            ZeroQuantity => f.write_str("zero quantity for included item"),
            ZeroBaselineStock => f.write_str("baseline stock must be at least 1"),
            NonPositiveDepletion => f.write_str("depletion rate must be positive"),
            ProductInTwoCategories => f.write_str("product appears in two categories"),
            ProductWithoutCategory => f.write_str("product belongs to no category"),
            ProductOutsideCategory => f.write_str("product does not belong to the category"),
            UnknownReference => f.write_str("reference to an unknown entity"),
            SupplierNotEligible => {
                f.write_str("contract covers a product whose category the supplier is not eligible for")
            }
            OverlappingContracts => f.write_str("two contracts for the same product and supplier overlap in time"),
            MissingSpotPrice => f.write_str("spot supplier has no price for an eligible product"),
            TooManySuppliers(n) => write!(f, "category has {n} eligible suppliers, at most 12 are supported"),
            InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

/// First violated invariant and where it was found.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {kind}")]
pub struct ValidationError {
    pub path: String,
    pub kind: ValidationErrorKind,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, kind: ValidationErrorKind) -> Self {
        Self {
            path: path.into(),
            kind,
        }
    }
}

/// Largest eligible-supplier pool the exact allocation solver accepts.
pub const MAX_CATEGORY_SUPPLIERS: usize = 12;

/// Checks every structural invariant of `scenario` and returns it unchanged
/// when all hold.
pub fn validate_scenario(scenario: Scenario) -> Result<Scenario, ValidationError> {
    use ValidationErrorKind as K;
    let err = |path: String, kind| Err(ValidationError::new(path, kind));

    if !(scenario.horizon > 0.0 && scenario.horizon.is_finite()) {
        return err("horizon".into(), K::NonPositiveHorizon);
    }
    let n_products = scenario.catalog.products.len();
    let n_suppliers = scenario.suppliers.len();
    let n_categories = scenario.catalog.categories.len();

    for (i, p) in scenario.catalog.products.iter().enumerate() {
        if p.baseline_stock == 0 {
            return err(format!("catalog.products[{i}].baseline_stock"), K::ZeroBaselineStock);
        }
        if !(p.depletion_rate > 0.0 && p.depletion_rate.is_finite()) {
            return err(format!("catalog.products[{i}].depletion_rate"), K::NonPositiveDepletion);
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; n_products];
    for (c, cat) in scenario.catalog.categories.iter().enumerate() {
        for (k, &p) in cat.products.iter().enumerate() {
            let path = format!("catalog.categories[{c}].products[{k}]");
            let Some(slot) = owner.get_mut(p.index()) else {
                return err(path, K::UnknownReference);
            };
            if slot.is_some() {
                return err(path, K::ProductInTwoCategories);
            }
            *slot = Some(c);
        }
        for (k, &s) in cat.eligible_suppliers.iter().enumerate() {
            if s.index() >= n_suppliers {
                return err(
                    format!("catalog.categories[{c}].eligible_suppliers[{k}]"),
                    K::UnknownReference,
                );
            }
        }
        if cat.eligible_suppliers.len() > MAX_CATEGORY_SUPPLIERS {
            return err(
                format!("catalog.categories[{c}].eligible_suppliers"),
                K::TooManySuppliers(cat.eligible_suppliers.len()),
            );
        }
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return err(format!("catalog.products[{i}]"), K::ProductWithoutCategory);
    }

    for (i, s) in scenario.suppliers.iter().enumerate() {
        if !(s.spot_lead_time >= 0.0 && s.spot_lead_time.is_finite()) {
            return err(
                format!("suppliers[{i}].spot_lead_time"),
                K::InvalidParameter("lead time must be non-negative"),
            );
        }
    }

    for (v, vessel) in scenario.vessels.iter().enumerate() {
        for (k, (cat, spec)) in vessel.demand.iter().enumerate() {
            let path = format!("fleet[{v}].demand[{k}]");
            if cat.index() >= n_categories {
                return err(path, K::UnknownReference);
            }
            if let Err(e) = spec.check() {
                return err(path, K::InvalidParameter(e));
            }
        }
    }

    for (c, contract) in scenario.contracts.iter().enumerate() {
        let path = |field: &str| format!("contracts[{c}].{field}");
        if contract.supplier.index() >= n_suppliers {
            return err(path("supplier"), K::UnknownReference);
        }
        let v = contract.validity;
        if !(v.start.is_finite() && v.end.is_finite()) || v.start >= v.end {
            return err(path("validity"), K::EmptyValidityWindow);
        }
        if !(contract.lead_time >= 0.0 && contract.lead_time.is_finite()) {
            return err(path("lead_time"), K::InvalidParameter("lead time must be non-negative"));
        }
        for (k, &(p, rate)) in contract.rates.iter().enumerate() {
            let rpath = path(&format!("rates[{k}]"));
            let Some(Some(cat)) = owner.get(p.index()) else {
                return err(rpath, K::UnknownReference);
            };
            if !(rate > 0.0 && rate.is_finite()) {
                return err(rpath, K::NonPositiveRate);
            }
            if !scenario.catalog.categories[*cat]
                .eligible_suppliers
                .contains(&contract.supplier)
            {
                return err(rpath, K::SupplierNotEligible);
            }
        }
        for (d, other) in scenario.contracts.iter().enumerate().take(c) {
            if other.supplier == contract.supplier
                && other.validity.overlaps(&contract.validity)
                && contract.rates.iter().any(|(p, _)| other.rate_for(*p).is_some())
            {
                return err(format!("contracts[{c}] / contracts[{d}]"), K::OverlappingContracts);
            }
        }
    }

    if let Err((path, kind)) = scenario.spot.check(&scenario) {
        return err(path, kind);
    }
    if !(scenario.policy.po_overhead >= 0.0 && scenario.policy.po_overhead.is_finite()) {
        return err(
            "policy.po_overhead".into(),
            K::InvalidParameter("overhead must be non-negative"),
        );
    }
    if let Err(what) = scenario.delays.check() {
        return err("delays".into(), K::InvalidParameter(what));
    }
    if let Err(what) = scenario.engine.check() {
        return err("engine".into(), K::InvalidParameter(what));
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn reference_scenario_is_valid() {
        let s = presets::reference_scenario();
        assert_eq!(s.catalog.products.len(), 3);
        assert_eq!(s.suppliers.len(), 3);
        assert!(validate_scenario(s).is_ok());
    }

    #[test]
    fn degenerate_contract_window_is_rejected() {
        let mut s = presets::reference_scenario();
        s.contracts[0].validity = Validity { start: 10.0, end: 10.0 };
        let e = validate_scenario(s).unwrap_err();
        assert_eq!(e.kind, ValidationErrorKind::EmptyValidityWindow);
        assert_eq!(e.to_string(), "contracts[0].validity: empty validity window");
    }

    #[test]
    fn zero_quantity_requisition_is_rejected() {
        let s = presets::reference_scenario();
        let req = Requisition {
            vessel: VesselId(0),
            category: CategoryId(0),
            created_at: 0.0,
            items: vec![RequestedItem {
                product: ProductId(0),
                quantity: Some(0),
            }],
        };
        let e = req.check(&s.catalog).unwrap_err();
        assert_eq!(e.kind, ValidationErrorKind::ZeroQuantity);
        assert!(e.to_string().contains("zero quantity for included item"));
    }

    #[test]
    fn overlapping_contracts_are_rejected() {
        let mut s = presets::reference_scenario();
        let mut dup = s.contracts[0].clone();
        dup.validity = Validity {
            start: 100.0,
            end: 300.0,
        };
        s.contracts.push(dup);
        assert_eq!(
            validate_scenario(s).unwrap_err().kind,
            ValidationErrorKind::OverlappingContracts
        );
    }

    #[test]
    fn shared_product_is_rejected() {
        let mut s = presets::reference_scenario();
        s.catalog.categories.push(Category {
            name: "dup".into(),
            products: vec![ProductId(1)],
            eligible_suppliers: vec![],
        });
        assert_eq!(
            validate_scenario(s).unwrap_err().kind,
            ValidationErrorKind::ProductInTwoCategories
        );
    }

    #[test]
    fn contract_for_ineligible_supplier_is_rejected() {
        let mut s = presets::reference_scenario();
        s.catalog.categories[0]
            .eligible_suppliers
            .retain(|&x| x != SupplierId(0));
        s.spot.prices.retain(|p| p.supplier != SupplierId(0));
        assert_eq!(
            validate_scenario(s).unwrap_err().kind,
            ValidationErrorKind::SupplierNotEligible
        );
    }

    #[test]
    fn non_positive_horizon_is_rejected() {
        let mut s = presets::reference_scenario();
        s.horizon = 0.0;
        assert_eq!(validate_scenario(s).unwrap_err().path, "horizon");
    }
}
