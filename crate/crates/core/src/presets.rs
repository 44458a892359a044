//! Built-in scenarios.

use std::f64::consts::PI;

use rand::Rng;

use crate::domain::{
    Catalog, Category, CategoryId, Contract, Product, ProductId, Scenario, Supplier, SupplierId, Validity, Vessel,
};
use crate::engine::{DelayConfig, EngineConfig};
use crate::hazards::{HazardSpec, PeriodicCovariate};
use crate::market::{CompetitionBasis, SpotModel, SpotPrice};
use crate::policy::{PolicyConfig, PolicyKind};

pub const YEAR: f64 = 365.0;
pub const HALF_YEAR: f64 = 182.5;

const VESSELS: usize = 3;
const BASELINE_STOCK: u32 = 100;
const DEPLETION_RATE: f64 = 0.3;
const WEIBULL_SHAPE: f64 = 2.0;
const WEIBULL_SCALE: f64 = 32.0;

/// Product held under contract by each supplier in [`reference_scenario`].
pub fn contract_product(supplier: SupplierId) -> ProductId {
    ProductId(supplier.0)
}

/// Seasonal `(amplitude, phase)` of product `p` at supplier `s`.
const SEASONAL: [[(f64, f64); 3]; 3] = [
    [(2.0, -PI / 2.0), (3.0, PI / 2.0), (2.0, PI)],
    [(2.0, PI), (3.0, -PI / 3.0), (2.0, PI / 2.0)],
    [(2.0, 3.0 * PI / 4.0), (3.0, PI / 6.0), (2.0, 2.0 * PI / 3.0)],
];
const SPOT_BASELINE: [f64; 3] = [10.0, 10.0, 12.0];

fn vessel_demand() -> HazardSpec {
    HazardSpec::weibull(WEIBULL_SHAPE, WEIBULL_SCALE)
        .with_covariate(PeriodicCovariate {
            amplitude: 1.0,
            period: YEAR,
            phase: 0.0,
            coefficient: 0.4,
        })
        .with_covariate(PeriodicCovariate {
            amplitude: 1.0,
            period: YEAR,
            phase: PI / 3.0,
            coefficient: 0.3,
        })
}

/// One year, three suppliers A, B and C quoting three products of a single
/// category, naive policy with no competition surcharge.
///
/// A and B hold six-month contracts at 11 per unit on products 1 and 2
/// (75 units committed each); C holds a one-year contract at 12 on
/// product 3 (150 units).
pub fn reference_scenario() -> Scenario {
    let suppliers = ["A", "B", "C"]
        .into_iter()
        .map(|name| Supplier {
            name: name.into(),
            spot: true,
            spot_lead_time: 3.0,
        })
        .collect();
    let products = (1..=3)
        .map(|i| Product {
            name: format!("P{i}"),
            family: "spare-parts".into(),
            baseline_stock: BASELINE_STOCK,
            depletion_rate: DEPLETION_RATE,
        })
        .collect();
    let catalog = Catalog {
        products,
        categories: vec![Category {
            name: "spares".into(),
            products: (0..3).map(ProductId).collect(),
            eligible_suppliers: (0..3).map(SupplierId).collect(),
        }],
    };
    let vessels = (1..=VESSELS)
        .map(|i| Vessel {
            name: format!("V{i}"),
            demand: vec![(CategoryId(0), vessel_demand())],
        })
        .collect();
    let contract = |s: u32, rate: f64, end: f64, commitment: u32| Contract {
        supplier: SupplierId(s),
        rates: vec![(contract_product(SupplierId(s)), rate)],
        lead_time: 3.0,
        validity: Validity { start: 0.0, end },
        commitment,
    };
    let contracts = vec![
        contract(0, 11.0, HALF_YEAR, 75),
        contract(1, 11.0, HALF_YEAR, 75),
        contract(2, 12.0, YEAR, 150),
    ];
    let mut prices = Vec::new();
    for (p, row) in SEASONAL.iter().enumerate() {
        for (s, &(amplitude, phase)) in row.iter().enumerate() {
            prices.push(SpotPrice {
                product: ProductId(p as u32),
                supplier: SupplierId(s as u32),
                baseline: SPOT_BASELINE[s],
                amplitude,
                phase,
            });
        }
    }
    Scenario {
        horizon: YEAR,
        suppliers,
        catalog,
        vessels,
        contracts,
        spot: SpotModel {
            period: YEAR,
            noise_sd: 1.0,
            competition_slope: 0.0,
            competition_basis: CompetitionBasis::PerItem,
            prices,
        },
        policy: PolicyConfig::default(),
        delays: DelayConfig::default(),
        engine: EngineConfig::default(),
    }
}

/// A small random world that always passes validation.
///
/// Sizes stay small (at most 4 suppliers, 6 products, 3 vessels) so
/// thousands of these run in seconds; every category keeps at least one
/// spot supplier so allocation is always feasible.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R) -> Scenario {
    let n_suppliers = rng.random_range(1..=4usize);
    let n_categories = rng.random_range(1..=2usize);
    let n_products = rng.random_range(n_categories..=6usize);
    let horizon = rng.random_range(30.0..400.0);

    let mut suppliers: Vec<Supplier> = (0..n_suppliers)
        .map(|i| Supplier {
            name: format!("S{i}"),
            spot: rng.random_bool(0.8),
            spot_lead_time: rng.random_range(0.0..10.0),
        })
        .collect();
    let products = (0..n_products)
        .map(|i| Product {
            name: format!("P{i}"),
            family: "random".into(),
            baseline_stock: rng.random_range(1..200),
            depletion_rate: rng.random_range(0.01..5.0),
        })
        .collect();
    let mut categories: Vec<Category> = (0..n_categories)
        .map(|c| Category {
            name: format!("K{c}"),
            products: Vec::new(),
            eligible_suppliers: Vec::new(),
        })
        .collect();
    for p in 0..n_products {
        // the first products seed every category so none is empty
        let c = if p < n_categories {
            p
        } else {
            rng.random_range(0..n_categories)
        };
        categories[c].products.push(ProductId(p as u32));
    }
    for cat in &mut categories {
        cat.eligible_suppliers = (0..n_suppliers as u32)
            .filter(|_| rng.random_bool(0.7))
            .map(SupplierId)
            .collect();
        if !cat.eligible_suppliers.iter().any(|s| suppliers[s.index()].spot) {
            let s = rng.random_range(0..n_suppliers);
            suppliers[s].spot = true;
            if !cat.eligible_suppliers.contains(&SupplierId(s as u32)) {
                cat.eligible_suppliers.push(SupplierId(s as u32));
                cat.eligible_suppliers.sort_unstable();
            }
        }
    }

    let random_spec = |rng: &mut R| {
        let mut spec = if rng.random_bool(0.3) {
            HazardSpec::constant(rng.random_range(0.01..0.5))
        } else {
            HazardSpec::weibull(rng.random_range(0.5..3.5), rng.random_range(2.0..60.0))
        };
        for _ in 0..rng.random_range(0..3) {
            spec = spec.with_covariate(PeriodicCovariate {
                amplitude: rng.random_range(0.0..1.5),
                period: rng.random_range(10.0..400.0),
                phase: rng.random_range(-PI..PI),
                coefficient: rng.random_range(-0.8..0.8),
            });
        }
        spec
    };
    let mut vessels = Vec::new();
    for v in 0..rng.random_range(0..=3) {
        let mut demand = Vec::new();
        for c in 0..n_categories {
            if rng.random_bool(0.8) {
                demand.push((CategoryId(c as u32), random_spec(rng)));
            }
        }
        vessels.push(Vessel {
            name: format!("V{v}"),
            demand,
        });
    }

    let mut contracts: Vec<Contract> = Vec::new();
    for cat in &categories {
        for &s in &cat.eligible_suppliers {
            // back-to-back windows never overlap
            let mut start = 0.0;
            while rng.random_bool(0.5) && start < horizon {
                let end = start + rng.random_range(5.0..horizon);
                let mut rates = Vec::new();
                for &p in &cat.products {
                    if rng.random_bool(0.6) {
                        rates.push((p, rng.random_range(5.0..20.0)));
                    }
                }
                if !rates.is_empty() {
                    contracts.push(Contract {
                        supplier: s,
                        rates,
                        lead_time: rng.random_range(0.0..10.0),
                        validity: Validity { start, end },
                        commitment: rng.random_range(0..300),
                    });
                }
                start = end;
            }
        }
    }

    let mut prices = Vec::new();
    for p in 0..n_products as u32 {
        for s in 0..n_suppliers as u32 {
            prices.push(SpotPrice {
                product: ProductId(p),
                supplier: SupplierId(s),
                baseline: rng.random_range(5.0..20.0),
                amplitude: rng.random_range(0.0..5.0),
                phase: rng.random_range(-PI..PI),
            });
        }
    }
    let policy = PolicyConfig {
        kind: if rng.random_bool(0.5) {
            PolicyKind::Naive
        } else {
            PolicyKind::Dynamic
        },
        po_overhead: [0.0, 10.0, 25.0][rng.random_range(0..3)],
    };
    let delay = |rng: &mut R| rng.random_range(0.05..6.0);
    let mut rfq_response_overrides = Vec::new();
    for s in 0..n_suppliers as u32 {
        if rng.random_bool(0.3) {
            rfq_response_overrides.push((SupplierId(s), delay(rng)));
        }
    }
    let delays = DelayConfig {
        creation_to_approval: delay(rng),
        approval_to_handling: delay(rng),
        rfq_response: delay(rng),
        rfq_response_overrides,
        handling_to_po: delay(rng),
    };
    Scenario {
        horizon,
        suppliers,
        catalog: Catalog { products, categories },
        vessels,
        contracts,
        spot: SpotModel {
            period: rng.random_range(30.0..400.0),
            noise_sd: rng.random_range(0.0..3.0),
            competition_slope: [0.0, 0.01, 0.1][rng.random_range(0..3)],
            competition_basis: if rng.random_bool(0.7) {
                CompetitionBasis::PerItem
            } else {
                CompetitionBasis::PerSupplierTotal
            },
            prices,
        },
        policy,
        delays,
        engine: EngineConfig::default(),
    }
}
