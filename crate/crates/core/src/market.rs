//! Contract book, spot prices and RFQ quotes.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{
    Catalog, Contract, ContractSnapshot, ProductId, Requisition, Scenario, SupplierId, ValidationErrorKind,
};

/// Lowest spot price ever quoted, per unit.
pub const SPOT_PRICE_FLOOR: f64 = 0.01;

/// How the competition surcharge scales with the requested volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompetitionBasis {
    /// Each item's unit price rises with that item's own quantity.
    #[default]
    PerItem,
    /// A supplier's unit prices rise with the total quantity allocated to
    /// it within the requisition.
    PerSupplierTotal,
}

/// Seasonal spot price parameters of one (product, supplier) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotPrice {
    pub product: ProductId,
    pub supplier: SupplierId,
    pub baseline: f64,
    pub amplitude: f64,
    /// Phase in radians.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotModel {
    /// Seasonal period in days.
    pub period: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sd: f64,
    /// Surcharge per unit of price per unit of requested quantity.
    pub competition_slope: f64,
    pub competition_basis: CompetitionBasis,
    pub prices: Vec<SpotPrice>,
}

impl SpotModel {
    pub fn price(&self, product: ProductId, supplier: SupplierId) -> Option<&SpotPrice> {
        self.prices
            .iter()
            .find(|p| p.product == product && p.supplier == supplier)
    }

    /// Noise-free spot price.
    pub fn seasonal(&self, product: ProductId, supplier: SupplierId, t: f64) -> f64 {
        let p = self
            .price(product, supplier)
            .expect("spot price configured for every quoted pair");
        p.baseline + p.amplitude * (TAU * t / self.period + p.phase).cos()
    }

    pub(crate) fn check(&self, scenario: &Scenario) -> Result<(), (String, ValidationErrorKind)> {
        use ValidationErrorKind as K;
        let bad = |what| Err(("spot".to_string(), K::InvalidParameter(what)));
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad("spot period must be positive");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise standard deviation must be non-negative");
        }
        if !(self.competition_slope >= 0.0 && self.competition_slope.is_finite()) {
            return bad("competition slope must be non-negative");
        }
        for (i, p) in self.prices.iter().enumerate() {
            let path = format!("spot.prices[{i}]");
            if p.product.index() >= scenario.catalog.products.len() || p.supplier.index() >= scenario.suppliers.len() {
                return Err((path, K::UnknownReference));
            }
            if !(p.baseline > 0.0 && p.baseline.is_finite()) {
                return Err((path, K::NonPositiveRate));
            }
            if !(p.amplitude.is_finite() && p.phase.is_finite()) {
                return Err((path, K::InvalidParameter("seasonal terms must be finite")));
            }
        }
        for (c, cat) in scenario.catalog.categories.iter().enumerate() {
            for &s in &cat.eligible_suppliers {
                if !scenario.suppliers[s.index()].spot {
                    continue;
                }
                for &p in &cat.products {
                    if self.price(p, s).is_none() {
                        return Err((format!("spot.prices (category {c})"), K::MissingSpotPrice));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Spot price with a given standard-normal draw `eps`.
pub fn spot_rate_with_noise(model: &SpotModel, product: ProductId, supplier: SupplierId, t: f64, eps: f64) -> f64 {
    (model.seasonal(product, supplier, t) + model.noise_sd * eps).max(SPOT_PRICE_FLOOR)
}

pub fn spot_rate<R: Rng + ?Sized>(
    model: &SpotModel,
    product: ProductId,
    supplier: SupplierId,
    t: f64,
    rng: &mut R,
) -> f64 {
    let eps: f64 = rng.sample(StandardNormal);
    spot_rate_with_noise(model, product, supplier, t, eps)
}

/// Unit price after the competition surcharge for `quantity` units.
pub fn competition_adjust(rate: f64, slope: f64, quantity: u32) -> f64 {
    rate + slope * f64::from(quantity)
}

/// Contract terms available for one (product, supplier) at some time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractTerms {
    pub supplier: SupplierId,
    /// Index of the contract in the scenario's contract list.
    pub contract: usize,
    pub rate: f64,
    pub lead_time: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ContractBook<'a> {
    contracts: &'a [Contract],
}

impl<'a> ContractBook<'a> {
    pub fn new(contracts: &'a [Contract]) -> Self {
        Self { contracts }
    }

    /// Terms of the contract covering `product` with `supplier` at `t`.
    pub fn lookup(&self, product: ProductId, supplier: SupplierId, t: f64) -> Option<ContractTerms> {
        self.contracts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.supplier == supplier && c.validity.contains(t))
            .find_map(|(i, c)| {
                c.rate_for(product).map(|rate| ContractTerms {
                    supplier,
                    contract: i,
                    rate,
                    lead_time: c.lead_time,
                })
            })
    }

    /// Active contract terms for every included item of `requisition`.
    pub fn snapshot(&self, requisition: &Requisition, suppliers: &[SupplierId], t: f64) -> ContractSnapshot {
        let mut entries = Vec::new();
        for (product, _) in requisition.included() {
            for &s in suppliers {
                if let Some(terms) = self.lookup(product, s, t) {
                    entries.push((product, terms));
                }
            }
        }
        ContractSnapshot { time: t, entries }
    }
}

/// A supplier's RFQ response for some items of a requisition.
#[derive(Debug, Clone, PartialEq)]
pub struct Quote {
    pub supplier: SupplierId,
    pub response_time: f64,
    /// Offered unit price per quoted product. Under
    /// [`CompetitionBasis::PerItem`] the surcharge is already included;
    /// under `PerSupplierTotal` these are the bare spot prices.
    pub rates: Vec<(ProductId, f64)>,
    pub lead_time: f64,
}

impl Quote {
    pub fn rate_for(&self, product: ProductId) -> Option<f64> {
        self.rates.iter().find(|(p, _)| *p == product).map(|&(_, r)| r)
    }
}

/// Prices the `items` of `requisition` for `supplier` at its response time.
///
/// One normal draw is taken per product of the requisition's category, in
/// catalog order, and only the quoted products use theirs; a product's
/// price therefore depends only on the stream, not on which other products
/// were asked for.
#[allow(clippy::too_many_arguments)]
pub fn make_quote<R: Rng + ?Sized>(
    model: &SpotModel,
    catalog: &Catalog,
    requisition: &Requisition,
    items: &[ProductId],
    supplier: SupplierId,
    lead_time: f64,
    response_time: f64,
    rng: &mut R,
) -> Quote {
    assert!(!items.is_empty(), "quote requested for no items");
    let products = &catalog.category(requisition.category).products;
    let mut rates = Vec::with_capacity(items.len());
    for &product in products {
        let eps: f64 = rng.sample(StandardNormal);
        if !items.contains(&product) {
            continue;
        }
        let quantity = requisition
            .quantity_of(product)
            .expect("quoted item is included in the requisition");
        let spot = spot_rate_with_noise(model, product, supplier, response_time, eps);
        let rate = match model.competition_basis {
            CompetitionBasis::PerItem => competition_adjust(spot, model.competition_slope, quantity),
            CompetitionBasis::PerSupplierTotal => spot,
        };
        rates.push((product, rate));
    }
    Quote {
        supplier,
        response_time,
        rates,
        lead_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CategoryId, RequestedItem, VesselId};
    use crate::presets::{self, reference_scenario};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const A: SupplierId = SupplierId(0);
    const B: SupplierId = SupplierId(1);
    const C: SupplierId = SupplierId(2);
    const P1: ProductId = ProductId(0);

    fn noiseless() -> SpotModel {
        let mut m = reference_scenario().spot;
        m.noise_sd = 0.0;
        m
    }

    #[test]
    fn contract_lookup_respects_validity() {
        let s = reference_scenario();
        let book = ContractBook::new(&s.contracts);
        let terms = book.lookup(presets::contract_product(A), A, 30.0).unwrap();
        assert_eq!(terms.rate, 11.0);
        assert_eq!(book.lookup(presets::contract_product(A), A, 182.0).unwrap().rate, 11.0);
        assert_eq!(book.lookup(presets::contract_product(A), A, 182.5), None);
        assert_eq!(book.lookup(presets::contract_product(A), A, 200.0), None);
        assert_eq!(book.lookup(presets::contract_product(C), C, 364.0).unwrap().rate, 12.0);
        assert_eq!(ContractBook::new(&[]).lookup(P1, A, 10.0), None);
    }

    #[test]
    fn degenerate_model_returns_baseline() {
        let mut m = noiseless();
        for p in &mut m.prices {
            p.amplitude = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(spot_rate(&m, P1, A, 123.4, &mut rng), 10.0);
        assert_eq!(spot_rate(&m, P1, C, 9.0, &mut rng), 12.0);
    }

    #[test]
    fn table_parameters() {
        let m = noiseless();
        let tau = m.period;
        assert!((spot_rate_with_noise(&m, P1, B, tau / 4.0, 0.0) - 7.0).abs() < 1e-12);
        assert!((spot_rate_with_noise(&m, P1, A, 0.0, 0.0) - 10.0).abs() < 1e-12);
        // product 2 supplier A (2, pi) at t = 0
        assert!((spot_rate_with_noise(&m, ProductId(1), A, 0.0, 0.0) - 8.0).abs() < 1e-12);
        let expected = 12.0 + 2.0 * (2.0 * PI / 3.0).cos();
        assert!((spot_rate_with_noise(&m, ProductId(2), C, 0.0, 0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn price_floor() {
        let m = reference_scenario().spot;
        assert_eq!(spot_rate_with_noise(&m, P1, A, 0.0, -50.0), SPOT_PRICE_FLOOR);
    }

    #[test]
    fn competition_values() {
        assert_eq!(competition_adjust(10.0, 0.0, 50), 10.0);
        assert!((competition_adjust(10.0, 0.01, 50) - 10.5).abs() < 1e-12);
        assert!((competition_adjust(10.0, 0.10, 50) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_quote_follows_seasonal_curve() {
        let s = reference_scenario();
        let m = noiseless();
        let req = Requisition {
            vessel: VesselId(0),
            category: CategoryId(0),
            created_at: 0.0,
            items: vec![
                RequestedItem {
                    product: ProductId(0),
                    quantity: None,
                },
                RequestedItem {
                    product: ProductId(1),
                    quantity: Some(7),
                },
                RequestedItem {
                    product: ProductId(2),
                    quantity: None,
                },
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = make_quote(&m, &s.catalog, &req, &[ProductId(1)], B, 3.0, 40.0, &mut rng);
        assert_eq!(q.rates.len(), 1);
        assert!((q.rate_for(ProductId(1)).unwrap() - m.seasonal(ProductId(1), B, 40.0)).abs() < 1e-12);
        assert_eq!(q.lead_time, 3.0);
    }

    #[test]
    fn quote_noise_is_keyed_per_product() {
        let s = reference_scenario();
        let req = Requisition {
            vessel: VesselId(0),
            category: CategoryId(0),
            created_at: 0.0,
            items: (0..3)
                .map(|p| RequestedItem {
                    product: ProductId(p),
                    quantity: Some(20),
                })
                .collect(),
        };
        let full = make_quote(
            &s.spot,
            &s.catalog,
            &req,
            &[ProductId(0), ProductId(1), ProductId(2)],
            A,
            3.0,
            50.0,
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        let part = make_quote(
            &s.spot,
            &s.catalog,
            &req,
            &[ProductId(2)],
            A,
            3.0,
            50.0,
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        assert_eq!(full.rate_for(ProductId(2)), part.rate_for(ProductId(2)));
        // frozen from the first verified run
        let golden: Vec<f64> = full.rates.iter().map(|&(_, r)| (r * 1e6).round() / 1e6).collect();
        assert_eq!(golden, vec![12.587505, 7.654169, 8.472651]);
    }

    #[test]
    fn spot_noise_is_unbiased() {
        let m = reference_scenario().spot;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let t = 77.0;
        let mean = (0..n).map(|_| spot_rate(&m, P1, B, t, &mut rng)).sum::<f64>() / n as f64;
        let target = m.seasonal(P1, B, t);
        assert!(
            (mean - target).abs() < 3.0 * m.noise_sd / (n as f64).sqrt(),
            "{mean} vs {target}"
        );
    }

    #[test]
    fn contract_exclusivity_in_reference_book() {
        let s = reference_scenario();
        for c in &s.contracts {
            for d in &s.contracts {
                if std::ptr::eq(c, d) || c.supplier != d.supplier {
                    continue;
                }
                let shared = c.rates.iter().any(|(p, _)| d.rate_for(*p).is_some());
                assert!(!(shared && c.validity.overlaps(&d.validity)));
            }
        }
    }

    proptest! {
        #[test]
        fn noiseless_prices_are_periodic(t in 0.0f64..365.0, p in 0u32..3, s in 0u32..3) {
            let m = noiseless();
            let a = spot_rate_with_noise(&m, ProductId(p), SupplierId(s), t, 0.0);
            let b = spot_rate_with_noise(&m, ProductId(p), SupplierId(s), t + m.period, 0.0);
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn surcharge_increases_with_quantity(rate in 0.01f64..50.0, slope in 1e-4f64..1.0, q in 1u32..10_000) {
            prop_assert!(competition_adjust(rate, slope, q + 1) > competition_adjust(rate, slope, q));
        }
    }
}
