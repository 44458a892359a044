//! Versioned JSON scenario format.
//!
//! Entities are referenced by string id in the file and resolved to dense
//! indices on load. See `docs/scenario-schema.md` for the field reference.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rto_sim_core::{
    validate_scenario, Baseline, Catalog, Category, CategoryId, CompetitionBasis, Contract, DelayConfig, EngineConfig,
    HazardSpec, PeriodicCovariate, PolicyConfig, PolicyKind, Product, ProductId, Scenario, SpotModel, SpotPrice,
    Supplier, SupplierId, ValidationError, Validity, Vessel,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("unsupported schema version {found} (this build reads version {SCHEMA_VERSION})")]
    UnsupportedSchema { found: String },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{path}: unknown {kind} id `{id}`")]
    UnknownId {
        path: String,
        kind: &'static str,
        id: String,
    },
    #[error("{path}: duplicate id `{id}`")]
    DuplicateId { path: String, id: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    /// Simulation end in days.
    pub horizon: f64,
    pub suppliers: Vec<SupplierEntry>,
    pub catalog: CatalogEntry,
    pub fleet: Vec<VesselEntry>,
    #[serde(default)]
    pub contracts: Vec<ContractEntry>,
    pub spot: SpotEntry,
    #[serde(default)]
    pub policy: PolicyEntry,
    #[serde(default)]
    pub delays: DelaysEntry,
    #[serde(default)]
    pub engine: EngineEntry,
    #[serde(default)]
    pub runs: RunsEntry,
    #[serde(default)]
    pub output: OutputEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplierEntry {
    pub id: String,
    #[serde(default = "yes")]
    pub spot: bool,
    #[serde(default = "default_spot_lead_time")]
    pub spot_lead_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub products: Vec<ProductEntry>,
    pub categories: Vec<CategoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductEntry {
    pub id: String,
    #[serde(default)]
    pub family: String,
    pub baseline_stock: u32,
    pub depletion_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryEntry {
    pub id: String,
    pub products: Vec<String>,
    pub eligible_suppliers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselEntry {
    pub id: String,
    pub demand: Vec<DemandEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub category: String,
    pub baseline: BaselineEntry,
    #[serde(default)]
    pub covariates: Vec<CovariateEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineEntry {
    Constant { rate: f64 },
    Weibull { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateEntry {
    #[serde(default = "one")]
    pub amplitude: f64,
    pub period: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractEntry {
    pub supplier: String,
    pub rates: Vec<RateEntry>,
    #[serde(default)]
    pub lead_time: f64,
    /// `[start, end)` in days.
    pub validity: [f64; 2],
    pub commitment: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub product: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotEntry {
    pub period: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
    #[serde(default)]
    pub competition_slope: f64,
    #[serde(default)]
    pub competition_basis: BasisEntry,
    pub prices: Vec<SpotPriceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisEntry {
    #[default]
    PerItem,
    PerSupplierTotal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotPriceEntry {
    pub product: String,
    pub supplier: String,
    pub baseline: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Naive,
    Dynamic,
}

impl From<PolicyName> for PolicyKind {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::Naive => PolicyKind::Naive,
            PolicyName::Dynamic => PolicyKind::Dynamic,
        }
    }
}

impl From<PolicyKind> for PolicyName {
    fn from(p: PolicyKind) -> Self {
        match p {
            PolicyKind::Naive => PolicyName::Naive,
            PolicyKind::Dynamic => PolicyName::Dynamic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    #[serde(default)]
    pub kind: PolicyName,
    #[serde(default = "default_overhead")]
    pub po_overhead: f64,
}

impl Default for PolicyEntry {
    fn default() -> Self {
        Self {
            kind: PolicyName::Naive,
            po_overhead: default_overhead(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaysEntry {
    pub creation_to_approval: f64,
    pub approval_to_handling: f64,
    pub rfq_response: f64,
    /// Per-supplier response means, by supplier id.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rfq_response_overrides: Vec<DelayOverride>,
    pub handling_to_po: f64,
}

impl Default for DelaysEntry {
    fn default() -> Self {
        let d = DelayConfig::default();
        Self {
            creation_to_approval: d.creation_to_approval,
            approval_to_handling: d.approval_to_handling,
            rfq_response: d.rfq_response,
            rfq_response_overrides: Vec::new(),
            handling_to_po: d.handling_to_po,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayOverride {
    pub supplier: String,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineEntry {
    pub thinning_window_fraction: f64,
}

impl Default for EngineEntry {
    fn default() -> Self {
        Self {
            thinning_window_fraction: EngineConfig::default().thinning_window_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunsEntry {
    pub count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; all available cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
}

impl Default for RunsEntry {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: None,
            parallelism: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    pub histogram_bins: usize,
    pub export_events: bool,
}

impl Default for OutputEntry {
    fn default() -> Self {
        Self {
            directory: None,
            histogram_bins: rto_sim_core::metrics::DEFAULT_HISTOGRAM_BINS,
            export_events: false,
        }
    }
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_spot_lead_time() -> f64 {
    3.0
}

fn default_overhead() -> f64 {
    rto_sim_core::policy::DEFAULT_PO_OVERHEAD
}

/// A loaded scenario plus the batch settings stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub runs: RunsEntry,
    pub output: OutputEntry,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<LoadedScenario, LoadError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LoadError::Syntax(e.to_string()))?;
    match value.get("schema_version") {
        Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => {}
        Some(v) => return Err(LoadError::UnsupportedSchema { found: v.to_string() }),
        None => {
            return Err(LoadError::Field {
                path: ".".into(),
                message: "missing field `schema_version`".into(),
            })
        }
    }
    let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        LoadError::Field {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    file.resolve()
}

struct Ids<'a> {
    kind: &'static str,
    map: HashMap<&'a str, u32>,
}

impl<'a> Ids<'a> {
    fn new(kind: &'static str, ids: impl Iterator<Item = &'a str>, path: &str) -> Result<Self, LoadError> {
        let mut map = HashMap::new();
        for (i, id) in ids.enumerate() {
            if map.insert(id, i as u32).is_some() {
                return Err(LoadError::DuplicateId {
                    path: format!("{path}[{i}]"),
                    id: id.to_string(),
                });
            }
        }
        Ok(Self { kind, map })
    }

    fn get(&self, id: &str, path: impl Into<String>) -> Result<u32, LoadError> {
        self.map.get(id).copied().ok_or_else(|| LoadError::UnknownId {
            path: path.into(),
            kind: self.kind,
            id: id.to_string(),
        })
    }
}

impl ScenarioFile {
    /// Resolves ids and validates the result.
    pub fn resolve(&self) -> Result<LoadedScenario, LoadError> {
        let suppliers = Ids::new("supplier", self.suppliers.iter().map(|s| s.id.as_str()), "suppliers")?;
        let products = Ids::new(
            "product",
            self.catalog.products.iter().map(|p| p.id.as_str()),
            "catalog.products",
        )?;
        let categories = Ids::new(
            "category",
            self.catalog.categories.iter().map(|c| c.id.as_str()),
            "catalog.categories",
        )?;
        Ids::new("vessel", self.fleet.iter().map(|v| v.id.as_str()), "fleet")?;

        let mut cats = Vec::new();
        for (c, cat) in self.catalog.categories.iter().enumerate() {
            let path = format!("catalog.categories[{c}]");
            cats.push(Category {
                name: cat.id.clone(),
                products: cat
                    .products
                    .iter()
                    .enumerate()
                    .map(|(k, p)| products.get(p, format!("{path}.products[{k}]")).map(ProductId))
                    .collect::<Result<_, _>>()?,
                eligible_suppliers: cat
                    .eligible_suppliers
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        suppliers
                            .get(s, format!("{path}.eligible_suppliers[{k}]"))
                            .map(SupplierId)
                    })
                    .collect::<Result<_, _>>()?,
            });
        }

        let mut vessels = Vec::new();
        for (v, vessel) in self.fleet.iter().enumerate() {
            let mut demand = Vec::new();
            for (k, d) in vessel.demand.iter().enumerate() {
                let cat = categories.get(&d.category, format!("fleet[{v}].demand[{k}].category"))?;
                let baseline = match d.baseline {
                    BaselineEntry::Constant { rate } => Baseline::Constant { rate },
                    BaselineEntry::Weibull { shape, scale } => Baseline::Weibull { shape, scale },
                };
                let covariates = d
                    .covariates
                    .iter()
                    .map(|c| PeriodicCovariate {
                        amplitude: c.amplitude,
                        period: c.period,
                        phase: c.phase,
                        coefficient: c.coefficient,
                    })
                    .collect();
                demand.push((CategoryId(cat), HazardSpec { baseline, covariates }));
            }
            vessels.push(Vessel {
                name: vessel.id.clone(),
                demand,
            });
        }

        let mut contracts = Vec::new();
        for (c, contract) in self.contracts.iter().enumerate() {
            let path = format!("contracts[{c}]");
            contracts.push(Contract {
                supplier: SupplierId(suppliers.get(&contract.supplier, format!("{path}.supplier"))?),
                rates: contract
                    .rates
                    .iter()
                    .enumerate()
                    .map(|(k, r)| {
                        products
                            .get(&r.product, format!("{path}.rates[{k}].product"))
                            .map(|p| (ProductId(p), r.rate))
                    })
                    .collect::<Result<_, _>>()?,
                lead_time: contract.lead_time,
                validity: Validity {
                    start: contract.validity[0],
                    end: contract.validity[1],
                },
                commitment: contract.commitment,
            });
        }

        let mut prices = Vec::new();
        for (i, p) in self.spot.prices.iter().enumerate() {
            let path = format!("spot.prices[{i}]");
            prices.push(SpotPrice {
                product: ProductId(products.get(&p.product, format!("{path}.product"))?),
                supplier: SupplierId(suppliers.get(&p.supplier, format!("{path}.supplier"))?),
                baseline: p.baseline,
                amplitude: p.amplitude,
                phase: p.phase,
            });
        }

        let rfq_response_overrides = self
            .delays
            .rfq_response_overrides
            .iter()
            .enumerate()
            .map(|(k, o)| {
                suppliers
                    .get(&o.supplier, format!("delays.rfq_response_overrides[{k}].supplier"))
                    .map(|s| (SupplierId(s), o.mean))
            })
            .collect::<Result<_, _>>()?;

        let scenario = Scenario {
            horizon: self.horizon,
            suppliers: self
                .suppliers
                .iter()
                .map(|s| Supplier {
                    name: s.id.clone(),
                    spot: s.spot,
                    spot_lead_time: s.spot_lead_time,
                })
                .collect(),
            catalog: Catalog {
                products: self
                    .catalog
                    .products
                    .iter()
                    .map(|p| Product {
                        name: p.id.clone(),
                        family: p.family.clone(),
                        baseline_stock: p.baseline_stock,
                        depletion_rate: p.depletion_rate,
                    })
                    .collect(),
                categories: cats,
            },
            vessels,
            contracts,
            spot: SpotModel {
                period: self.spot.period,
                noise_sd: self.spot.noise_sd,
                competition_slope: self.spot.competition_slope,
                competition_basis: match self.spot.competition_basis {
                    BasisEntry::PerItem => CompetitionBasis::PerItem,
                    BasisEntry::PerSupplierTotal => CompetitionBasis::PerSupplierTotal,
                },
                prices,
            },
            policy: PolicyConfig {
                kind: self.policy.kind.into(),
                po_overhead: self.policy.po_overhead,
            },
            delays: DelayConfig {
                creation_to_approval: self.delays.creation_to_approval,
                approval_to_handling: self.delays.approval_to_handling,
                rfq_response: self.delays.rfq_response,
                rfq_response_overrides,
                handling_to_po: self.delays.handling_to_po,
            },
            engine: EngineConfig {
                thinning_window_fraction: self.engine.thinning_window_fraction,
            },
        };
        if self.runs.count == 0 {
            return Err(LoadError::Field {
                path: "runs.count".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.output.histogram_bins == 0 {
            return Err(LoadError::Field {
                path: "output.histogram_bins".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(LoadedScenario {
            scenario: validate_scenario(scenario)?,
            runs: self.runs.clone(),
            output: self.output.clone(),
        })
    }

    /// File form of an in-memory scenario.
    pub fn from_scenario(s: &Scenario, runs: RunsEntry, output: OutputEntry) -> Self {
        let supplier = |id: SupplierId| s.suppliers[id.index()].name.clone();
        let product = |id: ProductId| s.catalog.product(id).name.clone();
        Self {
            schema_version: SCHEMA_VERSION,
            horizon: s.horizon,
            suppliers: s
                .suppliers
                .iter()
                .map(|x| SupplierEntry {
                    id: x.name.clone(),
                    spot: x.spot,
                    spot_lead_time: x.spot_lead_time,
                })
                .collect(),
            catalog: CatalogEntry {
                products: s
                    .catalog
                    .products
                    .iter()
                    .map(|p| ProductEntry {
                        id: p.name.clone(),
                        family: p.family.clone(),
                        baseline_stock: p.baseline_stock,
                        depletion_rate: p.depletion_rate,
                    })
                    .collect(),
                categories: s
                    .catalog
                    .categories
                    .iter()
                    .map(|c| CategoryEntry {
                        id: c.name.clone(),
                        products: c.products.iter().map(|&p| product(p)).collect(),
                        eligible_suppliers: c.eligible_suppliers.iter().map(|&x| supplier(x)).collect(),
                    })
                    .collect(),
            },
            fleet: s
                .vessels
                .iter()
                .map(|v| VesselEntry {
                    id: v.name.clone(),
                    demand: v
                        .demand
                        .iter()
                        .map(|(c, spec)| DemandEntry {
                            category: s.catalog.category(*c).name.clone(),
                            baseline: match spec.baseline {
                                Baseline::Constant { rate } => BaselineEntry::Constant { rate },
                                Baseline::Weibull { shape, scale } => BaselineEntry::Weibull { shape, scale },
                            },
                            covariates: spec
                                .covariates
                                .iter()
                                .map(|c| CovariateEntry {
                                    amplitude: c.amplitude,
                                    period: c.period,
                                    phase: c.phase,
                                    coefficient: c.coefficient,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            contracts: s
                .contracts
                .iter()
                .map(|c| ContractEntry {
                    supplier: supplier(c.supplier),
                    rates: c
                        .rates
                        .iter()
                        .map(|&(p, rate)| RateEntry {
                            product: product(p),
                            rate,
                        })
                        .collect(),
                    lead_time: c.lead_time,
                    validity: [c.validity.start, c.validity.end],
                    commitment: c.commitment,
                })
                .collect(),
            spot: SpotEntry {
                period: s.spot.period,
                noise_sd: s.spot.noise_sd,
                competition_slope: s.spot.competition_slope,
                competition_basis: match s.spot.competition_basis {
                    CompetitionBasis::PerItem => BasisEntry::PerItem,
                    CompetitionBasis::PerSupplierTotal => BasisEntry::PerSupplierTotal,
                },
                prices: s
                    .spot
                    .prices
                    .iter()
                    .map(|p| SpotPriceEntry {
                        product: product(p.product),
                        supplier: supplier(p.supplier),
                        baseline: p.baseline,
                        amplitude: p.amplitude,
                        phase: p.phase,
                    })
                    .collect(),
            },
            policy: PolicyEntry {
                kind: s.policy.kind.into(),
                po_overhead: s.policy.po_overhead,
            },
            delays: DelaysEntry {
                creation_to_approval: s.delays.creation_to_approval,
                approval_to_handling: s.delays.approval_to_handling,
                rfq_response: s.delays.rfq_response,
                rfq_response_overrides: s
                    .delays
                    .rfq_response_overrides
                    .iter()
                    .map(|&(x, mean)| DelayOverride {
                        supplier: supplier(x),
                        mean,
                    })
                    .collect(),
                handling_to_po: s.delays.handling_to_po,
            },
            engine: EngineEntry {
                thinning_window_fraction: s.engine.thinning_window_fraction,
            },
            runs,
            output,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rto_sim_core::presets::reference_scenario;

    fn reference_json() -> serde_json::Value {
        serde_json::to_value(ScenarioFile::from_scenario(
            &reference_scenario(),
            RunsEntry::default(),
            OutputEntry::default(),
        ))
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let text = reference_json().to_string();
        assert_eq!(parse_scenario(&text).unwrap().scenario, reference_scenario());
    }

    #[test]
    fn missing_horizon_is_named() {
        let mut v = reference_json();
        v.as_object_mut().unwrap().remove("horizon");
        let err = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
    }

    #[test]
    fn future_schema_is_rejected() {
        let mut v = reference_json();
        v["schema_version"] = 2.into();
        let err = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("unsupported schema"), "{err}");
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let mut v = reference_json();
        let obj = v.as_object_mut().unwrap();
        for key in ["policy", "delays", "engine", "runs", "output"] {
            obj.remove(key);
        }
        v["spot"].as_object_mut().unwrap().remove("noise_sd");
        let loaded = parse_scenario(&v.to_string()).unwrap();
        assert_eq!(loaded.scenario, reference_scenario());
        assert_eq!(loaded.output.histogram_bins, 100);
        assert_eq!(loaded.runs.count, 1000);
    }

    #[test]
    fn unknown_reference_is_reported_with_path() {
        let mut v = reference_json();
        v["contracts"][1]["supplier"] = "Z".into();
        let err = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert_eq!(err, "contracts[1].supplier: unknown supplier id `Z`");
    }

    #[test]
    fn domain_errors_are_forwarded() {
        let mut v = reference_json();
        v["contracts"][0]["validity"] = serde_json::json!([10.0, 10.0]);
        let err = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(err.starts_with("contracts[0].validity"), "{err}");
    }

    #[test]
    fn type_errors_carry_field_path() {
        let mut v = reference_json();
        v["catalog"]["products"][2]["baseline_stock"] = "many".into();
        let err = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(err.starts_with("catalog.products[2].baseline_stock"), "{err}");
    }
}
