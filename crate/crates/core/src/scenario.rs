//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! utilization_percent = 50
//!
//! [pricing]
//! vm_core_rate_cents_per_hour = 1
//! host_core_cost_cents_per_hour = 1
//! server_capital_cost_dollars = 2000
//! period_days = 365
//! vswitch_billing = "time_slice"
//!
//! [fleet]
//! server_count = 100
//! cores_per_server = 12
//! pf_count = 1
//! vswitch_vms_per_pf = 21
//! # vm_cap_per_server = 60
//! # vm_cap_total = 700
//!
//! [[tenants]]
//! id = "t1"
//! workload_vms = 2
//! vswitch_usage_percent = 1
//! ```
//!
//! Only `fleet.server_count` is required. Numbers may be written as TOML
//! integers, floats or strings (`"12.5"`, `"1/3"`); all of them are read as
//! exact rationals, floats via their shortest decimal spelling.

use std::fmt;
use std::num::NonZeroU32;
use std::path::Path;

use num_rational::Ratio;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::model::{FleetScenario, NicSpec, PricingModel, ServerSpec, TenantSpec, VswitchBilling};
use crate::money::Money;
use crate::rational::{format_exact, parse_rational, Rational};

/// Scenarios shipped with the binary, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "paper-defaults",
        include_str!("../scenarios/paper-defaults.toml"),
    ),
    ("empty-fleet", include_str!("../scenarios/empty-fleet.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("no scenario file or bundled scenario named `{0}`")]
    NotFound(String),
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: line {line}: `{key}`: {message}")]
    Invalid {
        origin: String,
        key: String,
        line: usize,
        message: String,
    },
}

/// An exact number as written in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Exact(Rational);

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExactVisitor;

        impl Visitor<'_> for ExactVisitor {
            type Value = Exact;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a decimal/fraction string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exact, E> {
                Ok(Exact(Ratio::from_integer(i128::from(v))))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exact, E> {
                Ok(Exact(Ratio::from_integer(i128::from(v))))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exact, E> {
                if !v.is_finite() {
                    return Err(E::custom("number must be finite"));
                }
                // `{}` prints the shortest decimal that reads back as `v`,
                // i.e. what the author wrote.
                self.visit_str(&format!("{v}"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exact, E> {
                parse_rational(v).map(Exact).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ExactVisitor)
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Ok(v) = i64::try_from(self.0.to_integer()) {
                return serializer.serialize_i64(v);
            }
        }
        serializer.collect_str(&format_exact(&self.0))
    }
}

macro_rules! bounded_number {
    ($name:ident, $check:expr, $what:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
        #[serde(transparent)]
        struct $name(Exact);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let v = Exact::deserialize(deserializer)?;
                let check: fn(&Rational) -> bool = $check;
                if !check(&v.0) {
                    return Err(de::Error::custom(format!(
                        concat!($what, ", got {}"),
                        format_exact(&v.0)
                    )));
                }
                Ok($name(v))
            }
        }
    };
}

bounded_number!(
    Percent,
    |v| *v >= Ratio::from_integer(0) && *v <= Ratio::from_integer(100),
    "percentage must lie in [0, 100]"
);
bounded_number!(
    Positive,
    |v| *v > Ratio::from_integer(0),
    "value must be positive"
);
bounded_number!(
    NonNegative,
    |v| *v >= Ratio::from_integer(0),
    "value must not be negative"
);

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default = "default_utilization")]
    utilization_percent: Percent,
    #[serde(default)]
    pricing: RawPricing,
    fleet: RawFleet,
    #[serde(default)]
    tenants: Vec<RawTenant>,
}

fn default_utilization() -> Percent {
    Percent(Exact(Ratio::from_integer(50)))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPricing {
    #[serde(default = "one")]
    vm_core_rate_cents_per_hour: toml::Spanned<Positive>,
    #[serde(default = "one_nn")]
    host_core_cost_cents_per_hour: toml::Spanned<NonNegative>,
    #[serde(default = "two_thousand")]
    server_capital_cost_dollars: toml::Spanned<NonNegative>,
    #[serde(default = "default_days")]
    period_days: NonZeroU32,
    #[serde(default)]
    vswitch_billing: VswitchBilling,
}

fn unspanned<T>(value: T) -> toml::Spanned<T> {
    toml::Spanned::new(0..0, value)
}

fn one() -> toml::Spanned<Positive> {
    unspanned(Positive(Exact(Ratio::from_integer(1))))
}

fn one_nn() -> toml::Spanned<NonNegative> {
    unspanned(NonNegative(Exact(Ratio::from_integer(1))))
}

fn two_thousand() -> toml::Spanned<NonNegative> {
    unspanned(NonNegative(Exact(Ratio::from_integer(2000))))
}

fn default_days() -> NonZeroU32 {
    NonZeroU32::new(365).unwrap()
}

impl Default for RawPricing {
    fn default() -> Self {
        RawPricing {
            vm_core_rate_cents_per_hour: one(),
            host_core_cost_cents_per_hour: one_nn(),
            server_capital_cost_dollars: two_thousand(),
            period_days: default_days(),
            vswitch_billing: VswitchBilling::default(),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawFleet {
    server_count: u64,
    #[serde(default = "default_cores")]
    cores_per_server: NonZeroU32,
    #[serde(default = "default_pfs")]
    pf_count: NonZeroU32,
    #[serde(default = "default_vfs")]
    vswitch_vms_per_pf: NonZeroU32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vm_cap_per_server: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vm_cap_total: Option<u64>,
}

fn default_cores() -> NonZeroU32 {
    NonZeroU32::new(12).unwrap()
}

fn default_pfs() -> NonZeroU32 {
    NonZeroU32::new(1).unwrap()
}

fn default_vfs() -> NonZeroU32 {
    NonZeroU32::new(21).unwrap()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawTenant {
    id: toml::Spanned<String>,
    #[serde(default = "default_vms")]
    workload_vms: NonZeroU32,
    vswitch_usage_percent: Percent,
}

fn default_vms() -> NonZeroU32 {
    NonZeroU32::new(2).unwrap()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn hundredth(p: Percent) -> Rational {
    p.0 .0 / Ratio::from_integer(100)
}

/// Parses scenario text; `origin` names the source in error messages.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<FleetScenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        origin: origin.to_string(),
        message: e.to_string().trim_end().to_string(),
    })?;

    let invalid =
        |key: &str, span: std::ops::Range<usize>, message: String| ScenarioError::Invalid {
            origin: origin.to_string(),
            key: key.to_string(),
            line: line_of(text, span.start),
            message,
        };
    let cents = |key: &str, v: &toml::Spanned<Rational>| {
        Money::try_from_cents(*v.get_ref()).map_err(|e| invalid(key, v.span(), e.to_string()))
    };

    let p = &raw.pricing;
    let vm_rate = toml::Spanned::new(
        p.vm_core_rate_cents_per_hour.span(),
        p.vm_core_rate_cents_per_hour.get_ref().0 .0,
    );
    let host_rate = toml::Spanned::new(
        p.host_core_cost_cents_per_hour.span(),
        p.host_core_cost_cents_per_hour.get_ref().0 .0,
    );
    let capital = &p.server_capital_cost_dollars;
    let pricing = PricingModel {
        vm_core_rate: cents("pricing.vm_core_rate_cents_per_hour", &vm_rate)?,
        host_core_cost_rate: cents("pricing.host_core_cost_cents_per_hour", &host_rate)?,
        server_capital_cost: Money::try_from_dollars(capital.get_ref().0 .0).map_err(|e| {
            invalid(
                "pricing.server_capital_cost_dollars",
                capital.span(),
                e.to_string(),
            )
        })?,
        period_days: p.period_days.get(),
        vswitch_billing: p.vswitch_billing,
    };

    let mut tenants: Vec<TenantSpec> = Vec::with_capacity(raw.tenants.len());
    for t in &raw.tenants {
        let id = t.id.get_ref();
        if id.is_empty() {
            return Err(invalid(
                "tenants.id",
                t.id.span(),
                "tenant id must not be empty".into(),
            ));
        }
        if tenants.iter().any(|seen| seen.tenant_id.as_str() == id) {
            return Err(invalid(
                "tenants.id",
                t.id.span(),
                format!("duplicate tenant id `{id}`"),
            ));
        }
        tenants.push(TenantSpec::new(
            id.clone(),
            t.workload_vms.get(),
            hundredth(t.vswitch_usage_percent),
        ));
    }

    let f = &raw.fleet;
    let scenario = FleetScenario {
        server_count: f.server_count,
        server_spec: ServerSpec {
            total_cores: f.cores_per_server.get(),
            nic: NicSpec {
                pf_count: f.pf_count.get(),
                vswitch_vms_per_pf: f.vswitch_vms_per_pf.get(),
            },
        },
        tenants_per_server_template: tenants,
        pricing,
        fleet_vswitch_utilization: hundredth(raw.utilization_percent),
        fleet_vm_cap_per_server: f.vm_cap_per_server,
        fleet_vm_cap_total: f.vm_cap_total,
    };
    scenario.validate().map_err(|e| ScenarioError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    Ok(scenario)
}

/// Reads a scenario file.
pub fn parse_scenario(path: &Path) -> Result<FleetScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text, &path.display().to_string())
}

/// Resolves `name_or_path` to a file if one exists, else to a bundled
/// scenario of that name.
pub fn load_scenario(name_or_path: &str) -> Result<FleetScenario, ScenarioError> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        return parse_scenario(path);
    }
    match BUNDLED.iter().find(|(name, _)| *name == name_or_path) {
        Some((name, text)) => parse_scenario_str(text, name),
        None => Err(ScenarioError::NotFound(name_or_path.to_string())),
    }
}

/// Writes a scenario back out in the file format.
pub fn scenario_to_toml(scenario: &FleetScenario) -> String {
    let hundred = Ratio::from_integer(100);
    let nz = |v: u32| NonZeroU32::new(v).unwrap_or(NonZeroU32::MIN);
    let p = &scenario.pricing;
    let raw = RawScenario {
        utilization_percent: Percent(Exact(scenario.fleet_vswitch_utilization * hundred)),
        pricing: RawPricing {
            vm_core_rate_cents_per_hour: unspanned(Positive(Exact(p.vm_core_rate.to_cents()))),
            host_core_cost_cents_per_hour: unspanned(NonNegative(Exact(
                p.host_core_cost_rate.to_cents(),
            ))),
            server_capital_cost_dollars: unspanned(NonNegative(Exact(
                p.server_capital_cost.to_dollars(),
            ))),
            period_days: nz(p.period_days),
            vswitch_billing: p.vswitch_billing,
        },
        fleet: RawFleet {
            server_count: scenario.server_count,
            cores_per_server: nz(scenario.server_spec.total_cores),
            pf_count: nz(scenario.server_spec.nic.pf_count),
            vswitch_vms_per_pf: nz(scenario.server_spec.nic.vswitch_vms_per_pf),
            vm_cap_per_server: scenario.fleet_vm_cap_per_server,
            vm_cap_total: scenario.fleet_vm_cap_total,
        },
        tenants: scenario
            .tenants_per_server_template
            .iter()
            .map(|t| RawTenant {
                id: unspanned(t.tenant_id.as_str().to_string()),
                workload_vms: nz(t.workload_vm_count),
                vswitch_usage_percent: Percent(Exact(t.vswitch_usage_fraction * hundred)),
            })
            .collect(),
    };
    toml::to_string(&raw).expect("scenario serializes to TOML")
}
