//! Domain types shared by placement, billing and metering, plus the
//! period-income kernel every revenue line is built from.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;
use crate::rational::{format_exact, Rational};

pub const HOURS_PER_DAY: i128 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("hours per day must lie in [0, 24], got {0}")]
    HoursOutOfRange(String),
    #[error("{field} must lie in [0, 1], got {value}")]
    FractionOutOfRange { field: &'static str, value: String },
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("{0} must not be negative")]
    Negative(&'static str),
    #[error("tenant `{0}` must run at least one workload VM")]
    NoWorkloadVms(TenantId),
    #[error("tenant id must not be empty")]
    EmptyTenantId,
    #[error("duplicate tenant id `{0}`")]
    DuplicateTenant(TenantId),
}

/// Opaque tenant identifier. Ordering is used as the deterministic
/// tie-breaker wherever tenants compete.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TenantId(String);

impl TenantId {
    pub fn new(id: impl Into<String>) -> Self {
        TenantId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TenantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl From<&str> for TenantId {
    fn from(s: &str) -> Self {
        TenantId::new(s)
    }
}

/// How vswitch compartments are charged to tenants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VswitchBilling {
    /// Wall-clock share of a compartment's core.
    #[default]
    TimeSlice,
    /// Metered CPU cycles, prorated against a core's cycle capacity.
    CpuCycle,
}

impl VswitchBilling {
    pub fn label(self) -> &'static str {
        match self {
            VswitchBilling::TimeSlice => "time_slice",
            VswitchBilling::CpuCycle => "cpu_cycle",
        }
    }
}

impl FromStr for VswitchBilling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time_slice" => Ok(VswitchBilling::TimeSlice),
            "cpu_cycle" => Ok(VswitchBilling::CpuCycle),
            other => Err(format!(
                "unknown vswitch billing `{other}` (expected time_slice or cpu_cycle)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingModel {
    /// Rent charged per VM core-hour.
    pub vm_core_rate: Money,
    /// Operator cost per host core-hour.
    pub host_core_cost_rate: Money,
    /// One-time purchase price of a server.
    pub server_capital_cost: Money,
    /// Days in a billing period.
    pub period_days: u32,
    pub vswitch_billing: VswitchBilling,
}

impl Default for PricingModel {
    fn default() -> Self {
        PricingModel {
            vm_core_rate: Money::from_cents(1),
            host_core_cost_rate: Money::from_cents(1),
            server_capital_cost: Money::from_dollars(2_000),
            period_days: 365,
            vswitch_billing: VswitchBilling::TimeSlice,
        }
    }
}

impl PricingModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vm_core_rate <= Money::ZERO {
            return Err(ModelError::NotPositive("vm_core_rate"));
        }
        if self.period_days == 0 {
            return Err(ModelError::NotPositive("period_days"));
        }
        if self.host_core_cost_rate.is_negative() {
            return Err(ModelError::Negative("host_core_cost_rate"));
        }
        if self.server_capital_cost.is_negative() {
            return Err(ModelError::Negative("server_capital_cost"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NicSpec {
    pub pf_count: u32,
    /// Tenant vswitch VMs one physical function can attach.
    pub vswitch_vms_per_pf: u32,
}

impl Default for NicSpec {
    fn default() -> Self {
        NicSpec {
            pf_count: 1,
            vswitch_vms_per_pf: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub total_cores: u32,
    pub nic: NicSpec,
}

impl Default for ServerSpec {
    fn default() -> Self {
        ServerSpec {
            total_cores: 12,
            nic: NicSpec::default(),
        }
    }
}

impl ServerSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.total_cores == 0 {
            return Err(ModelError::NotPositive("total_cores"));
        }
        if self.nic.pf_count == 0 {
            return Err(ModelError::NotPositive("pf_count"));
        }
        if self.nic.vswitch_vms_per_pf == 0 {
            return Err(ModelError::NotPositive("vswitch_vms_per_pf"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantSpec {
    pub tenant_id: TenantId,
    /// Each workload VM occupies one core.
    pub workload_vm_count: u32,
    /// Share of one core the tenant's vswitch compartment uses.
    #[serde(with = "crate::rational::serde_exact")]
    pub vswitch_usage_fraction: Rational,
}

impl TenantSpec {
    pub fn new(id: impl Into<String>, workload_vm_count: u32, usage: Rational) -> Self {
        TenantSpec {
            tenant_id: TenantId::new(id),
            workload_vm_count,
            vswitch_usage_fraction: usage,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.tenant_id.as_str().is_empty() {
            return Err(ModelError::EmptyTenantId);
        }
        if self.workload_vm_count == 0 {
            return Err(ModelError::NoWorkloadVms(self.tenant_id.clone()));
        }
        check_fraction("vswitch_usage_fraction", &self.vswitch_usage_fraction)
    }
}

/// Tenant size in units of a two-VM "full tenant": a single-VM tenant
/// weighs 1/2.
pub fn tenant_weight(tenant: &TenantSpec) -> Rational {
    Ratio::new(i128::from(tenant.workload_vm_count), 2)
}

/// Where tenant vswitches run on a server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationPolicy {
    /// One multi-tenant vswitch co-located with the host on two host cores.
    Baseline,
    /// Option 1: a single core shared by all tenant vswitches.
    SharedVswitchCore,
    /// Option 2: each vswitch runs on its tenant's own cores.
    TenantSharedCores,
    /// Option 3: one dedicated core per tenant vswitch.
    DedicatedVswitchCores,
}

impl AllocationPolicy {
    pub const ALL: [AllocationPolicy; 4] = [
        AllocationPolicy::Baseline,
        AllocationPolicy::SharedVswitchCore,
        AllocationPolicy::TenantSharedCores,
        AllocationPolicy::DedicatedVswitchCores,
    ];

    /// Short label used in reports and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            AllocationPolicy::Baseline => "baseline",
            AllocationPolicy::SharedVswitchCore => "opt1",
            AllocationPolicy::TenantSharedCores => "opt2",
            AllocationPolicy::DedicatedVswitchCores => "opt3",
        }
    }

    /// Cores reserved for the hypervisor and management plane.
    pub fn host_cores(self) -> u32 {
        match self {
            AllocationPolicy::Baseline => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for AllocationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

impl FromStr for AllocationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "0" => Ok(AllocationPolicy::Baseline),
            "1" | "opt1" | "shared_vswitch_core" => Ok(AllocationPolicy::SharedVswitchCore),
            "2" | "opt2" | "tenant_shared_cores" => Ok(AllocationPolicy::TenantSharedCores),
            "3" | "opt3" | "dedicated_vswitch_cores" => Ok(AllocationPolicy::DedicatedVswitchCores),
            other => Err(format!(
                "unknown option `{other}` (expected baseline, 1, 2 or 3)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetScenario {
    pub server_count: u64,
    pub server_spec: ServerSpec,
    /// Tenants co-located on one server, used for per-tenant billing.
    pub tenants_per_server_template: Vec<TenantSpec>,
    pub pricing: PricingModel,
    /// Share of the time vswitch compartments are busy.
    #[serde(with = "crate::rational::serde_exact")]
    pub fleet_vswitch_utilization: Rational,
    pub fleet_vm_cap_per_server: Option<u64>,
    pub fleet_vm_cap_total: Option<u64>,
}

impl Default for FleetScenario {
    fn default() -> Self {
        FleetScenario {
            server_count: 0,
            server_spec: ServerSpec::default(),
            tenants_per_server_template: Vec::new(),
            pricing: PricingModel::default(),
            fleet_vswitch_utilization: Ratio::new(1, 2),
            fleet_vm_cap_per_server: None,
            fleet_vm_cap_total: None,
        }
    }
}

impl FleetScenario {
    /// 100 twelve-core servers at 1 cent per core-hour, vswitches busy half
    /// the time, six co-located tenants using 1, 2, 2, 5, 10 and 30 percent
    /// of a vswitch core.
    pub fn paper_defaults() -> Self {
        let tenants = [1, 2, 2, 5, 10, 30]
            .iter()
            .enumerate()
            .map(|(i, &pct)| TenantSpec::new(format!("t{}", i + 1), 2, Ratio::new(pct, 100)))
            .collect();
        FleetScenario {
            server_count: 100,
            tenants_per_server_template: tenants,
            ..FleetScenario::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.server_spec.validate()?;
        self.pricing.validate()?;
        check_fraction("fleet_vswitch_utilization", &self.fleet_vswitch_utilization)?;
        let mut seen = std::collections::BTreeSet::new();
        for tenant in &self.tenants_per_server_template {
            tenant.validate()?;
            if !seen.insert(&tenant.tenant_id) {
                return Err(ModelError::DuplicateTenant(tenant.tenant_id.clone()));
            }
        }
        Ok(())
    }
}

fn check_fraction(field: &'static str, value: &Rational) -> Result<(), ModelError> {
    if *value < Ratio::from_integer(0) || *value > Ratio::from_integer(1) {
        return Err(ModelError::FractionOutOfRange {
            field,
            value: format_exact(value),
        });
    }
    Ok(())
}

/// `rate × hours_per_day × unit_count × period_days` in exact milli-cents.
pub fn money_per_period_exact(
    rate: Money,
    hours_per_day: Rational,
    unit_count: u64,
    pricing: &PricingModel,
) -> Result<Rational, ModelError> {
    if hours_per_day < Ratio::from_integer(0) || hours_per_day > Ratio::from_integer(HOURS_PER_DAY)
    {
        return Err(ModelError::HoursOutOfRange(format_exact(&hours_per_day)));
    }
    Ok(rate.to_rational()
        * hours_per_day
        * Ratio::from_integer(i128::from(unit_count))
        * Ratio::from_integer(i128::from(pricing.period_days)))
}

/// Income (or expense) of `unit_count` cores billed at `rate` per core-hour
/// for `hours_per_day` hours over one pricing period.
pub fn money_per_period(
    rate: Money,
    hours_per_day: Rational,
    unit_count: u64,
    pricing: &PricingModel,
) -> Result<Money, ModelError> {
    money_per_period_exact(rate, hours_per_day, unit_count, pricing)
        .map(Money::from_rational_milli_cents)
}
