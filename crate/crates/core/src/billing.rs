//! Operator revenue, cross-option comparison and per-tenant vswitch bills.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metering::{common_grid, MeterRecord, MeteringError};
use crate::model::{
    money_per_period, AllocationPolicy, FleetScenario, ModelError, PricingModel, TenantId,
    VswitchBilling, HOURS_PER_DAY,
};
use crate::money::Money;
use crate::placement::{compute_displacement, DisplacementReport, PlacementError, ServerLayout};
use crate::rational::{format_exact, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BillingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Metering(#[from] MeteringError),
    #[error("usage of tenant `{tenant}` must lie in [0, 1], got {value}")]
    UsageOutOfRange { tenant: TenantId, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub policy: AllocationPolicy,
    pub layout: ServerLayout,
    pub displacement: DisplacementReport,
    pub workload_income: Money,
    pub vswitch_income: Money,
    pub total_income: Money,
    pub host_expense: Money,
    /// Income minus host expense; capital is reported on its own.
    pub net_revenue: Money,
    /// One-time purchase of displacement servers.
    pub capital_cost: Money,
    /// Existing fleet plus purchased servers.
    pub server_count_effective: u64,
}

/// Vswitch cores per server that earn time-based vswitch income.
fn billable_vswitch_cores(layout: &ServerLayout, billing: VswitchBilling) -> u64 {
    let has_vswitches = layout.vswitch_vm_count > 0;
    match layout.policy {
        AllocationPolicy::Baseline => 0,
        AllocationPolicy::SharedVswitchCore => u64::from(has_vswitches),
        AllocationPolicy::DedicatedVswitchCores => u64::from(layout.vswitch_dedicated_cores),
        // Vswitch cycles are carved out of cores the tenant already rents;
        // only cycle metering makes them visible, and together they add up
        // to one core-equivalent at the fleet utilization.
        AllocationPolicy::TenantSharedCores => match billing {
            VswitchBilling::TimeSlice => 0,
            VswitchBilling::CpuCycle => u64::from(has_vswitches),
        },
    }
}

fn full_day() -> Rational {
    Ratio::from_integer(HOURS_PER_DAY)
}

pub fn compute_operator_revenue(
    scenario: &FleetScenario,
    policy: AllocationPolicy,
) -> Result<RevenueReport, BillingError> {
    scenario.validate()?;
    let pricing = &scenario.pricing;
    let displacement = compute_displacement(scenario, policy)?;
    let layout = displacement.new_server_layout.clone();
    let servers = scenario.server_count + displacement.new_servers_needed;

    let workload_income = money_per_period(
        pricing.vm_core_rate,
        full_day(),
        u64::from(layout.workload_vm_count) * servers,
        pricing,
    )?;
    let vswitch_income = money_per_period(
        pricing.vm_core_rate,
        full_day() * scenario.fleet_vswitch_utilization,
        billable_vswitch_cores(&layout, pricing.vswitch_billing) * servers,
        pricing,
    )?;
    let host_expense = money_per_period(
        pricing.host_core_cost_rate,
        full_day(),
        u64::from(layout.host_cores) * servers,
        pricing,
    )?;
    let total_income = workload_income + vswitch_income;

    Ok(RevenueReport {
        policy,
        capital_cost: displacement.capital_cost,
        layout,
        displacement,
        workload_income,
        vswitch_income,
        total_income,
        host_expense,
        net_revenue: total_income - host_expense,
        server_count_effective: servers,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionOutcome {
    pub policy: AllocationPolicy,
    pub total_income: Money,
    pub host_expense: Money,
    pub net_revenue: Money,
    pub capital_cost: Money,
    /// `(net − baseline net) / baseline net × 100`; absent when the
    /// baseline earns nothing.
    #[serde(with = "crate::rational::serde_exact::option")]
    pub delta_vs_baseline_percent: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionComparison {
    pub baseline_net_revenue: Money,
    pub options: Vec<OptionOutcome>,
}

impl OptionComparison {
    pub fn get(&self, policy: AllocationPolicy) -> Option<&OptionOutcome> {
        self.options.iter().find(|o| o.policy == policy)
    }
}

/// Exact percentage change of `value` relative to `base`.
pub fn percent_delta(value: Money, base: Money) -> Option<Rational> {
    if base == Money::ZERO {
        return None;
    }
    Some(Ratio::new(
        (value - base).milli_cents() * 100,
        base.milli_cents(),
    ))
}

pub fn compare_options(scenario: &FleetScenario) -> Result<OptionComparison, BillingError> {
    let reports = AllocationPolicy::ALL
        .iter()
        .map(|&p| compute_operator_revenue(scenario, p))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = reports[0].net_revenue;
    Ok(OptionComparison {
        baseline_net_revenue: baseline,
        options: reports
            .iter()
            .map(|r| OptionOutcome {
                policy: r.policy,
                total_income: r.total_income,
                host_expense: r.host_expense,
                net_revenue: r.net_revenue,
                capital_cost: r.capital_cost,
                delta_vs_baseline_percent: percent_delta(r.net_revenue, baseline),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantBill {
    pub tenant_id: TenantId,
    pub vswitch_charge: Money,
    pub basis: VswitchBilling,
    #[serde(with = "crate::rational::serde_exact")]
    pub usage_fraction: Rational,
}

fn check_usage(tenant: &TenantId, usage: &Rational) -> Result<(), BillingError> {
    if *usage < Ratio::from_integer(0) || *usage > Ratio::from_integer(1) {
        return Err(BillingError::UsageOutOfRange {
            tenant: tenant.clone(),
            value: format_exact(usage),
        });
    }
    Ok(())
}

/// Core rent prorated by the share of a vswitch core the tenant used.
fn usage_charge(
    usage: Rational,
    residencies: u64,
    pricing: &PricingModel,
) -> Result<Money, BillingError> {
    Ok(money_per_period(
        pricing.vm_core_rate,
        full_day() * usage,
        residencies,
        pricing,
    )?)
}

/// Per-tenant vswitch charges for one pricing period.
///
/// `servers` counts the servers the tenant set resides on; each residency
/// is billed separately and summed. Baseline tenants are never charged for
/// the operator's vswitch, and Option 2 compartments only show up on a bill
/// under cycle metering.
pub fn compute_tenant_bills(
    usages: &[(TenantId, Rational)],
    pricing: &PricingModel,
    policy: AllocationPolicy,
    servers: u64,
) -> Result<Vec<TenantBill>, BillingError> {
    pricing.validate()?;
    let billable = match policy {
        AllocationPolicy::Baseline => false,
        AllocationPolicy::TenantSharedCores => pricing.vswitch_billing == VswitchBilling::CpuCycle,
        _ => true,
    };
    usages
        .iter()
        .map(|(tenant, usage)| {
            check_usage(tenant, usage)?;
            let charge = if billable {
                usage_charge(*usage, servers, pricing)?
            } else {
                Money::ZERO
            };
            Ok(TenantBill {
                tenant_id: tenant.clone(),
                vswitch_charge: charge,
                basis: pricing.vswitch_billing,
                usage_fraction: *usage,
            })
        })
        .collect()
}

/// Bills straight from metered cycles: each tenant pays core rent
/// prorated by its granted share of the core over the metered horizon.
pub fn bill_from_meters(
    meters: &[MeterRecord],
    pricing: &PricingModel,
) -> Result<Vec<TenantBill>, BillingError> {
    pricing.validate()?;
    common_grid(meters)?;
    meters
        .iter()
        .map(|m| {
            check_usage(&m.tenant_id, &m.usage_fraction)?;
            Ok(TenantBill {
                tenant_id: m.tenant_id.clone(),
                vswitch_charge: usage_charge(m.usage_fraction, 1, pricing)?,
                basis: pricing.vswitch_billing,
                usage_fraction: m.usage_fraction,
            })
        })
        .collect()
}
