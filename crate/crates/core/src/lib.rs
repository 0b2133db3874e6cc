//! Economics of tenant-specific virtual switches.
//!
//! Places tenants and vswitch compartments on servers under the three
//! core-allocation options (plus the co-located baseline), meters vswitch
//! CPU consumption slice by slice, and turns both into operator revenue
//! reports and per-tenant bills. All money is exact.

pub mod billing;
pub mod metering;
pub mod model;
pub mod money;
pub mod placement;
pub mod rational;
pub mod report;
pub mod scenario;
pub mod trace;

pub use billing::{
    bill_from_meters, compare_options, compute_operator_revenue, compute_tenant_bills,
    BillingError, OptionComparison, OptionOutcome, RevenueReport, TenantBill,
};
pub use metering::{
    derive_usage, schedule_dedicated_cores, schedule_shared_core, schedule_tenant_shared,
    CoreModel, DemandTrace, MeterRecord, MeteringError, SharePriority,
};
pub use model::{
    money_per_period, tenant_weight, AllocationPolicy, FleetScenario, ModelError, NicSpec,
    PricingModel, ServerSpec, TenantId, TenantSpec, VswitchBilling,
};
pub use money::Money;
pub use placement::{
    check_fleet_caps, check_vf_feasibility, compute_displacement, compute_layout, CapViolation,
    DisplacementReport, PlacementError, ServerLayout, VfFeasibility,
};
pub use rational::Rational;
