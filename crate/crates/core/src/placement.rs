//! Per-server packing under each allocation policy, fleet displacement and
//! NIC / provider-cap feasibility checks.
//!
//! Packing is a deterministic greedy: host cores first, then the policy's
//! vswitch reservation, then full (two-VM) tenants, then at most one
//! single-VM tenant in whatever is left.

use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AllocationPolicy, FleetScenario, NicSpec, ServerSpec};
use crate::money::Money;
use crate::rational::{format_exact, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("{policy} needs at least {required} cores per server, server has {available}")]
    InsufficientCores {
        policy: AllocationPolicy,
        required: u32,
        available: u32,
    },
    #[error("{policy} hosts no tenants per server, {displaced} displaced tenant weight cannot be re-hosted")]
    Stranded {
        policy: AllocationPolicy,
        displaced: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerLayout {
    pub policy: AllocationPolicy,
    pub host_cores: u32,
    pub workload_vm_count: u32,
    pub vswitch_vm_count: u32,
    /// Cores running nothing but vswitch compartments (the shared core for
    /// Option 1, one per tenant for Option 3).
    pub vswitch_dedicated_cores: u32,
    pub full_tenants: u32,
    pub single_vm_tenants: u32,
    #[serde(with = "crate::rational::serde_exact")]
    pub tenant_weight_hosted: Rational,
}

impl ServerLayout {
    pub fn used_cores(&self) -> u32 {
        self.host_cores + self.workload_vm_count + self.vswitch_dedicated_cores
    }

    pub fn tenant_count(&self) -> u32 {
        self.full_tenants + self.single_vm_tenants
    }
}

/// Cores a policy reserves before any tenant is placed.
fn reserved_cores(policy: AllocationPolicy) -> u32 {
    match policy {
        AllocationPolicy::SharedVswitchCore => policy.host_cores() + 1,
        _ => policy.host_cores(),
    }
}

pub fn compute_layout(
    server: &ServerSpec,
    policy: AllocationPolicy,
) -> Result<ServerLayout, PlacementError> {
    let reserved = reserved_cores(policy);
    if server.total_cores < reserved {
        return Err(PlacementError::InsufficientCores {
            policy,
            required: reserved,
            available: server.total_cores,
        });
    }
    let free = server.total_cores - reserved;

    let (full, single) = match policy {
        // 2 workload cores + 1 vswitch core per full tenant, 1 + 1 for a
        // single-VM tenant.
        AllocationPolicy::DedicatedVswitchCores => (free / 3, u32::from(free % 3 >= 2)),
        _ => (free / 2, free % 2),
    };
    let tenants = full + single;
    let workload = 2 * full + single;
    let (vswitch_vms, vswitch_cores) = match policy {
        AllocationPolicy::Baseline => (0, 0),
        AllocationPolicy::SharedVswitchCore => (tenants, 1),
        AllocationPolicy::TenantSharedCores => (tenants, 0),
        AllocationPolicy::DedicatedVswitchCores => (tenants, tenants),
    };

    Ok(ServerLayout {
        policy,
        host_cores: policy.host_cores(),
        workload_vm_count: workload,
        vswitch_vm_count: vswitch_vms,
        vswitch_dedicated_cores: vswitch_cores,
        full_tenants: full,
        single_vm_tenants: single,
        tenant_weight_hosted: Ratio::from_integer(i128::from(full))
            + Ratio::new(i128::from(single), 2),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplacementReport {
    /// Tenant weight the policy no longer fits on the existing fleet.
    #[serde(with = "crate::rational::serde_exact")]
    pub displaced_weight: Rational,
    pub new_servers_needed: u64,
    pub capital_cost: Money,
    /// Layout of each purchased server; identical to the policy layout.
    pub new_server_layout: ServerLayout,
}

/// Weight lost per server against the baseline layout, summed over the
/// fleet, and the servers that must be bought to re-host it.
pub fn compute_displacement(
    scenario: &FleetScenario,
    policy: AllocationPolicy,
) -> Result<DisplacementReport, PlacementError> {
    let baseline = compute_layout(&scenario.server_spec, AllocationPolicy::Baseline)?;
    let layout = compute_layout(&scenario.server_spec, policy)?;

    let lost = baseline.tenant_weight_hosted - layout.tenant_weight_hosted;
    let displaced = if lost > Rational::zero() {
        lost * Ratio::from_integer(i128::from(scenario.server_count))
    } else {
        Rational::zero()
    };

    let new_servers = if displaced.is_zero() {
        0
    } else if layout.tenant_weight_hosted.is_zero() {
        return Err(PlacementError::Stranded {
            policy,
            displaced: format_exact(&displaced),
        });
    } else {
        (displaced / layout.tenant_weight_hosted)
            .ceil()
            .to_integer() as u64
    };

    Ok(DisplacementReport {
        displaced_weight: displaced,
        new_servers_needed: new_servers,
        capital_cost: scenario.pricing.server_capital_cost * i128::from(new_servers),
        new_server_layout: layout,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfFeasibility {
    pub feasible: bool,
    pub vswitch_vm_capacity: u64,
    pub min_pfs_required: u64,
}

/// Whether the NIC's physical functions expose enough virtual functions
/// for `vswitch_vm_count` tenant vswitch VMs.
pub fn check_vf_feasibility(nic: &NicSpec, vswitch_vm_count: u64) -> VfFeasibility {
    let per_pf = u64::from(nic.vswitch_vms_per_pf);
    let capacity = u64::from(nic.pf_count) * per_pf;
    VfFeasibility {
        feasible: vswitch_vm_count <= capacity,
        vswitch_vm_capacity: capacity,
        min_pfs_required: vswitch_vm_count.div_ceil(per_pf),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapViolation {
    PerServer { cap: u64, vms: u64 },
    FleetTotal { cap: u64, vms: u64 },
}

impl fmt::Display for CapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapViolation::PerServer { cap, vms } => {
                write!(f, "{vms} VMs per server exceeds the cap of {cap}")
            }
            CapViolation::FleetTotal { cap, vms } => {
                write!(f, "{vms} VMs across the fleet exceeds the cap of {cap}")
            }
        }
    }
}

/// Compares tenant workload VM counts against the provider's caps.
pub fn check_fleet_caps(scenario: &FleetScenario, layout: &ServerLayout) -> Vec<CapViolation> {
    let per_server = u64::from(layout.workload_vm_count);
    let total = per_server * scenario.server_count;
    let mut violations = Vec::new();
    if let Some(cap) = scenario.fleet_vm_cap_per_server {
        if per_server > cap {
            violations.push(CapViolation::PerServer {
                cap,
                vms: per_server,
            });
        }
    }
    if let Some(cap) = scenario.fleet_vm_cap_total {
        if total > cap {
            violations.push(CapViolation::FleetTotal { cap, vms: total });
        }
    }
    violations
}
