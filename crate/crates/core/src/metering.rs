//! Time-slice metering of vswitch compartments.
//!
//! Each simulation step ("slice") hands out integer CPU cycles to the
//! compartments scheduled on a core, and every grant is recorded per tenant
//! so bills can be derived from measured consumption.

use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TenantId;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeteringError {
    #[error("no demand traces given")]
    NoTraces,
    #[error("trace `{tenant}` has {found} slices, expected {expected}")]
    LengthMismatch {
        tenant: TenantId,
        expected: usize,
        found: usize,
    },
    #[error("duplicate trace for tenant `{0}`")]
    DuplicateTenant(TenantId),
    #[error("core cycle capacity must be positive")]
    ZeroCapacity,
    #[error("meter records disagree on the slice grid: {0}")]
    InconsistentGrid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandTrace {
    pub tenant_id: TenantId,
    /// Cycles requested in each slice.
    pub demanded_cycles: Vec<u64>,
}

impl DemandTrace {
    pub fn new(tenant_id: impl Into<String>, demanded_cycles: Vec<u64>) -> Self {
        DemandTrace {
            tenant_id: TenantId::new(tenant_id),
            demanded_cycles,
        }
    }

    pub fn slices(&self) -> usize {
        self.demanded_cycles.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreModel {
    pub cycle_capacity_per_slice: u64,
    /// Cycles each compartment on the core burns per slice before doing
    /// useful work (port and buffer bookkeeping).
    pub per_compartment_overhead: u64,
}

impl CoreModel {
    pub fn new(cycle_capacity_per_slice: u64) -> Result<Self, MeteringError> {
        Self::with_overhead(cycle_capacity_per_slice, 0)
    }

    pub fn with_overhead(
        cycle_capacity_per_slice: u64,
        per_compartment_overhead: u64,
    ) -> Result<Self, MeteringError> {
        if cycle_capacity_per_slice == 0 {
            return Err(MeteringError::ZeroCapacity);
        }
        Ok(CoreModel {
            cycle_capacity_per_slice,
            per_compartment_overhead,
        })
    }

    /// Capacity left for useful work with `compartments` sharing the core.
    pub fn effective_capacity(&self, compartments: usize) -> u64 {
        let overhead = self
            .per_compartment_overhead
            .saturating_mul(compartments as u64);
        self.cycle_capacity_per_slice.saturating_sub(overhead)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterRecord {
    pub tenant_id: TenantId,
    pub granted_cycles: Vec<u64>,
    pub total_granted: u64,
    /// Nominal cycle capacity of one core per slice.
    pub capacity_per_slice: u64,
    /// `total_granted / (capacity_per_slice × slices)`; zero for an empty
    /// horizon.
    #[serde(with = "crate::rational::serde_exact")]
    pub usage_fraction: Rational,
}

impl MeterRecord {
    pub fn new(tenant_id: TenantId, granted_cycles: Vec<u64>, capacity_per_slice: u64) -> Self {
        let total: u64 = granted_cycles.iter().sum();
        let horizon = i128::from(capacity_per_slice) * granted_cycles.len() as i128;
        let usage = if horizon == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(i128::from(total), horizon)
        };
        MeterRecord {
            tenant_id,
            granted_cycles,
            total_granted: total,
            capacity_per_slice,
            usage_fraction: usage,
        }
    }

    pub fn slices(&self) -> usize {
        self.granted_cycles.len()
    }
}

/// Which compartment wins when a vswitch shares its tenant's core.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharePriority {
    /// Packet processing is served before application work.
    #[default]
    VswitchFirst,
    WorkloadFirst,
}

fn check_traces(traces: &[DemandTrace]) -> Result<usize, MeteringError> {
    let first = traces.first().ok_or(MeteringError::NoTraces)?;
    let expected = first.slices();
    let mut seen = BTreeSet::new();
    for t in traces {
        if t.slices() != expected {
            return Err(MeteringError::LengthMismatch {
                tenant: t.tenant_id.clone(),
                expected,
                found: t.slices(),
            });
        }
        if !seen.insert(&t.tenant_id) {
            return Err(MeteringError::DuplicateTenant(t.tenant_id.clone()));
        }
    }
    Ok(expected)
}

/// Integer max-min fair split of `capacity` over `demands`.
///
/// Demands that fit under the water level are served in full; the rest
/// share what remains equally. Cycles left over from the integer division
/// go one each to the unsaturated claimants with the lowest key, so the
/// result does not depend on the order the demands are listed in.
pub fn water_fill<K: Ord>(demands: &[(K, u64)], capacity: u64) -> Vec<u64> {
    let n = demands.len();
    if demands.iter().map(|&(_, d)| u128::from(d)).sum::<u128>() <= u128::from(capacity) {
        return demands.iter().map(|&(_, d)| d).collect();
    }

    let mut by_demand: Vec<usize> = (0..n).collect();
    by_demand.sort_by(|&a, &b| {
        demands[a]
            .1
            .cmp(&demands[b].1)
            .then(demands[a].0.cmp(&demands[b].0))
    });

    let mut grants = vec![0u64; n];
    let mut remaining = capacity;
    let mut open = n as u64;
    let mut cut = n;
    for (pos, &i) in by_demand.iter().enumerate() {
        let d = demands[i].1;
        if u128::from(d) * u128::from(open) <= u128::from(remaining) {
            grants[i] = d;
            remaining -= d;
            open -= 1;
        } else {
            cut = pos;
            break;
        }
    }

    let mut unsaturated: Vec<usize> = by_demand[cut..].to_vec();
    unsaturated.sort_by(|&a, &b| demands[a].0.cmp(&demands[b].0));
    let level = remaining / open;
    let extra = (remaining % open) as usize;
    for (rank, &i) in unsaturated.iter().enumerate() {
        grants[i] = level + u64::from(rank < extra);
    }
    grants
}

/// Option 1: every compartment is pinned to one shared core.
pub fn schedule_shared_core(
    traces: &[DemandTrace],
    core: &CoreModel,
) -> Result<Vec<MeterRecord>, MeteringError> {
    let slices = check_traces(traces)?;
    let capacity = core.effective_capacity(traces.len());

    let mut granted: Vec<Vec<u64>> = vec![Vec::with_capacity(slices); traces.len()];
    for slice in 0..slices {
        let demands: Vec<(&TenantId, u64)> = traces
            .iter()
            .map(|t| (&t.tenant_id, t.demanded_cycles[slice]))
            .collect();
        for (i, g) in water_fill(&demands, capacity).into_iter().enumerate() {
            granted[i].push(g);
        }
    }

    Ok(traces
        .iter()
        .zip(granted)
        .map(|(t, g)| MeterRecord::new(t.tenant_id.clone(), g, core.cycle_capacity_per_slice))
        .collect())
}

/// Option 3: each compartment owns a core, so tenants never contend.
pub fn schedule_dedicated_cores(
    traces: &[DemandTrace],
    core: &CoreModel,
) -> Result<Vec<MeterRecord>, MeteringError> {
    check_traces(traces)?;
    let capacity = core.effective_capacity(1);
    Ok(traces
        .iter()
        .map(|t| {
            let g = t.demanded_cycles.iter().map(|&d| d.min(capacity)).collect();
            MeterRecord::new(t.tenant_id.clone(), g, core.cycle_capacity_per_slice)
        })
        .collect())
}

/// Option 2: the vswitch compartment borrows cycles from its tenant's
/// workload core. Returns `(workload, vswitch)` records.
pub fn schedule_tenant_shared(
    workload_demand: &DemandTrace,
    vswitch_demand: &DemandTrace,
    core: &CoreModel,
    priority: SharePriority,
) -> Result<(MeterRecord, MeterRecord), MeteringError> {
    if workload_demand.slices() != vswitch_demand.slices() {
        return Err(MeteringError::LengthMismatch {
            tenant: vswitch_demand.tenant_id.clone(),
            expected: workload_demand.slices(),
            found: vswitch_demand.slices(),
        });
    }
    let capacity = core.effective_capacity(1);
    let (mut workload, mut vswitch) = (Vec::new(), Vec::new());
    for (&w, &v) in workload_demand
        .demanded_cycles
        .iter()
        .zip(&vswitch_demand.demanded_cycles)
    {
        let (wg, vg) = match priority {
            SharePriority::VswitchFirst => {
                let vg = v.min(capacity);
                (w.min(capacity - vg), vg)
            }
            SharePriority::WorkloadFirst => {
                let wg = w.min(capacity);
                (wg, v.min(capacity - wg))
            }
        };
        workload.push(wg);
        vswitch.push(vg);
    }
    let cap = core.cycle_capacity_per_slice;
    Ok((
        MeterRecord::new(workload_demand.tenant_id.clone(), workload, cap),
        MeterRecord::new(vswitch_demand.tenant_id.clone(), vswitch, cap),
    ))
}

/// Common `(capacity_per_slice, slices)` grid of a set of records.
pub fn common_grid(records: &[MeterRecord]) -> Result<Option<(u64, usize)>, MeteringError> {
    let Some(first) = records.first() else {
        return Ok(None);
    };
    let grid = (first.capacity_per_slice, first.slices());
    for r in records {
        if (r.capacity_per_slice, r.slices()) != grid {
            return Err(MeteringError::InconsistentGrid(format!(
                "`{}` has capacity {} over {} slices, `{}` has capacity {} over {} slices",
                first.tenant_id,
                grid.0,
                grid.1,
                r.tenant_id,
                r.capacity_per_slice,
                r.slices()
            )));
        }
    }
    Ok(Some(grid))
}

/// Per-tenant usage fractions, the input to usage-based bills.
pub fn derive_usage(records: &[MeterRecord]) -> Result<Vec<(TenantId, Rational)>, MeteringError> {
    common_grid(records)?;
    Ok(records
        .iter()
        .map(|r| (r.tenant_id.clone(), r.usage_fraction))
        .collect())
}
