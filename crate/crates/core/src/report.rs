//! Report documents and their JSON / CSV / aligned-table renderings.
//!
//! Money is always written as an exact dollar decimal string and fractions
//! as exact decimals or `p/q`, so the machine formats read back losslessly.

use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::billing::{OptionComparison, RevenueReport, TenantBill};
use crate::metering::MeterRecord;
use crate::model::{AllocationPolicy, FleetScenario, VswitchBilling};
use crate::money::Money;
use crate::placement::{
    check_fleet_caps, check_vf_feasibility, compute_layout, CapViolation, ServerLayout,
    VfFeasibility,
};
use crate::rational::{format_exact, format_rounded, is_terminating, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Table,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            other => Err(format!(
                "unknown format `{other}` (expected json, csv or table)"
            )),
        }
    }
}

/// A report that can be rendered in every output format.
pub trait Tabular: Serialize {
    fn title(&self) -> String;
    fn columns(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;

    /// Rows for the comma-separated output; must be lossless.
    fn machine_rows(&self) -> Vec<Vec<String>> {
        self.rows()
    }
}

pub fn render<R: Tabular>(report: &R, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(report.columns()).expect("in-memory write");
            for row in report.machine_rows() {
                w.write_record(&row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
        }
        Format::Table => {
            let mut out = report.title();
            out.push('\n');
            out.push_str(&align(&report.columns(), &report.rows()));
            out
        }
    }
}

/// Aligned columns: first column left-aligned, the rest right-aligned.
fn align(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                s.push_str(&format!("{cell:<w$}"));
            } else {
                s.push_str(&format!("  {cell:>w$}"));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(columns.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// `+18.75%`, `0%`, `-3%`; non-terminating values are rounded and marked.
pub fn format_percent_delta(delta: &Rational) -> String {
    let sign = if *delta > Ratio::from_integer(0) {
        "+"
    } else {
        ""
    };
    if is_terminating(delta) {
        format!("{sign}{}%", format_exact(delta))
    } else {
        format!("~{sign}{}%", format_rounded(delta, 4))
    }
}

impl Tabular for RevenueReport {
    fn title(&self) -> String {
        format!(
            "Operator revenue, {} (dollars per period)",
            self.policy.label()
        )
    }

    fn columns(&self) -> Vec<&'static str> {
        vec!["field", "value"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let l = &self.layout;
        let d = &self.displacement;
        [
            ("option", self.policy.label().to_string()),
            ("host_cores_per_server", l.host_cores.to_string()),
            ("workload_vms_per_server", l.workload_vm_count.to_string()),
            ("vswitch_vms_per_server", l.vswitch_vm_count.to_string()),
            (
                "vswitch_cores_per_server",
                l.vswitch_dedicated_cores.to_string(),
            ),
            (
                "tenant_weight_per_server",
                format_exact(&l.tenant_weight_hosted),
            ),
            ("displaced_weight", format_exact(&d.displaced_weight)),
            ("new_servers", d.new_servers_needed.to_string()),
            ("servers_effective", self.server_count_effective.to_string()),
            ("workload_income", self.workload_income.to_string()),
            ("vswitch_income", self.vswitch_income.to_string()),
            ("total_income", self.total_income.to_string()),
            ("host_expense", self.host_expense.to_string()),
            ("net_revenue", self.net_revenue.to_string()),
            ("capital_cost", self.capital_cost.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v])
        .collect()
    }
}

impl Tabular for OptionComparison {
    fn title(&self) -> String {
        "Option comparison (dollars per period, capital excluded from net)".to_string()
    }

    fn columns(&self) -> Vec<&'static str> {
        vec![
            "option",
            "total_income",
            "host_expense",
            "net_revenue",
            "capital_cost",
            "delta_vs_baseline",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.comparison_rows(format_percent_delta)
    }

    fn machine_rows(&self) -> Vec<Vec<String>> {
        self.comparison_rows(format_exact)
    }
}

impl OptionComparison {
    fn comparison_rows(&self, delta: impl Fn(&Rational) -> String) -> Vec<Vec<String>> {
        self.options
            .iter()
            .map(|o| {
                vec![
                    o.policy.label().to_string(),
                    o.total_income.to_string(),
                    o.host_expense.to_string(),
                    o.net_revenue.to_string(),
                    o.capital_cost.to_string(),
                    o.delta_vs_baseline_percent
                        .as_ref()
                        .map_or_else(|| "n/a".to_string(), &delta),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillReport {
    pub policy: AllocationPolicy,
    pub basis: VswitchBilling,
    pub servers: u64,
    pub bills: Vec<TenantBill>,
    pub total: Money,
}

impl BillReport {
    pub fn new(
        policy: AllocationPolicy,
        basis: VswitchBilling,
        servers: u64,
        bills: Vec<TenantBill>,
    ) -> Self {
        let total = bills.iter().map(|b| b.vswitch_charge).sum();
        BillReport {
            policy,
            basis,
            servers,
            bills,
            total,
        }
    }
}

impl Tabular for BillReport {
    fn title(&self) -> String {
        format!(
            "Tenant vswitch bills, {} billed by {} over {} server(s) (dollars per period, total {})",
            self.policy.label(),
            self.basis.label(),
            self.servers,
            self.total
        )
    }

    fn columns(&self) -> Vec<&'static str> {
        vec!["tenant", "usage_fraction", "basis", "vswitch_charge"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.bills
            .iter()
            .map(|b| {
                vec![
                    b.tenant_id.to_string(),
                    format_exact(&b.usage_fraction),
                    b.basis.label().to_string(),
                    b.vswitch_charge.to_string(),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterReport {
    pub policy: AllocationPolicy,
    pub capacity_per_slice: u64,
    pub per_compartment_overhead: u64,
    pub slices: usize,
    pub meters: Vec<MeterRecord>,
    /// Workload grants on tenant-shared cores; not billed as vswitch use.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub workload_meters: Vec<MeterRecord>,
    pub bills: Vec<TenantBill>,
}

impl Tabular for MeterReport {
    fn title(&self) -> String {
        format!(
            "Metered vswitch usage, {} ({} slices at {} cycles, overhead {} per compartment)",
            self.policy.label(),
            self.slices,
            self.capacity_per_slice,
            self.per_compartment_overhead
        )
    }

    fn columns(&self) -> Vec<&'static str> {
        vec![
            "tenant",
            "compartment",
            "granted_cycles",
            "usage_fraction",
            "vswitch_charge",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let vswitch = self.meters.iter().zip(&self.bills).map(|(m, b)| {
            vec![
                m.tenant_id.to_string(),
                "vswitch".to_string(),
                m.total_granted.to_string(),
                format_exact(&m.usage_fraction),
                b.vswitch_charge.to_string(),
            ]
        });
        let workload = self.workload_meters.iter().map(|m| {
            vec![
                m.tenant_id.to_string(),
                "workload".to_string(),
                m.total_granted.to_string(),
                format_exact(&m.usage_fraction),
                String::new(),
            ]
        });
        vswitch.chain(workload).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub policy: AllocationPolicy,
    pub layout: Option<ServerLayout>,
    /// Why no layout exists, when it does not.
    pub layout_error: Option<String>,
    pub vf: Option<VfFeasibility>,
    pub cap_violations: Vec<CapViolation>,
    pub feasible: bool,
}

impl CheckEntry {
    /// Every constraint this entry violates, as human-readable text.
    pub fn problems(&self, nic_per_pf: u32) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(e) = &self.layout_error {
            out.push(e.clone());
        }
        if let (Some(vf), Some(l)) = (&self.vf, &self.layout) {
            if !vf.feasible {
                out.push(format!(
                    "{} vswitch VMs per server exceed the NIC's {} virtual functions ({} per PF, need {} PFs)",
                    l.vswitch_vm_count, vf.vswitch_vm_capacity, nic_per_pf, vf.min_pfs_required
                ));
            }
        }
        out.extend(self.cap_violations.iter().map(ToString::to_string));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub vswitch_vms_per_pf: u32,
    pub pf_count: u32,
    pub entries: Vec<CheckEntry>,
    pub feasible: bool,
}

/// Layout, NIC virtual-function and provider-cap checks for `policies`.
pub fn check_scenario(scenario: &FleetScenario, policies: &[AllocationPolicy]) -> CheckReport {
    let nic = scenario.server_spec.nic;
    let entries: Vec<CheckEntry> = policies
        .iter()
        .map(
            |&policy| match compute_layout(&scenario.server_spec, policy) {
                Ok(layout) => {
                    let vf = check_vf_feasibility(&nic, u64::from(layout.vswitch_vm_count));
                    let caps = check_fleet_caps(scenario, &layout);
                    CheckEntry {
                        policy,
                        feasible: vf.feasible && caps.is_empty(),
                        layout: Some(layout),
                        layout_error: None,
                        vf: Some(vf),
                        cap_violations: caps,
                    }
                }
                Err(e) => CheckEntry {
                    policy,
                    layout: None,
                    layout_error: Some(e.to_string()),
                    vf: None,
                    cap_violations: Vec::new(),
                    feasible: false,
                },
            },
        )
        .collect();
    CheckReport {
        vswitch_vms_per_pf: nic.vswitch_vms_per_pf,
        pf_count: nic.pf_count,
        feasible: entries.iter().all(|e| e.feasible),
        entries,
    }
}

impl CheckReport {
    pub fn problems(&self) -> Vec<String> {
        self.entries
            .iter()
            .flat_map(|e| {
                e.problems(self.vswitch_vms_per_pf)
                    .into_iter()
                    .map(move |p| format!("{}: {p}", e.policy.label()))
            })
            .collect()
    }
}

impl Tabular for CheckReport {
    fn title(&self) -> String {
        format!(
            "Feasibility ({} PF x {} vswitch VMs per PF)",
            self.pf_count, self.vswitch_vms_per_pf
        )
    }

    fn columns(&self) -> Vec<&'static str> {
        vec![
            "option",
            "workload_vms",
            "vswitch_vms",
            "vf_capacity",
            "min_pfs",
            "cap_violations",
            "feasible",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                let dash = || "-".to_string();
                vec![
                    e.policy.label().to_string(),
                    e.layout
                        .as_ref()
                        .map_or_else(dash, |l| l.workload_vm_count.to_string()),
                    e.layout
                        .as_ref()
                        .map_or_else(dash, |l| l.vswitch_vm_count.to_string()),
                    e.vf.map_or_else(dash, |v| v.vswitch_vm_capacity.to_string()),
                    e.vf.map_or_else(dash, |v| v.min_pfs_required.to_string()),
                    e.cap_violations.len().to_string(),
                    if e.feasible { "yes" } else { "no" }.to_string(),
                ]
            })
            .collect()
    }
}
