//! `vswitch-econ`: fleet economics of tenant-specific virtual switches.
//!
//! Exit status: 0 on success, 2 for invalid input (bad flags, malformed
//! scenario or trace files), 3 when a layout or NIC/cap constraint cannot be
//! satisfied.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vswitch_econ::billing::{
    bill_from_meters, compare_options, compute_operator_revenue, compute_tenant_bills, BillingError,
};
use vswitch_econ::metering::{
    schedule_dedicated_cores, schedule_shared_core, schedule_tenant_shared, CoreModel, DemandTrace,
    MeteringError, SharePriority,
};
use vswitch_econ::model::{AllocationPolicy, FleetScenario};
use vswitch_econ::report::{check_scenario, render, BillReport, Format, MeterReport};
use vswitch_econ::scenario::load_scenario;
use vswitch_econ::trace::{parse_traces, TraceSet};

#[derive(Debug, Parser)]
#[command(
    name = "vswitch-econ",
    version,
    about = "Placement, metering and billing for tenant-specific virtual switches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Operator revenue for one allocation option.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_policy)]
        option: AllocationPolicy,
    },
    /// Net revenue of every option against the baseline.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Per-tenant vswitch bills from the scenario's tenant usages.
    Bill {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_policy)]
        option: AllocationPolicy,
        /// Servers the tenant set resides on.
        #[arg(long, default_value_t = 1)]
        servers: u64,
    },
    /// Schedule demand traces on cores and bill the metered cycles.
    Meter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        option: AllocationPolicy,
        /// Cycles each compartment burns per slice.
        #[arg(long, default_value_t = 0)]
        overhead: u64,
        /// Winner when a vswitch shares its tenant's core (option 2).
        #[arg(long, value_enum, default_value_t = Priority::VswitchFirst)]
        priority: Priority,
    },
    /// NIC virtual-function and provider VM-cap feasibility.
    Check {
        #[command(flatten)]
        common: Common,
        /// Check one option instead of all four.
        #[arg(long, value_parser = parse_policy)]
        option: Option<AllocationPolicy>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file, or the name of a bundled scenario
    /// (`paper-defaults`, `empty-fleet`).
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Table,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Table => Format::Table,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Priority {
    VswitchFirst,
    WorkloadFirst,
}

fn parse_policy(s: &str) -> Result<AllocationPolicy, String> {
    s.parse()
}

enum Failure {
    Invalid(String),
    Infeasible(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }
}

impl From<BillingError> for Failure {
    fn from(e: BillingError) -> Self {
        match e {
            BillingError::Placement(_) => Failure::Infeasible(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<MeteringError> for Failure {
    fn from(e: MeteringError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn scenario(common: &Common) -> Result<FleetScenario, Failure> {
    load_scenario(&common.scenario).map_err(|e| Failure::Invalid(e.to_string()))
}

struct Output {
    stdout: String,
    /// Set when the report was produced but describes a violated constraint.
    infeasible: Option<String>,
}

impl From<String> for Output {
    fn from(stdout: String) -> Self {
        Output {
            stdout,
            infeasible: None,
        }
    }
}

fn run(command: Command) -> Result<Output, Failure> {
    match command {
        Command::Simulate { common, option } => {
            let report = compute_operator_revenue(&scenario(&common)?, option)?;
            Ok(render(&report, common.format.into()).into())
        }
        Command::Compare { common } => {
            let report = compare_options(&scenario(&common)?)?;
            Ok(render(&report, common.format.into()).into())
        }
        Command::Bill {
            common,
            option,
            servers,
        } => {
            let s = scenario(&common)?;
            let usages: Vec<_> = s
                .tenants_per_server_template
                .iter()
                .map(|t| (t.tenant_id.clone(), t.vswitch_usage_fraction))
                .collect();
            let bills = compute_tenant_bills(&usages, &s.pricing, option, servers)?;
            let report = BillReport::new(option, s.pricing.vswitch_billing, servers, bills);
            Ok(render(&report, common.format.into()).into())
        }
        Command::Meter {
            common,
            traces,
            option,
            overhead,
            priority,
        } => {
            let s = scenario(&common)?;
            let set = parse_traces(&traces)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", traces.display())))?;
            let priority = match priority {
                Priority::VswitchFirst => SharePriority::VswitchFirst,
                Priority::WorkloadFirst => SharePriority::WorkloadFirst,
            };
            let report = meter(&s, &set, option, overhead, priority)?;
            Ok(render(&report, common.format.into()).into())
        }
        Command::Check { common, option } => {
            let s = scenario(&common)?;
            let policies = option.map_or_else(|| AllocationPolicy::ALL.to_vec(), |p| vec![p]);
            let report = check_scenario(&s, &policies);
            let problems = report.problems();
            Ok(Output {
                stdout: render(&report, common.format.into()),
                infeasible: (!problems.is_empty()).then(|| problems.join("\n")),
            })
        }
    }
}

fn meter(
    scenario: &FleetScenario,
    set: &TraceSet,
    policy: AllocationPolicy,
    overhead: u64,
    priority: SharePriority,
) -> Result<MeterReport, Failure> {
    let core = CoreModel::with_overhead(set.capacity_per_slice, overhead)?;
    let (vswitch, workload) = set.split_workloads();
    if !workload.is_empty() && policy != AllocationPolicy::TenantSharedCores {
        return Err(Failure::Invalid(
            "workload columns only apply to option 2 (tenant-shared cores)".into(),
        ));
    }
    let vswitch: Vec<DemandTrace> = vswitch.into_iter().cloned().collect();

    let (meters, workload_meters) = match policy {
        AllocationPolicy::Baseline => {
            return Err(Failure::Invalid(
                "the baseline runs one operator vswitch in the host; there are no tenant compartments to meter".into(),
            ))
        }
        AllocationPolicy::SharedVswitchCore => (schedule_shared_core(&vswitch, &core)?, Vec::new()),
        AllocationPolicy::DedicatedVswitchCores => {
            (schedule_dedicated_cores(&vswitch, &core)?, Vec::new())
        }
        AllocationPolicy::TenantSharedCores => {
            let mut meters = Vec::new();
            let mut workloads = Vec::new();
            for v in &vswitch {
                let name = format!("{}/workload", v.tenant_id);
                let w = set.workload_for(v.tenant_id.as_str()).cloned().unwrap_or_else(|| {
                    DemandTrace::new(name, vec![0; v.slices()])
                });
                let (wm, vm) = schedule_tenant_shared(&w, v, &core, priority)?;
                workloads.push(wm);
                meters.push(vm);
            }
            (meters, workloads)
        }
    };
    let bills = bill_from_meters(&meters, &scenario.pricing)?;
    Ok(MeterReport {
        policy,
        capacity_per_slice: set.capacity_per_slice,
        per_compartment_overhead: overhead,
        slices: vswitch.first().map_or(0, DemandTrace::slices),
        meters,
        workload_meters,
        bills,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            match out.infeasible {
                Some(why) => {
                    eprintln!("infeasible:\n{why}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            let code = f.exit_code();
            match f {
                Failure::Invalid(msg) => eprintln!("error: {msg}"),
                Failure::Infeasible(msg) => eprintln!("infeasible: {msg}"),
            }
            ExitCode::from(code)
        }
    }
}
