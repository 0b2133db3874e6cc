//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;

use vswitch_econ::metering::{
    schedule_dedicated_cores, schedule_shared_core, schedule_tenant_shared, CoreModel, DemandTrace,
    SharePriority,
};
use vswitch_econ::model::NicSpec;
use vswitch_econ::placement::check_vf_feasibility;

type Q = Ratio<i128>;

const BIN: &str = env!("CARGO_BIN_EXE_vswitch-econ");

fn cli(args: &[&str]) -> Result<(Vec<u8>, Duration), String> {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok((out.stdout, elapsed))
}

fn cli_json(args: &[&str]) -> Result<(Value, Duration), String> {
    let mut args = args.to_vec();
    args.extend(["--format", "json"]);
    let (stdout, elapsed) = cli(&args)?;
    let v = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
    Ok((v, elapsed))
}

/// Exact value of a decimal string such as "112741.2" or "-0.125".
fn dec(s: &str) -> Result<Q, String> {
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let scale = 10i128.pow(frac.len() as u32);
    let n: i128 = format!("{int}{frac}")
        .parse()
        .map_err(|_| format!("not a decimal: {s:?}"))?;
    let q = Q::new(n, scale);
    Ok(if neg { -q } else { q })
}

fn field(v: &Value, path: &[&str]) -> Result<Q, String> {
    let mut cur = v;
    for key in path {
        cur = &cur[*key];
    }
    match cur {
        Value::String(s) => dec(s),
        Value::Number(n) => dec(&n.to_string()),
        other => Err(format!("{path:?} is {other}")),
    }
}

fn expect_eq(what: &str, got: Q, want: Q) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

fn simulate(option: &str) -> Result<(Value, Duration), String> {
    cli_json(&[
        "simulate",
        "--scenario",
        "paper-defaults",
        "--option",
        option,
    ])
}

fn criterion_1() -> Result<String, String> {
    let (v, elapsed) = simulate("baseline")?;
    expect_eq("income", field(&v, &["total_income"])?, Q::from(87_600))?;
    expect_eq("expense", field(&v, &["host_expense"])?, Q::from(17_520))?;
    expect_eq("net", field(&v, &["net_revenue"])?, Q::from(70_080))?;
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("net 70080 in {} ms", elapsed.as_millis()))
}

fn criterion_2() -> Result<String, String> {
    let (v, _) = simulate("1")?;
    expect_eq(
        "vswitch income",
        field(&v, &["vswitch_income"])?,
        Q::from(4_380),
    )?;
    expect_eq("expense", field(&v, &["host_expense"])?, Q::from(8_760))?;
    expect_eq(
        "net",
        field(&v, &["net_revenue"])?,
        Q::from(4_380 + 87_600 - 8_760),
    )?;
    Ok("net 83220".into())
}

fn criterion_3() -> Result<String, String> {
    let (v, _) = simulate("2")?;
    expect_eq("net", field(&v, &["net_revenue"])?, Q::from(96_360 - 8_760))?;
    expect_eq(
        "workload VMs",
        field(&v, &["layout", "workload_vm_count"])?,
        Q::from(11),
    )?;
    Ok("net 87600, 11 workload VMs/server".into())
}

fn criterion_4() -> Result<String, String> {
    let (v, _) = simulate("3")?;
    expect_eq("income", field(&v, &["total_income"])?, dec("112741.2")?)?;
    expect_eq("expense", field(&v, &["host_expense"])?, dec("12526.8")?)?;
    expect_eq("net", field(&v, &["net_revenue"])?, dec("100214.4")?)?;
    expect_eq(
        "displaced weight",
        field(&v, &["displacement", "displaced_weight"])?,
        Q::from(150),
    )?;
    expect_eq(
        "new servers",
        field(&v, &["displacement", "new_servers_needed"])?,
        Q::from(43),
    )?;
    expect_eq("capital", field(&v, &["capital_cost"])?, Q::from(86_000))?;
    Ok("net 100214.4, 150 displaced, 43 servers, capital 86000".into())
}

fn criterion_5() -> Result<String, String> {
    let (v, _) = cli_json(&["compare", "--scenario", "paper-defaults"])?;
    let base = Q::from(70_080);
    let expected = [
        ("shared_vswitch_core", Q::from(83_220), Q::new(1875, 100)),
        ("tenant_shared_cores", Q::from(87_600), Q::from(25)),
        ("dedicated_vswitch_cores", dec("100214.4")?, Q::from(43)),
    ];
    let options = v["options"].as_array().ok_or("no options array")?;
    for (policy, net, percent) in expected {
        // Independent check that the literal target is the true delta.
        expect_eq(policy, (net - base) / base * Q::from(100), percent)?;
        let row = options
            .iter()
            .find(|o| o["policy"] == policy)
            .ok_or(format!("missing {policy}"))?;
        expect_eq(policy, field(row, &["delta_vs_baseline_percent"])?, percent)?;
    }
    Ok("+18.75%, +25%, +43%".into())
}

fn criterion_6() -> Result<String, String> {
    let (v, _) = cli_json(&["bill", "--scenario", "paper-defaults", "--option", "1"])?;
    let bills = v["bills"].as_array().ok_or("no bills")?;
    let charge = |id: &str| -> Result<Q, String> {
        let b = bills
            .iter()
            .find(|b| b["tenant_id"] == id)
            .ok_or(format!("no bill for {id}"))?;
        field(b, &["vswitch_charge"])
    };
    let ten = charge("t5")?;
    let thirty = charge("t6")?;
    expect_eq("10% vs 30% bill", ten * Q::from(3), thirty)?;
    let sum = bills
        .iter()
        .map(|b| field(b, &["vswitch_charge"]))
        .sum::<Result<Q, String>>()?;
    let (sim, _) = simulate("1")?;
    let per_server = field(&sim, &["vswitch_income"])? / field(&sim, &["server_count_effective"])?;
    expect_eq("bill sum vs per-server vswitch income", sum, per_server)?;
    Ok(format!(
        "3 x t5 = t6 exactly, bills sum to {sum} per server"
    ))
}

fn criterion_7() -> Result<String, String> {
    let one_pf = NicSpec {
        pf_count: 1,
        vswitch_vms_per_pf: 21,
    };
    let f21 = check_vf_feasibility(&one_pf, 21);
    let f22 = check_vf_feasibility(&one_pf, 22);
    let f72 = check_vf_feasibility(&one_pf, 72);
    let four_pf = NicSpec {
        pf_count: 4,
        vswitch_vms_per_pf: 21,
    };
    let three_pf = NicSpec {
        pf_count: 3,
        vswitch_vms_per_pf: 21,
    };
    let ok = f21.feasible
        && f21.min_pfs_required == 1
        && !f22.feasible
        && f72.min_pfs_required == 4
        && check_vf_feasibility(&four_pf, 72).feasible
        && !check_vf_feasibility(&three_pf, 72).feasible;
    if ok {
        Ok("21 fit 1 PF, 22 rejected, 72 need 4 PFs".into())
    } else {
        Err(format!("21: {f21:?}, 22: {f22:?}, 72: {f72:?}"))
    }
}

// Scheduler oracles.

/// Leximin-optimal split found by enumerating every feasible grant vector.
/// Returns the optimum's grants sorted ascending (the multiset is unique).
fn brute_force_leximin(demands: &[u64], capacity: u64) -> Vec<u64> {
    fn walk(d: &[u64], left: u64, depth: usize, cur: &mut [u64; 4], best: &mut [u64; 4]) {
        let n = d.len();
        if depth == n {
            let mut sorted = *cur;
            sorted[..n].sort_unstable();
            if sorted[..n] > best[..n] {
                *best = sorted;
            }
            return;
        }
        for g in 0..=d[depth].min(left) {
            cur[depth] = g;
            walk(d, left - g, depth + 1, cur, best);
        }
    }
    let mut best = [0; 4];
    walk(demands, capacity, 0, &mut [0; 4], &mut best);
    best[..demands.len()].to_vec()
}

/// Progressive filling: hand out one cycle at a time to the unsatisfied
/// tenant holding the fewest, earliest tenant first on ties.
fn progressive_fill(demands: &[u64], capacity: u64) -> Vec<u64> {
    let mut g = vec![0u64; demands.len()];
    for _ in 0..capacity {
        let next = (0..demands.len())
            .filter(|&i| g[i] < demands[i])
            .min_by_key(|&i| (g[i], i));
        match next {
            Some(i) => g[i] += 1,
            None => break,
        }
    }
    g
}

fn tenant_name(i: usize) -> String {
    format!("tenant-{i}")
}

fn shared(demands: &[Vec<u64>], capacity: u64) -> Vec<Vec<u64>> {
    let traces: Vec<DemandTrace> = demands
        .iter()
        .enumerate()
        .map(|(i, d)| DemandTrace::new(tenant_name(i), d.clone()))
        .collect();
    let core = CoreModel::new(capacity).unwrap();
    schedule_shared_core(&traces, &core)
        .unwrap()
        .into_iter()
        .map(|m| m.granted_cycles)
        .collect()
}

/// Every demand vector over `n` tenants with entries in `0..=max`.
fn all_vectors(n: usize, max: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=max).map(move |x| {
                    let mut v = v.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

fn oracle_sweep() -> Result<u64, String> {
    let mut checked = 0u64;
    for capacity in 1..=20u64 {
        for n in 1..=4usize {
            // Demands above the capacity behave like the capacity itself.
            for demands in all_vectors(n, capacity) {
                let columns: Vec<Vec<u64>> = demands.iter().map(|&d| vec![d]).collect();
                let got: Vec<u64> = shared(&columns, capacity).iter().map(|g| g[0]).collect();
                let want = progressive_fill(&demands, capacity);
                if got != want {
                    return Err(format!(
                        "capacity {capacity}, demands {demands:?}: got {got:?}, progressive fill {want:?}"
                    ));
                }
                // The enumeration is the costly part; run it where it stays cheap.
                if n <= 3 || capacity <= 8 {
                    let mut sorted = got.clone();
                    sorted.sort_unstable();
                    let best = brute_force_leximin(&demands, capacity);
                    if sorted != best {
                        return Err(format!(
                            "capacity {capacity}, demands {demands:?}: got {got:?}, leximin {best:?}"
                        ));
                    }
                }
                checked += 1;
            }
        }
    }
    // Multi-slice traces are scheduled slice by slice.
    let strategy = (1u64..=20, 1usize..=4, 1usize..=6).prop_flat_map(|(cap, n, slices)| {
        (
            Just(cap),
            prop::collection::vec(prop::collection::vec(0..=cap + 5, slices), n),
        )
    });
    runner()
        .run(&strategy, |(cap, demands)| {
            let got = shared(&demands, cap);
            for s in 0..demands[0].len() {
                let slice: Vec<u64> = demands.iter().map(|d| d[s]).collect();
                let want = progressive_fill(&slice, cap);
                let column: Vec<u64> = got.iter().map(|g| g[s]).collect();
                prop_assert_eq!(column, want);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(checked)
}

type Instance = (u64, u64, Vec<Vec<u64>>);

/// Capacity, per-compartment overhead, and 1-4 tenants over 1-6 slices.
fn instances() -> impl Strategy<Value = Instance> {
    (1u64..=20, 0u64..=3, 1usize..=4, 1usize..=6).prop_flat_map(|(cap, oh, n, slices)| {
        (
            Just(cap),
            Just(oh),
            prop::collection::vec(prop::collection::vec(0..=cap + 5, slices), n),
        )
    })
}

fn traces_of(demands: &[Vec<u64>]) -> Vec<DemandTrace> {
    demands
        .iter()
        .enumerate()
        .map(|(i, d)| DemandTrace::new(tenant_name(i), d.clone()))
        .collect()
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    })
}

fn conservation() -> Result<(), String> {
    runner()
        .run(&instances(), |(cap, oh, demands)| {
            let core = CoreModel::with_overhead(cap, oh).unwrap();
            let traces = traces_of(&demands);
            let effective = core.effective_capacity(traces.len());
            let meters = schedule_shared_core(&traces, &core).unwrap();
            for s in 0..demands[0].len() {
                let total: u64 = meters.iter().map(|m| m.granted_cycles[s]).sum();
                prop_assert!(total <= effective);
                for (m, d) in meters.iter().zip(&demands) {
                    prop_assert!(m.granted_cycles[s] <= d[s]);
                }
            }
            let usage: Q = meters.iter().map(|m| m.usage_fraction).sum();
            prop_assert!(usage <= Q::from(1));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn work_conservation() -> Result<(), String> {
    runner()
        .run(&instances(), |(cap, oh, demands)| {
            let core = CoreModel::with_overhead(cap, oh).unwrap();
            let traces = traces_of(&demands);
            let effective = core.effective_capacity(traces.len());
            let meters = schedule_shared_core(&traces, &core).unwrap();
            for s in 0..demands[0].len() {
                let total: u64 = meters.iter().map(|m| m.granted_cycles[s]).sum();
                let wanted: u64 = demands.iter().map(|d| d[s]).sum();
                prop_assert_eq!(total, wanted.min(effective));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn isolation() -> Result<(), String> {
    let strategy = (instances(), prop::collection::vec(0u64..=40, 6));
    runner()
        .run(&strategy, |((cap, oh, demands), noise)| {
            let core = CoreModel::with_overhead(cap, oh).unwrap();
            let before = schedule_dedicated_cores(&traces_of(&demands), &core).unwrap();
            // Rewrite every other tenant's demand; tenant 0 must not notice.
            let mut noisy = demands.clone();
            for d in noisy.iter_mut().skip(1) {
                for (s, x) in d.iter_mut().enumerate() {
                    *x = noise[s % noise.len()];
                }
            }
            let extra = DemandTrace::new("intruder", vec![cap; demands[0].len()]);
            let mut traces = traces_of(&noisy);
            traces.push(extra);
            let after = schedule_dedicated_cores(&traces, &core).unwrap();
            prop_assert_eq!(&before[0].granted_cycles, &after[0].granted_cycles);
            let own: Vec<u64> = demands[0]
                .iter()
                .map(|&d| d.min(cap.saturating_sub(oh)))
                .collect();
            prop_assert_eq!(&before[0].granted_cycles, &own);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn contention_monotonicity() -> Result<(), String> {
    let strategy = (instances(), 0usize..4, 0u64..=20, 0u64..=20);
    runner()
        .run(
            &strategy,
            |((cap, oh, demands), bump_who, bump_by, workload)| {
                let core = CoreModel::with_overhead(cap, oh).unwrap();
                let base = schedule_shared_core(&traces_of(&demands), &core).unwrap();

                // More demand from someone else never raises tenant 0's grant.
                let mut louder = demands.clone();
                let who = bump_who % louder.len();
                for x in louder[who].iter_mut() {
                    *x += bump_by;
                }
                let after = schedule_shared_core(&traces_of(&louder), &core).unwrap();
                for (i, (b, a)) in base.iter().zip(&after).enumerate() {
                    if i != who {
                        for (gb, ga) in b.granted_cycles.iter().zip(&a.granted_cycles) {
                            prop_assert!(ga <= gb);
                        }
                    }
                }

                // Another compartment on the core never raises anyone's grant.
                let mut crowded = traces_of(&demands);
                crowded.push(DemandTrace::new(
                    "zz-newcomer",
                    vec![bump_by; demands[0].len()],
                ));
                let after = schedule_shared_core(&crowded, &core).unwrap();
                for (b, a) in base.iter().zip(&after) {
                    for (gb, ga) in b.granted_cycles.iter().zip(&a.granted_cycles) {
                        prop_assert!(ga <= gb);
                    }
                }

                // A busier workload never raises its vswitch's grant on a shared core.
                let vs = DemandTrace::new("t", demands[0].clone());
                let quiet = DemandTrace::new("t/workload", vec![0; demands[0].len()]);
                let busy = DemandTrace::new("t/workload", vec![workload; demands[0].len()]);
                for priority in [SharePriority::VswitchFirst, SharePriority::WorkloadFirst] {
                    let (_, vq) = schedule_tenant_shared(&quiet, &vs, &core, priority).unwrap();
                    let (_, vb) = schedule_tenant_shared(&busy, &vs, &core, priority).unwrap();
                    prop_assert!(vb.total_granted <= vq.total_granted);
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

fn criterion_8() -> Result<String, String> {
    let start = Instant::now();
    let checked = oracle_sweep()?;
    conservation().map_err(|e| format!("conservation: {e}"))?;
    work_conservation().map_err(|e| format!("work conservation: {e}"))?;
    isolation().map_err(|e| format!("isolation: {e}"))?;
    contention_monotonicity().map_err(|e| format!("contention monotonicity: {e}"))?;
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{checked} exhaustive slice instances, 4 x 1000 randomized cases, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_9() -> Result<String, String> {
    let traces =
        std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-traces.csv");
    std::fs::write(&traces, "capacity=10,a,b,b/workload\n0,7,7,4\n1,2,9,9\n")
        .map_err(|e| e.to_string())?;
    let t = traces.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "simulate",
            "--scenario",
            "paper-defaults",
            "--option",
            "baseline",
        ],
        vec![
            "simulate",
            "--scenario",
            "paper-defaults",
            "--option",
            "3",
            "--format",
            "json",
        ],
        vec!["compare", "--scenario", "paper-defaults", "--format", "csv"],
        vec!["compare", "--scenario", "empty-fleet", "--format", "json"],
        vec![
            "bill",
            "--scenario",
            "paper-defaults",
            "--option",
            "1",
            "--servers",
            "100",
        ],
        vec![
            "meter",
            "--scenario",
            "paper-defaults",
            "--traces",
            t,
            "--option",
            "2",
            "--format",
            "json",
        ],
        vec!["check", "--scenario", "paper-defaults"],
    ];
    for args in &commands {
        let (a, _) = cli(args)?;
        let (b, _) = cli(args)?;
        if a != b {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    let (out, _) = cli(&["compare", "--scenario", "paper-defaults"])?;
    let golden = include_str!("golden/compare_paper_defaults.txt");
    if out != golden.as_bytes() {
        return Err(format!(
            "compare differs from golden file:\n{}",
            String::from_utf8_lossy(&out)
        ));
    }
    Ok(format!(
        "{} commands stable, golden compare matches",
        commands.len()
    ))
}

type Criterion = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("baseline economics", criterion_1),
        ("option 1 shared vswitch core", criterion_2),
        ("option 2 tenant-shared cores", criterion_3),
        ("option 3 dedicated cores", criterion_4),
        ("compare deltas", criterion_5),
        ("tenant proportionality", criterion_6),
        ("VF feasibility", criterion_7),
        ("scheduler properties", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
