//! CSV output. Every file has a fixed header, one record per line, `.` as
//! decimal separator and shortest round-trip float formatting; undefined
//! values (a standard error from a single sample) are written as `NA`.

use std::io::Write;

use crate::battery::BatteryModel;
use crate::diagnostics::{DiagnosticsReport, PolicyTrace};
use crate::error::Result;
use crate::experiment::{Experiment, SweepRow};
use crate::solver::{Evaluation, SolveResult};
use crate::stochastic::PathSet;

struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_nan() {
            f.write_str("NA")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `level,lower,lower_se,upper,upper_se`, one row per starting level.
pub fn write_bounds(report: &DiagnosticsReport, mut w: impl Write) -> Result<()> {
    writeln!(w, "level,lower,lower_se,upper,upper_se")?;
    for (p, level) in report.levels.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            Num(*level),
            Num(report.lower_mean[p]),
            Num(report.lower_se[p]),
            Num(report.upper_mean[p]),
            Num(report.upper_se[p])
        )?;
    }
    Ok(())
}

/// `level,value` with `value = v_0(p, z0)`.
pub fn write_initial_values(levels: &[f64], values: &[f64], mut w: impl Write) -> Result<()> {
    writeln!(w, "level,value")?;
    for (l, v) in levels.iter().zip(values) {
        writeln!(w, "{},{}", Num(*l), Num(*v))?;
    }
    Ok(())
}

/// `level,margin,next_level,probability` for every nonzero transition.
pub fn write_transitions(model: &BatteryModel, mut w: impl Write) -> Result<()> {
    writeln!(w, "level,margin,next_level,probability")?;
    let lattice = model.lattice();
    for p in 0..model.levels() {
        for a in 0..model.action_count() {
            for (q, &prob) in model.alpha(p, a).iter().enumerate() {
                if prob != 0.0 {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        Num(lattice.level(p)),
                        Num(model.actions().margin(a)),
                        Num(lattice.level(q)),
                        Num(prob)
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// `level,margin,excess,shortage`.
pub fn write_excess_shortage(model: &BatteryModel, mut w: impl Write) -> Result<()> {
    writeln!(w, "level,margin,excess,shortage")?;
    for p in 0..model.levels() {
        for a in 0..model.action_count() {
            writeln!(
                w,
                "{},{},{},{}",
                Num(model.lattice().level(p)),
                Num(model.actions().margin(a)),
                Num(model.excess(p, a)),
                Num(model.shortage(p, a))
            )?;
        }
    }
    Ok(())
}

/// `z2,price,level,value,margin` at decision time `t` for every grid
/// point and level: the value function and the chosen safety margin as
/// functions of the current price.
pub fn write_policy_curves(
    exp: &Experiment,
    result: &SolveResult,
    t: usize,
    mode: Evaluation,
    mut w: impl Write,
) -> Result<()> {
    writeln!(w, "z2,price,level,value,margin")?;
    let model = exp.model();
    let grid = exp.grid();
    for i in 0..grid.len() {
        let z = [grid.point(i)[0], grid.point(i)[1]];
        let price = exp.price().price(t, z[1])?;
        for p in 0..model.levels() {
            let a = result.policy_with(model, exp.price(), t, p, z, mode)?;
            writeln!(
                w,
                "{},{},{},{},{}",
                Num(z[1]),
                Num(price),
                Num(model.lattice().level(p)),
                Num(result.value_at(t, p, &z)?),
                Num(model.actions().margin(a))
            )?;
        }
    }
    Ok(())
}

/// Simulated policy runs from one starting level.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRuns {
    pub start: f64,
    pub traces: Vec<PolicyTrace>,
}

/// `start,path,t,z2,level,margin,reward`; `margin` is empty at `t = T`,
/// where the reward is the scrap value.
pub fn write_traces(
    model: &BatteryModel,
    paths: &PathSet,
    runs: &[PolicyRuns],
    mut w: impl Write,
) -> Result<()> {
    writeln!(w, "start,path,t,z2,level,margin,reward")?;
    let lattice = model.lattice();
    for run in runs {
        for (k, tr) in run.traces.iter().enumerate() {
            for t in 0..tr.levels.len() {
                let margin = match tr.actions.get(t) {
                    Some(&a) => Num(model.actions().margin(a)).to_string(),
                    None => String::new(),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    Num(run.start),
                    k,
                    t,
                    Num(paths.state(k, t)[1]),
                    Num(lattice.level(tr.levels[t])),
                    margin,
                    Num(tr.rewards[t])
                )?;
            }
        }
    }
    Ok(())
}

/// `start,path,total` with the cumulated reward of each path.
pub fn write_totals(runs: &[PolicyRuns], mut w: impl Write) -> Result<()> {
    writeln!(w, "start,path,total")?;
    for run in runs {
        for (k, tr) in run.traces.iter().enumerate() {
            writeln!(w, "{},{},{}", Num(run.start), k, Num(tr.total()))?;
        }
    }
    Ok(())
}

/// Per-step sample mean and standard deviation across paths of level,
/// margin and cumulated reward.
pub fn write_trace_stats(
    model: &BatteryModel,
    runs: &[PolicyRuns],
    mut w: impl Write,
) -> Result<()> {
    writeln!(
        w,
        "start,t,level_mean,level_sd,margin_mean,margin_sd,cumulated_mean,cumulated_sd"
    )?;
    for run in runs {
        let traces = &run.traces;
        let Some(first) = traces.first() else {
            continue;
        };
        let horizon = first.actions.len();
        let mut cum = vec![0.0; traces.len()];
        for t in 0..=horizon {
            let levels: Vec<f64> = traces
                .iter()
                .map(|tr| model.lattice().level(tr.levels[t]))
                .collect();
            for (c, tr) in cum.iter_mut().zip(traces) {
                *c += tr.rewards[t];
            }
            let (ml, sl) = mean_sd(&levels);
            let (mc, sc) = mean_sd(&cum);
            let (mm, sm) = if t < horizon {
                let margins: Vec<f64> = traces
                    .iter()
                    .map(|tr| model.actions().margin(tr.actions[t]))
                    .collect();
                mean_sd(&margins)
            } else {
                (f64::NAN, f64::NAN)
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                Num(run.start),
                t,
                Num(ml),
                Num(sl),
                Num(mm),
                Num(sm),
                Num(mc),
                Num(sc)
            )?;
        }
    }
    Ok(())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per sweep case.
pub fn write_sweep(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(
        w,
        "phi,capacity,scrap,start_level,value,lower,lower_se,upper,upper_se"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            Num(r.phi),
            Num(r.capacity),
            r.scrap,
            Num(r.start_level),
            Num(r.value),
            Num(r.lower),
            Num(r.lower_se),
            Num(r.upper),
            Num(r.upper_se)
        )?;
    }
    Ok(())
}

/// Lower bound against capacity for each `(phi, scrap)` group, with the
/// marginal value per MWh from the previous capacity of the group.
pub fn write_capacity_curve(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "phi,scrap,capacity,lower,upper,marginal")?;
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.phi
            .total_cmp(&b.phi)
            .reverse()
            .then((a.scrap as u8).cmp(&(b.scrap as u8)))
            .then(a.capacity.total_cmp(&b.capacity))
    });
    let mut prev: Option<&SweepRow> = None;
    for r in sorted {
        let marginal = match prev {
            Some(q) if q.phi == r.phi && q.scrap == r.scrap => {
                (r.lower - q.lower) / (r.capacity - q.capacity)
            }
            _ => f64::NAN,
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            Num(r.phi),
            r.scrap,
            Num(r.capacity),
            Num(r.lower),
            Num(r.upper),
            Num(marginal)
        )?;
        prev = Some(r);
    }
    Ok(())
}
