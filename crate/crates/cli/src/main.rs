use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hygrid_core::bundle::MatrixBundle;
use hygrid_core::sim::{simulate, DisturbanceSchedule, SimError, SimOptions, Trajectory};
use hygrid_core::stability::{eigen_oracle, EigenReport, EigenVerdict, StabilityOptions, StabilityReport, Verdict};
use hygrid_core::steady_state::{
    frequency_balance, solve_equilibrium, voltage_balance, FrequencyBalance, SteadyStateError, VoltageBalance,
};
use hygrid_core::{Disturbance, HybridGrid, NetworkSpec, SystemModel};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "hygrid", version, about = "Stability analysis and simulation of hybrid ac/dc grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stability checks and print the report.
    Check(CommonArgs),
    /// Spectrum of the model on its reachable subspace.
    Eig(CommonArgs),
    /// Synchronous steady state under the loads in `--disturbance`.
    SteadyState(CommonArgs),
    /// Integrate the model from rest (or `--initial`) and write samples.
    Simulate(SimArgs),
    /// Every analysis in one JSON document.
    Report(SimArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Network description (JSON).
    network: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Load schedule (JSON); for steady state all steps are summed.
    #[arg(long)]
    disturbance: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Relative singular-value cutoff for the rank test.
    #[arg(long, default_value_t = hygrid_core::stability::TOL_RANK)]
    tol_rank: f64,
    /// Margin on the spectral abscissa.
    #[arg(long, default_value_t = hygrid_core::stability::TOL_EIG)]
    tol_eig: f64,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 10.0)]
    tfinal: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Keep every n-th integration step.
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// JSON file mapping state labels to initial values; missing entries are zero.
    #[arg(long)]
    initial: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

/// Failure that still produced a result, as opposed to bad input.
enum Status {
    Ok,
    Fail,
    Indeterminate,
}

impl Status {
    fn code(&self) -> ExitCode {
        match self {
            Status::Ok => ExitCode::SUCCESS,
            Status::Fail => ExitCode::from(2),
            Status::Indeterminate => ExitCode::from(3),
        }
    }

    fn from_verdict(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Status::Ok,
            Verdict::Fail => Status::Fail,
            Verdict::Indeterminate => Status::Indeterminate,
        }
    }
}

fn main() -> ExitCode {
    // Usage errors share the input-error code so that 2 always means a failed check.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Check(a) => check(&a),
        Command::Eig(a) => eig(&a),
        Command::SteadyState(a) => steady_state(&a),
        Command::Simulate(a) => run_simulation(&a),
        Command::Report(a) => report(&a),
    }
}

fn load_grid(path: &Path) -> Result<(NetworkSpec, HybridGrid)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = NetworkSpec::from_json(&text).with_context(|| format!("in {}", path.display()))?;
    let grid = HybridGrid::from_spec(&spec).with_context(|| format!("in {}", path.display()))?;
    Ok((spec, grid))
}

fn load_schedule(path: Option<&Path>) -> Result<DisturbanceSchedule> {
    let Some(path) = path else {
        return Ok(DisturbanceSchedule::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DisturbanceSchedule::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn options(a: &CommonArgs) -> Result<StabilityOptions> {
    if a.tol_rank.is_nan() || a.tol_rank <= 0.0 {
        bail!("--tol-rank must be positive, got {}", a.tol_rank);
    }
    if a.tol_eig.is_nan() || a.tol_eig <= 0.0 {
        bail!("--tol-eig must be positive, got {}", a.tol_eig);
    }
    Ok(StabilityOptions {
        tol_rank: a.tol_rank,
        tol_eig: a.tol_eig,
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn check(a: &CommonArgs) -> Result<Status> {
    if a.format == Format::Csv {
        bail!("--format csv is not available for check");
    }
    let (_, grid) = load_grid(&a.network)?;
    let report = grid.verify(&options(a)?);
    let text = match a.format {
        Format::Json => to_json(&report)?,
        _ => render_report(&report),
    };
    emit(a.output.as_deref(), &text)?;
    Ok(Status::from_verdict(report.verdict))
}

fn render_report(r: &StabilityReport) -> String {
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(format!("dc gain consistency: {}", yes_no(r.condition1_pass)));
    for c in r.condition1.iter().filter(|c| !c.pass) {
        let gains: Vec<String> = c.gains.iter().map(|(n, k)| format!("{n}={k}")).collect();
        line(format!("  dc subgrid {}: {}", c.dc_subgrid, gains.join(", ")));
    }
    line(format!(
        "stabilizing device present: {}{}",
        yes_no(r.assumption1.pass),
        r.assumption1
            .witness
            .as_ref()
            .map(|w| format!(" (node {w})"))
            .unwrap_or_default()
    ));
    for sg in &r.subgrids {
        line(format!(
            "ac subgrid {} [{}]: {:?}",
            sg.subgrid,
            sg.nodes.join(" "),
            sg.verdict
        ));
        line(format!(
            "  D = {{{}}}  C = {{{}}}  F = {{{}}}",
            sg.partition.d.join(", "),
            sg.partition.c.join(", "),
            sg.partition.f.join(", ")
        ));
        line(format!("  reduced edges: {{{}}}", sg.reduced_edges.join(", ")));
        let order: Vec<String> = sg
            .node_removal
            .removals
            .iter()
            .map(|r| format!("{} via {}", r.removed, r.single_edge_node))
            .collect();
        line(format!(
            "  node removal: {} [{}]",
            if sg.node_removal.emptied { "emptied" } else { "stuck" },
            order.join(", ")
        ));
        line(format!(
            "  cycle rule: {} (single-edge case alone: {})",
            yes_no(sg.cycle_rule.pass),
            yes_no(sg.cycle_rule.pass_case1)
        ));
        line(format!(
            "  rank test: {:?}, singular value ratios {:.3e} / {:.3e}",
            sg.rank.outcome, sg.rank.converter_machine.ratio, sg.rank.stabilizing_other.ratio
        ));
        if let Some(c) = sg.certified_by {
            line(format!("  certified by: {c:?}"));
        }
    }
    line(format!("LaSalle certificate valid: {}", r.lasalle_certificate_valid));
    line(format!(
        "eigen oracle: {:?}, max real part {}",
        r.eigen.verdict,
        r.eigen.max_real.map_or("n/a".to_string(), |m| format!("{m:.6e}"))
    ));
    for n in &r.notes {
        line(format!("note: {n}"));
    }
    line(format!("verdict: {:?}", r.verdict));
    s
}

fn eig(a: &CommonArgs) -> Result<Status> {
    let (_, grid) = load_grid(&a.network)?;
    let report = eigen_oracle(&grid.model, options(a)?.tol_eig);
    let text = match a.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["re", "im"])?;
            for z in &report.eigenvalues {
                w.write_record([z[0].to_string(), z[1].to_string()])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => render_eigen(&report),
    };
    emit(a.output.as_deref(), &text)?;
    Ok(match report.verdict {
        EigenVerdict::Stable => Status::Ok,
        _ => Status::Fail,
    })
}

fn render_eigen(r: &EigenReport) -> String {
    let mut s = format!("reachable subspace dimension: {}\n", r.dimension);
    s.push_str(&format!("{:>16} {:>16}\n", "re", "im"));
    for z in &r.eigenvalues {
        s.push_str(&format!("{:>16.9e} {:>16.9e}\n", z[0], z[1]));
    }
    s.push_str(&format!("verdict: {:?}\n", r.verdict));
    s
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct SteadyStateOutput {
    /// Synchronous frequency deviation per ac subgrid.
    omega_s: Vec<f64>,
    theta: BTreeMap<String, f64>,
    v: BTreeMap<String, f64>,
    sources: BTreeMap<String, f64>,
    p_ac: BTreeMap<String, f64>,
    p_dc: BTreeMap<String, f64>,
    conditioning: f64,
    ill_conditioned: bool,
    frequency_balance: Vec<FrequencyBalance>,
    voltage_balance: Vec<VoltageBalance>,
}

fn named(ids: &[String], values: impl Iterator<Item = f64>) -> BTreeMap<String, f64> {
    ids.iter().cloned().zip(values).collect()
}

fn steady_state_output(model: &SystemModel, d: &Disturbance) -> Result<SteadyStateOutput, SteadyStateError> {
    let eq = solve_equilibrium(model, d)?;
    Ok(SteadyStateOutput {
        omega_s: eq.omega_s.clone(),
        theta: named(&model.theta_ids, eq.theta.iter().copied()),
        v: named(&model.layout.v_ids, eq.v(model).iter().copied()),
        sources: named(&model.layout.source_ids, eq.p(model).iter().copied()),
        p_ac: named(&model.theta_ids, eq.p_ac.iter().copied()),
        p_dc: named(&model.layout.v_ids, eq.p_dc.iter().copied()),
        conditioning: eq.conditioning,
        ill_conditioned: eq.ill_conditioned,
        frequency_balance: frequency_balance(model, &eq, d),
        voltage_balance: voltage_balance(model, &eq, d),
    })
}

fn steady_state(a: &CommonArgs) -> Result<Status> {
    let (_, grid) = load_grid(&a.network)?;
    let schedule = load_schedule(a.disturbance.as_deref())?;
    let d = schedule.total(&grid.model)?;
    let out = match steady_state_output(&grid.model, &d) {
        Ok(out) => out,
        Err(e @ SteadyStateError::SingularEquilibrium(_)) => {
            eprintln!("error: {e}");
            return Ok(Status::Fail);
        }
        Err(e) => return Err(e.into()),
    };
    let text = match a.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["quantity", "id", "value"])?;
            for (k, ws) in out.omega_s.iter().enumerate() {
                w.write_record(["omega_s", &k.to_string(), &ws.to_string()])?;
            }
            for (name, map) in [
                ("theta", &out.theta),
                ("v", &out.v),
                ("source", &out.sources),
                ("p_ac", &out.p_ac),
                ("p_dc", &out.p_dc),
            ] {
                for (id, x) in map {
                    w.write_record([name, id, &x.to_string()])?;
                }
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => {
            let mut s = String::new();
            for (k, ws) in out.omega_s.iter().enumerate() {
                s.push_str(&format!("ac subgrid {k}: omega_s = {ws:.12e}\n"));
            }
            for (name, map) in [
                ("v", &out.v),
                ("P", &out.sources),
                ("P_ac", &out.p_ac),
                ("P_dc", &out.p_dc),
            ] {
                for (id, x) in map {
                    s.push_str(&format!("{name}[{id}] = {x:.12e}\n"));
                }
            }
            s.push_str(&format!("conditioning: {:.3e}\n", out.conditioning));
            if out.ill_conditioned {
                s.push_str("warning: equilibrium is ill-conditioned\n");
            }
            s
        }
    };
    emit(a.output.as_deref(), &text)?;
    Ok(Status::Ok)
}

fn initial_state(model: &SystemModel, path: Option<&Path>) -> Result<DVector<f64>> {
    let mut x = DVector::zeros(model.dim());
    let Some(path) = path else { return Ok(x) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values: BTreeMap<String, f64> =
        serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
    let labels = model.layout.labels();
    for (label, value) in values {
        let Some(k) = labels.iter().position(|l| *l == label) else {
            bail!("{}: unknown state label `{label}`", path.display());
        };
        x[k] = value;
    }
    Ok(x)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct SimulationSummary {
    samples: usize,
    t_final: f64,
    terminal_state: BTreeMap<String, f64>,
    max_abs_frequency: f64,
    lasalle_initial: Option<f64>,
    lasalle_final: Option<f64>,
}

fn summarize(model: &SystemModel, traj: &Trajectory) -> SimulationSummary {
    let log = traj.lasalle.as_ref();
    SimulationSummary {
        samples: traj.len(),
        t_final: *traj.time.last().expect("nonempty"),
        terminal_state: named(&traj.labels, traj.last().iter().copied()),
        max_abs_frequency: traj.max_abs_frequency(model),
        lasalle_initial: log.and_then(|l| l.value.first().copied()),
        lasalle_final: log.and_then(|l| l.value.last().copied()),
    }
}

fn trajectory_csv(model: &SystemModel, traj: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(traj.labels.iter().cloned());
    header.extend(model.layout.edge_ids.iter().map(|e| format!("Pac[{e}]")));
    if traj.lasalle.is_some() {
        header.push("V".into());
        header.push("dVdt".into());
    }
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![traj.time[k].to_string()];
        row.extend(traj.states[k].iter().map(f64::to_string));
        row.extend(traj.edge_flows[k].iter().map(f64::to_string));
        if let Some(log) = &traj.lasalle {
            row.push(log.value[k].to_string());
            row.push(log.rate[k].to_string());
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn sim_options(a: &SimArgs) -> SimOptions {
    SimOptions {
        t_final: a.tfinal,
        dt: a.dt,
        record_every: a.record_every,
    }
}

fn run_simulation(a: &SimArgs) -> Result<Status> {
    let c = &a.common;
    let (_, grid) = load_grid(&c.network)?;
    let schedule = load_schedule(c.disturbance.as_deref())?;
    let x0 = initial_state(&grid.model, a.initial.as_deref())?;
    let traj = match simulate(&grid.model, &x0, &schedule, &sim_options(a)) {
        Ok(t) => t,
        Err(e @ SimError::NonFiniteState { .. }) => {
            eprintln!("error: {e}");
            return Ok(Status::Fail);
        }
        Err(e) => return Err(e.into()),
    };
    let summary = summarize(&grid.model, &traj);
    match c.format {
        Format::Json => {
            // Samples go to --output as CSV when both are wanted.
            if let Some(path) = &c.output {
                emit(Some(path), &trajectory_csv(&grid.model, &traj)?)?;
            }
            emit(None, &to_json(&summary)?)?;
        }
        Format::Csv => emit(c.output.as_deref(), &trajectory_csv(&grid.model, &traj)?)?,
        Format::Text => {
            if let Some(path) = &c.output {
                emit(Some(path), &trajectory_csv(&grid.model, &traj)?)?;
            }
            let mut s = format!("samples: {}\nmax |omega|: {:.6e}\n", summary.samples, summary.max_abs_frequency);
            if let (Some(v0), Some(v1)) = (summary.lasalle_initial, summary.lasalle_final) {
                s.push_str(&format!("V: {v0:.6e} -> {v1:.6e}\n"));
            }
            for (label, x) in &summary.terminal_state {
                s.push_str(&format!("{label} = {x:.9e}\n"));
            }
            emit(None, &s)?;
        }
    }
    Ok(Status::Ok)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Report {
    name: Option<String>,
    stability: StabilityReport,
    steady_state: Result<SteadyStateOutput, String>,
    simulation: Result<SimulationSummary, String>,
    matrices: MatrixBundle,
}

fn report(a: &SimArgs) -> Result<Status> {
    let c = &a.common;
    if c.format != Format::Json && c.format != Format::Text {
        bail!("report is written as JSON");
    }
    let (spec, grid) = load_grid(&c.network)?;
    let schedule = load_schedule(c.disturbance.as_deref())?;
    let d = schedule.total(&grid.model)?;
    let x0 = initial_state(&grid.model, a.initial.as_deref())?;
    let stability = grid.verify(&options(c)?);
    let status = Status::from_verdict(stability.verdict);
    let out = Report {
        name: spec.name.clone(),
        stability,
        steady_state: steady_state_output(&grid.model, &d).map_err(|e| e.to_string()),
        simulation: simulate(&grid.model, &x0, &schedule, &sim_options(a))
            .map(|t| summarize(&grid.model, &t))
            .map_err(|e| e.to_string()),
        matrices: MatrixBundle::new(&grid.model),
    };
    emit(c.output.as_deref(), &to_json(&out)?)?;
    Ok(status)
}
