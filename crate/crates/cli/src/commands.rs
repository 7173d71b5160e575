use std::fmt::Write;
use std::path::Path;

use coevo::baselines::{build_regression_panel, fe_ols, fe_poisson};
use coevo::estimator::{
    convergence_check, estimate as run_estimation, render_convergence_table, render_estimate_table, EstimationConfig,
    Problem,
};
use coevo::oracle::OracleInstance;
use coevo::panel::{
    behavior_change_table, dataset_text, describe_network, load_dataset, network_change_table, BehaviorChange, Binning,
    DataConfig, DatasetFiles, NetworkChange, NetworkSummary,
};
use coevo::rng::{stream_id, stream_rng};
use coevo::simulator::{parameter_names, PanelModel, SimOptions};
use coevo::synth::{synthesize as run_synthesis, SynthConfig};
use coevo::{EffectSpec, PanelDataset, ParameterVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Outcome};
use crate::output::{write_atomic, OutDir};
use crate::BaselineKind;

/// Stream phase reserved for `simulate` replications.
const PHASE_SIMULATE: u8 = 5;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    effects: EffectSpec,
    #[serde(default)]
    estimation: EstimationConfig,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_data(dir: &Path) -> Result<PanelDataset, CliError> {
    let config = DataConfig::from_file(&dir.join("data.toml"))?;
    Ok(load_dataset(&DatasetFiles::in_dir(dir), &config)?)
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    toml::from_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_params(path: &Path, spec: &EffectSpec, n_periods: usize) -> Result<ParameterVector, CliError> {
    let p = ParameterVector::from_toml_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    p.check_shape(spec, n_periods)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(p)
}

#[derive(Serialize)]
struct Description<'a> {
    n_actors: usize,
    n_waves: usize,
    n_levels: u32,
    networks: Vec<NetworkSummary>,
    network_changes: Vec<NetworkChange>,
    level_histograms: Vec<Vec<usize>>,
    behavior_changes: Vec<BehaviorChange>,
    binning: Option<&'a Binning>,
}

fn describe_text(d: &Description<'_>) -> String {
    let mut out = String::new();
    writeln!(out, "Network descriptives ({} actors)", d.n_actors).unwrap();
    writeln!(out, "{:<8}{:>10}{:>16}{:>10}", "Wave", "Density", "Avg. degree", "Ties").unwrap();
    for (w, s) in d.networks.iter().enumerate() {
        writeln!(
            out,
            "{:<8}{:>10.3}{:>16.3}{:>10}",
            w + 1,
            s.density,
            s.average_degree,
            s.tie_count
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "Network change").unwrap();
    writeln!(
        out,
        "{:<10}{:>12}{:>10}{:>10}{:>10}{:>10}",
        "Period", "0=>0", "0=>1", "1=>0", "1=>1", "Jaccard"
    )
    .unwrap();
    for (m, c) in d.network_changes.iter().enumerate() {
        let j = c.jaccard.map_or("-".to_string(), |j| format!("{j:.3}"));
        writeln!(
            out,
            "{:<10}{:>12}{:>10}{:>10}{:>10}{:>10}",
            format!("{} => {}", m + 1, m + 2),
            c.n00,
            c.n01,
            c.n10,
            c.n11,
            j
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "Behavior levels").unwrap();
    write!(out, "{:<8}", "Wave").unwrap();
    for l in 1..=d.n_levels {
        write!(out, "{l:>7}").unwrap();
    }
    writeln!(out).unwrap();
    for (w, h) in d.level_histograms.iter().enumerate() {
        write!(out, "{:<8}", w + 1).unwrap();
        for c in h {
            write!(out, "{c:>7}").unwrap();
        }
        writeln!(out).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "Behavior change").unwrap();
    writeln!(out, "{:<10}{:>10}{:>10}{:>10}", "Period", "Down", "Up", "Constant").unwrap();
    for (m, c) in d.behavior_changes.iter().enumerate() {
        writeln!(
            out,
            "{:<10}{:>10}{:>10}{:>10}",
            format!("{} => {}", m + 1, m + 2),
            c.decrease,
            c.increase,
            c.constant
        )
        .unwrap();
    }
    out
}

pub fn describe(data: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let dataset = load_data(data)?;
    let (behavior_changes, level_histograms) = behavior_change_table(&dataset);
    let d = Description {
        n_actors: dataset.n_actors(),
        n_waves: dataset.n_waves(),
        n_levels: dataset.n_levels(),
        networks: describe_network(&dataset),
        network_changes: network_change_table(&dataset),
        level_histograms,
        behavior_changes,
        binning: dataset.binning(),
    };
    let text = describe_text(&d);
    print!("{text}");
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        dir.write("describe.txt", &text)?;
        dir.write_json("describe.json", &d)?;
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct EffectsOnly<'a> {
    effects: &'a EffectSpec,
}

pub fn synthesize(config: &Path, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let cfg = SynthConfig::from_toml_str(&read(config)?)?;
    let dataset = run_synthesis(&cfg, seed)?;
    let text = dataset_text(&dataset);
    let dir = OutDir::create(out)?;
    dir.write("edges.csv", &text.edges)?;
    dir.write("behavior.csv", &text.behavior)?;
    dir.write("covariates.csv", &text.covariates)?;
    dir.write("data.toml", &DataConfig::levels(cfg.n_levels).to_toml_string())?;
    dir.write("true_params.toml", &cfg.params.to_toml_string())?;
    dir.write(
        "model.toml",
        &toml::to_string(&EffectsOnly { effects: &cfg.effects }).expect("spec serializes"),
    )?;
    let ties: Vec<String> = dataset.networks().iter().map(|n| n.tie_count().to_string()).collect();
    println!(
        "{} actors over {} waves; ties per wave: {}",
        dataset.n_actors(),
        dataset.n_waves(),
        ties.join(", ")
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SimulationSummary {
    seed: u64,
    replications: u64,
    statistic_names: Vec<String>,
    observed: Vec<f64>,
    mean: Vec<f64>,
    simulated: Vec<Vec<f64>>,
}

pub fn simulate(
    data: &Path,
    model: &Path,
    params: &Path,
    seed: u64,
    replications: u64,
    trace: Option<&Path>,
    out: &Path,
) -> Result<Outcome, CliError> {
    if replications == 0 {
        return Err(CliError::Input("--replications must be at least 1".into()));
    }
    let dataset = load_data(data)?;
    let spec = load_model(model)?.effects;
    let params = load_params(params, &spec, dataset.n_periods())?;
    let panel = PanelModel::new(&dataset, &spec);
    let runs = (0..replications)
        .into_par_iter()
        .map(|r| {
            let opts = SimOptions {
                trace: trace.is_some() && r == 0,
                ..Default::default()
            };
            panel.simulate(&params, &mut stream_rng(seed, stream_id(PHASE_SIMULATE, 0, r)), opts)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut edges = String::from("replication,wave,src,dst\n");
    let mut behavior = String::from("replication,wave,actor,value\n");
    for (r, outcomes) in runs.iter().enumerate() {
        for (m, o) in outcomes.iter().enumerate() {
            for (i, j) in o.network.edges() {
                writeln!(edges, "{},{},{i},{j}", r + 1, m + 2).unwrap();
            }
            for (i, p) in o.behavior.iter().enumerate() {
                writeln!(behavior, "{},{},{i},{p}", r + 1, m + 2).unwrap();
            }
        }
    }
    let simulated: Vec<Vec<f64>> = runs.iter().map(|o| panel.statistics(o).to_vec()).collect();
    let k = simulated[0].len();
    let mean = (0..k)
        .map(|c| simulated.iter().map(|s| s[c]).sum::<f64>() / simulated.len() as f64)
        .collect();
    let summary = SimulationSummary {
        seed,
        replications,
        statistic_names: parameter_names(&spec, dataset.n_periods()),
        observed: coevo::effects::target_statistics(&dataset, &spec).to_vec(),
        mean,
        simulated,
    };

    let dir = OutDir::create(out)?;
    dir.write("simulated_edges.csv", &edges)?;
    dir.write("simulated_behavior.csv", &behavior)?;
    dir.write_json("simulation.json", &summary)?;
    if let Some(path) = trace {
        let mut text = String::new();
        for (m, o) in runs[0].iter().enumerate() {
            for ev in o.trace.as_deref().unwrap_or_default() {
                let mut ev = ev.clone();
                ev.time += m as f64;
                writeln!(text, "{ev}").unwrap();
            }
        }
        write_atomic(path, &text)?;
    }
    println!("{replications} replication(s) of {} period(s)", dataset.n_periods());
    Ok(Outcome::Success)
}

pub fn estimate(data: &Path, model: &Path, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let dataset = load_data(data)?;
    let ModelFile { effects, estimation } = load_model(model)?;
    let config = EstimationConfig { seed, ..estimation };
    config.validate()?;
    let dir = OutDir::create(out)?;
    let result = run_estimation(&dataset, &effects, &config)?;
    let text = format!(
        "{}\n{}",
        render_estimate_table(&result),
        render_convergence_table(&result.convergence)
    );
    dir.write_json("estimate.json", &result)?;
    dir.write("estimate.txt", &text)?;
    print!("{text}");
    Ok(if result.converged {
        Outcome::Success
    } else {
        Outcome::NotConverged
    })
}

#[allow(clippy::too_many_arguments)]
pub fn check(
    data: &Path,
    model: &Path,
    params: &Path,
    seed: u64,
    n_check: Option<usize>,
    tau: Option<f64>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let dataset = load_data(data)?;
    let ModelFile { effects, estimation } = load_model(model)?;
    let params = load_params(params, &effects, dataset.n_periods())?;
    let n_check = n_check.unwrap_or(estimation.n_check);
    let tau = tau.unwrap_or(estimation.tau);
    if !(tau > 0.0) {
        return Err(CliError::Input(format!("--tau must be positive, got {tau}")));
    }
    let problem = Problem::new(&dataset, &effects);
    let report = convergence_check(&problem, &params.to_vec(), n_check, seed, tau)?;
    let text = render_convergence_table(&report);
    print!("{text}");
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        dir.write_json("check.json", &report)?;
        dir.write("check.txt", &text)?;
    }
    Ok(if report.converged {
        Outcome::Success
    } else {
        Outcome::NotConverged
    })
}

pub fn baseline(data: &Path, kind: BaselineKind, out: Option<&Path>) -> Result<Outcome, CliError> {
    let dataset = load_data(data)?;
    let (counts, from_levels) = match dataset.raw_counts() {
        Some(c) => (c.to_vec(), false),
        None => (
            dataset
                .behaviors()
                .iter()
                .map(|w| w.iter().map(|&p| p as u64).collect())
                .collect(),
            true,
        ),
    };
    let panel = build_regression_panel(&counts, dataset.networks(), dataset.covariates())?;
    let mut fit = match kind {
        BaselineKind::Ols => fe_ols(&panel)?,
        BaselineKind::Poisson => fe_poisson(&panel)?,
    };
    if from_levels {
        fit.notices
            .push("behavior file holds levels, not raw counts; levels used as the outcome".into());
    }
    let text = fit.render();
    print!("{text}");
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        let stem = match kind {
            BaselineKind::Ols => "baseline_ols",
            BaselineKind::Poisson => "baseline_poisson",
        };
        dir.write_json(&format!("{stem}.json"), &fit)?;
        dir.write(&format!("{stem}.txt"), &text)?;
    }
    Ok(Outcome::Success)
}

pub fn check_oracle(seed: u64, replications: u64, out: Option<&Path>) -> Result<Outcome, CliError> {
    if replications < 2 {
        return Err(CliError::Input("--replications must be at least 2".into()));
    }
    let instance = OracleInstance::random(seed);
    let cmp = instance.compare(replications, seed)?;
    let mut text = String::new();
    writeln!(text, "start ties {:?}, levels {:?}", instance.network.edges().collect::<Vec<_>>(), instance.behavior).unwrap();
    writeln!(text, "parameters {:?}", instance.params.to_vec()).unwrap();
    writeln!(text, "{:>6}{:>12}{:>12}{:>9}", "state", "exact", "simulated", "z").unwrap();
    for s in &cmp.states {
        writeln!(text, "{:>6}{:>12.6}{:>12.6}{:>9.3}", s.state, s.exact, s.empirical, s.z()).unwrap();
    }
    writeln!(text, "{:>12}{:>12}", "exact stat", "simulated").unwrap();
    for (e, s) in cmp.exact_statistics.iter().zip(&cmp.simulated_statistics) {
        writeln!(text, "{e:>12.6}{s:>12.6}").unwrap();
    }
    let (z, rel) = (cmp.max_abs_z(), cmp.max_relative_statistic_error());
    let ok = z <= 3.0 && rel <= 0.01;
    writeln!(
        text,
        "max |z| = {z:.3}, max relative statistic error = {rel:.5}: {}",
        if ok { "agree" } else { "DISAGREE" }
    )
    .unwrap();
    print!("{text}");
    if let Some(dir) = out {
        let dir = OutDir::create(dir)?;
        dir.write("oracle.txt", &text)?;
        dir.write_json("oracle.json", &cmp)?;
    }
    Ok(if ok { Outcome::Success } else { Outcome::NotConverged })
}
