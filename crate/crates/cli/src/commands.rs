use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use spillover_core::format::f64_17;
use spillover_core::misspec::ReportOptions;
use spillover_core::{
    adversarial_instance, estimands, exact_expectation_ht, ht_estimate, monte_carlo,
    policy_effect_oracle, simulate, AdversarialInstance, AdversarialKind, HtPlan, InterferenceStructure,
    MisspecReport,
};

use crate::config::RunConfig;
use crate::error::CliError;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_structure(dir: &Path, name: &str, s: &InterferenceStructure) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    s.write_dump(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let loaded = cfg.structure()?;
    let s = &loaded.structure;
    let violations = s.validate();
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(CliError::Validation(text.join("; ")));
    }
    let out = cfg.out_dir()?;
    write_structure(&out, "structure.txt", s)?;
    if let Some(labels) = &loaded.labels {
        let mut w = create(&out, "labels.txt")?;
        for (id, label) in labels.iter().enumerate() {
            writeln!(w, "{id} {label}")?;
        }
        w.flush()?;
    }
    println!("ok: {} units, radius {}", s.n(), s.radius());
    Ok(())
}

pub fn truth(cfg: &RunConfig) -> Result<(), CliError> {
    let s = cfg.structure()?.structure;
    let model = cfg.model(&s)?;
    let e = estimands(&model, &s)?;
    let oracle = policy_effect_oracle(&model, &s)?;
    let out = cfg.out_dir()?;
    let mut w = create(&out, "model.txt")?;
    model.write(&mut w)?;
    w.flush()?;
    let mut csv = csv::Writer::from_writer(create(&out, "truth.csv")?);
    csv.write_record(["beta_bar", "gamma_bar", "policy_effect", "policy_oracle"])?;
    csv.write_record([e.beta_bar, e.gamma_bar, e.policy_effect, oracle].map(f64_17))?;
    csv.flush()?;
    println!(
        "beta_bar = {}, gamma_bar = {}, policy_effect = {} (oracle {})",
        e.beta_bar, e.gamma_bar, e.policy_effect, oracle
    );
    Ok(())
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let s = cfg.structure()?.structure;
    let model = cfg.model(&s)?;
    let assumed = cfg.assumed(&s)?;
    let (p, seed) = (cfg.p()?, cfg.seed()?);
    let record = simulate(&model, &s, p, seed)?;
    let est = ht_estimate(&assumed, &record)?;
    let out = cfg.out_dir()?;
    let mut w = create(&out, "experiment.csv")?;
    record.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&out, "probabilities.csv")?;
    HtPlan::new(&assumed, p)?.probabilities().write_csv(&mut w)?;
    w.flush()?;
    let mut csv = csv::Writer::from_writer(create(&out, "estimate.csv")?);
    csv.write_record([
        "beta_hat",
        "gamma_hat",
        "policy_hat",
        "count_e0",
        "count_e1",
        "count_e2plus",
        "p",
        "seed",
    ])?;
    csv.write_record([
        f64_17(est.beta_hat),
        f64_17(est.gamma_hat),
        f64_17(est.policy_hat),
        est.basis_counts[0].to_string(),
        est.basis_counts[1].to_string(),
        est.count_spillover_exposures().to_string(),
        f64_17(p),
        seed.to_string(),
    ])?;
    csv.flush()?;
    let unrealized = est.unrealized();
    if !unrealized.is_empty() {
        eprintln!("note: no unit realized basis exposures {unrealized:?} in this draw");
    }
    println!("beta_hat = {}, gamma_hat = {}", est.beta_hat, est.gamma_hat);
    Ok(())
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let s = cfg.structure()?.structure;
    let model = cfg.model(&s)?;
    let assumed = cfg.assumed(&s)?;
    let (p, reps, seed, bound) = (cfg.p()?, cfg.reps()?, cfg.seed()?, cfg.bound()?);
    let run = monte_carlo(&model, &s, &assumed, p, reps, seed)?;
    let exact = if s.n() <= bound {
        Some(exact_expectation_ht(&model, &s, &assumed, p, bound)?)
    } else {
        None
    };
    let out = cfg.out_dir()?;
    let mut w = create(&out, "reps.csv")?;
    run.write_reps_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&out, "summary.csv")?;
    run.write_summary_csv(&mut w, exact)?;
    w.flush()?;
    println!("mean beta_hat = {}, mean gamma_hat = {} over {reps} reps", run.mean.beta, run.mean.gamma);
    Ok(())
}

fn write_report(out: &Path, report: &MisspecReport) -> Result<(), CliError> {
    let mut w = create(out, "misspec_report.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "weights.csv")?;
    report.weights.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn misspec(cfg: &RunConfig, demo_kind: Option<&str>) -> Result<(), CliError> {
    if let Some(kind) = demo_kind {
        return demo(cfg, kind);
    }
    let s = cfg.structure()?.structure;
    let model = cfg.model(&s)?;
    let assumed = cfg.assumed(&s)?;
    let options = ReportOptions { p: cfg.p()?, bound: cfg.bound()?, closed_only: cfg.closed_only()? };
    if !options.closed_only && s.n() > options.bound {
        return Err(CliError::Capability(format!(
            "n = {} exceeds the enumeration bound {}; rerun with --closed-only or raise --bound",
            s.n(),
            options.bound
        )));
    }
    let report = MisspecReport::build(&model, &s, &assumed, options)?;
    let out = cfg.out_dir()?;
    write_structure(&out, "assumed.txt", &assumed)?;
    write_report(&out, &report)?;
    print_report(&report);
    Ok(())
}

pub fn demo(cfg: &RunConfig, kind: &str) -> Result<(), CliError> {
    let kind: AdversarialKind = kind.parse()?;
    let AdversarialInstance { model, true_structure, assumed_structure, report, .. } = adversarial_instance(kind);
    let out = cfg.out_dir()?;
    write_structure(&out, "structure.txt", &true_structure)?;
    write_structure(&out, "assumed.txt", &assumed_structure)?;
    let mut w = create(&out, "model.txt")?;
    model.write(&mut w)?;
    w.flush()?;
    write_report(&out, &report)?;
    println!("demo {}", kind.name());
    print_report(&report);
    Ok(())
}

fn print_report(r: &MisspecReport) {
    println!(
        "gamma_breve = {} (definitional {}), gamma_bar = {}, policy_effect = {}, sign_agree = {}",
        r.gamma_breve_closed,
        r.gamma_breve_definitional().map_or("skipped".to_string(), |d| d.to_string()),
        r.truth.gamma_bar,
        r.truth.policy_effect,
        r.sign_agree
    );
}
