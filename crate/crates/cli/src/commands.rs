use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use vine_core::dataset::{load_csv, synth_interaction, Dataset};
use vine_core::evaluation::{
    hstat_correspondence, information_ceiling, percent_label, random_cluster_baseline, BaselineReport,
    CeilingReport, CorrespondenceReport,
};
use vine_core::export::{export_document, Reports};
use vine_core::interaction::h_matrix;
use vine_core::model::{train_gbm_traced, ExternalOracle, ModelOracle};
use vine_core::pipeline::{analyze as run_pipeline, Analysis};
use vine_core::VineError;

use crate::config::RunConfig;
use crate::table::{fixed, Table};
use crate::{Benchmark, CliError};

fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    let path = config.dataset_path()?;
    if !path.is_file() {
        return Err(CliError::Input(format!("dataset {} not found", path.display())));
    }
    Ok(load_csv(path, config.target()?, &config.encoding())?)
}

fn build_oracle(config: &RunConfig, ds: &Dataset) -> Result<Box<dyn ModelOracle<f64>>, CliError> {
    match &config.oracle_cmd {
        Some(cmd) => {
            let timeout = Duration::from_secs(config.oracle_timeout_secs);
            Ok(Box::new(ExternalOracle::spawn_with_timeout(cmd, ds.n_features(), timeout)?))
        }
        None => {
            let (model, trace) = train_gbm_traced(ds, &config.model)?;
            log::info!("internal GBM training r2 = {:.4}", trace.r_squared);
            Ok(Box::new(model))
        }
    }
}

fn writer_for(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut w = writer_for(out)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Internal(format!("write failed: {e}")))
}

fn to_json<S: serde::Serialize>(value: &S) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

struct Prepared {
    ds: Dataset,
    oracle: Box<dyn ModelOracle<f64>>,
    analysis: Analysis,
}

fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    let ds = load_dataset(config)?;
    let oracle = build_oracle(config, &ds)?;
    let analysis = run_pipeline(&ds, oracle.as_ref(), &config.vine)?;
    Ok(Prepared { ds, oracle, analysis })
}

fn correspondence(p: &Prepared, config: &RunConfig) -> Result<Option<CorrespondenceReport>, CliError> {
    let hm = h_matrix(&p.ds, p.oracle.as_ref(), config.h_sample, config.seed)?;
    match hstat_correspondence(&p.analysis, &hm) {
        Ok(r) => Ok(Some(r)),
        Err(VineError::NoClusters) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn analyze(config: &RunConfig, with_eval: bool) -> Result<(), CliError> {
    let p = prepare(config)?;
    let reports = if with_eval {
        let corr = correspondence(&p, config)?;
        if corr.is_none() {
            log::warn!("no VINE curves survived; H-statistic correspondence omitted");
        }
        Some(Reports {
            ceiling: Some(information_ceiling(&p.ds, p.oracle.as_ref(), &p.analysis)?),
            baseline: Some(random_cluster_baseline(&p.ds, &p.analysis, config.seed)?),
            correspondence: corr,
        })
    } else {
        None
    };
    let doc = export_document(&p.ds, &p.analysis, reports, &config.export);
    write_text(config.out.as_deref(), &to_json(&doc)?)?;

    let summary = summary_table(&p.ds, &p.analysis);
    if config.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

fn summary_table(ds: &Dataset, analysis: &Analysis) -> String {
    let mut t = Table::new(&[
        ("Feature", 20),
        ("Kind", 7),
        ("VINE", -4),
        ("Importance", -10),
        ("Interaction", -11),
        ("Explanations", 60),
    ]);
    for fa in &analysis.features {
        let col = &ds.schema()[fa.feature_index];
        let texts: Vec<String> = fa.vine_curves.iter().map(|v| v.predicate.render(ds.schema())).collect();
        t.row(&[
            col.name.clone(),
            format!("{:?}", col.kind).to_lowercase(),
            fa.vine_curves.len().to_string(),
            fixed(fa.scores.importance, 4),
            fixed(fa.scores.interaction_strength, 4),
            texts.join("; "),
        ]);
    }
    for &f in &analysis.skipped {
        t.row(&[ds.schema()[f].name.clone(), "skipped".into()]);
    }
    t.render()
}

pub fn eval(config: &RunConfig, which: Benchmark) -> Result<(), CliError> {
    let p = prepare(config)?;
    let (table, json) = match which {
        Benchmark::Ceiling => {
            let r = information_ceiling(&p.ds, p.oracle.as_ref(), &p.analysis)?;
            (ceiling_table(&r), to_json(&r)?)
        }
        Benchmark::Baseline => {
            let r = random_cluster_baseline(&p.ds, &p.analysis, config.seed)?;
            (baseline_table(&r), to_json(&r)?)
        }
        Benchmark::HstatCorr => {
            let r = correspondence(&p, config)?.ok_or(CliError::Vine(VineError::NoClusters))?;
            (correspondence_table(&r), to_json(&r)?)
        }
    };
    print!("{table}");
    if let Some(out) = &config.out {
        write_text(Some(out), &json)?;
    }
    Ok(())
}

fn ceiling_table(r: &CeilingReport) -> String {
    let mut t = Table::new(&[
        ("Dataset", 20),
        ("r2 PDP", -7),
        ("r2 VINE", -7),
        ("r2 ICE", -7),
        ("Multi-match", -11),
        ("No match", -8),
    ]);
    t.row(&[
        r.dataset.clone(),
        fixed(r.r2.pdp, 3),
        fixed(r.r2.vine, 3),
        fixed(r.r2.ice, 3),
        r.n_multi_match.to_string(),
        r.n_no_match.to_string(),
    ]);
    let mut out = t.render();
    out.push_str(&format!(
        "r2: pdp={} vine={} ice={}\n",
        fixed(r.r2.pdp, 3),
        fixed(r.r2.vine, 3),
        fixed(r.r2.ice, 3)
    ));
    if r.degenerate_variance {
        out.push_str("note: model output has zero variance; r2 reported as 1\n");
    }
    out
}

fn baseline_table(r: &BaselineReport) -> String {
    let mut t = Table::new(&[("Feature", 20), ("Real accuracy", -13), ("Random accuracy", -15)]);
    for f in &r.features {
        t.row(&[f.name.clone(), fixed(f.real_mean_accuracy, 3), fixed(f.random_mean_accuracy, 3)]);
    }
    t.row(&["(all clusters)".into(), fixed(r.real_mean_accuracy, 3), fixed(r.random_mean_accuracy, 3)]);
    t.render()
}

fn correspondence_table(r: &CorrespondenceReport) -> String {
    let mut t = Table::new(&[("Dataset", 20), ("% in Top 3", -10), ("Baseline %", -10)]);
    t.row(&[r.dataset.clone(), percent_label(r.pct_top3), percent_label(r.baseline)]);
    t.render()
}

pub fn hstat(config: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(config)?;
    let oracle = build_oracle(config, &ds)?;
    let hm = h_matrix(&ds, oracle.as_ref(), config.h_sample, config.seed)?;
    write_text(config.out.as_deref(), &hm.to_csv())
}

pub fn synth(n: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let ds: Dataset = synth_interaction(n, seed)?;
    let w = writer_for(out)?;
    ds.write_csv(w)?;
    Ok(())
}
