use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use issvd::io::{
    load_views, read_document, save_views, write_document, LoadOptions, MetricsDocument,
    ResultDocument, TruthDocument, SCHEMA_VERSION,
};
use issvd::metrics::score;
use issvd::{assign_unclustered, fit, Scenario};

use crate::args::{BiclusterArgs, Command, EvaluateArgs, ScenarioKind, SimulateArgs};
use crate::{benchmark, CmdResult, Failure};

pub fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Bicluster(a) => bicluster(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Benchmark(a) => benchmark::run(&a),
    }
}

pub fn scenario(kind: ScenarioKind, case: u8, scalar: f64, sigma: f64) -> Scenario {
    match kind {
        ScenarioKind::One => Scenario::One { case, scalar, sigma },
        ScenarioKind::Two => Scenario::Two { sigma },
        ScenarioKind::Outlier => Scenario::Outlier,
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn simulate(a: &SimulateArgs) -> CmdResult {
    let (data, truth) = scenario(a.scenario, a.case, a.scalar, a.sigma).generate(a.seed)?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let paths = save_views(&data, &a.out_dir)?;
    let doc = TruthDocument {
        schema_version: SCHEMA_VERSION,
        truth,
        view_files: paths.iter().map(|p| file_name(p)).collect(),
    };
    write_document(&a.out_dir.join("truth.json"), &doc)?;
    log::info!("wrote {} views and truth.json to {}", paths.len(), a.out_dir.display());
    Ok(())
}

fn bicluster(a: &BiclusterArgs) -> CmdResult {
    let config = a.fit.to_config()?;
    let opts = LoadOptions {
        header: a.input.header,
        row_labels: a.input.row_labels,
        delimiter: a.input.delimiter,
    };
    let data = load_views(&a.views, &opts)?;
    let start = Instant::now();
    let model = fit(&data, &config)?;
    let assigned = if a.fit.rows_nc {
        None
    } else {
        Some(assign_unclustered(&model, &data)?.row_membership)
    };
    let wall = start.elapsed().as_secs_f64();

    let files = a.views.iter().map(|p| p.display().to_string()).collect();
    let mut doc = ResultDocument::from_model(&model, &config, files, wall);
    doc.sample_ids = data.sample_ids().map(<[String]>::to_vec);
    doc.assigned_row_membership = assigned;
    write_document(&a.out, &doc)?;
    log::info!("{} biclusters in {wall:.2}s", doc.k_detected);
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> CmdResult {
    let result: ResultDocument = read_document(&a.result)?;
    let truth: TruthDocument = read_document(&a.truth)?;
    let unclustered = match &result.assigned_row_membership {
        Some(m) => m.iter().filter(|&&l| l == 0).count(),
        None => result.unclustered_count(),
    };
    let metrics = score(&result.biclusters(), &truth.truth.biclusters, unclustered)?;
    let doc = MetricsDocument {
        schema_version: SCHEMA_VERSION,
        result_file: a.result.display().to_string(),
        truth_file: a.truth.display().to_string(),
        metrics,
    };
    match &a.out {
        Some(path) => write_document(path, &doc)?,
        None => {
            let text = serde_json::to_string_pretty(&doc).map_err(Failure::input)?;
            println!("{text}");
        }
    }
    Ok(())
}
