use std::path::Path;

use ct_core::customize::{
    build_grouped_partition, build_joint_partition, fit_ct, fit_standard, predict_ct, resolve_rejections, CtModel,
    FitSettings, RejectionPolicy,
};
use ct_core::data::{load_dataset, load_features, write_predictions, Dataset, FeatureTable, LoadOptions, PredictionRow};
use ct_core::glm::{default_lambda_min_ratio, lambda_fractions, GlmFamily};
use ct_core::selection::{
    cv_select, cv_select_grouped, knn_baseline, knn_cv_select, CvConfig, CvSelection, LossKind, LossSpec, Prediction,
};
use ct_core::simulation::{run_study, Method, Setting, StudyConfig};
use ct_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::Run;
use crate::{CvFitArgs, DataArgs, FamilyArg, KnnArgs, PathArgs, PredictArgs, SimulateArgs, StArgs};

/// Everything `ct predict` needs besides the data files.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    response: String,
    group_column: Option<String>,
    feature_names: Vec<String>,
    class_names: Option<Vec<String>>,
    /// Absent when fitted with --no-cv.
    selection: Option<CvSelection>,
    model: CtModel,
}

struct Inputs {
    train: Dataset,
    test: FeatureTable,
    family: GlmFamily,
    loss: LossSpec,
}

fn input_error(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

fn load_inputs(run: &mut Run, data: &DataArgs) -> Result<Inputs> {
    run.input("train", &data.train);
    run.input("test", &data.test);
    let classification = matches!(data.family, Some(FamilyArg::Binomial | FamilyArg::Multinomial));
    let mut opts = LoadOptions::new(&data.response).classification(classification);
    if let Some(g) = &data.group {
        opts = opts.group(g);
    }
    let train = load_dataset(&data.train, &opts)?;
    let test = load_features(&data.test, &train.feature_names, data.group.as_deref())?;
    let family = match (data.family, train.response.n_classes()) {
        (None, _) => GlmFamily::for_response(&train.response),
        (Some(FamilyArg::Gaussian), _) => GlmFamily::Gaussian,
        (Some(FamilyArg::Binomial), _) => GlmFamily::Binomial,
        (Some(FamilyArg::Multinomial), Some(c)) => GlmFamily::Multinomial { n_classes: c },
        (Some(FamilyArg::Multinomial), None) => return Err(input_error("multinomial family needs class labels")),
    };
    family
        .check_response(&train.response)
        .map_err(|e| input_error(format!("--family: {e}")))?;
    let loss = parse_loss(&data.loss_weights, &train)?;
    run.resolve("family", family);
    run.resolve("loss", &loss);
    Ok(Inputs {
        train,
        test,
        family,
        loss,
    })
}

/// `name=weight` pairs keyed by class label; unnamed classes weigh 1.
fn parse_loss(pairs: &[String], train: &Dataset) -> Result<LossSpec> {
    let Some(names) = &train.class_names else {
        if !pairs.is_empty() {
            return Err(input_error("--loss-weights applies only to class labels"));
        }
        return Ok(LossSpec::squared_error());
    };
    if pairs.is_empty() {
        return LossSpec::misclassification(None);
    }
    let mut weights = vec![1.0; names.len()];
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| input_error(format!("--loss-weights: expected class=weight, got '{pair}'")))?;
        let class = names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| input_error(format!("--loss-weights: unknown class '{name}'")))?;
        weights[class] = value
            .trim()
            .parse()
            .map_err(|_| input_error(format!("--loss-weights: '{value}' is not a number")))?;
    }
    LossSpec::misclassification(Some(weights)).map_err(|e| input_error(format!("--loss-weights: {e}")))
}

fn fit_settings(run: &mut Run, inputs: &Inputs, path: &PathArgs) -> Result<FitSettings> {
    let ratio = path
        .lambda_min_ratio
        .unwrap_or_else(|| default_lambda_min_ratio(inputs.train.n_rows(), inputs.train.n_features()));
    run.resolve("lambda_min_ratio", ratio);
    let fractions =
        lambda_fractions(path.lambda_count, ratio).map_err(|e| input_error(format!("--lambda-count/--lambda-min-ratio: {e}")))?;
    Ok(FitSettings::new(inputs.family, fractions))
}

fn cv_config(settings: FitSettings, inputs: &Inputs, path: &PathArgs, seed: u64) -> CvConfig {
    let mut cv = CvConfig::new(settings, inputs.loss.clone());
    cv.folds = path.folds;
    cv.seed = seed;
    cv.stratify = path.stratify;
    cv
}

fn decision_weights(loss: &LossSpec) -> Option<Vec<f64>> {
    match loss.kind {
        LossKind::Misclassification => loss.class_weights.clone(),
        LossKind::SquaredError => None,
    }
}

fn format_prediction(p: Prediction, class_names: Option<&[String]>) -> String {
    match (p, class_names) {
        (Prediction::Real(v), _) => v.to_string(),
        (Prediction::Class(c), Some(names)) => names[c].clone(),
        (Prediction::Class(c), None) => c.to_string(),
    }
}

pub fn cv_fit(args: &CvFitArgs) -> Result<()> {
    let data = &args.data;
    let mut run = Run::start("cv-fit", &data.out_dir, data.threads)?;
    let inputs = load_inputs(&mut run, data)?;
    let settings = fit_settings(&mut run, &inputs, &args.path)?;
    let mut cv = cv_config(settings.clone(), &inputs, &args.path, data.seed);
    cv.g_grid = args.g_grid.clone();
    cv.standardize_distances = args.standardize_distances;

    let x = inputs.train.features.view();
    let xt = inputs.test.features.view();
    let y = &inputs.train.response;
    let grouped = match (&inputs.train.group_ids, &inputs.test.group_ids) {
        (Some(train), Some(test)) => Some((train, test)),
        _ => None,
    };
    let report = if args.no_cv {
        None
    } else if let Some((train_groups, _)) = grouped {
        Some(cv_select_grouped(x, y, train_groups, args.r_neighbors, &cv)?)
    } else {
        Some(cv_select(x, y, &cv)?)
    };
    let (g, fraction_index) = match &report {
        Some(r) => (r.selected.g, r.selected.fraction_index),
        None => {
            if grouped.is_none() && args.g_grid.len() != 1 {
                return Err(input_error("--no-cv needs exactly one --g-grid value"));
            }
            if args.lambda_index >= settings.fractions.len() {
                return Err(input_error(format!(
                    "--lambda-index must be below --lambda-count ({})",
                    settings.fractions.len()
                )));
            }
            (args.g_grid.first().copied(), args.lambda_index)
        }
    };
    let partition = match grouped {
        Some((_, test_groups)) => build_grouped_partition(x, xt, test_groups, args.r_neighbors)?,
        None => build_joint_partition(x, xt, g.expect("joint mode has a cluster count"), args.standardize_distances)?,
    };
    let mut model = fit_ct(partition, x, y, &settings, fraction_index, decision_weights(&inputs.loss))?;
    model.feature_names = inputs.train.feature_names.clone();
    if !model.partition.rejected_clusters.is_empty() {
        log::warn!(
            "{} test cluster(s) have no training rows; use `ct predict --resolve-rejections`",
            model.partition.rejected_clusters.len()
        );
    }

    if let Some(report) = &report {
        run.resolve("selected", &report.selected);
        run.write_json("cv_report.json", report)?;
        let surface = run.create("cv_surface.csv")?;
        report.write_csv(surface)?;
    }
    run.write_json(
        "model.json",
        &ModelFile {
            response: data.response.clone(),
            group_column: data.group.clone(),
            feature_names: inputs.train.feature_names.clone(),
            class_names: inputs.train.class_names.clone(),
            selection: report.map(|r| r.selected),
            model,
        },
    )?;
    run.finish(args, Some(data.seed))
}

fn read_model(path: &Path) -> Result<ModelFile> {
    let file = std::fs::File::open(path).map_err(|source| Error::Open {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| input_error(format!("{} is not a valid model file: {e}", path.display())))
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let mut run = Run::start("predict", &args.out_dir, args.threads)?;
    run.input("model", &args.model);
    run.input("test", &args.test);
    let file = read_model(&args.model)?;
    let test = load_features(&args.test, &file.feature_names, None)?;
    let mut model = file.model;
    if args.resolve_rejections {
        let train_path = args
            .train
            .as_ref()
            .ok_or_else(|| input_error("--resolve-rejections needs --train"))?;
        run.input("train", train_path);
        let mut opts = LoadOptions::new(&file.response).classification(file.class_names.is_some());
        if let Some(g) = &file.group_column {
            opts = opts.group(g);
        }
        let train = load_dataset(train_path, &opts)?;
        if train.feature_names != file.feature_names || train.class_names != file.class_names {
            return Err(input_error("--train does not match the training file the model was fitted on"));
        }
        model = resolve_rejections(
            &model,
            train.features.view(),
            &train.response,
            RejectionPolicy {
                min_train: args.min_train,
            },
        )?;
    }
    let predictions = predict_ct(&model, test.features.view())?;

    let rows: Vec<PredictionRow> = predictions
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| PredictionRow {
            row_index: i,
            prediction: r.value.map(|p| format_prediction(p, file.class_names.as_deref())),
            cluster_id: r.cluster,
            rejected: r.value.is_none(),
        })
        .collect();
    let out = run.create("predictions.csv")?;
    write_predictions(out, &rows)?;

    // One line per test row whose cluster had no training rows.
    let out = run.create("rejections.csv")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_index", "cluster_id", "cut_height", "resolved_height", "resolved_train_size"])?;
    let cut = model.partition.cut_height.unwrap_or(0.0);
    for &k in &model.partition.rejected_clusters {
        let record = model.rejections.iter().find(|r| r.cluster == k);
        for &i in &model.partition.clusters[k].test {
            w.write_record([
                i.to_string(),
                k.to_string(),
                cut.to_string(),
                record.map_or(String::new(), |r| r.resolved_height.to_string()),
                record.map_or(String::new(), |r| r.train.len().to_string()),
            ])?;
        }
    }
    w.flush()?;
    run.resolve("rejected_rows", predictions.rejected().len());
    run.finish(args, None)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut run = Run::start("simulate", &args.out_dir, args.threads)?;
    let setting = Setting::parse(&args.setting).map_err(|e| input_error(format!("--setting: {e}")))?;
    let methods = args
        .methods
        .iter()
        .map(|m| match m.trim().to_ascii_lowercase().as_str() {
            "ct" => Ok(Method::Ct),
            "st" => Ok(Method::St),
            "knn" => Ok(Method::Knn),
            other => Err(input_error(format!("--methods: unknown method '{other}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if args.seeds == 0 {
        return Err(input_error("--seeds must be at least 1"));
    }
    let mut config = StudyConfig::new(setting, args.sigma_c.clone(), (args.seed..args.seed + args.seeds).collect());
    config.methods = methods;
    config.g_grid = args.g_grid.clone();
    config.n_lambda = args.lambda_count;
    config.folds = args.folds;
    let (n, m, p) = setting.dims();
    run.resolve("n", n);
    run.resolve("m", m);
    run.resolve("p", p);
    run.resolve("seeds", &config.seeds);
    let results = run_study(&config)?;
    results.write_rows(run.create("study_cells.csv")?)?;
    results.write_summary(run.create("study_summary.csv")?)?;
    run.finish(args, Some(args.seed))
}

pub fn baseline_st(args: &StArgs) -> Result<()> {
    let data = &args.data;
    let mut run = Run::start("baseline st", &data.out_dir, data.threads)?;
    let inputs = load_inputs(&mut run, data)?;
    let settings = fit_settings(&mut run, &inputs, &args.path)?;
    let mut cv = cv_config(settings.clone(), &inputs, &args.path, data.seed);
    cv.g_grid = vec![1];
    let x = inputs.train.features.view();
    let report = cv_select(x, &inputs.train.response, &cv)?;
    let model = fit_standard(x, &inputs.train.response, &settings, report.selected.fraction_index)?;
    let weights = decision_weights(&inputs.loss);
    let values = model.predict(inputs.test.features.view(), weights.as_deref())?;
    write_plain_predictions(&mut run, &values, inputs.train.class_names.as_deref())?;
    run.resolve("selected", &report.selected);
    run.write_json("cv_report.json", &report)?;
    run.finish(args, Some(data.seed))
}

pub fn baseline_knn(args: &KnnArgs) -> Result<()> {
    let data = &args.data;
    let mut run = Run::start("baseline knn", &data.out_dir, data.threads)?;
    let inputs = load_inputs(&mut run, data)?;
    let x = inputs.train.features.view();
    let report = knn_cv_select(x, &inputs.train.response, &args.k_grid, args.folds, data.seed, &inputs.loss)?;
    let values = knn_baseline(x, &inputs.train.response, inputs.test.features.view(), report.selected_k)?;
    write_plain_predictions(&mut run, &values, inputs.train.class_names.as_deref())?;
    run.resolve("selected_k", report.selected_k);
    run.write_json("knn_report.json", &report)?;
    run.finish(args, Some(data.seed))
}

fn write_plain_predictions(run: &mut Run, values: &[Prediction], class_names: Option<&[String]>) -> Result<()> {
    let rows: Vec<PredictionRow> = values
        .iter()
        .enumerate()
        .map(|(i, &p)| PredictionRow {
            row_index: i,
            prediction: Some(format_prediction(p, class_names)),
            cluster_id: 0,
            rejected: false,
        })
        .collect();
    write_predictions(run.create("predictions.csv")?, &rows)
}
