use log::info;
use reluwrap_core::diagnose::{
    coefficient_matrix, feature_importance, profile, svg, write_coefficient_csv, write_importance_csv,
    write_profile_csv,
};
use reluwrap_core::simplify::{merged_table, silhouette_scan};
use reluwrap_core::train::generate::balanced_default_feature_names;
use reluwrap_core::train::{gen_balanced_default, gen_cocircles, l1_sweep, write_sweep_csv, Splits};
use reluwrap_core::unwrap::{write_summary_csv, RegionSetDocument};
use reluwrap_core::{
    accuracy, auc, flatten, merge_regions, region_table, train, unwrap, Dataset, Error, MergedModel, NetworkSpec,
    NontrivialRule, Result, Standardizer, TrainConfig,
};
use serde::Serialize;

use crate::args::{
    DiagnoseArgs, FlattenArgs, GenerateArgs, Generator, MergeArgs, NetArgs, SweepArgs, TrainArgs, UnwrapArgs,
};
use crate::artifacts::{
    load_dataset, load_json, load_network, load_regions, load_splits, rows_for, select_rows, split_dataset, Run,
};

fn train_config(net: &NetArgs, lambda: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: net.hidden.clone(),
        l1_lambda: lambda,
        learning_rate: net.learning_rate,
        batch_size: net.batch_size,
        max_epochs: net.max_epochs,
        patience: net.patience,
        seed,
    }
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let seed = args.seed.seed;
    let mut run = Run::start("generate", &args.out.out_dir, Some(seed))?;
    let data = match args.kind {
        Generator::Cocircles => {
            let (x, y) = gen_cocircles(args.n, args.noise, args.factor, seed)?;
            Dataset::unnamed(x, y)?
        }
        Generator::BalancedDefault => {
            let (x, y, groups) = gen_balanced_default(args.n, args.d, seed)?;
            Dataset::new(balanced_default_feature_names(args.d), x, y)?.with_groups(groups)?
        }
    };
    run.write_with(&args.file_name, |buf| data.write_csv(buf))?;
    run.finish()
}

#[derive(Serialize)]
struct SplitMetrics {
    auc: f64,
    accuracy: f64,
}

#[derive(Serialize)]
struct Metrics {
    train: SplitMetrics,
    val: SplitMetrics,
    test: SplitMetrics,
}

fn split_metrics(net: &NetworkSpec, data: &Dataset) -> Result<SplitMetrics> {
    let logits = net.logits(&data.x)?;
    Ok(SplitMetrics {
        auc: auc(&logits, &data.y)?,
        accuracy: accuracy(&logits, &data.y, 0.5)?,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("document serializes")
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let seed = args.seed.seed;
    let mut run = Run::start("train", &args.out.out_dir, Some(seed))?;
    run.input(&args.data);
    let data = load_dataset(&args.data)?;
    let idx = split_dataset(&data, &args.net.fractions, seed)?;
    let splits = Splits::from_indices(&data, &idx);
    let config = train_config(&args.net, args.lambda, seed);
    info!("training {:?} on {} rows", config.hidden, splits.train.len());
    let net = train(&config, &splits.train.x, &splits.train.y, &splits.val.x, &splits.val.y)?;
    let metrics = Metrics {
        train: split_metrics(&net, &splits.train)?,
        val: split_metrics(&net, &splits.val)?,
        test: split_metrics(&net, &splits.test)?,
    };
    run.write("model.json", net.to_json())?;
    run.write("metrics.json", to_json(&metrics))?;
    run.write("splits.json", to_json(&idx))?;
    run.finish()
}

pub fn unwrap_cmd(args: &UnwrapArgs) -> Result<()> {
    let mut run = Run::start("unwrap", &args.out.out_dir, None)?;
    run.input(&args.model);
    run.input(&args.data);
    let net = load_network(&args.model)?;
    let data = load_dataset(&args.data)?;
    let (rows, split) = match &args.rows.splits {
        Some(path) => {
            run.input(path);
            let name = args.rows.split.as_str();
            (select_rows(&data, &load_splits(path)?, name)?, Some(name))
        }
        None => (data, None),
    };
    let mut regions = unwrap(&net, &rows.x)?;
    if let Some(name) = split {
        regions = regions.with_split(name);
    }
    info!("{} regions over {} rows", regions.len(), rows.len());
    let mut table = region_table(&regions, &rows.x, &rows.y)?;
    if let Some(k) = args.top {
        table.truncate(k);
    }
    run.write("regions.json", regions.to_json(!args.omit_indices))?;
    run.write_with("region_table.csv", |buf| write_summary_csv(&table, buf))?;
    run.finish()
}

fn feature_index(data: &Dataset, key: &str) -> Result<usize> {
    data.feature_index(key)
        .or_else(|| key.parse::<usize>().ok().filter(|&j| j < data.n_features()))
        .ok_or_else(|| Error::Input(format!("unknown feature `{key}`")))
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let mut run = Run::start("diagnose", &args.out.out_dir, None)?;
    run.input(&args.regions);
    run.input(&args.data);
    let doc: RegionSetDocument = load_json(&args.regions)?;
    let data = load_dataset(&args.data)?;
    if let Some(p) = &args.splits {
        run.input(p);
    }
    let rows = rows_for(doc.split.as_deref(), &data, args.splits.as_deref())?;
    let features: Vec<usize> = args
        .profile
        .iter()
        .map(|key| feature_index(&rows, key))
        .collect::<Result<_>>()?;
    let net = match &args.model {
        Some(p) => {
            run.input(p);
            Some(load_network(p)?)
        }
        None => None,
    };
    let regions = load_regions(doc, &rows, net.as_ref())?;
    let names = &rows.feature_names;

    if args.importance {
        let report = feature_importance(&regions, &rows.x)?;
        run.write_with("importance.csv", |buf| write_importance_csv(&report, names, buf))?;
        if args.svg {
            run.write("importance.svg", svg::importance_bars(&report, names, args.top))?;
        }
    }
    if args.pcplot {
        let scale = args.standardize.then(|| Standardizer::fit(&rows.x));
        let matrix = coefficient_matrix(&regions, scale.as_ref())?;
        run.write_with("pc_matrix.csv", |buf| write_coefficient_csv(&matrix, names, buf))?;
        if args.svg {
            let mut axes = names.clone();
            axes.push("intercept".into());
            run.write("pcplot.svg", svg::parallel_coordinates(&matrix, &axes))?;
        }
    }
    for j in features {
        let segments = profile(&regions, &rows.x, j, &NontrivialRule::default())?;
        let stem = format!("profile_{}", names[j]);
        run.write_with(&format!("{stem}.csv"), |buf| write_profile_csv(&segments, buf))?;
        if args.svg {
            run.write(&format!("{stem}.svg"), svg::profile_lines(&segments, &names[j]))?;
        }
    }
    run.finish()
}

#[derive(Serialize)]
struct SilhouetteRow {
    k: usize,
    silhouette: f64,
}

pub fn merge(args: &MergeArgs) -> Result<()> {
    let seed = args.seed.seed;
    let mut run = Run::start("merge", &args.out.out_dir, Some(seed))?;
    for p in [&args.model, &args.regions, &args.data] {
        run.input(p);
    }
    if let Some(p) = &args.splits {
        run.input(p);
    }
    let net = load_network(&args.model)?;
    let doc: RegionSetDocument = load_json(&args.regions)?;
    let rows = rows_for(doc.split.as_deref(), &load_dataset(&args.data)?, args.splits.as_deref())?;
    let regions = load_regions(doc, &rows, Some(&net))?;
    if regions.net_fingerprint() != net.fingerprint() {
        return Err(Error::StaleIndex {
            expected: regions.net_fingerprint().to_string(),
            found: net.fingerprint(),
        });
    }
    let merged = merge_regions(&regions, &rows.x, &rows.y, args.k, args.c, seed)?;
    let table = merged_table(&merged, &net, &rows.x, &rows.y)?;
    run.write("merged.json", merged.to_json())?;
    run.write_with("merged_table.csv", |buf| write_summary_csv(&table, buf))?;
    if args.scan {
        let scores: Vec<SilhouetteRow> = silhouette_scan(&regions, &rows.x, 2..=10, seed)?
            .into_iter()
            .map(|(k, silhouette)| SilhouetteRow { k, silhouette })
            .collect();
        run.write("silhouette.json", to_json(&scores))?;
    }
    run.finish()
}

fn model_aucs(net: &NetworkSpec, merged: &MergedModel, flat: &NetworkSpec, data: &Dataset) -> Result<[f64; 3]> {
    let (merged_logits, _) = merged.predict_all(net, &data.x)?;
    Ok([
        auc(&net.logits(&data.x)?, &data.y)?,
        auc(&merged_logits, &data.y)?,
        auc(&flat.logits(&data.x)?, &data.y)?,
    ])
}

pub fn flatten_cmd(args: &FlattenArgs) -> Result<()> {
    let mut run = Run::start("flatten", &args.out.out_dir, None)?;
    for p in [&args.merged, &args.data, &args.model] {
        run.input(p);
    }
    let merged = MergedModel::from_json(&std::fs::read_to_string(&args.merged)?)?;
    let net = load_network(&args.model)?;
    let data = load_dataset(&args.data)?;
    let fit_rows = match &args.splits {
        Some(p) => {
            run.input(p);
            let idx = load_splits(p)?;
            Some((select_rows(&data, &idx, "train")?, select_rows(&data, &idx, "test")?))
        }
        None => None,
    };
    let (fit_x, fit_y) = match &fit_rows {
        Some((train, _)) => (&train.x, &train.y),
        None => (&data.x, &data.y),
    };
    let flat = flatten(&merged, fit_x, fit_y, args.c)?;
    let names = ["relu_net", "merge_net", "fl_net"];
    let mut wtr = csv::Writer::from_writer(Vec::new());
    match &fit_rows {
        Some((train, test)) => {
            let tr = model_aucs(&net, &merged, flat.network(), train)?;
            let te = model_aucs(&net, &merged, flat.network(), test)?;
            wtr.write_record(["model", "train_auc", "test_auc"])?;
            for i in 0..3 {
                wtr.write_record([names[i].to_string(), format!("{:.6}", tr[i]), format!("{:.6}", te[i])])?;
            }
        }
        None => {
            let all = model_aucs(&net, &merged, flat.network(), &data)?;
            wtr.write_record(["model", "auc"])?;
            for i in 0..3 {
                wtr.write_record([names[i].to_string(), format!("{:.6}", all[i])])?;
            }
        }
    }
    let table = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    run.write("flnet.json", flat.network().to_json())?;
    run.write("comparison.csv", table)?;
    run.finish()
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if args.lambdas.len() < 2 {
        return Err(Error::Input(format!(
            "a sweep needs at least two lambdas, got {}",
            args.lambdas.len()
        )));
    }
    let seed = args.seed.seed;
    let mut run = Run::start("sweep", &args.out.out_dir, Some(seed))?;
    run.input(&args.data);
    let data = load_dataset(&args.data)?;
    let splits = Splits::from_indices(&data, &split_dataset(&data, &args.net.fractions, seed)?);
    let config = train_config(&args.net, 0.0, seed);
    let rows = l1_sweep(&config, &args.lambdas, &splits, &NontrivialRule::default())?;
    run.write_with("sweep.csv", |buf| write_sweep_csv(&rows, buf))?;
    run.finish()
}

