//! Subcommand implementations. Each takes resolved options, runs the
//! corresponding pipeline, and writes CSV outputs plus a manifest into the
//! output directory. All outputs are deterministic under a fixed seed.

use std::fs;
use std::path::{Path, PathBuf};

use fcurve_core::augment::AugmentedFeatures;
use fcurve_core::cart::{
    grow, prune, separation_curve, GrowParams, Impurity, NodeKind, PruneRule, Tree,
};
use fcurve_core::dataio::{load_ucr, unit_grid, write_table, write_ucr, Cell, CurveSet, Table};
use fcurve_core::forest::{train_forest, Forest, ForestParams, OobOutcome};
use fcurve_core::importance::{importance_report, EvalSet, ImportanceParams};
use fcurve_core::simgen::{generate_split, ScenarioConfig};
use fcurve_core::{Error, Result};

use crate::grid::{cells_table, run_file_grid, run_scenario_grid, summary_table, GridSpec};
use crate::manifest::Manifest;
use crate::space::{accuracy, confusion, FeatureSpace, ModelKind, SavedModel};

/// Feature-construction options shared by the training commands.
#[derive(Debug, Clone, Copy)]
pub struct FitOpts {
    pub n_basis: Option<usize>,
    pub order: usize,
    pub k: usize,
    pub r_max: usize,
}

impl Default for FitOpts {
    fn default() -> Self {
        FitOpts {
            n_basis: None,
            order: 4,
            k: 10,
            r_max: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeOpts {
    pub impurity: Impurity,
    pub prune_rule: PruneRule,
    pub folds: usize,
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeOpts {
    fn default() -> Self {
        let g = GrowParams::standalone(Impurity::Gini);
        TreeOpts {
            impurity: Impurity::Gini,
            prune_rule: PruneRule::Min,
            folds: 10,
            min_split: g.min_split,
            min_leaf: g.min_leaf,
            max_depth: g.max_depth,
        }
    }
}

impl TreeOpts {
    fn grow_params(&self) -> GrowParams {
        GrowParams {
            impurity: self.impurity,
            min_split: self.min_split,
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestOpts {
    pub trees: usize,
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub impurity: Impurity,
}

impl Default for ForestOpts {
    fn default() -> Self {
        ForestOpts {
            trees: 500,
            mtry: None,
            bootstrap: true,
            impurity: Impurity::Gini,
        }
    }
}

impl ForestOpts {
    fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            mtry: self.mtry,
            seed,
            bootstrap: self.bootstrap,
            grow: GrowParams::forest(self.impurity),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ImportanceOpts {
    pub reps: usize,
    pub bins: usize,
    pub eval: EvalSet,
}

impl Default for ImportanceOpts {
    fn default() -> Self {
        ImportanceOpts {
            reps: 30,
            bins: 4,
            eval: EvalSet::Oob,
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn describe_fit(m: &mut Manifest, fit: &FitOpts) {
    m.set_opt("n_basis", fit.n_basis);
    m.set("order", fit.order);
    m.set("k", fit.k);
    m.set("r_max", fit.r_max);
}

fn impurity_name(i: Impurity) -> &'static str {
    match i {
        Impurity::Gini => "gini",
        Impurity::Entropy => "entropy",
    }
}

fn metrics_table(rows: &[(&str, f64, &str)]) -> Table {
    let mut t = Table::new(&["metric", "value", "note"]);
    for (name, value, note) in rows {
        t.push(vec![
            Cell::Str((*name).into()),
            Cell::Float(*value),
            Cell::Str((*note).into()),
        ]);
    }
    t
}

fn confusion_table(matrix: &[Vec<usize>], class_names: &[String]) -> Table {
    let mut header: Vec<String> = vec!["actual".into()];
    header.extend(class_names.iter().map(|c| format!("pred_{c}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header_refs);
    for (i, row) in matrix.iter().enumerate() {
        let mut cells = vec![Cell::Str(class_names[i].clone())];
        cells.extend(row.iter().map(|&v| Cell::Int(v as i64)));
        t.push(cells);
    }
    t
}

/// `simulate`: writes scenario train/test files in the loader's format.
pub fn cmd_simulate(
    scenario: u8,
    n_per_group: usize,
    grid_points: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let config = ScenarioConfig::with_size(scenario, n_per_group, grid_points, seed)?;
    let (train, test) = generate_split(&config)?;
    write_ucr(&train, out.join("train.tsv"))?;
    write_ucr(&test, out.join("test.tsv"))?;
    let mut m = Manifest::new("simulate");
    m.set("scenario", scenario)
        .set("n_per_group", n_per_group)
        .set("grid_points", grid_points)
        .set("seed", seed)
        .set("classes", config.n_classes())
        .set("groups", format!("{:?}", config.groups));
    m.write(out)
}

/// `smooth`: least-squares coefficients per curve, optionally with the basis
/// evaluated on a grid for plotting.
pub fn cmd_smooth(
    input: &Path,
    n_basis: Option<usize>,
    order: usize,
    dump_basis: bool,
    grid_points: usize,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let curves = load_ucr(input)?;
    let s = n_basis.unwrap_or_else(|| {
        fcurve_core::basis::default_n_basis(curves.n_points(), order)
    });
    let basis = fcurve_core::basis::BasisSystem::new(s, order)?;
    let smoothed = fcurve_core::basis::smooth(&curves, &basis)?;

    let mut header: Vec<String> = vec!["label".into()];
    header.extend((1..=s).map(|j| format!("c_{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header_refs);
    for i in 0..smoothed.n_curves() {
        let mut row = vec![Cell::Str(
            curves.class_names()[curves.labels()[i]].clone(),
        )];
        row.extend((0..s).map(|j| Cell::Float(smoothed.coeffs()[(i, j)])));
        table.push(row);
    }
    write_table(&table, out.join("coefficients.csv"))?;

    if dump_basis {
        let grid = unit_grid(grid_points);
        let values = basis.eval(&grid, 0)?;
        let mut header: Vec<String> = vec!["t".into()];
        header.extend((1..=s).map(|j| format!("phi_{j}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut table = Table::new(&header_refs);
        for (i, &t) in grid.iter().enumerate() {
            let mut row = vec![Cell::Float(t)];
            row.extend((0..s).map(|j| Cell::Float(values[(i, j)])));
            table.push(row);
        }
        write_table(&table, out.join("basis_values.csv"))?;
    }

    let mut m = Manifest::new("smooth");
    m.set("input", input.display())
        .set("n_basis", s)
        .set("order", order)
        .set("dump_basis", dump_basis)
        .set("grid_points", grid_points);
    m.write(out)
}

/// `fpca-dump`: eigenvalues with explained fractions, plus mean and
/// eigenfunction values on a grid, one file per derivative order.
pub fn cmd_fpca_dump(input: &Path, fit: FitOpts, grid_points: usize, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let curves = load_ucr(input)?;
    let space = FeatureSpace::fit(&curves, fit.n_basis, fit.order, fit.k, fit.r_max)?;
    let grid = unit_grid(grid_points);

    let mut eig_table = Table::new(&["r", "k", "eigenvalue", "explained_fraction"]);
    for model in &space.models {
        let k = model.n_components();
        for comp in 1..=k {
            let (_, frac) = model.explained_variance(comp)?;
            let prev = if comp == 1 {
                0.0
            } else {
                model.explained_variance(comp - 1)?.1
            };
            eig_table.push(vec![
                Cell::Int(model.deriv_order() as i64),
                Cell::Int(comp as i64),
                Cell::Float(model.eigenvalues()[comp - 1]),
                Cell::Float(frac - prev),
            ]);
        }
        let funcs = model.eval_eigenfunctions(&grid)?;
        let mean = model.eval_mean(&grid)?;
        let mut header: Vec<String> = vec!["t".into(), "mean".into()];
        header.extend((1..=k).map(|c| format!("xi_{c}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut table = Table::new(&header_refs);
        for (i, &t) in grid.iter().enumerate() {
            let mut row = vec![Cell::Float(t), Cell::Float(mean[i])];
            row.extend((0..k).map(|c| Cell::Float(funcs[(i, c)])));
            table.push(row);
        }
        write_table(
            &table,
            out.join(format!("eigenfunctions_r{}.csv", model.deriv_order())),
        )?;
    }
    write_table(&eig_table, out.join("eigenvalues.csv"))?;

    let mut m = Manifest::new("fpca-dump");
    m.set("input", input.display()).set("grid_points", grid_points);
    describe_fit(&mut m, &fit);
    m.set("k_effective", space.k);
    m.write(out)
}

fn load_pair(train: &Path, test: Option<&Path>) -> Result<(CurveSet, Option<CurveSet>)> {
    let train_set = load_ucr(train)?;
    let test_set = test.map(load_ucr).transpose()?;
    Ok((train_set, test_set))
}

fn apparent_note(train: &Path, test: &Path) -> &'static str {
    if train == test {
        "apparent (test = train)"
    } else {
        ""
    }
}

/// `train-tree`: fit the feature space, grow and prune a tree, report
/// apparent and test accuracy, and save the full model.
pub fn cmd_train_tree(
    train: &Path,
    test: Option<&Path>,
    fit: FitOpts,
    opts: TreeOpts,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let (train_set, test_set) = load_pair(train, test)?;
    let space = FeatureSpace::fit(&train_set, fit.n_basis, fit.order, fit.k, fit.r_max)?;
    let ftrain = space.features(&train_set)?;
    let grown = grow(&ftrain, &opts.grow_params())?;
    let pruned = prune(&grown, &ftrain, opts.folds, opts.prune_rule, seed)?;

    let apparent = accuracy(&pruned.predict(&ftrain)?, train_set.labels());
    let mut metrics = vec![
        ("tree_apparent_accuracy", apparent, ""),
        ("tree_leaves_grown", grown.n_leaves() as f64, ""),
        ("tree_leaves_pruned", pruned.n_leaves() as f64, ""),
    ];
    if let (Some(test_path), Some(test_set)) = (test, test_set.as_ref()) {
        let ftest = space.features(test_set)?;
        let preds = pruned.predict(&ftest)?;
        let note = apparent_note(train, test_path);
        metrics.push(("tree_test_accuracy", accuracy(&preds, test_set.labels()), note));
        write_table(
            &confusion_table(
                &confusion(&preds, test_set.labels(), test_set.n_classes()),
                test_set.class_names(),
            ),
            out.join("confusion.csv"),
        )?;
    }
    write_table(&metrics_table(&metrics), out.join("metrics.csv"))?;

    let mut cp = Table::new(&["alpha", "n_leaves", "cv_error", "cv_se"]);
    for entry in pruned.complexity_table() {
        cp.push(vec![
            Cell::Float(entry.alpha),
            Cell::Int(entry.n_leaves as i64),
            Cell::Float(entry.cv_error),
            Cell::Float(entry.cv_se),
        ]);
    }
    write_table(&cp, out.join("complexity.csv"))?;

    let saved = SavedModel::new(
        space,
        train_set.class_names().to_vec(),
        ModelKind::Tree(pruned),
    );
    fs::write(out.join("model.json"), saved.to_json())
        .map_err(|e| Error::io(out.join("model.json").display().to_string(), e))?;

    let mut m = Manifest::new("train-tree");
    m.set("train", train.display());
    m.set_opt("test", test.map(|p| p.display().to_string()));
    describe_fit(&mut m, &fit);
    m.set("impurity", impurity_name(opts.impurity))
        .set(
            "prune",
            match opts.prune_rule {
                PruneRule::Min => "min",
                PruneRule::OneSe => "1se",
            },
        )
        .set("folds", opts.folds)
        .set("min_split", opts.min_split)
        .set("min_leaf", opts.min_leaf)
        .set("max_depth", opts.max_depth)
        .set("seed", seed);
    m.write(out)
}

/// `train-forest`: fit the feature space, train the forest, report apparent,
/// test, and out-of-bag error, and save the full model.
pub fn cmd_train_forest(
    train: &Path,
    test: Option<&Path>,
    fit: FitOpts,
    opts: ForestOpts,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let (train_set, test_set) = load_pair(train, test)?;
    let space = FeatureSpace::fit(&train_set, fit.n_basis, fit.order, fit.k, fit.r_max)?;
    let ftrain = space.features(&train_set)?;
    let forest = train_forest(&ftrain, &opts.params(seed))?;

    let apparent = accuracy(&forest.predict(&ftrain)?, train_set.labels());
    let mut metrics = vec![
        ("forest_apparent_accuracy", apparent, ""),
        ("forest_trees", forest.n_trees() as f64, ""),
        ("forest_mtry", forest.mtry() as f64, ""),
    ];
    match forest.oob_error(&ftrain)? {
        OobOutcome::Estimate { error, n_scored } => {
            metrics.push(("forest_oob_error", error, ""));
            metrics.push(("forest_oob_rows", n_scored as f64, ""));
        }
        OobOutcome::NoCoverage => metrics.push(("forest_oob_error", f64::NAN, "no OOB coverage")),
    }
    if let (Some(test_path), Some(test_set)) = (test, test_set.as_ref()) {
        let ftest = space.features(test_set)?;
        let preds = forest.predict(&ftest)?;
        let note = apparent_note(train, test_path);
        metrics.push((
            "forest_test_accuracy",
            accuracy(&preds, test_set.labels()),
            note,
        ));
        write_table(
            &confusion_table(
                &confusion(&preds, test_set.labels(), test_set.n_classes()),
                test_set.class_names(),
            ),
            out.join("confusion.csv"),
        )?;
    }
    write_table(&metrics_table(&metrics), out.join("metrics.csv"))?;

    let saved = SavedModel::new(
        space,
        train_set.class_names().to_vec(),
        ModelKind::Forest(forest),
    );
    fs::write(out.join("model.json"), saved.to_json())
        .map_err(|e| Error::io(out.join("model.json").display().to_string(), e))?;

    let mut m = Manifest::new("train-forest");
    m.set("train", train.display());
    m.set_opt("test", test.map(|p| p.display().to_string()));
    describe_fit(&mut m, &fit);
    m.set("trees", opts.trees)
        .set_opt("mtry", opts.mtry)
        .set("bootstrap", opts.bootstrap)
        .set("impurity", impurity_name(opts.impurity))
        .set("seed", seed);
    m.write(out)
}

/// `predict`: apply a saved model to a curve file.
pub fn cmd_predict(model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let text = fs::read_to_string(model_path)
        .map_err(|e| Error::io(model_path.display().to_string(), e))?;
    let saved = SavedModel::from_json(&text)?;
    let curves = load_ucr(input)?;
    let features = saved.space.features(&curves)?;

    let (preds, proba) = match &saved.model {
        ModelKind::Tree(tree) => (tree.predict(&features)?, None),
        ModelKind::Forest(forest) => (
            forest.predict(&features)?,
            Some(forest.predict_proba(&features)?),
        ),
    };

    let mut header: Vec<String> = vec![
        "index".into(),
        "predicted".into(),
        "actual".into(),
        "correct".into(),
    ];
    if proba.is_some() {
        header.extend(saved.class_names.iter().map(|c| format!("proba_{c}")));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header_refs);
    for i in 0..curves.n_curves() {
        let actual = curves.labels()[i];
        let mut row = vec![
            Cell::Int(i as i64),
            Cell::Str(saved.class_names[preds[i]].clone()),
            Cell::Str(curves.class_names()[actual].clone()),
            Cell::Int(i64::from(preds[i] == actual)),
        ];
        if let Some(p) = &proba {
            row.extend((0..saved.class_names.len()).map(|c| Cell::Float(p[(i, c)])));
        }
        table.push(row);
    }
    write_table(&table, out.join("predictions.csv"))?;

    let acc = accuracy(&preds, curves.labels());
    write_table(
        &metrics_table(&[("accuracy", acc, "")]),
        out.join("metrics.csv"),
    )?;

    let mut m = Manifest::new("predict");
    m.set("model", model_path.display()).set("input", input.display());
    m.write(out)
}

fn importance_tables(
    report: &fcurve_core::importance::ImportanceReport,
) -> (Table, Table) {
    let summary = report.to_table();
    let mut reps = Table::new(&["feature", "k", "r", "rep", "conditional", "unconditional"]);
    for col in &report.columns {
        for rep in 0..report.reps {
            reps.push(vec![
                Cell::Str(col.meta.name()),
                Cell::Int(col.meta.component as i64),
                Cell::Int(col.meta.deriv as i64),
                Cell::Int(rep as i64),
                Cell::Float(col.conditional_reps[rep]),
                Cell::Float(col.unconditional_reps[rep]),
            ]);
        }
    }
    (summary, reps)
}

/// `importance`: train a forest and emit the conditional/unconditional
/// importance report.
#[allow(clippy::too_many_arguments)]
pub fn cmd_importance(
    train: &Path,
    holdout: Option<&Path>,
    fit: FitOpts,
    forest_opts: ForestOpts,
    imp: ImportanceOpts,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let train_set = load_ucr(train)?;
    let space = FeatureSpace::fit(&train_set, fit.n_basis, fit.order, fit.k, fit.r_max)?;
    let ftrain = space.features(&train_set)?;
    let forest = train_forest(&ftrain, &forest_opts.params(seed))?;

    let holdout_features = holdout
        .map(|p| -> Result<AugmentedFeatures> {
            let set = load_ucr(p)?;
            space.features(&set)
        })
        .transpose()?;
    let params = ImportanceParams {
        reps: imp.reps,
        bins: imp.bins,
        seed,
        eval: imp.eval,
    };
    let report = importance_report(&forest, &ftrain, &params, holdout_features.as_ref())?;
    let (summary, reps) = importance_tables(&report);
    write_table(&summary, out.join("importance.csv"))?;
    write_table(&reps, out.join("importance_reps.csv"))?;
    write_table(
        &metrics_table(&[("baseline_error", report.baseline_error, report.eval.tag())]),
        out.join("metrics.csv"),
    )?;

    let mut m = Manifest::new("importance");
    m.set("train", train.display());
    m.set_opt("holdout", holdout.map(|p| p.display().to_string()));
    describe_fit(&mut m, &fit);
    m.set("trees", forest_opts.trees)
        .set_opt("mtry", forest_opts.mtry)
        .set("impurity", impurity_name(forest_opts.impurity))
        .set("reps", imp.reps)
        .set("bins", imp.bins)
        .set("eval", imp.eval.tag())
        .set("seed", seed);
    m.write(out)
}

fn separation_tables(
    tree: &Tree,
    models: &[fcurve_core::fpca::FpcaModel],
    grid: &[f64],
) -> Result<(Table, Table)> {
    let mut curves = Table::new(&["node_id", "t", "psi"]);
    let mut terms = Table::new(&["node_id", "position", "feature", "k", "r", "threshold"]);
    for (idx, node) in tree.nodes().iter().enumerate() {
        if matches!(node.kind, NodeKind::Leaf) {
            continue;
        }
        let curve = separation_curve(tree, idx, models, grid)?;
        for (j, &t) in curve.grid.iter().enumerate() {
            curves.push(vec![
                Cell::Int(idx as i64),
                Cell::Float(t),
                Cell::Float(curve.values[j]),
            ]);
        }
        for (pos, term) in curve.terms.iter().enumerate() {
            let meta = fcurve_core::augment::ColumnMeta {
                component: term.component,
                deriv: term.deriv,
            };
            terms.push(vec![
                Cell::Int(idx as i64),
                Cell::Int(pos as i64),
                Cell::Str(meta.name()),
                Cell::Int(term.component as i64),
                Cell::Int(term.deriv as i64),
                Cell::Float(term.threshold),
            ]);
        }
    }
    Ok((curves, terms))
}

/// `explain`: train a pruned tree and emit the separation curve of every
/// internal node.
pub fn cmd_explain(
    train: &Path,
    fit: FitOpts,
    opts: TreeOpts,
    grid_points: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let train_set = load_ucr(train)?;
    let space = FeatureSpace::fit(&train_set, fit.n_basis, fit.order, fit.k, fit.r_max)?;
    let ftrain = space.features(&train_set)?;
    let grown = grow(&ftrain, &opts.grow_params())?;
    let pruned = prune(&grown, &ftrain, opts.folds, opts.prune_rule, seed)?;

    let grid = unit_grid(grid_points);
    let (curves, terms) = separation_tables(&pruned, &space.models, &grid)?;
    write_table(&curves, out.join("separation_curves.csv"))?;
    write_table(&terms, out.join("separation_terms.csv"))?;

    let saved = SavedModel::new(
        space,
        train_set.class_names().to_vec(),
        ModelKind::Tree(pruned),
    );
    fs::write(out.join("model.json"), saved.to_json())
        .map_err(|e| Error::io(out.join("model.json").display().to_string(), e))?;

    let mut m = Manifest::new("explain");
    m.set("train", train.display()).set("grid_points", grid_points);
    describe_fit(&mut m, &fit);
    m.set("folds", opts.folds).set("seed", seed);
    m.write(out)
}

/// Data source for the benchmark grid.
pub enum BenchSource {
    Scenarios(Vec<u8>),
    Files { train: PathBuf, test: PathBuf },
}

/// `benchmark`: the method-comparison sweep, long-format grid plus per-cell
/// summary for box plots.
pub fn cmd_benchmark(source: &BenchSource, spec: &GridSpec, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let mut cells = Vec::new();
    match source {
        BenchSource::Scenarios(ids) => {
            for &scenario in ids {
                cells.extend(run_scenario_grid(scenario, spec)?);
            }
        }
        BenchSource::Files { train, test } => {
            let train_set = load_ucr(train)?;
            let test_set = load_ucr(test)?;
            cells.extend(run_file_grid(&train_set, &test_set, spec)?);
        }
    }
    write_table(&cells_table(&cells), out.join("grid.csv"))?;
    write_table(&summary_table(&cells), out.join("summary.csv"))?;

    let mut m = Manifest::new("benchmark");
    match source {
        BenchSource::Scenarios(ids) => {
            m.set(
                "scenarios",
                ids.iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            m.set("n_per_group", spec.n_per_group);
            m.set("grid_points", spec.grid_points);
        }
        BenchSource::Files { train, test } => {
            m.set("train", train.display());
            m.set("test", test.display());
        }
    }
    m.set(
        "forest_sizes",
        spec.forest_sizes
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
    .set(
        "k_grid",
        spec.k_grid
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
    .set("replicates", spec.replicates)
    .set_opt("n_basis", spec.n_basis)
    .set("order", spec.order)
    .set("impurity", impurity_name(spec.impurity))
    .set("seed", spec.seed);
    m.write(out)
}

/// `pipeline`: the full end-to-end run on one train/test pair — pruned tree,
/// forests with and without derivative augmentation, confusion matrices,
/// separation curves, importance report, and serialized models.
#[allow(clippy::too_many_arguments)]
pub fn cmd_pipeline(
    train: &Path,
    test: &Path,
    fit: FitOpts,
    tree_opts: TreeOpts,
    forest_opts: ForestOpts,
    imp: ImportanceOpts,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let train_set = load_ucr(train)?;
    let test_set = load_ucr(test)?;
    let note = apparent_note(train, test);

    let space = FeatureSpace::fit(&train_set, fit.n_basis, fit.order, fit.k, fit.r_max)?;
    let sm_train = space.smoothed(&train_set)?;
    let sm_test = space.smoothed(&test_set)?;
    let ftrain = space.augment(&sm_train, space.k, fit.r_max)?;
    let ftest = space.augment(&sm_test, space.k, fit.r_max)?;

    // pruned tree
    let grown = grow(&ftrain, &tree_opts.grow_params())?;
    let pruned = prune(&grown, &ftrain, tree_opts.folds, tree_opts.prune_rule, seed)?;
    let tree_apparent = accuracy(&pruned.predict(&ftrain)?, train_set.labels());
    let tree_preds = pruned.predict(&ftest)?;
    let tree_test = accuracy(&tree_preds, test_set.labels());

    // augmented forest
    let forest = train_forest(&ftrain, &forest_opts.params(seed))?;
    let forest_preds = forest.predict(&ftest)?;
    let forest_test = accuracy(&forest_preds, test_set.labels());

    // level-only baseline forest on the same smoothing and seed
    let ftrain0 = space.augment(&sm_train, space.k, 0)?;
    let ftest0 = space.augment(&sm_test, space.k, 0)?;
    let baseline = train_forest(&ftrain0, &forest_opts.params(seed))?;
    let baseline_test = accuracy(&baseline.predict(&ftest0)?, test_set.labels());

    let mut metrics = vec![
        ("tree_apparent_accuracy", tree_apparent, ""),
        ("tree_test_accuracy", tree_test, note),
        ("tree_leaves_pruned", pruned.n_leaves() as f64, ""),
        ("forest_test_accuracy", forest_test, note),
        ("baseline_forest_test_accuracy", baseline_test, note),
    ];
    match forest.oob_error(&ftrain)? {
        OobOutcome::Estimate { error, .. } => metrics.push(("forest_oob_error", error, "")),
        OobOutcome::NoCoverage => {
            metrics.push(("forest_oob_error", f64::NAN, "no OOB coverage"))
        }
    }
    write_table(&metrics_table(&metrics), out.join("metrics.csv"))?;
    write_table(
        &confusion_table(
            &confusion(&tree_preds, test_set.labels(), test_set.n_classes()),
            test_set.class_names(),
        ),
        out.join("confusion_tree.csv"),
    )?;
    write_table(
        &confusion_table(
            &confusion(&forest_preds, test_set.labels(), test_set.n_classes()),
            test_set.class_names(),
        ),
        out.join("confusion_forest.csv"),
    )?;

    // explanations: separation curves of the pruned tree
    let grid = unit_grid(200);
    let (curves, terms) = separation_tables(&pruned, &space.models, &grid)?;
    write_table(&curves, out.join("separation_curves.csv"))?;
    write_table(&terms, out.join("separation_terms.csv"))?;

    // importance on the augmented forest
    let params = ImportanceParams {
        reps: imp.reps,
        bins: imp.bins,
        seed,
        eval: imp.eval,
    };
    let holdout = if imp.eval == EvalSet::Holdout {
        Some(&ftest)
    } else {
        None
    };
    let report = importance_report(&forest, &ftrain, &params, holdout)?;
    let (summary, reps) = importance_tables(&report);
    write_table(&summary, out.join("importance.csv"))?;
    write_table(&reps, out.join("importance_reps.csv"))?;

    fs::write(
        out.join("model_tree.json"),
        SavedModel::new(
            space.clone(),
            train_set.class_names().to_vec(),
            ModelKind::Tree(pruned),
        )
        .to_json(),
    )
    .map_err(|e| Error::io(out.join("model_tree.json").display().to_string(), e))?;
    fs::write(
        out.join("model_forest.json"),
        SavedModel::new(
            space,
            train_set.class_names().to_vec(),
            ModelKind::Forest(forest),
        )
        .to_json(),
    )
    .map_err(|e| Error::io(out.join("model_forest.json").display().to_string(), e))?;

    let mut m = Manifest::new("pipeline");
    m.set("train", train.display()).set("test", test.display());
    describe_fit(&mut m, &fit);
    m.set("trees", forest_opts.trees)
        .set_opt("mtry", forest_opts.mtry)
        .set("impurity", impurity_name(forest_opts.impurity))
        .set("folds", tree_opts.folds)
        .set(
            "prune",
            match tree_opts.prune_rule {
                PruneRule::Min => "min",
                PruneRule::OneSe => "1se",
            },
        )
        .set("reps", imp.reps)
        .set("bins", imp.bins)
        .set("eval", imp.eval.tag())
        .set("seed", seed);
    m.write(out)
}

/// Returns a tree's forest-free prediction on a file, used by tests.
pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    SavedModel::from_json(&text)
}
