//! `fcurve` — functional curve classification pipelines.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fcurve_cli::commands::{self, BenchSource, FitOpts, ForestOpts, ImportanceOpts, TreeOpts};
use fcurve_cli::grid::GridSpec;
use fcurve_core::cart::{Impurity, PruneRule};
use fcurve_core::importance::EvalSet;
use fcurve_core::ErrorClass;

#[derive(Parser)]
#[command(
    name = "fcurve",
    version,
    about = "Curve classification with B-spline smoothing, derivative-augmented principal component scores, tree ensembles, and conditional permutation importance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImpurityArg {
    Gini,
    Entropy,
}

impl From<ImpurityArg> for Impurity {
    fn from(v: ImpurityArg) -> Self {
        match v {
            ImpurityArg::Gini => Impurity::Gini,
            ImpurityArg::Entropy => Impurity::Entropy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PruneArg {
    Min,
    #[value(name = "1se")]
    OneSe,
}

impl From<PruneArg> for PruneRule {
    fn from(v: PruneArg) -> Self {
        match v {
            PruneArg::Min => PruneRule::Min,
            PruneArg::OneSe => PruneRule::OneSe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalArg {
    Oob,
    #[value(name = "in-sample")]
    InSample,
    Holdout,
}

impl From<EvalArg> for EvalSet {
    fn from(v: EvalArg) -> Self {
        match v {
            EvalArg::Oob => EvalSet::Oob,
            EvalArg::InSample => EvalSet::InSample,
            EvalArg::Holdout => EvalSet::Holdout,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Basis functions for smoothing (default: min(20, points - order))
    #[arg(long)]
    n_basis: Option<usize>,
    /// Spline order; 4 means cubic
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Principal components kept per derivative order
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Highest derivative order pooled into the features (0..=2)
    #[arg(long, default_value_t = 2)]
    r_max: usize,
}

impl From<&FitArgs> for FitOpts {
    fn from(a: &FitArgs) -> Self {
        FitOpts {
            n_basis: a.n_basis,
            order: a.order,
            k: a.k,
            r_max: a.r_max,
        }
    }
}

#[derive(Args)]
struct TreeArgs {
    /// Split criterion
    #[arg(long, value_enum, default_value_t = ImpurityArg::Gini)]
    impurity: ImpurityArg,
    /// Subtree selection rule after cross-validation
    #[arg(long, value_enum, default_value_t = PruneArg::Min)]
    prune: PruneArg,
    /// Cross-validation folds for pruning
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Minimum rows to attempt a split
    #[arg(long, default_value_t = 20)]
    min_split: usize,
    /// Minimum rows per leaf
    #[arg(long, default_value_t = 7)]
    min_leaf: usize,
    /// Maximum tree depth
    #[arg(long, default_value_t = 30)]
    max_depth: usize,
}

impl From<&TreeArgs> for TreeOpts {
    fn from(a: &TreeArgs) -> Self {
        TreeOpts {
            impurity: a.impurity.into(),
            prune_rule: a.prune.into(),
            folds: a.folds,
            min_split: a.min_split,
            min_leaf: a.min_leaf,
            max_depth: a.max_depth,
        }
    }
}

#[derive(Args)]
struct ForestArgs {
    /// Trees in the forest
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Candidate columns per split (default: round(sqrt(columns)))
    #[arg(long)]
    mtry: Option<usize>,
    /// Disable bootstrap resampling (diagnostic)
    #[arg(long, default_value_t = false)]
    no_bootstrap: bool,
    /// Split criterion
    #[arg(long, value_enum, default_value_t = ImpurityArg::Gini)]
    impurity: ImpurityArg,
}

impl From<&ForestArgs> for ForestOpts {
    fn from(a: &ForestArgs) -> Self {
        ForestOpts {
            trees: a.trees,
            mtry: a.mtry,
            bootstrap: !a.no_bootstrap,
            impurity: a.impurity.into(),
        }
    }
}

#[derive(Args)]
struct ImportanceArgs {
    /// Permutation repetitions per column
    #[arg(long, default_value_t = 30)]
    reps: usize,
    /// Quantile bins per conditioning column
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Evaluation rows for the error estimates
    #[arg(long, value_enum, default_value_t = EvalArg::Oob)]
    eval: EvalArg,
}

impl From<&ImportanceArgs> for ImportanceOpts {
    fn from(a: &ImportanceArgs) -> Self {
        ImportanceOpts {
            reps: a.reps,
            bins: a.bins,
            eval: a.eval.into(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated scenario as train/test files
    Simulate {
        /// Scenario id (1..=6)
        #[arg(long)]
        scenario: u8,
        /// Curves generated per group (half train, half test)
        #[arg(long, default_value_t = 100)]
        n_per_group: usize,
        /// Sampling grid length
        #[arg(long, default_value_t = 50)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares spline coefficients for a curve file
    Smooth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n_basis: Option<usize>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Also write the basis functions evaluated on a grid
        #[arg(long, default_value_t = false)]
        dump_basis: bool,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eigenvalues and eigenfunction grids per derivative order
    FpcaDump {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a pruned classification tree
    TrainTree {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a random forest
    TrainForest {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a saved model to a curve file
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Conditional and unconditional permutation importance
    Importance {
        #[arg(long)]
        train: PathBuf,
        /// Separate evaluation file (required with --eval holdout)
        #[arg(long)]
        holdout: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        importance: ImportanceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Separation curves of a pruned tree's internal nodes
    Explain {
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy sweep comparing level-only and derivative-augmented forests
    Benchmark {
        /// Scenario ids, comma separated (mutually exclusive with --train)
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<u8>,
        #[arg(long, requires = "test", conflicts_with = "scenarios")]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        test: Option<PathBuf>,
        /// Forest sizes, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 25, 50, 100, 200, 500])]
        forest_sizes: Vec<usize>,
        /// Component counts, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 15, 20])]
        k_grid: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long)]
        n_basis: Option<usize>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, value_enum, default_value_t = ImpurityArg::Gini)]
        impurity: ImpurityArg,
        #[arg(long, default_value_t = 100)]
        n_per_group: usize,
        #[arg(long, default_value_t = 50)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full run: pruned tree, forests, explanations, importance
    Pipeline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        importance: ImportanceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> fcurve_core::Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            n_per_group,
            grid_points,
            seed,
            out,
        } => commands::cmd_simulate(scenario, n_per_group, grid_points, seed, &out),
        Command::Smooth {
            input,
            n_basis,
            order,
            dump_basis,
            grid_points,
            out,
        } => commands::cmd_smooth(&input, n_basis, order, dump_basis, grid_points, &out),
        Command::FpcaDump {
            input,
            fit,
            grid_points,
            out,
        } => commands::cmd_fpca_dump(&input, (&fit).into(), grid_points, &out),
        Command::TrainTree {
            train,
            test,
            fit,
            tree,
            seed,
            out,
        } => commands::cmd_train_tree(
            &train,
            test.as_deref(),
            (&fit).into(),
            (&tree).into(),
            seed,
            &out,
        ),
        Command::TrainForest {
            train,
            test,
            fit,
            forest,
            seed,
            out,
        } => commands::cmd_train_forest(
            &train,
            test.as_deref(),
            (&fit).into(),
            (&forest).into(),
            seed,
            &out,
        ),
        Command::Predict { model, input, out } => commands::cmd_predict(&model, &input, &out),
        Command::Importance {
            train,
            holdout,
            fit,
            forest,
            importance,
            seed,
            out,
        } => commands::cmd_importance(
            &train,
            holdout.as_deref(),
            (&fit).into(),
            (&forest).into(),
            (&importance).into(),
            seed,
            &out,
        ),
        Command::Explain {
            train,
            fit,
            tree,
            grid_points,
            seed,
            out,
        } => commands::cmd_explain(
            &train,
            (&fit).into(),
            (&tree).into(),
            grid_points,
            seed,
            &out,
        ),
        Command::Benchmark {
            scenarios,
            train,
            test,
            forest_sizes,
            k_grid,
            replicates,
            n_basis,
            order,
            impurity,
            n_per_group,
            grid_points,
            seed,
            out,
        } => {
            let source = match (train, test, scenarios.is_empty()) {
                (Some(train), Some(test), _) => BenchSource::Files { train, test },
                (None, None, false) => BenchSource::Scenarios(scenarios),
                _ => {
                    return Err(fcurve_core::Error::Validation(
                        "benchmark needs --scenarios or a --train/--test pair".into(),
                    ))
                }
            };
            let spec = GridSpec {
                forest_sizes,
                k_grid,
                replicates,
                seed,
                n_basis,
                order,
                impurity: impurity.into(),
                n_per_group,
                grid_points,
            };
            commands::cmd_benchmark(&source, &spec, &out)
        }
        Command::Pipeline {
            train,
            test,
            fit,
            tree,
            forest,
            importance,
            seed,
            out,
        } => commands::cmd_pipeline(
            &train,
            &test,
            (&fit).into(),
            (&tree).into(),
            (&forest).into(),
            (&importance).into(),
            seed,
            &out,
        ),
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Parse => 3,
        ErrorClass::Validation => 4,
        ErrorClass::Numeric => 5,
        ErrorClass::Io => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
