//! The seven subcommands: argument definitions, execution, and table
//! construction. Each command resolves its parameters, runs the library,
//! and returns an [`OutputTable`] plus an optional invariant-violation
//! message that turns into exit code 4 after the output is written.

use crate::table::{Cell, OutputTable};
use crate::CliError;
use clap::{Args, ValueEnum};
use optstop_core::asymptotics::{
    esl_lower_bound_check, esl_plus_closed_form, exact_gauss_k1, predict_rho_sqrt,
    predict_rho_sum, sqrt_regime_strained, EslSource, PredictionBreakdown,
};
use optstop_core::families::{FamilyError, TestConfig, TestFamilyId};
use optstop_core::mc::{
    estimate_esl_plus, simulate_alpha_nk, vbe_bound_check, EngineError, RngSpec, VbeKernel,
};
use optstop_core::special::{h_alpha, MathError, Probability};
use optstop_core::walk::{kac_both_sides_exact, WalkDistribution, WalkError};
use serde_json::{json, Value};

pub struct CommandOutput {
    pub table: OutputTable,
    pub violation: Option<String>,
}

impl CommandOutput {
    fn ok(table: OutputTable) -> Self {
        Self { table, violation: None }
    }
}

/// Test family selector shared by most commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// One-sided Gauss test (known variance).
    Gauss,
    /// One-sided exponential rate test.
    Exp,
    /// One-sided Student-t test (estimated variance).
    T,
}

impl Family {
    fn id(self) -> TestFamilyId {
        match self {
            Family::Gauss => TestFamilyId::Gauss,
            Family::Exp => TestFamilyId::Exponential,
            Family::T => TestFamilyId::StudentT,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Family::Gauss => "gauss",
            Family::Exp => "exp",
            Family::T => "t",
        }
    }
}

fn math_err(e: MathError) -> CliError {
    match e {
        MathError::Domain(_) => CliError::Usage(e.to_string()),
        MathError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
    }
}

fn family_err(e: FamilyError) -> CliError {
    match e {
        FamilyError::Math(inner) => math_err(inner),
        other => CliError::Usage(other.to_string()),
    }
}

fn engine_err(e: EngineError) -> CliError {
    match e {
        EngineError::InvalidArgument(_) => CliError::Usage(e.to_string()),
        EngineError::Family(inner) => family_err(inner),
        EngineError::Math(inner) => math_err(inner),
        EngineError::WorkerPool(_) => CliError::Numerical(e.to_string()),
    }
}

fn walk_err(e: WalkError) -> CliError {
    match e {
        WalkError::BudgetExceeded { .. } => CliError::Numerical(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn prob(alpha: f64) -> Result<Probability, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha ({alpha}) must lie strictly inside (0, 1)")));
    }
    Probability::new(alpha).map_err(math_err)
}

/// Tabulate the inflation constant h(alpha).
#[derive(Args, Debug)]
pub struct HTableArgs {
    /// Level to tabulate; repeat for several rows. No occurrences give an
    /// empty table.
    #[arg(long = "alpha", value_name = "ALPHA")]
    pub alphas: Vec<f64>,
}

impl HTableArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        ("h-table", json!({ "alphas": self.alphas }), None)
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let mut table = OutputTable::new(vec!["alpha", "h", "h_rounded_2dp"]);
        for (i, &alpha) in self.alphas.iter().enumerate() {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::Usage(format!(
                    "alpha #{} ({alpha}) must lie strictly inside (0, 1)",
                    i + 1
                )));
            }
            let h = h_alpha(Probability::new(alpha).map_err(math_err)?).map_err(math_err)?.get();
            table.push_row(vec![
                Cell::Float(alpha),
                Cell::Float(h),
                Cell::Str(format!("{h:.2}")),
            ]);
        }
        Ok(CommandOutput::ok(table))
    }
}

/// How the expected positive parts feeding the sum formula are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EslOrigin {
    /// Closed form for the family's score walk.
    Closed,
    /// Monte Carlo estimates (uses --reps and --seed).
    Mc,
}

/// Prediction formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Per-step sum over expected positive parts.
    Sum,
    /// Square-root limit 2 h(alpha) sqrt(k/n).
    Sqrt,
}

/// Predict the relative inflation rho for a configuration.
#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Initial sample size.
    #[arg(long)]
    pub n: u64,
    /// Number of optional extra observations (at least 1).
    #[arg(long)]
    pub k: u64,
    /// Nominal level of each individual test.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Mode::Sum)]
    pub mode: Mode,
    /// Source of the expected positive parts (sum mode only).
    #[arg(long = "esl-source", value_enum, default_value_t = EslOrigin::Closed)]
    pub esl_source: EslOrigin,
    /// Replications for --esl-source mc.
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: u64,
    /// Master seed for --esl-source mc.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl PredictArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        let seed = (self.esl_source == EslOrigin::Mc).then_some(self.seed);
        (
            "predict",
            json!({
                "family": self.family.as_str(),
                "n": self.n,
                "k": self.k,
                "alpha": self.alpha,
                "mode": format!("{:?}", self.mode).to_lowercase(),
                "esl_source": format!("{:?}", self.esl_source).to_lowercase(),
                "reps": self.reps,
                "seed": self.seed,
            }),
            seed,
        )
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let alpha = prob(self.alpha)?;
        if sqrt_regime_strained(self.n, self.k) {
            eprintln!(
                "warning: k/n = {:.3} exceeds 0.1; the square-root regime behind these \
                 predictors assumes k much smaller than n",
                self.k as f64 / self.n as f64
            );
        }
        let (breakdown, esl_vals): (PredictionBreakdown, Vec<f64>) = match self.mode {
            Mode::Sqrt => {
                (predict_rho_sqrt(self.n, self.k, alpha).map_err(math_err)?, Vec::new())
            }
            Mode::Sum => {
                let (esl, source): (Vec<f64>, EslSource) = match self.esl_source {
                    EslOrigin::Closed => {
                        let source = match self.family {
                            Family::Exp => EslSource::ClosedFormExponential,
                            _ => EslSource::ClosedFormGauss,
                        };
                        let esl = (1..=self.k)
                            .map(|l| esl_plus_closed_form(self.family.id(), l))
                            .collect::<Result<_, _>>()
                            .map_err(math_err)?;
                        (esl, source)
                    }
                    EslOrigin::Mc => {
                        let est = estimate_esl_plus(
                            self.family.id(),
                            self.k,
                            self.reps,
                            RngSpec::new(self.seed),
                        )
                        .map_err(engine_err)?;
                        (est.per_ell.iter().map(|m| m.mean).collect(), EslSource::MonteCarlo)
                    }
                };
                let breakdown =
                    predict_rho_sum(self.n, self.k, alpha, &esl, source).map_err(math_err)?;
                (breakdown, esl)
            }
        };

        let mut table = OutputTable::new(vec![
            "kind",
            "ell",
            "esl_plus",
            "term",
            "rho",
            "percent_of_alpha",
            "implied_alpha_nk",
        ]);
        let h_over_sqrt_n = breakdown.h.get() / (self.n as f64).sqrt();
        let mut cumulative = 0.0;
        for (i, &term) in breakdown.terms.iter().enumerate() {
            cumulative += term;
            let rho_cum = h_over_sqrt_n * cumulative;
            table.push_row(vec![
                Cell::str("term"),
                Cell::Int(i as i64 + 1),
                Cell::Float(esl_vals[i]),
                Cell::Float(term),
                Cell::Float(rho_cum),
                Cell::Float(100.0 * rho_cum),
                Cell::Float(self.alpha * (1.0 + rho_cum)),
            ]);
        }
        let multiplier: f64 = breakdown.terms.iter().sum();
        let total_term = if breakdown.terms.is_empty() { Cell::Null } else { Cell::Float(multiplier) };
        table.push_row(vec![
            Cell::str("total"),
            Cell::Null,
            Cell::Null,
            total_term,
            Cell::Float(breakdown.rho),
            Cell::Float(100.0 * breakdown.rho),
            Cell::Float(self.alpha * (1.0 + breakdown.rho)),
        ]);
        Ok(CommandOutput::ok(table))
    }
}

/// Estimate the inflated level by Monte Carlo.
#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Initial sample size.
    #[arg(long)]
    pub n: u64,
    /// Number of optional extra observations.
    #[arg(long)]
    pub k: u64,
    /// Nominal level of each individual test.
    #[arg(long)]
    pub alpha: f64,
    /// Replications.
    #[arg(long)]
    pub reps: u64,
    /// Master seed; replication r always draws from stream r.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; the output is identical for any worker count.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

impl SimulateArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        (
            "simulate",
            json!({
                "family": self.family.as_str(),
                "n": self.n,
                "k": self.k,
                "alpha": self.alpha,
                "reps": self.reps,
                "seed": self.seed,
                "workers": self.workers,
            }),
            Some(self.seed),
        )
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let alpha = prob(self.alpha)?;
        let config = TestConfig::with_default_null(self.family.id(), alpha, self.n, self.k)
            .map_err(family_err)?;
        let est = simulate_alpha_nk(&config, self.reps, RngSpec::new(self.seed), self.workers)
            .map_err(engine_err)?;

        let mut table = OutputTable::new(vec!["key", "value"]);
        let mut kv = |key: &'static str, value: Cell| table.push_row(vec![Cell::str(key), value]);
        kv("family", Cell::str(self.family.as_str()));
        kv("n", Cell::Int(self.n as i64));
        kv("k", Cell::Int(self.k as i64));
        kv("alpha", Cell::Float(self.alpha));
        kv("reps", Cell::Int(self.reps as i64));
        kv("seed", Cell::Int(self.seed as i64));
        kv("alpha_hat_nk", Cell::Float(est.alpha_hat_nk));
        kv("alpha_hat_n", Cell::Float(est.alpha_hat_n));
        kv("rho_hat", Cell::Float(est.rho_hat));
        kv("percent_of_alpha", Cell::Float(100.0 * est.rho_hat));
        kv("se_alpha_hat", Cell::Float(est.se));
        kv("se_rho_hat", Cell::Float(est.rho_se()));
        kv("ci95_alpha_lo", Cell::Float(est.ci95.0));
        kv("ci95_alpha_hi", Cell::Float(est.ci95.1));
        kv("ci95_rho_lo", Cell::Float(est.rho_ci95().0));
        kv("ci95_rho_hi", Cell::Float(est.rho_ci95().1));
        for (l, &count) in est.first_rejection.iter().enumerate() {
            table.push_row(vec![
                Cell::Str(format!("first_rejection_at_n_plus_{l}")),
                Cell::Int(count as i64),
            ]);
        }
        Ok(CommandOutput::ok(table))
    }
}

/// Cross-tabulate simulation against the predictors over an n x k grid.
#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Initial sample sizes, comma separated.
    #[arg(long = "n-grid", value_name = "N,N,...", value_delimiter = ',', required = true)]
    pub n_grid: Vec<u64>,
    /// Extra-observation counts, comma separated.
    #[arg(long = "k-grid", value_name = "K,K,...", value_delimiter = ',', required = true)]
    pub k_grid: Vec<u64>,
    /// Nominal level of each individual test.
    #[arg(long)]
    pub alpha: f64,
    /// Replications per grid cell.
    #[arg(long)]
    pub reps: u64,
    /// Master seed, shared across cells so columns use common random numbers.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for the simulation in each cell.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Quadrature tolerance for the exact Gauss k=1 column.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

const MAX_GRID_CELLS: usize = 10_000;

impl CompareArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        (
            "compare",
            json!({
                "family": self.family.as_str(),
                "n_grid": self.n_grid,
                "k_grid": self.k_grid,
                "alpha": self.alpha,
                "reps": self.reps,
                "seed": self.seed,
                "workers": self.workers,
                "tol": self.tol,
            }),
            Some(self.seed),
        )
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let alpha = prob(self.alpha)?;
        if self.n_grid.is_empty() || self.k_grid.is_empty() {
            return Err(CliError::Usage("both grids must be non-empty".into()));
        }
        let cells = self.n_grid.len() * self.k_grid.len();
        if cells > MAX_GRID_CELLS {
            return Err(CliError::Usage(format!(
                "grid has {cells} cells, more than the limit of {MAX_GRID_CELLS}"
            )));
        }

        let mut table = OutputTable::new(vec![
            "n",
            "k",
            "rho_sim",
            "rho_sum_pred",
            "rho_sqrt_pred",
            "rho_exact_quad",
            "sim_se",
        ]);
        let source = match self.family {
            Family::Exp => EslSource::ClosedFormExponential,
            _ => EslSource::ClosedFormGauss,
        };
        for &n in &self.n_grid {
            for &k in &self.k_grid {
                let config = TestConfig::with_default_null(self.family.id(), alpha, n, k)
                    .map_err(family_err)?;
                let est = simulate_alpha_nk(&config, self.reps, RngSpec::new(self.seed), self.workers)
                    .map_err(engine_err)?;
                let esl = (1..=k)
                    .map(|l| esl_plus_closed_form(self.family.id(), l))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(math_err)?;
                let sum_pred =
                    predict_rho_sum(n, k, alpha, &esl, source).map_err(math_err)?.rho;
                let sqrt_pred = predict_rho_sqrt(n, k, alpha).map_err(math_err)?.rho;
                let quad = if self.family == Family::Gauss && k == 1 {
                    let q = exact_gauss_k1(n, alpha, self.tol).map_err(math_err)?;
                    Cell::Float(q.value / self.alpha - 1.0)
                } else {
                    Cell::Null
                };
                table.push_row(vec![
                    Cell::Int(n as i64),
                    Cell::Int(k as i64),
                    Cell::Float(est.rho_hat),
                    Cell::Float(sum_pred),
                    Cell::Float(sqrt_pred),
                    quad,
                    Cell::Float(est.rho_se()),
                ]);
            }
        }
        Ok(CommandOutput::ok(table))
    }
}

/// Built-in step distributions for the walk identity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Steps +1 or -1 with probability 1/2 each.
    Fair,
    /// Steps +2 with probability 1/3, -1 with probability 2/3.
    Lopsided,
}

/// Verify the prefix-maximum identity exactly on a preset walk.
#[derive(Args, Debug)]
pub struct KacCheckArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    /// Largest horizon to check; rows cover k = 1..=k_max.
    #[arg(long = "k-max")]
    pub k_max: u32,
}

impl KacCheckArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        (
            "kac-check",
            json!({
                "preset": format!("{:?}", self.preset).to_lowercase(),
                "k_max": self.k_max,
            }),
            None,
        )
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let dist = match self.preset {
            Preset::Fair => WalkDistribution::fair(),
            Preset::Lopsided => WalkDistribution::lopsided(),
        };
        let mut table = OutputTable::new(vec!["k", "lhs", "rhs", "equal"]);
        let mut violation = None;
        for k in 1..=self.k_max {
            let (lhs, rhs) = kac_both_sides_exact(&dist, k).map_err(walk_err)?;
            let equal = lhs == rhs;
            if !equal && violation.is_none() {
                violation = Some(format!(
                    "prefix-maximum identity failed at k={k}: lhs {lhs} != rhs {rhs}"
                ));
            }
            table.push_row(vec![
                Cell::Int(k as i64),
                Cell::Str(lhs.to_string()),
                Cell::Str(rhs.to_string()),
                Cell::Bool(equal),
            ]);
        }
        Ok(CommandOutput { table, violation })
    }
}

/// Tabulate expected positive parts E(S_l)+ of the score walk.
#[derive(Args, Debug)]
pub struct EslArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Largest walk length; rows cover l = 1..=k.
    #[arg(long)]
    pub k: u64,
    /// Add Monte Carlo columns from this many replications.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Master seed for the Monte Carlo columns.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl EslArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        (
            "esl",
            json!({
                "family": self.family.as_str(),
                "k": self.k,
                "reps": self.reps,
                "seed": self.seed,
            }),
            self.reps.map(|_| self.seed),
        )
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let rows = esl_lower_bound_check(self.family.id(), self.k).map_err(math_err)?;
        let mc = match self.reps {
            Some(reps) => Some(
                estimate_esl_plus(self.family.id(), self.k, reps, RngSpec::new(self.seed))
                    .map_err(engine_err)?,
            ),
            None => None,
        };
        let mut table =
            OutputTable::new(vec!["ell", "closed_form", "lower_bound", "mc_mean", "mc_se"]);
        for (i, row) in rows.iter().enumerate() {
            let (mc_mean, mc_se) = match &mc {
                Some(est) => {
                    let m = est.per_ell[i];
                    (Cell::Float(m.mean), Cell::Float(m.se))
                }
                None => (Cell::Null, Cell::Null),
            };
            table.push_row(vec![
                Cell::Int(row.ell as i64),
                Cell::Float(row.closed_form),
                Cell::Float(row.lower_bound),
                mc_mean,
                mc_se,
            ]);
        }
        Ok(CommandOutput::ok(table))
    }
}

/// Check the pair-sum moment bound by simulation.
#[derive(Args, Debug)]
pub struct VbeCheckArgs {
    /// Score kernel; gauss or exp (there is no separate t kernel).
    #[arg(long, value_enum)]
    pub family: Family,
    /// Observations per replication.
    #[arg(long)]
    pub n: u64,
    /// Moment exponent in [1, 2].
    #[arg(long)]
    pub p: f64,
    /// Replications.
    #[arg(long)]
    pub reps: u64,
    /// Master seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl VbeCheckArgs {
    pub fn manifest(&self) -> (&'static str, Value, Option<u64>) {
        (
            "vbe-check",
            json!({
                "family": self.family.as_str(),
                "n": self.n,
                "p": self.p,
                "reps": self.reps,
                "seed": self.seed,
            }),
            Some(self.seed),
        )
    }

    pub fn run(&self) -> Result<CommandOutput, CliError> {
        let kernel = match self.family {
            Family::Gauss => VbeKernel::GaussProduct,
            Family::Exp => VbeKernel::ExponentialProduct,
            Family::T => {
                return Err(CliError::Usage(
                    "the pair-sum check has gauss and exp kernels only".into(),
                ))
            }
        };
        let check = vbe_bound_check(kernel, self.n, self.p, self.reps, RngSpec::new(self.seed))
            .map_err(engine_err)?;
        let mut table = OutputTable::new(vec![
            "kernel",
            "n",
            "p",
            "reps",
            "lhs_mean",
            "lhs_se",
            "rhs_mean",
            "rhs_se",
            "holds",
            "margin_sigmas",
        ]);
        table.push_row(vec![
            Cell::str(self.family.as_str()),
            Cell::Int(self.n as i64),
            Cell::Float(self.p),
            Cell::Int(self.reps as i64),
            Cell::Float(check.lhs.mean),
            Cell::Float(check.lhs.se),
            Cell::Float(check.rhs.mean),
            Cell::Float(check.rhs.se),
            Cell::Bool(check.holds),
            Cell::Float(check.margin_sigmas),
        ]);
        let violation = (!check.holds).then(|| {
            format!(
                "pair-sum moment bound violated: lhs {:.6e} > rhs {:.6e}",
                check.lhs.mean, check.rhs.mean
            )
        });
        Ok(CommandOutput { table, violation })
    }
}
