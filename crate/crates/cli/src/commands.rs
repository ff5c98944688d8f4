use std::fmt::Display;

use cannings::branching_limit::gw_convergence_table;
use cannings::coalescent_limit::{convergence_diagnostic, Calibrated};
use cannings::combinatorics::for_each_integer_partition;
use cannings::partition::DEFAULT_STATE_CAP;
use cannings::rng::stream_rng;
use cannings::{
    BranchingOffspringLaw, FixedModel, Law, LimitOffspringLaw, MutationCountTable, StateMatrix, TypedPartition,
    VariableModel,
};

use crate::config::{CalibrationRule, Limit, Model, Scenario, Violations};
use crate::output::{counts, float, Table};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] Violations),
    /// The scenario is valid but lacks what this subcommand needs.
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Core(#[from] cannings::Error),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Core(cannings::Error::Size { .. } | cannings::Error::Truncation { .. }) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SimMode {
    Forward,
    Ancestry,
    Gw,
}

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub seed: u64,
    pub cap: usize,
}

impl Context<'_> {
    pub fn new(scenario: &Scenario, seed: Option<u64>, cap: Option<usize>) -> Context<'_> {
        Context {
            seed: seed.or(scenario.run.seed).unwrap_or(0),
            cap: cap.or(scenario.run.cap).unwrap_or(DEFAULT_STATE_CAP),
            scenario,
        }
    }

    fn fixed(&self, command: &str) -> Result<(&[Law], &MutationCountTable, Option<&TypedPartition>)> {
        match &self.scenario.model {
            Model::Fixed { laws, mutation, sample } => Ok((laws, mutation, sample.as_ref())),
            Model::Variable { .. } => Err(missing(format!("{command} needs model = \"fixed_subpop\""))),
        }
    }

    fn variable(&self, command: &str) -> Result<(VariableModel, Option<&[u64]>)> {
        match &self.scenario.model {
            Model::Variable { law, mutation, initial } => {
                Ok((VariableModel::new(law.clone(), mutation.clone()), initial.as_deref()))
            }
            Model::Fixed { .. } => Err(missing(format!("{command} needs model = \"variable_subpop\""))),
        }
    }

    fn limit(&self, command: &str) -> Result<&Limit> {
        self.scenario
            .limit
            .as_ref()
            .ok_or_else(|| missing(format!("limit: required by {command}")))
    }
}

fn missing(msg: impl Into<String>) -> RunError {
    RunError::Missing(msg.into())
}

fn matrix_table<S: Display + Clone + Eq + std::hash::Hash>(m: &StateMatrix<S, f64>) -> Table {
    let labels = m.labels();
    let mut table = Table::new(std::iter::once("state".to_string()).chain(labels.iter().cloned()));
    for (r, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(m.values().row(r).iter().map(|&x| float(x)));
        table.push(row);
    }
    table
}

pub fn exact_forward(ctx: &Context) -> Result<Table> {
    let (model, _) = ctx.variable("exact-forward")?;
    Ok(matrix_table(&model.forward_transition_matrix(ctx.cap)?))
}

pub fn exact_backward(ctx: &Context) -> Result<Table> {
    let (laws, mutation, sample) = ctx.fixed("exact-backward")?;
    let sample = sample.ok_or_else(|| missing("sample.types: required by exact-backward"))?;
    let model = FixedModel::new(laws.to_vec(), mutation.clone())?;
    Ok(matrix_table(&model.transition_matrix(sample.n(), ctx.cap)?))
}

pub fn exact_backward_variable(ctx: &Context) -> Result<Table> {
    let (model, _) = ctx.variable("exact-backward-variable")?;
    let mats = model.backward_matrices(ctx.cap)?;
    let mut table = matrix_table(&mats.p);
    table.header.push("row_sum".into());
    for (row, sum) in table.rows.iter_mut().zip(&mats.row_sums) {
        row.push(float(*sum));
    }
    Ok(table)
}

pub fn simulate(ctx: &Context, mode: SimMode, reps: Option<u64>, horizon: Option<u64>) -> Result<Table> {
    let reps = reps.unwrap_or(ctx.scenario.run.reps);
    let horizon = horizon.unwrap_or(ctx.scenario.run.horizon);
    let k = ctx.scenario.types;
    match mode {
        SimMode::Forward => {
            let (model, initial) = ctx.variable("simulate --mode forward")?;
            let initial = initial.ok_or_else(|| missing("sample.initial: required by simulate --mode forward"))?;
            let mut table = Table::new(
                ["replicate", "generation"]
                    .map(String::from)
                    .into_iter()
                    .chain(type_columns("i", k)),
            );
            for r in 0..reps {
                let path =
                    model.simulate_forward(initial, horizon, &mut stream_rng(ctx.seed, "simulate-forward", r))?;
                for (g, state) in path.iter().enumerate() {
                    table.push(path_row(r, g, state.counts()));
                }
            }
            Ok(table)
        }
        SimMode::Ancestry => {
            let (laws, mutation, sample) = ctx.fixed("simulate --mode ancestry")?;
            let start = sample.ok_or_else(|| missing("sample.types: required by simulate --mode ancestry"))?;
            let model = FixedModel::new(laws.to_vec(), mutation.clone())?;
            let mut table = Table::new(["replicate", "generation", "blocks", "state"]);
            for r in 0..reps {
                let path =
                    model.simulate_ancestry(start, horizon, &mut stream_rng(ctx.seed, "simulate-ancestry", r))?;
                for (g, state) in path.iter().enumerate() {
                    table.push(vec![
                        r.to_string(),
                        g.to_string(),
                        state.num_blocks().to_string(),
                        state.to_string(),
                    ]);
                }
            }
            Ok(table)
        }
        SimMode::Gw => {
            let (model, _) = ctx.variable("simulate --mode gw")?;
            let initial = ctx
                .scenario
                .gw_initial
                .as_deref()
                .ok_or_else(|| missing("gw.initial: required by simulate --mode gw"))?;
            let law = branching_law(&model)?;
            let cap = ctx.scenario.run.population_cap;
            let mut table = Table::new(
                ["replicate", "generation"]
                    .map(String::from)
                    .into_iter()
                    .chain(type_columns("z", k - 1)),
            );
            for r in 0..reps {
                let mut rng = stream_rng(ctx.seed, "simulate-gw", r);
                let path = law.simulate_gw(initial, horizon as usize, cap, &mut rng)?;
                for (g, state) in path.iter().enumerate() {
                    table.push(path_row(r, g, state));
                }
            }
            Ok(table)
        }
    }
}

fn type_columns(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |t| format!("{prefix}_{t}"))
}

fn path_row(replicate: u64, generation: usize, state: &[u64]) -> Vec<String> {
    let mut row = vec![replicate.to_string(), generation.to_string()];
    row.extend(state.iter().map(u64::to_string));
    row
}

fn branching_law(model: &VariableModel) -> Result<BranchingOffspringLaw> {
    let xi = LimitOffspringLaw::for_family(model.law().family())?;
    Ok(BranchingOffspringLaw::new(xi, model.mutation().clone())?)
}

fn grid<T: Clone>(flag: Option<Vec<T>>, config: &Option<Vec<T>>, what: &str) -> Result<Vec<T>> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| missing(format!("{what}: give it on the command line or in the run table")))
}

/// Every subpopulation is resized to `N`; mutation counts stay as configured.
pub fn limit_check(ctx: &Context, ns: Option<Vec<u64>>, ts: Option<Vec<f64>>) -> Result<Table> {
    let (laws, mutation, sample) = ctx.fixed("limit-check")?;
    let limit = ctx.limit("limit-check")?;
    let rule = limit
        .c_n
        .ok_or_else(|| missing("limit.c_n: required by limit-check (inverse_n or coalescence)"))?;
    let sample = sample.ok_or_else(|| missing("sample.types: required by limit-check"))?;
    let ns = grid(ns, &ctx.scenario.run.n_grid, "N grid (--N or run.n_grid)")?;
    let ts = grid(ts, &ctx.scenario.run.t_grid, "t grid (--t or run.t_grid)")?;
    let k = laws.len();
    let family = |n: u64| -> cannings::Result<Calibrated> {
        let resized = laws
            .iter()
            .map(|l| l.with_size(n))
            .collect::<cannings::Result<Vec<_>>>()?;
        let counts = (0..k)
            .map(|a| (0..k).map(|b| if a == b { 0 } else { mutation.count(a, b) }).collect())
            .collect();
        let table = MutationCountTable::new(vec![n; k], counts)?;
        let c_n = match rule {
            CalibrationRule::InverseN => 1.0 / n as f64,
            CalibrationRule::Coalescence => resized[0].coalescence_probability()?,
        };
        Ok(Calibrated {
            model: FixedModel::new(resized, table)?,
            c_n,
        })
    };
    let rows = convergence_diagnostic(family, &ns, &limit.spec, sample.n(), &ts, ctx.cap)?;
    let mut table = Table::new(["N", "t", "c_N", "sup_norm_error"]);
    for row in rows {
        table.push(vec![row.n.to_string(), float(row.t), float(row.c_n), float(row.error)]);
    }
    Ok(table)
}

pub fn gw_limit(ctx: &Context, ns: Option<Vec<u64>>) -> Result<Table> {
    let (model, _) = ctx.variable("gw-limit")?;
    let i = ctx
        .scenario
        .gw_initial
        .as_deref()
        .ok_or_else(|| missing("gw.initial: required by gw-limit"))?;
    let ns = grid(ns, &ctx.scenario.run.n_grid, "N grid (--N or run.n_grid)")?;
    let limit = branching_law(&model)?;
    let family = |n: u64| -> cannings::Result<VariableModel> {
        Ok(VariableModel::new(model.law().with_size(n)?, model.mutation().clone()))
    };
    let mut table = Table::new(["N", "i", "j", "p_finite", "p_limit", "abs_err"]);
    for cmp in gw_convergence_table(family, &limit, i, &ns)? {
        for (j, a, b) in &cmp.rows {
            table.push(vec![
                cmp.n.to_string(),
                counts(&cmp.i),
                counts(j),
                float(*a),
                float(*b),
                float((a - b).abs()),
            ]);
        }
    }
    Ok(table)
}

/// Merger rates `phi_j(k_1..k_j)` with every `k_r >= 2` and `sum k_r <= max_blocks`.
pub fn rates(ctx: &Context) -> Result<Table> {
    let limit = ctx.limit("rates")?;
    let mut table = Table::new(["type", "j", "counts", "rate"]);
    for t in 0..limit.spec.types() {
        let xi = limit.spec.xi(t);
        for total in 2..=limit.max_blocks {
            let mut shapes = Vec::new();
            for_each_integer_partition(total, |p| {
                if p.iter().all(|&x| x >= 2) {
                    shapes.push(p.to_vec());
                }
            });
            for shape in shapes {
                let rate = xi.rate(&shape)?;
                table.push(vec![
                    t.to_string(),
                    shape.len().to_string(),
                    counts(&shape),
                    float(rate),
                ]);
            }
        }
    }
    Ok(table)
}

pub fn block_gen(ctx: &Context) -> Result<Table> {
    let limit = ctx.limit("block-gen")?;
    Ok(matrix_table(&limit.spec.block_counting_generator(limit.max_blocks)?))
}
