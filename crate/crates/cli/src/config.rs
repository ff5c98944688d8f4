//! Scenario files: TOML parsed into raw serde structs, then validated into core
//! model objects. Validation keeps going after the first problem so every
//! violation is reported with its key path.

use cannings::{CoalescentSpec, Law, MutationCountTable, MutationMatrix, TypedPartition, XiAtom, XiMeasure};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub model: ModelKind,
    pub types: usize,
    pub offspring: Option<RawLaw>,
    pub subpopulations: Option<Vec<RawLaw>>,
    pub mutation: Option<RawMutation>,
    pub sample: Option<RawSample>,
    pub limit: Option<RawLimit>,
    pub gw: Option<RawGw>,
    #[serde(default)]
    pub run: RawRun,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FixedSubpop,
    VariableSubpop,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLaw {
    pub kind: String,
    pub size: u64,
    pub c: Option<u64>,
    pub outcomes: Option<Vec<Vec<u64>>>,
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMutation {
    pub counts: Option<Vec<Vec<u64>>>,
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSample {
    pub types: Option<Vec<usize>>,
    pub initial: Option<Vec<u64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLimit {
    pub xi: Option<Vec<RawXi>>,
    pub d: Option<Vec<f64>>,
    pub rho: Option<Vec<Vec<f64>>>,
    pub c_n: Option<CalibrationRule>,
    #[serde(default = "default_max_blocks")]
    pub max_blocks: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawXi {
    #[serde(default)]
    pub kingman: f64,
    #[serde(default)]
    pub atoms: Vec<RawAtom>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAtom {
    pub x: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationRule {
    /// `c_N = 1/N`.
    InverseN,
    /// `c_N` of the first subpopulation's law at size `N`.
    Coalescence,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGw {
    pub initial: Vec<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub seed: Option<u64>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    pub n_grid: Option<Vec<u64>>,
    pub t_grid: Option<Vec<f64>>,
    pub cap: Option<usize>,
    #[serde(default = "default_population_cap")]
    pub population_cap: u64,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            seed: None,
            reps: default_reps(),
            horizon: default_horizon(),
            n_grid: None,
            t_grid: None,
            cap: None,
            population_cap: default_population_cap(),
        }
    }
}

fn default_reps() -> u64 {
    1000
}

fn default_horizon() -> u64 {
    10
}

fn default_population_cap() -> u64 {
    1_000_000
}

fn default_max_blocks() -> u64 {
    4
}

/// Model-side part of a validated scenario.
pub enum Model {
    Fixed {
        laws: Vec<Law>,
        mutation: MutationCountTable,
        sample: Option<TypedPartition>,
    },
    Variable {
        law: Law,
        mutation: MutationMatrix,
        initial: Option<Vec<u64>>,
    },
}

pub struct Limit {
    pub spec: CoalescentSpec,
    pub c_n: Option<CalibrationRule>,
    pub max_blocks: u64,
}

pub struct Scenario {
    pub types: usize,
    pub model: Model,
    pub limit: Option<Limit>,
    pub gw_initial: Option<Vec<u64>>,
    pub run: RawRun,
}

/// Everything wrong with a scenario file.
#[derive(Debug, thiserror::Error)]
#[error("invalid scenario:\n  {}", .0.join("\n  "))]
pub struct Violations(pub Vec<String>);

struct Collector(Vec<String>);

impl Collector {
    fn push(&mut self, path: impl AsRef<str>, msg: impl std::fmt::Display) {
        self.0.push(format!("{}: {msg}", path.as_ref()));
    }

    fn core<T>(&mut self, path: impl AsRef<str>, r: cannings::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(cannings::Error::Invalid { message, .. }) => {
                self.push(path, message);
                None
            }
            Err(e) => {
                self.push(path, e);
                None
            }
        }
    }
}

pub fn parse_config(text: &str) -> Result<Scenario, Violations> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Violations(vec![e.to_string().trim_end().to_string()]))?;
    validate(raw)
}

fn build_law(raw: &RawLaw, path: &str, errs: &mut Collector) -> Option<Law> {
    let law = match raw.kind.as_str() {
        "wright_fisher" => Law::wright_fisher(raw.size),
        "kimura" => match raw.c {
            Some(c) => Law::kimura(raw.size, c),
            None => {
                errs.push(format!("{path}.c"), "required for a kimura law");
                return None;
            }
        },
        "dirac" => Law::dirac(raw.size),
        "extreme_permutation" => Law::extreme_permutation(raw.size),
        "table" => match (&raw.outcomes, &raw.probabilities) {
            (Some(o), Some(p)) if o.len() == p.len() => {
                Law::table(raw.size, o.iter().cloned().zip(p.iter().copied()).collect())
            }
            (Some(o), Some(p)) => {
                errs.push(
                    format!("{path}.probabilities"),
                    format!("{} probabilities for {} outcomes", p.len(), o.len()),
                );
                return None;
            }
            _ => {
                errs.push(path, "a table law needs outcomes and probabilities");
                return None;
            }
        },
        other => {
            errs.push(
                format!("{path}.kind"),
                format!("unknown law {other:?} (expected wright_fisher, kimura, dirac, extreme_permutation or table)"),
            );
            return None;
        }
    };
    errs.core(path, law)
}

fn square<T>(rows: &[Vec<T>], k: usize, path: &str, errs: &mut Collector) -> bool {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        errs.push(path, format!("expected a {k} x {k} table"));
        return false;
    }
    true
}

fn validate(raw: RawScenario) -> Result<Scenario, Violations> {
    let mut errs = Collector(Vec::new());
    let k = raw.types;
    if k == 0 {
        errs.push("types", "at least one type is required");
    }
    let mutation = raw.mutation.as_ref();
    let sample = raw.sample.as_ref();
    let model = match raw.model {
        ModelKind::FixedSubpop => validate_fixed(&raw, k, &mut errs),
        ModelKind::VariableSubpop => validate_variable(&raw, k, &mut errs),
    };
    if raw.model == ModelKind::FixedSubpop {
        if mutation.is_some_and(|m| m.matrix.is_some()) {
            errs.push("mutation.matrix", "the fixed_subpop model takes mutation.counts");
        }
        if sample.is_some_and(|s| s.initial.is_some()) {
            errs.push("sample.initial", "the fixed_subpop model takes sample.types");
        }
    } else {
        if mutation.is_some_and(|m| m.counts.is_some()) {
            errs.push("mutation.counts", "the variable_subpop model takes mutation.matrix");
        }
        if sample.is_some_and(|s| s.types.is_some()) {
            errs.push("sample.types", "the variable_subpop model takes sample.initial");
        }
    }
    let limit = raw.limit.as_ref().and_then(|l| validate_limit(l, k, &mut errs));
    let gw_initial = raw.gw.as_ref().map(|gw| gw.initial.clone());
    if let Some(i) = &gw_initial {
        if raw.model != ModelKind::VariableSubpop {
            errs.push("gw", "the branching limit needs the variable_subpop model");
        } else if i.len() + 1 != k {
            errs.push(
                "gw.initial",
                format!(
                    "expected {} entries (types - 1), found {}",
                    k.saturating_sub(1),
                    i.len()
                ),
            );
        }
    }
    let run = &raw.run;
    if run.reps == 0 {
        errs.push("run.reps", "must be positive");
    }
    if let Some(ns) = &run.n_grid {
        if ns.is_empty() || ns.contains(&0) {
            errs.push("run.n_grid", "must be a non-empty list of positive sizes");
        }
    }
    if let Some(ts) = &run.t_grid {
        if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            errs.push("run.t_grid", "must be a non-empty list of non-negative times");
        }
    }
    match (errs.0.is_empty(), model) {
        (true, Some(model)) => Ok(Scenario {
            types: k,
            model,
            limit,
            gw_initial,
            run: raw.run,
        }),
        _ => Err(Violations(errs.0)),
    }
}

fn validate_fixed(raw: &RawScenario, k: usize, errs: &mut Collector) -> Option<Model> {
    let Some(subs) = &raw.subpopulations else {
        errs.push(
            "subpopulations",
            "required for the fixed_subpop model (one law per type)",
        );
        return None;
    };
    if subs.len() != k {
        errs.push(
            "subpopulations",
            format!("expected {k} laws (one per type), found {}", subs.len()),
        );
    }
    let laws: Vec<Option<Law>> = subs
        .iter()
        .enumerate()
        .map(|(t, l)| build_law(l, &format!("subpopulations[{t}]"), errs))
        .collect();
    let sizes: Vec<u64> = subs.iter().map(|l| l.size).collect();
    let counts = raw
        .mutation
        .as_ref()
        .and_then(|m| m.counts.clone())
        .unwrap_or_else(|| vec![vec![0; k]; k]);
    let table = if square(&counts, k, "mutation.counts", errs) && sizes.len() == k && !sizes.contains(&0) {
        errs.core("mutation.counts", MutationCountTable::new(sizes.clone(), counts))
    } else {
        None
    };
    let sample = match raw.sample.as_ref().and_then(|s| s.types.as_ref()) {
        None => None,
        Some(types) => {
            let mut bad = false;
            if types.is_empty() {
                errs.push("sample.types", "the sample must not be empty");
                bad = true;
            }
            for (r, &t) in types.iter().enumerate() {
                if t >= k {
                    errs.push(format!("sample.types[{r}]"), format!("type {t} out of range 0..{k}"));
                    bad = true;
                }
            }
            for (t, &size) in sizes.iter().enumerate() {
                let taken = types.iter().filter(|&&x| x == t).count() as u64;
                if taken > size {
                    errs.push(
                        "sample.types",
                        format!("{taken} individuals of type {t} exceed its size {size}"),
                    );
                    bad = true;
                }
            }
            if bad {
                None
            } else {
                errs.core("sample.types", TypedPartition::singletons(types))
            }
        }
    };
    let laws: Option<Vec<Law>> = laws.into_iter().collect();
    Some(Model::Fixed {
        laws: laws?,
        mutation: table?,
        sample,
    })
}

fn validate_variable(raw: &RawScenario, k: usize, errs: &mut Collector) -> Option<Model> {
    let law = match &raw.offspring {
        Some(l) => build_law(l, "offspring", errs),
        None => {
            errs.push("offspring", "required for the variable_subpop model");
            None
        }
    };
    let mutation = match raw.mutation.as_ref().and_then(|m| m.matrix.clone()) {
        None if k > 0 => Some(MutationMatrix::identity(k)),
        None => None,
        Some(rows) => {
            if rows.len() != k {
                errs.push("mutation.matrix", format!("expected {k} rows, found {}", rows.len()));
                None
            } else {
                errs.core("mutation.matrix", MutationMatrix::new(rows))
            }
        }
    };
    let initial = raw.sample.as_ref().and_then(|s| s.initial.clone());
    if let (Some(i), Some(l)) = (&initial, &raw.offspring) {
        if i.len() != k {
            errs.push("sample.initial", format!("expected {k} counts, found {}", i.len()));
        } else if i.iter().sum::<u64>() != l.size {
            errs.push(
                "sample.initial",
                format!(
                    "counts sum to {}, expected the population size {}",
                    i.iter().sum::<u64>(),
                    l.size
                ),
            );
        }
    }
    Some(Model::Variable {
        law: law?,
        mutation: mutation?,
        initial,
    })
}

fn validate_limit(raw: &RawLimit, k: usize, errs: &mut Collector) -> Option<Limit> {
    let xi: Vec<Option<XiMeasure>> = match &raw.xi {
        None => (0..k).map(|_| XiMeasure::kingman(1.0).ok()).collect(),
        Some(list) => {
            if list.len() != k {
                errs.push(
                    "limit.xi",
                    format!("expected {k} measures (one per type), found {}", list.len()),
                );
            }
            list.iter()
                .enumerate()
                .map(|(t, x)| {
                    let atoms = x
                        .atoms
                        .iter()
                        .map(|a| XiAtom {
                            x: a.x.clone(),
                            weight: a.weight,
                        })
                        .collect();
                    errs.core(format!("limit.xi[{t}]"), XiMeasure::new(x.kingman, atoms))
                })
                .collect()
        }
    };
    let d = raw.d.clone().unwrap_or_else(|| vec![1.0; k]);
    if d.len() != k {
        errs.push("limit.d", format!("expected {k} entries, found {}", d.len()));
    }
    let rho = raw.rho.clone().unwrap_or_else(|| vec![vec![0.0; k]; k]);
    let rho_ok = square(&rho, k, "limit.rho", errs);
    if raw.max_blocks == 0 {
        errs.push("limit.max_blocks", "must be positive");
    }
    let xi: Option<Vec<XiMeasure>> = xi.into_iter().collect();
    if d.len() != k || !rho_ok {
        return None;
    }
    let spec = errs.core("limit", CoalescentSpec::new(xi?, d, rho))?;
    Some(Limit {
        spec,
        c_n: raw.c_n,
        max_blocks: raw.max_blocks,
    })
}
