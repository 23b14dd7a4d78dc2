//! MIO search and the Random baseline.
//!
//! Both algorithms first evaluate the adhoc tests (every function under
//! every auth setting), then keep sampling until the call budget is spent.
//! MIO mixes fresh samples with mutations of tests kept in a per-target
//! archive; the sampling rate decays linearly and reaches zero when the
//! focused phase starts. Random only samples fresh tests. Either way the
//! archive keeps one champion per covered target, and the champions form
//! the output suite.

mod archive;
mod test_case;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

pub use archive::Archive;
pub use test_case::{mutate_test, sample_adhoc_tests, sample_random_test, Action, ActionPool, TestCase};

use crate::executor::{extract_response_flags, planned_calls, Executor, ExecutorError, TestExecution, Transport};
use crate::fitness::{
    classify_execution, fitness_for_result, register_targets_for_function, stats_to_csv, Classification,
    ResultCategorizer, TargetKind, TargetStat, TestingTarget,
};
use crate::genes::{GeneBuilder, SeedCatalog};
use crate::schema::{AuthSpec, RpcSchema};
use crate::SearchRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mio,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Mio, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mio => "mio",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mio" => Ok(Algorithm::Mio),
            "random" => Ok(Algorithm::Random),
            other => Err(format!("unknown algorithm '{other}' (expected mio or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Budget in executed RPC calls, logins included.
    pub budget: u64,
    pub seed: u64,
    pub max_actions: usize,
    /// Initial probability of sampling a fresh test.
    pub p_random: f64,
    /// Budget fraction at which the focused phase starts.
    pub focused_start: f64,
    /// Buffer size per target before the focused phase.
    pub archive_capacity: usize,
    pub p_auth_enabled: f64,
    /// Probability that a mutation adds or removes an action.
    pub p_structure: f64,
    /// Mutations applied in a row to a test taken from the archive once
    /// the focused phase starts; ramps up from 1.
    pub max_mutations: usize,
    /// Keep every evaluated test in [`SearchOutcome::trace`].
    pub record_trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithm: Algorithm::Mio,
            budget: 10_000,
            seed: 0,
            max_actions: 10,
            p_random: 0.5,
            focused_start: 0.5,
            archive_capacity: 10,
            p_auth_enabled: 0.95,
            p_structure: 0.1,
            max_mutations: 1,
            record_trace: false,
        }
    }
}

impl SearchConfig {
    fn progress(&self, used: u64) -> f64 {
        if self.budget == 0 || self.focused_start <= 0.0 {
            return 1.0;
        }
        (used as f64 / (self.budget as f64 * self.focused_start)).min(1.0)
    }

    /// Fresh-sampling probability after `used` calls.
    pub fn p_random_at(&self, used: u64) -> f64 {
        match self.algorithm {
            Algorithm::Random => 1.0,
            Algorithm::Mio => self.p_random * (1.0 - self.progress(used)),
        }
    }

    /// Consecutive mutations per archive sample after `used` calls.
    pub fn mutations_at(&self, used: u64) -> usize {
        let m = self.max_mutations.max(1) as f64;
        (1.0 + (m - 1.0) * self.progress(used)).round() as usize
    }

    /// Buffer capacity after `used` calls.
    pub fn capacity_at(&self, used: u64) -> usize {
        let c = self.archive_capacity.max(1) as f64;
        (c + (1.0 - c) * self.progress(used)).round().max(1.0) as usize
    }
}

/// Everything about the SUT the search needs besides the transport.
#[derive(Clone, Copy)]
pub struct SearchInputs<'a> {
    pub schema: &'a RpcSchema,
    pub auth: &'a [AuthSpec],
    pub categorizer: Option<&'a dyn ResultCategorizer>,
    pub seeds: Option<&'a SeedCatalog>,
}

impl<'a> SearchInputs<'a> {
    pub fn new(schema: &'a RpcSchema) -> Self {
        SearchInputs {
            schema,
            auth: &[],
            categorizer: None,
            seeds: None,
        }
    }
}

/// A test after execution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedTest {
    /// Position in evaluation order, from 0.
    pub seq: u64,
    pub test: TestCase,
    pub execution: TestExecution,
    pub classifications: Vec<Classification>,
    /// Heuristic value per target id.
    pub fitness: BTreeMap<String, f64>,
    /// Index of the first action reaching each target's value.
    pub reached_at: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTest {
    /// `t1`, `t2`, ... in evaluation order.
    pub id: String,
    pub test: TestCase,
    pub execution: TestExecution,
    pub classifications: Vec<Classification>,
    /// Targets this test is champion of.
    pub covers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestSuite {
    pub tests: Vec<SuiteTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub suite: TestSuite,
    /// One row per registered target, sorted by target id.
    pub stats: Vec<TargetStat>,
    pub calls_used: u64,
    pub tests_evaluated: u64,
    /// Set when the SUT became unreachable and the search stopped early.
    pub aborted: Option<String>,
    /// Evaluated tests in order, when requested.
    pub trace: Vec<TestCase>,
    /// Functions left out because their parameters cannot be generated.
    pub skipped_functions: Vec<String>,
}

impl SearchOutcome {
    pub fn covered_targets(&self) -> usize {
        self.stats.iter().filter(|s| s.best_h >= 1.0).count()
    }

    pub fn covered_of_kind(&self, kind: TargetKind) -> usize {
        self.stats.iter().filter(|s| s.kind == kind && s.best_h >= 1.0).count()
    }

    pub fn stats_csv(&self) -> String {
        stats_to_csv(&self.stats)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("no function of the schema can be called: {0}")]
    NothingToCall(String),
}

struct Engine<'a> {
    inputs: SearchInputs<'a>,
    config: &'a SearchConfig,
    executor: Executor<'a>,
    pool: ActionPool,
    archive: Archive,
    rng: SearchRng,
    calls: u64,
    seq: u64,
    trace: Vec<TestCase>,
}

impl Engine<'_> {
    /// Drops trailing actions until the test fits the remaining budget.
    fn fit_to_budget(&self, mut t: TestCase) -> Option<TestCase> {
        let remaining = self.config.budget.saturating_sub(self.calls);
        while !t.actions.is_empty() {
            if planned_calls(self.inputs.schema, self.inputs.auth, &t.plan()) <= remaining {
                return Some(t);
            }
            t.actions.pop();
        }
        None
    }

    /// `None` when no prefix of the test fits the remaining budget.
    fn evaluate(&mut self, test: TestCase) -> Result<Option<Rc<EvaluatedTest>>, ExecutorError> {
        let Some(test) = self.fit_to_budget(test) else {
            return Ok(None);
        };
        let execution = self.executor.execute_test(&test.env, &test.plan())?;
        self.calls += execution.calls;
        let schema = self.inputs.schema;
        let mut fitness: BTreeMap<String, f64> = BTreeMap::new();
        let mut new_targets: Vec<TestingTarget> = Vec::new();
        let mut classifications = Vec::with_capacity(test.actions.len());
        let mut reached_at: BTreeMap<String, usize> = BTreeMap::new();
        let mut put = |id: String, h: f64, fitness: &mut BTreeMap<String, f64>, at: usize| {
            let e = fitness.entry(id.clone()).or_insert(0.0);
            if h > *e || !reached_at.contains_key(&id) {
                reached_at.insert(id, at);
            }
            *e = e.max(h);
        };
        for (at, (action, resp)) in test.actions.iter().zip(&execution.responses).enumerate() {
            let f = schema.function(action.function);
            let c = classify_execution(resp, f, self.inputs.categorizer);
            let flags = (c.er_class == crate::fitness::ExecutionResultClass::Handled)
                .then(|| extract_response_flags(resp, f));
            for (id, h) in fitness_for_result(f, &c, flags, resp.exception_info.as_ref()) {
                if id.starts_with("FAULT:") && self.archive.registry().index_of(&id).is_none() {
                    new_targets.push(TestingTarget {
                        id: id.clone(),
                        kind: TargetKind::Fault,
                        owner: f.qualified_name(),
                    });
                }
                put(id, h, &mut fitness, at);
            }
            for r in &resp.meta.coverage {
                for (side, d) in [(true, r.d_true), (false, r.d_false)] {
                    let t = TestingTarget::branch(&r.probe, side);
                    if self.archive.registry().index_of(&t.id).is_none() {
                        new_targets.push(t.clone());
                    }
                    put(t.id, 1.0 - d, &mut fitness, at);
                }
            }
            classifications.push(c);
        }
        for t in new_targets {
            self.archive.register(t);
        }
        if self.config.record_trace {
            self.trace.push(test.clone());
        }
        let evaluated = Rc::new(EvaluatedTest {
            seq: self.seq,
            test,
            execution,
            classifications,
            fitness,
            reached_at,
        });
        self.seq += 1;
        let capacity = self.config.capacity_at(self.calls);
        for (id, &h) in &evaluated.fitness {
            let idx = self.archive.registry().index_of(id).expect("targets registered before offer");
            self.archive.offer(idx, h, &evaluated, capacity);
        }
        Ok(Some(evaluated))
    }

    /// Mutates a test from the target's buffer up to `m` times in a row,
    /// continuing from each child that is at least as good for the target.
    fn climb(&mut self, target: usize) -> Result<Option<()>, ExecutorError> {
        let id = self.archive.registry().get(target).id.clone();
        let parent = self.archive.sample_from(target, &mut self.rng);
        let mut start = parent.test.clone();
        if let Some(&at) = parent.reached_at.get(&id) {
            start.actions.truncate(at + 1);
        }
        let mut current_test = start;
        let mut current_h = parent.fitness.get(&id).copied().unwrap_or(0.0);
        for _ in 0..self.config.mutations_at(self.calls) {
            let child = mutate_test(&current_test, &self.pool, &mut self.rng, self.config);
            let Some(child) = self.evaluate(child)? else {
                return Ok(None);
            };
            let h = child.fitness.get(&id).copied().unwrap_or(0.0);
            if h >= current_h {
                current_h = h;
                current_test = child.test.clone();
            }
            if self.archive.is_covered(target) || self.calls >= self.config.budget {
                break;
            }
        }
        Ok(Some(()))
    }

    fn step(&mut self) -> Result<Option<()>, ExecutorError> {
        let p = self.config.p_random_at(self.calls).clamp(0.0, 1.0);
        if !self.rng.gen_bool(p) {
            if let Some(target) = self.archive.pick_target(&mut self.rng) {
                return self.climb(target);
            }
        }
        let t = sample_random_test(&self.pool, &mut self.rng, self.config);
        Ok(self.evaluate(t)?.map(|_| ()))
    }

    fn run(&mut self) -> Option<String> {
        let adhoc = sample_adhoc_tests(&self.pool, &mut self.rng);
        for t in adhoc {
            match self.evaluate(t) {
                Ok(Some(_)) => {}
                Ok(None) => return None,
                Err(e) => return Some(e.to_string()),
            }
        }
        let mut shrunk_at = usize::MAX;
        while self.calls < self.config.budget {
            let capacity = self.config.capacity_at(self.calls);
            if capacity < shrunk_at {
                self.archive.shrink(capacity);
                shrunk_at = capacity;
            }
            match self.step() {
                Ok(Some(())) => {}
                Ok(None) => break,
                Err(e) => return Some(e.to_string()),
            }
        }
        None
    }

    fn finish(self, aborted: Option<String>, skipped: Vec<String>) -> SearchOutcome {
        let champions = self.archive.champions();
        let ids: BTreeMap<u64, String> =
            champions.iter().enumerate().map(|(i, t)| (t.seq, format!("t{}", i + 1))).collect();
        let registry = self.archive.registry();
        let mut covers: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
        let mut stats: Vec<TargetStat> = registry
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let champ = self.archive.champion(i);
                if let Some(c) = champ {
                    covers.entry(c.seq).or_default().insert(t.id.clone());
                }
                TargetStat {
                    target: t.id.clone(),
                    kind: t.kind,
                    best_h: self.archive.best_h(i),
                    covering_test: champ.map(|c| ids[&c.seq].clone()),
                }
            })
            .collect();
        stats.sort_by(|a, b| a.target.cmp(&b.target));
        let tests = champions
            .iter()
            .map(|t| SuiteTest {
                id: ids[&t.seq].clone(),
                test: t.test.clone(),
                execution: t.execution.clone(),
                classifications: t.classifications.clone(),
                covers: covers.remove(&t.seq).unwrap_or_default().into_iter().collect(),
            })
            .collect();
        SearchOutcome {
            suite: TestSuite { tests },
            stats,
            calls_used: self.calls,
            tests_evaluated: self.seq,
            aborted,
            trace: self.trace,
            skipped_functions: skipped,
        }
    }
}

/// Runs the configured algorithm against `transport` until the budget is
/// spent. An unreachable SUT stops the search and is reported in
/// [`SearchOutcome::aborted`] alongside whatever was found so far.
pub fn run_search(
    inputs: SearchInputs<'_>,
    transport: &mut dyn Transport,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let schema = inputs.schema;
    let mut builder = GeneBuilder::new(schema);
    if let Some(seeds) = inputs.seeds {
        builder = builder.with_seeds(seeds);
    }
    let mut templates = Vec::new();
    let mut skipped = Vec::new();
    let mut archive = Archive::new();
    for r in schema.function_refs() {
        let f = schema.function(r);
        match builder.action_templates(f) {
            Ok(genes) => {
                templates.push((r, genes));
                for t in register_targets_for_function(f, inputs.categorizer.is_some()) {
                    archive.register(t);
                }
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", f.qualified_name());
                skipped.push(f.qualified_name());
            }
        }
    }
    if templates.is_empty() {
        return Err(SearchError::NothingToCall(skipped.join(", ")));
    }
    let mut engine = Engine {
        inputs,
        config,
        executor: Executor::new(schema, inputs.auth, transport),
        pool: ActionPool {
            templates,
            auth_settings: inputs.auth.len(),
        },
        archive,
        rng: SearchRng::seed_from_u64(config.seed),
        calls: 0,
        seq: 0,
        trace: Vec::new(),
    };
    let aborted = engine.run();
    if let Some(reason) = &aborted {
        log::error!("search stopped early: {reason}");
    }
    Ok(engine.finish(aborted, skipped))
}
