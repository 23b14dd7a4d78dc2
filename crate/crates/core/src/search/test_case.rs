use rand::seq::SliceRandom;
use rand::Rng;

use super::SearchConfig;
use crate::executor::{EnvCommand, PlannedAction};
use crate::genes::{mutate_subset, Gene};
use crate::schema::FunctionRef;

/// One call in a test: the function, its argument genes and auth setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub function: FunctionRef,
    pub genes: Vec<Gene>,
    /// Index into the configured auth settings; `None` calls without auth.
    pub auth: Option<usize>,
}

impl Action {
    pub fn plan(&self) -> PlannedAction {
        PlannedAction {
            function: self.function,
            args: self.genes.iter().map(Gene::render).collect(),
            auth: self.auth,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestCase {
    pub env: Vec<EnvCommand>,
    pub actions: Vec<Action>,
}

impl TestCase {
    pub fn plan(&self) -> Vec<PlannedAction> {
        self.actions.iter().map(Action::plan).collect()
    }
}

/// Functions a test may call, with their unrandomized genes.
#[derive(Debug, Clone)]
pub struct ActionPool {
    pub templates: Vec<(FunctionRef, Vec<Gene>)>,
    /// Number of configured auth settings.
    pub auth_settings: usize,
}

impl ActionPool {
    pub fn fresh_action<R: Rng + ?Sized>(&self, idx: usize, auth: Option<usize>, rng: &mut R) -> Action {
        let (function, genes) = &self.templates[idx];
        let mut genes = genes.clone();
        genes.iter_mut().for_each(|g| g.randomize(rng));
        Action {
            function: *function,
            genes,
            auth,
        }
    }

    fn random_auth<R: Rng + ?Sized>(&self, rng: &mut R, p_enabled: f64) -> Option<usize> {
        if self.auth_settings == 0 || !rng.gen_bool(p_enabled) {
            None
        } else {
            Some(rng.gen_range(0..self.auth_settings))
        }
    }

    fn random_action<R: Rng + ?Sized>(&self, rng: &mut R, config: &SearchConfig) -> Action {
        let idx = rng.gen_range(0..self.templates.len());
        let auth = self.random_auth(rng, config.p_auth_enabled);
        self.fresh_action(idx, auth, rng)
    }
}

/// Single-action tests for every function under every auth setting
/// (none first, then each configured one), functions in schema order.
pub fn sample_adhoc_tests<R: Rng + ?Sized>(pool: &ActionPool, rng: &mut R) -> Vec<TestCase> {
    let settings: Vec<Option<usize>> = std::iter::once(None).chain((0..pool.auth_settings).map(Some)).collect();
    let mut out = Vec::with_capacity(pool.templates.len() * settings.len());
    for idx in 0..pool.templates.len() {
        for &auth in &settings {
            out.push(TestCase {
                env: Vec::new(),
                actions: vec![pool.fresh_action(idx, auth, rng)],
            });
        }
    }
    out
}

/// Action count uniform in `[1, max_actions]`, functions uniform.
pub fn sample_random_test<R: Rng + ?Sized>(pool: &ActionPool, rng: &mut R, config: &SearchConfig) -> TestCase {
    let n = rng.gen_range(1..=config.max_actions.max(1));
    TestCase {
        env: Vec::new(),
        actions: (0..n).map(|_| pool.random_action(rng, config)).collect(),
    }
}

/// Probability of re-drawing the auth setting during a value mutation.
const P_AUTH_MUTATION: f64 = 0.05;

/// Adds or removes one action with probability `p_structure`, otherwise
/// mutates the genes of one action. Bounds on action count always hold.
pub fn mutate_test<R: Rng + ?Sized>(t: &TestCase, pool: &ActionPool, rng: &mut R, config: &SearchConfig) -> TestCase {
    let mut t = t.clone();
    let len = t.actions.len();
    let can_add = len < config.max_actions;
    let can_remove = len > 1;
    let mutable: Vec<usize> = (0..len).filter(|&i| t.actions[i].genes.iter().any(Gene::is_mutable)).collect();
    let structural = (can_add || can_remove) && (mutable.is_empty() || rng.gen_bool(config.p_structure));
    if structural {
        let add = can_add && (!can_remove || rng.gen_bool(0.5));
        if add {
            let at = rng.gen_range(0..=len);
            t.actions.insert(at, pool.random_action(rng, config));
        } else {
            t.actions.remove(rng.gen_range(0..len));
        }
        return t;
    }
    if let Some(&i) = mutable.choose(rng) {
        let action = &mut t.actions[i];
        if pool.auth_settings > 0 && rng.gen_bool(P_AUTH_MUTATION) {
            action.auth = pool.random_auth(rng, config.p_auth_enabled);
        } else {
            mutate_subset(action.genes.iter_mut(), rng);
        }
    } else if pool.auth_settings > 0 {
        let i = rng.gen_range(0..len);
        t.actions[i].auth = pool.random_auth(rng, config.p_auth_enabled);
    }
    t
}
