use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::EvaluatedTest;
use crate::fitness::{TargetRegistry, TestingTarget};

/// Per-target populations of partial solutions plus one champion for each
/// covered target.
#[derive(Debug, Default)]
pub struct Archive {
    registry: TargetRegistry,
    best: Vec<f64>,
    champions: Vec<Option<Rc<EvaluatedTest>>>,
    buffers: Vec<Vec<(f64, Rc<EvaluatedTest>)>>,
    counters: Vec<u32>,
}

fn shorter(a: &EvaluatedTest, b: &EvaluatedTest) -> bool {
    a.test.actions.len() < b.test.actions.len()
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, t: TestingTarget) -> usize {
        let i = self.registry.register(t);
        if i == self.best.len() {
            self.best.push(0.0);
            self.champions.push(None);
            self.buffers.push(Vec::new());
            self.counters.push(0);
        }
        i
    }

    pub fn registry(&self) -> &TargetRegistry {
        &self.registry
    }

    pub fn best_h(&self, target: usize) -> f64 {
        self.best[target]
    }

    pub fn champion(&self, target: usize) -> Option<&Rc<EvaluatedTest>> {
        self.champions[target].as_ref()
    }

    pub fn is_covered(&self, target: usize) -> bool {
        self.best[target] >= 1.0
    }

    pub fn covered_count(&self) -> usize {
        self.best.iter().filter(|&&h| h >= 1.0).count()
    }

    pub fn buffer_len(&self, target: usize) -> usize {
        self.buffers[target].len()
    }

    /// Offers `test` with heuristic `h` for `target`. Returns whether the
    /// archive changed.
    pub fn offer(&mut self, target: usize, h: f64, test: &Rc<EvaluatedTest>, capacity: usize) -> bool {
        if h <= 0.0 {
            return false;
        }
        if self.is_covered(target) {
            let champ = self.champions[target].as_ref().expect("covered target has a champion");
            if h >= 1.0 && shorter(test, champ) {
                self.champions[target] = Some(Rc::clone(test));
                return true;
            }
            return false;
        }
        if h >= 1.0 {
            self.best[target] = 1.0;
            self.champions[target] = Some(Rc::clone(test));
            self.buffers[target].clear();
            self.counters[target] = 0;
            return true;
        }
        let improved = h > self.best[target];
        if improved {
            self.best[target] = h;
            self.counters[target] = 0;
        }
        let buf = &mut self.buffers[target];
        if buf.len() < capacity.max(1) {
            buf.push((h, Rc::clone(test)));
            return true;
        }
        // Replace the worst entry; among equal h the longest test goes first.
        let (worst, _) = buf
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.0.total_cmp(&b.0)
                    .then_with(|| b.1.test.actions.len().cmp(&a.1.test.actions.len()))
            })
            .expect("non-empty buffer");
        let (wh, wt) = &buf[worst];
        if h > *wh || (h == *wh && shorter(test, wt)) {
            buf[worst] = (h, Rc::clone(test));
            return true;
        }
        improved
    }

    /// Trims every buffer to `capacity`, keeping the best entries.
    pub fn shrink(&mut self, capacity: usize) {
        let capacity = capacity.max(1);
        for buf in &mut self.buffers {
            if buf.len() > capacity {
                buf.sort_by(|a, b| {
                    b.0.total_cmp(&a.0)
                        .then_with(|| a.1.test.actions.len().cmp(&b.1.test.actions.len()))
                        .then_with(|| a.1.seq.cmp(&b.1.seq))
                });
                buf.truncate(capacity);
            }
        }
    }

    /// An uncovered target with a non-empty buffer and the fewest samples
    /// taken since its last improvement.
    pub fn pick_target<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let candidates: Vec<usize> = (0..self.best.len())
            .filter(|&i| !self.is_covered(i) && !self.buffers[i].is_empty())
            .collect();
        let low = candidates.iter().map(|&i| self.counters[i]).min()?;
        let ties: Vec<usize> = candidates.into_iter().filter(|&i| self.counters[i] == low).collect();
        ties.choose(rng).copied()
    }

    pub fn sample_from<R: Rng + ?Sized>(&mut self, target: usize, rng: &mut R) -> Rc<EvaluatedTest> {
        self.counters[target] += 1;
        let (_, t) = self.buffers[target].choose(rng).expect("picked target has a buffer");
        Rc::clone(t)
    }

    /// Champions of covered targets, each test once, in evaluation order.
    pub fn champions(&self) -> Vec<Rc<EvaluatedTest>> {
        let mut out: Vec<Rc<EvaluatedTest>> = self.champions.iter().flatten().cloned().collect();
        out.sort_by_key(|t| t.seq);
        out.dedup_by_key(|t| t.seq);
        out
    }
}
