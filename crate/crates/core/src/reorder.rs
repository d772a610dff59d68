//! Variable-reordering algorithms and the compression-ratio metric.
//!
//! [`window_k`], [`sift`], and [`random_swaps`] work in place on an existing
//! manager through adjacent swaps; [`genetic`] and [`exhaustive`] evaluate
//! candidate orders by fresh rebuilds. All of them obey the adoption rule:
//! a new order is kept only when it is strictly smaller, otherwise the result
//! carries the initial order and `eta = 0`. Ties are broken toward the
//! first-enumerated candidate so that runs are reproducible.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::bdd::{validate_order, BddError, BddManager, NodeId};
use crate::cnf::{Cnf, VarId};
use crate::timer::Stopwatch;

/// Passes of the window algorithm before giving up on convergence.
pub const WINDOW_MAX_PASSES: u32 = 10;
/// Default sifting growth bound.
pub const SIFT_MAX_GROWTH: f64 = 2.0;
/// Largest variable count [`exhaustive`] accepts by default (8! orders).
pub const EXHAUSTIVE_CAP: u32 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReorderError {
    #[error("window size must be 2 or 3, got {0}")]
    WindowSize(u32),
    #[error("exhaustive search is capped at {cap} variables, got {n}")]
    ExhaustiveCap { n: u32, cap: u32 },
    #[error(transparent)]
    Bdd(#[from] BddError),
}

/// Outcome of one reordering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderResult {
    /// Adopted order (the initial order when no strict improvement was found).
    pub order: Vec<VarId>,
    pub initial_size: u64,
    /// OBDD size under `order`; equals `initial_size` when not adopted.
    pub final_size: u64,
    /// `(final - initial) / initial` when adopted, else 0.
    pub eta: f64,
    pub elapsed: f64,
}

/// Compression ratio and the adoption decision: a new order is adopted only
/// when strictly smaller, and a rejected order contributes `eta = 0`.
pub fn compression_ratio(initial: u64, final_size: u64) -> (f64, bool) {
    assert!(initial >= 1, "initial size must be positive");
    if final_size < initial {
        ((final_size as f64 - initial as f64) / initial as f64, true)
    } else {
        (0.0, false)
    }
}

/// Size of the formula's OBDD freshly built under `order`.
pub fn obdd_size_under(cnf: &Cnf, order: &[VarId]) -> Result<u64, BddError> {
    let mut mgr = BddManager::new(cnf.num_vars(), order)?;
    let root = mgr.build_cnf(cnf)?;
    Ok(mgr.size(root))
}

/// Wraps up an in-place run: applies the adoption rule and restores the
/// initial order when the exploration ended without strict improvement.
fn conclude_in_place(
    mgr: &mut BddManager,
    root: NodeId,
    initial_order: Vec<VarId>,
    initial_size: u64,
    sw: Stopwatch,
) -> ReorderResult {
    let explored = mgr.size(root);
    let (eta, adopted) = compression_ratio(initial_size, explored);
    if adopted {
        ReorderResult {
            order: mgr.order().to_vec(),
            initial_size,
            final_size: explored,
            eta,
            elapsed: sw.seconds(),
        }
    } else {
        // monotone acceptance never drifts to an equal-size order
        debug_assert_eq!(mgr.order(), &initial_order[..]);
        mgr.reorder_to(&initial_order).expect("initial order is valid");
        ReorderResult {
            order: initial_order,
            initial_size,
            final_size: initial_size,
            eta: 0.0,
            elapsed: sw.seconds(),
        }
    }
}

/// Lexicographic permutations of `0..k`, identity first.
fn lex_perms(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..k).collect();
    let mut stack: Vec<usize> = Vec::new();
    fn rec(items: &mut Vec<usize>, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if items.is_empty() {
            out.push(stack.clone());
            return;
        }
        for i in 0..items.len() {
            let x = items.remove(i);
            stack.push(x);
            rec(items, stack, out);
            stack.pop();
            items.insert(i, x);
        }
    }
    rec(&mut items, &mut stack, &mut out);
    out
}

/// Moves the window starting at level `s` to hold exactly `target`
/// (a permutation of its current variables), via adjacent swaps.
fn set_window(mgr: &mut BddManager, s: u32, target: &[VarId]) {
    for (i, &v) in target.iter().enumerate() {
        let slot = s + i as u32;
        let mut at = mgr.level_of(v);
        debug_assert!(at >= slot && at < s + target.len() as u32);
        while at > slot {
            mgr.swap_adjacent(at - 1);
            at -= 1;
        }
    }
}

/// Window permutation: slides a window of `k` adjacent levels from the top
/// down, trying all `k!` arrangements of each window and keeping the smallest
/// (ties keep the first enumerated, so the current arrangement wins). Full
/// passes repeat until one yields no improvement or [`WINDOW_MAX_PASSES`].
pub fn window_k(mgr: &mut BddManager, root: NodeId, k: u32) -> Result<ReorderResult, ReorderError> {
    if k != 2 && k != 3 {
        return Err(ReorderError::WindowSize(k));
    }
    let sw = Stopwatch::start();
    let initial_order = mgr.order().to_vec();
    let initial_size = mgr.size(root);
    let n = mgr.num_vars();
    let perms = lex_perms(k as usize);
    if n >= k {
        for _ in 0..WINDOW_MAX_PASSES {
            let mut improved = false;
            for s in 0..=(n - k) {
                let window: Vec<VarId> = (s..s + k).map(|l| mgr.var_at_level(l)).collect();
                let mut best_size = mgr.size(root);
                let mut best: Option<&[usize]> = None; // None = keep current
                for p in &perms[1..] {
                    let candidate: Vec<VarId> = p.iter().map(|&i| window[i]).collect();
                    set_window(mgr, s, &candidate);
                    let size = mgr.size(root);
                    if size < best_size {
                        best_size = size;
                        best = Some(p);
                    }
                }
                let settle: Vec<VarId> = match best {
                    Some(p) => {
                        improved = true;
                        p.iter().map(|&i| window[i]).collect()
                    }
                    None => window,
                };
                set_window(mgr, s, &settle);
            }
            if !improved {
                break;
            }
        }
    }
    Ok(conclude_in_place(mgr, root, initial_order, initial_size, sw))
}

/// Rudell-style sifting, one pass: variables in decreasing order of node
/// count at their level (ties by `VarId`); each is slid through every
/// position — downward first, then up — and parked at the best one. A
/// direction is abandoned once the size exceeds `max_growth` times the best
/// seen for the variable.
pub fn sift(mgr: &mut BddManager, root: NodeId, max_growth: f64) -> ReorderResult {
    assert!(max_growth > 1.0, "max_growth must exceed 1");
    let sw = Stopwatch::start();
    let initial_order = mgr.order().to_vec();
    let initial_size = mgr.size(root);
    let n = mgr.num_vars();

    let profile = mgr.level_profile(root);
    let mut schedule: Vec<(u64, VarId)> = (0..n)
        .map(|l| (profile[l as usize], mgr.var_at_level(l)))
        .collect();
    schedule.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    for (_, v) in schedule {
        sift_one(mgr, root, v, max_growth, n);
    }
    conclude_in_place(mgr, root, initial_order, initial_size, sw)
}

fn sift_one(mgr: &mut BddManager, root: NodeId, v: VarId, max_growth: f64, n: u32) {
    let mut pos = mgr.level_of(v);
    let mut best_size = mgr.size(root);
    let mut best_pos = pos;
    // downward
    while pos + 1 < n {
        mgr.swap_adjacent(pos);
        pos += 1;
        let s = mgr.size(root);
        if s < best_size {
            best_size = s;
            best_pos = pos;
        } else if s as f64 > max_growth * best_size as f64 {
            break;
        }
    }
    // upward, back through the start to the top
    while pos > 0 {
        mgr.swap_adjacent(pos - 1);
        pos -= 1;
        let s = mgr.size(root);
        if s < best_size {
            best_size = s;
            best_pos = pos;
        } else if s as f64 > max_growth * best_size as f64 {
            break;
        }
    }
    // park at the best position seen (ties keep the earliest, i.e. the start)
    while pos < best_pos {
        mgr.swap_adjacent(pos);
        pos += 1;
    }
    while pos > best_pos {
        mgr.swap_adjacent(pos - 1);
        pos -= 1;
    }
}

/// Exchanges the variables at levels `i < j` through adjacent swaps,
/// leaving every other level in place. Involution.
fn transpose_levels(mgr: &mut BddManager, i: u32, j: u32) {
    debug_assert!(i < j);
    for l in (i..j).rev() {
        mgr.swap_adjacent(l);
    }
    for l in i + 1..j {
        mgr.swap_adjacent(l);
    }
}

/// Random restarts baseline: `trials` times, transpose two distinct levels
/// chosen uniformly and keep the change only when the size strictly drops.
pub fn random_swaps(mgr: &mut BddManager, root: NodeId, trials: u64, seed: u64) -> ReorderResult {
    let sw = Stopwatch::start();
    let initial_order = mgr.order().to_vec();
    let initial_size = mgr.size(root);
    let n = mgr.num_vars();
    if n >= 2 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut best = initial_size;
        for _ in 0..trials {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let (i, j) = (a.min(b), a.max(b));
            transpose_levels(mgr, i, j);
            let s = mgr.size(root);
            if s < best {
                best = s;
            } else {
                transpose_levels(mgr, i, j);
            }
        }
    }
    conclude_in_place(mgr, root, initial_order, initial_size, sw)
}

/// Knobs of the genetic search. All counts must be positive, rates within
/// `[0, 1]`, and `elitism <= population`.
#[derive(Debug, Clone)]
pub struct GaConfig {
    pub population: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Probability that a child receives 1–3 random transpositions.
    pub mutation_rate: f64,
    pub elitism: usize,
    pub max_generations: usize,
    /// Stop after this many generations without a new best.
    pub stagnation: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 16,
            tournament: 2,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            elitism: 2,
            max_generations: 50,
            stagnation: 10,
        }
    }
}

impl GaConfig {
    fn validate(&self) {
        assert!(self.population >= 1, "population must be positive");
        assert!(self.tournament >= 1, "tournament must be positive");
        assert!((0.0..=1.0).contains(&self.crossover_rate), "crossover_rate in [0,1]");
        assert!((0.0..=1.0).contains(&self.mutation_rate), "mutation_rate in [0,1]");
        assert!(self.elitism <= self.population, "elitism must fit the population");
        assert!(self.max_generations >= 1, "max_generations must be positive");
        assert!(self.stagnation >= 1, "stagnation must be positive");
    }
}

/// Genetic search over orders. The population is seeded with the initial
/// order, the formula's frequency order, and random permutations; fitness is
/// the OBDD size under the candidate, freshly built per evaluation (memoized
/// by order). Returns the best individual ever seen.
pub fn genetic(
    cnf: &Cnf,
    initial: &[VarId],
    cfg: &GaConfig,
    seed: u64,
) -> Result<ReorderResult, ReorderError> {
    cfg.validate();
    let n = cnf.num_vars();
    validate_order(n, initial)?;
    let sw = Stopwatch::start();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut memo: HashMap<Vec<VarId>, u64> = HashMap::new();

    let mut population: Vec<Vec<VarId>> = Vec::with_capacity(cfg.population);
    population.push(initial.to_vec());
    if population.len() < cfg.population {
        population.push(cnf.frequency_order());
    }
    while population.len() < cfg.population {
        population.push(random_order(n, &mut rng));
    }

    let mut fitness: Vec<u64> = Vec::with_capacity(cfg.population);
    for ind in &population {
        fitness.push(eval_fitness(cnf, ind, &mut memo)?);
    }
    let initial_size = fitness[0];
    let (mut best_order, mut best_size) = best_of(&population, &fitness);

    let mut stagnant = 0usize;
    for _ in 0..cfg.max_generations {
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by_key(|&i| (fitness[i], i));

        let mut next: Vec<Vec<VarId>> = ranked[..cfg.elitism.min(ranked.len())]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < cfg.population {
            let p1 = tournament(&fitness, cfg.tournament, &mut rng);
            let p2 = tournament(&fitness, cfg.tournament, &mut rng);
            let mut child = if rng.gen_bool(cfg.crossover_rate) {
                ox1(&population[p1], &population[p2], &mut rng)
            } else {
                population[p1].clone()
            };
            if rng.gen_bool(cfg.mutation_rate) {
                mutate_transpositions(&mut child, &mut rng);
            }
            next.push(child);
        }

        population = next;
        fitness.clear();
        for ind in &population {
            fitness.push(eval_fitness(cnf, ind, &mut memo)?);
        }
        let (gen_best, gen_size) = best_of(&population, &fitness);
        if gen_size < best_size {
            best_size = gen_size;
            best_order = gen_best;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= cfg.stagnation {
                break;
            }
        }
    }

    let (eta, adopted) = compression_ratio(initial_size, best_size);
    Ok(if adopted {
        ReorderResult {
            order: best_order,
            initial_size,
            final_size: best_size,
            eta,
            elapsed: sw.seconds(),
        }
    } else {
        ReorderResult {
            order: initial.to_vec(),
            initial_size,
            final_size: initial_size,
            eta: 0.0,
            elapsed: sw.seconds(),
        }
    })
}

fn eval_fitness(
    cnf: &Cnf,
    order: &[VarId],
    memo: &mut HashMap<Vec<VarId>, u64>,
) -> Result<u64, ReorderError> {
    if let Some(&s) = memo.get(order) {
        return Ok(s);
    }
    let s = obdd_size_under(cnf, order)?;
    memo.insert(order.to_vec(), s);
    Ok(s)
}

fn best_of(population: &[Vec<VarId>], fitness: &[u64]) -> (Vec<VarId>, u64) {
    let mut best = 0;
    for i in 1..population.len() {
        if fitness[i] < fitness[best] {
            best = i;
        }
    }
    (population[best].clone(), fitness[best])
}

fn tournament(fitness: &[u64], size: usize, rng: &mut ChaCha12Rng) -> usize {
    let mut winner = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] < fitness[winner] {
            winner = c;
        }
    }
    winner
}

/// Order crossover (OX1): child inherits `p1[a..=b]` in place and the
/// remaining variables in `p2`'s cyclic order starting after `b`.
fn ox1(p1: &[VarId], p2: &[VarId], rng: &mut ChaCha12Rng) -> Vec<VarId> {
    let n = p1.len();
    let mut a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut child = vec![VarId(0); n];
    let mut used = vec![false; n + 1];
    for i in a..=b {
        child[i] = p1[i];
        used[p1[i].0 as usize] = true;
    }
    let mut write = (b + 1) % n;
    for off in 0..n {
        let v = p2[(b + 1 + off) % n];
        if !used[v.0 as usize] {
            child[write] = v;
            used[v.0 as usize] = true;
            write = (write + 1) % n;
        }
    }
    child
}

fn mutate_transpositions(order: &mut [VarId], rng: &mut ChaCha12Rng) {
    let n = order.len();
    let k = rng.gen_range(1..=3);
    if n < 2 {
        return;
    }
    for _ in 0..k {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        order.swap(i, j);
    }
}

fn random_order(n: u32, rng: &mut ChaCha12Rng) -> Vec<VarId> {
    use rand::seq::SliceRandom;
    let mut order: Vec<VarId> = (1..=n).map(VarId).collect();
    order.shuffle(rng);
    order
}

/// Lexicographic successor in place; false once `p` is the last permutation.
fn next_permutation(p: &mut [VarId]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Brute-force oracle: tries every order in lexicographic sequence and keeps
/// the first one achieving the global minimum size. Refuses `n > cap` —
/// finding the optimal order is NP-complete and `n!` rebuilds stop being a
/// desk-scale oracle fast.
pub fn exhaustive(cnf: &Cnf, initial: &[VarId], cap: u32) -> Result<ReorderResult, ReorderError> {
    let n = cnf.num_vars();
    if n > cap {
        return Err(ReorderError::ExhaustiveCap { n, cap });
    }
    validate_order(n, initial)?;
    let sw = Stopwatch::start();
    let initial_size = obdd_size_under(cnf, initial)?;

    let mut perm: Vec<VarId> = (1..=n).map(VarId).collect();
    let mut best_order = perm.clone();
    let mut best_size = obdd_size_under(cnf, &perm)?;
    while next_permutation(&mut perm) {
        let s = obdd_size_under(cnf, &perm)?;
        if s < best_size {
            best_size = s;
            best_order = perm.clone();
        }
    }

    let (eta, adopted) = compression_ratio(initial_size, best_size);
    Ok(if adopted {
        ReorderResult {
            order: best_order,
            initial_size,
            final_size: best_size,
            eta,
            elapsed: sw.seconds(),
        }
    } else {
        ReorderResult {
            order: initial.to_vec(),
            initial_size,
            final_size: initial_size,
            eta: 0.0,
            elapsed: sw.seconds(),
        }
    })
}
