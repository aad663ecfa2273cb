use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::ConvergenceMatrix;
use crate::error::{Error, Result};
use crate::par;

/// Genetic-algorithm hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub tournament: usize,
    /// per-individual probability of swapping one member for a non-member
    pub mutation_rate: f64,
    pub generations: usize,
    pub elitism: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 100,
            tournament: 4,
            mutation_rate: 0.1,
            generations: 200,
            elitism: 2,
        }
    }
}

/// Outcome of [`genetic_select`]: matrix rows with the default row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub rows: Vec<usize>,
    pub train_joint_failure: f64,
    pub validation_joint_failure: f64,
    /// number of training columns; validation uses the rest
    pub train_cols: usize,
}

/// Fitness key: joint failures on the training split, then the sorted
/// member list, which makes the order total and the search deterministic.
type Scored = (usize, Vec<usize>);

/// Chooses `l_minus_1` rows besides `default_row` that minimise the joint
/// failure on the first `train_fraction` of the columns. The best individual
/// of the final generation is polished by single-swap descent, so with
/// `l_minus_1 = 1` the result is the exhaustive single-row optimum.
pub fn genetic_select(
    matrix: &ConvergenceMatrix,
    default_row: usize,
    l_minus_1: usize,
    train_fraction: f64,
    params: &GaParams,
    seed: u64,
) -> Result<Selection> {
    if l_minus_1 == 0 {
        return Err(Error::Config("at least one permutation besides the default is needed".into()));
    }
    if matrix.cols() < 10 {
        return Err(Error::Config(format!("{} frames are too few (need 10)", matrix.cols())));
    }
    if default_row >= matrix.rows() {
        return Err(Error::Config(format!("default row {default_row} out of {}", matrix.rows())));
    }
    let candidates: Vec<usize> = (0..matrix.rows()).filter(|&r| r != default_row).collect();
    if l_minus_1 > candidates.len() {
        return Err(Error::Config(format!(
            "cannot pick {l_minus_1} of {} candidate permutations",
            candidates.len()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config("train fraction must lie in (0, 1)".into()));
    }
    if params.population < 2 || params.tournament == 0 || params.elitism > params.population {
        return Err(Error::Config(format!("unusable GA parameters {params:?}")));
    }
    let train_cols = ((matrix.cols() as f64 * train_fraction).round() as usize).clamp(1, matrix.cols() - 1);
    let train = matrix.columns(0, train_cols);
    let valid = matrix.columns(train_cols, matrix.cols());

    let score = |mut members: Vec<usize>| -> Scored {
        members.sort_unstable();
        let mut rows = members.clone();
        rows.push(default_row);
        (train.joint_failures(&rows), members)
    };
    let score_all = |pop: Vec<Vec<usize>>| -> Vec<Scored> {
        let mut scored = par::map_init(pop.len(), || (), |_, i| score(pop[i].clone()));
        scored.sort();
        scored
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<Vec<usize>> = (0..params.population)
        .map(|_| candidates.choose_multiple(&mut rng, l_minus_1).copied().collect())
        .collect();
    let mut pop = score_all(initial);
    for _ in 0..params.generations {
        let mut next: Vec<Vec<usize>> = pop.iter().take(params.elitism).map(|s| s.1.clone()).collect();
        while next.len() < params.population {
            let a = tournament(&pop, params.tournament, &mut rng);
            let b = tournament(&pop, params.tournament, &mut rng);
            let mut child = crossover(a, b, l_minus_1, &candidates, &mut rng);
            if rng.random_bool(params.mutation_rate) {
                mutate(&mut child, &candidates, &mut rng);
            }
            next.push(child);
        }
        pop = score_all(next);
    }
    let (_, best) = polish(pop.swap_remove(0), &candidates, &score);

    let mut rows = vec![default_row];
    rows.extend(best);
    Ok(Selection {
        train_joint_failure: train.joint_failure(&rows)?,
        validation_joint_failure: valid.joint_failure(&rows)?,
        rows,
        train_cols,
    })
}

fn tournament<'a, R: Rng>(pop: &'a [Scored], size: usize, rng: &mut R) -> &'a [usize] {
    // population is sorted, so the smallest sampled index wins
    let best = (0..size).map(|_| rng.random_range(0..pop.len())).min().expect("size >= 1");
    &pop[best].1
}

/// Uniform crossover on set membership, repaired to exactly `size` members.
fn crossover<R: Rng>(a: &[usize], b: &[usize], size: usize, candidates: &[usize], rng: &mut R) -> Vec<usize> {
    let mut child: Vec<usize> = a.iter().copied().filter(|m| b.contains(m)).collect();
    let mut optional: Vec<usize> = a.iter().chain(b).copied().filter(|m| !child.contains(m)).collect();
    optional.sort_unstable();
    optional.dedup();
    let (mut taken, mut left): (Vec<usize>, Vec<usize>) = optional.into_iter().partition(|_| rng.random_bool(0.5));
    taken.shuffle(rng);
    left.shuffle(rng);
    child.extend(taken);
    child.truncate(size);
    for m in left {
        if child.len() == size {
            break;
        }
        child.push(m);
    }
    while child.len() < size {
        let m = *candidates.choose(rng).expect("candidates non-empty");
        if !child.contains(&m) {
            child.push(m);
        }
    }
    child
}

fn mutate<R: Rng>(child: &mut [usize], candidates: &[usize], rng: &mut R) {
    let outside: Vec<usize> = candidates.iter().copied().filter(|c| !child.contains(c)).collect();
    if let Some(&new) = outside.choose(rng) {
        let slot = rng.random_range(0..child.len());
        child[slot] = new;
    }
}

/// Steepest single-swap descent.
fn polish(mut best: Scored, candidates: &[usize], score: &impl Fn(Vec<usize>) -> Scored) -> Scored {
    loop {
        let mut improved = None::<Scored>;
        for slot in 0..best.1.len() {
            for &c in candidates.iter().filter(|c| !best.1.contains(c)) {
                let mut trial = best.1.clone();
                trial[slot] = c;
                let s = score(trial);
                if s < *improved.as_ref().unwrap_or(&best) {
                    improved = Some(s);
                }
            }
        }
        match improved {
            Some(s) => best = s,
            None => return best,
        }
    }
}

/// `count` random row sets of size `l_minus_1 + 1`, each starting with `default_row`.
pub fn random_subsets(rows: usize, default_row: usize, l_minus_1: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let candidates: Vec<usize> = (0..rows).filter(|&r| r != default_row).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut set = vec![default_row];
            set.extend(candidates.choose_multiple(&mut rng, l_minus_1).copied());
            set
        })
        .collect()
}
