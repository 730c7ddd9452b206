use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ExtState, GeneratorConstants, OperatorLab, MONOTONICITY_TOL};
use crate::analysis::energy::fmt_num;

/// One sampled pair: `<(C + A)v - (C + A)v', v - v'>` and `|v - v'|^2` in the weighted inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub id: usize,
    pub pairing: f64,
    pub norm2: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub constants: GeneratorConstants,
    pub seed: u64,
    pub rows: Vec<PairRow>,
    pub min_normalized: f64,
    pub negatives: usize,
    pub passed: bool,
}

impl MonotonicityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair_id,pairing,norm2,normalized\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.id,
                fmt_num(r.pairing),
                fmt_num(r.norm2),
                fmt_num(r.normalized)
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "pairs = {}\nseed = {}\nxi_op = {}\nc_weight = {}\nc_shift = {}\nmin_normalized = {}\nnegatives = {}\ntolerance = {}\npassed = {}\n",
            self.rows.len(),
            self.seed,
            fmt_num(self.constants.xi_op),
            fmt_num(self.constants.c_weight),
            fmt_num(self.constants.c_shift),
            fmt_num(self.min_normalized),
            self.negatives,
            MONOTONICITY_TOL,
            self.passed
        )
    }
}

/// Sampling family for the random domain elements of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFamily {
    /// Random fields and a history profile joining the trace to a random endpoint.
    Generic,
    /// Trace-free fields with interior-only histories; isolates the history transport term.
    TraceFree,
}

fn pair(
    lab: &OperatorLab,
    k: &GeneratorConstants,
    seed: u64,
    id: usize,
    family: PairFamily,
) -> PairRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let draw = |rng: &mut ChaCha8Rng| match family {
        PairFamily::Generic => lab.random_element(rng),
        PairFamily::TraceFree => lab.random_trace_free_element(rng),
    };
    let v = draw(&mut rng);
    let w = draw(&mut rng);
    let mut diff: ExtState = v.clone();
    diff.axpy(-1.0, &w);
    let mut image = lab.generator_unchecked(&v);
    image.axpy(-1.0, &lab.generator_unchecked(&w));
    let norm2 = lab.inner(k, &diff, &diff);
    let pairing = k.c_shift * norm2 + lab.inner(k, &image, &diff);
    PairRow {
        id,
        pairing,
        norm2,
        normalized: if norm2 > 0.0 { pairing / norm2 } else { 0.0 },
    }
}

/// Samples `n_pairs` independent domain pairs; pair `i` draws from stream `i` of the seeded generator.
pub fn monotonicity_test(
    lab: &OperatorLab,
    n_pairs: usize,
    seed: u64,
    k: &GeneratorConstants,
) -> MonotonicityReport {
    monotonicity_test_family(lab, n_pairs, seed, k, PairFamily::Generic)
}

/// As [`monotonicity_test`], drawing elements from `family`.
pub fn monotonicity_test_family(
    lab: &OperatorLab,
    n_pairs: usize,
    seed: u64,
    k: &GeneratorConstants,
    family: PairFamily,
) -> MonotonicityReport {
    let rows: Vec<PairRow> = (0..n_pairs)
        .into_par_iter()
        .map(|i| pair(lab, k, seed, i, family))
        .collect();
    let min_normalized = rows
        .iter()
        .map(|r| r.normalized)
        .fold(f64::INFINITY, f64::min);
    let negatives = rows
        .iter()
        .filter(|r| r.normalized < -MONOTONICITY_TOL)
        .count();
    MonotonicityReport {
        constants: *k,
        seed,
        passed: negatives == 0,
        min_normalized: if rows.is_empty() { 0.0 } else { min_normalized },
        negatives,
        rows,
    }
}
