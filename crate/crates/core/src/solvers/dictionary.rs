use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::config::SolverConfig;
use super::trace::Monitor;
use super::{solve_with, SolverKind};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::models::{ProblemInstance, TargetSet};
use crate::objective::Objective;
use crate::rng::seeded;
use crate::sphere::sample_uniform_sphere;

/// Atoms closer than this in |cosine| are the same up to sign.
pub const DEDUP_COSINE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomMatch {
    /// Column of the recovered dictionary.
    pub atom: usize,
    /// Column of the ground-truth dictionary.
    pub column: usize,
    pub sign: f64,
    /// `|atom - sign * column|`.
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchReport {
    pub matches: Vec<AtomMatch>,
    pub unmatched_columns: Vec<usize>,
    pub unmatched_atoms: Vec<usize>,
}

impl MatchReport {
    pub fn max_dist(&self) -> f64 {
        self.matches.iter().fold(0.0f64, |m, a| m.max(a.dist))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryRecovery {
    /// Distinct recovered atoms as columns (n x k).
    pub atoms: DMatrix<f64>,
    pub report: MatchReport,
}

/// Drops every vector whose |cosine| with an earlier kept one exceeds
/// [`DEDUP_COSINE`]; order of first appearance is kept.
pub fn dedup_atoms(candidates: &[DVector<f64>]) -> DMatrix<f64> {
    let mut kept: Vec<&DVector<f64>> = Vec::new();
    for c in candidates {
        let cn = c.norm();
        if !(cn > 0.0) {
            continue;
        }
        let dup = kept.iter().any(|k| (k.dot(c) / (k.norm() * cn)).abs() > DEDUP_COSINE);
        if !dup {
            kept.push(c);
        }
    }
    let n = candidates.first().map_or(0, |c| c.len());
    let mut out = DMatrix::zeros(n, kept.len());
    for (j, k) in kept.iter().enumerate() {
        out.set_column(j, &(*k / k.norm()));
    }
    out
}

/// Greedy signed matching: repeatedly pair the free (atom, column) with the
/// largest |cosine|, lowest indices winning ties.
pub fn match_dictionary(atoms: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<MatchReport> {
    if atoms.nrows() != truth.nrows() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            found: atoms.nrows(),
        });
    }
    let k = atoms.ncols();
    let m = truth.ncols();
    let gram = atoms.tr_mul(truth);
    let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(c, d)| {
        gram[(c, d)]
            .abs()
            .partial_cmp(&gram[(a, b)].abs())
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut atom_used = alloc::vec![false; k];
    let mut col_used = alloc::vec![false; m];
    let mut matches = Vec::new();
    for (i, j) in pairs {
        if atom_used[i] || col_used[j] {
            continue;
        }
        atom_used[i] = true;
        col_used[j] = true;
        let sign = if gram[(i, j)] < 0.0 { -1.0 } else { 1.0 };
        let dist = (atoms.column(i) - truth.column(j) * sign).norm();
        matches.push(AtomMatch { atom: i, column: j, sign, dist });
    }
    matches.sort_by_key(|a| a.column);
    Ok(MatchReport {
        matches,
        unmatched_columns: (0..m).filter(|&j| !col_used[j]).collect(),
        unmatched_atoms: (0..k).filter(|&i| !atom_used[i]).collect(),
    })
}

/// Runs `trials` solves from random initial points (drawn from `seed`),
/// deduplicates the results and matches them to the ground-truth
/// dictionary.
pub fn recover_dictionary(
    instance: &ProblemInstance,
    solver: SolverKind,
    loss: LossSpec,
    config: &SolverConfig,
    trials: usize,
    seed: u64,
) -> Result<DictionaryRecovery> {
    let Some(TargetSet::SignedColumns { dictionary }) = &instance.targets else {
        return Err(Error::invalid("dictionary recovery needs an ODL instance"));
    };
    let n = instance.dim();
    let obj = Objective::new(instance.data.clone(), loss)?;
    let mut rng = seeded(seed);
    let mut found = Vec::with_capacity(trials);
    for _ in 0..trials {
        let q0 = sample_uniform_sphere(n, &mut rng)?;
        let res = solve_with(solver, &obj, &q0, config, &Monitor::default())?;
        found.push(res.q_final.into_inner());
    }
    let atoms = dedup_atoms(&found);
    let report = match_dictionary(&atoms, dictionary)?;
    let recovery = DictionaryRecovery { atoms, report };
    if recovery.atoms.ncols() < n {
        return Err(Error::IncompleteRecovery {
            found: recovery.atoms.ncols(),
            expected: n,
            partial: alloc::boxed::Box::new(recovery),
        });
    }
    Ok(recovery)
}
