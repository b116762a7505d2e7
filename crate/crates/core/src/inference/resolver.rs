//! Conflict resolution: ordering the candidate actions of one frame level.

use crate::model::Action;

pub trait ConflictResolver: Send + Sync {
    fn id(&self) -> &str;

    /// Order in which `candidates` are tried, as indices into the slice.
    fn order(&self, candidates: &[&Action]) -> Vec<usize>;

    /// For on-change rules: stop after the first rule that fires at a level.
    fn fire_first(&self) -> bool {
        false
    }
}

/// Declaration order.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstApplicable;

impl ConflictResolver for FirstApplicable {
    fn id(&self) -> &str {
        "first"
    }

    fn order(&self, candidates: &[&Action]) -> Vec<usize> {
        (0..candidates.len()).collect()
    }
}

/// Rules by descending expression node count (stable); other actions
/// follow in declaration order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MostComplexFirst;

impl ConflictResolver for MostComplexFirst {
    fn id(&self) -> &str {
        "complex"
    }

    fn order(&self, candidates: &[&Action]) -> Vec<usize> {
        let mut rules: Vec<(usize, usize)> = Vec::new();
        let mut rest = Vec::new();
        for (i, a) in candidates.iter().enumerate() {
            match a {
                Action::BackwardRule(r) | Action::ForwardRule(r) => rules.push((i, r.complexity())),
                _ => rest.push(i),
            }
        }
        rules.sort_by(|a, b| b.1.cmp(&a.1));
        rules.into_iter().map(|(i, _)| i).chain(rest).collect()
    }
}

/// Declaration order; only the first applicable on-change rule fires.
#[derive(Debug, Clone, Copy, Default)]
pub struct FireFirst;

impl ConflictResolver for FireFirst {
    fn id(&self) -> &str {
        "fire-first"
    }

    fn order(&self, candidates: &[&Action]) -> Vec<usize> {
        (0..candidates.len()).collect()
    }

    fn fire_first(&self) -> bool {
        true
    }
}

/// Runs `resolver` and drops out-of-range and repeated indices, so the
/// result is always a sub-permutation of the candidates.
pub fn select_actions(resolver: &dyn ConflictResolver, candidates: &[&Action]) -> Vec<usize> {
    let mut seen = vec![false; candidates.len()];
    resolver
        .order(candidates)
        .into_iter()
        .filter(|&i| {
            if i < seen.len() && !seen[i] {
                seen[i] = true;
                true
            } else {
                false
            }
        })
        .collect()
}
