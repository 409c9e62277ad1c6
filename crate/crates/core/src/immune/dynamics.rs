use super::{ClassifierState, Encounter, ImmuneError};
use crate::corpus::Label;
use crate::encoding::BitSequence;
use crate::repertoire::{
    generation::{recombine, source_peptides},
    Antigen, CellId, CellRole, Lymphocyte, RepertoireError, SelfTolerance,
};

/// Candidate receptors tried per missing cell before giving up.
const ATTEMPTS_PER_CELL: usize = 500;

const ROLES: [CellRole; 3] = [CellRole::BCell, CellRole::HelperT, CellRole::ControllerT];

/// Credits every cell that matched this encounter: bound B cells and
/// stimulated T cells. Returns the number of cells updated.
pub fn apply_weights(state: &mut ClassifierState, encounter: &Encounter, label: Label) -> usize {
    let Some(resp) = &encounter.adaptive else {
        return 0;
    };
    let mut ids: Vec<CellId> = resp.bound.iter().map(|b| b.b_cell).collect();
    ids.extend(resp.stimulated_t_cells());
    let mut updated = 0;
    for id in ids {
        if let Some(cell) = state.cell_mut(id) {
            cell.weights.record(label);
            updated += 1;
        }
    }
    updated
}

/// Ages every cell that evaluated the antigen, rewards the stimulated ones,
/// culls the dead and refills each population to its configured size.
///
/// Decrement happens before reward, so a stimulated cell always survives the
/// encounter that stimulated it (given a non-zero reward).
pub fn tick_lifetimes(
    state: &mut ClassifierState,
    encounter: &Encounter,
) -> Result<(), ImmuneError> {
    let reward = state.params.reward;
    if let Some(resp) = &encounter.adaptive {
        let mut stimulated: Vec<CellId> = resp.bound.iter().map(|b| b.b_cell).collect();
        stimulated.extend(resp.stimulated_t_cells());
        stimulated.sort_unstable();

        let age = |cells: &mut Vec<Lymphocyte>| {
            for cell in cells.iter_mut() {
                cell.lifetime = cell.lifetime.saturating_sub(1);
                cell.encounters = cell.encounters.saturating_add(1);
                if stimulated.binary_search(&cell.id).is_ok() {
                    cell.lifetime = cell.lifetime.saturating_add(reward);
                }
            }
        };
        age(&mut state.b_cells);
        if resp.any_bound() {
            age(&mut state.helper_t);
            age(&mut state.controller_t);
        }
    }

    let prune_after = state.params.prune_after;
    for role in ROLES {
        let pop = state.population_mut(role);
        pop.retain(|c| c.lifetime > 0);
        if let Some(min) = prune_after {
            let cells = std::mem::take(pop);
            *pop = crate::repertoire::prune_useless(cells, min);
        }
    }
    for role in ROLES {
        fill_population(state, role)?;
    }
    state.encounter_count += 1;
    Ok(())
}

/// Creates one B cell and one helper T cell aimed at this antigen, after a
/// macrophage has flagged its sender. The receptor is the longest peptide
/// (first on ties) that is long enough to bind and does not react with self.
/// Returns the new cell ids; empty when no peptide qualifies.
pub fn stimulate_adaptive(state: &mut ClassifierState, antigen: &Antigen) -> Vec<CellId> {
    let r = state.params.r;
    let tolerance = SelfTolerance::from_library(&state.library, r);
    let mut best: Option<&BitSequence> = None;
    for p in &antigen.peptides {
        let bits = p.bits();
        if bits.len() >= r && best.is_none_or(|b| bits.len() > b.len()) && tolerance.tolerates(bits)
        {
            best = Some(bits);
        }
    }
    let Some(receptor) = best.cloned() else {
        return Vec::new();
    };
    let lifetime = state.params.lifetime;
    let mut created = Vec::new();
    for role in [CellRole::BCell, CellRole::HelperT] {
        let id = state.ids.fresh();
        state
            .population_mut(role)
            .push(Lymphocyte::new(id, role, receptor.clone(), lifetime));
        let size = state.params.population_size(role);
        trim_population(state.population_mut(role), size);
        created.push(id);
    }
    created
}

/// Adds clones of an activated B cell and resets its lifetime. Clones copy
/// the receptor and weights and start at the initial lifetime. The
/// population is then trimmed back to its configured size. Returns the
/// number of clones added (zero if the cell is gone).
pub fn clonal_expand(state: &mut ClassifierState, b_cell: CellId) -> usize {
    let lifetime = state.params.lifetime;
    let Some(parent) = state.b_cells.iter_mut().find(|c| c.id == b_cell) else {
        return 0;
    };
    parent.lifetime = lifetime;
    let template = parent.clone();
    let count = state.params.clones;
    for _ in 0..count {
        let mut clone = template.clone();
        clone.id = state.ids.fresh();
        clone.encounters = 0;
        state.b_cells.push(clone);
    }
    let size = state.params.b_cells;
    trim_population(&mut state.b_cells, size);
    count
}

/// Evicts cells until `size` remain: lowest lifetime first, then lowest
/// transaction match, then oldest.
pub(crate) fn trim_population(cells: &mut Vec<Lymphocyte>, size: usize) {
    if cells.len() <= size {
        return;
    }
    let mut order: Vec<(u32, u64, CellId)> = cells
        .iter()
        .map(|c| (c.lifetime, c.weights.transaction_match, c.id))
        .collect();
    order.sort_unstable();
    let mut evict: Vec<CellId> = order[..cells.len() - size].iter().map(|k| k.2).collect();
    evict.sort_unstable();
    cells.retain(|c| evict.binary_search(&c.id).is_err());
}

/// Tops a population up to its configured size with fresh cells from the
/// library. B and helper T cells must pass negative selection; every new
/// receptor must be at least `r` bits long.
pub(crate) fn fill_population(
    state: &mut ClassifierState,
    role: CellRole,
) -> Result<usize, ImmuneError> {
    let size = state.params.population_size(role);
    let missing = size.saturating_sub(state.population(role).len());
    if missing == 0 {
        return Ok(0);
    }
    let r = state.params.r;
    let k_max = state.params.k_max;
    let lifetime = state.params.lifetime;
    let tolerance =
        (!role.draws_from_self()).then(|| SelfTolerance::from_library(&state.library, r));

    let source = source_peptides(&state.library, role);
    if source.is_empty() {
        return Err(RepertoireError::EmptySourceSet { role }.into());
    }
    let budget = missing * ATTEMPTS_PER_CELL;
    let mut fresh = Vec::with_capacity(missing);
    let mut attempts = 0;
    while fresh.len() < missing {
        if attempts == budget {
            return Err(ImmuneError::RepertoireExhausted { role, attempts });
        }
        attempts += 1;
        let receptor = recombine(&source, k_max, &mut state.rng);
        if receptor.len() < r {
            continue;
        }
        if tolerance.as_ref().is_some_and(|t| !t.tolerates(&receptor)) {
            continue;
        }
        fresh.push(receptor);
    }
    let created = fresh.len();
    for receptor in fresh {
        let id = state.ids.fresh();
        state
            .population_mut(role)
            .push(Lymphocyte::new(id, role, receptor, lifetime));
    }
    Ok(created)
}

/// Re-runs negative selection over B and helper T cells against the current
/// self library and refills what was removed. Returns the number removed.
pub(crate) fn reselect(state: &mut ClassifierState) -> Result<usize, ImmuneError> {
    let tolerance = SelfTolerance::from_library(&state.library, state.params.r);
    let mut removed = 0;
    for role in [CellRole::BCell, CellRole::HelperT] {
        let pop = state.population_mut(role);
        let before = pop.len();
        pop.retain(|c| tolerance.tolerates(&c.receptor));
        removed += before - pop.len();
    }
    for role in [CellRole::BCell, CellRole::HelperT] {
        fill_population(state, role)?;
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::super::fixture::{bits, micro, state};
    use super::super::{evaluate, Presentation};
    use super::*;
    use proptest::prelude::*;

    fn ids(cells: &[Lymphocyte]) -> Vec<CellId> {
        cells.iter().map(|c| c.id).collect()
    }

    #[test]
    fn unstimulated_cell_at_one_is_replaced() {
        let mut s = state(&[], &["cash"], &["cash"], &["hello"], 1);
        let old = s.b_cells()[0].id;
        let e = evaluate(&micro("x@y", "zz"), &s, Presentation::Cascade).unwrap();
        tick_lifetimes(&mut s, &e).unwrap();
        assert_eq!(s.b_cells().len(), 1);
        assert_ne!(s.b_cells()[0].id, old);
        assert_eq!(s.b_cells()[0].lifetime, 1);
        assert_eq!(s.encounter_count(), 1);
    }

    #[test]
    fn stimulated_cell_decrements_then_gains_reward() {
        let mut s = state(&[], &["cash"], &["cash"], &["hello"], 1);
        assert_eq!(s.params.reward, 4);
        let b = s.b_cells()[0].id;
        let e = evaluate(&micro("x@y", "cash"), &s, Presentation::Cascade).unwrap();
        tick_lifetimes(&mut s, &e).unwrap();
        assert_eq!(s.b_cells()[0].id, b);
        assert_eq!(s.b_cells()[0].lifetime, 4);
        assert_eq!(s.helper_t()[0].lifetime, 4);
        // the controller saw the antigen but did not match it
        assert_eq!(s.controller_t().len(), 1);
        assert_ne!(s.controller_t()[0].lifetime, 0);
    }

    #[test]
    fn t_cells_only_age_when_a_b_cell_binds() {
        let mut s = state(&[], &["cash"], &["cash"], &["hello"], 3);
        let e = evaluate(&micro("x@y", "zz"), &s, Presentation::Cascade).unwrap();
        tick_lifetimes(&mut s, &e).unwrap();
        assert_eq!(s.b_cells()[0].lifetime, 2);
        assert_eq!(s.helper_t()[0].lifetime, 3);
        assert_eq!(s.controller_t()[0].lifetime, 3);
    }

    #[test]
    fn macrophage_hits_leave_lymphocytes_alone() {
        let mut s = state(&["ads@spam"], &["cash"], &["cash"], &["hello"], 3);
        let before = s.clone();
        let e = evaluate(&micro("ads@spam", "cash"), &s, Presentation::Cascade).unwrap();
        assert_eq!(apply_weights(&mut s, &e, Label::Spam), 0);
        tick_lifetimes(&mut s, &e).unwrap();
        assert_eq!(s.b_cells(), before.b_cells());
    }

    #[test]
    fn weights_follow_the_label() {
        let mut s = state(&[], &["cash"], &["cash"], &["cash"], 3);
        let e = evaluate(&micro("x@y", "cash"), &s, Presentation::Cascade).unwrap();
        assert_eq!(apply_weights(&mut s, &e, Label::Legitimate), 3);
        assert!(s.lymphocytes().all(|c| (
            c.weights.replication_attack_match,
            c.weights.transaction_match
        ) == (0, 1)));
        apply_weights(&mut s, &e, Label::Spam);
        assert!(s.lymphocytes().all(|c| (
            c.weights.replication_attack_match,
            c.weights.transaction_match
        ) == (1, 2)));
    }

    #[test]
    fn clonal_expansion_at_capacity() {
        let mut s = state(&[], &["cash", "win", "prize"], &["cash"], &["hello"], 8);
        s.params.clones = 2;
        s.b_cells[0].lifetime = 2;
        s.b_cells[0].weights.transaction_match = 5;
        s.b_cells[1].lifetime = 3;
        s.b_cells[2].lifetime = 1;
        let parent = s.b_cells()[0].id;
        assert_eq!(clonal_expand(&mut s, parent), 2);
        assert_eq!(s.b_cells().len(), 3);
        let parent_cell = s.b_cells().iter().find(|c| c.id == parent).unwrap();
        assert_eq!(parent_cell.lifetime, 8);
        let clones: Vec<&Lymphocyte> = s.b_cells().iter().filter(|c| c.id != parent).collect();
        assert_eq!(
            clones.len(),
            2,
            "the two lowest-lifetime cells were evicted"
        );
        for c in clones {
            assert_eq!(c.receptor, bits("cash"));
            assert_eq!(c.lifetime, 8);
            assert_eq!(c.weights.transaction_match, 5);
        }
        assert_eq!(clonal_expand(&mut s, CellId(9999)), 0);
    }

    #[test]
    fn eviction_order() {
        let mut s = state(&[], &["a", "b", "c", "d"], &["cash"], &["hello"], 5);
        s.b_cells[0].lifetime = 2;
        s.b_cells[1].lifetime = 2;
        s.b_cells[1].weights.transaction_match = 1;
        s.b_cells[3].lifetime = 2;
        let expect = vec![s.b_cells[1].id, s.b_cells[2].id];
        trim_population(&mut s.b_cells, 2);
        assert_eq!(ids(&s.b_cells), expect);
    }

    #[test]
    fn adaptive_stimulation_uses_longest_tolerated_peptide() {
        let mut s = state(&[], &["cash"], &["cash"], &["hello"], 5);
        s.params.b_cells = 2;
        s.params.helper_t = 2;
        let created = stimulate_adaptive(&mut s, &micro("x@y", "zz prizes hello winner").antigen);
        assert_eq!(created.len(), 2);
        assert_eq!(s.b_cells().last().unwrap().receptor, bits("prizes"));
        assert_eq!(s.helper_t().last().unwrap().receptor, bits("prizes"));
        assert!(stimulate_adaptive(&mut s, &micro("x@y", "a b").antigen).is_empty());
    }

    #[test]
    fn exhausted_repertoire_is_reported() {
        let mut s = state(&[], &["cash"], &["cash"], &["hello"], 1);
        s.library.add_self(&micro("friend@home", "cash"));
        let e = evaluate(&micro("x@y", "zz"), &s, Presentation::Cascade).unwrap();
        let err = tick_lifetimes(&mut s, &e).unwrap_err();
        assert!(matches!(
            err,
            ImmuneError::RepertoireExhausted {
                role: CellRole::BCell,
                attempts: 500
            }
        ));
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z]{2,6}"
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sizes_constant_and_lifetimes_bounded(
            stream in prop::collection::vec(prop::collection::vec(word(), 1..5), 1..40),
        ) {
            let mut s = state(&[], &["cash", "prize", "winner"], &["cash", "prize"], &["hello", "mom"], 3);
            let (l0, reward) = (s.params.lifetime, s.params.reward);
            let mut stimulations: std::collections::HashMap<CellId, u32> = Default::default();
            for words in stream {
                let m = micro("x@y", &words.join(" "));
                let e = evaluate(&m, &s, Presentation::Cascade).unwrap();
                if let Some(resp) = &e.adaptive {
                    for id in resp.bound.iter().map(|b| b.b_cell).chain(resp.stimulated_t_cells()) {
                        *stimulations.entry(id).or_default() += 1;
                    }
                }
                apply_weights(&mut s, &e, e.verdict.label);
                tick_lifetimes(&mut s, &e).unwrap();
                if let Some(resp) = &e.adaptive {
                    for b in resp.activated() {
                        clonal_expand(&mut s, b.b_cell);
                    }
                }
                for role in [CellRole::BCell, CellRole::HelperT, CellRole::ControllerT] {
                    prop_assert_eq!(s.population(role).len(), s.params.population_size(role));
                    for c in s.population(role) {
                        let k = stimulations.get(&c.id).copied().unwrap_or(0);
                        prop_assert!(c.lifetime >= 1 && c.lifetime <= l0 + k * reward);
                    }
                }
            }
        }
    }
}
