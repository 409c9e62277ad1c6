use rand::Rng;

use super::{
    Antigen, CellIds, CellRole, GeneLibrary, Lymphocyte, Macrophage, Peptide, RepertoireError,
};
use crate::encoding::{BitSequence, WindowIndex};

/// One macrophage per non-self pattern that is not also a self pattern.
pub fn generate_macrophages(lib: &GeneLibrary, ids: &mut CellIds) -> Vec<Macrophage> {
    lib.nonself_patterns()
        .iter()
        .filter(|p| !lib.self_patterns().contains(p))
        .map(|p| Macrophage {
            id: ids.fresh(),
            receptor: p.clone(),
        })
        .collect()
}

/// Recombines library peptides into fresh receptors.
///
/// Each receptor joins `k` peptides, `k` uniform in `1..=k_max`, drawn
/// uniformly with replacement from the role's source set. No negative
/// selection happens here.
pub fn generate_lymphocytes<R: Rng>(
    lib: &GeneLibrary,
    role: CellRole,
    count: usize,
    k_max: usize,
    lifetime: u32,
    rng: &mut R,
    ids: &mut CellIds,
) -> Result<Vec<Lymphocyte>, RepertoireError> {
    let source = source_peptides(lib, role);
    if source.is_empty() {
        return Err(RepertoireError::EmptySourceSet { role });
    }
    Ok((0..count)
        .map(|_| Lymphocyte::new(ids.fresh(), role, recombine(&source, k_max, rng), lifetime))
        .collect())
}

pub(crate) fn source_peptides(lib: &GeneLibrary, role: CellRole) -> Vec<&Peptide> {
    if role.draws_from_self() {
        lib.self_peptides().iter().collect()
    } else {
        lib.nonself_peptides().iter().collect()
    }
}

pub(crate) fn recombine<R: Rng>(source: &[&Peptide], k_max: usize, rng: &mut R) -> BitSequence {
    let k = rng.gen_range(1..=k_max.max(1));
    let mut receptor = BitSequence::new();
    for _ in 0..k {
        receptor.extend_from(source[rng.gen_range(0..source.len())].bits());
    }
    receptor
}

/// Self-reactivity check against a fixed set of self peptides.
#[derive(Debug, Clone)]
pub struct SelfTolerance {
    index: WindowIndex,
}

impl SelfTolerance {
    pub fn new<'a, I: IntoIterator<Item = &'a Peptide>>(self_peptides: I, r: usize) -> Self {
        Self {
            index: WindowIndex::build(r, self_peptides.into_iter().map(Peptide::bits)),
        }
    }

    pub fn from_library(lib: &GeneLibrary, r: usize) -> Self {
        Self::new(lib.self_peptides(), r)
    }

    /// True when `receptor` matches no self peptide at the threshold.
    pub fn tolerates(&self, receptor: &BitSequence) -> bool {
        !self.index.any_match(receptor)
    }
}

/// Keeps the cells whose receptor matches no peptide of any self antigen at
/// threshold `r`. Order is preserved.
pub fn negative_selection(
    cells: Vec<Lymphocyte>,
    self_antigens: &[Antigen],
    r: usize,
) -> Vec<Lymphocyte> {
    let tolerance = SelfTolerance::new(self_antigens.iter().flat_map(|a| a.peptides.iter()), r);
    cells
        .into_iter()
        .filter(|c| tolerance.tolerates(&c.receptor))
        .collect()
}

/// Drops cells that have evaluated at least `min_encounters` antigens and
/// never matched a transaction.
pub fn prune_useless(cells: Vec<Lymphocyte>, min_encounters: u32) -> Vec<Lymphocyte> {
    cells
        .into_iter()
        .filter(|c| c.encounters < min_encounters || c.weights.transaction_match > 0)
        .collect()
}
