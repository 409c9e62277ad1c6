use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{build_microorganism, Microorganism, MolecularPattern, Peptide, RepertoireError};
use crate::corpus::{Label, LabeledMessage};
use crate::encoding::Codebook;

/// Self and non-self stores of sender patterns and peptides.
///
/// A pattern never sits on both sides; peptides may.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneLibrary {
    self_patterns: BTreeSet<MolecularPattern>,
    self_peptides: BTreeSet<Peptide>,
    nonself_patterns: BTreeSet<MolecularPattern>,
    nonself_peptides: BTreeSet<Peptide>,
}

/// Number of set insertions and removals performed by a library update.
pub type LibraryChange = usize;

impl GeneLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn self_patterns(&self) -> &BTreeSet<MolecularPattern> {
        &self.self_patterns
    }

    pub fn self_peptides(&self) -> &BTreeSet<Peptide> {
        &self.self_peptides
    }

    pub fn nonself_patterns(&self) -> &BTreeSet<MolecularPattern> {
        &self.nonself_patterns
    }

    pub fn nonself_peptides(&self) -> &BTreeSet<Peptide> {
        &self.nonself_peptides
    }

    pub fn is_empty(&self) -> bool {
        self.self_patterns.is_empty()
            && self.self_peptides.is_empty()
            && self.nonself_patterns.is_empty()
            && self.nonself_peptides.is_empty()
    }

    /// True when no pattern is on both sides.
    pub fn is_disjoint(&self) -> bool {
        self.self_patterns.is_disjoint(&self.nonself_patterns)
    }

    /// Adds a non-self microorganism. Non-self wins pattern conflicts, so the
    /// pattern is dropped from the self side if present there.
    pub fn add_nonself(&mut self, m: &Microorganism) -> LibraryChange {
        let mut changes = self.self_patterns.remove(&m.pattern) as usize;
        changes += self.nonself_patterns.insert(m.pattern.clone()) as usize;
        for p in &m.antigen.peptides {
            changes += self.nonself_peptides.insert(p.clone()) as usize;
        }
        changes
    }

    /// Adds a self microorganism. Its pattern is only stored if it is not
    /// already known as non-self; remove it from that side first to move it.
    pub fn add_self(&mut self, m: &Microorganism) -> LibraryChange {
        let mut changes = 0;
        if !self.nonself_patterns.contains(&m.pattern) {
            changes += self.self_patterns.insert(m.pattern.clone()) as usize;
        }
        for p in &m.antigen.peptides {
            changes += self.self_peptides.insert(p.clone()) as usize;
        }
        changes
    }

    pub fn remove_nonself(&mut self, m: &Microorganism) -> LibraryChange {
        let mut changes = self.nonself_patterns.remove(&m.pattern) as usize;
        for p in &m.antigen.peptides {
            changes += self.nonself_peptides.remove(p) as usize;
        }
        changes
    }

    pub fn remove_self(&mut self, m: &Microorganism) -> LibraryChange {
        let mut changes = self.self_patterns.remove(&m.pattern) as usize;
        for p in &m.antigen.peptides {
            changes += self.self_peptides.remove(p) as usize;
        }
        changes
    }
}

/// Builds the library from labeled training messages. Spam is non-self.
pub fn build_library(
    training: &[LabeledMessage],
    codebook: &Codebook,
) -> Result<GeneLibrary, RepertoireError> {
    if training.is_empty() {
        return Err(RepertoireError::EmptyTrainingSet);
    }
    let mut lib = GeneLibrary::new();
    let mut self_side = Vec::new();
    let (mut spam, mut legit) = (0usize, 0usize);
    for message in training {
        let label = message
            .label
            .ok_or_else(|| RepertoireError::UnlabeledMessage {
                id: message.id.clone(),
            })?;
        let m = build_microorganism(message, codebook)?;
        match label {
            Label::Spam => {
                spam += 1;
                lib.add_nonself(&m);
            }
            Label::Legitimate => {
                legit += 1;
                self_side.push(m);
            }
        }
    }
    // self material goes in after all non-self so conflicts resolve the same
    // way regardless of message order
    for m in &self_side {
        lib.add_self(m);
    }
    if spam == 0 || legit == 0 {
        log::warn!("training set has {spam} spam and {legit} legitimate messages");
    }
    Ok(lib)
}
