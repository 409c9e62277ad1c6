//! Microorganisms, the self/non-self gene library, and generation of
//! macrophages and lymphocytes.

pub(crate) mod generation;
mod library;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabeledMessage;
use crate::encoding::{
    encode, encode_str, normalize_sender, tokenize, BitSequence, Codebook, EncodingError,
};
use crate::immune::CellWeights;

pub use generation::{
    generate_lymphocytes, generate_macrophages, negative_selection, prune_useless, SelfTolerance,
};
pub use library::{build_library, GeneLibrary, LibraryChange};

#[derive(Debug, Error)]
pub enum RepertoireError {
    #[error("message {id:?} has no sender after normalization")]
    MissingSender { id: String },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("message {id:?} carries no label")]
    UnlabeledMessage { id: String },
    #[error("no {role} source material in the library")]
    EmptySourceSet { role: CellRole },
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// Encoded sender address, the target of macrophage recognition.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MolecularPattern(pub BitSequence);

/// One encoded word.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Peptide(pub BitSequence);

impl MolecularPattern {
    pub fn bits(&self) -> &BitSequence {
        &self.0
    }
}

impl Peptide {
    pub fn bits(&self) -> &BitSequence {
        &self.0
    }
}

impl fmt::Debug for MolecularPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MolecularPattern({})", self.0)
    }
}

impl fmt::Debug for Peptide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Peptide({})", self.0)
    }
}

/// Encoded message content: header words then body words, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antigen {
    pub peptides: Vec<Peptide>,
}

impl Antigen {
    pub fn is_empty(&self) -> bool {
        self.peptides.is_empty()
    }

    pub fn len(&self) -> usize {
        self.peptides.len()
    }
}

/// A message viewed as a pathogen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Microorganism {
    pub pattern: MolecularPattern,
    pub antigen: Antigen,
    pub source_id: String,
}

pub fn build_microorganism(
    message: &LabeledMessage,
    codebook: &Codebook,
) -> Result<Microorganism, RepertoireError> {
    let sender = normalize_sender(&message.sender, codebook);
    if sender.is_empty() {
        return Err(RepertoireError::MissingSender {
            id: message.id.clone(),
        });
    }
    let pattern = MolecularPattern(encode_str(&sender, codebook)?);
    let peptides = tokenize(&message.header, codebook)
        .into_iter()
        .chain(tokenize(&message.body, codebook))
        .map(|t| encode(&t, codebook).map(Peptide))
        .collect::<Result<_, _>>()?;
    Ok(Microorganism {
        pattern,
        antigen: Antigen { peptides },
        source_id: message.id.clone(),
    })
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CellId(pub u64);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Monotonic id allocator. Ids double as insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellIds {
    next: u64,
}

impl CellIds {
    pub fn fresh(&mut self) -> CellId {
        let id = CellId(self.next);
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellRole {
    BCell,
    HelperT,
    ControllerT,
}

impl CellRole {
    /// B and helper T cells recognize non-self; controllers recognize self.
    pub fn draws_from_self(self) -> bool {
        matches!(self, CellRole::ControllerT)
    }
}

impl fmt::Display for CellRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellRole::BCell => "B cell",
            CellRole::HelperT => "helper T cell",
            CellRole::ControllerT => "controller T cell",
        })
    }
}

/// Innate detector keyed on a non-self sender pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Macrophage {
    pub id: CellId,
    pub receptor: MolecularPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lymphocyte {
    pub id: CellId,
    pub role: CellRole,
    pub receptor: BitSequence,
    pub weights: CellWeights,
    /// Encounters left before removal.
    pub lifetime: u32,
    /// Antigens evaluated so far.
    pub encounters: u32,
}

impl Lymphocyte {
    pub fn new(id: CellId, role: CellRole, receptor: BitSequence, lifetime: u32) -> Self {
        Self {
            id,
            role,
            receptor,
            weights: CellWeights::default(),
            lifetime,
            encounters: 0,
        }
    }
}
