//! The classification cascade, two-signal B-cell activation, clonal memory
//! and lifetime-driven population turnover.

mod cascade;
mod dynamics;
mod shared;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::encoding::Codebook;
use crate::repertoire::{
    CellId, CellIds, CellRole, GeneLibrary, Lymphocyte, Macrophage, Microorganism, RepertoireError,
};

pub(crate) use cascade::macrophage_binds;
pub use cascade::{
    classify, evaluate, present_peptides, two_signal_activation, AdaptiveResponse, BoundCell,
    Encounter, Presentation,
};
pub use dynamics::{apply_weights, clonal_expand, stimulate_adaptive, tick_lifetimes};
pub(crate) use dynamics::{fill_population, reselect, trim_population};
pub use shared::SharedClassifier;

#[derive(Debug, Error)]
pub enum ImmuneError {
    #[error("classifier state is not initialized (no library or populations)")]
    UninitializedState,
    #[error("could not generate enough self-tolerant {role}s after {attempts} attempts")]
    RepertoireExhausted { role: CellRole, attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Repertoire(#[from] RepertoireError),
}

/// Match counters carried by every lymphocyte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellWeights {
    pub replication_attack_match: u64,
    pub transaction_match: u64,
}

impl CellWeights {
    /// Records one matched transaction.
    pub fn record(&mut self, label: Label) {
        self.transaction_match += 1;
        if label == Label::Spam {
            self.replication_attack_match += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    MacrophageHit,
    NoBCellBound,
    TCellDecision,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::MacrophageHit => "macrophage_hit",
            Route::NoBCellBound => "no_b_cell_bound",
            Route::TCellDecision => "t_cell_decision",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalTally {
    pub helper_stimulations: u32,
    pub controller_stimulations: u32,
}

impl SignalTally {
    pub fn activates(&self) -> bool {
        self.helper_stimulations > self.controller_stimulations
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub route: Route,
    /// Cells whose signals decided the label: matching macrophages; or the
    /// activated B cells and their helpers; or, for a legitimate T-cell
    /// decision, the bound B cells and the controllers that restrained them.
    pub evidence: Vec<CellId>,
    pub signal_tally: SignalTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Learning,
    Normal,
    Relearning,
    Test,
}

/// Free parameters of the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// Content activation threshold in bits.
    pub r: usize,
    /// Sender threshold in bits; `None` requires an exact, full-length match.
    pub r_pattern: Option<usize>,
    /// Initial lifetime of every new cell.
    pub lifetime: u32,
    /// Lifetime gained by a stimulated cell.
    pub reward: u32,
    pub b_cells: usize,
    pub helper_t: usize,
    pub controller_t: usize,
    /// Clones added per activated B cell.
    pub clones: usize,
    /// Most peptides joined into one receptor.
    pub k_max: usize,
    /// When set, cells that matched nothing after this many encounters are
    /// pruned and replaced.
    pub prune_after: Option<u32>,
    /// Classifications kept for feedback.
    pub replay_capacity: usize,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            r: 12,
            r_pattern: None,
            lifetime: 16,
            reward: 4,
            b_cells: 256,
            helper_t: 128,
            controller_t: 128,
            clones: 3,
            k_max: 3,
            prune_after: None,
            replay_capacity: 10_000,
            seed: 0,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ImmuneError> {
        let bad = |what: &str| Err(ImmuneError::InvalidParams(what.to_string()));
        if self.r == 0 {
            return bad("r must be at least 1");
        }
        if self.r_pattern == Some(0) {
            return bad("r_pattern must be at least 1");
        }
        if self.lifetime == 0 {
            return bad("lifetime must be at least 1");
        }
        if self.b_cells == 0 || self.helper_t == 0 || self.controller_t == 0 {
            return bad("population sizes must be at least 1");
        }
        if self.k_max == 0 {
            return bad("k_max must be at least 1");
        }
        if self.prune_after == Some(0) {
            return bad("prune_after must be at least 1");
        }
        Ok(())
    }

    pub fn population_size(&self, role: CellRole) -> usize {
        match role {
            CellRole::BCell => self.b_cells,
            CellRole::HelperT => self.helper_t,
            CellRole::ControllerT => self.controller_t,
        }
    }
}

/// A classification kept for later feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub message_id: String,
    pub microorganism: Microorganism,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayLog {
    capacity: usize,
    entries: VecDeque<ReplayEntry>,
}

impl ReplayLog {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::new(),
        }
    }

    pub fn record(&mut self, entry: ReplayEntry) {
        if self.capacity == 0 {
            return;
        }
        while self.entries.len() >= self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// Most recent entry for `message_id`.
    pub fn find(&self, message_id: &str) -> Option<&ReplayEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.message_id == message_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The whole trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierState {
    pub(crate) codebook: Codebook,
    pub(crate) library: GeneLibrary,
    pub(crate) macrophages: Vec<Macrophage>,
    pub(crate) b_cells: Vec<Lymphocyte>,
    pub(crate) helper_t: Vec<Lymphocyte>,
    pub(crate) controller_t: Vec<Lymphocyte>,
    pub(crate) params: Params,
    pub(crate) mode: Mode,
    pub(crate) encounter_count: u64,
    pub(crate) ids: CellIds,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) replay: ReplayLog,
}

impl ClassifierState {
    /// An empty, uninitialized state. See [`crate::training::prepare`] for
    /// building a usable one.
    pub fn new(codebook: Codebook, params: Params) -> Result<Self, ImmuneError> {
        params.validate()?;
        Ok(Self {
            codebook,
            library: GeneLibrary::new(),
            macrophages: Vec::new(),
            b_cells: Vec::new(),
            helper_t: Vec::new(),
            controller_t: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            replay: ReplayLog::new(params.replay_capacity),
            params,
            mode: Mode::Learning,
            encounter_count: 0,
            ids: CellIds::default(),
        })
    }

    pub fn is_initialized(&self) -> bool {
        !self.library.is_empty()
            && !self.b_cells.is_empty()
            && !self.helper_t.is_empty()
            && !self.controller_t.is_empty()
    }

    pub(crate) fn ensure_initialized(&self) -> Result<(), ImmuneError> {
        if self.is_initialized() {
            Ok(())
        } else {
            Err(ImmuneError::UninitializedState)
        }
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn library(&self) -> &GeneLibrary {
        &self.library
    }

    pub fn macrophages(&self) -> &[Macrophage] {
        &self.macrophages
    }

    pub fn b_cells(&self) -> &[Lymphocyte] {
        &self.b_cells
    }

    pub fn helper_t(&self) -> &[Lymphocyte] {
        &self.helper_t
    }

    pub fn controller_t(&self) -> &[Lymphocyte] {
        &self.controller_t
    }

    pub fn population(&self, role: CellRole) -> &[Lymphocyte] {
        match role {
            CellRole::BCell => &self.b_cells,
            CellRole::HelperT => &self.helper_t,
            CellRole::ControllerT => &self.controller_t,
        }
    }

    pub(crate) fn population_mut(&mut self, role: CellRole) -> &mut Vec<Lymphocyte> {
        match role {
            CellRole::BCell => &mut self.b_cells,
            CellRole::HelperT => &mut self.helper_t,
            CellRole::ControllerT => &mut self.controller_t,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn encounter_count(&self) -> u64 {
        self.encounter_count
    }

    pub fn replay_log(&self) -> &ReplayLog {
        &self.replay
    }

    pub(crate) fn cell_mut(&mut self, id: CellId) -> Option<&mut Lymphocyte> {
        self.b_cells
            .iter_mut()
            .chain(self.helper_t.iter_mut())
            .chain(self.controller_t.iter_mut())
            .find(|c| c.id == id)
    }

    /// Every lymphocyte, in population order.
    pub fn lymphocytes(&self) -> impl Iterator<Item = &Lymphocyte> {
        self.b_cells
            .iter()
            .chain(self.helper_t.iter())
            .chain(self.controller_t.iter())
    }
}

/// Hand-built states for unit tests: each cell's receptor is one encoded
/// word, and the configured sizes equal the given populations.
#[cfg(test)]
pub(crate) mod fixture {
    use super::*;
    use crate::encoding::encode_str;
    use crate::repertoire::{build_microorganism, MolecularPattern};

    pub fn bits(word: &str) -> crate::encoding::BitSequence {
        encode_str(word, &Codebook::builtin()).unwrap()
    }

    pub fn micro(sender: &str, text: &str) -> Microorganism {
        let msg = crate::corpus::LabeledMessage::new("m", sender, "", text, None);
        build_microorganism(&msg, &Codebook::builtin()).unwrap()
    }

    pub fn state(
        spam_senders: &[&str],
        b_cells: &[&str],
        helpers: &[&str],
        controllers: &[&str],
        lifetime: u32,
    ) -> ClassifierState {
        let params = Params {
            lifetime,
            b_cells: b_cells.len(),
            helper_t: helpers.len(),
            controller_t: controllers.len(),
            ..Params::default()
        };
        let mut s = ClassifierState::new(Codebook::builtin(), params).unwrap();
        s.library
            .add_nonself(&micro("spam@source", &b_cells.join(" ")));
        s.library
            .add_self(&micro("friend@home", &controllers.join(" ")));
        for sender in spam_senders {
            let id = s.ids.fresh();
            s.macrophages.push(Macrophage {
                id,
                receptor: MolecularPattern(micro(sender, "").pattern.0),
            });
        }
        for (role, words) in [
            (CellRole::BCell, b_cells),
            (CellRole::HelperT, helpers),
            (CellRole::ControllerT, controllers),
        ] {
            for w in words {
                let id = s.ids.fresh();
                s.population_mut(role)
                    .push(Lymphocyte::new(id, role, bits(w), lifetime));
            }
        }
        s
    }
}
