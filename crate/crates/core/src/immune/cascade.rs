use serde::{Deserialize, Serialize};

use super::{ClassifierState, ImmuneError, Route, SignalTally, Verdict};
use crate::corpus::Label;
use crate::encoding::{reaches, BitSequence, WindowIndex};
use crate::repertoire::{Antigen, CellId, Lymphocyte, Macrophage, Microorganism, Peptide};

/// How far down the cascade an antigen is shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Presentation {
    /// Stop at the first macrophage hit.
    Cascade,
    /// Always show the antigen to the adaptive layer as well. Used when the
    /// true label is already known, so every cell can be credited.
    Full,
}

/// One B cell that bound the antigen, and what the T cells said about it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCell {
    pub b_cell: CellId,
    /// Indices into the antigen's peptides, ascending.
    pub presented: Vec<usize>,
    pub tally: SignalTally,
    pub activated: bool,
    pub helpers: Vec<CellId>,
    pub controllers: Vec<CellId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptiveResponse {
    pub bound: Vec<BoundCell>,
}

impl AdaptiveResponse {
    pub fn any_bound(&self) -> bool {
        !self.bound.is_empty()
    }

    pub fn activated(&self) -> impl Iterator<Item = &BoundCell> {
        self.bound.iter().filter(|b| b.activated)
    }

    pub fn tally(&self) -> SignalTally {
        self.bound
            .iter()
            .fold(SignalTally::default(), |acc, b| SignalTally {
                helper_stimulations: acc.helper_stimulations + b.tally.helper_stimulations,
                controller_stimulations: acc.controller_stimulations
                    + b.tally.controller_stimulations,
            })
    }

    /// Ids of every helper and controller that matched a presented peptide,
    /// ascending and deduplicated.
    pub fn stimulated_t_cells(&self) -> Vec<CellId> {
        let mut ids: Vec<CellId> = self
            .bound
            .iter()
            .flat_map(|b| b.helpers.iter().chain(b.controllers.iter()).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Everything one classification observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encounter {
    pub verdict: Verdict,
    pub macrophage_hits: Vec<CellId>,
    /// `None` when the adaptive layer never saw the antigen.
    pub adaptive: Option<AdaptiveResponse>,
}

/// Runs the cascade and returns only the verdict.
pub fn classify(m: &Microorganism, state: &ClassifierState) -> Result<Verdict, ImmuneError> {
    Ok(evaluate(m, state, Presentation::Cascade)?.verdict)
}

/// Runs the cascade against a read-only state.
///
/// 1. Macrophages inspect the sender pattern; any hit labels the message
///    spam.
/// 2. Otherwise B cells inspect the content; if none binds, the message is
///    legitimate.
/// 3. Otherwise each bound B cell presents the peptides that bound it to the
///    T cells, and is activated only if helper stimulations strictly exceed
///    controller stimulations. Any activation labels the message spam.
pub fn evaluate(
    m: &Microorganism,
    state: &ClassifierState,
    presentation: Presentation,
) -> Result<Encounter, ImmuneError> {
    state.ensure_initialized()?;
    let params = &state.params;

    let macrophage_hits: Vec<CellId> = state
        .macrophages
        .iter()
        .filter(|mac| macrophage_binds(mac, m.pattern.bits(), params.r_pattern))
        .map(|mac| mac.id)
        .collect();

    let run_adaptive =
        !m.antigen.is_empty() && (macrophage_hits.is_empty() || presentation == Presentation::Full);
    let adaptive = run_adaptive.then(|| present_to_adaptive(&m.antigen, state));

    let verdict = if !macrophage_hits.is_empty() {
        Verdict {
            label: Label::Spam,
            route: Route::MacrophageHit,
            evidence: macrophage_hits.clone(),
            signal_tally: SignalTally::default(),
        }
    } else {
        match &adaptive {
            Some(resp) if resp.any_bound() => t_cell_verdict(resp),
            _ => Verdict {
                label: Label::Legitimate,
                route: Route::NoBCellBound,
                evidence: Vec::new(),
                signal_tally: SignalTally::default(),
            },
        }
    };

    Ok(Encounter {
        verdict,
        macrophage_hits,
        adaptive,
    })
}

pub(crate) fn macrophage_binds(
    mac: &Macrophage,
    pattern: &BitSequence,
    r_pattern: Option<usize>,
) -> bool {
    let receptor = mac.receptor.bits();
    let r = r_pattern.unwrap_or_else(|| receptor.len().max(pattern.len()));
    reaches(receptor, pattern, r)
}

fn t_cell_verdict(resp: &AdaptiveResponse) -> Verdict {
    let spam = resp.activated().next().is_some();
    let mut evidence: Vec<CellId> = Vec::new();
    for b in &resp.bound {
        if spam && b.activated {
            evidence.push(b.b_cell);
            evidence.extend(&b.helpers);
        } else if !spam {
            evidence.push(b.b_cell);
            evidence.extend(&b.controllers);
        }
    }
    evidence.sort_unstable();
    evidence.dedup();
    Verdict {
        label: if spam { Label::Spam } else { Label::Legitimate },
        route: Route::TCellDecision,
        evidence,
        signal_tally: resp.tally(),
    }
}

/// Shows the antigen to every B cell and arbitrates each bound cell through
/// the T cells.
fn present_to_adaptive(antigen: &Antigen, state: &ClassifierState) -> AdaptiveResponse {
    let r = state.params.r;
    let peptides = WindowIndex::build(r, antigen.peptides.iter().map(Peptide::bits));

    let bound: Vec<(CellId, Vec<usize>)> = state
        .b_cells
        .iter()
        .filter_map(|b| {
            let presented = peptides.matching(&b.receptor);
            (!presented.is_empty()).then_some((b.id, presented))
        })
        .collect();
    if bound.is_empty() {
        return AdaptiveResponse::default();
    }

    // per-peptide lists of T cells that recognize it
    let helper_hits = hits_per_peptide(&peptides, &state.helper_t);
    let controller_hits = hits_per_peptide(&peptides, &state.controller_t);

    let bound = bound
        .into_iter()
        .map(|(b_cell, presented)| {
            let mut tally = SignalTally::default();
            let mut helpers = Vec::new();
            let mut controllers = Vec::new();
            for &p in &presented {
                tally.helper_stimulations += helper_hits[p].len() as u32;
                tally.controller_stimulations += controller_hits[p].len() as u32;
                helpers.extend(&helper_hits[p]);
                controllers.extend(&controller_hits[p]);
            }
            helpers.sort_unstable();
            helpers.dedup();
            controllers.sort_unstable();
            controllers.dedup();
            BoundCell {
                b_cell,
                presented,
                activated: tally.activates(),
                tally,
                helpers,
                controllers,
            }
        })
        .collect();
    AdaptiveResponse { bound }
}

fn hits_per_peptide(peptides: &WindowIndex, cells: &[Lymphocyte]) -> Vec<Vec<CellId>> {
    let mut hits = vec![Vec::new(); peptides.len()];
    for cell in cells {
        for p in peptides.matching(&cell.receptor) {
            hits[p].push(cell.id);
        }
    }
    hits
}

/// The antigen peptides that bind `b` at threshold `r`, in antigen order,
/// duplicates kept.
pub fn present_peptides(b: &Lymphocyte, antigen: &Antigen, r: usize) -> Vec<Peptide> {
    antigen
        .peptides
        .iter()
        .filter(|p| reaches(&b.receptor, p.bits(), r))
        .cloned()
        .collect()
}

/// Counts helper and controller stimulations over every (T cell, presented
/// peptide) pair and activates `b` only when helpers strictly outnumber
/// controllers.
pub fn two_signal_activation(
    b: &Lymphocyte,
    antigen: &Antigen,
    helpers: &[Lymphocyte],
    controllers: &[Lymphocyte],
    r: usize,
) -> (bool, SignalTally) {
    let presented = present_peptides(b, antigen, r);
    let count = |cells: &[Lymphocyte]| -> u32 {
        cells
            .iter()
            .map(|c| {
                presented
                    .iter()
                    .filter(|p| reaches(&c.receptor, p.bits(), r))
                    .count() as u32
            })
            .sum()
    };
    let tally = SignalTally {
        helper_stimulations: count(helpers),
        controller_stimulations: count(controllers),
    };
    (tally.activates(), tally)
}
