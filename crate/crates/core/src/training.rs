//! Learning, normal operation, relearning from feedback, and testing, plus
//! the corrections applied when the user reports a misclassification.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{compute_metrics, Label, LabeledMessage, Metrics};
use crate::encoding::{reaches, Codebook};
use crate::immune::{
    apply_weights, clonal_expand, evaluate, fill_population, reselect, stimulate_adaptive,
    tick_lifetimes, trim_population, ClassifierState, ImmuneError, Mode, Params, Presentation,
    ReplayEntry, Verdict,
};
use crate::repertoire::{
    build_library, build_microorganism, generate_macrophages, CellRole, LibraryChange, Lymphocyte,
    Macrophage, Microorganism, RepertoireError,
};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("message {0:?} is not in the replay log")]
    UnknownMessage(String),
    #[error("correction expects system={expected_system} given={expected_given}, got system={system} given={given}")]
    WrongDirection {
        expected_system: Label,
        expected_given: Label,
        system: Label,
        given: Label,
    },
    #[error("message {id:?}: given label {label} equals the system label")]
    NotAMistake { id: String, label: Label },
    #[error(transparent)]
    Immune(#[from] ImmuneError),
    #[error(transparent)]
    Repertoire(#[from] RepertoireError),
}

/// A user report that the system got a message wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub message_id: String,
    pub given_label: Label,
    pub system_label: Label,
    pub microorganism: Microorganism,
}

impl FeedbackEvent {
    pub fn new(
        message_id: impl Into<String>,
        given_label: Label,
        system_label: Label,
        microorganism: Microorganism,
    ) -> Result<Self, TrainingError> {
        let message_id = message_id.into();
        if given_label == system_label {
            return Err(TrainingError::NotAMistake {
                id: message_id,
                label: given_label,
            });
        }
        Ok(Self {
            message_id,
            given_label,
            system_label,
            microorganism,
        })
    }

    /// Looks the message up in the replay log. Returns `None` when the given
    /// label confirms the system's verdict.
    pub fn from_log(
        state: &ClassifierState,
        message_id: &str,
        given: Label,
    ) -> Result<Option<Self>, TrainingError> {
        let entry = state
            .replay_log()
            .find(message_id)
            .ok_or_else(|| TrainingError::UnknownMessage(message_id.to_string()))?;
        if entry.verdict.label == given {
            return Ok(None);
        }
        Self::new(
            message_id,
            given,
            entry.verdict.label,
            entry.microorganism.clone(),
        )
        .map(Some)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Option<Mode>,
    pub processed: usize,
    pub weight_updates: usize,
    pub corrections: usize,
    pub library_changes: usize,
}

impl StageReport {
    fn new(stage: Mode) -> Self {
        Self {
            stage: Some(stage),
            ..Self::default()
        }
    }
}

/// Builds the library, macrophages and negatively selected lymphocyte
/// populations from a labeled corpus. No weights are learned yet.
pub fn prepare(
    corpus: &[LabeledMessage],
    codebook: Codebook,
    params: Params,
) -> Result<ClassifierState, TrainingError> {
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    let mut state = ClassifierState::new(codebook, params)?;
    state.library = build_library(corpus, &state.codebook)?;
    state.macrophages = generate_macrophages(&state.library, &mut state.ids);
    for role in [CellRole::BCell, CellRole::HelperT, CellRole::ControllerT] {
        fill_population(&mut state, role)?;
    }
    Ok(state)
}

/// [`prepare`] followed by [`initial_learning`] on the same corpus.
pub fn train(
    corpus: &[LabeledMessage],
    codebook: Codebook,
    params: Params,
) -> Result<(ClassifierState, StageReport), TrainingError> {
    let mut state = prepare(corpus, codebook, params)?;
    let report = initial_learning(corpus, &mut state)?;
    Ok((state, report))
}

/// Shows every labeled message to the whole repertoire and credits the
/// matching cells with the true label.
pub fn initial_learning(
    corpus: &[LabeledMessage],
    state: &mut ClassifierState,
) -> Result<StageReport, TrainingError> {
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    state.ensure_initialized()?;
    state.mode = Mode::Learning;
    let mut report = StageReport::new(Mode::Learning);
    for message in corpus {
        let label = message
            .label
            .ok_or_else(|| RepertoireError::UnlabeledMessage {
                id: message.id.clone(),
            })?;
        let m = build_microorganism(message, &state.codebook)?;
        report.weight_updates += learn_one(state, &m, label)?;
        report.processed += 1;
    }
    Ok(report)
}

fn learn_one(
    state: &mut ClassifierState,
    m: &Microorganism,
    label: Label,
) -> Result<usize, TrainingError> {
    let encounter = evaluate(m, state, Presentation::Full)?;
    let updates = apply_weights(state, &encounter, label);
    tick_lifetimes(state, &encounter)?;
    if label == Label::Spam && !encounter.macrophage_hits.is_empty() {
        stimulate_adaptive(state, &m.antigen);
    }
    record(state, m, encounter.verdict);
    Ok(updates)
}

fn record(state: &mut ClassifierState, m: &Microorganism, verdict: Verdict) {
    state.replay.record(ReplayEntry {
        message_id: m.source_id.clone(),
        microorganism: m.clone(),
        verdict,
    });
}

/// Classifies one message and learns from the system's own verdict.
pub fn normal_step(
    message: &LabeledMessage,
    state: &mut ClassifierState,
) -> Result<Verdict, TrainingError> {
    state.ensure_initialized()?;
    if state.mode != Mode::Test {
        state.mode = Mode::Normal;
    }
    let m = build_microorganism(message, &state.codebook)?;
    Ok(step(state, &m)?.0)
}

fn step(state: &mut ClassifierState, m: &Microorganism) -> Result<(Verdict, usize), TrainingError> {
    let encounter = evaluate(m, state, Presentation::Cascade)?;
    let updates = apply_weights(state, &encounter, encounter.verdict.label);
    tick_lifetimes(state, &encounter)?;
    if !encounter.macrophage_hits.is_empty() {
        stimulate_adaptive(state, &m.antigen);
    }
    if let Some(resp) = &encounter.adaptive {
        for b in resp.activated() {
            clonal_expand(state, b.b_cell);
        }
    }
    record(state, m, encounter.verdict.clone());
    Ok((encounter.verdict, updates))
}

/// Applies user feedback: the cells behind each wrong verdict get their
/// weights reset to `reset_value`, the message is learned again under the
/// given label, and the matching correction is applied.
pub fn relearn(
    mistakes: &[FeedbackEvent],
    reset_value: u64,
    state: &mut ClassifierState,
) -> Result<StageReport, TrainingError> {
    let mut report = StageReport::new(Mode::Relearning);
    if mistakes.is_empty() {
        return Ok(report);
    }
    state.ensure_initialized()?;
    state.mode = Mode::Relearning;
    for event in mistakes {
        let entry = state
            .replay_log()
            .find(&event.message_id)
            .ok_or_else(|| TrainingError::UnknownMessage(event.message_id.clone()))?;
        for id in entry.verdict.evidence.clone() {
            if let Some(cell) = state.cell_mut(id) {
                cell.weights.replication_attack_match = reset_value;
                cell.weights.transaction_match = reset_value;
            }
        }
        report.weight_updates += learn_one(state, &event.microorganism, event.given_label)?;
        report.library_changes += match event.given_label {
            Label::Legitimate => correct_false_positive(event, state)?,
            Label::Spam => correct_false_negative(event, state)?,
        };
        let verdict = evaluate(&event.microorganism, state, Presentation::Cascade)?.verdict;
        record(state, &event.microorganism, verdict);
        report.corrections += 1;
        report.processed += 1;
    }
    Ok(report)
}

/// Classifies every message as in normal operation, without corrections,
/// and scores the verdicts against the labels.
pub fn test_evaluate(
    corpus: &[LabeledMessage],
    state: &mut ClassifierState,
) -> Result<(Metrics, StageReport), TrainingError> {
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    state.ensure_initialized()?;
    state.mode = Mode::Test;
    let mut report = StageReport::new(Mode::Test);
    let mut verdicts = Vec::with_capacity(corpus.len());
    let mut labels = Vec::with_capacity(corpus.len());
    for message in corpus {
        let label = message
            .label
            .ok_or_else(|| RepertoireError::UnlabeledMessage {
                id: message.id.clone(),
            })?;
        let m = build_microorganism(message, &state.codebook)?;
        let (verdict, updates) = step(state, &m)?;
        verdicts.push(verdict.label);
        labels.push(label);
        report.weight_updates += updates;
        report.processed += 1;
    }
    let metrics = compute_metrics(&verdicts, &labels).expect("one verdict per label");
    Ok((metrics, report))
}

fn check_direction(
    event: &FeedbackEvent,
    system: Label,
    given: Label,
) -> Result<(), TrainingError> {
    if event.system_label == system && event.given_label == given {
        Ok(())
    } else {
        Err(TrainingError::WrongDirection {
            expected_system: system,
            expected_given: given,
            system: event.system_label,
            given: event.given_label,
        })
    }
}

/// Moves a wrongly flagged message to the self side. Returns the number of
/// library changes.
///
/// 1. Remove its pattern and peptides from non-self.
/// 2. Remove macrophages that bind its pattern.
/// 3. Add pattern and peptides to self.
/// 4. Negative selection of B and helper T cells against the new self.
/// 5. One controller T cell per distinct peptide at least `r` bits long.
pub fn correct_false_positive(
    event: &FeedbackEvent,
    state: &mut ClassifierState,
) -> Result<LibraryChange, TrainingError> {
    check_direction(event, Label::Spam, Label::Legitimate)?;
    let m = &event.microorganism;
    let r = state.params.r;
    let r_pattern = state.params.r_pattern;

    let mut changes = state.library.remove_nonself(m);
    state
        .macrophages
        .retain(|mac| !crate::immune::macrophage_binds(mac, m.pattern.bits(), r_pattern));
    changes += state.library.add_self(m);
    reselect(state)?;

    let receptors: BTreeSet<_> = m
        .antigen
        .peptides
        .iter()
        .filter(|p| p.bits().len() >= r)
        .collect();
    let lifetime = state.params.lifetime;
    for p in receptors {
        let id = state.ids.fresh();
        state.controller_t.push(Lymphocyte::new(
            id,
            CellRole::ControllerT,
            p.bits().clone(),
            lifetime,
        ));
    }
    trim_population(&mut state.controller_t, state.params.controller_t);
    Ok(changes)
}

/// Moves a missed message to the non-self side. Returns the number of
/// library changes.
///
/// 1. Remove its pattern and peptides from self.
/// 2. Remove controller T cells that bind any of its peptides.
/// 3. Add pattern and peptides to non-self.
/// 4. Create a macrophage for its pattern unless one already binds it.
pub fn correct_false_negative(
    event: &FeedbackEvent,
    state: &mut ClassifierState,
) -> Result<LibraryChange, TrainingError> {
    check_direction(event, Label::Legitimate, Label::Spam)?;
    let m = &event.microorganism;
    let r = state.params.r;
    let r_pattern = state.params.r_pattern;

    let mut changes = state.library.remove_self(m);
    state.controller_t.retain(|c| {
        !m.antigen
            .peptides
            .iter()
            .any(|p| reaches(&c.receptor, p.bits(), r))
    });
    fill_population(state, CellRole::ControllerT)?;
    changes += state.library.add_nonself(m);

    if !state
        .macrophages
        .iter()
        .any(|mac| crate::immune::macrophage_binds(mac, m.pattern.bits(), r_pattern))
    {
        let id = state.ids.fresh();
        state.macrophages.push(Macrophage {
            id,
            receptor: m.pattern.clone(),
        });
    }
    Ok(changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_corpus, CorpusSpec};
    use crate::immune::{classify, Route};
    use proptest::prelude::*;

    fn msg(id: &str, sender: &str, body: &str, label: Label) -> LabeledMessage {
        LabeledMessage::new(id, sender, "", body, Some(label))
    }

    fn small() -> Params {
        Params {
            b_cells: 16,
            helper_t: 8,
            controller_t: 8,
            ..Params::default()
        }
    }

    fn trained(seed: u64) -> (ClassifierState, Vec<LabeledMessage>) {
        let corpus = gen_corpus(seed, &CorpusSpec::default());
        let params = Params { seed, ..small() };
        let (state, _) = train(&corpus, Codebook::builtin(), params).unwrap();
        (state, corpus)
    }

    fn micro(state: &ClassifierState, m: &LabeledMessage) -> Microorganism {
        build_microorganism(m, state.codebook()).unwrap()
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            prepare(&[], Codebook::builtin(), Params::default()),
            Err(TrainingError::EmptyCorpus)
        ));
        let (mut state, _) = trained(1);
        assert!(matches!(
            initial_learning(&[], &mut state),
            Err(TrainingError::EmptyCorpus)
        ));
        assert!(matches!(
            test_evaluate(&[], &mut state),
            Err(TrainingError::EmptyCorpus)
        ));
    }

    #[test]
    fn uninitialized_state_refuses_normal_steps() {
        let mut state = ClassifierState::new(Codebook::builtin(), Params::default()).unwrap();
        let err = normal_step(&msg("a", "x@y", "hi", Label::Spam), &mut state).unwrap_err();
        assert!(matches!(
            err,
            TrainingError::Immune(ImmuneError::UninitializedState)
        ));
    }

    #[test]
    fn legitimate_match_credits_transaction_counter_only() {
        let corpus = vec![
            msg("s", "spam@bad", "zzqx", Label::Spam),
            msg("l", "friend@home", "hello there", Label::Legitimate),
        ];
        let mut state = prepare(&corpus, Codebook::builtin(), small()).unwrap();
        let hello = crate::encoding::encode_str("hello", state.codebook()).unwrap();
        let id = state.ids.fresh();
        state.b_cells[0] = Lymphocyte::new(id, CellRole::BCell, hello, 16);
        initial_learning(&corpus[1..], &mut state).unwrap();
        let cell = state.b_cells().iter().find(|c| c.id == id).unwrap();
        assert_eq!(
            (
                cell.weights.replication_attack_match,
                cell.weights.transaction_match
            ),
            (0, 1)
        );
        assert!(state
            .lymphocytes()
            .all(|c| c.weights.replication_attack_match == 0));
        assert!(state
            .b_cells()
            .iter()
            .filter(|c| c.id != id)
            .all(|c| c.weights.transaction_match == 0));
    }

    #[test]
    fn spam_learning_credits_both_counters() {
        let corpus = vec![
            msg("s", "spam@bad", "zzqx", Label::Spam),
            msg("l", "friend@home", "hello there", Label::Legitimate),
        ];
        let mut state = prepare(&corpus, Codebook::builtin(), small()).unwrap();
        // every B cell is built only from "zzqx", so all of them bind it
        initial_learning(&corpus[..1], &mut state).unwrap();
        let b: Vec<_> = state
            .b_cells()
            .iter()
            .filter(|c| c.weights.transaction_match > 0)
            .collect();
        assert!(!b.is_empty());
        assert!(b
            .iter()
            .all(|c| c.weights.replication_attack_match == c.weights.transaction_match));
    }

    #[test]
    fn no_spam_corpus_means_no_spam_counters() {
        let mut corpus = gen_corpus(
            3,
            &CorpusSpec {
                n_spam: 0,
                n_legit: 30,
                ..CorpusSpec::default()
            },
        );
        corpus.push(msg("only-spam", "x@y", "zzqx", Label::Spam));
        let params = Params { r: 24, ..small() };
        let mut state = prepare(&corpus, Codebook::builtin(), params).unwrap();
        initial_learning(&corpus[..30], &mut state).unwrap();
        assert!(state
            .lymphocytes()
            .all(|c| c.weights.replication_attack_match == 0));
    }

    #[test]
    fn trained_spam_sender_is_a_macrophage_hit() {
        let (mut state, corpus) = trained(2);
        let spam = corpus
            .iter()
            .find(|m| m.label == Some(Label::Spam))
            .unwrap();
        let fresh = LabeledMessage {
            id: "new".into(),
            body: "anything at all".into(),
            ..spam.clone()
        };
        let before = state.b_cells().len();
        let v = normal_step(&fresh, &mut state).unwrap();
        assert_eq!((v.label, v.route), (Label::Spam, Route::MacrophageHit));
        assert_eq!(state.b_cells().len(), before);
    }

    #[test]
    fn feedback_for_unknown_message() {
        let (state, _) = trained(4);
        assert!(matches!(
            FeedbackEvent::from_log(&state, "nope", Label::Spam),
            Err(TrainingError::UnknownMessage(_))
        ));
    }

    #[test]
    fn confirmations_are_not_events() {
        let (state, corpus) = trained(4);
        let entry = state.replay_log().find(&corpus[0].id).unwrap().clone();
        assert!(
            FeedbackEvent::from_log(&state, &corpus[0].id, entry.verdict.label)
                .unwrap()
                .is_none()
        );
        assert!(FeedbackEvent::new("x", Label::Spam, Label::Spam, entry.microorganism).is_err());
    }

    #[test]
    fn empty_relearn_changes_nothing() {
        let (mut state, _) = trained(5);
        let before = state.clone();
        let report = relearn(&[], 0, &mut state).unwrap();
        assert_eq!(report.processed, 0);
        assert_eq!(state, before);
    }

    #[test]
    fn wrong_direction_is_rejected() {
        let (mut state, corpus) = trained(6);
        let m = micro(&state, &corpus[0]);
        let fp = FeedbackEvent::new("x", Label::Legitimate, Label::Spam, m.clone()).unwrap();
        let fn_ = FeedbackEvent::new("x", Label::Spam, Label::Legitimate, m).unwrap();
        assert!(matches!(
            correct_false_negative(&fp, &mut state),
            Err(TrainingError::WrongDirection { .. })
        ));
        assert!(matches!(
            correct_false_positive(&fn_, &mut state),
            Err(TrainingError::WrongDirection { .. })
        ));
    }

    #[test]
    fn false_positive_correction_end_to_end() {
        let (mut state, corpus) = trained(7);
        let spam = corpus
            .iter()
            .find(|m| m.label == Some(Label::Spam))
            .unwrap();
        let m = micro(&state, spam);
        assert_eq!(classify(&m, &state).unwrap().label, Label::Spam);
        let matching = state
            .macrophages()
            .iter()
            .filter(|mac| crate::immune::macrophage_binds(mac, m.pattern.bits(), None))
            .count();
        let macs = state.macrophages().len();

        let event =
            FeedbackEvent::new(&spam.id, Label::Legitimate, Label::Spam, m.clone()).unwrap();
        correct_false_positive(&event, &mut state).unwrap();
        assert_eq!(state.macrophages().len(), macs - matching);
        assert!(state.library().self_patterns().contains(&m.pattern));
        assert!(!state.library().nonself_patterns().contains(&m.pattern));
        assert!(state.library().is_disjoint());
        assert_eq!(classify(&m, &state).unwrap().label, Label::Legitimate);
    }

    #[test]
    fn false_negative_correction_end_to_end() {
        let (mut state, _) = trained(8);
        let unseen = msg(
            "u",
            "brandnew@sender.example",
            "quiet words here",
            Label::Spam,
        );
        let m = micro(&state, &unseen);
        let event = FeedbackEvent::new("u", Label::Spam, Label::Legitimate, m.clone()).unwrap();
        let first = correct_false_negative(&event, &mut state).unwrap();
        assert!(first > 0);
        let v = classify(&m, &state).unwrap();
        assert_eq!((v.label, v.route), (Label::Spam, Route::MacrophageHit));
        assert!(state.library().nonself_patterns().contains(&m.pattern));
        assert!(!state.library().self_patterns().contains(&m.pattern));
        let lib = state.library().clone();
        assert_eq!(correct_false_negative(&event, &mut state).unwrap(), 0);
        assert_eq!(state.library(), &lib);
    }

    #[test]
    fn relearn_resets_evidence_before_replay() {
        let (mut state, corpus) = trained(9);
        let spam = corpus
            .iter()
            .find(|m| m.label == Some(Label::Spam))
            .unwrap();
        let probe = LabeledMessage {
            id: "probe".into(),
            ..spam.clone()
        };
        let v = normal_step(&probe, &mut state).unwrap();
        assert_eq!(v.label, Label::Spam);
        let event = FeedbackEvent::from_log(&state, "probe", Label::Legitimate)
            .unwrap()
            .unwrap();
        let report = relearn(&[event], 0, &mut state).unwrap();
        assert_eq!((report.processed, report.corrections), (1, 1));
        assert!(report.library_changes > 0);
        let again = FeedbackEvent::from_log(&state, "probe", Label::Legitimate).unwrap();
        assert!(again.is_none(), "the post-correction verdict is recorded");
    }

    #[test]
    fn test_evaluate_matches_replayed_normal_steps() {
        let (mut state, corpus) = trained(10);
        let mut oracle_state = state.clone();
        let relabeled: Vec<_> = corpus
            .iter()
            .map(|m| LabeledMessage {
                id: format!("r-{}", m.id),
                ..m.clone()
            })
            .collect();
        let (metrics, report) = test_evaluate(&relabeled, &mut state).unwrap();
        assert_eq!(report.processed, relabeled.len());

        oracle_state.mode = Mode::Test;
        let mut counts = [0usize; 4];
        for m in &relabeled {
            let v = normal_step(m, &mut oracle_state).unwrap();
            let idx = match (v.label, m.label.unwrap()) {
                (Label::Spam, Label::Spam) => 0,
                (Label::Spam, Label::Legitimate) => 1,
                (Label::Legitimate, Label::Legitimate) => 2,
                (Label::Legitimate, Label::Spam) => 3,
            };
            counts[idx] += 1;
        }
        assert_eq!(
            metrics,
            Metrics::from_counts(counts[0], counts[1], counts[2], counts[3])
        );
        assert_eq!(metrics.recall, Some(1.0), "every spam sender was trained");
        assert_eq!(state, oracle_state);
    }

    #[test]
    fn unrelated_messages_keep_their_verdicts() {
        let corpus = vec![
            msg("s1", "promo@deals", "cheap pills now", Label::Spam),
            msg("s2", "offers@win", "free prize claim", Label::Spam),
            msg("l1", "mom@home", "dinner tonight", Label::Legitimate),
            msg("l2", "boss@work", "meeting agenda", Label::Legitimate),
        ];
        let (mut state, _) = train(&corpus, Codebook::builtin(), small()).unwrap();
        let target = micro(&state, &corpus[0]);
        let bystanders: Vec<_> = [&corpus[1], &corpus[3]]
            .iter()
            .map(|m| micro(&state, m))
            .collect();
        let before: Vec<_> = bystanders
            .iter()
            .map(|m| classify(m, &state).unwrap().label)
            .collect();
        let event = FeedbackEvent::new("s1", Label::Legitimate, Label::Spam, target).unwrap();
        correct_false_positive(&event, &mut state).unwrap();
        let after: Vec<_> = bystanders
            .iter()
            .map(|m| classify(m, &state).unwrap().label)
            .collect();
        assert_eq!(before, after);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn corrections_are_sound(seed in 0u64..1000, pick in 0usize..100) {
            let (mut state, corpus) = trained(seed);
            let message = &corpus[pick % corpus.len()];
            let m = micro(&state, message);
            let system = classify(&m, &state).unwrap().label;
            let event = FeedbackEvent::new(&message.id, system.flipped(), system, m.clone()).unwrap();
            match system {
                Label::Spam => { correct_false_positive(&event, &mut state).unwrap(); }
                Label::Legitimate => { correct_false_negative(&event, &mut state).unwrap(); }
            }
            let v = classify(&m, &state).unwrap();
            prop_assert_eq!(v.label, system.flipped());
            if v.label == Label::Spam {
                prop_assert_eq!(v.route, Route::MacrophageHit);
            }
            prop_assert!(state.library().is_disjoint());
        }
    }
}
