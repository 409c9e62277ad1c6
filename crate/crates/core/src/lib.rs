//! Spam filtering with an artificial immune system.
//!
//! Senders are screened by macrophages trained on known spam senders.
//! Message content is screened by B cells, whose activation needs helper T
//! cells to outvote controller T cells. Populations turn over with every
//! message and user feedback moves material between the self and non-self
//! libraries.

pub mod cli;
pub mod corpus;
pub mod encoding;
pub mod immune;
pub mod repertoire;
pub mod training;

pub use corpus::{Label, LabeledMessage, Metrics};
pub use encoding::{affinity, matches, BitSequence, Codebook};
pub use immune::{classify, ClassifierState, Params, Route, Verdict};
pub use training::{train, FeedbackEvent};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/repertoire.md")]
    mod repertoire {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
