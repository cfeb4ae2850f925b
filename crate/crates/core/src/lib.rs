//! Toolkit for studying name leakage in coreference corpora.
//!
//! The pieces fit together like this:
//!
//! * [`conll_io`] reads and writes CoNLL-2012 column files losslessly.
//! * [`gazetteer`] loads the name resources (census last names, gendered
//!   first names, GeoNames places) and draws from them without replacement.
//! * [`no_leakage`] rewrites PER and GPE names in a corpus so that no name
//!   from a training set survives into the perturbed text.
//! * [`coref_metrics`] scores clusterings with MUC, B-cubed, CEAF-e and
//!   their CoNLL F1 average, and measures train/test head-name overlap.
//! * [`gap_eval`] scores pronoun/name binary predictions on GAP-style data
//!   with per-gender F1 and the female/male bias ratio.
//! * [`sigtest`] provides the exact McNemar test and a stratified
//!   approximate randomization test.
//! * [`adv_coref`] is a desk-scale span-ranking coreference model with a
//!   gradient-direction adversarial loss and verifiable gradients.
//! * [`cli`] wires everything into subcommands.

pub mod adv_coref;
pub mod cli;
pub mod conll_io;
pub mod coref_metrics;
pub mod gap_eval;
pub mod gazetteer;
pub mod no_leakage;
pub mod sigtest;

mod assignment;
