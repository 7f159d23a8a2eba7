//! Runs every code block in the guide as a doctest, so `cargo test` keeps
//! the book and the library in sync. Compiled only under `cfg(doctest)`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct IntroductionChapter;

#[doc = include_str!("../../../book/src/graphs.md")]
pub struct GraphsChapter;

#[doc = include_str!("../../../book/src/models.md")]
pub struct ModelsChapter;

#[doc = include_str!("../../../book/src/mean-field.md")]
pub struct MeanFieldChapter;

#[doc = include_str!("../../../book/src/stability.md")]
pub struct StabilityChapter;

#[doc = include_str!("../../../book/src/phase-type.md")]
pub struct PhaseTypeChapter;

#[doc = include_str!("../../../book/src/stochastic.md")]
pub struct StochasticChapter;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct CliChapter;
