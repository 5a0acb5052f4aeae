// The book's chapters, compiled as doc comments so that `cargo test --doc`
// runs every listing against the current library. One module per chapter
// keeps failures traceable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/simplex.md")]
pub mod simplex {}
#[doc = include_str!("../../../book/src/learner.md")]
pub mod learner {}
#[doc = include_str!("../../../book/src/stopping.md")]
pub mod stopping {}
#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
