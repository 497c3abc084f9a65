//! The user guide, one module per chapter.
//!
//! The chapters live as Markdown under `book/` at the workspace root and
//! render with `mdbook build book`. Including them here does two things:
//! they show up on the rendered API documentation, and every code block
//! in the book compiles and runs under `cargo test --doc`, so the guide
//! cannot drift from the crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/game-model.md")]
pub mod game_model {}

#[doc = include_str!("../../../book/src/finite-horizon.md")]
pub mod finite_horizon {}

#[doc = include_str!("../../../book/src/beliefs-and-regrets.md")]
pub mod beliefs_and_regrets {}

#[doc = include_str!("../../../book/src/discounted-play.md")]
pub mod discounted_play {}

#[doc = include_str!("../../../book/src/certified-bounds.md")]
pub mod certified_bounds {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
