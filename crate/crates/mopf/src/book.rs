//! Keeps the guide's code examples compiling: every chapter of `book/` is
//! attached as documentation here, so its Rust blocks run under
//! `cargo test` as doc-tests and cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/network-model.md")]
mod network_model {}

#[doc = include_str!("../../../book/src/demand-and-weight.md")]
mod demand_and_weight {}

#[doc = include_str!("../../../book/src/driving-profiles.md")]
mod driving_profiles {}

#[doc = include_str!("../../../book/src/formulation.md")]
mod formulation {}

#[doc = include_str!("../../../book/src/solvers.md")]
mod solvers {}

#[doc = include_str!("../../../book/src/sweeps.md")]
mod sweeps {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
