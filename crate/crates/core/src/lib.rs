//! Search-based fuzzing of RPC APIs.
//!
//! The crate parses RPC schemas ([`schema`]), represents call inputs as
//! genes ([`genes`]), scores executions against testing targets
//! ([`fitness`]), evolves test cases with MIO or random search
//! ([`search`]), runs them through a transport ([`executor`]) against either
//! a remote service or a built-in simulated one ([`harness`]), and writes
//! replayable suites ([`writer`]). [`experiment`] sweeps seeds and
//! algorithms over the simulated services; [`app`] holds the command
//! implementations behind the `rpcfuzz` binary.

pub mod app;
pub mod executor;
pub mod experiment;
pub mod fitness;
pub mod genes;
pub mod harness;
pub mod schema;
pub mod search;
pub mod writer;

/// Random number generator used everywhere a seed must reproduce a run.
pub type SearchRng = rand_chacha::ChaCha8Rng;
