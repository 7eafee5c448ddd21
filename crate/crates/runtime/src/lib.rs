//! Transports and tooling around the dialogue engine: the HTTP turn
//! service, the REPL, replay, training commands and the remote RG client.

pub mod commands;
pub mod news;
pub mod remote;
pub mod repl;
pub mod server;
pub mod wire;
