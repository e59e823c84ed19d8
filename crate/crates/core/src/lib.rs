//! Ecosystem Communication Unit.
//!
//! A gateway that accepts ECL (Ecosystem Communication Language) XML
//! messages, validates and optionally decrypts them, translates each call
//! into the destination service's own protocol, balances it across that
//! service's backends, and translates the reply back into ECL.

pub mod adapters;
pub mod clock;
pub mod codec;
pub mod crypto;
pub mod gateway;
pub mod registry;
