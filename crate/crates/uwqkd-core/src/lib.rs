//! Performance modeling for underwater quantum key distribution links.
//!
//! The crate computes quantum-bit-error-rate (QBER) and secret-key-rate (SKR)
//! bounds for BB84 over turbulent seawater channels, including passive-relay
//! chains and two-decoy-state operation, and ships a Monte Carlo photon
//! transport simulator for receiver gate-time optimization.
//!
//! Modules roughly follow the physics pipeline:
//!
//! * [`numerics`] — quadrature, Bessel kernels, entropy, seeded RNG streams
//! * [`channel`] — path loss, oceanic-turbulence wave structure function,
//!   near-field power transfer
//! * [`noise`] — background-light and dark-count budgets
//! * [`bb84`] — direct-link QBER/SKR bounds and achievable-distance solving
//! * [`relay`] — multi-hop passive-relay bounds and relay-count optimization
//! * [`decoy`] — two-decoy-state gain/yield/error bounds and key rate
//! * [`montecarlo`] — photon transport, arrival statistics, gate-time search

pub mod bb84;
pub mod channel;
pub mod constants;
pub mod decoy;
pub mod montecarlo;
pub mod noise;
pub mod numerics;
pub mod relay;
