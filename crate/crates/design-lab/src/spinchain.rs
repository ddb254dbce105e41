//! Chaotic spin-chain demonstrator.
