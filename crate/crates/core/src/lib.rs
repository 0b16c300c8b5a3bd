//! Simulator and analytics toolkit for device-independent quantum secure
//! direct communication (DI-QSDC) over non-Markovian amplitude-damping and
//! dephasing channels.
//!
//! The library is organized bottom-up:
//!
//! - [`qcore`]: exact complex linear algebra for one- and two-qubit states
//!   (Bell states, Pauli observables, Kraus application, Bell projection).
//! - [`channels`]: non-Markovian amplitude-damping and dephasing channel
//!   models: decay functions, time-indexed Kraus sets, regime classification,
//!   and an information-backflow witness.
//! - [`metrics`]: closed-form analytics (transmission efficiency, CHSH
//!   functionals, QBER, binary entropy, Holevo bound, secret-message
//!   capacity) plus a density-matrix oracle path that recomputes the same
//!   quantities from states built in `qcore`.
//! - [`protocol`]: a seeded Monte Carlo implementation of the five-stage
//!   DI-QSDC protocol whose finite-sample estimates converge to the
//!   `metrics` closed forms.
//! - [`blockcode`]: block encoding/decoding: square-wave unitary modulation
//!   of photon blocks, detection thinning, DFT decoding, and the
//!   eavesdropper's white-noise spectrum.

pub mod blockcode;
pub mod channels;
pub mod metrics;
pub mod protocol;
pub mod qcore;
