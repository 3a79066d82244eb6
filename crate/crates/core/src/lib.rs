//! Simulation of polarization ⇄ orbital-angular-momentum qubit transferrers
//! built from q-plates, wave plates, holograms and Dove-prism interferometers,
//! with six-projector tomography of the resulting qubits.

pub mod circuit;
pub mod circuitio;
pub mod cli;
pub mod elements;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod tomography;

pub use circuit::{run_exact, run_shots, Circuit, InterferometerBlock, RunResult};
pub use circuitio::{parse_circuit, CircuitDoc, ParseError};
pub use error::{Error, Result};
pub use experiments::{build_setup, run_table, FidelityTable, NoiseConfig, SetupId};
pub use hilbert::{c64, Cardinal, DensityMatrix2, LogicalSubspace, OamLadder, PhotonState, Qubit};
pub use tomography::{reconstruct_linear, reconstruct_mle, CountRecord};
