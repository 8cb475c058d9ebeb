//! Approximate amplitude encoding of classical data into shallow circuits of
//! two-qubit gates, with quantum kernel and SVM tooling on top.

pub mod aqce;
pub mod dataset;
pub mod error;
pub mod qasm;
pub mod qkernel;
pub mod smallalg;
pub mod statevec;
pub mod svm;

pub use aqce::{encode, encode_state, fidelity, EncodeParams, EncodeResult, FidelityTier};
pub use dataset::{DataKind, DataRecord, DataType, Manifest, ValidationReport};
pub use error::{Error, Result};
pub use qasm::{
    emit_base, emit_dense, parse, parse_document, tokenize, QasmDocument, TokenOptions, TokenStream,
};
pub use qkernel::{gram, kernel_entry, state_gram, GramMatrix, KernelMode};
pub use smallalg::{Matrix2, Matrix4, C64};
pub use statevec::{Circuit, StateVector, TwoQubitGate};
pub use svm::{
    train_binary, train_multiclass, BinaryModel, KernelMatrix, MulticlassModel, Strategy, SvmParams,
};
