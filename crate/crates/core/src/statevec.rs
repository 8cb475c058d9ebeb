//! Dense statevector simulation of two-qubit-gate circuits.
//!
//! Conventions used throughout the crate:
//!
//! * Basis index `i` maps to qubits little-endian: qubit `k` is bit `k` of `i`.
//! * A [`TwoQubitGate`] on `(qa, qb)` indexes its 4×4 matrix by
//!   `2·bit(qa) + bit(qb)`, so `qa` is the high-order factor. `qa` is the
//!   register listed first in QASM (`q[qa],q[qb]`).
//! * A [`Circuit`] stores gates in operator order `C = U_1 U_2 … U_M`; `U_M`
//!   is applied to the ket first and `U_1` last.

use crate::error::{Error, Result};
use crate::smallalg::{unitarity_defect, Matrix2, Matrix4, C64, ONE, ZERO};

pub const MAX_QUBITS: usize = 20;

/// Unitarity tolerance for gates built in memory.
pub const GATE_UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0ⁿ⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if index >= 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                found: index,
            });
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Wrap raw amplitudes. The length must be a power of two; no
    /// normalization is applied.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "amplitude count {len} is not a power of two ≥ 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(StateVector { n_qubits, amps })
    }

    /// Amplitude-encode a real vector: `n = ⌈log₂ d⌉` (at least 1), the first
    /// `d` amplitudes are `x/‖x‖` and the padding is zero.
    pub fn from_classical(x: &[f64]) -> Result<Self> {
        let complex: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::from_complex(&complex)
    }

    pub fn from_complex(x: &[C64]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::ZeroVector);
        }
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("classical vector"));
        }
        let n_qubits = qubits_for_len(x.len());
        check_qubits(n_qubits)?;
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        for (a, z) in amps.iter_mut().zip(x) {
            *a = z / norm;
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(())
    }

    /// `⟨self|other⟩ = Σ conj(self_i)·other_i`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_dim(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Probability that qubit `q` reads 1.
    pub fn qubit_one_probability(&self, q: usize) -> f64 {
        let mask = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub fn apply_gate(&mut self, gate: &TwoQubitGate) -> Result<()> {
        if gate.qa.max(gate.qb) >= self.n_qubits {
            return Err(Error::InvalidGate(format!(
                "gate on ({}, {}) does not fit {} qubits",
                gate.qa, gate.qb, self.n_qubits
            )));
        }
        self.apply_matrix(&gate.matrix, gate.qa, gate.qb);
        Ok(())
    }

    /// Functional form of [`apply_gate`](Self::apply_gate).
    pub fn applied(&self, gate: &TwoQubitGate) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_gate(gate)?;
        Ok(out)
    }

    /// Apply a 4×4 matrix on `(qa, qb)` without validation. Indices must be
    /// distinct and in range.
    pub(crate) fn apply_matrix(&mut self, m: &Matrix4, qa: usize, qb: usize) {
        debug_assert!(qa != qb && qa.max(qb) < self.n_qubits);
        let ma = 1usize << qa;
        let mb = 1usize << qb;
        let (lo, hi) = if qa < qb { (qa, qb) } else { (qb, qa) };
        let m = &m.0;
        let quarter = self.amps.len() >> 2;
        for k in 0..quarter {
            let i00 = insert_zero_bit(insert_zero_bit(k, lo), hi);
            let idx = [i00, i00 | mb, i00 | ma, i00 | ma | mb];
            let v = [
                self.amps[idx[0]],
                self.amps[idx[1]],
                self.amps[idx[2]],
                self.amps[idx[3]],
            ];
            for r in 0..4 {
                self.amps[idx[r]] =
                    m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
            }
        }
    }

    /// Apply `m†` on `(qa, qb)` without forming the adjoint.
    pub(crate) fn apply_matrix_adjoint(&mut self, m: &Matrix4, qa: usize, qb: usize) {
        self.apply_matrix(&m.adjoint(), qa, qb);
    }

    pub fn apply_single(&mut self, m: &Matrix2, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::InvalidGate(format!(
                "qubit {q} does not fit {} qubits",
                self.n_qubits
            )));
        }
        let mask = 1usize << q;
        let m = &m.0;
        for k in 0..(self.amps.len() >> 1) {
            let i0 = insert_zero_bit(k, q);
            let i1 = i0 | mask;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    fn check_same_dim(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn insert_zero_bit(k: usize, bit: usize) -> usize {
    let low = k & ((1usize << bit) - 1);
    ((k >> bit) << (bit + 1)) | low
}

/// Smallest `n ≥ 1` with `2ⁿ ≥ len`.
pub fn qubits_for_len(len: usize) -> usize {
    let n = len.next_power_of_two().trailing_zeros() as usize;
    n.max(1)
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitRange(n));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitGate {
    pub matrix: Matrix4,
    pub qa: usize,
    pub qb: usize,
}

impl TwoQubitGate {
    /// A gate whose matrix is unitary within [`GATE_UNITARITY_TOL`].
    pub fn new(matrix: Matrix4, qa: usize, qb: usize) -> Result<Self> {
        if qa == qb {
            return Err(Error::InvalidGate(format!("both targets are qubit {qa}")));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("gate matrix"));
        }
        let defect = unitarity_defect(&matrix);
        if defect > GATE_UNITARITY_TOL {
            return Err(Error::InvalidGate(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
        Ok(TwoQubitGate { matrix, qa, qb })
    }

    pub fn identity(qa: usize, qb: usize) -> Result<Self> {
        Self::new(Matrix4::identity(), qa, qb)
    }

    pub fn adjoint(&self) -> TwoQubitGate {
        TwoQubitGate {
            matrix: self.matrix.adjoint(),
            qa: self.qa,
            qb: self.qb,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<TwoQubitGate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(Circuit {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<TwoQubitGate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Gates in operator order (`gates()[0]` is `U_1`, applied last).
    pub fn gates(&self) -> &[TwoQubitGate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Append `U_{M+1}`, which acts before every existing gate.
    pub fn push(&mut self, gate: TwoQubitGate) -> Result<()> {
        if gate.qa.max(gate.qb) >= self.n_qubits {
            return Err(Error::InvalidGate(format!(
                "gate on ({}, {}) does not fit {} qubits",
                gate.qa, gate.qb, self.n_qubits
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub(crate) fn gates_mut(&mut self) -> &mut [TwoQubitGate] {
        &mut self.gates
    }

    /// Gates in the order they act on the ket (`U_M` first).
    pub fn execution_order(&self) -> impl DoubleEndedIterator<Item = &TwoQubitGate> {
        self.gates.iter().rev()
    }

    /// `C · |initial⟩`.
    pub fn run(&self, initial: &StateVector) -> Result<StateVector> {
        if initial.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: initial.n_qubits(),
            });
        }
        let mut state = initial.clone();
        for g in self.execution_order() {
            state.apply_matrix(&g.matrix, g.qa, g.qb);
        }
        Ok(state)
    }

    /// `C · |0ⁿ⟩`.
    pub fn run_zero(&self) -> StateVector {
        let zero = StateVector::zero(self.n_qubits).expect("qubit count validated at construction");
        self.run(&zero).expect("dimensions match by construction")
    }

    /// `C† · |state⟩`, without materializing the dagger circuit.
    pub fn run_adjoint(&self, state: &StateVector) -> Result<StateVector> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: state.n_qubits(),
            });
        }
        let mut s = state.clone();
        for g in &self.gates {
            s.apply_matrix_adjoint(&g.matrix, g.qa, g.qb);
        }
        Ok(s)
    }

    /// `C†`: gates reversed, each conjugate-transposed.
    pub fn dagger(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(TwoQubitGate::adjoint).collect(),
        }
    }

    /// The operator product `self · other` (other acts first).
    pub fn compose(&self, other: &Circuit) -> Result<Circuit> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates,
        })
    }
}
