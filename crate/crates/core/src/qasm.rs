//! QASM serialization in two dialects.
//!
//! The dense dialect writes every gate as a raw 4×4 matrix:
//!
//! ```text
//! DenseMatrix(2,0,r00,i00,r01,i01,...,r33,i33) q[a],q[b];
//! ```
//!
//! Entries are row-major, index `2·bit(a) + bit(b)`, real part before
//! imaginary part, six decimals. The base dialect uses only `u3` and `cx`
//! and runs on any OpenQASM 2.0 toolchain.
//!
//! Statements are written in execution order, so the first line acts first
//! on `|0…0⟩`. A [`Circuit`] stores the opposite (operator) order.

mod expr;
mod kak;
mod tokens;

pub use tokens::{round_text, tokenize, NumberStyle, TokenOptions, TokenStream};

use crate::error::{Error, Result};
use crate::smallalg::{nearest_unitary, unitarity_defect, Matrix2, Matrix4, C64};
use crate::statevec::{Circuit, TwoQubitGate, MAX_QUBITS};
use kak::{Op, Wire};
use std::fmt::Write as _;

/// Largest unitarity defect accepted for a parsed dense matrix. Six-decimal
/// printing alone leaves defects around 1e-6.
pub const DENSE_DEFECT_TOL: f64 = 1e-3;

/// Decimal places of dense matrix entries.
pub const DENSE_DECIMALS: usize = 6;

const ANGLE_DECIMALS: usize = 12;

/// Prefix of base-dialect file names.
pub const BASE_PREFIX: &str = "base_";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    Dense,
    Base,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    /// A 4×4 matrix kept as the 32 decimal strings it was written with.
    Dense {
        entries: Vec<String>,
        qa: usize,
        qb: usize,
    },
    U3 {
        theta: f64,
        phi: f64,
        lambda: f64,
        qubit: usize,
    },
    Cx {
        control: usize,
        target: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statement {
    /// 1-based source line.
    pub line: usize,
    pub instruction: Instruction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QasmDocument {
    pub dialect: Dialect,
    pub n_qubits: usize,
    pub header: Vec<String>,
    pub statements: Vec<Statement>,
    source: String,
}

impl QasmDocument {
    pub fn text(&self) -> &str {
        &self.source
    }

    /// Rebuild the circuit. Dense matrices are checked against
    /// [`DENSE_DEFECT_TOL`] and projected onto the nearest unitary; base
    /// gates are fused back into two-qubit gates at each `cx`.
    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut executed = match self.dialect {
            Dialect::Dense => self.dense_gates()?,
            Dialect::Base => self.fused_gates()?,
        };
        executed.reverse();
        Circuit::from_gates(self.n_qubits, executed)
    }

    fn dense_gates(&self) -> Result<Vec<TwoQubitGate>> {
        let mut out = Vec::with_capacity(self.statements.len());
        for st in &self.statements {
            let Instruction::Dense { entries, qa, qb } = &st.instruction else {
                unreachable!("dense document holds only dense statements");
            };
            let m = dense_matrix(entries, st.line)?;
            let defect = unitarity_defect(&m);
            if defect > DENSE_DEFECT_TOL {
                return Err(Error::Validation {
                    line: st.line,
                    message: format!("matrix is not unitary (defect {defect:.3e})"),
                });
            }
            let u = nearest_unitary(&m).map_err(|e| Error::Validation {
                line: st.line,
                message: e.to_string(),
            })?;
            out.push(gate_at(u, *qa, *qb, st.line)?);
        }
        Ok(out)
    }

    fn fused_gates(&self) -> Result<Vec<TwoQubitGate>> {
        let mut pending: Vec<Option<Matrix2>> = vec![None; self.n_qubits];
        let mut out = Vec::new();
        for st in &self.statements {
            match st.instruction {
                Instruction::U3 {
                    theta,
                    phi,
                    lambda,
                    qubit,
                } => {
                    let m = Matrix2::u3(theta, phi, lambda);
                    let slot = &mut pending[qubit];
                    *slot = Some(slot.map_or(m, |prev| m * prev));
                }
                Instruction::Cx { control, target } => {
                    let before = Matrix4::kron(
                        &pending[control].take().unwrap_or_else(Matrix2::identity),
                        &pending[target].take().unwrap_or_else(Matrix2::identity),
                    );
                    out.push(gate_at(
                        Matrix4::cnot() * before,
                        control,
                        target,
                        st.line,
                    )?);
                }
                Instruction::Dense { .. } => {
                    unreachable!("base document holds no dense statements")
                }
            }
        }
        let last = self.statements.last().map_or(0, |s| s.line);
        for (q, m) in pending.into_iter().enumerate() {
            if let Some(m) = m {
                let other = if q == 0 { 1 } else { 0 };
                out.push(gate_at(
                    Matrix4::kron(&m, &Matrix2::identity()),
                    q,
                    other,
                    last,
                )?);
            }
        }
        Ok(out)
    }
}

fn gate_at(m: Matrix4, qa: usize, qb: usize, line: usize) -> Result<TwoQubitGate> {
    TwoQubitGate::new(m, qa, qb).map_err(|e| Error::Validation {
        line,
        message: e.to_string(),
    })
}

fn dense_matrix(entries: &[String], line: usize) -> Result<Matrix4> {
    let mut m = Matrix4::zeros();
    for k in 0..16 {
        let re = number(&entries[2 * k], line)?;
        let im = number(&entries[2 * k + 1], line)?;
        m.0[k / 4][k % 4] = C64::new(re, im);
    }
    Ok(m)
}

fn number(s: &str, line: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Parse {
            line,
            message: format!("`{s}` is not a number"),
        }),
    }
}

fn header(n_qubits: usize) -> Vec<String> {
    vec![
        "OPENQASM 2.0;".to_string(),
        "include \"qelib1.inc\";".to_string(),
        format!("qreg q[{n_qubits}];"),
    ]
}

/// Fixed-point text with `-0.000…` printed unsigned.
pub(crate) fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn assemble(
    dialect: Dialect,
    n_qubits: usize,
    statements: Vec<(Instruction, String)>,
) -> QasmDocument {
    let header = header(n_qubits);
    let mut source = String::new();
    for h in &header {
        source.push_str(h);
        source.push('\n');
    }
    let first = header.len() + 1;
    let statements = statements
        .into_iter()
        .enumerate()
        .map(|(k, (instruction, text))| {
            source.push_str(&text);
            source.push('\n');
            Statement {
                line: first + k,
                instruction,
            }
        })
        .collect();
    QasmDocument {
        dialect,
        n_qubits,
        header,
        statements,
        source,
    }
}

/// One `DenseMatrix` line per gate, in execution order.
pub fn emit_dense(circuit: &Circuit) -> QasmDocument {
    let statements = circuit
        .execution_order()
        .map(|g| {
            let entries: Vec<String> = g
                .matrix
                .to_flat()
                .iter()
                .flat_map(|z| [fixed(z.re, DENSE_DECIMALS), fixed(z.im, DENSE_DECIMALS)])
                .collect();
            let text = format!(
                "DenseMatrix(2,0,{}) q[{}],q[{}];",
                entries.join(","),
                g.qa,
                g.qb
            );
            (
                Instruction::Dense {
                    entries,
                    qa: g.qa,
                    qb: g.qb,
                },
                text,
            )
        })
        .collect();
    assemble(Dialect::Dense, circuit.n_qubits(), statements)
}

/// Every gate rewritten with `u3` and at most three `cx`.
pub fn emit_base(circuit: &Circuit) -> Result<QasmDocument> {
    let mut statements = Vec::new();
    for g in circuit.execution_order() {
        let wire = |w: Wire| if w == Wire::First { g.qa } else { g.qb };
        for op in kak::decompose(&g.matrix)? {
            match op {
                Op::Single(w, m) => {
                    let qubit = wire(w);
                    let [theta, phi, lambda] =
                        u3_angles(&m).map(|a| parse_back(&fixed(a, ANGLE_DECIMALS)));
                    let text = format!(
                        "u3({},{},{}) q[{qubit}];",
                        fixed(theta, ANGLE_DECIMALS),
                        fixed(phi, ANGLE_DECIMALS),
                        fixed(lambda, ANGLE_DECIMALS)
                    );
                    statements.push((
                        Instruction::U3 {
                            theta,
                            phi,
                            lambda,
                            qubit,
                        },
                        text,
                    ));
                }
                Op::Cx(c) => {
                    let control = wire(c);
                    let target = if c == Wire::First { g.qb } else { g.qa };
                    let text = format!("cx q[{control}],q[{target}];");
                    statements.push((Instruction::Cx { control, target }, text));
                }
            }
        }
    }
    Ok(assemble(Dialect::Base, circuit.n_qubits(), statements))
}

fn parse_back(s: &str) -> f64 {
    s.parse().expect("fixed() prints a parseable number")
}

/// `(θ, φ, λ)` with `m ∝ u3(θ, φ, λ)`.
fn u3_angles(m: &Matrix2) -> [f64; 3] {
    const EPS: f64 = 1e-12;
    let [[a, b], [c, d]] = m.0;
    let theta = 2.0 * c.norm().atan2(a.norm());
    if c.norm() < EPS {
        [theta, 0.0, d.arg() - a.arg()]
    } else if a.norm() < EPS {
        [theta, 0.0, (-b).arg() - c.arg()]
    } else {
        [theta, c.arg() - a.arg(), (-b).arg() - a.arg()]
    }
}

/// Syntax-check QASM text and detect its dialect. Matrices are not
/// validated here; [`QasmDocument::to_circuit`] does that.
pub fn parse_document(text: &str) -> Result<QasmDocument> {
    let mut header = Vec::new();
    let mut statements = Vec::new();
    let mut declared: Option<(usize, usize)> = None;
    let mut dialect: Option<(Dialect, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split("//").next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line, message };
        let Some(stmt) = body.strip_suffix(';') else {
            return Err(parse_err(format!("missing `;` after `{body}`")));
        };
        let stmt = stmt.trim();
        if stmt.starts_with("OPENQASM") || stmt.starts_with("include") {
            header.push(body.to_string());
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("qreg") {
            let (name, size) =
                register(rest.trim()).ok_or_else(|| parse_err(format!("bad register `{stmt}`")))?;
            if name != "q" || declared.is_some() {
                return Err(parse_err("expected a single register named `q`".into()));
            }
            if size == 0 || size > MAX_QUBITS {
                return Err(parse_err(format!("register size {size} out of range")));
            }
            declared = Some((size, line));
            header.push(body.to_string());
            continue;
        }
        let instruction = instruction(stmt).map_err(parse_err)?;
        let kind = match instruction {
            Instruction::Dense { .. } => Dialect::Dense,
            _ => Dialect::Base,
        };
        match dialect {
            None => dialect = Some((kind, line)),
            Some((d, first)) if d != kind => {
                return Err(parse_err(format!(
                    "{kind:?} statement in a {d:?} document (first statement on line {first})"
                )));
            }
            _ => {}
        }
        statements.push(Statement { line, instruction });
    }

    let used = statements
        .iter()
        .flat_map(|s| qubits(&s.instruction))
        .max()
        .map_or(2, |q| (q + 1).max(2));
    let n_qubits = match declared {
        Some((size, line)) => {
            if let Some(bad) = statements
                .iter()
                .find(|s| qubits(&s.instruction).iter().any(|&q| q >= size))
            {
                return Err(Error::Parse {
                    line: bad.line,
                    message: format!(
                        "qubit index out of range for q[{size}] declared on line {line}"
                    ),
                });
            }
            size
        }
        None => used,
    };
    if n_qubits > MAX_QUBITS {
        return Err(Error::QubitRange(n_qubits));
    }
    Ok(QasmDocument {
        dialect: dialect.map_or(Dialect::Dense, |(d, _)| d),
        n_qubits,
        header,
        statements,
        source: text.to_string(),
    })
}

/// Parse either dialect straight to a circuit.
pub fn parse(text: &str) -> Result<Circuit> {
    parse_document(text)?.to_circuit()
}

fn qubits(ins: &Instruction) -> Vec<usize> {
    match *ins {
        Instruction::Dense { qa, qb, .. } => vec![qa, qb],
        Instruction::U3 { qubit, .. } => vec![qubit],
        Instruction::Cx { control, target } => vec![control, target],
    }
}

/// `name[size]`
fn register(s: &str) -> Option<(&str, usize)> {
    let (name, rest) = s.split_once('[')?;
    let size = rest.strip_suffix(']')?.trim().parse().ok()?;
    Some((name.trim(), size))
}

fn qubit_ref(s: &str) -> std::result::Result<usize, String> {
    match register(s.trim()) {
        Some(("q", k)) => Ok(k),
        _ => Err(format!(
            "expected a qubit like `q[0]`, found `{}`",
            s.trim()
        )),
    }
}

fn qubit_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two qubits, found `{}`", s.trim()))?;
    let (a, b) = (qubit_ref(a)?, qubit_ref(b)?);
    if a == b {
        return Err(format!("gate acts twice on q[{a}]"));
    }
    Ok((a, b))
}

/// Split `name(args) operands` into its three parts.
fn call(stmt: &str) -> std::result::Result<(&str, Option<&str>, &str), String> {
    let end = stmt
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(stmt.len());
    let (name, rest) = (&stmt[..end], stmt[end..].trim_start());
    if name.is_empty() {
        return Err(format!("unrecognized statement `{stmt}`"));
    }
    let Some(inner) = rest.strip_prefix('(') else {
        return Ok((name, None, rest));
    };
    let close = inner.rfind(')').ok_or_else(|| "unclosed `(`".to_string())?;
    Ok((name, Some(&inner[..close]), inner[close + 1..].trim()))
}

fn instruction(stmt: &str) -> std::result::Result<Instruction, String> {
    let (name, args, operands) = call(stmt)?;
    match (name, args) {
        ("DenseMatrix", Some(args)) => {
            let fields: Vec<&str> = args.split(',').map(str::trim).collect();
            if fields.len() != 34 {
                return Err(format!(
                    "DenseMatrix needs 2 sizes and 32 matrix reals, found {} reals",
                    fields.len().saturating_sub(2)
                ));
            }
            if fields[0] != "2" || fields[1] != "0" {
                return Err(format!(
                    "only DenseMatrix(2,0,...) is supported, found ({},{})",
                    fields[0], fields[1]
                ));
            }
            if let Some(bad) = fields[2..]
                .iter()
                .find(|f| f.parse::<f64>().map_or(true, |x| !x.is_finite()))
            {
                return Err(format!("`{bad}` is not a number"));
            }
            let (qa, qb) = qubit_pair(operands)?;
            Ok(Instruction::Dense {
                entries: fields[2..].iter().map(|s| s.to_string()).collect(),
                qa,
                qb,
            })
        }
        ("u3" | "U", Some(args)) => {
            let angles = args
                .split(',')
                .map(expr::angle)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let [theta, phi, lambda] = angles[..] else {
                return Err(format!("u3 takes 3 angles, found {}", angles.len()));
            };
            Ok(Instruction::U3 {
                theta,
                phi,
                lambda,
                qubit: qubit_ref(operands)?,
            })
        }
        ("cx" | "CX", None) => {
            let (control, target) = qubit_pair(operands)?;
            Ok(Instruction::Cx { control, target })
        }
        _ => Err(format!("unsupported statement `{stmt}`")),
    }
}

/// The dense statement for `m` on `(qa, qb)`.
pub fn dense_line(m: &Matrix4, qa: usize, qb: usize) -> String {
    let mut s = String::from("DenseMatrix(2,0");
    for z in m.to_flat() {
        let _ = write!(
            s,
            ",{},{}",
            fixed(z.re, DENSE_DECIMALS),
            fixed(z.im, DENSE_DECIMALS)
        );
    }
    let _ = write!(s, ") q[{qa}],q[{qb}];");
    s
}
