//! Encoded datasets on disk.
//!
//! A dataset directory is named `[kind]_[type]_[tier]` and holds one file per
//! record in each of four subdirectories:
//!
//! ```text
//! train_orig_mnist_784_f80/
//!   manifest.txt
//!   fidelity/00000.txt   recorded fidelity
//!   label/00000.txt      class id
//!   qasm/00000.qasm      circuit (base_00000.qasm in base_* kinds)
//!   state/00000.txt      target state, one `re,im` pair per line
//! ```
//!
//! The recorded fidelity is measured between the circuit as written and the
//! state as written, so [`validate_dataset`] can check it from the files
//! alone.

mod images;

pub use images::{
    augment, crop_resize, idx_labels_path, load_csv, load_idx, load_images, rotate, shift,
    AugmentParams, Augmentation, ImageFormat, LabeledImages, CLASSES, PIXELS, SIDE,
};

use crate::aqce::{encode_state, fidelity, EncodeParams, FidelityTier};
use crate::error::{Error, Result};
use crate::qasm::{self, emit_base, emit_dense, fixed};
use crate::smallalg::C64;
use crate::statevec::{Circuit, StateVector};
use rayon::prelude::*;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Decimal places of state files.
pub const STATE_DECIMALS: usize = 6;
/// Allowed gap between recorded and re-measured fidelity.
pub const FIDELITY_TOL: f64 = 1e-6;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUBDIRS: [&str; 4] = ["fidelity", "label", "qasm", "state"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataKind {
    TrainOrig,
    BaseTrain,
    Train,
    Test,
    BaseTest,
}

impl DataKind {
    pub const ALL: [DataKind; 5] = [
        DataKind::TrainOrig,
        DataKind::BaseTrain,
        DataKind::Train,
        DataKind::Test,
        DataKind::BaseTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DataKind::TrainOrig => "train_orig",
            DataKind::BaseTrain => "base_train",
            DataKind::Train => "train",
            DataKind::Test => "test",
            DataKind::BaseTest => "base_test",
        }
    }

    /// Circuits written with `u3`/`cx` instead of dense matrices.
    pub fn is_base(self) -> bool {
        matches!(self, DataKind::BaseTrain | DataKind::BaseTest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataType {
    Mnist784,
    FashionMnist,
    KuzushijiMnist,
}

impl DataType {
    pub const ALL: [DataType; 3] = [
        DataType::Mnist784,
        DataType::FashionMnist,
        DataType::KuzushijiMnist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DataType::Mnist784 => "mnist_784",
            DataType::FashionMnist => "Fashion-MNIST",
            DataType::KuzushijiMnist => "Kuzushiji-MNIST",
        }
    }
}

macro_rules! parse_by_name {
    ($ty:ty, $what:literal) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                <$ty>::ALL
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| {
                        Error::InvalidParams(format!(concat!("unknown ", $what, " `{}`"), s))
                    })
            }
        }
    };
}

parse_by_name!(DataKind, "data kind");
parse_by_name!(DataType, "data type");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub kind: DataKind,
    pub data_type: DataType,
    pub tier: FidelityTier,
    pub count: usize,
}

impl Manifest {
    /// `[kind]_[type]_[tier]`
    pub fn name(&self) -> String {
        format!(
            "{}_{}_{}",
            self.kind.name(),
            self.data_type.name(),
            self.tier.tag()
        )
    }

    pub fn archive_name(&self) -> String {
        format!("{}.zip", self.name())
    }

    /// Record file name inside `qasm/`.
    pub fn qasm_file(&self, index: usize) -> String {
        let prefix = if self.kind.is_base() {
            qasm::BASE_PREFIX
        } else {
            ""
        };
        format!("{prefix}{}.qasm", record_stem(index))
    }
}

pub fn record_stem(index: usize) -> String {
    format!("{index:05}")
}

/// A manifest plus the summary written next to it.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestFile {
    pub manifest: Manifest,
    pub summary: Summary,
}

impl fmt::Display for ManifestFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.manifest;
        writeln!(f, "name {}", m.name())?;
        writeln!(f, "archive {}", m.archive_name())?;
        writeln!(f, "kind {}", m.kind.name())?;
        writeln!(f, "type {}", m.data_type.name())?;
        writeln!(f, "fidelity {}", m.tier.tag())?;
        writeln!(f, "count {}", m.count)?;
        writeln!(f, "min_fidelity {:.10}", self.summary.min_fidelity)?;
        writeln!(f, "mean_fidelity {:.10}", self.summary.mean_fidelity)?;
        writeln!(f, "below_tier {}", self.summary.below_tier)
    }
}

impl ManifestFile {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let get = |key: &str| -> std::result::Result<String, String> {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| format!("missing `{key}`"))
        };
        let num = |v: String, key: &str| v.parse::<f64>().map_err(|_| format!("bad {key} `{v}`"));
        let kind: DataKind = get("kind")?.parse().map_err(|e: Error| e.to_string())?;
        let data_type: DataType = get("type")?.parse().map_err(|e: Error| e.to_string())?;
        let tag = get("fidelity")?;
        let tier =
            FidelityTier::from_tag(&tag).ok_or_else(|| format!("unknown fidelity tier `{tag}`"))?;
        let count: usize = get("count")?.parse().map_err(|_| "bad count".to_string())?;
        let summary = Summary {
            count,
            min_fidelity: num(get("min_fidelity")?, "min_fidelity")?,
            mean_fidelity: num(get("mean_fidelity")?, "mean_fidelity")?,
            below_tier: get("below_tier")?
                .parse()
                .map_err(|_| "bad below_tier".to_string())?,
        };
        let manifest = Manifest {
            kind,
            data_type,
            tier,
            count,
        };
        if let Ok(name) = get("name") {
            if name != manifest.name() {
                return Err(format!(
                    "name `{name}` does not match `{}`",
                    manifest.name()
                ));
            }
        }
        Ok(ManifestFile { manifest, summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataRecord {
    pub index: usize,
    pub label: u32,
    pub fidelity: f64,
    pub qasm_dense: String,
    pub qasm_base: Option<String>,
    /// Target amplitudes as written to the state file.
    pub state: Option<Vec<C64>>,
}

impl DataRecord {
    /// Recorded fidelity reaches `target`, allowing for the rounding of the
    /// written circuit and state.
    pub fn meets(&self, target: f64) -> bool {
        self.fidelity + FIDELITY_TOL >= target
    }
}

/// Counts and fidelity statistics of a set of records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    /// Records whose fidelity is under the tier threshold.
    pub below_tier: usize,
}

impl Summary {
    pub fn of(records: &[DataRecord], tier: FidelityTier) -> Self {
        let n = records.len();
        let min = records
            .iter()
            .map(|r| r.fidelity)
            .fold(f64::INFINITY, f64::min);
        let mean = if n == 0 {
            0.0
        } else {
            records.iter().map(|r| r.fidelity).sum::<f64>() / n as f64
        };
        Summary {
            count: n,
            min_fidelity: if n == 0 { 0.0 } else { min },
            mean_fidelity: mean,
            below_tier: records
                .iter()
                .filter(|r| !r.meets(tier.threshold()))
                .count(),
        }
    }
}

/// `re,im` lines with [`STATE_DECIMALS`] places.
pub fn state_text(amplitudes: &[C64]) -> String {
    let mut s = String::with_capacity(amplitudes.len() * 20);
    for z in amplitudes {
        s.push_str(&fixed(z.re, STATE_DECIMALS));
        s.push(',');
        s.push_str(&fixed(z.im, STATE_DECIMALS));
        s.push('\n');
    }
    s
}

pub fn parse_state(text: &str) -> std::result::Result<Vec<C64>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let (re, im) = l
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected `re,im`", k + 1))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: bad number `{v}`", k + 1))
            };
            Ok(C64::new(parse(re)?, parse(im)?))
        })
        .collect()
}

/// Fidelity between the written circuit and the written state.
fn written_fidelity(qasm_text: &str, state: &[C64]) -> Result<f64> {
    let circuit = qasm::parse(qasm_text)?;
    let target = StateVector::from_complex(state)?;
    fidelity(&circuit, &target)
}

/// Encode one sample and serialize it. With `base`, the base-dialect text is
/// produced too.
pub fn build_record(
    index: usize,
    label: u32,
    x: &[f64],
    params: &EncodeParams,
    base: bool,
) -> Result<DataRecord> {
    let target = StateVector::from_classical(x)?;
    let result = encode_state(&target, params)?;
    record_from_circuit(index, label, &result.circuit, &target, base)
}

pub fn record_from_circuit(
    index: usize,
    label: u32,
    circuit: &Circuit,
    target: &StateVector,
    base: bool,
) -> Result<DataRecord> {
    let qasm_dense = emit_dense(circuit).text().to_string();
    let qasm_base = if base {
        Some(emit_base(circuit)?.text().to_string())
    } else {
        None
    };
    let state_txt = state_text(target.amplitudes());
    let state = parse_state(&state_txt).expect("state_text output parses");
    let fidelity = written_fidelity(&qasm_dense, &state)?;
    Ok(DataRecord {
        index,
        label,
        fidelity,
        qasm_dense,
        qasm_base,
        state: Some(state),
    })
}

/// Encode many samples in parallel. Results keep input order.
pub fn build_records(
    vectors: &[Vec<f64>],
    labels: &[u32],
    params: &EncodeParams,
    base: bool,
) -> Vec<Result<DataRecord>> {
    vectors
        .par_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (x, &label))| build_record(i, label, x, params, base))
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write records under `out/<manifest name>/` and return the summary.
pub fn materialize(
    records: &[DataRecord],
    manifest: &Manifest,
    out: &Path,
) -> Result<(PathBuf, Summary)> {
    if manifest.count != records.len() {
        return Err(Error::InvalidParams(format!(
            "manifest counts {} records, got {}",
            manifest.count,
            records.len()
        )));
    }
    let root = out.join(manifest.name());
    for sub in SUBDIRS {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    records.par_iter().try_for_each(|r| -> Result<()> {
        let stem = record_stem(r.index);
        let qasm_text = if manifest.kind.is_base() {
            r.qasm_base.as_deref().ok_or_else(|| {
                Error::InvalidParams(format!("record {} has no base-dialect circuit", r.index))
            })?
        } else {
            &r.qasm_dense
        };
        write(
            &root.join("fidelity").join(format!("{stem}.txt")),
            &format!("{:.10}\n", r.fidelity),
        )?;
        write(
            &root.join("label").join(format!("{stem}.txt")),
            &format!("{}\n", r.label),
        )?;
        write(
            &root.join("qasm").join(manifest.qasm_file(r.index)),
            qasm_text,
        )?;
        if let Some(state) = &r.state {
            write(
                &root.join("state").join(format!("{stem}.txt")),
                &state_text(state),
            )?;
        }
        Ok(())
    })?;
    let summary = Summary::of(records, manifest.tier);
    let file = ManifestFile {
        manifest: *manifest,
        summary,
    };
    write(&root.join(MANIFEST_FILE), &file.to_string())?;
    Ok((root, summary))
}

/// A loaded dataset: manifest and circuits with their labels.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub root: PathBuf,
    pub manifest: ManifestFile,
    pub labels: Vec<u32>,
    pub circuits: Vec<Circuit>,
}

pub fn read_manifest(root: &Path) -> Result<ManifestFile> {
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    ManifestFile::parse(&text).map_err(|m| Error::format(&path, m))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_label(path: &Path) -> Result<u32> {
    let text = read_text(path)?;
    text.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("bad label `{}`", text.trim())))
}

/// Labels and parsed circuits of every record, in index order.
pub fn load_dataset(root: &Path) -> Result<LoadedDataset> {
    let manifest = read_manifest(root)?;
    let m = manifest.manifest;
    let loaded = (0..m.count)
        .into_par_iter()
        .map(|i| -> Result<(u32, Circuit)> {
            let label = read_label(&root.join("label").join(format!("{}.txt", record_stem(i))))?;
            let path = root.join("qasm").join(m.qasm_file(i));
            let circuit =
                qasm::parse(&read_text(&path)?).map_err(|e| Error::format(&path, e.to_string()))?;
            Ok((label, circuit))
        })
        .collect::<Result<Vec<_>>>()?;
    let (labels, circuits) = loaded.into_iter().unzip();
    Ok(LoadedDataset {
        root: root.to_path_buf(),
        manifest,
        labels,
        circuits,
    })
}

impl DataKind {
    /// The base-dialect counterpart of a dense kind.
    pub fn base_counterpart(self) -> Option<DataKind> {
        match self {
            DataKind::TrainOrig | DataKind::Train => Some(DataKind::BaseTrain),
            DataKind::Test => Some(DataKind::BaseTest),
            DataKind::BaseTrain | DataKind::BaseTest => None,
        }
    }
}

/// Rewrite a dense dataset as its `base_*` counterpart under `out`.
pub fn convert_to_base(root: &Path, out: &Path) -> Result<(PathBuf, Summary)> {
    let manifest = read_manifest(root)?.manifest;
    let kind = manifest.kind.base_counterpart().ok_or_else(|| {
        Error::UnsupportedDialect(format!(
            "{} already holds base-dialect circuits",
            manifest.kind.name()
        ))
    })?;
    let loaded = load_dataset(root)?;
    let records = loaded
        .circuits
        .par_iter()
        .zip(&loaded.labels)
        .enumerate()
        .map(|(i, (circuit, &label))| {
            let path = root.join("state").join(format!("{}.txt", record_stem(i)));
            let state = parse_state(&read_text(&path)?).map_err(|m| Error::format(&path, m))?;
            let target = StateVector::from_complex(&state)?;
            record_from_circuit(i, label, circuit, &target, true)
        })
        .collect::<Result<Vec<_>>>()?;
    materialize(&records, &Manifest { kind, ..manifest }, out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
    /// Records under the tier threshold (consistent, but weaker than the
    /// directory name promises).
    pub below_tier: Vec<PathBuf>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-parse and re-simulate every record and compare with what is recorded.
pub fn validate_dataset(root: &Path) -> Result<ValidationReport> {
    let manifest = read_manifest(root)?;
    let m = manifest.manifest;
    let results: Vec<(Vec<Violation>, Option<PathBuf>)> = (0..m.count)
        .into_par_iter()
        .map(|i| validate_record(root, &m, i))
        .collect();
    let mut report = ValidationReport {
        checked: m.count,
        ..Default::default()
    };
    for (v, low) in results {
        report.violations.extend(v);
        report.below_tier.extend(low);
    }
    Ok(report)
}

fn validate_record(root: &Path, m: &Manifest, index: usize) -> (Vec<Violation>, Option<PathBuf>) {
    let stem = record_stem(index);
    let mut out = Vec::new();
    let mut fail = |path: &Path, message: String| {
        out.push(Violation {
            path: path.to_path_buf(),
            message,
        })
    };

    let label_path = root.join("label").join(format!("{stem}.txt"));
    if let Err(e) = read_label(&label_path) {
        fail(&label_path, e.to_string());
    }
    let fid_path = root.join("fidelity").join(format!("{stem}.txt"));
    let recorded = read_text(&fid_path).and_then(|t| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|f| (0.0..=1.0 + FIDELITY_TOL).contains(f))
            .ok_or_else(|| Error::format(&fid_path, format!("bad fidelity `{}`", t.trim())))
    });
    let qasm_path = root.join("qasm").join(m.qasm_file(index));
    let circuit = read_text(&qasm_path).and_then(|t| {
        let doc = qasm::parse_document(&t)?;
        if (doc.dialect == qasm::Dialect::Base) != m.kind.is_base() && !doc.statements.is_empty() {
            return Err(Error::UnsupportedDialect(format!(
                "{:?} circuit in a {} dataset",
                doc.dialect,
                m.kind.name()
            )));
        }
        doc.to_circuit()
    });
    let state_path = root.join("state").join(format!("{stem}.txt"));
    let state = read_text(&state_path)
        .and_then(|t| parse_state(&t).map_err(|msg| Error::format(&state_path, msg)))
        .and_then(|s| StateVector::from_complex(&s));

    let mut low = None;
    match (&recorded, &circuit, &state) {
        (Ok(recorded), Ok(circuit), Ok(target)) => match fidelity(circuit, target) {
            Ok(measured) if (measured - recorded).abs() > FIDELITY_TOL => fail(
                &fid_path,
                format!("recorded fidelity {recorded:.10} but the circuit measures {measured:.10}"),
            ),
            Ok(_) => {
                if recorded + FIDELITY_TOL < m.tier.threshold() {
                    low = Some(fid_path.clone());
                }
            }
            Err(e) => fail(&qasm_path, e.to_string()),
        },
        _ => {
            if let Err(e) = &recorded {
                fail(&fid_path, e.to_string());
            }
            if let Err(e) = &circuit {
                fail(&qasm_path, e.to_string());
            }
            if let Err(e) = &state {
                fail(&state_path, e.to_string());
            }
        }
    }
    (out, low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_records(n: usize, base: bool) -> Vec<DataRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = EncodeParams::new(6, 3, 0.9);
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
                build_record(i, (i % 3) as u32, &x, &params, base).unwrap()
            })
            .collect()
    }

    fn manifest(kind: DataKind, count: usize) -> Manifest {
        Manifest {
            kind,
            data_type: DataType::Mnist784,
            tier: FidelityTier::F80,
            count,
        }
    }

    fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for e in std::fs::read_dir(&dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push((p.clone(), std::fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn names() {
        let m = Manifest {
            kind: DataKind::Test,
            data_type: DataType::Mnist784,
            tier: FidelityTier::F90,
            count: 1,
        };
        assert_eq!(m.name(), "test_mnist_784_f90");
        assert_eq!(m.archive_name(), "test_mnist_784_f90.zip");
        assert_eq!(m.qasm_file(7), "00007.qasm");
        let b = Manifest {
            kind: DataKind::BaseTrain,
            ..m
        };
        assert_eq!(b.name(), "base_train_mnist_784_f90");
        assert_eq!(b.qasm_file(7), "base_00007.qasm");
        for k in DataKind::ALL {
            assert_eq!(k.name().parse::<DataKind>().unwrap(), k);
        }
        for t in DataType::ALL {
            assert_eq!(t.name().parse::<DataType>().unwrap(), t);
        }
    }

    #[test]
    fn state_text_round_trip() {
        let amps = [
            C64::new(0.5, -0.0),
            C64::new(-0.25, 1e-9),
            C64::new(0.1234564, 0.0),
        ];
        let text = state_text(&amps);
        assert_eq!(
            text,
            "0.500000,0.000000\n-0.250000,0.000000\n0.123456,0.000000\n"
        );
        assert_eq!(parse_state(&text).unwrap()[1], C64::new(-0.25, 0.0));
        assert!(parse_state("1.0\n").is_err());
    }

    #[test]
    fn materialize_layout_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records(2, false);
        let m = manifest(DataKind::TrainOrig, 2);
        let (root, summary) = materialize(&records, &m, dir.path()).unwrap();
        assert_eq!(root, dir.path().join("train_orig_mnist_784_f80"));
        for sub in SUBDIRS {
            assert_eq!(
                std::fs::read_dir(root.join(sub)).unwrap().count(),
                2,
                "{sub}"
            );
        }
        assert_eq!(summary.count, 2);
        let first = snapshot(&root);
        materialize(&records, &m, dir.path()).unwrap();
        assert_eq!(snapshot(&root), first);

        let manifest = read_manifest(&root).unwrap();
        assert_eq!(manifest.manifest, m);
        let loaded = load_dataset(&root).unwrap();
        assert_eq!(loaded.labels, vec![0, 1]);
        assert_eq!(loaded.circuits.len(), 2);
    }

    #[test]
    fn validation_passes_then_catches_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records(3, true);
        for kind in [DataKind::TrainOrig, DataKind::BaseTest] {
            let (root, _) = materialize(&records, &manifest(kind, 3), dir.path()).unwrap();
            let report = validate_dataset(&root).unwrap();
            assert!(report.passed(), "{kind:?}: {:?}", report.violations);
            assert_eq!(report.checked, 3);
        }
        let root = dir.path().join("train_orig_mnist_784_f80");

        let fid = root.join("fidelity/00001.txt");
        std::fs::write(&fid, "0.9999\n").unwrap();
        let report = validate_dataset(&root).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, fid);
        assert!(report.violations[0]
            .message
            .contains("recorded fidelity 0.9999"));
        std::fs::write(&fid, format!("{:.10}\n", records[1].fidelity)).unwrap();

        let q = root.join("qasm/00002.qasm");
        let mut bytes = std::fs::read(&q).unwrap();
        let semi = bytes.iter().rposition(|&b| b == b';').unwrap();
        bytes[semi] = b':';
        std::fs::write(&q, bytes).unwrap();
        let report = validate_dataset(&root).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, q);
    }

    #[test]
    fn recorded_fidelity_tracks_in_memory_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..1.0)).collect();
        let target = StateVector::from_classical(&x).unwrap();
        let result = encode_state(&target, &EncodeParams::new(12, 4, 0.99)).unwrap();
        let rec = record_from_circuit(0, 0, &result.circuit, &target, false).unwrap();
        assert!((rec.fidelity - result.fidelity).abs() < 1e-4);
    }

    proptest::proptest! {
        #[test]
        fn state_text_round_trip_within_half_ulp_of_text(re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let back = parse_state(&state_text(&[C64::new(re, im)])).unwrap();
            proptest::prop_assert!((back[0].re - re).abs() <= 5e-7 + 1e-15);
            proptest::prop_assert!((back[0].im - im).abs() <= 5e-7 + 1e-15);
        }

        #[test]
        fn manifest_text_round_trip(kind in 0usize..5, ty in 0usize..3, tier in 0usize..3, count in 0usize..100_000, below in 0usize..10) {
            let file = ManifestFile {
                manifest: Manifest {
                    kind: DataKind::ALL[kind],
                    data_type: DataType::ALL[ty],
                    tier: FidelityTier::ALL[tier],
                    count,
                },
                summary: Summary { count, min_fidelity: 0.8125, mean_fidelity: 0.90625, below_tier: below },
            };
            proptest::prop_assert_eq!(ManifestFile::parse(&file.to_string()).unwrap(), file);
        }
    }

    #[test]
    fn base_kind_needs_base_text() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records(1, false);
        assert!(materialize(&records, &manifest(DataKind::BaseTrain, 1), dir.path()).is_err());
        let (root, _) = materialize(&records, &manifest(DataKind::Test, 1), dir.path()).unwrap();
        let (base, _) = convert_to_base(&root, dir.path()).unwrap();
        assert!(base.ends_with("base_test_mnist_784_f80"));
        assert!(validate_dataset(&base).unwrap().passed());
        assert!(convert_to_base(&base, dir.path()).is_err());
        assert!(materialize(&records, &manifest(DataKind::Train, 2), dir.path()).is_err());
    }
}
