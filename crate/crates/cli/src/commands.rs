use crate::args::*;
use crate::{usage, Failure};
use anyhow::{anyhow, bail, Context};
use aqce_core::aqce::EncodeParams;
use aqce_core::dataset::{self, AugmentParams, DataRecord, Manifest};
use aqce_core::qasm::{self, TokenOptions};
use aqce_core::qkernel::{self, GramMatrix, KernelCache};
use aqce_core::svm::{self, KernelMatrix, MulticlassModel, SvmParams};
use log::{info, warn};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Encode(a) => encode(a),
        Command::ToBase(a) => to_base(a),
        Command::Tokenize(a) => tokenize(a),
        Command::Gram(a) => gram(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Validate(a) => validate(a),
    }
}

fn encode_params(a: &EncodeArgs) -> Result<EncodeParams, Failure> {
    let mut p = EncodeParams::for_tier(a.tier);
    if let Some(m) = a.max_gates {
        p.max_gates = m;
    }
    if let Some(d) = a.delta {
        p.delta = d;
        p.initial_gates = d;
    }
    if let Some(m0) = a.initial_gates {
        p.initial_gates = m0;
    }
    if let Some(f) = a.target_fidelity {
        p.target_fidelity = f;
    }
    if let Some(n) = a.sweeps {
        p.sweeps = n;
    }
    p.stop_at_target = !a.full_sweeps;
    if let Err(e) = p.validate() {
        return usage(e.to_string());
    }
    if p.target_fidelity < a.tier.threshold() {
        return usage(format!(
            "target fidelity {} is below the {} threshold {}",
            p.target_fidelity,
            a.tier.tag(),
            a.tier.threshold()
        ));
    }
    Ok(p)
}

fn encode(a: EncodeArgs) -> Outcome {
    let params = encode_params(&a)?;
    let format = a
        .format
        .unwrap_or_else(|| dataset::ImageFormat::infer(&a.input));
    let mut images = dataset::load_images(&a.input, format)?;
    if let Some(n) = a.limit {
        images = images.truncated(n);
    }
    if images.is_empty() {
        return Err(anyhow!("no records in {}", a.input.display()).into());
    }
    if let Some(op) = a.augment {
        let aug = AugmentParams::default();
        images.vectors = images
            .vectors
            .par_iter()
            .enumerate()
            .map(|(i, x)| dataset::augment(x, op, &aug, a.seed.wrapping_add(i as u64)))
            .collect();
    }
    let n = images.len();
    info!(
        "encoding {n} images at {} (budget {}, step {})",
        a.tier.tag(),
        params.max_gates,
        params.delta
    );
    let started = Instant::now();
    let base = a.kind.is_base();
    let encode_one = |i: usize| -> anyhow::Result<DataRecord> {
        let record = dataset::build_record(i, images.labels[i], &images.vectors[i], &params, base)
            .with_context(|| format!("record {i}"))?;
        if !a.keep_going && !record.meets(params.target_fidelity) {
            bail!(
                "record {i}: fidelity {:.6} is below the target {} (use --keep-going to keep it)",
                record.fidelity,
                params.target_fidelity
            );
        }
        Ok(record)
    };
    let records: Vec<DataRecord> = if a.keep_going {
        let mut kept = Vec::with_capacity(n);
        for outcome in (0..n).into_par_iter().map(encode_one).collect::<Vec<_>>() {
            match outcome {
                Ok(r) => kept.push(r),
                Err(e) => warn!("skipped {e:#}"),
            }
        }
        if kept.len() < n {
            warn!(
                "{} of {n} records skipped; indices are renumbered",
                n - kept.len()
            );
        }
        for (k, r) in kept.iter_mut().enumerate() {
            r.index = k;
        }
        kept
    } else {
        (0..n)
            .into_par_iter()
            .map(encode_one)
            .collect::<anyhow::Result<_>>()?
    };
    if records.is_empty() {
        return Err(anyhow!("no records could be encoded").into());
    }
    let manifest = Manifest {
        kind: a.kind,
        data_type: a.data_type,
        tier: a.tier,
        count: records.len(),
    };
    let (root, summary) = dataset::materialize(&records, &manifest, &a.out)?;
    info!(
        "encoded {} records in {:.1} s",
        records.len(),
        started.elapsed().as_secs_f64()
    );
    if summary.below_tier > 0 {
        warn!(
            "{} records are below the {} threshold",
            summary.below_tier,
            a.tier.tag()
        );
    }
    println!("dataset {}", root.display());
    println!("records {}", summary.count);
    println!("min_fidelity {:.6}", summary.min_fidelity);
    println!("mean_fidelity {:.6}", summary.mean_fidelity);
    println!("below_tier {}", summary.below_tier);
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_base(a: ToBaseArgs) -> Outcome {
    if a.input.is_dir() {
        let Some(out) = a.out else {
            return usage("converting a dataset needs --out <directory>");
        };
        let (root, summary) = dataset::convert_to_base(&a.input, &out)?;
        println!("dataset {}", root.display());
        println!("records {}", summary.count);
        return Ok(());
    }
    let circuit = qasm::parse(&read(&a.input)?).with_context(|| a.input.display().to_string())?;
    let doc = qasm::emit_base(&circuit)?;
    emit(a.out.as_deref(), doc.text())?;
    Ok(())
}

fn tokenize(a: TokenizeArgs) -> Outcome {
    let options = TokenOptions {
        decimals: a.decimals,
        style: a.style,
        imaginary: a.imaginary,
    };
    let tokens_of = |path: &Path| -> anyhow::Result<String> {
        let doc = qasm::parse_document(&read(path)?).with_context(|| path.display().to_string())?;
        let stream = qasm::tokenize(&doc, &options).with_context(|| path.display().to_string())?;
        Ok(stream.to_string())
    };
    if !a.input.is_dir() {
        emit(a.out.as_deref(), &tokens_of(&a.input)?)?;
        return Ok(());
    }
    let Some(out) = a.out else {
        return usage("tokenizing a dataset needs --out <directory>");
    };
    let manifest = dataset::read_manifest(&a.input)?.manifest;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    (0..manifest.count)
        .into_par_iter()
        .try_for_each(|i| -> anyhow::Result<()> {
            let text = tokens_of(&a.input.join("qasm").join(manifest.qasm_file(i)))?;
            write(
                &out.join(format!("{}.tokens", dataset::record_stem(i))),
                &text,
            )
        })?;
    println!("records {}", manifest.count);
    Ok(())
}

fn gram(a: GramArgs) -> Outcome {
    let data = dataset::load_dataset(&a.dataset)?;
    let mode = a.kernel.mode;
    let cache = match &a.cache {
        Some(path) => KernelCache::from_gram(&GramMatrix::load(path)?, mode),
        None => KernelCache::new(mode),
    };
    let started = Instant::now();
    let g = qkernel::gram_cached(&data.circuits, mode, &cache)?;
    info!(
        "{0}×{0} {1} Gram matrix in {2:.1} s",
        g.size(),
        mode.name(),
        started.elapsed().as_secs_f64()
    );
    g.check().context("Gram matrix failed its checks")?;
    g.save(&a.out)?;
    println!("size {}", g.size());
    println!("min_eigenvalue {:.3e}", g.min_eigenvalue());
    Ok(())
}

fn svm_params(a: &SvmArgs) -> Result<SvmParams, Failure> {
    if !(a.c_penalty.is_finite() && a.c_penalty > 0.0) {
        return usage(format!("--c must be positive, got {}", a.c_penalty));
    }
    if !(a.tolerance.is_finite() && a.tolerance > 0.0) {
        return usage(format!("--tolerance must be positive, got {}", a.tolerance));
    }
    if a.max_iterations == 0 {
        return usage("--max-iterations must be at least 1");
    }
    Ok(SvmParams {
        c_penalty: a.c_penalty,
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
    })
}

fn train(a: TrainArgs) -> Outcome {
    let params = svm_params(&a.svm)?;
    let data = dataset::load_dataset(&a.dataset)?;
    let mode = a.kernel.mode;
    let g = match &a.gram {
        Some(path) => {
            let g = GramMatrix::load(path)?;
            let hashes: Vec<String> = data
                .circuits
                .par_iter()
                .map(qkernel::circuit_hash)
                .collect();
            if g.sources != hashes {
                return Err(anyhow!(
                    "{} was not computed from {}",
                    path.display(),
                    a.dataset.display()
                )
                .into());
            }
            g
        }
        None => qkernel::gram(&data.circuits, mode)?,
    };
    let started = Instant::now();
    let model = svm::train_multiclass(
        &KernelMatrix::from_gram(&g),
        &data.labels,
        a.svm.strategy,
        &params,
    )?;
    info!(
        "trained {} binary models in {:.1} s",
        model.members.len(),
        started.elapsed().as_secs_f64()
    );
    for m in model.members.iter().filter(|m| !m.model.converged) {
        warn!(
            "model {} vs {:?} stopped at the iteration cap",
            m.positive, m.negative
        );
    }
    model.save(&a.model)?;
    let rows: Vec<Vec<f64>> = (0..g.size()).map(|i| g.row(i).to_vec()).collect();
    let fitted = model.predict(&rows)?;
    println!("models {}", model.members.len());
    println!("train_accuracy {:.4}", svm::accuracy(&fitted, &data.labels));
    Ok(())
}

fn predict(a: PredictArgs) -> Outcome {
    let model = MulticlassModel::load(&a.model)?;
    let train = dataset::load_dataset(&a.train)?;
    if train.circuits.len() != model.train_size {
        return Err(anyhow!(
            "model was trained on {} samples but {} holds {}",
            model.train_size,
            a.train.display(),
            train.circuits.len()
        )
        .into());
    }
    let test = dataset::load_dataset(&a.dataset)?;
    let rows = qkernel::cross_kernel(&test.circuits, &train.circuits, a.kernel.mode)?;
    let predicted = model.predict(&rows)?;

    let mut lines = String::new();
    for (i, (p, t)) in predicted.iter().zip(&test.labels).enumerate() {
        lines.push_str(&format!("{i} {p} {t}\n"));
    }
    if let Some(out) = &a.out {
        write(out, &lines)?;
    }
    println!("strategy {}", model.strategy.name());
    println!("records {}", predicted.len());
    if predicted.is_empty() {
        return Ok(());
    }
    println!("accuracy {:.4}", svm::accuracy(&predicted, &test.labels));
    let mut per_class: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (p, t) in predicted.iter().zip(&test.labels) {
        let e = per_class.entry(*t).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    for (class, (right, total)) in per_class {
        println!("class {class} {right}/{total}");
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Outcome {
    let mut failed = 0;
    for root in &a.datasets {
        let report = dataset::validate_dataset(root)?;
        for w in &report.below_tier {
            warn!("{}: below the tier threshold", w.display());
        }
        if report.passed() {
            println!("{}: ok, {} records", root.display(), report.checked);
            continue;
        }
        failed += 1;
        println!(
            "{}: {} violations in {} records",
            root.display(),
            report.violations.len(),
            report.checked
        );
        for v in report.violations.iter().take(a.max_report) {
            eprintln!("  {v}");
        }
        if report.violations.len() > a.max_report {
            eprintln!("  … {} more", report.violations.len() - a.max_report);
        }
    }
    if failed > 0 {
        return Err(anyhow!(
            "{failed} of {} datasets failed validation",
            a.datasets.len()
        )
        .into());
    }
    Ok(())
}
