use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use geoel::closure::{compute_closure, ClosureError, ClosureMode, DeductiveClosure};
use geoel::eval::{ranks_csv, report_json, score_and_rank, MicroAverage, RankingTask};
use geoel::kb::{
    parse_axioms, parse_normalized_file, serialize_axioms, serialize_theory, ConceptId, NameMode, NormalizedAxiom,
    Signature, Theory, Variant,
};
use geoel::model::{read_checkpoint, signature_hash, write_checkpoint, ModelKind};
use geoel::normalize::{as_input, normalize as normalize_axioms, parse_input_bytes};
use geoel::reasoner::{classify as classify_theory, dump_hierarchy};
use geoel::sampler::{pool_by_prefix, sample_batch, SamplerConfig, SamplingMode};
use geoel::toy::{assertion_report, concepts_csv, roles_csv, run_toy, ToyRegime};
use geoel::trainer::train as train_model;
use serde_json::{Map, Value};

use crate::config::{apply_overrides, RunConfig};
use crate::{CliError, CACHE_DIR_ENV};

pub struct Context {
    pub seed: Option<u64>,
    pub base: Map<String, Value>,
}

impl Context {
    fn run_config(&self, sets: &[String], paths: &[(&str, &Option<PathBuf>)]) -> Result<RunConfig, CliError> {
        let mut map = self.base.clone();
        apply_overrides(&mut map, sets)?;
        for (key, p) in paths {
            if let Some(p) = p {
                map.insert((*key).to_owned(), Value::String(p.display().to_string()));
            }
        }
        RunConfig::from_map(map)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))
}

fn read_theory(path: &Path) -> Result<Theory, CliError> {
    parse_normalized_file(&read_bytes(path)?).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

/// Axioms from `path` over `sig`; names outside the signature are an error.
fn read_axioms_over(path: &Path, sig: &Signature) -> Result<Vec<NormalizedAxiom>, CliError> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|e| CliError::User(format!("{}: not UTF-8: {e}", path.display())))?;
    let mut sig = sig.clone();
    parse_axioms(&text, &mut sig, NameMode::Closed).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Resource(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Resource(format!("cannot write {}: {e}", path.display())))
}

fn output_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("geoel-out"))
}

/// Materialized closure when it fits under `cap`, oracle queries otherwise.
fn closure_for_queries(t: &Theory, cap: u128) -> Result<DeductiveClosure, CliError> {
    let (s, rh, _) = classify_theory(t);
    match compute_closure(t, s.clone(), rh.clone(), ClosureMode::Materialized { cap }) {
        Ok(dc) => Ok(dc),
        Err(ClosureError::CapExceeded { .. }) => {
            eprintln!("closure too large to materialize; answering membership by rule queries");
            compute_closure(t, s, rh, ClosureMode::Oracle).map_err(|e| CliError::Resource(e.to_string()))
        }
        Err(e) => Err(CliError::Resource(e.to_string())),
    }
}

fn fresh_sidecar(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".fresh.tsv");
    output.with_file_name(name)
}

pub fn normalize(input: &Path, output: &Path) -> Result<(), CliError> {
    let bytes = read_bytes(input)?;
    let (theory, ledger) = if input.extension().is_some_and(|e| e == "nf") {
        let t = parse_normalized_file(&bytes).map_err(|e| CliError::User(format!("{}: {e}", input.display())))?;
        let axioms: Vec<_> = t.axioms().iter().map(as_input).collect();
        normalize_axioms(&axioms, t.signature)
    } else {
        let mut sig = Signature::new();
        let axioms =
            parse_input_bytes(&bytes, &mut sig).map_err(|e| CliError::User(format!("{}: {e}", input.display())))?;
        normalize_axioms(&axioms, sig)
    };
    write_file(output, serialize_theory(&theory))?;
    let sidecar = fresh_sidecar(output);
    write_file(&sidecar, ledger.to_tsv())?;
    println!(
        "{} axioms, {} fresh names -> {} ({})",
        theory.len(),
        ledger.entries.len(),
        output.display(),
        sidecar.display()
    );
    Ok(())
}

pub fn classify(theory: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let t = read_theory(theory)?;
    let (s, _, _) = classify_theory(&t);
    let dump = dump_hierarchy(&t, &s);
    match output {
        Some(p) => write_file(p, dump),
        None => {
            print!("{dump}");
            Ok(())
        }
    }
}

pub fn closure(
    ctx: &Context,
    theory: &Path,
    queries: &[String],
    out_dir: Option<&Path>,
    cap: Option<u128>,
) -> Result<(), CliError> {
    let t = read_theory(theory)?;
    let cfg = ctx.run_config(&[], &[])?;
    let (s, rh, _) = classify_theory(&t);
    if !queries.is_empty() {
        let dc = compute_closure(&t, s, rh, ClosureMode::Oracle).map_err(|e| CliError::Resource(e.to_string()))?;
        let mut sig = t.signature.clone();
        for q in queries {
            let parsed = parse_axioms(q, &mut sig, NameMode::Closed)
                .map_err(|e| CliError::User(format!("query `{q}`: {e}")))?;
            let [ax] = parsed[..] else {
                return Err(CliError::User(format!("query `{q}` must be exactly one axiom line")));
            };
            if !ax.variant().is_gci() {
                return Err(CliError::User(format!("query `{q}` is a role inclusion, not a GCI")));
            }
            println!("{}", dc.entails(&ax).map_err(|e| CliError::User(e.to_string()))?);
        }
        return Ok(());
    }
    let cap = cap.unwrap_or(cfg.closure_cap());
    let dc = compute_closure(&t, s, rh, ClosureMode::Materialized { cap }).map_err(|e| match e {
        ClosureError::CapExceeded { .. } => {
            CliError::Resource(format!("{e}; test individual axioms with `--query \"<axiom line>\"`"))
        }
        e => CliError::Resource(e.to_string()),
    })?;
    let mut summary = String::new();
    for v in Variant::GCIS {
        let axioms = dc.axioms(v).map_err(|e| CliError::Resource(e.to_string()))?;
        writeln!(summary, "{}\t{}", v.tag(), axioms.len()).expect("string write");
        if let Some(dir) = out_dir {
            write_file(&dir.join(format!("{}.nf", v.tag())), serialize_axioms(&t.signature, &axioms))?;
        }
    }
    if let Some(dir) = out_dir {
        write_file(&dir.join("summary.tsv"), &summary)?;
    }
    print!("{summary}");
    Ok(())
}

pub fn train(
    ctx: &Context,
    train: Option<PathBuf>,
    valid: Option<PathBuf>,
    out: Option<PathBuf>,
    sets: &[String],
) -> Result<(), CliError> {
    let rc = ctx.run_config(sets, &[("train", &train), ("valid", &valid)])?;
    let cfg = rc.train_config(ctx.seed)?;
    let train_path = rc
        .train
        .clone()
        .ok_or_else(|| CliError::User("no training theory: pass --train or set `train`".into()))?;
    let t = read_theory(&train_path)?;
    let validation = match &rc.valid {
        Some(p) => read_axioms_over(p, &t.signature)?,
        None => Vec::new(),
    };
    let mut sampler = cfg.sampler.clone();
    if let Some(prefix) = &rc.pool_prefix {
        sampler.pool = Some(pool_by_prefix(&t.signature, prefix));
    }
    let cfg = geoel::trainer::TrainConfig { sampler, ..cfg };
    let dc = if cfg.sampler.mode == SamplingMode::Random {
        None
    } else {
        Some(closure_for_queries(&t, rc.closure_cap())?)
    };
    let (model, log) = train_model(&t, &cfg, dc.as_ref(), &validation).map_err(|e| CliError::User(e.to_string()))?;
    let dir = output_dir(out.or(rc.out_dir.clone()));
    let cfg_json = serde_json::to_value(&cfg).expect("config serializes");
    let ckpt = dir.join("model.ckpt");
    write_file(&ckpt, write_checkpoint(&model, &t.signature, cfg_json.clone()))?;
    let log_json = serde_json::json!({
        "train": train_path.display().to_string(),
        "config": cfg_json,
        "log": log,
    });
    write_file(&dir.join("train_log.json"), serde_json::to_string_pretty(&log_json).expect("log serializes"))?;
    println!(
        "{} epochs, best epoch {} (validation loss {:.6}) -> {}",
        log.epochs.len(),
        log.best_epoch,
        log.best_validation_loss,
        ckpt.display()
    );
    Ok(())
}

pub fn eval(
    ctx: &Context,
    checkpoint: Option<PathBuf>,
    train: Option<PathBuf>,
    test: Option<PathBuf>,
    out: Option<&Path>,
    ranks: Option<&Path>,
    sets: &[String],
) -> Result<(), CliError> {
    let rc = ctx.run_config(
        sets,
        &[("checkpoint", &checkpoint), ("train", &train), ("test", &test)],
    )?;
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone()
            .ok_or_else(|| CliError::User(format!("no {what}: pass --{what} or set `{what}`")))
    };
    let (ckpt_path, train_path, test_path) = (need(&rc.checkpoint, "checkpoint")?, need(&rc.train, "train")?, need(&rc.test, "test")?);
    let (model, header) = read_checkpoint(&read_bytes(&ckpt_path)?)
        .map_err(|e| CliError::User(format!("{}: {e}", ckpt_path.display())))?;
    let t = read_theory(&train_path)?;
    if signature_hash(&t.signature) != header.signature_hash {
        return Err(CliError::User(format!(
            "{} was trained on a different signature than {}",
            ckpt_path.display(),
            train_path.display()
        )));
    }
    let test_axioms = read_axioms_over(&test_path, &t.signature)?;
    let pool: Vec<ConceptId> = match &rc.candidate_prefix {
        Some(prefix) => pool_by_prefix(&t.signature, prefix),
        None => t.signature.concept_ids().filter(|&c| c != ConceptId::BOTTOM).collect(),
    };
    let micro = match rc.micro.as_deref() {
        None | Some("test-subjects") => MicroAverage::TestSubjects,
        Some("signature") => MicroAverage::Signature(t.signature.num_concepts()),
        Some(other) => {
            return Err(CliError::User(format!(
                "unknown micro `{other}` (expected test-subjects or signature)"
            )))
        }
    };
    let dc = if rc.filter_closure.unwrap_or(false) {
        Some(closure_for_queries(&t, rc.closure_cap())?)
    } else {
        None
    };
    let task = RankingTask {
        name: rc.task.clone().unwrap_or_else(|| "ranking".into()),
        test: test_axioms,
        pool,
        train: t.axioms().iter().map(|a| a.canonical()).collect::<HashSet<_>>(),
        closures: dc.iter().collect(),
        micro,
    };
    let report = score_and_rank(&model, &task).map_err(|e| CliError::User(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report_json(&report)).expect("report serializes");
    match out {
        Some(p) => write_file(p, format!("{json}\n"))?,
        None => println!("{json}"),
    }
    if let Some(p) = ranks {
        write_file(p, ranks_csv(&report, &t.signature))?;
    }
    Ok(())
}

pub fn sample_check(ctx: &Context, theory: &Path, count: usize, sets: &[String]) -> Result<(), CliError> {
    let rc = ctx.run_config(sets, &[])?;
    let t = read_theory(theory)?;
    let cfg = SamplerConfig {
        mode: rc.sampling_mode(SamplingMode::Random)?,
        pool: rc.pool_prefix.as_ref().map(|p| pool_by_prefix(&t.signature, p)),
        retry_limit: rc.retry_limit.unwrap_or(SamplerConfig::default().retry_limit),
        seed: ctx.seed.or(rc.seed).unwrap_or(0),
        slots: rc.train_config(None)?.sampler.slots,
    };
    let dc = closure_for_queries(&t, rc.closure_cap())?;
    let axioms: Vec<NormalizedAxiom> = t.axioms().iter().copied().filter(|a| a.variant().is_gci()).collect();
    let batch = sample_batch(&axioms, count, &cfg, t.signature.num_concepts(), Some(&dc))
        .map_err(|e| CliError::User(e.to_string()))?;
    let mut entailed = 0usize;
    for (_, n) in &batch.negatives {
        entailed += dc.entails(n).map_err(|e| CliError::User(e.to_string()))? as usize;
    }
    let total = batch.negatives.len();
    println!("negatives\t{total}");
    println!("skipped\t{}", batch.skipped);
    println!("entailed\t{entailed}");
    println!(
        "entailed_fraction\t{:.6}",
        if total == 0 { 0.0 } else { entailed as f64 / total as f64 }
    );
    Ok(())
}

pub fn toy_demo(ctx: &Context, model: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let models: Vec<ModelKind> = if model.eq_ignore_ascii_case("all") {
        ModelKind::ALL.to_vec()
    } else {
        vec![model.parse().map_err(CliError::User)?]
    };
    let seed = ctx.seed.unwrap_or(42);
    let dir = output_dir(out);
    let mut summary = String::from("model\tregime\tfinal_positive_loss\tassertions_passed\tassertions\n");
    for kind in models {
        for regime in ToyRegime::ALL {
            let (m, outcome) = run_toy(kind, regime, seed).map_err(|e| CliError::User(e.to_string()))?;
            let sig = geoel::toy::toy_theory().signature;
            let stem = format!("{}_{}", kind.tag().to_ascii_lowercase(), regime.tag());
            write_file(&dir.join(format!("{stem}_concepts.csv")), concepts_csv(&m, &sig))?;
            write_file(&dir.join(format!("{stem}_roles.csv")), roles_csv(&m, &sig))?;
            write_file(&dir.join(format!("{stem}_assertions.txt")), assertion_report(&outcome))?;
            let passed = outcome.assertions.iter().filter(|a| a.passed).count();
            writeln!(
                summary,
                "{}\t{}\t{:.6}\t{passed}\t{}",
                kind.tag(),
                regime.tag(),
                outcome.final_positive_loss,
                outcome.assertions.len()
            )
            .expect("string write");
        }
    }
    write_file(&dir.join("summary.tsv"), &summary)?;
    print!("{summary}");
    Ok(())
}
