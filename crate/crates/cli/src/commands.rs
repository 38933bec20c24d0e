//! One function per subcommand. Configuration is resolved and validated
//! before any pipeline stage runs; stage failures exit 1 naming the stage,
//! validation failures exit 2.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use sstkg_core::data::{generate_synthetic, EntitySet, SlotRange, SyntheticSpec};
use sstkg_core::embedding::{train, EmbeddingModel};
use sstkg_core::graph::{build_graph, Sstkg};
use sstkg_core::inference::{Forecaster, Method};
use sstkg_core::metrics::{acc_at_n, rms, rsd};
use sstkg_core::persist;
use sstkg_core::stats::{paired_t_test, Direction, TTestReport};

use crate::config;
use crate::reports::{ExplainReport, MaskReport, MetricsReport};
use crate::{
    dataset, usage, BenchArgs, BuildArgs, CliError, CliResult, Command, DirectionArg, EvalArgs,
    ExplainArgs, MaskArgs, MethodArg, PredictArgs, StageExt, SynthArgs, TrainArgs,
};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Explain(a) => explain(a),
        Command::Mask(a) => mask(a),
        Command::Bench(a) => bench(a),
    }
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.spec)
        .map_err(|e| usage(format!("spec {}: {e}", a.spec.display())))?;
    let spec: SyntheticSpec = serde_json::from_str(&text)
        .map_err(|e| usage(format!("spec {}: {e}", a.spec.display())))?;
    let started = Instant::now();
    let world = match generate_synthetic(&spec, a.threshold_km) {
        Ok(w) => w,
        // Spec validation is a usage problem, everything else a runtime one.
        Err(e @ sstkg_core::Error::InvalidConfig(_)) => return Err(usage(e.to_string())),
        Err(e) => return Err(e).stage("synth"),
    };
    fs::create_dir_all(&a.out).stage("synth")?;
    dataset::write_entities_csv(&a.out.join("entities.csv"), &world.entities).stage("synth")?;
    dataset::write_records_csv(&a.out.join("records.csv"), &world.entities).stage("synth")?;
    persist::save(&world.ground_truth, &a.out.join("ground_truth.json")).stage("synth")?;
    // Verbatim spec copy; build and friends read the slot count from it.
    let mut spec_text = persist::canonical_json(&serde_json::to_value(&spec).stage("synth")?);
    spec_text.push('\n');
    fs::write(a.out.join("synthetic.json"), spec_text).stage("synth")?;
    println!("entities: {}", world.entities.len());
    println!("derived_targets: {}", world.ground_truth.derived_targets.len());
    println!("true_edges: {}", world.ground_truth.influences.len());
    eprintln!("synth: {:.1} ms", ms_since(started));
    Ok(())
}

fn build(a: BuildArgs) -> CliResult<()> {
    let cfg = config::effective(&a.config)?;
    let slot_count = a.data.slot_count()?;
    let window = match a.train_slots {
        Some(w) => w,
        None => SlotRange::new(0, slot_count).map_err(|e| usage(e.to_string()))?,
    };
    let build_cfg = cfg.build_config(window);
    build_cfg.validate(slot_count).map_err(|e| usage(e.to_string()))?;

    let set = a.data.load()?;
    let started = Instant::now();
    let out = build_graph(&set, &build_cfg).stage("build")?;
    let wall_ms = ms_since(started);
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    persist::save(&out.graph, &a.out).stage("build")?;
    let sum_p: f64 = out.graph.self_weight.values().sum();
    println!("entities: {}", set.len());
    println!("edges: {}", out.graph.edges.len());
    println!("sum_p: {sum_p:.15}");
    println!("build_ms: {wall_ms:.1}");
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let cfg = config::effective(&a.config)?;
    cfg.embedding.validate().map_err(|e| usage(e.to_string()))?;
    let set = a.data.load()?;
    let graph: Sstkg = load_artifact(&a.graph, "load-graph")?;
    let started = Instant::now();
    let out = train(&set, &graph, &cfg.embedding, cfg.seed).stage("train")?;
    let wall_ms = ms_since(started);
    persist::save(&out.model, &a.out).stage("train")?;
    if let Some(l) = out.trace.embedding_epoch_loss.last() {
        println!("embedding_loss: {l}");
    }
    if let Some(l) = out.trace.influence_epoch_loss.last() {
        println!("influence_loss: {l}");
    }
    eprintln!("train: {wall_ms:.1} ms");
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let _cfg = config::effective(&a.config)?;
    let slots: Vec<usize> = match (a.slot, a.slots) {
        (Some(s), None) => vec![s],
        (None, Some(r)) => r.iter().collect(),
        (None, None) => return Err(usage("pass --slot or --slots")),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let set = a.data.load()?;
    let graph: Sstkg = load_artifact(&a.graph, "load-graph")?;
    let model: EmbeddingModel = load_artifact(&a.model, "load-model")?;
    let f = Forecaster::new(&set, &graph, &model).stage("predict")?;
    let ids = scope_ids(&set, &a.ids)?;
    let method = method_of(a.method);

    let mut w = csv::Writer::from_path(&a.out).stage("predict")?;
    w.write_record(["id", "slot", "predicted", "method"]).stage("predict")?;
    for id in &ids {
        for &slot in &slots {
            let p = f.predict(id, slot, method).stage("predict")?;
            w.write_record([
                id.as_str(),
                &slot.to_string(),
                &p.predicted.to_string(),
                method_name(p.method),
            ])
            .stage("predict")?;
        }
    }
    w.flush().stage("predict")?;
    println!("predictions: {}", ids.len() * slots.len());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let cfg = config::effective(&a.config)?;
    let set = a.data.load()?;
    let graph: Sstkg = load_artifact(&a.graph, "load-graph")?;
    let model: EmbeddingModel = load_artifact(&a.model, "load-model")?;
    if let Some(tr) = a.train_slots {
        if tr != graph.config.training_window {
            return Err(usage(format!(
                "--train-slots {}..{} does not match the graph's window {}..{}",
                tr.start,
                tr.end,
                graph.config.training_window.start,
                graph.config.training_window.end
            )));
        }
    }
    let f = Forecaster::new(&set, &graph, &model).stage("eval")?;
    let ids = scope_ids(&set, &a.ids)?;
    let method = method_of(a.method);

    let started = Instant::now();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for id in &ids {
        let entity = set.by_id(id).stage("eval")?;
        for slot in a.test_slots.iter() {
            // Slots with no observation cannot be scored.
            let Some(real) = entity.series.get(slot) else { continue };
            let p = f.predict(id, slot, method).stage("eval")?;
            pairs.push((real, p.predicted));
        }
    }
    let acc = acc_at_n(&pairs, cfg.acc_percent).stage("eval")?;
    let rms_v = rms(&pairs).stage("eval")?;
    let rsd_v = rsd(&pairs).stage("eval")?;
    let reals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let preds: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let t_test = paired_t_test(&reals, &preds, Direction::TwoSided).stage("eval")?;
    let wall_ms = ms_since(started);

    let report = MetricsReport {
        config: cfg.clone(),
        method,
        train_slots: graph.config.training_window,
        test_slots: a.test_slots,
        ids: if a.ids.is_empty() { None } else { Some(ids) },
        pairs: pairs.len() as u64,
        acc,
        rms: rms_v,
        rsd: rsd_v,
        t_test,
    };
    persist::save(&report, &a.out).stage("eval")?;
    println!("pairs: {}", report.pairs);
    println!("acc@{}: {}", cfg.acc_percent, acc.accuracy);
    println!("rms: {rms_v}");
    println!("rsd: {rsd_v}");
    println!("t: {} p: {}", report.t_test.t, report.t_test.p);
    eprintln!("eval: {wall_ms:.1} ms");
    Ok(())
}

fn explain(a: ExplainArgs) -> CliResult<()> {
    let cfg = config::effective(&a.config)?;
    let set = a.data.load()?;
    let graph: Sstkg = load_artifact(&a.graph, "load-graph")?;
    let model: EmbeddingModel = load_artifact(&a.model, "load-model")?;
    let f = Forecaster::new(&set, &graph, &model).stage("explain")?;
    if set.index_of(&a.id).is_none() {
        return Err(usage(format!("unknown entity id {:?}", a.id)));
    }
    let explanation = f.explain(&a.id, a.slot).stage("explain")?;
    let report = ExplainReport { config: cfg, explanation };
    persist::save(&report, &a.out).stage("explain")?;
    if let Some(scatter) = &a.scatter {
        let mut w = csv::Writer::from_path(scatter).stage("explain")?;
        w.write_record(["source", "distance_km", "influence"]).stage("explain")?;
        for (source, distance_km, influence) in f.influence_scatter() {
            w.write_record([
                source.as_str(),
                &distance_km.to_string(),
                &influence.to_string(),
            ])
            .stage("explain")?;
        }
        w.flush().stage("explain")?;
    }
    println!("edges: {}", report.explanation.entries.len());
    println!("self_weight: {}", report.explanation.self_weight);
    Ok(())
}

fn mask(a: MaskArgs) -> CliResult<()> {
    let cfg = config::effective(&a.config)?;
    let set = a.data.load()?;
    let graph: Sstkg = load_artifact(&a.graph, "load-graph")?;
    let model: EmbeddingModel = load_artifact(&a.model, "load-model")?;
    let f = Forecaster::new(&set, &graph, &model).stage("mask")?;
    if set.index_of(&a.id).is_none() {
        return Err(usage(format!("unknown entity id {:?}", a.id)));
    }
    let masked: BTreeSet<String> =
        a.mask.iter().filter(|s| !s.is_empty()).cloned().collect();
    for id in &masked {
        if set.index_of(id).is_none() {
            return Err(usage(format!("unknown entity id {id:?} in --mask")));
        }
    }
    let method = method_of(a.method);
    let entity = set.by_id(&a.id).stage("mask")?;

    let mut w = csv::Writer::from_path(&a.out).stage("mask")?;
    w.write_record(["day", "real", "R0", "R_masked"]).stage("mask")?;
    let mut baseline = Vec::new();
    let mut counterfactual = Vec::new();
    let mut raw_shift = 0.0_f64;
    for slot in a.slots.iter() {
        let r0 = f.predict(&a.id, slot, method).stage("mask")?;
        let rm = f.predict_masked(&a.id, slot, method, &masked).stage("mask")?;
        raw_shift += r0.raw - rm.raw;
        let real = entity.series.get(slot).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            slot.to_string().as_str(),
            &real,
            &r0.predicted.to_string(),
            &rm.predicted.to_string(),
        ])
        .stage("mask")?;
        baseline.push(r0.predicted);
        counterfactual.push(rm.predicted);
    }
    w.flush().stage("mask")?;

    let direction = match a.direction {
        DirectionArg::AGreater => Direction::AGreater,
        DirectionArg::ALess => Direction::ALess,
        DirectionArg::TwoSided => Direction::TwoSided,
        // The removed contributions' aggregate sign says which way the
        // forecast must move, so the alternative is known before testing.
        DirectionArg::Auto => {
            if raw_shift > 0.0 {
                Direction::AGreater
            } else if raw_shift < 0.0 {
                Direction::ALess
            } else {
                Direction::TwoSided
            }
        }
    };
    let t_test = paired_t_test(&baseline, &counterfactual, direction).stage("mask")?;
    print_t_test(&t_test);
    if let Some(report_path) = &a.report {
        let report = MaskReport {
            config: cfg,
            target: a.id.clone(),
            masked: masked.into_iter().collect(),
            method,
            slots: a.slots,
            t_test,
        };
        persist::save(&report, report_path).stage("mask")?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let cfg = config::effective(&a.config)?;
    cfg.embedding.validate().map_err(|e| usage(e.to_string()))?;
    let slot_count = a.data.slot_count()?;
    let window = match a.train_slots {
        Some(w) => w,
        None => SlotRange::new(0, slot_count).map_err(|e| usage(e.to_string()))?,
    };
    let build_cfg = cfg.build_config(window);
    build_cfg.validate(slot_count).map_err(|e| usage(e.to_string()))?;

    let started = Instant::now();
    let set = a.data.load()?;
    let parse_ms = ms_since(started);

    let started = Instant::now();
    let built = build_graph(&set, &build_cfg).stage("build")?;
    let build_ms = ms_since(started);

    let started = Instant::now();
    let trained = train(&set, &built.graph, &cfg.embedding, cfg.seed).stage("train")?;
    let train_ms = ms_since(started);

    let started = Instant::now();
    let f = Forecaster::new(&set, &built.graph, &trained.model).stage("predict")?;
    for e in set.entities() {
        f.predict(&e.id, window.end - 1, Method::Embedding).stage("predict")?;
    }
    let predict_ms = ms_since(started);

    eprintln!(
        "bench: {} entities, {} edges, window {}..{}",
        set.len(),
        built.graph.edges.len(),
        window.start,
        window.end
    );
    println!("stage,wall_ms");
    println!("parse,{parse_ms:.3}");
    println!("build,{build_ms:.3}");
    println!("train,{train_ms:.3}");
    println!("predict,{predict_ms:.3}");
    Ok(())
}

fn load_artifact<T: persist::Artifact>(path: &Path, stage: &'static str) -> CliResult<T> {
    persist::load(path).map_err(|e| CliError::Stage {
        stage,
        source: anyhow::anyhow!("{}: {e}", path.display()),
    })
}

fn scope_ids(set: &EntitySet, ids: &[String]) -> CliResult<Vec<String>> {
    if ids.is_empty() {
        return Ok(set.entities().iter().map(|e| e.id.clone()).collect());
    }
    for id in ids {
        if set.index_of(id).is_none() {
            return Err(usage(format!("unknown entity id {id:?} in --ids")));
        }
    }
    Ok(ids.to_vec())
}

fn method_of(m: MethodArg) -> Method {
    match m {
        MethodArg::Embedding => Method::Embedding,
        MethodArg::Direct => Method::Direct,
        MethodArg::Persistence => Method::Persistence,
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Embedding => "embedding",
        Method::Direct => "direct",
        Method::Persistence => "persistence",
    }
}

fn print_t_test(t: &TTestReport) {
    let direction = match t.direction {
        Direction::AGreater => "R0 > R_masked",
        Direction::ALess => "R0 < R_masked",
        Direction::TwoSided => "R0 != R_masked",
    };
    println!("t_test: H1 {direction}");
    println!("n: {} mean_diff: {} t: {} p: {}", t.n, t.mean_diff, t.t, t.p);
    println!("reject_at_05: {}{}", t.reject_at_05, if t.degenerate { " (degenerate)" } else { "" });
}

fn ms_since(started: Instant) -> f64 {
    started.elapsed().as_secs_f64() * 1e3
}
