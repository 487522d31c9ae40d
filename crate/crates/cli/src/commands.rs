//! Subcommand execution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use histaxo_core::ingest::{load_chapters, load_events, load_relations, load_topics, EventRecord};
use histaxo_core::report::render_structural_table;
use histaxo_core::{RootMode, Taxonomy};
use histaxo_gateway::mock::fixture_files;
use histaxo_gateway::{Gateway, RoleName};
use histaxo_pipeline::enricher::{self, Decision, EnrichInputs, EnrichOutcome, EnrichSettings};
use histaxo_pipeline::evaluate::{evaluate, node_vectors, EvalRequest};
use histaxo_pipeline::expander::{run_expansion, ExpandOutcome, ExpandSettings};
use histaxo_pipeline::inducer::{extract_events, run_induction, InduceOutcome, InduceRoles, InduceSettings};
use histaxo_pipeline::invariants;
use histaxo_pipeline::{PipelineError, ProviderMode, RunConfig};
use serde::Serialize;

use crate::args::{Cli, Command, EventInput, Format, RunArgs, SourceArgs};
use crate::rundir::{sha256_file, Manifest, RunDir};
use crate::{CliError, ErrorReport};

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Command::Stats {
        taxonomy,
        mode,
        name,
        format,
    } = &cli.command
    {
        return match stats(taxonomy, (*mode).into(), name, *format) {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => fail(None, &e),
        };
    }
    let (label, run_args, inputs) = describe(&cli.command);
    let (dir, config, mode, manifest) = match open(label, run_args, &inputs) {
        Ok(x) => x,
        Err(e) => return fail(None, &e),
    };
    let mut gateway = None;
    let result = (|| {
        dir.write("config.toml", config.to_toml())?;
        dir.write_json("manifest.json", &manifest)?;
        let gw = gateway.insert(config.gateway(&mode)?);
        let ctx = Ctx {
            config: &config,
            gateway: gw,
            dir: &dir,
            live: mode == ProviderMode::Live,
        };
        execute(&ctx, &cli.command)
    })();
    if let Some(gw) = &gateway {
        if let Err(e) = dir.write("transcript.jsonl", gw.transcript().to_jsonl()) {
            log::error!("transcript not written: {e}");
        }
    }
    match result {
        Ok(out) => {
            if !out.is_empty() {
                print!("{out}");
            }
            println!("{}", dir.path().display());
            0
        }
        Err(e) => fail(Some(&dir), &e),
    }
}

fn fail(dir: Option<&RunDir>, e: &CliError) -> i32 {
    let report = ErrorReport::from(e);
    if let Some(dir) = dir {
        if let Err(w) = dir.write_json("error.json", &report) {
            log::error!("error.json not written: {w}");
        }
    }
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
    1
}

type Inputs<'a> = Vec<(&'static str, &'a Path)>;

fn event_inputs<'a>(inputs: &mut Inputs<'a>, i: &'a EventInput) {
    if let Some(p) = &i.events {
        inputs.push(("events", p));
    }
    if let Some(p) = &i.chapters {
        inputs.push(("chapters", p));
    }
}

fn source_inputs<'a>(inputs: &mut Inputs<'a>, s: &'a SourceArgs) {
    if let Some(p) = &s.topics {
        inputs.push(("topics", p));
    }
    if let Some(p) = &s.relations {
        inputs.push(("relations", p));
    }
}

fn describe(command: &Command) -> (&'static str, &RunArgs, Inputs<'_>) {
    let mut inputs = Inputs::new();
    match command {
        Command::Induce { run, input } => {
            event_inputs(&mut inputs, input);
            ("induce", run, inputs)
        }
        Command::Expand { run, taxonomy } => {
            inputs.push(("taxonomy", taxonomy));
            ("expand", run, inputs)
        }
        Command::Enrich {
            run,
            taxonomy,
            events,
            sources: s,
        } => {
            inputs.push(("taxonomy", taxonomy));
            inputs.push(("events", events));
            source_inputs(&mut inputs, s);
            ("enrich", run, inputs)
        }
        Command::Pipeline { run, input, sources: s } => {
            event_inputs(&mut inputs, input);
            source_inputs(&mut inputs, s);
            ("pipeline", run, inputs)
        }
        Command::Evaluate {
            run,
            taxonomy,
            reference,
            events,
            ..
        } => {
            inputs.push(("taxonomy", taxonomy));
            if let Some(p) = reference {
                inputs.push(("reference", p));
            }
            if let Some(p) = events {
                inputs.push(("events", p));
            }
            ("evaluate", run, inputs)
        }
        Command::Stats { .. } => unreachable!("stats runs without a run directory"),
    }
}

/// Resolves configuration and provider mode, hashes inputs, then creates
/// the run directory.
fn open(
    command: &str,
    args: &RunArgs,
    inputs: &[(&str, &Path)],
) -> Result<(RunDir, RunConfig, ProviderMode, Manifest), CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(h) = args.threshold {
        config.threshold = h;
    }
    config.validate()?;
    let mode = args.provider_mode()?;
    let mut manifest = Manifest {
        tool: "histaxo",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        provider: if mode == ProviderMode::Live { "live" } else { "mock" },
        seed: None,
        config_sha256: config.hash(),
        threshold: config.threshold,
        fixtures: BTreeMap::new(),
        inputs: BTreeMap::new(),
    };
    if let ProviderMode::Mock { seed, fixtures } = &mode {
        manifest.seed = Some(*seed);
        if let Some(root) = fixtures {
            for file in fixture_files(root)? {
                let name = file
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default();
                manifest.fixtures.insert(name, sha256_file(&file)?);
            }
        }
    }
    for (role, path) in inputs {
        manifest.add_input(role, path)?;
    }
    let dir = RunDir::create(args.run_dir.as_deref(), &args.runs_root, &manifest.config_sha256)?;
    Ok((dir, config, mode, manifest))
}

struct Ctx<'a> {
    config: &'a RunConfig,
    gateway: &'a Gateway,
    dir: &'a RunDir,
    live: bool,
}

#[derive(Serialize)]
struct InvariantRecord<'a> {
    stage: &'a str,
    passed: bool,
    violations: &'a [String],
}

impl Ctx<'_> {
    /// Records the invariant outcome of a stage and fails on any violation.
    fn check(&self, stage: &str, violations: Vec<String>) -> Result<(), CliError> {
        self.dir.write_json(
            &format!("{}/invariants.json", stage_dir(stage)),
            &InvariantRecord {
                stage,
                passed: violations.is_empty(),
                violations: &violations,
            },
        )?;
        invariants::require(stage, violations)?;
        Ok(())
    }

    fn settings_induce(&self) -> InduceSettings {
        InduceSettings {
            top_level_limit: self.config.top_level_limit,
            max_rounds: self.config.max_rounds,
        }
    }
}

fn stage_dir(stage: &str) -> &'static str {
    match stage {
        "extract" => "0-extract",
        "induce" => "1-induce",
        "expand" => "2-expand",
        "enrich" => "3-enrich",
        _ => "checks",
    }
}

fn execute(ctx: &Ctx<'_>, command: &Command) -> Result<String, CliError> {
    match command {
        Command::Induce { input, .. } => {
            let events = load_or_extract(ctx, input)?;
            let out = induce(ctx, &events)?;
            ctx.dir.write("taxonomy.json", out.taxonomy.to_json())?;
        }
        Command::Expand { taxonomy, .. } => {
            let input = load_taxonomy(taxonomy)?;
            let out = expand(ctx, &input)?;
            ctx.dir.write("taxonomy.json", out.taxonomy.to_json())?;
        }
        Command::Enrich {
            taxonomy,
            events,
            sources,
            ..
        } => {
            let input = load_taxonomy(taxonomy)?;
            let events = load_events(events)?;
            let out = enrich(ctx, &input, &events, sources)?;
            ctx.dir.write("taxonomy.json", out.taxonomy.to_json())?;
        }
        Command::Pipeline { input, sources, .. } => {
            let events = load_or_extract(ctx, input)?;
            let induced = induce(ctx, &events)?;
            let expanded = expand(ctx, &induced.taxonomy)?;
            let enriched = enrich(ctx, &expanded.taxonomy, &induced.events, sources)?;
            ctx.dir.write("taxonomy.json", enriched.taxonomy.to_json())?;
            ctx.dir.write_json(
                "summary.json",
                &serde_json::json!({
                    "events": events.len(),
                    "event_types": induced.report.event_types,
                    "nodes": {
                        "induced": induced.taxonomy.len(),
                        "expanded": expanded.taxonomy.len(),
                        "enriched": enriched.taxonomy.len(),
                    },
                    "edits": expanded.log.len(),
                    "inserted": enriched.report.inserted,
                }),
            )?;
        }
        Command::Evaluate {
            taxonomy,
            reference,
            events,
            mode,
            report,
            name,
            no_judge,
            ..
        } => {
            let tax = load_taxonomy(taxonomy)?;
            let reference = reference.as_deref().map(load_taxonomy).transpose()?;
            let events = events.as_deref().map(load_events).transpose()?;
            let judge = (!no_judge).then(|| ctx.config.roles.single(RoleName::GranularityJudge));
            let req = EvalRequest {
                name,
                taxonomy: &tax,
                reference: reference.as_ref(),
                events: events.as_deref(),
                mode: (*mode).into(),
                threshold: ctx.config.threshold,
                judge: judge.as_ref(),
                record_timing: ctx.live,
            };
            let metrics = evaluate(ctx.gateway, &req)?;
            let markdown = metrics.to_markdown();
            ctx.dir.write("evaluation.json", metrics.to_json())?;
            ctx.dir.write("evaluation.md", &markdown)?;
            if let Some(path) = report {
                let text = if path.extension().is_some_and(|e| e == "md") {
                    markdown.clone()
                } else {
                    metrics.to_json()
                };
                fs::write(path, text).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
            }
            return Ok(markdown);
        }
        Command::Stats { .. } => unreachable!("handled before a run directory exists"),
    }
    Ok(String::new())
}

fn stats(path: &Path, mode: RootMode, name: &str, format: Format) -> Result<String, CliError> {
    let tax = load_taxonomy(path)?;
    let s = tax.structural_stats(mode)?;
    Ok(match format {
        Format::Md => render_structural_table(&[(name, s)]),
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::json!({
                "name": name,
                "mode": mode.as_str(),
                "max_depth": s.max_depth,
                "avg_depth": s.avg_depth,
                "branch_factor": s.branch_factor,
            }))
            .expect("stats serialize")
                + "\n"
        }
    })
}

fn load_taxonomy(path: &Path) -> Result<Taxonomy, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Taxonomy::from_json(&text)?)
}

fn events_jsonl(events: &[EventRecord]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
        .collect()
}

fn load_or_extract(ctx: &Ctx<'_>, input: &EventInput) -> Result<Vec<EventRecord>, CliError> {
    if let Some(path) = &input.events {
        let events = load_events(path)?;
        for (i, e) in events.iter().enumerate() {
            for w in e.warnings() {
                log::warn!("event {}: {w}", i + 1);
            }
        }
        return Ok(events);
    }
    let root = input.chapters.as_deref().expect("clap requires events or chapters");
    let extractors = ctx.config.roles.extractors();
    let mut events = Vec::new();
    for chapter in load_chapters(root)? {
        match extract_events(ctx.gateway, &chapter, &extractors) {
            Ok(found) => events.extend(found),
            Err(PipelineError::EmptyChapter(c)) => log::warn!("skipped empty chapter {c}"),
            Err(e) => return Err(e.into()),
        }
    }
    ctx.dir.write("0-extract/events.jsonl", events_jsonl(&events))?;
    Ok(events)
}

fn induce(ctx: &Ctx<'_>, events: &[EventRecord]) -> Result<InduceOutcome, CliError> {
    let roles = &ctx.config.roles;
    let classifier = roles.single(RoleName::Classifier);
    let generators = roles.generators();
    let merger = roles.single(RoleName::Merger);
    let out = run_induction(
        ctx.gateway,
        ctx.settings_induce(),
        ctx.config.classify_samples,
        &InduceRoles {
            classifier: &classifier,
            generators: &generators,
            merger: &merger,
        },
        events,
    )?;
    ctx.dir.write("1-induce/taxonomy.json", out.taxonomy.to_json())?;
    ctx.dir.write("1-induce/events.jsonl", events_jsonl(&out.events))?;
    ctx.dir.write_json("1-induce/report.json", &out.report)?;
    let mut v = out.taxonomy.validate();
    v.extend(invariants::top_level_width(&out.taxonomy, ctx.config.top_level_limit));
    v.extend(invariants::induced_leaves(&out.taxonomy, &out.report.classification));
    ctx.check("induce", v)?;
    Ok(out)
}

fn expand(ctx: &Ctx<'_>, input: &Taxonomy) -> Result<ExpandOutcome, CliError> {
    let roles = &ctx.config.roles;
    let settings = ExpandSettings {
        threshold: ctx.config.threshold,
        top_level_limit: ctx.config.top_level_limit,
    };
    let out = run_expansion(
        ctx.gateway,
        &roles.single(RoleName::Judger),
        &roles.single(RoleName::Expander),
        &settings,
        input,
    )?;
    ctx.dir.write("2-expand/taxonomy.json", out.taxonomy.to_json())?;
    ctx.dir.write("2-expand/edits.jsonl", out.log.to_jsonl())?;
    ctx.dir.write_json("2-expand/report.json", &out.report)?;
    let t = &out.taxonomy;
    let mut v = t.validate();
    v.extend(invariants::top_level_width(t, ctx.config.top_level_limit));
    let leaves = invariants::leaf_labels(input);
    v.extend(invariants::labels_preserved(t, leaves.iter().map(String::as_str)));
    let vectors = node_vectors(ctx.gateway, t)?;
    v.extend(invariants::no_duplicates(t, &vectors, ctx.config.threshold, false)?);
    match out.log.replay(input) {
        Ok(replayed) if replayed.to_json() == t.to_json() => {}
        Ok(_) => v.push("edit log does not replay to the output".into()),
        Err(e) => v.push(format!("edit log replay failed: {e}")),
    }
    ctx.check("expand", v)?;
    Ok(out)
}

fn enrich(
    ctx: &Ctx<'_>,
    input: &Taxonomy,
    events: &[EventRecord],
    sources: &SourceArgs,
) -> Result<EnrichOutcome, CliError> {
    let topics = sources
        .topics
        .as_deref()
        .map(load_topics)
        .transpose()?
        .unwrap_or_default();
    let relations = sources
        .relations
        .as_deref()
        .map(load_relations)
        .transpose()?
        .unwrap_or_default();
    let roles = &ctx.config.roles;
    let h = ctx.config.threshold;
    let settings = EnrichSettings {
        threshold: h,
        frequency_threshold: ctx.config.frequency_threshold,
        top_level_limit: ctx.config.top_level_limit,
    };
    let out = enricher::run_enrichment(
        ctx.gateway,
        &roles.single(RoleName::Conceptualizer),
        &roles.single(RoleName::Enricher),
        &settings,
        input,
        &EnrichInputs {
            events,
            topics: &topics,
            relations: &relations,
        },
    )?;
    ctx.dir.write("3-enrich/taxonomy.json", out.taxonomy.to_json())?;
    ctx.dir
        .write("3-enrich/decisions.jsonl", enricher::decisions_to_jsonl(&out.decisions))?;
    ctx.dir.write_json("3-enrich/report.json", &out.report)?;
    let t = &out.taxonomy;
    let mut v = t.validate();
    v.extend(invariants::monotone(input, t));
    v.extend(invariants::top_level_width(t, ctx.config.top_level_limit));
    let vectors = node_vectors(ctx.gateway, t)?;
    v.extend(invariants::no_duplicates(t, &vectors, h, true)?);
    for d in &out.decisions {
        if let (Decision::Inserted { id, .. }, Some(s)) = (&d.decision, d.max_similarity) {
            if s > h {
                v.push(format!("`{id}` inserted although its closest node scored {s}"));
            }
        }
    }
    match enricher::replay_decisions(input, &out.decisions) {
        Ok(replayed) if replayed.to_json() == t.to_json() => {}
        Ok(_) => v.push("decision log does not replay to the output".into()),
        Err(e) => v.push(format!("decision log replay failed: {e}")),
    }
    ctx.check("enrich", v)?;
    Ok(out)
}
