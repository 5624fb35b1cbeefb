//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use reset_core::classifiers::{ClassifierKind, ClassifierSpec};
use reset_core::filters::{bh, fdp_sd, gr_sd, seqstep, RankedLabels};
use reset_core::model::{
    ErrorMode, FilterParams, HypothesisTable, ModelError, PValueTable, SeedSpec, Stream,
};
use reset_core::pvalue_adapter::{convert_pvalues, null_win_prob, AdapterError, ConversionRegions};
use reset_core::reset::{pseudo_c, run_reset, ResetConfig, ResetError};
use reset_core::simgen::{
    monte_carlo_validate, simulate_beta_mixture, simulate_competition, simulate_geometric,
    BetaMixtureSpec, CompetitionSideInfo, CompetitionSimSpec, GeometricScenario, GeometricSimSpec,
    GroundTruth, SimError,
};

use crate::schema::{self, DiscoveryRow, LoadedInput};
use crate::{
    CliError, FilterArgs, MethodArg, ModeArg, ResetArgs, ScenarioArg, SideInfoArg, SimArg,
    SimulateArgs, ValidateArgs, ValidateMethodArg,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn internal(msg: impl std::fmt::Display) -> CliError {
    CliError::Internal(msg.to_string())
}

/// User-supplied parameters land in Usage; anything else is an engine bug.
fn map_reset_error(e: ResetError) -> CliError {
    match e {
        ResetError::InvalidConfig(m) => usage(m),
        other => internal(other),
    }
}

fn map_adapter_error(e: AdapterError) -> CliError {
    match e {
        AdapterError::InvalidRegions { .. } => usage(e.to_string()),
        AdapterError::NothingKept => CliError::Data(e.to_string()),
        other => internal(other),
    }
}

fn map_params_error(e: ModelError) -> CliError {
    usage(e.to_string())
}

/// Runs `f` inside a dedicated pool of `threads` workers (0 = default pool).
fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| internal(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn out_dir(path: &str) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(path);
    fs::create_dir_all(&dir).map_err(|e| {
        internal(format!(
            "{}: cannot create output directory: {e}",
            dir.display()
        ))
    })?;
    Ok(dir)
}

fn spec_name(spec: &ClassifierSpec) -> String {
    match spec.kind {
        ClassifierKind::RandomForest => "random_forest".to_string(),
        ClassifierKind::SplineAdditive => "spline_additive".to_string(),
        ClassifierKind::NeuralNet => {
            format!(
                "neural_net(decay={}, hidden={})",
                spec.nn_decay, spec.nn_hidden
            )
        }
        ClassifierKind::Constant => "constant".to_string(),
    }
}

fn mode_name(mode: ModeArg) -> &'static str {
    match mode {
        ModeArg::Fdr => "fdr",
        ModeArg::Fdp => "fdp",
    }
}

fn parse_mode(name: &str) -> Result<ModeArg, CliError> {
    match name {
        "fdr" => Ok(ModeArg::Fdr),
        "fdp" => Ok(ModeArg::Fdp),
        other => Err(usage(format!("unknown mode '{other}' in config"))),
    }
}

// ───────────────────────── reset ─────────────────────────

/// Every knob of a rescoring run, as written to (and read back from)
/// run.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunParams {
    pub alpha: f64,
    pub mode: String,
    pub gamma: Option<f64>,
    pub s: f64,
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    /// Explicit override of the null target probability, when given.
    pub c0: Option<f64>,
    pub seed: u64,
    pub threads: usize,
    pub deterministic_fdpsd: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResolvedParams {
    /// Null target probability actually used.
    c0: f64,
    /// Success probability handed to the final filter.
    c: f64,
    /// Success probability on pseudo labels inside the engine.
    pseudo_c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunCounts {
    hypotheses: usize,
    /// Rows entering the competition (after p-value conversion, in p-value
    /// mode).
    converted: usize,
    zero_dropped: usize,
    training_decoys: usize,
    pseudo_targets: usize,
    discoveries: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    command: String,
    input: String,
    input_mode: String,
    params: RunParams,
    resolved: ResolvedParams,
    counts: RunCounts,
    winner: Option<String>,
    warnings: Vec<String>,
    timing_seconds: f64,
}

pub fn cmd_reset(args: ResetArgs) -> Result<(), CliError> {
    let params = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{path}: cannot read: {e}")))?;
            let record: RunRecord = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{path}: invalid run.json: {e}")))?;
            record.params
        }
        None => RunParams {
            alpha: args.alpha.ok_or_else(|| usage("--alpha is required"))?,
            mode: mode_name(args.mode).to_string(),
            gamma: args.gamma,
            s: args.s,
            a: args.a,
            b1: args.b1,
            b2: args.b2,
            c0: args.c0,
            seed: args.seed,
            threads: args.threads,
            deterministic_fdpsd: args.deterministic_fdpsd,
        },
    };
    let mode = parse_mode(&params.mode)?;
    if mode == ModeArg::Fdp && params.gamma.is_none() {
        return Err(usage("--mode fdp requires --gamma"));
    }

    let input = schema::read_input(&args.input)?;
    let start = Instant::now();

    // Resolve the competition table and the map from its rows back to input
    // rows.
    let (table, kept, c0): (HypothesisTable, Vec<usize>, f64) = match &input {
        LoadedInput::PValues(pt) => {
            let regions = ConversionRegions::new(params.a, params.b1, params.b2)
                .map_err(map_adapter_error)?;
            let (table, kept) = convert_pvalues(pt, &regions).map_err(map_adapter_error)?;
            let c0 = params.c0.unwrap_or_else(|| null_win_prob(&regions));
            (table, kept, c0)
        }
        LoadedInput::Competition(t) => {
            let kept = (0..t.len()).collect();
            (t.clone(), kept, params.c0.unwrap_or(0.5))
        }
    };

    let mut config = ResetConfig::standard(
        params.alpha,
        params.gamma.unwrap_or(0.1),
        match mode {
            ModeArg::Fdr => ErrorMode::Fdr,
            ModeArg::Fdp => ErrorMode::Fdp,
        },
        SeedSpec::new(params.seed),
    );
    config.s = params.s;
    config.c0 = c0;
    config.ensemble.pseudo_c = pseudo_c(c0, params.s);
    config.deterministic_fdp = params.deterministic_fdpsd;

    let outcome =
        in_pool(params.threads, || run_reset(&table, &config))?.map_err(map_reset_error)?;

    // One output row per input hypothesis, in input order.
    let mut rows: Vec<DiscoveryRow> = input
        .ids()
        .iter()
        .map(|id| DiscoveryRow {
            id: id.clone(),
            score: None,
            wtilde: None,
            discovered: false,
        })
        .collect();
    for (run_idx, &orig) in kept.iter().enumerate() {
        rows[orig].score = Some(table.scores()[run_idx]);
    }
    for &(run_idx, w) in &outcome.discoveries.rescored {
        rows[kept[run_idx]].wtilde = Some(w);
    }
    for &run_idx in &outcome.discoveries.indices {
        rows[kept[run_idx]].discovered = true;
    }

    let dir = out_dir(&args.out)?;
    schema::write_discoveries(&dir.join("discoveries.tsv"), &rows)?;

    let record = RunRecord {
        command: "reset".to_string(),
        input: args.input.clone(),
        input_mode: input.mode_name().to_string(),
        resolved: ResolvedParams {
            c0,
            c: config.filter_c(),
            pseudo_c: config.ensemble.pseudo_c,
        },
        counts: RunCounts {
            hypotheses: input.len(),
            converted: table.len(),
            zero_dropped: outcome.n_zero_dropped,
            training_decoys: outcome.n_training_decoys,
            pseudo_targets: outcome.n_pseudo_targets,
            discoveries: outcome.discoveries.indices.len(),
        },
        winner: outcome.winner.as_ref().map(spec_name),
        warnings: outcome.warnings.clone(),
        timing_seconds: start.elapsed().as_secs_f64(),
        params,
    };
    write_json(&dir.join("run.json"), &record)?;
    println!(
        "{} discoveries out of {} hypotheses",
        record.counts.discoveries, record.counts.hypotheses
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| internal(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n")
        .map_err(|e| internal(format!("{}: cannot write: {e}", path.display())))
}

// ───────────────────────── filter ─────────────────────────

#[derive(Debug, Serialize)]
struct FilterRecord {
    command: String,
    input: String,
    input_mode: String,
    method: String,
    alpha: f64,
    gamma: Option<f64>,
    c: Option<f64>,
    a: f64,
    b1: f64,
    b2: f64,
    seed: u64,
    deterministic_fdpsd: bool,
    counts: RunCounts,
    timing_seconds: f64,
}

pub fn cmd_filter(args: FilterArgs) -> Result<(), CliError> {
    let input = schema::read_input(&args.input)?;
    let start = Instant::now();
    let seed = SeedSpec::new(args.seed);
    let method_name = match args.method {
        MethodArg::Seqstep => "seqstep",
        MethodArg::SeqstepPlus => "seqstep+",
        MethodArg::Fdpsd => "fdpsd",
        MethodArg::Grsd => "grsd",
        MethodArg::Bh => "bh",
    };

    // (kept-row -> input-row map, per-input score, discovery indices in
    // input space, resolved c when label-based)
    let (rows, n_converted, discoveries, resolved_c) = match args.method {
        MethodArg::Bh | MethodArg::Grsd => {
            let pt = match &input {
                LoadedInput::PValues(pt) => pt,
                LoadedInput::Competition(_) => {
                    return Err(usage(format!(
                        "{method_name} operates on p-values; the input is in competition form"
                    )))
                }
            };
            let list = match args.method {
                MethodArg::Bh => bh(pt.pvalues(), args.alpha),
                _ => {
                    let gamma = args.gamma.ok_or_else(|| usage("grsd requires --gamma"))?;
                    gr_sd(pt.pvalues(), args.alpha, gamma)
                }
            };
            let rows: Vec<DiscoveryRow> = pt
                .ids()
                .iter()
                .enumerate()
                .map(|(i, id)| DiscoveryRow {
                    id: id.clone(),
                    score: Some(pt.pvalues()[i]),
                    wtilde: None,
                    discovered: false,
                })
                .collect();
            (rows, pt.len(), list.indices, None)
        }
        MethodArg::Seqstep | MethodArg::SeqstepPlus | MethodArg::Fdpsd => {
            let (table, kept, default_c): (HypothesisTable, Vec<usize>, f64) = match &input {
                LoadedInput::PValues(pt) => {
                    let regions = ConversionRegions::new(args.a, args.b1, args.b2)
                        .map_err(map_adapter_error)?;
                    let (t, kept) = convert_pvalues(pt, &regions).map_err(map_adapter_error)?;
                    let c = null_win_prob(&regions);
                    (t, kept, c)
                }
                LoadedInput::Competition(t) => ((*t).clone(), (0..t.len()).collect(), 0.5),
            };
            let c = args.c.unwrap_or(default_c);
            let (mode, gamma) = match args.method {
                MethodArg::Fdpsd => (
                    ErrorMode::Fdp,
                    args.gamma.ok_or_else(|| usage("fdpsd requires --gamma"))?,
                ),
                _ => (ErrorMode::Fdr, args.gamma.unwrap_or(0.1)),
            };
            let params = FilterParams::new(args.alpha, gamma, c, mode).map_err(map_params_error)?;
            let mut tie_rng = seed.stream(Stream::TieBreak);
            let ranked = RankedLabels::from_table(&table, &mut tie_rng);
            let list = match args.method {
                MethodArg::Seqstep => seqstep(&ranked, &params, false),
                MethodArg::SeqstepPlus => seqstep(&ranked, &params, true),
                MethodArg::Fdpsd => {
                    let mut coin_rng = seed.stream(Stream::Coinflip);
                    fdp_sd(&ranked, &params, &mut coin_rng, args.deterministic_fdpsd)
                }
                _ => unreachable!(),
            };
            let mut rows: Vec<DiscoveryRow> = input
                .ids()
                .iter()
                .map(|id| DiscoveryRow {
                    id: id.clone(),
                    score: None,
                    wtilde: None,
                    discovered: false,
                })
                .collect();
            for (run_idx, &orig) in kept.iter().enumerate() {
                rows[orig].score = Some(table.scores()[run_idx]);
            }
            let discoveries: Vec<usize> = list.indices.iter().map(|&i| kept[i]).collect();
            (rows, table.len(), discoveries, Some(c))
        }
    };

    let mut rows = rows;
    for &i in &discoveries {
        rows[i].discovered = true;
    }
    let dir = out_dir(&args.out)?;
    schema::write_discoveries(&dir.join("discoveries.tsv"), &rows)?;
    let record = FilterRecord {
        command: "filter".to_string(),
        input: args.input.clone(),
        input_mode: input.mode_name().to_string(),
        method: method_name.to_string(),
        alpha: args.alpha,
        gamma: args.gamma,
        c: resolved_c,
        a: args.a,
        b1: args.b1,
        b2: args.b2,
        seed: args.seed,
        deterministic_fdpsd: args.deterministic_fdpsd,
        counts: RunCounts {
            hypotheses: input.len(),
            converted: n_converted,
            zero_dropped: 0,
            training_decoys: 0,
            pseudo_targets: n_converted,
            discoveries: discoveries.len(),
        },
        timing_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("run.json"), &record)?;
    println!(
        "{} discoveries out of {} hypotheses",
        discoveries.len(),
        input.len()
    );
    Ok(())
}

// ───────────────────────── simulate ─────────────────────────

fn scenario_of(arg: Option<ScenarioArg>) -> Result<GeometricScenario, CliError> {
    match arg {
        Some(ScenarioArg::CircleCenter) => Ok(GeometricScenario::CircleCenter),
        Some(ScenarioArg::CircleCorner) => Ok(GeometricScenario::CircleCorner),
        Some(ScenarioArg::Ellipse) => Ok(GeometricScenario::Ellipse),
        None => Err(usage("--sim geometric requires --scenario")),
    }
}

fn scenario_name(s: GeometricScenario) -> &'static str {
    match s {
        GeometricScenario::CircleCenter => "circle-center",
        GeometricScenario::CircleCorner => "circle-corner",
        GeometricScenario::Ellipse => "ellipse",
    }
}

fn competition_spec(
    m: usize,
    false_fraction: f64,
    shift: f64,
    decoys: usize,
    side_info: SideInfoArg,
) -> Result<CompetitionSimSpec, CliError> {
    if !(0.0..=1.0).contains(&false_fraction) {
        return Err(usage("--false-fraction must lie in [0, 1]"));
    }
    if decoys == 0 {
        return Err(usage("--decoys must be at least 1"));
    }
    Ok(CompetitionSimSpec {
        m,
        false_null_fraction: false_fraction,
        decoys_per_hypothesis: decoys,
        alternative_shift: shift,
        side_info: match side_info {
            SideInfoArg::None => CompetitionSideInfo::None,
            SideInfoArg::Uninformative => CompetitionSideInfo::Uninformative { dim: 2 },
            SideInfoArg::ClassConditional => CompetitionSideInfo::ClassConditional { offset: 2.0 },
        },
    })
}

fn map_sim_error(e: SimError) -> CliError {
    internal(e)
}

#[derive(Debug, Serialize)]
struct SimRecord {
    command: String,
    sim: String,
    scenario: Option<String>,
    m: usize,
    seed: u64,
    theta0: Option<f64>,
    false_nulls: usize,
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let dir = out_dir(&args.out)?;
    let mut rng = SeedSpec::new(args.seed).stream(Stream::Simulation);
    let record = match args.sim {
        SimArg::Geometric => {
            let scenario = scenario_of(args.scenario)?;
            let spec = GeometricSimSpec::new(scenario);
            let (table, truth) = simulate_geometric(&spec, &mut rng).map_err(map_sim_error)?;
            schema::write_pvalue_tsv(&dir.join("data.tsv"), &table)?;
            schema::write_truth_tsv(&dir.join("truth.tsv"), table.ids(), &truth.false_nulls)?;
            SimRecord {
                command: "simulate".to_string(),
                sim: "geometric".to_string(),
                scenario: Some(scenario_name(scenario).to_string()),
                m: table.len(),
                seed: args.seed,
                theta0: None,
                false_nulls: truth.false_null_count(),
            }
        }
        SimArg::Betamix => {
            let spec = BetaMixtureSpec::standard();
            let sample = simulate_beta_mixture(&spec, &mut rng).map_err(map_sim_error)?;
            schema::write_pvalue_tsv(&dir.join("data.tsv"), &sample.table)?;
            schema::write_truth_tsv(
                &dir.join("truth.tsv"),
                sample.table.ids(),
                &sample.truth.false_nulls,
            )?;
            SimRecord {
                command: "simulate".to_string(),
                sim: "betamix".to_string(),
                scenario: None,
                m: sample.table.len(),
                seed: args.seed,
                theta0: Some(sample.theta0),
                false_nulls: sample.truth.false_null_count(),
            }
        }
        SimArg::Competition => {
            let spec = competition_spec(
                args.m,
                args.false_fraction,
                args.shift,
                args.decoys,
                args.side_info,
            )?;
            let (table, truth) = simulate_competition(&spec, &mut rng).map_err(map_sim_error)?;
            schema::write_competition_tsv(&dir.join("data.tsv"), &table)?;
            schema::write_truth_tsv(&dir.join("truth.tsv"), table.ids(), &truth.false_nulls)?;
            SimRecord {
                command: "simulate".to_string(),
                sim: "competition".to_string(),
                scenario: None,
                m: table.len(),
                seed: args.seed,
                theta0: None,
                false_nulls: truth.false_null_count(),
            }
        }
    };
    write_json(&dir.join("sim.json"), &record)?;
    println!(
        "wrote {} rows to {}",
        record.m,
        dir.join("data.tsv").display()
    );
    Ok(())
}

// ───────────────────────── validate ─────────────────────────

fn parse_alphas(raw: &str) -> Result<Vec<f64>, CliError> {
    let mut alphas = Vec::new();
    for part in raw.split(',') {
        let a: f64 = part
            .trim()
            .parse()
            .map_err(|_| usage(format!("cannot parse alpha '{part}'")))?;
        if !(a > 0.0 && a < 1.0) {
            return Err(usage(format!("alpha {a} must lie in (0, 1)")));
        }
        alphas.push(a);
    }
    if alphas.is_empty() {
        return Err(usage("--alpha list is empty"));
    }
    Ok(alphas)
}

/// One simulated data set in whichever form the generator produces.
enum SimData {
    PValues(PValueTable, GroundTruth),
    Competition(HypothesisTable, GroundTruth),
}

pub fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let alphas = parse_alphas(&args.alpha)?;
    let mode = match args.mode {
        ModeArg::Fdr => ErrorMode::Fdr,
        ModeArg::Fdp => ErrorMode::Fdp,
    };
    if args.method == ValidateMethodArg::Reset && mode == ErrorMode::Fdp && args.gamma.is_none() {
        return Err(usage("--mode fdp requires --gamma"));
    }
    if args.method == ValidateMethodArg::Bh && args.sim == SimArg::Competition {
        return Err(usage(
            "bh operates on p-values; use --sim geometric or --sim betamix",
        ));
    }
    let geometric_scenario = match args.sim {
        SimArg::Geometric => Some(scenario_of(args.scenario)?),
        _ => None,
    };
    let competition = match args.sim {
        SimArg::Competition => Some(competition_spec(
            args.m,
            args.false_fraction,
            args.shift,
            args.decoys,
            args.side_info,
        )?),
        _ => None,
    };
    let regions = ConversionRegions::new(args.a, args.b1, args.b2).map_err(map_adapter_error)?;

    let generate = |run: u64| -> Result<SimData, SimError> {
        let mut rng = SeedSpec::new(args.seed).stream_indexed(Stream::Simulation, run);
        match args.sim {
            SimArg::Geometric => {
                let spec = GeometricSimSpec::new(geometric_scenario.unwrap());
                let (t, truth) = simulate_geometric(&spec, &mut rng)?;
                Ok(SimData::PValues(t, truth))
            }
            SimArg::Betamix => {
                let spec = BetaMixtureSpec::standard();
                let sample = simulate_beta_mixture(&spec, &mut rng)?;
                Ok(SimData::PValues(sample.table, sample.truth))
            }
            SimArg::Competition => {
                let spec = competition.clone().unwrap();
                let (t, truth) = simulate_competition(&spec, &mut rng)?;
                Ok(SimData::Competition(t, truth))
            }
        }
    };

    let run_method =
        |alpha: f64, run: u64, data: SimData| -> Result<(Vec<usize>, GroundTruth), CliError> {
            match (args.method, data) {
                (ValidateMethodArg::Bh, SimData::PValues(t, truth)) => {
                    Ok((bh(t.pvalues(), alpha).indices, truth))
                }
                // Ruled out before the Monte Carlo loop starts.
                (ValidateMethodArg::Bh, SimData::Competition(..)) => {
                    unreachable!("bh/competition combinations are rejected up front")
                }
                (ValidateMethodArg::SeqstepPlus, data) => {
                    let (table, kept, c, truth) = match data {
                        SimData::PValues(pt, truth) => {
                            let (t, kept) =
                                convert_pvalues(&pt, &regions).map_err(map_adapter_error)?;
                            (t, kept, null_win_prob(&regions), truth)
                        }
                        SimData::Competition(t, truth) => {
                            let kept = (0..t.len()).collect();
                            let c = competition.as_ref().map_or(0.5, |s| s.c0());
                            (t, kept, c, truth)
                        }
                    };
                    let params = FilterParams::new(alpha, 0.1, c, ErrorMode::Fdr)
                        .map_err(map_params_error)?;
                    let mut tie_rng =
                        SeedSpec::new(args.seed ^ 0x7465).stream_indexed(Stream::TieBreak, run);
                    let ranked = RankedLabels::from_table(&table, &mut tie_rng);
                    let list = seqstep(&ranked, &params, true);
                    Ok((list.indices.iter().map(|&i| kept[i]).collect(), truth))
                }
                (ValidateMethodArg::Reset, data) => {
                    let (table, kept, c0, truth) = match data {
                        SimData::PValues(pt, truth) => {
                            let (t, kept) =
                                convert_pvalues(&pt, &regions).map_err(map_adapter_error)?;
                            (t, kept, null_win_prob(&regions), truth)
                        }
                        SimData::Competition(t, truth) => {
                            let kept = (0..t.len()).collect();
                            let c0 = competition.as_ref().map_or(0.5, |s| s.c0());
                            (t, kept, c0, truth)
                        }
                    };
                    let run_seed = args
                        .seed
                        .wrapping_add((run + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let mut config = ResetConfig::standard(
                        alpha,
                        args.gamma.unwrap_or(0.1),
                        mode,
                        SeedSpec::new(run_seed),
                    );
                    config.s = args.s;
                    config.c0 = c0;
                    config.ensemble.pseudo_c = pseudo_c(c0, args.s);
                    let outcome = run_reset(&table, &config).map_err(map_reset_error)?;
                    Ok((
                        outcome
                            .discoveries
                            .indices
                            .iter()
                            .map(|&i| kept[i])
                            .collect(),
                        truth,
                    ))
                }
            }
        };

    let dir = out_dir(&args.out)?;
    let mut report = String::from("alpha,empirical_fdr,fdr_se,power,power_se,p_fdp_exceed\n");
    let result: Result<(), CliError> = in_pool(args.threads, || {
        for (alpha_idx, &alpha) in alphas.iter().enumerate() {
            let mc = monte_carlo_validate(args.runs, alpha, |run| {
                let global = (alpha_idx * args.runs) as u64 + run;
                let data = generate(global).unwrap_or_else(|e| panic!("generator failed: {e}"));
                match run_method(alpha, global, data) {
                    Ok(pair) => pair,
                    Err(e) => panic!("method failed: {e}"),
                }
            })
            .map_err(map_sim_error)?;
            report.push_str(&format!(
                "{},{},{},{},{},{}\n",
                alpha, mc.fdr, mc.fdr_se, mc.mean_power, mc.power_se, mc.fdp_exceed_rate
            ));
        }
        Ok(())
    })?;
    result?;
    fs::write(dir.join("report.csv"), &report)
        .map_err(|e| internal(format!("report.csv: cannot write: {e}")))?;
    print!("{report}");
    Ok(())
}
