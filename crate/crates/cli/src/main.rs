use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use gaplab::codes::code::{build_generalized_bch, min_distance, vandermonde_spot_check, CodeFile, LinearCode, DEFAULT_CODEWORD_BUDGET};
use gaplab::csp::{
    audit_expansion, delta_from_distance, plant_satisfiable_instance, sample_random_instance, satisfaction_frequency, CspInstance,
    ExpansionMode, InstanceFile, DEFAULT_EXPANSION_BUDGET,
};
use gaplab::exact::{parse_rational, parse_surd, QuarticField};
use gaplab::graph::{audit_properties, densest_k_bruteforce, densest_k_localsearch, gen_gnp, EdgeProbability, GnpParams, Graph, DEFAULT_SUBSET_BUDGET};
use gaplab::lab::{report_csv, report_json, run_experiment, ExperimentConfig};
use gaplab::lasserre::oracle::gram_kind;
use gaplab::lasserre::verify::{csp_labels, dks_sets};
use gaplab::lasserre::{
    build_planted_csp_oracle, lift_to_dks, verify_csp_properties, verify_dks_lasserre, verify_min_degree, CspLabel, CspVerifyOptions,
    DksVerifyOptions, GramFile, GramKind, GramOracle, MinDegreeOptions, MomentOracle, PairEnumeration, SolutionSpace, VertexSet,
};
use gaplab::mixed::check_mixed_psd;
use gaplab::reduction::{build_reduction, densest_balanced_subgraph, soundness_report, BalancedMode, BipartiteFile, BipartiteInstance, SoundnessStatus};
use gaplab::sa::{
    build_sa_solution_with, materialize_table, sample_sets, size_constraint_profile, verify_family, Family, FamilyParams, Sampler, SaValues,
    TableAssignment, TableFile,
};
use gaplab::steiner::{steiner_size, validate_witness};

type Error = Box<dyn std::error::Error>;

/// Exit status when a verdict fails; errors exit with 2.
const VERDICT_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Integrality-gap laboratory for Densest k-Subgraph relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample G(n, p); p defaults to ln n / sqrt(n).
    GraphGen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degree and common-neighbour audit of a graph.
    Audit {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Densest k-subgraph: exhaustive with --exact, local search otherwise.
    Densest {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long)]
        exact: bool,
    },
    /// Minimum Steiner tree for a terminal list such as `0,3,7`.
    Steiner {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',')]
        terminals: Vec<u32>,
    },
    /// Steiner-tree Sherali-Adams table for a graph.
    SaBuild {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact check of one constraint family on sampled or all (S, T) pairs.
    SaVerify {
        /// Table written by sa-build; values are recomputed from its graph when absent.
        #[arg(long)]
        table: PathBuf,
        /// Graph file; overrides the path recorded in the table.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// A family name or `all`.
        #[arg(long, default_value = "all")]
        family: String,
        /// Density parameter: `auto` for n^(1/4)/L, or a value such as `1/3*n^(1/4)`.
        #[arg(long, default_value = "auto")]
        d: String,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        seed: u64,
        /// Size-constraint profile over this many sampled sets.
        #[arg(long, default_value_t = 0)]
        profile: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Eigenvalue check of the mixed-hierarchy matrices.
    PsdCheck {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generalized BCH code of length q^2 - 1 and designed distance D.
    BchGen {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        distance: usize,
        /// Write the dual code instead.
        #[arg(long)]
        dual: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum distance, orthogonality and rank audit of a code file.
    CodeAudit {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        expect_distance: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CODEWORD_BUDGET)]
        budget: u64,
        /// BCH parameters for the Vandermonde spot check.
        #[arg(long, requires = "bch_distance")]
        bch_q: Option<u32>,
        #[arg(long)]
        bch_distance: Option<usize>,
        #[arg(long)]
        seed: u64,
    },
    /// Random K-CSP over the dual of a BCH code.
    CspGen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 3)]
        distance: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random K-CSP with shifts chosen so a hidden assignment satisfies it.
    CspPlant {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 3)]
        distance: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        hidden_out: Option<PathBuf>,
    },
    /// Satisfaction frequency and expansion audit of an instance.
    CspAudit {
        #[arg(long)]
        instance: PathBuf,
        /// Largest constraint-set size `r` and `δ` as `num/den`; defaults to
        /// `4` and `D/2` for the BCH distance D.
        #[arg(long, num_args = 2, value_names = ["R", "DELTA"])]
        expansion: Option<Vec<String>>,
        #[arg(long, default_value_t = 3)]
        distance: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Sample this many constraint sets per level instead of enumerating.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Bipartite DkS instance of a CSP instance.
    Reduce {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        beta: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Densest balanced subgraph search and soundness report.
    Soundness {
        #[arg(long, alias = "bipartite")]
        bip: PathBuf,
        /// Local-search evaluations per restart.
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Gram matrix of the planted family (csp) or its lift (dks).
    LasserreBuild {
        #[arg(long)]
        instance: PathBuf,
        /// The planted family, the only one built from an instance.
        #[arg(long, default_value_t = true)]
        planted: bool,
        #[arg(long, default_value = "csp")]
        kind: String,
        /// DkS rounds; the CSP family serves rounds * K variables.
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value_t = 1)]
        beta: usize,
        #[arg(long, default_value_t = 1)]
        max_label_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a Gram file against its instance.
    LasserreVerify {
        #[arg(long, alias = "gram")]
        oracle: PathBuf,
        /// `csp`, `dks` or `mindeg`; defaults to what the file holds.
        #[arg(long)]
        what: Option<String>,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        beta: usize,
        #[arg(long, default_value_t = 10_000)]
        union_samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_graph(path: &Path) -> Result<Graph, Error> {
    Graph::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn read_instance(path: &Path) -> Result<CspInstance, Error> {
    Ok(CspInstance::from_file(read_json::<InstanceFile>(path)?)?)
}

fn bch_dual(q: u32, distance: usize) -> Result<LinearCode, Error> {
    Ok(build_generalized_bch(q, distance)?.dual())
}

fn verdict(pass: bool) -> u8 {
    if pass {
        0
    } else {
        VERDICT_FAILED
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::GraphGen { n, p, seed, out } => {
            let p = p.unwrap_or_else(|| EdgeProbability::LogOverRoot.value(n));
            let g = gen_gnp(GnpParams { n, p, seed })?;
            match out {
                Some(path) => g.write(&path)?,
                None => print!("{}", g.to_text()),
            }
            Ok(0)
        }
        Command::Audit { graph } => {
            let report = audit_properties(&read_graph(&graph)?);
            emit(&report, None)?;
            Ok(verdict(report.all_pass()))
        }
        Command::Densest { graph, k, seed, restarts, exact } => {
            let g = read_graph(&graph)?;
            let (best, method) = if exact {
                (densest_k_bruteforce(&g, k, DEFAULT_SUBSET_BUDGET)?, "exact")
            } else {
                (densest_k_localsearch(&g, k, restarts, seed)?, "local-search")
            };
            emit(
                &json!({
                    "k": k,
                    "vertices": best.vertices,
                    "edges": best.edges,
                    "average_degree": best.average_degree(),
                    "method": method,
                }),
                None,
            )?;
            Ok(0)
        }
        Command::Steiner { graph, terminals } => {
            let g = read_graph(&graph)?;
            let result = steiner_size(&g, &terminals)?;
            validate_witness(&g, &terminals, &result)?;
            emit(&result, None)?;
            Ok(0)
        }
        Command::SaBuild { graph, level, out } => {
            let g = read_graph(&graph)?;
            let sol = build_sa_solution_with(&g, level, Some(audit_properties(&g)))?;
            for w in &sol.warnings {
                eprintln!("warning: {w}");
            }
            let path = std::fs::canonicalize(&graph)?.display().to_string();
            emit(&materialize_table(&sol, Some(path))?, out.as_deref())?;
            Ok(0)
        }
        Command::SaVerify { table, graph, family, d, r, samples, exhaustive, seed, profile, report } => {
            let file: TableFile = read_json(&table)?;
            // `all` gates on the three certified families; the size family runs as a diagnostic
            let (families, diagnostic) = if family == "all" {
                (vec![Family::InclusionExclusion, Family::Dominate, Family::Density], Some(Family::Size))
            } else {
                (vec![Family::parse(&family).ok_or_else(|| format!("unknown family `{family}`"))?], None)
            };
            let graph_path = graph.or_else(|| file.graph.clone().map(PathBuf::from)).ok_or("table names no graph; pass --graph")?;
            let g = read_graph(&graph_path)?;
            if g.n() != file.n {
                return Err(format!("table has n = {}, graph has n = {}", file.n, g.n()).into());
            }
            let sampler = if exhaustive { Sampler::Exhaustive } else { Sampler::Random { samples, seed } };
            let mut params = FamilyParams::standard(file.n, file.level, r.unwrap_or(file.level));
            if d != "auto" {
                params.d = parse_surd(QuarticField::new(file.n as u64), &d)?;
            }
            let sol = build_sa_solution_with(&g, file.level, None)?;
            let stored;
            let values: &dyn SaValues = if file.values.is_some() {
                stored = TableAssignment::from_file(&file)?;
                &stored
            } else {
                &sol
            };
            let mut verdicts = Vec::new();
            for fam in families {
                verdicts.push(verify_family(values, &g, fam, &params, &sampler)?);
            }
            let pass = verdicts.iter().all(|v| v.pass());
            let mut out = json!({ "verdicts": verdicts, "d": params.d.to_string(), "pass": pass });
            if let Some(fam) = diagnostic {
                out["diagnostic"] = serde_json::to_value(verify_family(values, &g, fam, &params, &sampler)?)?;
            }
            if profile > 0 {
                let sets = sample_sets(&g, profile, file.level.saturating_sub(1).max(1), seed);
                out["size_profile"] = serde_json::to_value(size_constraint_profile(&sol, &sets)?)?;
            }
            emit(&out, report.as_deref())?;
            Ok(verdict(pass))
        }
        Command::PsdCheck { graph, level, tol, report } => {
            let v = check_mixed_psd(&read_graph(&graph)?, level, tol)?;
            let mut out = serde_json::to_value(&v)?;
            out["method"] = json!(format!("float-tol({tol:e})"));
            emit(&out, report.as_deref())?;
            Ok(verdict(v.pass()))
        }
        Command::BchGen { q, distance, dual, out } => {
            let code = build_generalized_bch(q, distance)?;
            let code = if dual { code.dual() } else { code };
            emit(&code.to_file(), out.as_deref())?;
            Ok(0)
        }
        Command::CodeAudit { code, expect_distance, budget, bch_q, bch_distance, seed } => {
            let c = LinearCode::from_file(&read_json::<CodeFile>(&code)?)?;
            let d = min_distance(&c, budget)?;
            let orthogonal = c.orthogonality_holds();
            let ranks = c.ranks_consistent();
            let vandermonde = match (bch_q, bch_distance) {
                (Some(q), Some(dd)) => Some(vandermonde_spot_check(q, dd, 100, seed)?),
                _ => None,
            };
            let pass = orthogonal && ranks && expect_distance.is_none_or(|e| d.distance >= e) && vandermonde != Some(false);
            emit(
                &json!({
                    "K": c.length(),
                    "dim": c.dim(),
                    "size": c.size().to_string(),
                    "min_distance": d,
                    "orthogonal": orthogonal,
                    "ranks_consistent": ranks,
                    "vandermonde": vandermonde,
                    "pass": pass,
                }),
                None,
            )?;
            Ok(verdict(pass))
        }
        Command::CspGen { n, m, q, distance, seed, out } => {
            let inst = sample_random_instance(n, m, bch_dual(q, distance)?, seed)?;
            emit(&inst.to_file(), out.as_deref())?;
            Ok(0)
        }
        Command::CspPlant { n, m, q, distance, seed, out, hidden_out } => {
            let (inst, hidden) = plant_satisfiable_instance(n, m, bch_dual(q, distance)?, seed)?;
            emit(&inst.to_file(), out.as_deref())?;
            if let Some(path) = hidden_out {
                emit(&hidden, Some(&path))?;
            }
            Ok(0)
        }
        Command::CspAudit { instance, expansion, distance, trials, samples, seed, report } => {
            let inst = read_instance(&instance)?;
            let (r, delta) = match expansion.as_deref() {
                Some([r, delta]) => (r.parse::<usize>().map_err(|e| format!("--expansion R: {e}"))?, parse_rational(delta)?),
                _ => (4, delta_from_distance(distance)),
            };
            let freq = satisfaction_frequency(&inst, trials, seed);
            let mode = match samples {
                Some(samples) => ExpansionMode::Sampled { samples, seed },
                None => ExpansionMode::Exhaustive { budget: DEFAULT_EXPANSION_BUDGET },
            };
            let exp = audit_expansion(&inst, r, &delta, mode)?;
            emit(&json!({ "satisfaction": freq, "satisfaction_method": format!("sampled({trials})"), "expansion": exp }), report.as_deref())?;
            Ok(verdict(exp.pass))
        }
        Command::Reduce { instance, beta, out } => {
            let bi = build_reduction(read_instance(&instance)?, beta)?;
            emit(&bi.to_file(), out.as_deref())?;
            Ok(0)
        }
        Command::Soundness { bip, budget, restarts, seed, report } => {
            let bi = BipartiteInstance::from_file(read_json::<BipartiteFile>(&bip)?)?;
            let k = bi.k();
            let best = densest_balanced_subgraph(&bi, k, k, BalancedMode::Search { samples: budget, restarts, seed })?;
            let rep = soundness_report(&bi, &best);
            emit(&json!({ "report": rep, "left": best.left, "right": best.right }), report.as_deref())?;
            Ok(verdict(rep.status != SoundnessStatus::Fail))
        }
        Command::LasserreBuild { instance, planted, kind, rounds, beta, max_label_size, out } => {
            if !planted {
                return Err("only the planted family can be built from an instance".into());
            }
            let inst = read_instance(&instance)?;
            let space = SolutionSpace::from_instance(&inst)?;
            let oracle = build_planted_csp_oracle(&inst, space, rounds * inst.arity())?;
            match kind.as_str() {
                "csp" => {
                    // plus every satisfying (T_i, α), which the perfect-value checks read
                    let mut labels: Vec<CspLabel> = csp_labels(inst.n(), inst.q(), max_label_size);
                    let mut seen: std::collections::HashSet<CspLabel> = labels.iter().cloned().collect();
                    for (i, c) in inst.constraints().iter().enumerate() {
                        for alpha in inst.satisfying_patterns(i) {
                            let label = CspLabel::new(c.vars.iter().copied().zip(alpha).collect()).ok_or("repeated variable in a constraint")?;
                            if seen.insert(label.clone()) {
                                labels.push(label);
                            }
                        }
                    }
                    let gram = GramOracle::from_oracle(&oracle, labels)?;
                    emit(&gram.to_file(GramKind::Csp), out.as_deref())?;
                }
                "dks" => {
                    let bi = build_reduction(inst, beta)?;
                    let lifted = lift_to_dks(&oracle, &bi, rounds)?;
                    let labels: Vec<VertexSet> = dks_sets(&lifted, bi.vertex_count(), max_label_size, PairEnumeration::All);
                    let gram = GramOracle::from_oracle(&lifted, labels)?;
                    emit(&gram.to_file(GramKind::Dks), out.as_deref())?;
                }
                other => return Err(format!("unknown kind `{other}`; expected csp or dks").into()),
            }
            Ok(0)
        }
        Command::LasserreVerify { oracle, what, instance, beta, union_samples, seed, report } => {
            let inst = read_instance(&instance)?;
            let text = std::fs::read_to_string(&oracle)?;
            let kind = gram_kind(&text)?;
            let what = what.unwrap_or_else(|| if kind == GramKind::Csp { "csp".into() } else { "dks".into() });
            let pass = match (kind, what.as_str()) {
                (GramKind::Csp, "csp") => {
                    let oracle = GramOracle::from_file(serde_json::from_str::<GramFile<CspLabel>>(&text)?)?;
                    let v = verify_csp_properties(&oracle, &inst, &CspVerifyOptions { union_samples, seed, ..Default::default() });
                    emit(&json!({ "csp": v }), report.as_deref())?;
                    v.pass
                }
                (GramKind::Dks, "dks") => {
                    let oracle = GramOracle::from_file(serde_json::from_str::<GramFile<VertexSet>>(&text)?)?;
                    let bi = build_reduction(inst, beta)?;
                    let v = verify_dks_lasserre(&oracle, &bi, &DksVerifyOptions { union_samples, seed, ..Default::default() });
                    emit(&json!({ "dks": v }), report.as_deref())?;
                    v.pass
                }
                (GramKind::Dks, "mindeg") => {
                    let oracle = GramOracle::from_file(serde_json::from_str::<GramFile<VertexSet>>(&text)?)?;
                    // the min-degree sums read labels on two vertices
                    if oracle.round_bound() < 2 {
                        return Err("min-degree checks need a Gram file with labels on two vertices (--max-label-size 2)".into());
                    }
                    let bi = build_reduction(inst, beta)?;
                    let v = verify_min_degree(&oracle, &bi, &MinDegreeOptions { pairs: PairEnumeration::All, ..Default::default() });
                    emit(&json!({ "min_degree": v }), report.as_deref())?;
                    v.pass
                }
                (kind, what) => return Err(format!("cannot run `{what}` checks on a {kind:?} Gram file").into()),
            };
            Ok(verdict(pass))
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            if cfg.output.report.is_none() {
                print!("{}", report_json(&report));
            }
            if cfg.output.table.is_none() {
                eprint!("{}", report_csv(&report));
            }
            Ok(verdict(report.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

