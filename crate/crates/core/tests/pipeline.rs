use gaplab::codes::code::{build_generalized_bch, CodeFile, LinearCode};
use gaplab::csp::{plant_satisfiable_instance, CspInstance, InstanceFile};
use gaplab::graph::{gen_gnp, GnpParams, Graph};
use gaplab::lab::{report_json, run_experiment, ExperimentConfig, WORKERS_ENV};
use gaplab::lasserre::{build_planted_csp_oracle, GramFile, GramKind, GramOracle, MomentOracle, SolutionSpace};
use gaplab::lasserre::verify::csp_labels;
use gaplab::reduction::{build_reduction, planted_witness, BipartiteFile, BipartiteInstance};
use gaplab::sa::{build_sa_solution, materialize_table, verify_family, Family, FamilyParams, Sampler, TableAssignment, TableFile};

fn roundtrip<T: serde::Serialize + serde::de::DeserializeOwned>(value: &T) -> T {
    serde_json::from_str(&serde_json::to_string(value).unwrap()).unwrap()
}

#[test]
fn graph_and_table_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_gnp(GnpParams::standard(40, 3)).unwrap();
    let path = dir.path().join("g.txt");
    g.write(&path).unwrap();
    let back = Graph::read(&path).unwrap();
    assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());

    let sol = build_sa_solution(&back, 3).unwrap();
    let table: TableFile = roundtrip(&materialize_table(&sol, None).unwrap());
    let stored = TableAssignment::from_file(&table).unwrap();
    for family in [Family::InclusionExclusion, Family::Dominate] {
        let params = FamilyParams::standard(40, 3, 3);
        let live = verify_family(&sol, &g, family, &params, &Sampler::Random { samples: 300, seed: 5 }).unwrap();
        let from_file = verify_family(&stored, &g, family, &params, &Sampler::Random { samples: 300, seed: 5 }).unwrap();
        assert_eq!(live, from_file);
    }
}

#[test]
fn planted_pipeline_through_files() {
    let code: LinearCode = LinearCode::from_file(&roundtrip::<CodeFile>(&build_generalized_bch(3, 3).unwrap().dual().to_file())).unwrap();
    assert_eq!(code.size(), 27);
    let (inst, hidden) = plant_satisfiable_instance(10, 10, code, 4).unwrap();
    assert_eq!(inst.satisfied_count(&hidden), 10);
    let inst = CspInstance::from_file(roundtrip::<InstanceFile>(&inst.to_file())).unwrap();
    assert_eq!(inst.satisfied_count(&hidden), 10);

    let bi = build_reduction(inst.clone(), 1).unwrap();
    let bi = BipartiteInstance::from_file(roundtrip::<BipartiteFile>(&bi.to_file())).unwrap();
    assert_eq!(bi.vertex_count(), 300);
    let (_, _, edges) = planted_witness(&bi, &hidden).unwrap();
    assert_eq!(edges, 80);

    let space = SolutionSpace::from_instance(&inst).unwrap();
    let oracle = build_planted_csp_oracle(&inst, space, 8).unwrap();
    let labels = csp_labels(10, 3, 1);
    let gram = GramOracle::from_oracle(&oracle, labels.clone()).unwrap();
    let back = GramOracle::from_file(roundtrip::<GramFile<_>>(&gram.to_file(GramKind::Csp))).unwrap();
    for a in &labels {
        for b in &labels {
            assert_eq!(back.inner(a, b).unwrap(), oracle.inner(a, b).unwrap());
        }
    }
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let cfg = ExperimentConfig::from_json(
        r#"{"version": 1, "kind": "sa-gap", "params": {"n": 128, "level": 2, "samples": 40, "profile_samples": 4, "restarts": 3},
            "seeds": [3, 1, 2]}"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for workers in ["1", "3"] {
        std::env::set_var(WORKERS_ENV, workers);
        reports.push(report_json(&run_experiment(&cfg).unwrap()));
    }
    std::env::remove_var(WORKERS_ENV);
    assert_eq!(reports[0], reports[1]);
    let report: serde_json::Value = serde_json::from_str(&reports[0]).unwrap();
    let seeds: Vec<u64> = report["runs"].as_array().unwrap().iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![3, 1, 2]);
    for run in report["runs"].as_array().unwrap() {
        for key in ["relaxation", "integral", "ratio"] {
            assert!(run[key]["method"].is_string(), "{key} lacks a method tag");
        }
    }
}
