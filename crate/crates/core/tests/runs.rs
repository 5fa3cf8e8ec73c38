mod common;

use proptest::prelude::*;

use edgesim::config::{LoadKind, PolicyKind};
use edgesim::experiment::{execute, execute_sequential, expand, write_outputs, RunRow, SweepSpec};
use edgesim::metrics::LocationClass;
use edgesim::sim::run;

const POLICIES: [PolicyKind; 5] = [
    PolicyKind::Cledge,
    PolicyKind::AdaptiveCloudEdge,
    PolicyKind::CloudEdge,
    PolicyKind::CloudOnly,
    PolicyKind::EdgeOnly,
];

fn policy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(POLICIES.to_vec())
}

fn load() -> impl Strategy<Value = LoadKind> {
    prop::sample::select(vec![LoadKind::Light, LoadKind::Heavy, LoadKind::Alternating])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn replay_is_deterministic(p in policy(), l in load(), seed in any::<u64>()) {
        let cfg = common::small_config(p, l, 3.0);
        let a = run(&cfg, seed).unwrap();
        let b = run(&cfg, seed).unwrap();
        prop_assert_eq!(&a.report, &b.report);
        prop_assert_eq!(a.outcomes.len(), b.outcomes.len());
    }

    #[test]
    fn every_task_is_accounted_for(p in policy(), l in load(), seed in any::<u64>()) {
        let cfg = common::small_config(p, l, 3.0);
        let out = run(&cfg, seed).unwrap();
        let r = common::check_conservation(&out);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
        prop_assert!(out.report.generated > 0);
    }
}

#[test]
fn different_seeds_differ() {
    let cfg = common::small_config(PolicyKind::Cledge, LoadKind::Heavy, 3.0);
    assert_ne!(run(&cfg, 1).unwrap().report, run(&cfg, 2).unwrap().report);
}

#[test]
fn cloud_only_never_runs_at_the_edge() {
    for load in [LoadKind::Light, LoadKind::Heavy] {
        let cfg = common::small_config(PolicyKind::CloudOnly, load, 5.0);
        let out = run(&cfg, 3).unwrap();
        assert_eq!(out.report.location, Some([0.0, 0.0, 1.0]));
        for o in &out.outcomes {
            if let Some(loc) = o.location {
                assert_eq!(loc, LocationClass::Cloud);
            }
        }
    }
}

#[test]
fn edge_only_stays_on_the_access_node() {
    let cfg = common::small_config(PolicyKind::EdgeOnly, LoadKind::Heavy, 5.0);
    let (_, access) = common::access_nodes(&cfg);
    let out = run(&cfg, 4).unwrap();
    assert_eq!(out.report.traffic.get("sync_tier1").copied().unwrap_or(0), 0);
    for o in &out.outcomes {
        assert_eq!(o.redirects, 0);
        if let Some(n) = o.executed_at {
            assert!(access.contains(&n), "executed at {n:?}");
            assert_eq!(o.location, Some(LocationClass::HomeEdge));
        }
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let mut cfg = common::small_config(PolicyKind::Cledge, LoadKind::Light, 2.0);
    cfg.seeds = vec![5, 6, 7];
    let spec = SweepSpec {
        policies: vec![PolicyKind::Cledge, PolicyKind::CloudEdge],
        ..SweepSpec::default()
    };
    let a = execute(expand(&cfg, &spec).unwrap()).unwrap();
    let b = execute_sequential(expand(&cfg, &spec).unwrap()).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.label, y.label);
        let rx: Vec<_> = x.runs.iter().map(|r| (r.seed, &r.report)).collect();
        let ry: Vec<_> = y.runs.iter().map(|r| (r.seed, &r.report)).collect();
        assert_eq!(rx, ry);
    }
}

#[test]
fn runs_csv_round_trips() {
    let mut cfg = common::small_config(PolicyKind::Cledge, LoadKind::Heavy, 2.0);
    cfg.seeds = vec![1, 2];
    let spec = SweepSpec {
        policies: vec![PolicyKind::Cledge, PolicyKind::EdgeOnly],
        ..SweepSpec::default()
    };
    let results = execute(expand(&cfg, &spec).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &results, true).unwrap();

    let mut expected = Vec::new();
    for p in &results {
        let rows: Vec<RunRow> = p
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| edgesim::experiment::run_row(p, i, r))
            .collect();
        let agg = edgesim::experiment::aggregate_rows(p, &rows);
        expected.extend(rows);
        expected.extend(agg);
    }
    let mut rd = csv::Reader::from_path(dir.path().join("runs.csv")).unwrap();
    let got: Vec<RunRow> = rd.deserialize().map(Result::unwrap).collect();
    assert_eq!(got, expected);

    let summary: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);

    for n in 0..4 {
        let path = dir.path().join(format!("tasks_{n}.csv"));
        let mut rd = csv::Reader::from_path(&path).unwrap();
        let count = rd.records().count() as u64;
        let run = &results[n / 2].runs[n % 2];
        assert_eq!(count, run.report.generated, "{}", path.display());
    }
}
