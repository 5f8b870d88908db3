use cci_core::bench::{run_nonlinear_suite, SuiteOptions, SuiteTest};
use cci_core::dataset::Dataset;
use cci_core::graph::Graph;
use cci_core::simulate::{random_dag_fixed_edges, simulate_generalized};

#[test]
fn dataset_and_dag_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dag = random_dag_fixed_edges(6, 7, 2).unwrap();
    let (data, sem) = simulate_generalized(dag, 14, 200, 2).unwrap();

    let csv = dir.path().join("data.csv");
    data.save_csv(&csv).unwrap();
    assert_eq!(Dataset::load_csv(&csv).unwrap(), data);

    let edges = dir.path().join("dag.txt");
    std::fs::write(&edges, sem.dag().to_edge_list()).unwrap();
    let back = Graph::parse_edge_list(&std::fs::read_to_string(&edges).unwrap()).unwrap();
    assert_eq!(&back, sem.dag().graph());
}

#[test]
fn missing_file_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent.csv");
    let msg = Dataset::load_csv(&path).unwrap_err().to_string();
    assert!(msg.contains("absent.csv"), "{msg}");
}

#[test]
fn report_csv_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let report = run_nonlinear_suite(
        &[SuiteTest::Oracle],
        &[12],
        100,
        2,
        0,
        SuiteOptions::default(),
    )
    .unwrap();
    report.save_csv(&path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("nonlinear,oracle,100,12,")));
}
