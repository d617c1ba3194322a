use std::fs;

use robustkit::experiments::{emit_csv, parse_csv, parse_grid_cells, run_grid, ExperimentGrid, Method, Metric};
use robustkit::instance::parse_instance;

fn small_grid() -> ExperimentGrid {
    ExperimentGrid {
        cells: parse_grid_cells("8,2,3; 10,3,5; 12,4,10").unwrap(),
        instances: 30,
        master_seed: 99,
        workers: 2,
        ..ExperimentGrid::default()
    }
}

#[test]
fn lp_apriori_never_worse_than_midpoint_on_average() {
    let results = run_grid(&small_grid()).unwrap();
    for cell in &results.cells {
        assert_eq!(cell.failures, 0);
        for k in 1..=cell.cell.p.min(3) {
            let lp = cell.mean(Metric::Apriori, Method::Lp, Some(k)).unwrap();
            let mid = cell.mean(Metric::Apriori, Method::Mid, Some(k)).unwrap();
            assert!(lp <= mid + 1e-9, "{:?} k={k}: LP {lp} > Mid {mid}", cell.cell);
            assert!(mid <= cell.cell.big_n as f64 + 1e-9);
        }
        let opt = cell.mean(Metric::Opt, Method::Opt, None).unwrap();
        let mm = cell.mean(Metric::Lb, Method::MaxMin, None).unwrap();
        let mid_lb = cell.mean(Metric::Lb, Method::Mid, None).unwrap();
        let mid_ub = cell.mean(Metric::Ub, Method::Mid, None).unwrap();
        assert!(mid_lb <= mm + 1e-6 && mm <= opt + 1e-6 && opt <= mid_ub + 1e-6);
    }
}

#[test]
fn csv_round_trips_and_seed_matters() {
    let grid = small_grid();
    let csv = emit_csv(&run_grid(&grid).unwrap(), false);
    let rows = parse_csv(&csv).unwrap();
    assert!(rows.iter().all(|r| r.runtime_ms.is_none()));
    assert_eq!(rows.len(), csv.lines().count() - 1);

    let other = ExperimentGrid {
        master_seed: 100,
        ..grid
    };
    assert_ne!(csv, emit_csv(&run_grid(&other).unwrap(), false));
}

#[test]
fn timing_fills_runtime_column() {
    let grid = ExperimentGrid {
        instances: 3,
        ..small_grid()
    };
    let rows = parse_csv(&emit_csv(&run_grid(&grid).unwrap(), true)).unwrap();
    assert!(rows.iter().all(|r| r.runtime_ms.is_some_and(|t| t >= 0.0)));
}

#[test]
fn dumped_instances_are_parseable() {
    let dir = tempdir();
    let grid = ExperimentGrid {
        cells: parse_grid_cells("6,2,3").unwrap(),
        instances: 4,
        dump_dir: Some(dir.clone()),
        ..ExperimentGrid::default()
    };
    run_grid(&grid).unwrap();
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "inst_6_2_3_0.txt",
            "inst_6_2_3_1.txt",
            "inst_6_2_3_2.txt",
            "inst_6_2_3_3.txt"
        ]
    );
    for name in names {
        let (u, spec) = parse_instance(&fs::read_to_string(dir.join(name)).unwrap()).unwrap();
        assert_eq!((u.num_items(), u.num_scenarios(), spec.dimension()), (6, 3, 6));
    }
    fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("robustkit-dump-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}
