//! End-to-end tests of the `hrx` binary: golden completions, simulation
//! determinism, the fit pipeline, format round trips and the exit-code
//! contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrx_cli::formats;
use hrx_core::{check_precision, SymMatrix, DEFAULT_PSD_TOL};
use nalgebra::DMatrix;
use tempfile::TempDir;

fn hrx(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrx"))
        .args(args)
        .current_dir(dir)
        .env_remove("EGK_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

/// Four-node partial matrix on the block graph, integer entries.
const BLOCK_MATRIX: &str = "\
0 3 ? 1
3 0 10 2
? 10 0 ?
1 2 ? 0
";

const BLOCK_GRAPH: &str = "1 2\n1 4\n2 3\n2 4\n";

/// Five-node instance: full initial matrix and the non-decomposable graph.
const GOLDEN5_MATRIX: &str = "\
0 0.23 0.08 0.09 0.21
0.23 0 0.14 0.23 0.19
0.08 0.14 0 0.11 0.20
0.09 0.23 0.11 0 0.16
0.21 0.19 0.20 0.16 0
";

const GOLDEN5_GRAPH: &str = "1 2\n1 4\n1 5\n2 3\n3 4\n4 5\n";

const RING_MATRIX: &str = "\
0 1 ? 64
1 0 1 ?
? 1 0 1
64 ? 1 0
";

const RING_GRAPH: &str = "1 2\n2 3\n3 4\n1 4\n";

/// The published six-dimensional precision matrix with its diagonal
/// re-derived so rows sum to zero.
fn theta_d6_file(dir: &Path) -> PathBuf {
    let printed = [
        10.06, -4.09, -1.65, -5.51, 2.37, -1.17, //
        -4.09, 4.09, 0.0, 0.0, 0.0, 0.0, //
        -1.65, 0.0, 11.78, -9.10, -1.69, 0.65, //
        -5.51, 0.0, -9.10, 32.21, -4.94, -12.66, //
        2.37, 0.0, -1.69, -4.94, 4.27, 0.0, //
        -1.17, 0.0, 0.65, -12.66, 0.0, 13.19,
    ];
    let mut m = DMatrix::from_row_slice(6, 6, &printed);
    for i in 0..6 {
        let off: f64 = (0..6).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -off;
    }
    check_precision(&SymMatrix::new(m.clone()).unwrap(), DEFAULT_PSD_TOL).unwrap();
    let path = dir.join("theta_d6.txt");
    formats::write_matrix(&path, &m).unwrap();
    path
}

fn d6_graph_file(dir: &Path) -> PathBuf {
    write(
        dir,
        "graph_d6.txt",
        "1 2\n1 3\n1 4\n1 5\n1 6\n3 4\n3 5\n3 6\n4 5\n4 6\n",
    )
}

fn read_matrix_dense(path: &Path) -> DMatrix<f64> {
    formats::read_matrix(path).unwrap().to_dense().unwrap()
}

#[test]
fn complete_block_golden_files() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let matrix = write(dir, "m.txt", BLOCK_MATRIX);
    let graph = write(dir, "g.txt", BLOCK_GRAPH);
    let out = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let gamma = read_matrix_dense(&dir.join("m_gamma.txt"));
    assert!((gamma[(0, 2)] - 13.0).abs() <= 1e-9);
    assert!((gamma[(2, 3)] - 12.0).abs() <= 1e-9);
    let theta = read_matrix_dense(&dir.join("m_theta.txt"));
    assert!(theta[(0, 2)].abs() <= 1e-8);
    assert!(theta[(2, 3)].abs() <= 1e-8);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("m_report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert_eq!(report["algorithm"], "block-path-sums");
    assert_eq!(report["schema_version"], "1");
}

#[test]
fn complete_golden_five_node_instance() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let matrix = write(dir, "g5.txt", GOLDEN5_MATRIX);
    let graph = write(dir, "graph5.txt", GOLDEN5_GRAPH);
    let out = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let gamma = read_matrix_dense(&dir.join("g5_gamma.txt"));
    for ((i, j), expected) in [
        ((0, 2), 0.17),
        ((1, 3), 0.20),
        ((1, 4), 0.35),
        ((2, 4), 0.26),
    ] {
        assert!(
            (gamma[(i, j)] - expected).abs() <= 0.005,
            "entry ({i},{j}) = {} vs {expected}",
            gamma[(i, j)]
        );
    }
    // edge entries unchanged
    assert_eq!(gamma[(0, 1)], 0.23);
    assert_eq!(gamma[(3, 4)], 0.16);
}

#[test]
fn complete_decomposable_non_block_route() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    // square with one chord: decomposable, but its separator has two nodes
    let matrix = write(
        dir,
        "chordal.txt",
        "0 1 1.5 1.1\n1 0 1.2 ?\n1.5 1.2 0 1.3\n1.1 ? 1.3 0\n",
    );
    let graph = write(dir, "cg.txt", "1 2\n1 3\n2 3\n3 4\n1 4\n");
    let out = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("chordal_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["algorithm"], "decomposable-recursion");
    assert_eq!(report["converged"], true);
    let gamma = read_matrix_dense(&dir.join("chordal_gamma.txt"));
    assert_eq!(gamma[(0, 1)], 1.0, "specified entries survive bit-exactly");
    let theta = read_matrix_dense(&dir.join("chordal_theta.txt"));
    assert!(theta[(1, 3)].abs() <= 1e-8);
}

#[test]
fn complete_infeasible_ring_exits_3() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let matrix = write(dir, "ring.txt", RING_MATRIX);
    let graph = write(dir, "rg.txt", RING_GRAPH);
    let out = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&out), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("ring_report.json")).unwrap()).unwrap();
    assert!(report["feasibility"]
        .as_str()
        .unwrap()
        .starts_with("infeasible"));
}

#[test]
fn complete_partial_nondecomposable_needs_init() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    // restrict the five-node matrix by hand: only graph entries specified
    let partial = "\
0 0.23 ? 0.09 0.21
0.23 0 0.14 ? ?
? 0.14 0 0.11 ?
0.09 ? 0.11 0 0.16
0.21 ? ? 0.16 0
";
    let matrix = write(dir, "p5.txt", partial);
    let graph = write(dir, "graph5.txt", GOLDEN5_GRAPH);
    let without = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&without), 3);
    let init = write(dir, "init.txt", GOLDEN5_MATRIX);
    let with = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
            "--init",
            init.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&with), 0, "stderr: {}", String::from_utf8_lossy(&with.stderr));
    let gamma = read_matrix_dense(&dir.join("p5_gamma.txt"));
    assert!((gamma[(0, 2)] - 0.17).abs() <= 0.005);
}

#[test]
fn simulate_reproducible_and_validated() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let params = theta_d6_file(dir);
    let run = |out_name: &str, seed: &str| {
        let out = hrx(
            &[
                "simulate",
                "--params",
                params.to_str().unwrap(),
                "--n",
                "200",
                "--seed",
                seed,
                "--out",
                out_name,
            ],
            dir,
        );
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.join(out_name)).unwrap()
    };
    let a = run("a.csv", "9");
    let b = run("b.csv", "9");
    let c = run("c.csv", "10");
    assert_eq!(a, b, "same seed must give byte-identical output");
    assert_ne!(a, c);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("a.json")).unwrap()).unwrap();
    let rate = sidecar["acceptance_rate"].as_f64().unwrap();
    assert!(rate > 0.0 && rate <= 1.0);
    assert!(sidecar["mass_estimate"].as_f64().unwrap() >= 1.0 - 0.2);

    // identity matrix is neither a variogram nor a precision matrix
    let bad = write(dir, "id.txt", "1 0\n0 1\n");
    let out = hrx(
        &[
            "simulate",
            "--params",
            bad.to_str().unwrap(),
            "--n",
            "10",
            "--out",
            "x.csv",
        ],
        dir,
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn simulate_seed_env_fallback() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let params = theta_d6_file(dir);
    let with_flag = hrx(
        &[
            "simulate",
            "--params",
            params.to_str().unwrap(),
            "--n",
            "50",
            "--seed",
            "77",
            "--out",
            "flag.csv",
        ],
        dir,
    );
    assert_eq!(code(&with_flag), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_hrx"))
        .args([
            "simulate",
            "--params",
            params.to_str().unwrap(),
            "--n",
            "50",
            "--out",
            "env.csv",
        ])
        .current_dir(dir)
        .env("EGK_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.join("flag.csv")).unwrap(),
        fs::read(dir.join("env.csv")).unwrap()
    );
}

#[test]
fn fit_pipeline_zero_pattern_and_mst() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let params = theta_d6_file(dir);
    let out = hrx(
        &[
            "simulate",
            "--params",
            params.to_str().unwrap(),
            "--n",
            "1500",
            "--seed",
            "11",
            "--out",
            "data.csv",
        ],
        dir,
    );
    assert_eq!(code(&out), 0);
    let graph = d6_graph_file(dir);

    // fit on the true graph: precision vanishes exactly off the graph
    let out = hrx(
        &[
            "fit",
            "--data",
            "data.csv",
            "--graph",
            graph.to_str().unwrap(),
            "--p",
            "0.9",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let theta = read_matrix_dense(&dir.join("data_theta.txt"));
    let edges: Vec<(usize, usize)> = vec![
        (0, 1),
        (0, 2),
        (0, 3),
        (0, 4),
        (0, 5),
        (2, 3),
        (2, 4),
        (2, 5),
        (3, 4),
        (3, 5),
    ];
    for i in 0..6 {
        for j in (i + 1)..6 {
            if edges.contains(&(i, j)) {
                assert!(theta[(i, j)].abs() > 1e-6, "edge ({i},{j}) vanished");
            } else {
                assert!(theta[(i, j)].abs() <= 1e-6, "non-edge ({i},{j}) nonzero");
            }
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("data_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["edge_count"], 10);
    assert_eq!(report["converged"], true);
    assert!(report["chi_fitted"].as_array().unwrap().len() == 6);

    // spanning-tree fit: d - 1 edges
    let out = hrx(
        &[
            "fit",
            "--data",
            "data.csv",
            "--graph",
            "mst",
            "--p",
            "0.9",
            "--out-prefix",
            "mstfit",
        ],
        dir,
    );
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("mstfit_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["edge_count"], 5);

    // complete graph: the completion is the empirical variogram itself
    let out = hrx(
        &[
            "fit",
            "--data",
            "data.csv",
            "--graph",
            "complete",
            "--p",
            "0.9",
            "--out-prefix",
            "cfit",
        ],
        dir,
    );
    assert_eq!(code(&out), 0);
    let gamma_hat = read_matrix_dense(&dir.join("cfit_gamma_hat.txt"));
    let gamma = read_matrix_dense(&dir.join("cfit_gamma.txt"));
    assert!((gamma - gamma_hat).amax() <= 1e-10);
}

#[test]
fn fit_split_reports_validation_likelihoods() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let params = theta_d6_file(dir);
    assert_eq!(
        code(&hrx(
            &[
                "simulate",
                "--params",
                params.to_str().unwrap(),
                "--n",
                "1200",
                "--seed",
                "12",
                "--out",
                "data.csv",
            ],
            dir,
        )),
        0
    );
    let graph = d6_graph_file(dir);
    let out = hrx(
        &[
            "fit",
            "--data",
            "data.csv",
            "--graph",
            graph.to_str().unwrap(),
            "--p",
            "0.9",
            "--split",
            "0.6",
            "--seed",
            "3",
            "--mc",
            "20000",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("data_report.json")).unwrap())
            .unwrap();
    let split = &report["split"];
    assert_eq!(split["n_train"], 720);
    assert_eq!(split["n_validation"], 480);
    assert!(split["pareto_loglik_validation"].as_f64().unwrap().is_finite());
    assert!(split["surrogate_loglik_validation"].as_f64().unwrap().is_finite());
    assert!(split["log_mass"].as_f64().unwrap().is_finite());
}

#[test]
fn fit_outputs_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let params = theta_d6_file(dir);
    assert_eq!(
        code(&hrx(
            &[
                "simulate",
                "--params",
                params.to_str().unwrap(),
                "--n",
                "600",
                "--seed",
                "31",
                "--out",
                "data.csv",
            ],
            dir,
        )),
        0
    );
    let graph = d6_graph_file(dir);
    let run = |prefix: &str| {
        let out = hrx(
            &[
                "fit",
                "--data",
                "data.csv",
                "--graph",
                graph.to_str().unwrap(),
                "--p",
                "0.9",
                "--split",
                "0.7",
                "--seed",
                "5",
                "--mc",
                "10000",
                "--out-prefix",
                prefix,
            ],
            dir,
        );
        assert_eq!(code(&out), 0);
    };
    run("runa");
    run("runb");
    for suffix in ["_gamma.txt", "_theta.txt", "_gamma_hat.txt", "_graph.txt"] {
        assert_eq!(
            fs::read(dir.join(format!("runa{suffix}"))).unwrap(),
            fs::read(dir.join(format!("runb{suffix}"))).unwrap(),
            "outputs differ for {suffix}"
        );
    }
    // reports differ only in the embedded paths; compare with them masked
    let normalize = |name: &str| {
        fs::read_to_string(dir.join(name))
            .unwrap()
            .replace("runa", "run")
            .replace("runb", "run")
    };
    assert_eq!(normalize("runa_report.json"), normalize("runb_report.json"));
}

#[test]
fn chi_command_and_threshold_validation() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mut csv = String::from("a,b\n");
    for i in 0..200 {
        csv.push_str(&format!("{},{}\n", i, 2 * i + 7));
    }
    let data = write(dir, "mono.csv", &csv);
    let out = hrx(
        &[
            "chi",
            "--data",
            data.to_str().unwrap(),
            "--p",
            "0.9",
            "--out",
            "chi.txt",
        ],
        dir,
    );
    assert_eq!(code(&out), 0);
    let chi = read_matrix_dense(&dir.join("chi.txt"));
    assert_eq!(chi[(0, 1)], 1.0);
    assert_eq!(chi[(0, 0)], 1.0);

    let out = hrx(
        &[
            "chi",
            "--data",
            data.to_str().unwrap(),
            "--p",
            "1.5",
            "--out",
            "chi.txt",
        ],
        dir,
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn transform_and_learn_tree() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let params = theta_d6_file(dir);
    assert_eq!(
        code(&hrx(
            &[
                "simulate",
                "--params",
                params.to_str().unwrap(),
                "--n",
                "800",
                "--seed",
                "21",
                "--out",
                "data.csv",
            ],
            dir,
        )),
        0
    );
    let out = hrx(
        &["transform", "--data", "data.csv", "--out", "t.csv"],
        dir,
    );
    assert_eq!(code(&out), 0);
    let (_, values, _) = formats::read_csv(&dir.join("t.csv")).unwrap();
    assert!(values.iter().all(|&v| v > 0.0), "exponential margins are positive");

    let out = hrx(
        &[
            "learn-tree",
            "--data",
            "data.csv",
            "--p",
            "0.9",
            "--out",
            "tree.txt",
        ],
        dir,
    );
    assert_eq!(code(&out), 0);
    let tree = formats::read_graph(&dir.join("tree.txt"), Some(6)).unwrap();
    assert_eq!(tree.num_edges(), 5);
    assert!(hrx_core::is_connected(&tree));
}

#[test]
fn exhausted_budget_exits_2() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let matrix = write(dir, "g5.txt", GOLDEN5_MATRIX);
    let graph = write(dir, "graph5.txt", GOLDEN5_GRAPH);
    let out = hrx(
        &[
            "complete",
            "--matrix",
            matrix.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
            "--max-iter",
            "1",
            "--theta-tol",
            "1e-12",
        ],
        dir,
    );
    assert_eq!(code(&out), 2);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("g5_report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], false);
    assert_eq!(report["iterations"], 1);
    // the best iterate is still written
    assert!(dir.join("g5_gamma.txt").exists());
}

#[test]
fn missing_files_and_bad_matrices_exit_1() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let out = hrx(
        &[
            "complete",
            "--matrix",
            "nope.txt",
            "--graph",
            "also_nope.txt",
        ],
        dir,
    );
    assert_eq!(code(&out), 1);

    let ragged = write(dir, "ragged.txt", "0 1\n1 0 2\n");
    let graph = write(dir, "g.txt", "1 2\n");
    let out = hrx(
        &[
            "complete",
            "--matrix",
            ragged.to_str().unwrap(),
            "--graph",
            graph.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn matrix_format_round_trip_with_placeholders() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mut p = hrx_core::PartialVariogram::unspecified(4);
    p.set(0, 1, 3.0);
    p.set(0, 3, 1.0 / 3.0);
    p.set(1, 2, 10.123456789012345);
    p.set(1, 3, 2.0);
    let path = dir.join("partial.txt");
    formats::write_partial_matrix(&path, &p).unwrap();
    let parsed = formats::read_matrix(&path).unwrap();
    assert!(!parsed.fully_specified());
    let back = parsed.to_partial().unwrap();
    assert_eq!(back, p, "write-then-read must be identity");

    // full matrices round-trip bit exactly as well
    let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.1 + 0.2, 0.1 + 0.2, 0.0]);
    let path = dir.join("full.txt");
    formats::write_matrix(&path, &m).unwrap();
    assert_eq!(read_matrix_dense(&path), m);
}

#[test]
fn graph_format_names_comments_duplicates() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let path = write(
        dir,
        "named.txt",
        "# a comment\nnames: north south east west\nnorth south\nsouth east\n2 3 # duplicate of south east\nwest north\n",
    );
    let g = formats::read_graph(&path, None).unwrap();
    assert_eq!(g.num_nodes(), 4);
    assert_eq!(g.edges(), vec![(0, 1), (0, 3), (1, 2)]);

    let round = dir.join("plain.txt");
    formats::write_graph(&round, &g).unwrap();
    let g2 = formats::read_graph(&round, Some(4)).unwrap();
    assert_eq!(g.edges(), g2.edges());
}

#[test]
fn csv_missing_values_dropped() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let path = write(
        dir,
        "holes.csv",
        "x,y\n1.0,2.0\nNA,3.0\n4.0,\n5.0,6.0\n",
    );
    let (headers, data, dropped) = formats::read_csv(&path).unwrap();
    assert_eq!(headers, vec!["x".to_string(), "y".to_string()]);
    assert_eq!(dropped, 2);
    assert_eq!(data.nrows(), 2);
    assert_eq!(data[(1, 1)], 6.0);
}
