//! Acceptance gate. Each criterion is one test that prints a single
//! PASS line on success; a failure shows up as the usual failed test.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use impact_core::corpus::{self, Label, Split};
use impact_core::experiment::{build_feature_cache, run_experiment};
use impact_core::fusion::{self, nonlinear_select, DevOutput, FusionConfig, Winner};
use impact_core::roc::{pair_count_auc, roc_auc};
use impact_core::sparse::SparseVector;
use impact_core::svm::{train_linear_svm, TrainParams};
use impact_core::{kmeans, report, synthetic, text};

fn pass(criterion: u32, what: &str) {
    println!("ACCEPTANCE criterion {criterion} ({what}): PASS");
}

// ------------------------------------------------------------ criterion 1

fn check_auc_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..1000 {
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(2..=12);
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            scores.push(rng.gen_range(0..levels) as f64 / levels as f64);
            labels.push(rng.gen_bool(0.5));
        }
        labels[0] = true;
        labels[1] = false;
        let curve = roc_auc(&scores, &labels).unwrap();
        let oracle = pair_count_auc(&scores, &labels).unwrap();
        assert_eq!(curve.auc.to_bits(), oracle.to_bits(), "case {case}");
    }
}

fn exhaustive_kmeans_optimum(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    let mut assign = vec![0usize; n];
    for code in 0..(k as u64).pow(n as u32) {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = (c % k as u64) as usize;
            c /= k as u64;
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut obj = 0.0;
        for (p, &a) in points.iter().zip(&assign) {
            for (s, &v) in sums[a].iter().zip(p) {
                let d = v - s / counts[a] as f64;
                obj += d * d;
            }
        }
        best = best.min(obj);
    }
    best
}

fn check_kmeans_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..200 {
        let k = rng.gen_range(1..=3usize);
        let extra = rng.gen_range(0..10usize);
        let n = rng.gen_range(k..=12usize.min(k + extra));
        let dim = rng.gen_range(1..=3usize);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let oracle = exhaustive_kmeans_optimum(&points, k);
        let (centroids, _) =
            kmeans::fit_kmeans_restarts(&points, k, case as u64, 20, 100, 1e-12).unwrap();
        let got = kmeans::objective(&points, &centroids);
        assert!(got <= oracle * (1.0 + 1e-6) + 1e-9, "case {case}: {got} vs {oracle}");
        assert!(got >= oracle - 1e-9 - oracle * 1e-9, "case {case}");
    }
}

fn svm_primal(points: &[Vec<f64>], labels: &[bool], w: &[f64], b: f64, lambda: f64) -> f64 {
    let mut hinge = 0.0;
    for (p, &l) in points.iter().zip(labels) {
        let y = if l { 1.0 } else { -1.0 };
        let f: f64 = p.iter().zip(w).map(|(x, wv)| x * wv).sum::<f64>() + b;
        hinge += (1.0 - y * f).max(0.0);
    }
    hinge / points.len() as f64 + lambda * w.iter().map(|v| v * v).sum::<f64>()
}

fn svm_grid_oracle(points: &[Vec<f64>], labels: &[bool], dim: usize, lambda: f64) -> f64 {
    let mut center = vec![0.0f64; dim + 1];
    let mut half_range = 16.0f64;
    let steps = 10i64;
    let mut best = f64::INFINITY;
    for _ in 0..7 {
        let mut best_point = center.clone();
        let mut stack = vec![(0usize, center.clone())];
        while let Some((axis, point)) = stack.pop() {
            if axis == dim + 1 {
                let obj = svm_primal(points, labels, &point[..dim], point[dim], lambda);
                if obj < best {
                    best = obj;
                    best_point = point;
                }
                continue;
            }
            for s in -steps..=steps {
                let mut p = point.clone();
                p[axis] = center[axis] + s as f64 * half_range / steps as f64;
                stack.push((axis + 1, p));
            }
        }
        center = best_point;
        half_range *= 0.25;
    }
    best
}

fn check_svm_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..100u64 {
        let dim = rng.gen_range(1..=2usize);
        let n = rng.gen_range(4..=20usize);
        let lambda = [0.05, 0.1, 0.5][rng.gen_range(0..3)];
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let shift = if i % 2 == 0 { 1.0 } else { -1.0 };
            points.push(
                (0..dim)
                    .map(|_| shift * rng.gen_range(0.0..1.5) + rng.gen_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            );
            labels.push(i % 2 == 0);
        }
        let x: Vec<SparseVector> = points.iter().map(|p| SparseVector::from_dense(p)).collect();
        let params = TrainParams {
            lambda,
            tol: 1e-8,
            max_iters: 2_000_000,
            seed: case,
        };
        let model = train_linear_svm(&x, &labels, &params, "oracle").unwrap();
        let got = model.linear_primal_objective(&x, &labels).unwrap();
        let oracle = svm_grid_oracle(&points, &labels, dim, lambda);
        assert!(
            (got - oracle).abs() <= 1e-3 * oracle.max(1e-3),
            "case {case}: {got} vs {oracle}"
        );
    }
}

fn check_tfidf_worked_example() {
    let d1: Vec<String> = ["cat", "cat", "dog"].iter().map(|s| s.to_string()).collect();
    let d2: Vec<String> = ["dog", "bird"].iter().map(|s| s.to_string()).collect();
    let docs = [d1.clone(), d2.clone()];
    let vocab = text::build_vocabulary(docs.iter().map(|d| d.iter()), 100).unwrap();
    let ln32 = (3.0f64 / 2.0).ln();
    assert!((vocab.idf("cat").unwrap() - ln32).abs() < 1e-12);
    assert!((vocab.idf("dog").unwrap()).abs() < 1e-12);
    assert!((vocab.idf("bird").unwrap() - ln32).abs() < 1e-12);
    let v1 = text::tfidf_vector(&d1, &vocab);
    assert!((v1.vector.get(vocab.column("cat").unwrap()) - 1.0).abs() < 1e-12);
    let v2 = text::tfidf_vector(&d2, &vocab);
    assert!((v2.vector.get(vocab.column("bird").unwrap()) - 1.0).abs() < 1e-12);
}

#[test]
fn criterion_1_oracle_equivalences() {
    for (name, check) in [
        ("auc", check_auc_equivalence as fn()),
        ("kmeans", check_kmeans_equivalence),
        ("svm", check_svm_equivalence),
        ("tfidf", check_tfidf_worked_example),
    ] {
        let start = Instant::now();
        check();
        let took = start.elapsed();
        assert!(took < Duration::from_secs(60), "{name} oracle took {took:?}");
    }
    pass(1, "oracle equivalences, each under 60s");
}

// ------------------------------------------------------------ criterion 2

#[test]
fn criterion_2_property_suite_under_ten_minutes() {
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let start = Instant::now();
    let status = Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()))
        .args(["test", "-p", "impact-core", "--test", "properties", "--quiet"])
        .current_dir(&workspace)
        .status()
        .expect("cargo should be runnable");
    let took = start.elapsed();
    assert!(status.success(), "property suite failed");
    assert!(took < Duration::from_secs(600), "property suite took {took:?}");
    pass(2, "module invariants as property tests, under 10 minutes");
}

// --------------------------------------------- shared synthetic demo run

struct DemoRun {
    _dir: tempfile::TempDir,
    out: PathBuf,
    took: Duration,
}

fn impact_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_impact"))
}

fn run_demo(jobs: u32, out: &Path) -> Duration {
    let start = Instant::now();
    let output = impact_cmd()
        .args(["--jobs", &jobs.to_string(), "demo-synthetic", "--seed", "1", "--out"])
        .arg(out)
        .output()
        .expect("demo binary should run");
    assert!(
        output.status.success(),
        "demo-synthetic --jobs {jobs} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    start.elapsed()
}

fn demo_jobs1() -> &'static DemoRun {
    static DEMO: OnceLock<DemoRun> = OnceLock::new();
    DEMO.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("demo");
        let took = run_demo(1, &out);
        DemoRun { _dir: dir, out, took }
    })
}

fn demo_auc(run: &DemoRun, train: &str, test: &str, classifier: &str) -> f64 {
    let path = run.out.join("reports").join(format!("{train}-{test}")).join("report.jsonl");
    let rep = report::load_report(&path).unwrap();
    rep.classifiers[classifier].auc
}

// ------------------------------------------------------------ criterion 3

#[test]
fn criterion_3_synthetic_end_to_end_quality() {
    let run = demo_jobs1();
    assert!(run.took < Duration::from_secs(600), "demo took {:?}", run.took);

    for d in synthetic::SYNTH_DOMAINS {
        let text_auc = demo_auc(run, d, d, "text");
        let vis_auc = demo_auc(run, d, d, "visual");
        let meta_auc = demo_auc(run, d, d, "meta");
        assert!(text_auc >= 0.90, "{d} intra text AUC {text_auc}");
        assert!(vis_auc >= 0.75, "{d} intra visual AUC {vis_auc}");
        assert!(
            meta_auc >= text_auc.max(vis_auc) - 0.02,
            "{d} intra meta AUC {meta_auc} vs bases ({text_auc}, {vis_auc})"
        );
    }
    for (train, test) in [("plasma", "glacier"), ("glacier", "plasma")] {
        let text_auc = demo_auc(run, train, test, "text");
        let vis_auc = demo_auc(run, train, test, "visual");
        assert!(text_auc <= 0.60, "{train}->{test} inter text AUC {text_auc}");
        assert!(
            vis_auc >= text_auc + 0.05,
            "{train}->{test} inter visual AUC {vis_auc} vs text {text_auc}"
        );
    }

    // the planted high-class token must surface among the top positive weights
    let models = run.out.join("models").join("plasma");
    let output = impact_cmd()
        .arg("top-features")
        .arg("--model")
        .arg(models.join("text-model.txt"))
        .arg("--vocab")
        .arg(models.join("vocabulary.json"))
        .args(["--n", "20"])
        .output()
        .expect("top-features should run");
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let positive = stdout
        .split("most positive")
        .nth(1)
        .expect("positive section present");
    assert!(
        positive.contains(&synthetic::planted_token("plasma")),
        "planted token missing from positive list:\n{stdout}"
    );
    pass(3, "synthetic end-to-end AUC targets and planted token");
}

// ------------------------------------------------------------ criterion 4

#[test]
fn criterion_4_selector_gamma_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synthetic::SyntheticSpec { docs_per_cell: 10, seed: 1 };
    let manifest_path = synthetic::generate(dir.path(), &spec).unwrap();
    let mut parsed = corpus::parse_manifest(&manifest_path, dir.path()).unwrap();
    let split = corpus::split_corpus(&parsed.manifest, [0.7, 0.15, 0.15], spec.seed).unwrap();
    corpus::apply_split(&mut parsed.manifest, &split);
    let mut config = synthetic::demo_config(spec.seed);
    config.folds = 3;
    let cache = build_feature_cache(&parsed.manifest, &config.sift_params()).unwrap();
    let output = run_experiment(&parsed.manifest, &cache, "plasma", "plasma", &config).unwrap();

    // rebuild the dev-split inputs exactly as the pipeline saw them
    let mut dev_docs: Vec<_> = parsed
        .manifest
        .records
        .iter()
        .filter(|r| r.domain == "plasma" && r.split == Some(Split::Dev))
        .collect();
    dev_docs.sort_by(|a, b| a.id.cmp(&b.id));
    assert!(!dev_docs.is_empty());

    let mut dev_outputs = Vec::new();
    let gamma_one = FusionConfig {
        gamma: 1.0,
        auc_text: output.meta.auc_text,
        auc_vis: output.meta.auc_vis,
    };
    let mut agree = 0usize;
    for doc in &dev_docs {
        let t = text::tfidf_vector(&cache.tokens[&doc.id], &output.vocabulary).vector;
        let v = output
            .visual_vocabulary
            .standardized_bovw(&cache.descriptors[&doc.id])
            .unwrap();
        let (tp, vp) = output.meta.base_probs(&t, &v).unwrap();
        let (label, winner) = nonlinear_select(&tp, &vp, &gamma_one);
        let text_label = if tp.is_high() { Label::High } else { Label::Low };
        if winner == Winner::Text && label == text_label {
            agree += 1;
        }
        dev_outputs.push(DevOutput {
            text: tp,
            vis: vp,
            label: doc.label.unwrap(),
        });
    }
    assert_eq!(agree, dev_docs.len(), "gamma=1 must reduce to the text classifier");

    // sweep over the fixed grid: deterministic and identical to the run's pick
    let grid = fusion::default_gamma_grid();
    let g1 = fusion::sweep_gamma(&dev_outputs, output.meta.auc_text, output.meta.auc_vis, &grid)
        .unwrap();
    let g2 = fusion::sweep_gamma(&dev_outputs, output.meta.auc_text, output.meta.auc_vis, &grid)
        .unwrap();
    assert_eq!(g1.to_bits(), g2.to_bits());
    assert_eq!(g1.to_bits(), output.report.selector_gamma.to_bits());
    pass(4, "gamma=1 equals text on all dev docs; sweep deterministic");
}

// ------------------------------------------------------------ criterion 5

fn collect_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn criterion_5_reports_independent_of_job_count() {
    let run1 = demo_jobs1();
    let dir8 = tempfile::tempdir().unwrap();
    let out8 = dir8.path().join("demo");
    run_demo(8, &out8);

    for sub in ["reports", "models"] {
        let a = collect_files(&run1.out.join(sub));
        let b = collect_files(&out8.join(sub));
        assert!(!a.is_empty());
        let names_a: Vec<_> = a.iter().map(|(p, _)| p.clone()).collect();
        let names_b: Vec<_> = b.iter().map(|(p, _)| p.clone()).collect();
        assert_eq!(names_a, names_b, "{sub} file sets differ");
        for ((path, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
            assert_eq!(bytes_a, bytes_b, "{sub}/{} differs between job counts", path.display());
        }
    }
    pass(5, "jobs=1 and jobs=8 artifacts byte-identical");
}

// ------------------------------------------------ CLI contract invariants

#[test]
fn artifacts_embed_config_hash_seed_and_version() {
    let run = demo_jobs1();
    let rep = report::load_report(
        &run.out.join("reports").join("plasma-plasma").join("report.jsonl"),
    )
    .unwrap();
    assert_eq!(rep.config_hash.len(), 16);
    assert!(rep.config_hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(rep.seed, 1);
    assert_eq!(rep.toolkit_version, impact_core::TOOLKIT_VERSION);

    let model = std::fs::read_to_string(run.out.join("models/plasma/text-model.txt")).unwrap();
    assert!(model.lines().any(|l| l.starts_with("seed ")));
    assert!(model.lines().any(|l| l.starts_with("fingerprint ")));
}

#[test]
fn fingerprint_mismatch_exits_with_validation_code() {
    let run = demo_jobs1();
    let output = impact_cmd()
        .arg("top-features")
        .arg("--model")
        .arg(run.out.join("models/plasma/text-model.txt"))
        .arg("--vocab")
        .arg(run.out.join("models/glacier/vocabulary.json"))
        .args(["--n", "5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "expected validation exit code");
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("fingerprint"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_with_code_one() {
    let output = impact_cmd().arg("no-such-command").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}
