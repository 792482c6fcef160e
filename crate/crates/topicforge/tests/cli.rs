use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_topicforge");

fn topicforge(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_json(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn synthetic(sizes: &[(&str, usize)]) -> Value {
    let topics: Vec<Value> = sizes
        .iter()
        .map(|(id, size)| json!({"id": id, "size": size}))
        .collect();
    json!({"spec": {"topics": topics}, "seed": 11})
}

fn small_experiment() -> Value {
    json!({
        "synthetic": synthetic(&[("A", 260), ("B", 260), ("C", 260)]),
        "schemes": ["gtl-dec-inc", "sgtl-equ-inc", "baseline"],
        "stage_counts": [2, 3],
        "repeats": 2,
        "trainer": {"hash_dim": 1024}
    })
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "exp.json", &small_experiment());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = topicforge(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = topicforge(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert_eq!(code(&second), 0);
    assert_eq!(stdout(&first), stdout(&second));

    let files = read_dir(&a);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "per_topic_baseline_1.csv",
            "per_topic_gtl-dec-inc_2.csv",
            "per_topic_gtl-dec-inc_3.csv",
            "per_topic_sgtl-equ-inc_2.csv",
            "per_topic_sgtl-equ-inc_3.csv",
            "run.json",
            "sweep.csv",
        ]
    );
    assert_eq!(files, read_dir(&b));

    let manifest: Value = serde_json::from_slice(&fs::read(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], json!([1, 2]));
    let cell = &manifest["result"]["cells"][1];
    assert_eq!(cell["scheme"], "gtl-dec-inc");
    assert_eq!(cell["stages"], 3);
    let alloc = &cell["runs"][0]["allocations"][0];
    assert_eq!(alloc["target_sizes"], json!([25, 50, 125]));
    assert_eq!(alloc["source_sizes"].as_array().unwrap().len(), 3);

    let sweep = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("scheme,baseline,baseline_sd,s2,s2_sd,s3,s3_sd\n"));
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn output_dir_from_config_is_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = small_experiment();
    exp["schemes"] = json!(["baseline"]);
    exp["output_dir"] = json!("results");
    let cfg = write_json(dir.path(), "exp.json", &exp);
    assert_eq!(
        code(&topicforge(&["run", "--config", cfg.to_str().unwrap()])),
        0
    );
    assert!(dir.path().join("results/sweep.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();
    let mut unknown = small_experiment();
    unknown["epochs"] = json!(3);
    cases.push(unknown);
    let mut both = small_experiment();
    both["corpus"] = json!({"path": "x.jsonl"});
    cases.push(both);
    let mut mismatch = small_experiment();
    mismatch["seeds"] = json!([1, 2, 3]);
    cases.push(mismatch);
    let mut stages = small_experiment();
    stages["stage_counts"] = json!([0]);
    cases.push(stages);
    let mut trainer = small_experiment();
    trainer["trainer"] = json!({"hash_dim": 1000});
    cases.push(trainer);
    for (i, c) in cases.iter().enumerate() {
        let cfg = write_json(dir.path(), &format!("bad{i}.json"), c);
        let out = topicforge(&["run", "--config", cfg.to_str().unwrap()]);
        assert_eq!(
            code(&out),
            2,
            "case {i}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        code(&topicforge(&["run", "--config", "/nonexistent.json"])),
        2
    );
}

#[test]
fn topic_failures_soft_and_strict() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = small_experiment();
    exp["synthetic"] = synthetic(&[("A", 260), ("B", 260), ("tiny", 100)]);
    let cfg = write_json(dir.path(), "exp.json", &exp);
    let out_dir = dir.path().join("out");
    let soft = topicforge(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&soft), 0);
    let manifest: Value =
        serde_json::from_slice(&fs::read(out_dir.join("run.json")).unwrap()).unwrap();
    for cell in manifest["result"]["cells"].as_array().unwrap() {
        let failures = cell["failures"].as_array().unwrap();
        assert_eq!(failures.len(), 2);
        assert!(failures.iter().all(|f| f["topic_id"] == "tiny"));
    }
    let strict = topicforge(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--strict",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&strict), 3);
}

#[test]
fn external_trainer_runs_and_protocol_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = small_experiment();
    exp["schemes"] = json!(["sgtl-dec-inc"]);
    exp["stage_counts"] = json!([2]);
    exp["repeats"] = json!(1);
    let builtin = write_json(dir.path(), "builtin.json", &exp);
    exp["trainer"] = json!({"kind": "external", "hash_dim": 1024, "external_cmd": format!("'{BIN}' serve-builtin")});
    let external = write_json(dir.path(), "external.json", &exp);
    let a = topicforge(&[
        "run",
        "--config",
        builtin.to_str().unwrap(),
        "--out",
        dir.path().join("a").to_str().unwrap(),
    ]);
    let b = topicforge(&[
        "run",
        "--config",
        external.to_str().unwrap(),
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert_eq!(code(&b), 0, "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(stdout(&a), stdout(&b));

    exp["trainer"]["external_cmd"] =
        json!("read l; echo '{\"ok\":true}'; read l; echo '{\"ok\":false,\"error\":\"boom\"}'");
    let broken = write_json(dir.path(), "broken.json", &exp);
    let out = topicforge(&[
        "run",
        "--config",
        broken.to_str().unwrap(),
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("boom"));
}

fn synth_corpus(dir: &Path) -> PathBuf {
    let spec = json!({
        "topics": [{"id": "T", "size": 300}, {"id": "far", "size": 100}, {"id": "near", "size": 100}, {"id": "mid", "size": 100}],
        "overlaps": [
            {"topic": "far", "anchor": "T", "fraction": 0.0},
            {"topic": "mid", "anchor": "T", "fraction": 0.4},
            {"topic": "near", "anchor": "T", "fraction": 0.8}
        ]
    });
    let spec_path = write_json(dir, "spec.json", &spec);
    let corpus = dir.join("corpus.jsonl");
    let out = topicforge(&[
        "synth",
        "--spec",
        spec_path.to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    corpus
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let text = fs::read_to_string(&corpus).unwrap();
    assert_eq!(text.lines().count(), 600);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["topic"], "T");
    let again = topicforge(&[
        "synth",
        "--spec",
        dir.path().join("spec.json").to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn plan_and_similarity_commands() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let c = corpus.to_str().unwrap();

    let sim = topicforge(&["similarity", "--corpus", c, "--target", "T", "--seed", "4"]);
    assert_eq!(code(&sim), 0);
    let text = stdout(&sim);
    let ids: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(text.lines().next(), Some("topic_id,similarity"));
    assert_eq!(ids, ["far", "mid", "near"]);

    let plan = topicforge(&[
        "plan",
        "--corpus",
        c,
        "--target",
        "T",
        "--scheme",
        "sgtl-equ-inc",
        "--stages",
        "3",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&plan), 0, "{}", String::from_utf8_lossy(&plan.stderr));
    let plan: Value = serde_json::from_str(&stdout(&plan)).unwrap();
    assert_eq!(plan["scheme"], "sgtl-equ-inc");
    assert_eq!(plan["target"], "T");
    let stages = plan["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 3);
    let sizes: Vec<usize> = stages
        .iter()
        .map(|s| s["target_ids"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, [25, 50, 125]);
    assert!(stages[2]["source_ids"].as_array().unwrap().is_empty());
    assert_eq!(plan["test_ids"].as_array().unwrap().len(), 100);
    // The least similar topic feeds the first stage.
    let first = stages[0]["source_ids"][0].as_str().unwrap();
    assert!(first.starts_with("far-"), "{first}");

    let out_path = dir.path().join("plan.json");
    let written = topicforge(&[
        "plan",
        "--corpus",
        c,
        "--target",
        "far",
        "--scheme",
        "baseline",
        "--stages",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    // 100 claims cannot hold a 200-claim budget.
    assert_eq!(code(&written), 1);
    assert!(String::from_utf8_lossy(&written.stderr).contains("leaves fewer than 50"));
}

#[test]
fn eval_command() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(
        &labels,
        "id,label,topic\na,1,X\nb,0,X\nc,1,X\nd,1,X\ne,0,Y\nf,1,Y\n",
    )
    .unwrap();
    let scores = dir.path().join("scores.csv");
    fs::write(
        &scores,
        "id,score\na,0.9\nb,0.8\nc,0.7\nd,0.6\ne,0.1\nf,0.2\n",
    )
    .unwrap();
    let out = topicforge(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        stdout(&out),
        "topic_id,avep,n_test,n_relevant\nX,0.8056,4,3\nY,1.0000,2,1\nMAP,0.9028,6,4\n"
    );
    let total = topicforge(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--format",
        "json",
        "--ap-denominator",
        "total",
    ]);
    let v: Value = serde_json::from_str(&stdout(&total)).unwrap();
    assert!(
        (v["per_topic"][0]["avep"].as_f64().unwrap() - (1.0 + 2.0 / 3.0 + 0.75) / 4.0).abs()
            < 1e-12
    );

    fs::write(&scores, "id,score\na,0.9\nb,0.8\n").unwrap();
    let missing = topicforge(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
    ]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no score"));
}

const TOPICS: [&str; 14] = [
    "CT20-AR-01",
    "CT20-AR-02",
    "CT20-AR-05",
    "CT20-AR-08",
    "CT20-AR-10",
    "CT20-AR-12",
    "CT20-AR-14",
    "CT20-AR-19",
    "CT20-AR-23",
    "CT20-AR-27",
    "CT20-AR-30",
    "Covid-19",
    "CT21-AR-01",
    "CT21-AR-02",
];
const BASELINE: [f64; 14] = [
    0.6883, 0.6935, 0.6002, 0.3796, 0.4660, 0.8467, 0.7354, 0.8497, 0.3723, 0.6403, 0.5730, 0.7101,
    0.6471, 0.8554,
];
const SGTL_D6: [f64; 14] = [
    0.7022, 0.9231, 0.9207, 0.5439, 0.6146, 0.8778, 0.7816, 0.8945, 0.3073, 0.6392, 0.7085, 0.7092,
    0.7717, 0.88,
];
const IMPROVEMENT: [i64; 14] = [1, 23, 32, 16, 15, 3, 5, 4, -7, 0, 14, 0, 12, 2];

#[test]
fn compare_reproduces_published_improvements() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, values: &[f64]| {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "topic_id,avep").unwrap();
        for (t, v) in TOPICS.iter().zip(values) {
            writeln!(f, "{t},{v}").unwrap();
        }
        path
    };
    let base = write("base.csv", &BASELINE);
    let cand = write("cand.csv", &SGTL_D6);
    let out = topicforge(&[
        "compare",
        "--baseline",
        base.to_str().unwrap(),
        "--candidate",
        cand.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 15);
    let points: Vec<i64> = rows[..14].iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(points, IMPROVEMENT);
    assert_eq!(rows[14], ["Average", "0.6470", "0.7339", "0.0869", "9"]);

    let table = topicforge(&[
        "compare",
        "--baseline",
        base.to_str().unwrap(),
        "--candidate",
        cand.to_str().unwrap(),
    ]);
    let table = stdout(&table);
    assert_eq!(table.lines().count(), 17);
    assert!(table.lines().last().unwrap().ends_with("9%"));

    let other = write("other.csv", &BASELINE[..13]);
    let mismatch = topicforge(&[
        "compare",
        "--baseline",
        base.to_str().unwrap(),
        "--candidate",
        other.to_str().unwrap(),
    ]);
    assert_eq!(code(&mismatch), 1);
}

#[test]
fn serve_builtin_over_pipes() {
    let mut child = Command::new(BIN)
        .arg("serve-builtin")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let requests = [
        json!({"cmd": "init", "config": {"hash_dim": 1024}, "seed": 3, "protocol": 1}),
        json!({"cmd": "train_stage", "stage": 1, "examples": [{"text": "a b", "label": 1}, {"text": "c d", "label": 0}, {"text": "a c", "label": 1}]}),
        json!({"cmd": "score", "texts": ["a", "c", "z"]}),
        json!({"cmd": "shutdown"}),
    ];
    let input: String = requests.iter().map(|r| format!("{r}\n")).collect();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let replies: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(replies.len(), 4);
    let scores = replies[2]["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 3);
    assert!(scores
        .iter()
        .all(|s| (0.0..=1.0).contains(&s.as_f64().unwrap())));
    assert!(scores[0].as_f64().unwrap() > scores[1].as_f64().unwrap());
}
