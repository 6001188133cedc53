use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn logat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logat"))
        .args(args)
        .env_remove("LOGAT_MODE")
        .env_remove("LOGAT_GRID")
        .env_remove("LOGAT_MOCK")
        .output()
        .expect("logat runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, videos: u32) -> String {
    let out = dir.join("smoke");
    let o = logat(&["synth", out.to_str().unwrap(), "--videos", &videos.to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.to_str().unwrap().to_string()
}

fn closed_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn mock_eval_is_perfect_and_fast() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = synth(dir.path(), 10);
    let run = dir.path().join("run");
    let started = Instant::now();
    let o = logat(&["eval", &format!("{smoke}/dataset.json"), "--mock", "--json", "-o", run.to_str().unwrap()]);
    assert!(started.elapsed() < Duration::from_secs(10));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["overall_accuracy"], 1.0);
    assert_eq!(v["report"]["total"], 50);
    for f in ["report.json", "report.txt", "predictions.jsonl"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_dir(run.join("transcripts")).unwrap().count(), 10);
}

#[test]
fn transcribe_writes_both_caption_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = synth(dir.path(), 1);
    let out = dir.path().join("v00.glt.jsonl");
    let o = logat(&["transcribe", &format!("{smoke}/videos/v00"), "--mock", "--json", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["manifest"]["entry_count"], 5);
    let text = std::fs::read_to_string(&out).unwrap();
    let entries: Vec<serde_json::Value> = text.lines().skip(1).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 5);
    assert!(entries.iter().all(|e| e["global_caption"].is_string() && e["local_caption"].is_string()));

    let ask = logat(&[
        "ask",
        out.to_str().unwrap(),
        "--mock",
        "--json",
        "-q",
        "What happens in v00-q2?",
        "-o",
        "alpha,beta",
        "-o",
        "gamma,delta,epsilon",
    ]);
    assert!(ask.status.success(), "{}", stderr(&ask));
    let v: serde_json::Value = serde_json::from_str(&stdout(&ask)).unwrap();
    assert!(v["prediction"]["chosen_index"].is_u64());
}

#[test]
fn invalid_grid_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = synth(dir.path(), 1);
    let o = logat(&["transcribe", &format!("{smoke}/videos/v00"), "--mock", "--grid", "0x3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.rows"), "{}", stderr(&o));
    let o = logat(&["eval", "x.json", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_in_global_mode_warns() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = synth(dir.path(), 1);
    let out = dir.path().join("g.glt.jsonl");
    let o = logat(&[
        "transcribe",
        &format!("{smoke}/videos/v00"),
        "--mock",
        "--mode",
        "global",
        "--grid",
        "3x3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    assert!(!std::fs::read_to_string(out).unwrap().contains("local_caption\":\""));
}

#[test]
fn missing_decoder_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("clip.mp4");
    std::fs::write(&video, b"not really a video").unwrap();
    let o = logat(&[
        "transcribe",
        video.to_str().unwrap(),
        "--mock",
        "--decoder",
        "no-such-decoder-xyz -i {input} -r {fps} {output}/%06d.png",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn unreachable_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = synth(dir.path(), 1);
    let url = format!("http://127.0.0.1:{}", closed_port());
    let o = logat(&["transcribe", &format!("{smoke}/videos/v00"), "--vlm-url", &url, "--retries", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = logat(&["eval", &format!("{smoke}/dataset.json"), "--vlm-url", &url, "--retries", "0", "-o", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("r/report.json").is_file());
}

#[test]
fn undecodable_video_in_eval_exits_4_but_scores_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = synth(dir.path(), 3);
    std::fs::write(format!("{smoke}/videos/v01/000002.png"), b"junk").unwrap();
    let o = logat(&["eval", &format!("{smoke}/dataset.json"), "--mock", "--json", "-o", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["total"], 10);
    assert_eq!(v["failures"][0]["video_id"], "v01");
}
