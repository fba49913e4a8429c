use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellvault_core::model::canonical::sha256_hex;
use cellvault_core::store::Store;
use serde_json::Value;

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        let env = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        assert_eq!(env.run(&["init"]).status.code(), Some(0));
        env
    }

    fn store(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_cellvault"))
            .args(args)
            .env("CELLVAULT_STORE", self.store())
            .env_remove("CELLVAULT_ACTOR")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// Commits a one-cell CSV workbook (sheet `S`) per value.
    fn lineage(&self, values: &[&str]) -> Vec<String> {
        let csv = self.dir.path().join("S.csv");
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                fs::write(&csv, format!("{v}\n")).unwrap();
                let ts = format!("2026-03-01T10:00:{i:02}.000Z");
                let out = self.ok(&[
                    "commit",
                    "-w",
                    "w1",
                    "-f",
                    csv.to_str().unwrap(),
                    "--author",
                    "ada",
                    "--timestamp",
                    &ts,
                ]);
                out.lines().next().unwrap().to_string()
            })
            .collect()
    }
}

#[test]
fn commit_prints_the_commit_id() {
    let env = Env::new();
    let ids = env.lineage(&["1"]);
    assert_eq!(ids[0].len(), 64);
    assert!(ids[0].bytes().all(|b| b.is_ascii_hexdigit()));
    let store = Store::open(env.store()).unwrap();
    assert_eq!(store.resolve("w1", "latest").unwrap().commit_id, ids[0]);
}

#[test]
fn diff_jsonl_is_one_library_record_per_line() {
    let env = Env::new();
    let csv = env.dir.path().join("S.csv");
    fs::write(&csv, "1,2,3\n4,5,6\n").unwrap();
    env.ok(&[
        "commit",
        "-w",
        "w1",
        "-f",
        csv.to_str().unwrap(),
        "--author",
        "ada",
    ]);
    fs::write(&csv, "1,9,3\n4,5\nx,y,z\n").unwrap();
    env.ok(&[
        "commit",
        "-w",
        "w1",
        "-f",
        csv.to_str().unwrap(),
        "--author",
        "ada",
    ]);

    let store = Store::open(env.store()).unwrap();
    let log = store.log("w1").unwrap();
    let expected = store
        .diff_commits("w1", &log[0].commit_id, &log[1].commit_id)
        .unwrap();
    assert_eq!(expected.len(), 5);

    let out = env.ok(&[
        "diff",
        "-w",
        "w1",
        "--from",
        &log[0].commit_id,
        "--to",
        &log[1].commit_id,
        "--output",
        "jsonl",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), expected.len());
    for (line, record) in lines.iter().zip(&expected) {
        assert_eq!(line.as_bytes(), serde_json::to_vec(record).unwrap());
    }
}

#[test]
fn json_output_matches_library_serialization() {
    let env = Env::new();
    env.lineage(&["40", "40", "40", "50"]);
    let store = Store::open(env.store()).unwrap();
    let cases: Vec<(Vec<&str>, Vec<u8>)> = vec![
        (
            vec!["log", "-w", "w1"],
            serde_json::to_vec(&store.log("w1").unwrap()).unwrap(),
        ),
        (
            vec!["report", "retirement", "-w", "w1", "--window", "3"],
            serde_json::to_vec(&store.retirement_report("w1", 3).unwrap()).unwrap(),
        ),
        (
            vec!["history", "-w", "w1", "--cell", "S!A1", "--window", "4"],
            serde_json::to_vec(
                &store
                    .cell_history("w1", &"S!A1".parse().unwrap(), 4)
                    .unwrap(),
            )
            .unwrap(),
        ),
    ];
    for (mut args, expected) in cases {
        args.extend(["--output", "json"]);
        let out = env.ok(&args);
        assert_eq!(
            out.strip_suffix('\n').unwrap().as_bytes(),
            expected,
            "{args:?}"
        );
    }
}

#[test]
fn history_shows_the_step_sequence() {
    let env = Env::new();
    let ids = env.lineage(&["40", "40", "40", "50"]);
    let out = env.ok(&["history", "-w", "w1", "--cell", "S!A1", "--window", "4"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5, "{out}");
    let flags: Vec<(&str, &str)> = lines[..4]
        .iter()
        .map(|l| {
            let parts: Vec<&str> = l.split_whitespace().collect();
            (
                *parts.last().unwrap(),
                if parts.len() == 4 { "*" } else { " " },
            )
        })
        .collect();
    assert_eq!(flags, [("40", "*"), ("40", " "), ("40", " "), ("50", "*")]);
    assert!(lines[0].starts_with(&ids[0][..12]));
    assert_eq!(lines[4], "pattern: Step");
}

#[test]
fn exit_codes() {
    let env = Env::new();
    let code = |args: &[&str]| env.run(args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["log"]), Some(2), "missing --workbook");
    assert_eq!(
        code(&["history", "-w", "w1", "--cell", "S!A1", "--window", "many"]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "rules",
            "add",
            "-w",
            "w1",
            "--target",
            "S!A1",
            "--kind",
            "delta-abs"
        ]),
        Some(2)
    );
    assert_eq!(code(&["log", "-w", "nope"]), Some(1));

    let bad = env.dir.path().join("bad.json");
    fs::write(&bad, "{\"sheets\":").unwrap();
    let out = env.run(&[
        "commit",
        "-w",
        "w1",
        "-f",
        bad.to_str().unwrap(),
        "--author",
        "ada",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[FORMAT_ERROR]"));
    assert!(out.stdout.is_empty());

    let old = env.dir.path().join("old.xls");
    fs::write(&old, b"\xD0\xCF\x11\xE0").unwrap();
    let out = env.run(&[
        "commit",
        "-w",
        "w1",
        "-f",
        old.to_str().unwrap(),
        "--author",
        "ada",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[UNSUPPORTED_FEATURE]"));
}

#[test]
fn restore_and_export() {
    let env = Env::new();
    let ids = env.lineage(&["3.5", "7"]);
    let out = env.run(&["restore", "-w", "w1", "--commit", &ids[0][..8]]);
    assert_eq!(out.status.code(), Some(0));
    let store = Store::open(env.store()).unwrap();
    let first = store.resolve("w1", &ids[0]).unwrap();
    assert_eq!(sha256_hex(&out.stdout), first.snapshot.as_str());

    let csv = env.ok(&[
        "export", "-w", "w1", "--region", "S!A1:B1", "--at", &ids[0], "--format", "csv",
    ]);
    assert_eq!(csv, "3.5,\r\n");
    let audit = env.ok(&[
        "audit", "-w", "w1", "--action", "restore", "--output", "jsonl",
    ]);
    assert_eq!(audit.lines().count(), 1);
    assert!(env
        .ok(&["audit", "-w", "w1", "--verify"])
        .contains("3 entries"));
}

#[test]
fn manifest_verify_and_watch() {
    let env = Env::new();
    env.lineage(&["1", "2"]);
    let manifest = env.dir.path().join("m.json");
    fs::write(
        &manifest,
        r#"{"manifest_id":"m1","approver":"lee","created":"2026-03-02T00:00:00.000Z","allowed":["S!A1"],"applies_to":"w1"}"#,
    )
    .unwrap();
    env.ok(&[
        "manifest",
        "register",
        "-w",
        "w1",
        "-f",
        manifest.to_str().unwrap(),
    ]);
    let report: Value = serde_json::from_str(&env.ok(&[
        "verify",
        "-w",
        "w1",
        "--manifest",
        "m1",
        "--output",
        "json",
    ]))
    .unwrap();
    assert_eq!(report["compliant"], true);
    assert_eq!(report["counts"]["allowed"], 1);

    env.ok(&["watch", "set", "-w", "w1", "--input-region", "S!A1:A9"]);
    assert_eq!(env.ok(&["watch", "get", "-w", "w1"]), "input S!A1:A9\n");
}

fn discover_json(env: &Env, root: &Path) -> Value {
    serde_json::from_str(&env.ok(&["discover", root.to_str().unwrap(), "--output", "json"]))
        .unwrap()
}

#[test]
fn discover_selects_by_extension_and_signature() {
    let env = Env::new();
    let root = env.dir.path().join("share");
    fs::create_dir_all(root.join("a/b")).unwrap();
    fs::write(root.join("a/book.xlsx"), b"PK\x03\x04rest-of-zip").unwrap();
    fs::write(root.join("a/b/old.XLS"), vec![0u8; 2048]).unwrap();
    fs::write(root.join("t.csv"), b"1,2\n").unwrap();
    fs::write(root.join("notes.txt"), b"hello").unwrap();
    fs::write(root.join("fake.xlsx"), b"not a zip").unwrap();

    let report = discover_json(&env, &root);
    let files = report["spreadsheet_files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    assert_eq!(report["scanned_paths"], 5);
    assert_eq!(report["total_bytes"], 15 + 2048 + 4);
    let formats: Vec<&str> = files
        .iter()
        .map(|f| f["format"].as_str().unwrap())
        .collect();
    assert_eq!(formats, ["xls", "xlsx", "csv"]);
    assert_eq!(report["histogram"]["<1MB"], 3);
    assert_eq!(report["warnings"].as_array().unwrap().len(), 1);

    let empty = env.dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let report = discover_json(&env, &empty);
    assert_eq!(report["total_bytes"], 0);
    assert!(report["spreadsheet_files"].as_array().unwrap().is_empty());

    assert_eq!(
        env.run(&["discover", "/definitely/not/here"]).status.code(),
        Some(1)
    );
}

/// Path, length, modification time and content digest of every file.
fn fingerprint(root: &Path) -> BTreeMap<PathBuf, (u64, std::time::SystemTime, String)> {
    let mut map = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let meta = fs::metadata(&path).unwrap();
            if meta.is_dir() {
                stack.push(path);
            } else {
                let digest = sha256_hex(&fs::read(&path).unwrap());
                map.insert(path, (meta.len(), meta.modified().unwrap(), digest));
            }
        }
    }
    map
}

#[test]
fn discover_counts_a_large_tree_without_touching_it() {
    let env = Env::new();
    let root = env.dir.path().join("tree");
    for d in 0..100 {
        let dir = root.join(format!("dept{d:03}"));
        fs::create_dir_all(&dir).unwrap();
        for f in 0..100 {
            let ext = ["csv", "xls", "csv", "csv"][f % 4];
            fs::write(dir.join(format!("f{f:03}.{ext}")), format!("{d},{f}\n")).unwrap();
        }
        fs::write(dir.join("readme.md"), b"#").unwrap();
    }
    let shell = Command::new("sh")
        .arg("-c")
        .arg(format!(
            "find '{}' -type f \\( -name '*.csv' -o -name '*.xls' -o -name '*.xlsx' \\) | wc -l",
            root.display()
        ))
        .output()
        .unwrap();
    let walked: u64 = String::from_utf8(shell.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert_eq!(walked, 10_000);

    let before = fingerprint(&root);
    let report = discover_json(&env, &root);
    assert_eq!(
        report["spreadsheet_files"].as_array().unwrap().len() as u64,
        walked
    );
    assert_eq!(report["scanned_paths"], 10_100);
    let total: u64 = before
        .iter()
        .filter(|(p, _)| p.extension().is_some_and(|e| e != "md"))
        .map(|(_, (len, _, _))| len)
        .sum();
    assert_eq!(report["total_bytes"], total);
    assert_eq!(fingerprint(&root), before);
}
