#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use akm::adr::SourceConfig;
use akm::config::Config;
use akm::llm::{Gateway, RetryPolicy, ScriptStep, ScriptedBackend};

pub const SUMMARY: &str = "OVERVIEW:\nA small order service exposing an HTTP API over a SQL store.\n\nCOMPONENTS:\n- api: HTTP routes\n- store: persistence\n\nTECHNOLOGIES:\n- Python\n- PostgreSQL\n\nDECISION_HINTS:\n- repository pattern around the database\n";
pub const ACCEPT: &str = "The draft is faithful.\nVERDICT: ACCEPT\n";

/// A tiny Python service plus directories and files the extractor must skip.
pub fn fixture_repo(root: &Path) {
    let files = [
        ("README.md", "# Orders\n\nOrder service.\n"),
        ("pyproject.toml", "[project]\nname = \"orders\"\n"),
        ("src/orders/main.py", "from orders.api import app\n\napp.run()\n"),
        ("src/orders/api.py", "def create_order(req):\n    return store.save(req)\n"),
        ("src/orders/store.py", "import psycopg\n\nclass OrderStore:\n    pass\n"),
        ("node_modules/left-pad/index.js", "module.exports = 1;\n"),
        (".git/HEAD", "ref: refs/heads/main\n"),
    ];
    for (path, body) in files {
        let p = root.join(path);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, body).unwrap();
    }
    fs::write(root.join("logo.png"), [0x89, b'P', b'N', b'G', 0, 0, 1, 2]).unwrap();
}

pub fn reject(issues: &[&str]) -> String {
    let mut s = String::from("VERDICT: REJECT\n");
    for i in issues {
        s.push_str(&format!("ISSUE: {i}\n"));
    }
    s
}

pub fn adr_block(title: &str) -> String {
    format!(
        "=== ADR ===\n# {title}\n\n## Context\n\nThe service needs {title}.\n\n## Decision\n\nWe adopt {title}.\n\n## Consequences\n\nMore structure, more code.\n\n"
    )
}

pub fn adrs_reply(titles: &[&str]) -> String {
    titles.iter().map(|t| adr_block(t)).collect()
}

pub fn gateway(steps: Vec<ScriptStep>) -> (Arc<ScriptedBackend>, Gateway) {
    let backend = Arc::new(ScriptedBackend::new(steps));
    let retry = RetryPolicy { budget: 3, base: Duration::ZERO, factor: 2.0 };
    (backend.clone(), Gateway::new(backend, retry, 7))
}

pub fn replies(texts: &[&str]) -> Vec<ScriptStep> {
    texts.iter().map(|t| ScriptStep::reply(*t)).collect()
}

pub fn config(out: &Path, pipeline: SourceConfig) -> Config {
    Config { output_dir: out.to_path_buf(), pipeline, ..Config::default() }
}

/// Every `NNNN-*.md` file under `dir`, sorted, with contents.
pub fn adr_files(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read_to_string(e.path()).unwrap()))
        .filter(|(n, _)| n.ends_with(".md"))
        .collect();
    out.sort();
    out
}
