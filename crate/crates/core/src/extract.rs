//! Repository walking, file ranking and token-budgeted context packing.

use std::cmp::Ordering;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::config::{ExtractConfig, RankWeights, DEFAULT_MAX_FILE_BYTES};
use crate::llm::estimate_tokens;

const SNIFF_BYTES: usize = 8 * 1024;

pub const IGNORED_DIRS: &[&str] =
    &[".git", ".hg", ".svn", "node_modules", "vendor", "target", "dist", "build", "__pycache__", ".venv"];

const MANIFESTS: &[&str] = &[
    "Cargo.toml",
    "package.json",
    "pyproject.toml",
    "setup.py",
    "setup.cfg",
    "requirements.txt",
    "Pipfile",
    "go.mod",
    "pom.xml",
    "build.gradle",
    "build.gradle.kts",
    "settings.gradle",
    "Gemfile",
    "composer.json",
    "CMakeLists.txt",
    "Makefile",
    "meson.build",
    "Dockerfile",
    "docker-compose.yml",
    "docker-compose.yaml",
    "tsconfig.json",
    "mix.exs",
    "Package.swift",
    "pubspec.yaml",
];

const ENTRYPOINTS: &[&str] = &[
    "main.rs",
    "lib.rs",
    "main.py",
    "__main__.py",
    "app.py",
    "manage.py",
    "wsgi.py",
    "asgi.py",
    "index.js",
    "index.ts",
    "main.js",
    "main.ts",
    "app.js",
    "app.ts",
    "server.js",
    "server.ts",
    "main.go",
    "Main.java",
    "Application.java",
    "Program.cs",
    "main.c",
    "main.cpp",
    "main.kt",
    "main.swift",
    "main.dart",
];

/// Extension → (language tag, counts as source code).
const LANGUAGES: &[(&str, &str, bool)] = &[
    ("rs", "rust", true),
    ("py", "python", true),
    ("js", "javascript", true),
    ("jsx", "javascript", true),
    ("mjs", "javascript", true),
    ("cjs", "javascript", true),
    ("ts", "typescript", true),
    ("tsx", "typescript", true),
    ("go", "go", true),
    ("java", "java", true),
    ("kt", "kotlin", true),
    ("kts", "kotlin", true),
    ("scala", "scala", true),
    ("c", "c", true),
    ("h", "c", true),
    ("cc", "cpp", true),
    ("cpp", "cpp", true),
    ("cxx", "cpp", true),
    ("hpp", "cpp", true),
    ("cs", "csharp", true),
    ("rb", "ruby", true),
    ("php", "php", true),
    ("swift", "swift", true),
    ("dart", "dart", true),
    ("ex", "elixir", true),
    ("exs", "elixir", true),
    ("erl", "erlang", true),
    ("hs", "haskell", true),
    ("ml", "ocaml", true),
    ("clj", "clojure", true),
    ("lua", "lua", true),
    ("r", "r", true),
    ("jl", "julia", true),
    ("sh", "shell", true),
    ("bash", "shell", true),
    ("sql", "sql", true),
    ("proto", "protobuf", true),
    ("vue", "vue", true),
    ("svelte", "svelte", true),
    ("md", "markdown", false),
    ("rst", "restructuredtext", false),
    ("txt", "text", false),
    ("json", "json", false),
    ("toml", "toml", false),
    ("yaml", "yaml", false),
    ("yml", "yaml", false),
    ("xml", "xml", false),
    ("html", "html", false),
    ("css", "css", false),
    ("scss", "scss", false),
    ("ini", "ini", false),
    ("cfg", "ini", false),
    ("gradle", "gradle", false),
];

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("repository root {0} does not exist or is not a directory")]
    NotADirectory(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid ignore pattern `{pattern}`: {reason}")]
    BadPattern { pattern: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoFile {
    /// `/`-separated path relative to the repository root.
    pub relative_path: String,
    pub size_bytes: u64,
    pub language_tag: String,
    pub is_binary: bool,
    pub rank_score: f64,
}

impl RepoFile {
    fn file_name(&self) -> &str {
        self.relative_path.rsplit('/').next().unwrap_or(&self.relative_path)
    }

    pub fn depth(&self) -> usize {
        self.relative_path.matches('/').count()
    }

    pub fn is_manifest(&self) -> bool {
        MANIFESTS.contains(&self.file_name())
    }

    pub fn is_entrypoint(&self) -> bool {
        ENTRYPOINTS.contains(&self.file_name())
    }

    pub fn is_readme(&self) -> bool {
        self.file_name().to_ascii_lowercase().starts_with("readme")
    }

    pub fn is_source(&self) -> bool {
        extension(&self.relative_path).and_then(lookup_language).is_some_and(|(_, source)| source)
    }
}

fn extension(path: &str) -> Option<String> {
    let name = path.rsplit('/').next()?;
    let (stem, ext) = name.rsplit_once('.')?;
    (!stem.is_empty()).then(|| ext.to_ascii_lowercase())
}

fn lookup_language(ext: String) -> Option<(&'static str, bool)> {
    LANGUAGES.iter().find(|(e, _, _)| *e == ext).map(|(_, tag, source)| (*tag, *source))
}

pub fn language_tag(path: &str) -> &'static str {
    extension(path).and_then(lookup_language).map_or("unknown", |(tag, _)| tag)
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub max_file_bytes: u64,
    pub extra_ignores: GlobSet,
    /// Relative `/`-separated directory prefixes to skip, e.g. an output directory inside the repo.
    pub excluded_prefixes: Vec<String>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { max_file_bytes: DEFAULT_MAX_FILE_BYTES, extra_ignores: GlobSet::empty(), excluded_prefixes: Vec::new() }
    }
}

impl ScanOptions {
    pub fn from_config(config: &ExtractConfig) -> Result<Self, ExtractError> {
        let mut builder = GlobSetBuilder::new();
        for pattern in &config.extra_ignores {
            let glob = Glob::new(pattern)
                .map_err(|e| ExtractError::BadPattern { pattern: pattern.clone(), reason: e.to_string() })?;
            builder.add(glob);
        }
        let extra_ignores = builder
            .build()
            .map_err(|e| ExtractError::BadPattern { pattern: config.extra_ignores.join(","), reason: e.to_string() })?;
        Ok(Self { max_file_bytes: config.max_file_bytes, extra_ignores, excluded_prefixes: Vec::new() })
    }

    fn skips(&self, rel: &str) -> bool {
        self.extra_ignores.is_match(rel)
            || self.excluded_prefixes.iter().any(|p| rel == p || rel.starts_with(&format!("{p}/")))
    }
}

pub fn scan_repo(root: &Path) -> Result<Vec<RepoFile>, ExtractError> {
    scan_repo_with(root, &ScanOptions::default())
}

/// Lists candidate files under `root`, sorted by relative path.
pub fn scan_repo_with(root: &Path, options: &ScanOptions) -> Result<Vec<RepoFile>, ExtractError> {
    if !root.is_dir() {
        return Err(ExtractError::NotADirectory(root.to_path_buf()));
    }
    std::fs::read_dir(root).map_err(|source| ExtractError::Io { path: root.to_path_buf(), source })?;

    let walker = WalkDir::new(root).follow_links(false).into_iter().filter_entry(|entry| {
        if entry.depth() == 0 {
            return true;
        }
        let name = entry.file_name().to_string_lossy();
        if name.starts_with('.') {
            return false;
        }
        if entry.file_type().is_dir() && IGNORED_DIRS.contains(&name.as_ref()) {
            return false;
        }
        relative(root, entry.path()).is_none_or(|rel| !options.skips(&rel))
    });

    let mut files = Vec::new();
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("skipping unreadable entry: {e}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(rel) = relative(root, entry.path()) else { continue };
        let size_bytes = match entry.metadata() {
            Ok(m) => m.len(),
            Err(e) => {
                log::warn!("skipping {rel}: {e}");
                continue;
            }
        };
        if size_bytes > options.max_file_bytes {
            continue;
        }
        let is_binary =
            sniff_binary(entry.path()).map_err(|source| ExtractError::Io { path: entry.path().into(), source })?;
        files.push(RepoFile {
            language_tag: language_tag(&rel).to_string(),
            relative_path: rel,
            size_bytes,
            is_binary,
            rank_score: 0.0,
        });
    }
    files.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    Ok(files)
}

fn relative(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let parts: Vec<String> = rel
        .components()
        .map(|c| match c {
            std::path::Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Option<_>>()?;
    (!parts.is_empty()).then(|| parts.join("/"))
}

fn sniff_binary(path: &Path) -> std::io::Result<bool> {
    let mut buf = [0u8; SNIFF_BYTES];
    let mut file = File::open(path)?;
    let mut filled = 0;
    while filled < SNIFF_BYTES {
        let n = file.read(&mut buf[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(buf[..filled].contains(&0))
}

pub fn score(file: &RepoFile, w: &RankWeights) -> f64 {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    w.manifest * flag(file.is_manifest())
        + w.entrypoint * flag(file.is_entrypoint())
        + w.readme * flag(file.is_readme())
        + w.source * flag(file.is_source())
        + w.depth * (1.0 / (1.0 + file.depth() as f64))
}

/// Scores each file and sorts by descending score, ties by ascending path.
pub fn rank_files(mut files: Vec<RepoFile>, weights: &RankWeights) -> Vec<RepoFile> {
    for f in &mut files {
        f.rank_score = score(f, weights);
    }
    files.sort_by(|a, b| {
        b.rank_score
            .partial_cmp(&a.rank_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.relative_path.cmp(&b.relative_path))
    });
    files
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedFile {
    pub relative_path: String,
    pub content: String,
    /// Estimate for the whole rendered block, header included.
    pub token_estimate: usize,
}

impl PackedFile {
    pub fn render(&self) -> String {
        render_block(&self.relative_path, &self.content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedContext {
    pub included: Vec<PackedFile>,
    pub excluded_count: usize,
    pub total_token_estimate: usize,
    pub budget: usize,
}

impl PackedContext {
    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn render(&self) -> String {
        self.included.iter().map(PackedFile::render).collect()
    }
}

/// `FILE: {path}` header followed by the content in a fence longer than any
/// backtick run inside it, then a blank separator line.
pub fn render_block(path: &str, content: &str) -> String {
    let longest = content.split(|c| c != '`').map(str::len).max().unwrap_or(0);
    let fence = "`".repeat(longest.max(2) + 1);
    let body = content.trim_end_matches('\n');
    format!("FILE: {path}\n{fence}\n{body}\n{fence}\n\n")
}

/// Greedy packing in the given order: a block is included iff its estimate
/// fits what is left of the budget; otherwise it is skipped and packing continues.
pub fn pack_blocks(candidates: impl IntoIterator<Item = (String, String)>, budget: usize) -> PackedContext {
    let mut included = Vec::new();
    let mut excluded_count = 0;
    let mut used = 0;
    for (relative_path, content) in candidates {
        let token_estimate = estimate_tokens(&render_block(&relative_path, &content));
        if used + token_estimate <= budget {
            used += token_estimate;
            included.push(PackedFile { relative_path, content, token_estimate });
        } else {
            excluded_count += 1;
        }
    }
    PackedContext { included, excluded_count, total_token_estimate: used, budget }
}

/// Reads the ranked files and packs them under `budget`. Binary files are
/// never included and count as excluded.
pub fn pack_context(root: &Path, ranked: &[RepoFile], budget: usize) -> Result<PackedContext, ExtractError> {
    let mut binaries = 0;
    let mut candidates = Vec::with_capacity(ranked.len());
    for file in ranked {
        if file.is_binary {
            binaries += 1;
            continue;
        }
        let path = root.join(&file.relative_path);
        let bytes = std::fs::read(&path).map_err(|source| ExtractError::Io { path, source })?;
        candidates.push((file.relative_path.clone(), String::from_utf8_lossy(&bytes).into_owned()));
    }
    let mut packed = pack_blocks(candidates, budget);
    packed.excluded_count += binaries;
    Ok(packed)
}

/// scan → rank → pack with the configured settings.
pub fn extract_context(
    root: &Path,
    config: &ExtractConfig,
    excluded_prefixes: Vec<String>,
) -> Result<PackedContext, ExtractError> {
    let mut options = ScanOptions::from_config(config)?;
    options.excluded_prefixes = excluded_prefixes;
    let files = scan_repo_with(root, &options)?;
    let ranked = rank_files(files, &config.weights);
    pack_context(root, &ranked, config.budget_tokens)
}
