use std::fs;
use std::io::Read;
use std::path::{Component, Path};

use flate2::read::GzDecoder;
use walkdir::WalkDir;

use super::{FetchError, RawFile, RawTree};

pub(super) fn fetch(path: &Path) -> Result<RawTree, FetchError> {
    let meta = fs::symlink_metadata(path)
        .map_err(|_| FetchError::SourceNotFound(path.display().to_string()))?;
    if meta.is_dir() {
        return walk_dir(path);
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    let files = if name.ends_with(".tar.gz") || name.ends_with(".tgz") {
        let file = open(path)?;
        read_tar(GzDecoder::new(file), path)?
    } else if name.ends_with(".tar") {
        read_tar(open(path)?, path)?
    } else if name.ends_with(".zip") {
        read_zip(path)?
    } else {
        return Err(FetchError::Archive {
            path: path.display().to_string(),
            reason: "expected a directory or a .tar, .tar.gz, .tgz or .zip archive".into(),
        });
    };
    Ok(RawTree {
        files: strip_common_root(files),
        resolved_commit: None,
    })
}

fn open(path: &Path) -> Result<fs::File, FetchError> {
    fs::File::open(path).map_err(|source| FetchError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn walk_dir(root: &Path) -> Result<RawTree, FetchError> {
    let mut files = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = entry.map_err(|e| FetchError::Io {
            path: e.path().map(|p| p.display().to_string()).unwrap_or_default(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walkdir stays under root");
        let bytes = fs::read(entry.path()).map_err(|source| FetchError::Io {
            path: entry.path().display().to_string(),
            source,
        })?;
        files.push(RawFile {
            path: to_repo_path(rel),
            bytes,
        });
    }
    Ok(RawTree {
        files,
        resolved_commit: git_head(root),
    })
}

fn to_repo_path(rel: &Path) -> String {
    rel.components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// Normalizes an archive member path; rejects absolute or escaping paths.
fn archive_path(raw: &str) -> Option<String> {
    let mut parts = Vec::new();
    for part in raw.split(['/', '\\']) {
        match part {
            "" | "." => continue,
            ".." => return None,
            p => parts.push(p),
        }
    }
    if raw.starts_with('/') || parts.is_empty() {
        return None;
    }
    Some(parts.join("/"))
}

fn read_tar<R: Read>(reader: R, path: &Path) -> Result<Vec<RawFile>, FetchError> {
    let archive_err = |e: std::io::Error| FetchError::Archive {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut archive = tar::Archive::new(reader);
    let mut files = Vec::new();
    for entry in archive.entries().map_err(archive_err)? {
        let mut entry = entry.map_err(archive_err)?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let member = entry.path().map_err(archive_err)?.to_string_lossy().into_owned();
        let Some(member) = archive_path(&member) else { continue };
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes).map_err(archive_err)?;
        files.push(RawFile { path: member, bytes });
    }
    Ok(files)
}

fn read_zip(path: &Path) -> Result<Vec<RawFile>, FetchError> {
    let archive_err = |reason: String| FetchError::Archive {
        path: path.display().to_string(),
        reason,
    };
    let mut archive = zip::ZipArchive::new(open(path)?).map_err(|e| archive_err(e.to_string()))?;
    let mut files = Vec::new();
    for i in 0..archive.len() {
        let mut member = archive.by_index(i).map_err(|e| archive_err(e.to_string()))?;
        let is_symlink = member.unix_mode().is_some_and(|m| m & 0o170000 == 0o120000);
        if !member.is_file() || is_symlink {
            continue;
        }
        let Some(name) = archive_path(member.name()) else { continue };
        let mut bytes = Vec::new();
        member.read_to_end(&mut bytes).map_err(|e| archive_err(e.to_string()))?;
        files.push(RawFile { path: name, bytes });
    }
    Ok(files)
}

/// Hosting services wrap archives in a single `<repo>-<sha>/` directory.
fn strip_common_root(mut files: Vec<RawFile>) -> Vec<RawFile> {
    let root = match files.first().and_then(|f| f.path.split_once('/')) {
        Some((root, _)) => format!("{root}/"),
        None => return files,
    };
    if files.iter().all(|f| f.path.starts_with(&root)) {
        for f in files.iter_mut() {
            f.path = f.path[root.len()..].to_string();
        }
    }
    files
}

/// Commit id of a checked-out git working tree, if there is one.
fn git_head(root: &Path) -> Option<String> {
    let git = root.join(".git");
    let head = fs::read_to_string(git.join("HEAD")).ok()?;
    let head = head.trim();
    let Some(reference) = head.strip_prefix("ref: ") else {
        return is_sha(head).then(|| head.to_string());
    };
    if let Ok(sha) = fs::read_to_string(git.join(reference)) {
        let sha = sha.trim();
        return is_sha(sha).then(|| sha.to_string());
    }
    let packed = fs::read_to_string(git.join("packed-refs")).ok()?;
    packed.lines().find_map(|line| {
        let (sha, name) = line.split_once(' ')?;
        (name == reference && is_sha(sha)).then(|| sha.to_string())
    })
}

fn is_sha(s: &str) -> bool {
    s.len() >= 40 && s.chars().all(|c| c.is_ascii_hexdigit())
}
