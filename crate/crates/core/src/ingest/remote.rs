//! Read-only client for the hosting REST API: resolve a ref, list the
//! recursive tree, download blobs.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use base64::Engine;
use rayon::prelude::*;
use reqwest::blocking::{Client, Response};
use reqwest::header::{HeaderMap, ACCEPT, AUTHORIZATION, USER_AGENT};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{Classification, FetchError, FetchOptions, RawFile, RawTree, RemoteCoordinate};

pub const DEFAULT_API_BASE: &str = "https://api.github.com";

const SYMLINK_MODE: &str = "120000";

#[derive(Deserialize)]
struct RepoInfo {
    default_branch: String,
}

#[derive(Deserialize)]
struct CommitInfo {
    sha: String,
}

#[derive(Deserialize)]
struct TreeListing {
    tree: Vec<TreeEntry>,
    #[serde(default)]
    truncated: bool,
}

#[derive(Deserialize)]
struct TreeEntry {
    path: String,
    mode: String,
    #[serde(rename = "type")]
    kind: String,
    sha: String,
    #[serde(default)]
    size: Option<u64>,
}

#[derive(Deserialize)]
struct Blob {
    content: String,
    encoding: String,
}

struct Api<'a> {
    client: Client,
    base: String,
    coord: &'a RemoteCoordinate,
}

impl<'a> Api<'a> {
    fn new(coord: &'a RemoteCoordinate, options: &FetchOptions) -> Result<Self, FetchError> {
        let mut headers = HeaderMap::new();
        headers.insert(ACCEPT, "application/vnd.github+json".parse().unwrap());
        headers.insert(USER_AGENT, concat!("repo2label/", env!("CARGO_PKG_VERSION")).parse().unwrap());
        if let Some(token) = &options.token {
            let value = format!("Bearer {token}")
                .parse()
                .map_err(|_| FetchError::AuthRequired("token contains invalid characters".into()))?;
            headers.insert(AUTHORIZATION, value);
        }
        let client = Client::builder()
            .default_headers(headers)
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| FetchError::Network(e.to_string()))?;
        Ok(Api {
            client,
            base: options.api_base.trim_end_matches('/').to_string(),
            coord,
        })
    }

    fn get<T: DeserializeOwned>(&self, suffix: &str) -> Result<T, FetchError> {
        let url = format!("{}/repos/{}/{}{}", self.base, self.coord.owner, self.coord.name, suffix);
        tracing::debug!(%url, "GET");
        let response = self
            .client
            .get(&url)
            .send()
            .map_err(|e| FetchError::Network(e.to_string()))?;
        let response = check_status(response, &self.coord.to_string())?;
        response
            .json::<T>()
            .map_err(|e| FetchError::Network(format!("malformed response from {url}: {e}")))
    }
}

fn check_status(response: Response, what: &str) -> Result<Response, FetchError> {
    let status = response.status();
    if status.is_success() {
        return Ok(response);
    }
    let headers = response.headers();
    let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
    let exhausted = header("x-ratelimit-remaining").as_deref() == Some("0");
    match status {
        StatusCode::TOO_MANY_REQUESTS => Err(FetchError::RateLimited {
            retry_after: retry_after(&header("retry-after"), &header("x-ratelimit-reset")),
        }),
        StatusCode::FORBIDDEN if exhausted => Err(FetchError::RateLimited {
            retry_after: retry_after(&header("retry-after"), &header("x-ratelimit-reset")),
        }),
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(FetchError::AuthRequired(format!(
            "{what}: HTTP {} (set {} to a valid token)",
            status.as_u16(),
            super::VCS_TOKEN_ENV
        ))),
        StatusCode::NOT_FOUND => Err(FetchError::SourceNotFound(what.to_string())),
        _ => Err(FetchError::Network(format!("{what}: HTTP {}", status.as_u16()))),
    }
}

fn retry_after(retry_after: &Option<String>, reset: &Option<String>) -> Option<u64> {
    if let Some(secs) = retry_after.as_deref().and_then(|v| v.trim().parse().ok()) {
        return Some(secs);
    }
    let reset: u64 = reset.as_deref()?.trim().parse().ok()?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).ok()?.as_secs();
    Some(reset.saturating_sub(now))
}

pub(super) fn fetch(coord: &RemoteCoordinate, options: &FetchOptions) -> Result<RawTree, FetchError> {
    let api = Api::new(coord, options)?;
    let git_ref = match &coord.git_ref {
        Some(r) => r.clone(),
        None => api.get::<RepoInfo>("")?.default_branch,
    };
    let commit: CommitInfo = api.get(&format!("/commits/{git_ref}"))?;
    let listing: TreeListing = api.get(&format!("/git/trees/{}?recursive=1", commit.sha))?;
    if listing.truncated {
        tracing::warn!(repo = %coord, "tree listing truncated by the remote; some files are missing");
    }

    let wanted: Vec<&TreeEntry> = listing
        .tree
        .iter()
        // submodules are "commit" entries, directories are "tree" entries
        .filter(|e| e.kind == "blob" && e.mode != SYMLINK_MODE)
        .filter(|e| match &options.prefilter {
            Some(policy) => !matches!(
                policy.classify_by_path(&e.path, e.size.unwrap_or(0)),
                Some(Classification::Excluded(_))
            ),
            None => true,
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| FetchError::Network(e.to_string()))?;
    let files = pool.install(|| {
        wanted
            .par_iter()
            .map(|entry| {
                let blob: Blob = api.get(&format!("/git/blobs/{}", entry.sha))?;
                Ok(RawFile {
                    path: entry.path.clone(),
                    bytes: decode_blob(&blob, &entry.path)?,
                })
            })
            .collect::<Result<Vec<_>, FetchError>>()
    })?;

    Ok(RawTree {
        files,
        resolved_commit: Some(commit.sha),
    })
}

fn decode_blob(blob: &Blob, path: &str) -> Result<Vec<u8>, FetchError> {
    match blob.encoding.as_str() {
        "base64" => {
            let compact: String = blob.content.chars().filter(|c| !c.is_whitespace()).collect();
            base64::engine::general_purpose::STANDARD
                .decode(compact)
                .map_err(|e| FetchError::Network(format!("bad blob encoding for {path}: {e}")))
        }
        "utf-8" | "utf8" => Ok(blob.content.clone().into_bytes()),
        other => Err(FetchError::Network(format!("unsupported blob encoding {other:?} for {path}"))),
    }
}
