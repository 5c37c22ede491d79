use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime};

use crate::error::{Error, Result};

pub const DEFAULT_RMM_URL: &str = "http://www.bom.gov.au/climate/mjo/graphics/rmm.74toRealtime.txt";

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Read the cache only; never touch the network.
    pub offline: bool,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            offline: false,
            timeout: Duration::from_secs(30),
        }
    }
}

/// Downloads the feed and refreshes `cache_path`, falling back to the cache
/// when the network is unreachable.
///
/// HTTP responses other than 2xx are reported as errors even if a cache exists.
pub fn fetch_rmm(url: &str, cache_path: &Path, opts: &FetchOptions) -> Result<String> {
    if opts.offline {
        return read_cache(cache_path, "offline mode");
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(opts.timeout))
        .build()
        .into();
    match agent.get(url).call() {
        Ok(mut resp) => {
            let text = resp
                .body_mut()
                .with_config()
                .limit(64 * 1024 * 1024)
                .read_to_string()
                .map_err(|e| Error::Fetch(format!("reading body from {url}: {e}")))?;
            write_atomic(cache_path, text.as_bytes())?;
            Ok(text)
        }
        Err(ureq::Error::StatusCode(status)) => Err(Error::FetchStatus {
            url: url.to_string(),
            status,
        }),
        Err(e) => {
            log::warn!("could not reach {url}: {e}");
            read_cache(cache_path, "network unavailable")
        }
    }
}

fn read_cache(cache_path: &Path, reason: &str) -> Result<String> {
    let text = std::fs::read_to_string(cache_path).map_err(|e| {
        Error::Fetch(format!(
            "{reason} and no usable cache at {}: {e}",
            cache_path.display()
        ))
    })?;
    let age = std::fs::metadata(cache_path)
        .and_then(|m| m.modified())
        .ok()
        .and_then(|t| SystemTime::now().duration_since(t).ok());
    match age {
        Some(age) => log::warn!(
            "{reason}: using cached feed {} ({:.1} days old; may be stale)",
            cache_path.display(),
            age.as_secs_f64() / 86_400.0
        ),
        None => log::warn!(
            "{reason}: using cached feed {} (may be stale)",
            cache_path.display()
        ),
    }
    Ok(text)
}

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partial cache.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
