//! Optional download of a series from FRED's public CSV endpoint, with a
//! file cache. Nothing else in the crate touches the network.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime};

use thiserror::Error;

use crate::data::{parse_csv, CsvError};

pub const FRED_ENDPOINT: &str = "https://fred.stlouisfed.org/graph/fredgraph.csv";
pub const CACHE_ENV: &str = "MODECAST_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".modecast-cache";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("cannot reach {url}: {message}. Check the connection or pass --endpoint; offline runs can use a local CSV with --input")]
    Network { url: String, message: String },
    #[error("{url} answered HTTP {code}")]
    HttpStatus { url: String, code: u16 },
    #[error("downloaded data is not a valid series: {0}")]
    Parse(#[from] CsvError),
    #[error("series id {0:?} may only contain letters, digits, '_' and '-'")]
    BadSeriesId(String),
    #[error("cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub endpoint: String,
    pub cache_dir: PathBuf,
    pub timeout: Duration,
    /// Cached files younger than this are used without a request.
    pub max_age: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            endpoint: FRED_ENDPOINT.to_string(),
            cache_dir: PathBuf::from(DEFAULT_CACHE_DIR),
            timeout: Duration::from_secs(30),
            max_age: Duration::from_secs(24 * 3600),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    pub path: PathBuf,
    pub cache_hit: bool,
}

pub fn cache_path(cache_dir: &Path, series_id: &str) -> PathBuf {
    cache_dir.join(format!("{series_id}.csv"))
}

fn is_fresh(path: &Path, max_age: Duration) -> bool {
    let Ok(meta) = std::fs::metadata(path) else {
        return false;
    };
    match meta.modified().map(|m| SystemTime::now().duration_since(m)) {
        Ok(Ok(age)) => age <= max_age,
        // Modification time in the future: treat as fresh.
        Ok(Err(_)) => true,
        Err(_) => false,
    }
}

/// Downloads `series_id` unless a fresh copy is cached. The response body is
/// validated as a series and then written to the cache byte for byte.
pub fn fetch_series(series_id: &str, opts: &FetchOptions) -> Result<Fetched, FetchError> {
    if series_id.is_empty() || !series_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(FetchError::BadSeriesId(series_id.to_string()));
    }
    let path = cache_path(&opts.cache_dir, series_id);
    if is_fresh(&path, opts.max_age) {
        log::info!("cache hit for {series_id}: {}", path.display());
        return Ok(Fetched { path, cache_hit: true });
    }

    let url = format!("{}?id={series_id}", opts.endpoint);
    log::info!("downloading {url}");
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(opts.timeout))
        .build()
        .into();
    let body = match agent.get(&url).call() {
        Ok(mut resp) => resp.body_mut().read_to_vec(),
        Err(e) => Err(e),
    }
    .map_err(|e| match e {
        ureq::Error::StatusCode(code) => FetchError::HttpStatus { url: url.clone(), code },
        other => FetchError::Network {
            url: url.clone(),
            message: other.to_string(),
        },
    })?;

    let text = String::from_utf8_lossy(&body);
    parse_csv(&text)?;

    let cache = |source| FetchError::Cache {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(&opts.cache_dir).map_err(cache)?;
    let tmp = path.with_extension("csv.part");
    std::fs::write(&tmp, &body).map_err(cache)?;
    std::fs::rename(&tmp, &path).map_err(cache)?;
    Ok(Fetched { path, cache_hit: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    const BODY: &str = "DATE,CPALTT01DEM661S\n1991-01-01,63.1\n1991-02-01,63.5\n";

    /// Serves `status` and `body` to every connection; returns the base URL
    /// and a request counter.
    fn serve(status: &'static str, body: &'static str) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut s) = stream else { break };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 4096];
                let _ = s.read(&mut buf);
                let reply = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: text/csv\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = s.write_all(reply.as_bytes());
            }
        });
        (format!("http://{addr}/graph/fredgraph.csv"), hits)
    }

    fn opts(endpoint: String, dir: &Path) -> FetchOptions {
        FetchOptions {
            endpoint,
            cache_dir: dir.to_path_buf(),
            timeout: Duration::from_secs(5),
            ..FetchOptions::default()
        }
    }

    #[test]
    fn download_is_byte_identical_then_cached() {
        let dir = tempfile::tempdir().unwrap();
        let (url, hits) = serve("200 OK", BODY);
        let o = opts(url, dir.path());
        let first = fetch_series("CPALTT01DEM661S", &o).unwrap();
        assert!(!first.cache_hit);
        assert_eq!(std::fs::read(&first.path).unwrap(), BODY.as_bytes());
        let second = fetch_series("CPALTT01DEM661S", &o).unwrap();
        assert!(second.cache_hit);
        assert_eq!(second.path, first.path);
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn stale_cache_refetches() {
        let dir = tempfile::tempdir().unwrap();
        let (url, hits) = serve("200 OK", BODY);
        let o = FetchOptions {
            max_age: Duration::ZERO,
            ..opts(url, dir.path())
        };
        std::fs::write(cache_path(dir.path(), "X"), "old").unwrap();
        std::thread::sleep(Duration::from_millis(20));
        let f = fetch_series("X", &o).unwrap();
        assert!(!f.cache_hit);
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn http_status_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (url, _) = serve("404 Not Found", "missing");
        let err = fetch_series("NOPE", &opts(url, dir.path())).unwrap_err();
        assert!(matches!(err, FetchError::HttpStatus { code: 404, .. }), "{err}");
        assert!(!cache_path(dir.path(), "NOPE").exists());
    }

    #[test]
    fn invalid_body_is_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let (url, _) = serve("200 OK", "<html>rate limited</html>");
        let err = fetch_series("X", &opts(url, dir.path())).unwrap_err();
        assert!(matches!(err, FetchError::Parse(_)));
        assert!(!cache_path(dir.path(), "X").exists());
    }

    #[test]
    fn unreachable_endpoint_is_actionable() {
        let dir = tempfile::tempdir().unwrap();
        // Bind then drop to get a port with nothing listening.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = fetch_series("X", &opts(format!("http://127.0.0.1:{port}/x"), dir.path())).unwrap_err();
        assert!(matches!(err, FetchError::Network { .. }));
        assert!(err.to_string().contains("--input"));
    }

    #[test]
    fn series_id_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let o = opts("http://127.0.0.1:9/x".into(), dir.path());
        assert!(matches!(fetch_series("../etc", &o), Err(FetchError::BadSeriesId(_))));
    }
}
