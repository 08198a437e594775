//! DraCor API client with an on-disk response cache.
//!
//! Two endpoints are used: `{base}/corpora/{name}` for the play index with
//! metadata and `{base}/corpora/{name}/plays/{play}/spoken-text` for the
//! plain spoken text of each play. Every successful response body is stored
//! under `cache_dir/<sha256(url)>.body`; cached URLs never hit the network.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::document::{DocContent, RawDocument};
use super::CorpusError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// The server answered with a non-success status.
    Status(u16),
    /// No usable answer (connection, timeout, body decoding).
    Network(String),
}

/// Performs a GET and returns the body as text.
pub trait Transport: Sync {
    fn get(&self, url: &str) -> Result<String, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, CorpusError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .user_agent(concat!("topicdrift/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| CorpusError::Network { url: String::new(), message: e.to_string() })?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<String, TransportError> {
        let resp = self.client.get(url).send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16()));
        }
        resp.text().map_err(|e| TransportError::Network(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Maximum number of simultaneous requests.
    pub concurrency: usize,
    /// Attempts per request for network errors and 5xx answers.
    pub retries: u32,
    pub retry_backoff: Duration,
    /// Only plays whose year falls in this inclusive range are downloaded.
    pub year_range: Option<(i32, i32)>,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions { concurrency: 4, retries: 3, retry_backoff: Duration::from_millis(500), year_range: None }
    }
}

pub fn cache_path(cache_dir: &Path, url: &str) -> PathBuf {
    let digest = Sha256::digest(url.as_bytes());
    cache_dir.join(format!("{}.body", hex::encode(digest)))
}

struct CachedClient<'a, T: Transport> {
    transport: &'a T,
    cache_dir: &'a Path,
    opts: &'a FetchOptions,
}

impl<T: Transport> CachedClient<'_, T> {
    fn get(&self, url: &str) -> Result<String, TransportError> {
        let path = cache_path(self.cache_dir, url);
        if let Ok(body) = fs::read_to_string(&path) {
            return Ok(body);
        }
        let mut attempt = 0;
        let body = loop {
            attempt += 1;
            match self.transport.get(url) {
                Ok(body) => break body,
                Err(TransportError::Status(s)) if s < 500 => return Err(TransportError::Status(s)),
                Err(e) if attempt >= self.opts.retries.max(1) => return Err(e),
                Err(e) => {
                    log::warn!("GET {url} failed (attempt {attempt}): {e:?}; retrying");
                    std::thread::sleep(self.opts.retry_backoff * attempt);
                }
            }
        };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        if fs::write(&tmp, &body).and_then(|_| fs::rename(&tmp, &path)).is_err() {
            log::warn!("could not cache response for {url} in {}", self.cache_dir.display());
        }
        Ok(body)
    }
}

/// Fetches a corpus over HTTP with default options.
pub fn fetch_corpus(api_base: &str, corpus_name: &str, cache_dir: impl AsRef<Path>) -> Result<Vec<RawDocument>, CorpusError> {
    let transport = HttpTransport::new()?;
    fetch_corpus_with(&transport, api_base, corpus_name, cache_dir.as_ref(), &FetchOptions::default())
}

#[derive(Debug)]
struct PlayEntry {
    id: String,
    slug: String,
    title: String,
    year: i32,
}

/// Year precedence: normalized > printed > premiered.
const YEAR_FIELDS: [&str; 3] = ["yearNormalized", "yearPrinted", "yearPremiered"];

fn year_value(v: &Value) -> Option<i32> {
    match v {
        Value::Number(n) => n.as_i64().and_then(|y| i32::try_from(y).ok()),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn parse_entry(index: usize, v: &Value) -> Result<Option<PlayEntry>, CorpusError> {
    let str_field = |key: &str| -> Result<Option<String>, String> {
        match v.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(format!("field \"{key}\" is not a string: {other}")),
        }
    };
    let label = v
        .get("id")
        .or_else(|| v.get("name"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .unwrap_or_else(|| format!("#{index}"));
    let malformed = |message: String| CorpusError::MalformedResponse { play: label.clone(), message };
    let id = str_field("id").map_err(malformed)?;
    let slug = str_field("name").map_err(malformed)?;
    let (id, slug) = match (id, slug) {
        (Some(id), Some(slug)) => (id, slug),
        (Some(id), None) => (id.clone(), id),
        (None, Some(slug)) => (slug.clone(), slug),
        (None, None) => return Err(malformed("play entry has neither \"id\" nor \"name\"".into())),
    };
    let title = str_field("title").map_err(malformed)?.unwrap_or_default();
    let year = YEAR_FIELDS.iter().find_map(|key| v.get(*key).and_then(year_value).map(|y| (*key, y)));
    match year {
        Some((field, year)) => {
            log::debug!("play {id}: year {year} from {field}");
            Ok(Some(PlayEntry { id, slug, title, year }))
        }
        None => {
            log::warn!("play {id} has no year metadata; skipped");
            Ok(None)
        }
    }
}

/// Fetches the play index and the spoken text of every play, through the
/// cache. Documents are returned sorted by id.
pub fn fetch_corpus_with<T: Transport>(
    transport: &T,
    api_base: &str,
    corpus_name: &str,
    cache_dir: &Path,
    opts: &FetchOptions,
) -> Result<Vec<RawDocument>, CorpusError> {
    fs::create_dir_all(cache_dir).map_err(|e| CorpusError::io(cache_dir, e))?;
    let base = api_base.trim_end_matches('/');
    let client = CachedClient { transport, cache_dir, opts };

    let index_url = format!("{base}/corpora/{corpus_name}");
    let index = client.get(&index_url).map_err(|e| match e {
        TransportError::Status(404) => {
            CorpusError::UnknownCorpus { name: corpus_name.to_owned(), api_base: base.to_owned() }
        }
        TransportError::Status(s) => CorpusError::Network { url: index_url.clone(), message: format!("HTTP {s}") },
        TransportError::Network(m) => CorpusError::Network { url: index_url.clone(), message: m },
    })?;
    let index: Value = serde_json::from_str(&index).map_err(|e| CorpusError::MalformedResponse {
        play: format!("corpus index {corpus_name}"),
        message: e.to_string(),
    })?;
    let plays = index.get("plays").and_then(Value::as_array).ok_or_else(|| CorpusError::MalformedResponse {
        play: format!("corpus index {corpus_name}"),
        message: "missing \"plays\" array".into(),
    })?;

    let mut entries = Vec::new();
    for (i, p) in plays.iter().enumerate() {
        if let Some(entry) = parse_entry(i, p)? {
            entries.push(entry);
        }
    }
    if let Some((start, end)) = opts.year_range {
        entries.retain(|e| e.year >= start && e.year <= end);
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    log::info!("corpus {corpus_name}: {} plays to fetch", entries.len());

    let fetch_one = |e: &PlayEntry| -> Result<RawDocument, CorpusError> {
        let url = format!("{base}/corpora/{corpus_name}/plays/{}/spoken-text", e.slug);
        let text = client.get(&url).map_err(|err| match err {
            TransportError::Status(s) => CorpusError::Network { url: url.clone(), message: format!("HTTP {s} for play {}", e.id) },
            TransportError::Network(m) => CorpusError::Network { url: url.clone(), message: m },
        })?;
        Ok(RawDocument { id: e.id.clone(), year: e.year, title: e.title.clone(), content: DocContent::Text(text) })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.concurrency.max(1))
        .build()
        .map_err(|e| CorpusError::Config(e.to_string()))?;
    pool.install(|| entries.par_iter().map(fetch_one).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct MockTransport {
        routes: HashMap<String, Result<String, TransportError>>,
        calls: AtomicUsize,
    }

    impl MockTransport {
        fn new(routes: Vec<(&str, Result<&str, TransportError>)>) -> Self {
            MockTransport {
                routes: routes.into_iter().map(|(k, v)| (k.to_owned(), v.map(str::to_owned))).collect(),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for MockTransport {
        fn get(&self, url: &str) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.routes.get(url).cloned().unwrap_or(Err(TransportError::Status(404)))
        }
    }

    const BASE: &str = "http://api.test/v1";

    fn corpus_routes() -> MockTransport {
        MockTransport::new(vec![
            (
                "http://api.test/v1/corpora/fre",
                Ok(r#"{"name":"fre","plays":[
                    {"id":"fre000002","name":"b-play","title":"B","yearNormalized":1801,"yearPrinted":1799},
                    {"id":"fre000001","name":"a-play","title":"A","yearNormalized":null,"yearPrinted":"1750","yearPremiered":1748},
                    {"id":"fre000003","name":"c-play","title":"C"},
                    {"id":"fre000004","name":"d-play","title":"D","yearPremiered":1650}
                ]}"#),
            ),
            ("http://api.test/v1/corpora/fre/plays/a-play/spoken-text", Ok("Le roi est juste.")),
            ("http://api.test/v1/corpora/fre/plays/b-play/spoken-text", Ok("L'argent du mari.")),
            ("http://api.test/v1/corpora/fre/plays/d-play/spoken-text", Ok("Vieux texte.")),
        ])
    }

    fn fast() -> FetchOptions {
        FetchOptions { retry_backoff: Duration::ZERO, ..Default::default() }
    }

    #[test]
    fn fetches_plays_with_year_precedence() {
        let cache = tempfile::tempdir().unwrap();
        let t = corpus_routes();
        let docs = fetch_corpus_with(&t, BASE, "fre", cache.path(), &fast()).unwrap();
        let summary: Vec<_> = docs.iter().map(|d| (d.id.as_str(), d.year)).collect();
        // fre000003 has no year and is skipped
        assert_eq!(summary, [("fre000001", 1750), ("fre000002", 1801), ("fre000004", 1650)]);
        assert_eq!(docs[0].content, DocContent::Text("Le roi est juste.".into()));
    }

    #[test]
    fn year_range_limits_downloads() {
        let cache = tempfile::tempdir().unwrap();
        let t = corpus_routes();
        let opts = FetchOptions { year_range: Some((1700, 1900)), ..fast() };
        let docs = fetch_corpus_with(&t, BASE, "fre", cache.path(), &opts).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn warm_cache_makes_no_requests() {
        let cache = tempfile::tempdir().unwrap();
        let cold = corpus_routes();
        let first = fetch_corpus_with(&cold, BASE, "fre", cache.path(), &fast()).unwrap();
        let warm = MockTransport::new(vec![]);
        let second = fetch_corpus_with(&warm, BASE, "fre", cache.path(), &fast()).unwrap();
        assert_eq!(first, second);
        assert_eq!(warm.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn unknown_corpus_names_the_corpus() {
        let cache = tempfile::tempdir().unwrap();
        let err = fetch_corpus_with(&MockTransport::new(vec![]), BASE, "nonexistent-corpus", cache.path(), &fast())
            .unwrap_err();
        assert!(matches!(&err, CorpusError::UnknownCorpus { name, .. } if name == "nonexistent-corpus"));
        assert!(err.to_string().contains("nonexistent-corpus"));
    }

    #[test]
    fn network_failure_without_cache_is_retriable() {
        let cache = tempfile::tempdir().unwrap();
        let t = MockTransport::new(vec![(
            "http://api.test/v1/corpora/fre",
            Err(TransportError::Network("connection refused".into())),
        )]);
        let err = fetch_corpus_with(&t, BASE, "fre", cache.path(), &fast()).unwrap_err();
        assert!(err.is_retriable());
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn malformed_entry_names_the_play() {
        let cache = tempfile::tempdir().unwrap();
        let t = MockTransport::new(vec![(
            "http://api.test/v1/corpora/fre",
            Ok(r#"{"plays":[{"id":"fre000009","title":42,"yearNormalized":1780}]}"#),
        )]);
        let err = fetch_corpus_with(&t, BASE, "fre", cache.path(), &fast()).unwrap_err();
        assert!(matches!(&err, CorpusError::MalformedResponse { play, .. } if play == "fre000009"));
    }

    #[test]
    fn malformed_index_is_parse_error() {
        let cache = tempfile::tempdir().unwrap();
        let t = MockTransport::new(vec![("http://api.test/v1/corpora/fre", Ok("<html>"))]);
        assert!(matches!(
            fetch_corpus_with(&t, BASE, "fre", cache.path(), &fast()),
            Err(CorpusError::MalformedResponse { .. })
        ));
    }
}
