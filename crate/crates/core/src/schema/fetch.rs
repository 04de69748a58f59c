use std::collections::BTreeMap;
use std::time::Duration;

use thiserror::Error;
use url::Url;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("http error: {0}")]
    Http(String),
    #[error("unsupported scheme `{0}`")]
    Scheme(String),
    #[error("not found")]
    NotFound,
}

/// Retrieves the raw text of a schema document.
pub trait DocumentFetcher {
    fn fetch(&mut self, url: &Url) -> Result<String, FetchError>;
}

/// Reads `file:` URLs from disk and `http(s):` URLs over the network.
#[derive(Debug, Clone)]
pub struct DefaultFetcher {
    pub timeout: Duration,
    pub retries: u32,
}

impl Default for DefaultFetcher {
    fn default() -> Self {
        DefaultFetcher {
            timeout: Duration::from_secs(10),
            retries: 2,
        }
    }
}

impl DocumentFetcher for DefaultFetcher {
    fn fetch(&mut self, url: &Url) -> Result<String, FetchError> {
        match url.scheme() {
            "file" => {
                let path = url.to_file_path().map_err(|_| FetchError::Scheme(url.to_string()))?;
                Ok(std::fs::read_to_string(path)?)
            }
            "http" | "https" => {
                let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
                let mut last = String::new();
                for _ in 0..=self.retries {
                    match agent.get(url.as_str()).call() {
                        Ok(resp) => return resp.into_string().map_err(FetchError::Io),
                        // Client errors will not improve on retry.
                        Err(ureq::Error::Status(code, _)) if (400..500).contains(&code) => {
                            return Err(FetchError::Http(format!("status {code}")))
                        }
                        Err(e) => last = e.to_string(),
                    }
                }
                Err(FetchError::Http(last))
            }
            other => Err(FetchError::Scheme(other.to_string())),
        }
    }
}

/// In-memory documents keyed by canonical URL; counts fetches.
#[derive(Debug, Clone, Default)]
pub struct MemoryFetcher {
    docs: BTreeMap<String, String>,
    fetches: Vec<String>,
}

impl MemoryFetcher {
    pub fn insert(&mut self, url: &str, text: &str) {
        self.docs.insert(url.to_string(), text.to_string());
    }

    pub fn fetch_count(&self) -> usize {
        self.fetches.len()
    }

    /// Every URL requested, in order.
    pub fn fetches(&self) -> &[String] {
        &self.fetches
    }
}

impl DocumentFetcher for MemoryFetcher {
    fn fetch(&mut self, url: &Url) -> Result<String, FetchError> {
        self.fetches.push(url.to_string());
        self.docs.get(url.as_str()).cloned().ok_or(FetchError::NotFound)
    }
}
