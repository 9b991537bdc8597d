//! Carbon-intensity sources for the control loop: a recorded trace, or a live
//! carbon-information service polled at most once per refresh interval.

use std::sync::{Arc, Mutex};

use chrono::{DateTime, TimeDelta, Utc};
use serde::Deserialize;
use thiserror::Error;

use crate::traces::{CarbonSample, CarbonTrace};

pub const ENV_API_URL: &str = "CARBON_API_URL";
pub const ENV_API_TOKEN: &str = "CARBON_API_TOKEN";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("{t} is outside the trace span [{start}, {end})")]
    OutOfSpan {
        t: DateTime<Utc>,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("response schema mismatch: {0}")]
    Schema(String),
    #[error("invalid carbon intensity {0}")]
    Invalid(f64),
    #[error("carbon intensity is {staleness_s}s stale, beyond the {max_s}s limit")]
    TooStale { staleness_s: i64, max_s: i64 },
    #[error("no carbon intensity available: {0}")]
    Unavailable(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

/// Minimal blocking HTTP GET, so tests can swap in canned responses.
pub trait Transport: Send + Sync {
    /// Returns `(status, body)`.
    fn get(&self, url: &str, auth_token: &str) -> Result<(u16, String), ProviderError>;
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[cfg(feature = "http")]
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpTransport;

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn get(&self, url: &str, auth_token: &str) -> Result<(u16, String), ProviderError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(std::time::Duration::from_secs(30)))
            .build()
            .into();
        let mut resp = agent
            .get(url)
            .header("auth-token", auth_token)
            .call()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok((status, body))
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub region: String,
    pub endpoint_url: String,
    pub auth_token: String,
    pub refresh: TimeDelta,
    pub max_staleness: TimeDelta,
    /// Extra attempts after a failed request.
    pub retries: u32,
}

impl LiveConfig {
    pub fn new(region: &str, endpoint_url: &str, auth_token: &str) -> Result<Self, ProviderError> {
        if endpoint_url.is_empty() {
            return Err(ProviderError::Config("live mode needs an endpoint URL".into()));
        }
        if auth_token.is_empty() {
            return Err(ProviderError::Config("live mode needs an auth token".into()));
        }
        Ok(LiveConfig {
            region: region.to_string(),
            endpoint_url: endpoint_url.to_string(),
            auth_token: auth_token.to_string(),
            refresh: TimeDelta::hours(1),
            max_staleness: TimeDelta::hours(3),
            retries: 2,
        })
    }

    /// Reads the endpoint and token from `CARBON_API_URL` / `CARBON_API_TOKEN`.
    pub fn from_env(region: &str) -> Result<Self, ProviderError> {
        let url = std::env::var(ENV_API_URL).map_err(|_| ProviderError::Config(format!("{ENV_API_URL} not set")))?;
        let token =
            std::env::var(ENV_API_TOKEN).map_err(|_| ProviderError::Config(format!("{ENV_API_TOKEN} not set")))?;
        Self::new(region, &url, &token)
    }

    fn request_url(&self) -> String {
        if self.region.is_empty() {
            return self.endpoint_url.clone();
        }
        let sep = if self.endpoint_url.contains('?') { '&' } else { '?' };
        format!("{}{}zone={}", self.endpoint_url, sep, self.region)
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct LiveBody {
    carbon_intensity: f64,
    datetime: String,
}

/// Parses `{"carbonIntensity": <number>, "datetime": <ISO-8601>}`.
pub fn parse_live_body(body: &str) -> Result<CarbonSample, ProviderError> {
    let parsed: LiveBody = serde_json::from_str(body).map_err(|e| ProviderError::Schema(e.to_string()))?;
    if !(parsed.carbon_intensity.is_finite() && parsed.carbon_intensity >= 0.0) {
        return Err(ProviderError::Invalid(parsed.carbon_intensity));
    }
    let timestamp = DateTime::parse_from_rfc3339(&parsed.datetime)
        .map_err(|e| ProviderError::Schema(format!("datetime: {e}")))?
        .with_timezone(&Utc);
    Ok(CarbonSample {
        timestamp,
        intensity: parsed.carbon_intensity,
    })
}

#[derive(Debug, Default)]
struct LiveCache {
    value: Option<CarbonSample>,
    /// When `value` was fetched.
    fetched_at: Option<DateTime<Utc>>,
    /// Last fetch attempt, successful or not.
    attempted_at: Option<DateTime<Utc>>,
    fetches: u64,
}

/// A reading together with how stale it is when the latest refresh failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub intensity: f64,
    pub staleness: Option<TimeDelta>,
}

pub struct LiveProvider {
    config: LiveConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    cache: Mutex<LiveCache>,
}

impl std::fmt::Debug for LiveProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveProvider")
            .field("region", &self.config.region)
            .field("endpoint_url", &self.config.endpoint_url)
            .finish_non_exhaustive()
    }
}

impl LiveProvider {
    pub fn new(config: LiveConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        LiveProvider {
            config,
            transport,
            clock,
            cache: Mutex::new(LiveCache::default()),
        }
    }

    /// One request plus configured retries; no caching.
    pub fn fetch_live(&self) -> Result<CarbonSample, ProviderError> {
        let url = self.config.request_url();
        let mut last_err = ProviderError::Unavailable("no attempt made".into());
        for _ in 0..=self.config.retries {
            match self.transport.get(&url, &self.config.auth_token) {
                Ok((status, body)) if (200..300).contains(&status) => return parse_live_body(&body),
                Ok((status, _)) => last_err = ProviderError::Status(status),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    /// Current intensity, refetching at most once per refresh interval.
    ///
    /// A failed refresh falls back to the cached value with its staleness
    /// until the value is older than the configured maximum.
    pub fn current(&self) -> Result<Reading, ProviderError> {
        // Held across the fetch so that only one request is ever in flight.
        let mut cache = self.cache.lock().expect("provider cache poisoned");
        let now = self.clock.now();
        let due = cache.attempted_at.is_none_or(|at| now - at >= self.config.refresh);
        if due {
            cache.attempted_at = Some(now);
            cache.fetches += 1;
            match self.fetch_live() {
                Ok(sample) => {
                    cache.value = Some(sample);
                    cache.fetched_at = Some(now);
                }
                Err(e) => {
                    log::warn!("carbon intensity refresh for `{}` failed: {e}", self.config.region);
                    if cache.value.is_none() {
                        return Err(e);
                    }
                }
            }
        }
        let value = cache
            .value
            .ok_or_else(|| ProviderError::Unavailable("no successful fetch yet".into()))?;
        let fetched_at = cache.fetched_at.unwrap_or(now);
        let age = now - fetched_at;
        if age > self.config.max_staleness {
            return Err(ProviderError::TooStale {
                staleness_s: age.num_seconds(),
                max_s: self.config.max_staleness.num_seconds(),
            });
        }
        let staleness = if age >= self.config.refresh {
            log::warn!("using carbon intensity {}s stale", age.num_seconds());
            Some(age)
        } else {
            None
        };
        Ok(Reading {
            intensity: value.intensity,
            staleness,
        })
    }

    /// Number of refresh attempts made so far.
    pub fn fetch_count(&self) -> u64 {
        self.cache.lock().expect("provider cache poisoned").fetches
    }
}

/// Piecewise-constant lookup over a recorded trace.
#[derive(Debug, Clone)]
pub struct TraceProvider {
    trace: CarbonTrace,
}

impl TraceProvider {
    pub fn new(trace: CarbonTrace) -> Self {
        TraceProvider { trace }
    }

    pub fn trace(&self) -> &CarbonTrace {
        &self.trace
    }

    /// The sample whose interval `[ts, ts + resolution)` contains `t`.
    pub fn intensity_at(&self, t: DateTime<Utc>) -> Result<f64, ProviderError> {
        let start = self.trace.start();
        let end = self.trace.end();
        if t < start || t >= end {
            return Err(ProviderError::OutOfSpan { t, start, end });
        }
        let res_s = self.trace.resolution.num_seconds();
        let idx = ((t - start).num_seconds().div_euclid(res_s)) as usize;
        Ok(self.trace.samples[idx].intensity)
    }
}

#[derive(Debug)]
pub enum CarbonProvider {
    Trace(TraceProvider),
    Live(LiveProvider),
}

impl CarbonProvider {
    pub fn from_trace(trace: CarbonTrace) -> Self {
        CarbonProvider::Trace(TraceProvider::new(trace))
    }

    /// Trace mode looks `t` up; live mode ignores `t` and returns the latest
    /// reading.
    pub fn intensity_at(&self, t: DateTime<Utc>) -> Result<f64, ProviderError> {
        match self {
            CarbonProvider::Trace(p) => p.intensity_at(t),
            CarbonProvider::Live(p) => p.current().map(|r| r.intensity),
        }
    }
}
