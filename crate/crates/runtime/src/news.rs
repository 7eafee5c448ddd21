use std::sync::Arc;
use std::time::Duration;

use parley_core::retrieval::{ingest_news, NewsFilter};
use parley_core::Engine;

/// Fetches one feed document.
pub fn fetch(url: &str, timeout: Duration) -> Option<String> {
    let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
    match agent.get(url).call() {
        Ok(mut r) => r.body_mut().read_to_string().map_err(|e| log::warn!("news feed {url}: {e}")).ok(),
        Err(e) => {
            log::warn!("news feed {url}: {e}");
            None
        }
    }
}

/// Re-reads the configured feed every `news_poll_secs`. An empty or failed
/// fetch keeps the current articles.
pub fn spawn_poller(engine: Arc<Engine>) -> Option<tokio::task::JoinHandle<()>> {
    let cfg = engine.config().clone();
    let url = cfg.service.news_url.clone()?;
    if cfg.service.news_poll_secs == 0 {
        return None;
    }
    let filter = NewsFilter {
        blocked: cfg.rgs.news_blocked.clone(),
    };
    let period = Duration::from_secs(cfg.service.news_poll_secs);
    Some(tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let url = url.clone();
            let Ok(Some(doc)) = tokio::task::spawn_blocking(move || fetch(&url, Duration::from_secs(10))).await else {
                continue;
            };
            let report = ingest_news(&[&doc], &filter);
            if report.articles.is_empty() {
                continue;
            }
            log::info!("news: {} articles ({} filtered)", report.articles.len(), report.filtered);
            engine.news().replace(report.articles);
        }
    }))
}
