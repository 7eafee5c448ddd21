use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, RwLock};

use chrono::DateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dialogue_acts::DaLabel;
use crate::error::{Error, Result};
use crate::rg::{Registration, ResponseGenerator, RgContext, RgOutput, TopicScope, TurnOutcome};
use crate::text;
use crate::types::{ResponseCandidate, SystemAction, TopicId};

pub const STORE_CAPACITY: usize = 100;
pub const SUMMARY_SENTENCES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub source: String,
    /// Seconds since the epoch.
    pub published: i64,
    pub summary: Vec<String>,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsFilter {
    /// Articles carrying any of these categories are dropped.
    #[serde(default)]
    pub blocked: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub articles: Vec<Article>,
    pub skipped_documents: usize,
    pub skipped_items: usize,
    pub filtered: usize,
}

fn sentences(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = body.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        cur.push(c);
        let end = matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if end {
            let s = cur.trim().to_string();
            if !s.is_empty() {
                out.push(s);
            }
            cur.clear();
        }
    }
    let s = cur.trim().to_string();
    if !s.is_empty() {
        out.push(s);
    }
    out
}

/// Extractive summary: sentences scored by position and overlap with the
/// title, best three kept in document order.
pub fn summarize(title: &str, body: &str) -> Vec<String> {
    let title_words: BTreeSet<String> = text::tokenize(title).into_iter().filter(|w| w.len() > 3).collect();
    let sents = sentences(body);
    let mut scored: Vec<(usize, f64)> = sents
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let toks: BTreeSet<String> = text::tokenize(s).into_iter().collect();
            let overlap = if title_words.is_empty() {
                0.0
            } else {
                title_words.intersection(&toks).count() as f64 / title_words.len() as f64
            };
            (i, 1.0 / (1.0 + i as f64) + overlap)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = scored.into_iter().take(SUMMARY_SENTENCES).map(|(i, _)| i).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| sents[i].clone()).collect()
}

fn parse_time(s: &str) -> Option<i64> {
    let s = s.trim();
    DateTime::parse_from_rfc2822(s)
        .or_else(|_| DateTime::parse_from_rfc3339(s))
        .ok()
        .map(|d| d.timestamp())
}

fn child_text<'a>(node: roxmltree::Node<'a, 'a>, name: &str) -> Option<&'a str> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
        .and_then(|c| c.text())
}

/// Parses RSS 2.0 items and Atom entries. Items without a title or a
/// parseable date are skipped.
pub fn parse_feed(xml: &str) -> Result<(Vec<(Article, String)>, usize)> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::Config(format!("feed: {e}")))?;
    let tag_re = Regex::new(r"<[^>]+>").expect("static pattern");
    let feed_source = doc
        .descendants()
        .find(|n| n.is_element() && matches!(n.tag_name().name(), "channel" | "feed"))
        .and_then(|n| child_text(n, "title"))
        .unwrap_or("the news")
        .trim()
        .to_string();
    let mut out = Vec::new();
    let mut skipped = 0;
    for item in doc
        .descendants()
        .filter(|n| n.is_element() && matches!(n.tag_name().name(), "item" | "entry"))
    {
        let title = child_text(item, "title").map(str::trim).filter(|t| !t.is_empty());
        let published = child_text(item, "pubDate")
            .or_else(|| child_text(item, "updated"))
            .or_else(|| child_text(item, "published"))
            .and_then(parse_time);
        let (Some(title), Some(published)) = (title, published) else {
            skipped += 1;
            continue;
        };
        let body = child_text(item, "description")
            .or_else(|| child_text(item, "summary"))
            .or_else(|| child_text(item, "content"))
            .unwrap_or("");
        let body = tag_re.replace_all(body, " ");
        let id = child_text(item, "guid")
            .or_else(|| child_text(item, "id"))
            .or_else(|| child_text(item, "link"))
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| format!("{:016x}", text::stable_hash(&[title.as_bytes()])));
        let tags: Vec<String> = item
            .children()
            .filter(|c| c.is_element() && c.tag_name().name() == "category")
            .filter_map(|c| c.text().or_else(|| c.attribute("term")))
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let source = child_text(item, "source").map(str::trim).unwrap_or(&feed_source).to_string();
        out.push((
            Article {
                id,
                title: title.to_string(),
                source,
                published,
                summary: summarize(title, &body),
                tags,
            },
            body.into_owned(),
        ));
    }
    Ok((out, skipped))
}

/// Parses every document, drops blocked categories, and keeps the most
/// recent [`STORE_CAPACITY`] articles newest first.
pub fn ingest_news(documents: &[&str], filter: &NewsFilter) -> IngestReport {
    let mut report = IngestReport::default();
    let mut seen = BTreeSet::new();
    for doc in documents {
        match parse_feed(doc) {
            Ok((items, skipped)) => {
                report.skipped_items += skipped;
                for (a, _) in items {
                    if a.tags.iter().any(|t| filter.blocked.contains(t)) {
                        report.filtered += 1;
                    } else if seen.insert(a.id.clone()) {
                        report.articles.push(a);
                    }
                }
            }
            Err(e) => {
                log::warn!("skipping news document: {e}");
                report.skipped_documents += 1;
            }
        }
    }
    report
        .articles
        .sort_by(|a, b| b.published.cmp(&a.published).then_with(|| a.id.cmp(&b.id)));
    report.articles.truncate(STORE_CAPACITY);
    report
}

/// Shared article snapshot, swapped whole by the ingest job.
#[derive(Debug, Default)]
pub struct NewsFeed {
    current: RwLock<Arc<Vec<Article>>>,
}

impl NewsFeed {
    pub fn new(articles: Vec<Article>) -> Self {
        NewsFeed {
            current: RwLock::new(Arc::new(articles)),
        }
    }

    pub fn load(path: &Path, filter: &NewsFilter) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self::new(ingest_news(&[&data], filter).articles))
    }

    pub fn snapshot(&self) -> Arc<Vec<Article>> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, articles: Vec<Article>) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(articles);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsTemplates {
    pub tease: Vec<String>,
    pub summary: Vec<String>,
    pub opinion: Vec<String>,
}

impl Default for NewsTemplates {
    fn default() -> Self {
        NewsTemplates {
            tease: vec!["I saw a headline from {source}: {title}. Want to hear more?".into()],
            summary: vec!["Here's what it says. {summary}".into()],
            opinion: vec!["What do you think about that?".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsState {
    /// Article under discussion and the step last spoken.
    pub active: Option<(String, u8)>,
    pub done: BTreeSet<String>,
}

/// Relevance: topic-tag matches, then entity overlap, then recency.
pub fn select_article<'a>(
    articles: &'a [Article],
    tokens: &[String],
    entity_labels: &[String],
    done: &BTreeSet<String>,
) -> Option<&'a Article> {
    let label_toks: Vec<Vec<String>> = entity_labels.iter().map(|l| text::tokenize(l)).collect();
    articles
        .iter()
        .filter(|a| !done.contains(&a.id))
        .map(|a| {
            let tag_hits = a.tags.iter().filter(|t| tokens.contains(t)).count();
            let body: Vec<String> = text::tokenize(&format!("{} {}", a.title, a.summary.join(" ")));
            let ent_hits = label_toks
                .iter()
                .filter(|l| !l.is_empty() && text::find_token_run(&body, l).is_some())
                .count();
            (a, tag_hits, ent_hits)
        })
        .max_by(|x, y| {
            x.1.cmp(&y.1)
                .then(x.2.cmp(&y.2))
                .then(x.0.published.cmp(&y.0.published))
                .then(y.0.id.cmp(&x.0.id))
        })
        .map(|(a, _, _)| a)
}

pub struct NewsRg {
    feed: Arc<NewsFeed>,
    templates: NewsTemplates,
    topics: BTreeSet<TopicId>,
}

impl NewsRg {
    pub const ID: &'static str = "news";

    pub fn new(feed: Arc<NewsFeed>, templates: NewsTemplates, topics: impl IntoIterator<Item = TopicId>) -> Self {
        NewsRg {
            feed,
            templates,
            topics: topics.into_iter().collect(),
        }
    }

    fn fill(&self, options: &[String], a: &Article, rng: &mut impl rand::Rng) -> Option<String> {
        let t = options.get(rng.random_range(0..options.len().max(1)))?;
        let slots = [
            ("title".to_string(), a.title.clone()),
            ("source".to_string(), a.source.clone()),
            ("summary".to_string(), a.summary.join(" ")),
        ]
        .into();
        text::fill_slots(t, &slots)
    }
}

impl ResponseGenerator for NewsRg {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registration(&self) -> Registration {
        Registration::new(
            [SystemAction::Converse, SystemAction::TopicChange],
            TopicScope::Only(self.topics.clone()),
        )
    }

    fn respond(&self, ctx: &RgContext) -> Result<RgOutput> {
        let mut st: NewsState = ctx
            .rg_state(Self::ID)
            .and_then(|b| serde_json::from_slice(b).ok())
            .unwrap_or_default();
        let articles = self.feed.snapshot();
        let mut rng = ctx.rng(Self::ID);
        let active = st
            .active
            .take()
            .and_then(|(id, step)| articles.iter().find(|a| a.id == id).map(|a| (a, step)));
        let (article, step, body) = match active {
            Some((a, 1)) if ctx.nlu.has_da(DaLabel::NoAnswer) => {
                st.done.insert(a.id.clone());
                return Ok(RgOutput {
                    state_if_unchosen: Some(serde_json::to_vec(&st).expect("serializes")),
                    ..RgOutput::none()
                });
            }
            Some((a, 1)) => (a, 2, self.fill(&self.templates.summary, a, &mut rng)),
            Some((a, _)) => (a, 3, self.fill(&self.templates.opinion, a, &mut rng)),
            None => {
                let labels: Vec<String> = ctx.nlu.entities.iter().map(|e| e.surface.clone()).collect();
                let Some(a) = select_article(&articles, &ctx.nlu.tokens, &labels, &st.done) else {
                    return Ok(RgOutput::none());
                };
                (a, 1, self.fill(&self.templates.tease, a, &mut rng))
            }
        };
        let Some(body) = body else {
            return Ok(RgOutput::none());
        };
        if step >= 3 {
            st.done.insert(article.id.clone());
        } else {
            st.active = Some((article.id.clone(), step));
        }
        let da = match step {
            3 => DaLabel::OpinionQuestion,
            _ => DaLabel::StatementNonOpinion,
        };
        let mut c = ResponseCandidate::new(Self::ID, ctx.constraints.topic.clone(), body)
            .with_da(da)
            .with_state(serde_json::to_vec(&st).expect("serializes"));
        if step == 2 {
            c = c.factual();
        }
        Ok(RgOutput::one(c))
    }

    fn observe(&self, state: &[u8], outcome: &TurnOutcome) -> Option<Vec<u8>> {
        if outcome.chosen_rg.as_deref() == Some(Self::ID) {
            return None;
        }
        let mut st: NewsState = serde_json::from_slice(state).ok()?;
        let (id, _) = st.active.take()?;
        st.done.insert(id);
        serde_json::to_vec(&st).ok()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn feed(n: usize, blocked_every: usize) -> String {
        let mut items = String::new();
        for i in 0..n {
            let cat = if blocked_every > 0 && i % blocked_every == 0 { "politics" } else { "science" };
            let day = 1 + i % 28;
            let hour = i % 24;
            items.push_str(&format!(
                "<item><title>Story {i} about rockets</title><guid>id-{i}</guid>\
                 <pubDate>{:02} Mar 2021 {:02}:00:00 +0000</pubDate><category>{cat}</category>\
                 <description>&lt;p&gt;Rockets launched today. Officials were pleased. \
                 The weather held. Crowds watched from the beach.&lt;/p&gt;</description></item>",
                day, hour
            ));
        }
        format!("<?xml version=\"1.0\"?><rss version=\"2.0\"><channel><title>Daily Wire Desk</title>{items}</channel></rss>")
    }

    #[test]
    fn keeps_newest_hundred() {
        let xml = feed(150, 0);
        let r = ingest_news(&[&xml], &NewsFilter::default());
        assert_eq!(r.articles.len(), 100);
        assert!(r.articles.windows(2).all(|w| w[0].published >= w[1].published));
        let mut all: Vec<i64> = parse_feed(&xml).unwrap().0.iter().map(|(a, _)| a.published).collect();
        all.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(r.articles.last().unwrap().published, all[99]);
    }

    #[test]
    fn filters_blocked_categories() {
        let filter = NewsFilter {
            blocked: ["politics".to_string()].into(),
        };
        let r = ingest_news(&[&feed(10, 2)], &filter);
        assert_eq!(r.filtered, 5);
        assert!(r.articles.iter().all(|a| !a.tags.contains(&"politics".to_string())));
    }

    #[test]
    fn empty_and_broken_feeds() {
        let r = ingest_news(&["<rss><channel></channel></rss>", "not xml"], &NewsFilter::default());
        assert!(r.articles.is_empty());
        assert_eq!(r.skipped_documents, 1);
    }

    #[test]
    fn summary_is_three_sentences() {
        let s = summarize("Rockets launch", "Rockets launched today. Officials were pleased. The weather held. Crowds watched.");
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], "Rockets launched today.");
    }
}
