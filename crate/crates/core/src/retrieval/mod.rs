//! Retrieval-style response generators.

pub mod backstory;
pub mod bank;
pub mod funfact;
pub mod news;

pub use backstory::{BackstoryRg, BackstoryTable};
pub use bank::{mention_window, CenteringRg, Mentions, ResponseBank, Style};
pub use funfact::{FunFactIndex, FunFactRg, FUNFACT_PREFIX};
pub use news::{ingest_news, parse_feed, summarize, Article, IngestReport, NewsFeed, NewsFilter, NewsRg, NewsState, NewsTemplates};
