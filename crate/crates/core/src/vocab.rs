//! Sentiment and topic vocabularies. Line order defines vector index.

use std::sync::OnceLock;

pub const SENTIMENTS_V1: &str = include_str!("../vocab/sentiments_v1.txt");
pub const TOPICS_V1: &str = include_str!("../vocab/topics_v1.txt");

pub const N_SENTIMENTS: usize = 30;
pub const N_TOPICS: usize = 38;

fn parse(text: &'static str) -> Vec<&'static str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

pub fn sentiments() -> &'static [&'static str] {
    static CELL: OnceLock<Vec<&'static str>> = OnceLock::new();
    CELL.get_or_init(|| parse(SENTIMENTS_V1))
}

pub fn topics() -> &'static [&'static str] {
    static CELL: OnceLock<Vec<&'static str>> = OnceLock::new();
    CELL.get_or_init(|| parse(TOPICS_V1))
}

pub fn sentiment_index(name: &str) -> Option<usize> {
    sentiments().iter().position(|s| *s == name)
}

pub fn topic_index(name: &str) -> Option<usize> {
    topics().iter().position(|s| *s == name)
}
