//! Amazon-style JSON-lines readers for reviews and item metadata.

use std::collections::HashMap;
use std::io::BufRead;

use log::{debug, warn};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Category label assigned to items without metadata.
pub const UNKNOWN_CATEGORY: &str = "UNKNOWN";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawReview {
    pub user: String,
    pub item: String,
    pub timestamp: i64,
}

#[derive(Deserialize)]
struct ReviewLine {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    #[serde(rename = "unixReviewTime")]
    unix_review_time: i64,
}

#[derive(Deserialize)]
struct MetaLine {
    asin: String,
    #[serde(default)]
    categories: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Default)]
pub struct ParsedReviews {
    pub reviews: Vec<RawReview>,
    pub skipped: usize,
}

/// Parse review JSON-lines. Malformed lines are skipped and counted; blank
/// lines are ignored. Fails if no line yields a valid record.
pub fn parse_reviews<R: BufRead>(reader: R) -> Result<ParsedReviews> {
    let mut out = ParsedReviews::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ReviewLine>(&line) {
            Ok(r) if r.unix_review_time > 0 && !r.reviewer_id.is_empty() && !r.asin.is_empty() => {
                out.reviews.push(RawReview {
                    user: r.reviewer_id,
                    item: r.asin,
                    timestamp: r.unix_review_time,
                });
            }
            Ok(_) => {
                debug!("line {}: invalid field values", lineno + 1);
                out.skipped += 1;
            }
            Err(e) => {
                debug!("line {}: {e}", lineno + 1);
                out.skipped += 1;
            }
        }
    }
    if out.skipped > 0 {
        warn!("skipped {} malformed review lines", out.skipped);
    }
    if out.reviews.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(out)
}

/// Parse item metadata JSON-lines into `item -> category label`.
///
/// Each item gets the most specific (last) label of its first category path;
/// items without any usable path map to [`UNKNOWN_CATEGORY`]. Malformed lines
/// are skipped.
pub fn parse_categories<R: BufRead>(reader: R) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    let mut skipped = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: MetaLine = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        out.insert(meta.asin, category_label(meta.categories.as_deref()));
    }
    if skipped > 0 {
        warn!("skipped {skipped} malformed metadata lines");
    }
    Ok(out)
}

fn category_label(paths: Option<&[Vec<String>]>) -> String {
    paths
        .and_then(|p| p.first())
        .and_then(|first| first.last())
        .filter(|label| !label.is_empty())
        .cloned()
        .unwrap_or_else(|| UNKNOWN_CATEGORY.to_string())
}
