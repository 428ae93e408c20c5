//! Raw logs to train/test examples: parsing, filtering, sessions, examples,
//! negative sampling and the dataset file.

pub mod dataset;
pub mod examples;
pub mod filter;
pub mod raw;
pub mod session;

use std::collections::HashMap;
use std::io::BufRead;

pub use dataset::{Dataset, DatasetManifest};
pub use examples::{build_examples, build_serving_example, build_test_example, build_train_example, sample_negative, Example, LongItem};
pub use filter::{filter_dataset, Filtered, Interaction, LabeledReview};
pub use raw::{parse_categories, parse_reviews, RawReview, UNKNOWN_CATEGORY};
pub use session::{extract_user_category, sessionize, ItemRef, Session, UserHistory, UNKNOWN_CATEGORY_ID};

use crate::error::Result;

/// Join reviews with item categories; items without metadata get
/// [`UNKNOWN_CATEGORY`].
pub fn label_reviews(reviews: Vec<RawReview>, categories: &HashMap<String, String>) -> Vec<LabeledReview> {
    reviews
        .into_iter()
        .map(|r| {
            let category = categories
                .get(&r.item)
                .cloned()
                .unwrap_or_else(|| UNKNOWN_CATEGORY.to_string());
            LabeledReview {
                user: r.user,
                item: r.item,
                category,
                timestamp: r.timestamp,
            }
        })
        .collect()
}

/// Full preprocessing: parse both streams, filter, sessionize and draw examples.
pub fn prepare<R1: BufRead, R2: BufRead>(reviews: R1, metadata: R2, max_long: usize, seed: u64) -> Result<Dataset> {
    let parsed = parse_reviews(reviews)?;
    let categories = parse_categories(metadata)?;
    let labeled = label_reviews(parsed.reviews, &categories);
    let filtered = filter_dataset(&labeled)?;
    Ok(Dataset::build(filtered, max_long, seed))
}
