//! Nowcasting the direction of 30-day implied volatility from prices, option
//! chains and social-media sentiment.

pub mod calendar;
pub mod cli;
pub mod config;
pub mod eval;
pub mod features;
pub mod forest;
pub mod hmm;
pub mod io;
pub mod ivindex;
pub mod pipeline;
pub mod report;
pub mod sentiment;
pub mod synth;
pub mod universe;

pub use calendar::TradingCalendar;
pub use config::RunConfig;
pub use features::{build_matrix, Feature, FeatureMatrix, PricePoint, ScenarioId};
pub use forest::{fit_forest, Dataset, Forest, ForestConfig};
pub use hmm::{GaussianHmm, Regime, RegimePath};
pub use ivindex::{iv30, IvPoint, OptionChainSnapshot, OptionQuote};
pub use pipeline::RunError;
pub use sentiment::{DailySocialStats, Lexicon, LexiconScorer, TweetRecord};
pub use synth::{SyntheticBundle, SyntheticSpec};
pub use universe::SectorUniverse;
