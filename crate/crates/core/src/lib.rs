//! Forecast-centric adaptive learning on high-frequency order-book data.
//!
//! The pipeline runs tick ingestion and bracketing ([`market_data`]),
//! order-book features ([`features`]), rolling unit-root scans
//! ([`stationarity`]), a grid of windowed ARIMAX/VARMA forecasters
//! ([`model_zoo`]), an adaptive selector over that grid ([`adaptive`]),
//! forecast and trading metrics ([`evaluation`]) and selection-frequency
//! hypothesis tests ([`hypotest`]).

pub mod adaptive;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod hypotest;
pub mod market_data;
pub mod model_zoo;
pub mod stationarity;
pub mod stats;

pub use adaptive::{SelectionRecord, SelectorConfig, SelectorMode, PenaltyType};
pub use error::{Error, Result};
pub use evaluation::{PerfReport, PlMode, SessionSpan};
pub use features::FeatureVector;
pub use hypotest::{BayesFactor, ClassQuery, ModelPredicate, TestResult};
pub use market_data::{Bracket, BracketSeries, GapKind, Session, TickRecord};
pub use model_zoo::{ForecastTable, ModelInput, ModelSpec, ParamEstimate};
pub use stationarity::{AdfResult, RollingAdfScan};
