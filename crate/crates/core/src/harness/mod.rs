//! Trials, campaigns and searches probing the entropy photon-number
//! inequality and the minimum-output-entropy conjectures.

pub mod sampler;
pub mod trials;
pub mod campaign;
pub mod simplex;
pub mod search;

pub use campaign::{run_campaign, CampaignConfig, CampaignResult, CampaignSummary, Dossier, Ensemble, TrialRecord};
pub use search::{minimize_output_entropy, Objective, SearchConfig, SearchResult};
pub use trials::{epni_check, moe1_trial, moe2_trial, EpniSlackReport, MoeTrialReport};
