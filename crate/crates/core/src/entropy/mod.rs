//! Bowen metric, separated and spanning counts, growth rates, and open-cover
//! entropy on finite models.

mod count;
mod cover;
mod estimate;
mod growth;
mod orbit;

pub use count::{max_separated, min_spanning, CountMode, Selection, EXACT_LIMIT};
pub use cover::{
    check_cover_laws, cover_entropy_rate, cover_join, cover_pullback, enumerate_covers, minimal_subcover_count,
    CoverLawReport, CoverRate, FiniteCover, LawScope, LawTally, COVER_LIMIT,
};
pub use estimate::{
    estimate_entropy, format_g, CountRecord, CountTable, EntropyReport, EpsilonRate, EstimateParams, CSV_COLUMNS,
    DEFAULT_SATURATION, DEFAULT_TAIL, PLATEAU_TOLERANCE,
};
pub use growth::{growth_rate, Growth};
pub use orbit::{bowen_dist, OrbitTable};
