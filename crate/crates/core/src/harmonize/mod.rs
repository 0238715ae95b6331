//! Aggregation: header normalization, unit conversion and cross-source fusion.

mod external;
mod headers;
mod merge;
mod units;

pub use external::{load_external, ColumnMap, ExternalError, ValueColumn};
pub use headers::{
    depth_unit_hint, negative_hemisphere_hint, normalize_header_text, normalize_headers, ratio_in_header,
    rule_mapping, AliasTable, CanonicalField, HeaderMapping, HEADER_NODE,
};
pub use merge::{
    is_duplicate, merge_sources, ExternalDataset, MergeLogEntry, UnifiedDataset, COORD_TOL_DEG, DEPTH_TOL_M,
    VALUE_REL_TOL,
};
pub use units::{
    guess_dimension, resolve_conversion, ConversionKind, ConversionProposal, Dimension, NamedConstant, UnitConversion,
    UnitError, UnitRegistry, DPM_PER_BQ, PB_MOLAR_MASS_G_PER_MOL, SEAWATER_DENSITY_KG_PER_M3, UNIT_NODE,
};
