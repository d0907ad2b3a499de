//! Data shipped with the crate: the default timing library subset and
//! the default compressor implementation catalog.

pub const NANGATE45_SUBSET: &str = include_str!("../../../data/nangate45_subset.lib");
pub const DEFAULT_CATALOG: &str = include_str!("../../../data/impls.toml");
