//! Catalog input and result export.

mod catalog;
pub mod export;

pub use catalog::{
    load_population, read_population, save_population, write_population, Population, Rejected, CATALOG_COLUMNS,
};
