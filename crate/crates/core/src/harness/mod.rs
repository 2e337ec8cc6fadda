//! Synthetic instance generators, file formats and run configuration.

mod config;
mod generators;
mod io;

pub use config::{RunConfig, INSTANCE_KEYS};

pub use generators::{
    builtin_image, gen_blur_instance, gen_classification, gen_fused_lasso, gen_portfolio, random_interior_state,
    sample_poisson, seeded_rng, BlurInstance, ClassificationData,
};
pub use io::{
    format_csv, format_matrix_market, format_pgm, parse_csv, parse_matrix_market, parse_pgm, read_csv,
    read_matrix_market, read_pgm, write_csv, write_matrix_market, write_pgm, CsvTable, GrayImage,
};
