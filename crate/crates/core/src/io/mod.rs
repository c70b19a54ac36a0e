//! On-disk formats: PGM frames, JSON-lines sensor logs, CSV tables, SVG
//! plots and simulation bundles.

pub mod bundle;
pub mod jsonl;
pub mod pgm;
pub mod svg;
pub mod tables;

pub use bundle::{
    frame_path, read_bundle, read_config, write_bundle, write_config, Bundle, PgmDir, CONFIG_FILE,
    FRAMES_DIR, SENSORS_FILE, TRUTH_FILE,
};
pub use jsonl::{parse_samples, read_samples_file, write_samples, write_samples_file};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use svg::{parse_polylines, render_figure, render_quiver, Panel, Series};
pub use tables::{
    config_hash, navlog_header, read_table, read_track, truth_header, write_flow_csv,
    write_innovations_csv, write_navlog_csv, write_truth_csv, Table,
};
