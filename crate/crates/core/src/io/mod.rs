//! File formats. Networks, bounds and reports are versioned JSON documents;
//! reals are written in shortest round-trip form, so loading is lossless.
//! Images are ASCII graymaps.

mod bounds_file;
mod image;
mod network_file;
mod report;

pub use bounds_file::{fingerprint, load_bounds, load_bounds_unchecked, save_bounds, Fingerprint, BOUNDS_FORMAT, BOUNDS_VERSION};
pub use image::{image_dims, image_to_string, parse_pgm, parse_vector, quantize, read_image, read_input, write_image, Image, MAXVAL};
pub use network_file::{load_network, network_to_string, parse_network, save_network, NETWORK_FORMAT, NETWORK_VERSION};
pub use report::{aggregate, format_table, read_report, write_report, Aggregate, Application, InstanceReport};
