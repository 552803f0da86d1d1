//! File formats: ENVI cubes, endmember CSV libraries and map exports.

mod endmembers;
mod envi;
mod maps;

pub use endmembers::{read_endmembers_csv, write_endmembers_csv};
pub use envi::{find_raw_path, raw_path_for, read_envi_cube, write_envi_cube};
pub use maps::{map_to_csv, map_to_pgm, write_map, write_table_csv, MapFormat};
