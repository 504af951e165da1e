//! Frame files, CSV tables, synthetic video and frame-by-frame separation.

pub mod pgm;
pub mod table;
pub mod video;

pub use pgm::{decode_pgm, load_masks, load_pgm_sequence, read_pgm, write_pgm, FrameSequence, PgmImage};
pub use table::{read_data_rows, write_phase_csv, write_roc_csv, write_table, RunMeta};
pub use video::{
    gen_video_sequence, separate_sequence, write_separation, write_video_sequence, SeparateConfig, SeparationRun,
    VideoConfig, VideoSequence,
};
