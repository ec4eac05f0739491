pub mod crowd;
pub mod estimate;
pub mod simulate;
