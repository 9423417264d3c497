pub mod bench;
pub mod encode;
pub mod label;
pub mod split;
pub mod stats;
pub mod tile;
