#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod arbitration;
pub mod behaviors;
pub mod corridor;
pub mod geometry;
pub mod mpcc;
pub mod path;
pub mod protocol;
pub mod world;
