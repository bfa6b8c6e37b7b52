//! Text-to-image generation with embodied-carbon insights for the
//! construction materials visible in the generated image.

pub mod canonical;
pub mod cli;
pub mod gateway;
pub mod insights;
pub mod materials;
pub mod matcher;
pub mod service;
pub mod study;
pub mod text;
