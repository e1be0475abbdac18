//! Low-rank baselines: LoRA adapters (with ReLoRA merging) and GaLore
//! gradient projection, plus MLP-level trainers built on them.

mod galore;
mod lora;

pub use galore::{galore_step, GaloreMlp, GaloreState};
pub use lora::{lora_step, relora_merge, LoraAdapter, LoraMlp};
