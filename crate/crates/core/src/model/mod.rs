//! The adversarial imputation model: generator, discriminator, cells.

pub mod cell;
pub mod discriminator;
pub mod generator;

pub use cell::{decay, CellKind, CellParams};
pub use discriminator::{
    discriminator_loss, generator_adversarial_loss, AdvMode, Discriminator, DiscriminatorParams,
};
pub use generator::{replace, CombineMode, Generator, GeneratorOutput, GeneratorParams};
