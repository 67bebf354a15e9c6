pub mod cli;
pub mod constitutive;
pub mod dissipation;
pub mod material_point;
pub mod solver;
pub mod error;
pub mod evolution;
pub mod fem;
pub mod tensor;
pub mod verification;
