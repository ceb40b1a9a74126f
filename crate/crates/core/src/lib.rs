pub mod baselines;
pub mod channel;
pub mod designer;
pub mod error;
pub mod harness;
pub mod optimize;
pub mod prior;
pub mod quadrature;
pub mod quantizer;
pub mod rbp;
pub mod special;
pub mod state_evolution;
pub mod truncated;
