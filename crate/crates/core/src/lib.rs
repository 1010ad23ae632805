pub mod attention;
pub mod econometrics;
pub mod folklore;
pub mod pipeline;
mod seed;
pub mod transmission;
pub mod variability;
