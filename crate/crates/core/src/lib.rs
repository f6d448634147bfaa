pub mod quadrature;
pub mod sources;
pub mod smoothing;
pub mod bounds;
pub mod asymptotics;
pub mod mc;
