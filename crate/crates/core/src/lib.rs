pub mod degree;
pub mod classical;
pub mod diagram;
pub mod displacement;
pub mod experiment;
pub mod fit;
pub mod fixtures;
pub mod kinematics;
pub mod landau;
pub mod quadrature;
pub mod transform;
pub mod wavepacket;
