pub mod coords;
pub mod error;
pub mod group;
pub mod harmonics;
pub mod mean;
pub mod poly;
pub mod quadrature;
pub mod radial;
pub mod reduce;
pub mod verify;
