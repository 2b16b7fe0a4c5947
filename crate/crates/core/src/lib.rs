pub mod coarse_amg;
pub mod elasticity;
pub mod meshgen;
pub mod mortar;
pub mod sparsela;
pub mod system;
pub mod krylov;
pub mod twolevel;
pub mod oracle;
pub mod bench;
