pub mod geom;
pub mod lanelet;
pub mod occupancy;
pub mod oracle;
pub mod planner;
pub mod prediction;
pub mod render;
pub mod scenario;
pub mod sensing;
pub mod sim;
