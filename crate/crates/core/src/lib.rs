pub mod agent;
pub mod assets;
pub mod bt;
pub mod comms;
pub mod knowledge;
pub mod language;
pub mod plan;
pub mod service;
pub mod sim;
pub mod tactical;
pub mod world;
