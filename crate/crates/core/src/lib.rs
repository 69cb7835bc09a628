pub mod arena;
pub mod cli;
pub mod dsl;
pub mod fields;
pub mod fsm;
pub mod plot;
pub mod schemas;
pub mod vec2;
pub mod world;
