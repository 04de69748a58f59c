//! Black-box fuzzing of REST APIs described by OpenAPI schemas.

pub mod http;
pub mod model;
pub mod schema;
pub mod auth;
pub mod clock;
pub mod gen;
pub mod links;
pub mod testcase;
pub mod faults;
pub mod coverage;
pub mod engine;
pub mod fixtures;
pub mod emitter;
pub mod cli;
