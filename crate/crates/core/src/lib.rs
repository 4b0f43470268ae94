mod binio;
pub mod corpus;
pub mod error;
pub mod features;
pub mod hdp;
pub mod protocol;
pub mod registry;
pub mod synthetic;
