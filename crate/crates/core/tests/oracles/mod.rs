#![allow(dead_code)]
pub mod datalog;
pub mod island;
pub mod treepath;
