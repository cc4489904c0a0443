//! Configuration parsing, report encoding, figures and pipelines for the
//! `lame` command-line tool.

pub mod commands;
pub mod config;
pub mod json;
pub mod svg;
