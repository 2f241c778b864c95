//! Minimal stderr logger controlled by the `MEESO_LOG` environment variable
//! (`error`, `info`, or `debug`; default `info`).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error = 0,
    Info = 1,
    Debug = 2,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

fn level() -> Level {
    *LEVEL.get_or_init(|| match std::env::var("MEESO_LOG").as_deref() {
        Ok("error") => Level::Error,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    })
}

pub fn enabled(at: Level) -> bool {
    at <= level()
}

pub fn log(at: Level, message: &str) {
    if enabled(at) {
        let tag = match at {
            Level::Error => "error",
            Level::Info => "info",
            Level::Debug => "debug",
        };
        eprintln!("[meeso {tag}] {message}");
    }
}

pub fn error(message: &str) {
    log(Level::Error, message);
}

pub fn info(message: &str) {
    log(Level::Info, message);
}

pub fn debug(message: &str) {
    log(Level::Debug, message);
}
