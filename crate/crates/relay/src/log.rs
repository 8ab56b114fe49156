//! Per-session frame logs.
//!
//! One redacted frame per line at `<log-dir>/<session_id>.fslog`. Each line is a
//! single unbuffered write, so a crash can lose at most the line being written.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sharecam_core::protocol::{encode_frame, Frame};

pub const LOG_EXTENSION: &str = "fslog";

pub fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.{LOG_EXTENSION}"))
}

#[derive(Debug)]
pub struct SessionLog {
    file: File,
    path: PathBuf,
}

impl SessionLog {
    /// Fails with `AlreadyExists` rather than appending to another session's log.
    pub fn create(path: PathBuf) -> io::Result<Self> {
        let file = OpenOptions::new().write(true).create_new(true).open(&path)?;
        Ok(Self { file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Media payloads are stripped before writing.
    pub fn append(&mut self, frame: &Frame) -> io::Result<()> {
        self.file.write_all(encode_frame(&frame.redacted()).as_bytes())
    }

    pub fn close(mut self) -> io::Result<()> {
        self.file.flush()?;
        self.file.sync_all()
    }
}
