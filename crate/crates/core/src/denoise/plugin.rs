//! External denoiser reached through a subprocess.
//!
//! Per call the parent spawns the program, writes one RFI1 frame followed
//! by the line `nu=<value>\n` to its stdin, then closes stdin. The child
//! must write exactly one RFI1 frame of the same shape to stdout and exit
//! with status 0.

use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::image::ImageField;

#[derive(Debug, Clone, PartialEq)]
pub struct PluginDenoiser {
    program: PathBuf,
    args: Vec<String>,
    nu: f64,
}

impl PluginDenoiser {
    pub fn new(program: impl Into<PathBuf>, nu: f64) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::InvalidInput(format!("nu must be >= 0, got {nu}")));
        }
        Ok(PluginDenoiser {
            program: program.into(),
            args: Vec::new(),
            nu,
        })
    }

    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        let mut p = PluginDenoiser::new(self.program.clone(), nu)?;
        p.args = self.args.clone();
        Ok(p)
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn apply(&self, x: &ImageField) -> Result<ImageField> {
        let fail = |message: String, diagnostics: Option<String>| Error::Denoiser {
            message,
            diagnostics,
        };
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("spawning {}: {e}", self.program.display()), None))?;

        let mut frame = Vec::with_capacity(x.len() * 8 + 64);
        x.write_rfi(&mut frame)
            .expect("writing to a Vec cannot fail");
        frame.extend_from_slice(format!("nu={}\n", self.nu).as_bytes());
        let mut stdin = child.stdin.take().expect("piped stdin");
        // Feed stdin from a helper thread so a child that streams output
        // early cannot deadlock against us.
        let writer = std::thread::spawn(move || {
            let r = stdin.write_all(&frame);
            drop(stdin);
            r
        });

        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let mut out = Vec::new();
        let read_res = child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_end(&mut out);
        let status = child
            .wait()
            .map_err(|e| fail(format!("waiting for plugin: {e}"), None))?;
        let diag = err_reader.join().ok().filter(|s| !s.is_empty());
        let write_res = writer.join().unwrap_or(Ok(()));

        if !status.success() {
            return Err(fail(format!("plugin exited with {status}"), diag));
        }
        if let Err(e) = write_res {
            return Err(fail(format!("writing frame to plugin: {e}"), diag));
        }
        read_res.map_err(|e| fail(format!("reading plugin output: {e}"), diag.clone()))?;

        let mut reader = BufReader::new(&out[..]);
        let y = ImageField::read_rfi(&mut reader)
            .map_err(|e| fail(format!("malformed plugin frame: {e}"), diag.clone()))?;
        let mut rest = Vec::new();
        let _ = reader.read_to_end(&mut rest);
        if !rest.is_empty() {
            return Err(fail(
                format!("{} trailing bytes after plugin frame", rest.len()),
                diag,
            ));
        }
        if y.shape() != x.shape() {
            return Err(fail(
                format!(
                    "plugin returned shape {}, expected {}",
                    y.shape(),
                    x.shape()
                ),
                diag,
            ));
        }
        Ok(y)
    }
}
