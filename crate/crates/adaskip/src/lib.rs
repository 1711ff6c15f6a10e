//! Adaptive sublayer skipping for a small decoder-only transformer.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`model`] runs a byte-level toy transformer exactly, token by token,
//!    with a per-sublayer skip hook.
//! 2. [`profiler`] measures, for every attention and FFN sublayer, how
//!    similar its output is to its input across a set of calibration tasks.
//! 3. [`policy`] turns a profile into a skip plan: the most input-similar
//!    sublayers are replaced by a scaled copy of their input. It also holds
//!    the baseline strategies and the online decode-time FFN extension.
//! 4. [`bench`] executes plans over task suites and reports speed proxies
//!    (FLOP ratios, sublayers per token) and quality proxies (top-1
//!    agreement, logit cosine) against the full model.
//!
//! See the `examples/` directory for runnable end-to-end walkthroughs; the
//! `adaskip` binary exposes the same pipeline as subcommands.

pub mod bench;
pub mod cli;
pub mod error;
pub mod model;
pub mod policy;
pub mod profiler;
pub mod tensor;

pub use error::{Error, ErrorCategory, Result};

/// Write via a sibling temp file and rename, so concurrent readers see
/// either the old bytes or the new, never a torn file.
pub(crate) fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let err = |e| Error::io(path, e);
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}
