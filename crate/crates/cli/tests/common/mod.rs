#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use mjo_gp::data::RmmSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BIN: &str = env!("CARGO_BIN_EXE_mjo-gp");

/// Damped rotation with a 45-day period and unit stationary variance per
/// component, over 1979-01-01..=2023-12-31.
pub fn surrogate_series(seed: u64) -> RmmSeries {
    let start = NaiveDate::from_ymd_opt(1979, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2023, 12, 31).unwrap();
    let n = (end - start).num_days() as usize + 1;
    let rho: f64 = 0.97;
    let sigma = (1.0 - rho * rho).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI / 45.0).sin_cos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = [0.0f64; 2];
    let mut out = Vec::with_capacity(n);
    for t in 0..n + 1000 {
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        z = [
            rho * (c * z[0] - s * z[1]) + sigma * e1,
            rho * (s * z[0] + c * z[1]) + sigma * e2,
        ];
        if t >= 1000 {
            out.push(z);
        }
    }
    RmmSeries::from_pairs(start, &out)
}

/// Temporary directory holding a surrogate cache, model and outputs.
pub struct Sandbox {
    pub dir: tempfile::TempDir,
}

impl Sandbox {
    pub fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("rmm.txt"),
            surrogate_series(seed).to_feed_text(),
        )
        .unwrap();
        Self { dir }
    }

    pub fn empty() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs the binary with the sandbox cache, model and output paths.
    pub fn run(&self, args: &[&str]) -> Output {
        run_with(self.dir.path(), args)
    }
}

pub fn run_with(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args)
        .arg("--offline")
        .arg("--cache")
        .arg(dir.join("rmm.txt"))
        .arg("--model")
        .arg(dir.join("model.json"))
        .arg("--out-dir")
        .arg(dir.join("out"))
        .env("RUST_LOG", "error");
    cmd.output().unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
