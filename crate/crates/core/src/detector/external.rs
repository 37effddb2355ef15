//! File-based bridge to an out-of-process detector.
//!
//! Per batch the adapter writes every frame's cloud to
//! `<workdir>/clouds/<frame_id>.bin` and a request manifest
//! `<workdir>/request.txt` with one `<frame_id> <cloud_path>` line per frame.
//! It then runs the command with the working directory set to `<workdir>` and
//! the environment variables [`REQUEST_ENV`] and [`WORKDIR_ENV`] set. The
//! literal arguments `{request}` and `{workdir}` are substituted as well.
//!
//! The command must leave one `<workdir>/pred/<frame_id>.txt` per frame:
//! KITTI label lines with a trailing score, boxes in the sensor frame (the
//! identity-calibration convention of [`crate::dataset`]).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{sort_by_score, Detection, Detector};
use crate::dataset::{format_label, parse_labels, write_cloud, Calibration, Frame};
use crate::error::{Error, Result};

pub const REQUEST_ENV: &str = "SCAR_REQUEST";
pub const WORKDIR_ENV: &str = "SCAR_WORKDIR";

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug)]
pub struct ExternalDetector {
    command: Vec<String>,
    workdir: PathBuf,
    timeout: Duration,
    expose_ground_truth: bool,
    // one request in flight per adapter
    busy: Mutex<()>,
}

/// Creates an adapter for `command` using `workdir` as its exchange area.
pub fn spawn_external_detector(command: Vec<String>, workdir: &Path) -> Result<ExternalDetector> {
    if command.is_empty() {
        return Err(Error::InvalidArgument("external detector command is empty".into()));
    }
    fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let workdir = workdir.canonicalize().map_err(|e| Error::io(workdir, e))?;
    Ok(ExternalDetector {
        command,
        workdir,
        timeout: DEFAULT_TIMEOUT,
        expose_ground_truth: false,
        busy: Mutex::new(()),
    })
}

impl ExternalDetector {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Also writes `<workdir>/gt/<frame_id>.txt` with the frame's annotations.
    /// Only meant for protocol conformance fixtures.
    pub fn with_ground_truth(mut self, expose: bool) -> Self {
        self.expose_ground_truth = expose;
        self
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    fn prepare(&self, frames: &[Frame]) -> Result<PathBuf> {
        let pred = self.workdir.join("pred");
        if pred.exists() {
            fs::remove_dir_all(&pred).map_err(|e| Error::io(&pred, e))?;
        }
        let clouds = self.workdir.join("clouds");
        let gt = self.workdir.join("gt");
        for d in [&pred, &clouds, &gt] {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let mut request = String::new();
        let mut seen = std::collections::HashSet::new();
        for f in frames {
            if f.id.is_empty() || f.id.contains(char::is_whitespace) || f.id.contains('/') {
                return Err(Error::Detector {
                    frame_id: f.id.clone(),
                    msg: "frame id is not usable as a file name".into(),
                });
            }
            if !seen.insert(f.id.as_str()) {
                return Err(Error::Detector {
                    frame_id: f.id.clone(),
                    msg: "duplicate frame id within one request".into(),
                });
            }
            let cloud = clouds.join(format!("{}.bin", f.id));
            write_cloud(&f.cloud, &cloud)?;
            request.push_str(&format!("{} {}\n", f.id, cloud.display()));
            if self.expose_ground_truth {
                let identity = Calibration::identity();
                let text: String = f
                    .annotations
                    .iter()
                    .map(|a| format_label(a, &identity, None) + "\n")
                    .collect();
                let p = gt.join(format!("{}.txt", f.id));
                fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            }
        }
        let path = self.workdir.join("request.txt");
        fs::write(&path, request).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn run(&self, request: &Path, batch_label: &str) -> Result<()> {
        let subst = |a: &String| {
            a.replace("{request}", &request.to_string_lossy())
                .replace("{workdir}", &self.workdir.to_string_lossy())
        };
        let log_path = self.workdir.join("detector.log");
        let log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let log_err = log.try_clone().map_err(|e| Error::io(&log_path, e))?;
        let mut child = Command::new(&self.command[0])
            .args(self.command[1..].iter().map(subst))
            .current_dir(&self.workdir)
            .env(REQUEST_ENV, request)
            .env(WORKDIR_ENV, &self.workdir)
            .stdin(Stdio::null())
            .stdout(log)
            .stderr(log_err)
            .spawn()
            .map_err(|e| Error::Detector {
                frame_id: batch_label.into(),
                msg: format!("cannot start '{}': {e}", self.command[0]),
            })?;
        let start = Instant::now();
        loop {
            match child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => {
                    let tail = fs::read_to_string(&log_path).unwrap_or_default();
                    let tail = tail.lines().last().unwrap_or("").to_string();
                    return Err(Error::Detector {
                        frame_id: batch_label.into(),
                        msg: format!("command exited with {status}: {tail}"),
                    });
                }
                Ok(None) => {}
                Err(e) => {
                    return Err(Error::Detector {
                        frame_id: batch_label.into(),
                        msg: format!("wait failed: {e}"),
                    })
                }
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Timeout {
                    seconds: self.timeout.as_secs_f64(),
                });
            }
            std::thread::sleep(Duration::from_micros(500));
        }
    }

    fn read_predictions(&self, frame_id: &str) -> Result<Vec<Detection>> {
        let path = self.workdir.join("pred").join(format!("{frame_id}.txt"));
        let text = fs::read_to_string(&path).map_err(|e| Error::Detector {
            frame_id: frame_id.into(),
            msg: format!("missing prediction file {}: {e}", path.display()),
        })?;
        let bad = |msg: String| Error::Detector {
            frame_id: frame_id.into(),
            msg,
        };
        let records = parse_labels(&text, &Calibration::identity(), &path).map_err(|e| bad(e.to_string()))?;
        let mut dets = records
            .into_iter()
            .map(|r| {
                let score = r
                    .score
                    .ok_or_else(|| bad(format!("line {} has no score field", r.annotation.source_index + 1)))?;
                Detection::new(r.annotation.bbox, score, r.annotation.class).map_err(|e| bad(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        sort_by_score(&mut dets);
        Ok(dets)
    }
}

impl Detector for ExternalDetector {
    fn name(&self) -> String {
        format!("external:{}", self.command.join(" "))
    }

    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>> {
        Ok(self.detect_batch(std::slice::from_ref(frame))?.remove(0))
    }

    fn detect_batch(&self, frames: &[Frame]) -> Result<Vec<Vec<Detection>>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let _guard = self.busy.lock().unwrap_or_else(|p| p.into_inner());
        let request = self.prepare(frames)?;
        let label = if frames.len() == 1 {
            frames[0].id.clone()
        } else {
            format!("{}..{}", frames[0].id, frames[frames.len() - 1].id)
        };
        self.run(&request, &label)?;
        frames.iter().map(|f| self.read_predictions(&f.id)).collect()
    }
}
