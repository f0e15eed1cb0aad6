//! Per-class training jobs on a local worker pool, and replicated weight
//! persistence.
//!
//! Jobs are independent: each owns its task data and produces one result, so
//! the models coming out of [`run_pool`] do not depend on the number of
//! workers or on the allocation policy.
//!
//! Weight files are text:
//!
//! ```text
//! OCONW1 <class_id>
//! <layer sizes>
//! <layer 0 weights, row-major>
//! <layer 0 biases>
//! ...
//! CRC32 <8 hex digits over every preceding byte>
//! ```
//!
//! ACON files use the header `ACONW1 <k>` followed by a line of class ids.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::classifiers::{AconModel, ClassModel};
use crate::mlp::{self, Example, Layer, Topology, TrainingConfig, Weights};
use crate::textfmt::{push_decimals, Tokens};
use crate::{ClassId, Error, Result};

#[derive(Clone, Debug)]
pub struct TrainingJob {
    pub class_id: ClassId,
    pub task: Vec<Example>,
    pub topology: Topology,
    pub config: TrainingConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Allocation {
    /// Job `i` goes to worker `i mod W`.
    #[default]
    RoundRobin,
    /// Biggest task first, each to the currently least-loaded worker.
    LargestFirst,
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allocation::RoundRobin => "round_robin",
            Allocation::LargestFirst => "largest_first",
        })
    }
}

impl FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round_robin" | "round-robin" => Ok(Allocation::RoundRobin),
            "largest_first" | "largest-first" => Ok(Allocation::LargestFirst),
            other => Err(Error::InvalidConfig(format!("unknown allocation policy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolConfig {
    pub workers: usize,
    pub allocation: Allocation,
}

impl PoolConfig {
    pub fn new(workers: usize, allocation: Allocation) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("worker count must be >= 1".into()));
        }
        Ok(PoolConfig {
            workers,
            allocation,
        })
    }

    pub fn sequential() -> Self {
        PoolConfig {
            workers: 1,
            allocation: Allocation::RoundRobin,
        }
    }
}

/// Job indices per worker, in execution order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub per_worker: Vec<Vec<usize>>,
}

impl Assignment {
    /// Summed job sizes per worker.
    pub fn loads(&self, sizes: &[usize]) -> Vec<usize> {
        self.per_worker
            .iter()
            .map(|jobs| jobs.iter().map(|&j| sizes[j]).sum())
            .collect()
    }
}

/// Distributes jobs of the given sizes over `workers` workers.
pub fn allocate_sizes(sizes: &[usize], workers: usize, policy: Allocation) -> Assignment {
    let workers = workers.max(1);
    let mut per_worker = vec![Vec::new(); workers];
    match policy {
        Allocation::RoundRobin => {
            for j in 0..sizes.len() {
                per_worker[j % workers].push(j);
            }
        }
        Allocation::LargestFirst => {
            let mut order: Vec<usize> = (0..sizes.len()).collect();
            order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
            let mut load = vec![0usize; workers];
            for j in order {
                let target = (0..workers)
                    .min_by_key(|&w| (load[w], w))
                    .expect("at least one worker");
                load[target] += sizes[j];
                per_worker[target].push(j);
            }
        }
    }
    Assignment { per_worker }
}

/// Allocates jobs by task size.
pub fn allocate(jobs: &[TrainingJob], pool: &PoolConfig) -> Assignment {
    let sizes: Vec<usize> = jobs.iter().map(|j| j.task.len()).collect();
    allocate_sizes(&sizes, pool.workers, pool.allocation)
}

/// Outcome of one job.
#[derive(Debug)]
pub struct JobResult {
    pub class_id: ClassId,
    pub worker: usize,
    pub result: Result<ClassModel>,
    /// From pool start until the job started.
    pub queue_wait: Duration,
    /// From the worker becoming free until the job started.
    pub dispatch: Duration,
    pub compute: Duration,
}

#[derive(Debug)]
pub struct PoolOutcome {
    /// Sorted by class id.
    pub results: Vec<JobResult>,
    pub wall_time: Duration,
}

impl PoolOutcome {
    pub fn models(&self) -> impl Iterator<Item = &ClassModel> {
        self.results.iter().filter_map(|r| r.result.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (ClassId, &Error)> {
        self.results
            .iter()
            .filter_map(|r| r.result.as_ref().err().map(|e| (r.class_id, e)))
    }

    /// Total dispatch time over total compute time.
    pub fn overhead_ratio(&self) -> f64 {
        let dispatch: f64 = self.results.iter().map(|r| r.dispatch.as_secs_f64()).sum();
        let compute: f64 = self.results.iter().map(|r| r.compute.as_secs_f64()).sum();
        if compute > 0.0 {
            dispatch / compute
        } else {
            0.0
        }
    }
}

fn run_job(job: &TrainingJob) -> Result<ClassModel> {
    let (weights, trace) = mlp::train(&job.topology, &job.task, &job.config)?;
    ClassModel::new(job.class_id, weights, Some(trace))
}

/// Trains every job, each worker running its allocated jobs in order on its
/// own thread. A failing job is reported in its slot; the others still run.
pub fn run_pool(jobs: Vec<TrainingJob>, pool: &PoolConfig) -> Result<PoolOutcome> {
    if pool.workers == 0 {
        return Err(Error::InvalidConfig("worker count must be >= 1".into()));
    }
    if jobs.is_empty() {
        return Err(Error::InvalidConfig("no training jobs".into()));
    }
    let mut seen = HashSet::new();
    for job in &jobs {
        if !seen.insert(job.class_id) {
            return Err(Error::InvalidConfig(format!("duplicate job for class {}", job.class_id)));
        }
        if job.task.is_empty() {
            return Err(Error::InvalidConfig(format!("empty task for class {}", job.class_id)));
        }
        if job.topology.output_size() != 1 {
            return Err(Error::dims(1, job.topology.output_size()));
        }
    }

    let assignment = allocate(&jobs, pool);
    let started = Instant::now();
    let mut results: Vec<JobResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = assignment
            .per_worker
            .iter()
            .enumerate()
            .filter(|(_, list)| !list.is_empty())
            .map(|(worker, list)| {
                let jobs = &jobs;
                scope.spawn(move || {
                    let mut free_since = started;
                    let mut out = Vec::with_capacity(list.len());
                    for &j in list {
                        let job = &jobs[j];
                        let begin = Instant::now();
                        let result = run_job(job);
                        let end = Instant::now();
                        out.push(JobResult {
                            class_id: job.class_id,
                            worker,
                            result,
                            queue_wait: begin - started,
                            dispatch: begin - free_since,
                            compute: end - begin,
                        });
                        free_since = end;
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("training worker panicked"))
            .collect()
    });
    results.sort_by_key(|r| r.class_id);
    Ok(PoolOutcome {
        results,
        wall_time: started.elapsed(),
    })
}

/// Ordered replica directories. Reads try them in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightStore {
    roots: Vec<PathBuf>,
}

/// Replicas written by [`persist`] and the roots that failed.
#[derive(Debug)]
pub struct PersistReport {
    pub written: Vec<PathBuf>,
    pub failures: Vec<Error>,
}

impl WeightStore {
    pub fn new<P: Into<PathBuf>>(roots: impl IntoIterator<Item = P>) -> Result<Self> {
        let roots: Vec<PathBuf> = roots.into_iter().map(Into::into).collect();
        if roots.is_empty() {
            return Err(Error::InvalidConfig("a weight store needs at least one root".into()));
        }
        Ok(WeightStore { roots })
    }

    pub fn roots(&self) -> &[PathBuf] {
        &self.roots
    }

    fn write_replicas(&self, file_name: &str, contents: &[u8]) -> Result<PersistReport> {
        let mut written = Vec::new();
        let mut failures = Vec::new();
        for root in &self.roots {
            match write_atomic(root, file_name, contents) {
                Ok(path) => written.push(path),
                Err(message) => failures.push(Error::Store {
                    root: root.clone(),
                    message,
                }),
            }
        }
        if written.is_empty() {
            return Err(failures.into_iter().next().expect("at least one root"));
        }
        Ok(PersistReport { written, failures })
    }

    fn read_first_valid<T>(
        &self,
        file_name: &str,
        decode: impl Fn(&[u8], &Path) -> Result<T>,
    ) -> (Option<T>, Vec<Error>) {
        let mut skipped = Vec::new();
        for root in &self.roots {
            let path = root.join(file_name);
            let attempt = std::fs::read(&path)
                .map_err(|e| Error::file(&path, e))
                .and_then(|bytes| decode(&bytes, &path));
            match attempt {
                Ok(v) => return (Some(v), skipped),
                Err(e) => skipped.push(e),
            }
        }
        (None, skipped)
    }
}

fn write_atomic(root: &Path, file_name: &str, contents: &[u8]) -> std::result::Result<PathBuf, String> {
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let path = root.join(file_name);
    let tmp = root.join(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| e.to_string())?;
    std::fs::rename(&tmp, &path).map_err(|e| e.to_string())?;
    Ok(path)
}

pub fn class_file_name(class_id: ClassId) -> String {
    format!("class_{class_id}.wts")
}

pub const ACON_FILE_NAME: &str = "acon.wts";

fn push_layers(out: &mut String, weights: &Weights) {
    let sizes: Vec<String> = weights
        .topology()
        .layer_sizes()
        .iter()
        .map(ToString::to_string)
        .collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    for layer in weights.layers() {
        push_decimals(out, &layer.w);
        push_decimals(out, &layer.b);
    }
}

fn seal(mut body: String) -> Vec<u8> {
    let crc = crc32fast::hash(body.as_bytes());
    body.push_str(&format!("CRC32 {crc:08x}\n"));
    body.into_bytes()
}

pub fn encode_class_model(model: &ClassModel) -> Vec<u8> {
    let mut body = format!("OCONW1 {}\n", model.class_id);
    push_layers(&mut body, &model.weights);
    seal(body)
}

pub fn encode_acon_model(model: &AconModel) -> Vec<u8> {
    let mut body = format!("ACONW1 {}\n", model.class_ids.len());
    let ids: Vec<String> = model.class_ids.iter().map(ToString::to_string).collect();
    body.push_str(&ids.join(" "));
    body.push('\n');
    push_layers(&mut body, &model.weights);
    seal(body)
}

/// Verifies the CRC trailer and returns the checked body as text.
fn unseal<'a>(bytes: &'a [u8], path: &Path) -> Result<&'a str> {
    const TAG: &[u8] = b"\nCRC32 ";
    let at = bytes
        .windows(TAG.len())
        .rposition(|w| w == TAG)
        .ok_or_else(|| Error::malformed(path, "missing CRC32 trailer"))?;
    let (body, trailer) = bytes.split_at(at + 1);
    let stored = std::str::from_utf8(&trailer[TAG.len() - 1..])
        .ok()
        .map(str::trim)
        .filter(|h| h.len() == 8)
        .and_then(|h| u32::from_str_radix(h, 16).ok());
    match stored {
        Some(crc) if crc == crc32fast::hash(body) => {}
        _ => return Err(Error::ChecksumMismatch { path: path.to_path_buf() }),
    }
    std::str::from_utf8(body).map_err(|_| Error::malformed(path, "payload is not UTF-8"))
}

fn parse_layers(sizes_line: &str, rest: &str, path: &Path) -> Result<Weights> {
    let bad = |m: String| Error::malformed(path, m);
    let sizes = sizes_line
        .split_ascii_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad layer size {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let topology = Topology::new(sizes).map_err(|e| bad(e.to_string()))?;
    let mut toks = Tokens::new(rest);
    let layers = topology
        .layer_sizes()
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w = toks.read_f64s(fan_in * fan_out).map_err(bad)?;
            let b = toks.read_f64s(fan_out).map_err(bad)?;
            Ok(Layer { fan_in, fan_out, w, b })
        })
        .collect::<Result<Vec<_>>>()?;
    if !toks.is_exhausted() {
        return Err(bad("trailing data after last layer".into()));
    }
    Weights::from_layers(layers).map_err(|e| bad(e.to_string()))
}

fn split_line(text: &str) -> (&str, &str) {
    text.split_once('\n').unwrap_or((text, ""))
}

pub fn decode_class_model(bytes: &[u8], path: &Path) -> Result<ClassModel> {
    let body = unseal(bytes, path)?;
    let bad = |m: &str| Error::malformed(path, m);
    let (header, rest) = split_line(body);
    let class_id = header
        .strip_prefix("OCONW1 ")
        .and_then(|id| id.trim().parse::<ClassId>().ok())
        .ok_or_else(|| bad("expected OCONW1 header"))?;
    let (sizes, rest) = split_line(rest);
    let weights = parse_layers(sizes, rest, path)?;
    ClassModel::new(class_id, weights, None).map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn decode_acon_model(bytes: &[u8], path: &Path) -> Result<AconModel> {
    let body = unseal(bytes, path)?;
    let bad = |m: &str| Error::malformed(path, m);
    let (header, rest) = split_line(body);
    let k = header
        .strip_prefix("ACONW1 ")
        .and_then(|k| k.trim().parse::<usize>().ok())
        .ok_or_else(|| bad("expected ACONW1 header"))?;
    let (ids, rest) = split_line(rest);
    let class_ids = ids
        .split_ascii_whitespace()
        .map(|t| t.parse::<ClassId>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| bad("bad class id list"))?;
    if class_ids.len() != k {
        return Err(bad("class id count does not match header"));
    }
    let (sizes, rest) = split_line(rest);
    let weights = parse_layers(sizes, rest, path)?;
    AconModel::new(class_ids, weights, None).map_err(|e| Error::malformed(path, e.to_string()))
}

/// Writes `class_<id>.wts` to every root. Succeeds when at least one replica
/// was written; failing roots are listed in the report.
pub fn persist(model: &ClassModel, store: &WeightStore) -> Result<PersistReport> {
    store.write_replicas(&class_file_name(model.class_id), &encode_class_model(model))
}

pub fn persist_acon(model: &AconModel, store: &WeightStore) -> Result<PersistReport> {
    store.write_replicas(ACON_FILE_NAME, &encode_acon_model(model))
}

/// Loads the first replica whose checksum validates, also returning the
/// errors of replicas skipped on the way.
pub fn load_with_report(class_id: ClassId, store: &WeightStore) -> Result<(ClassModel, Vec<Error>)> {
    let (found, skipped) = store.read_first_valid(&class_file_name(class_id), |bytes, path| {
        let model = decode_class_model(bytes, path)?;
        if model.class_id != class_id {
            return Err(Error::malformed(path, format!("file holds class {}", model.class_id)));
        }
        Ok(model)
    });
    match found {
        Some(model) => Ok((model, skipped)),
        None => Err(Error::WeightsUnavailable(class_id)),
    }
}

pub fn load(class_id: ClassId, store: &WeightStore) -> Result<ClassModel> {
    load_with_report(class_id, store).map(|(m, _)| m)
}

pub fn load_acon(store: &WeightStore) -> Result<AconModel> {
    let (found, skipped) = store.read_first_valid(ACON_FILE_NAME, decode_acon_model);
    found.ok_or_else(|| {
        skipped.into_iter().next().unwrap_or_else(|| Error::InvalidConfig("empty store".into()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::init_weights;

    #[test]
    fn round_robin_loads() {
        let a = allocate_sizes(&[1; 10], 10, Allocation::RoundRobin);
        assert!(a.per_worker.iter().all(|w| w.len() == 1));
        let a = allocate_sizes(&[1; 10], 4, Allocation::RoundRobin);
        assert_eq!(a.loads(&[1; 10]), vec![3, 3, 2, 2]);
        assert_eq!(a.per_worker[1], vec![1, 5, 9]);
    }

    #[test]
    fn largest_first_balances() {
        let sizes = [9, 5, 5, 1];
        let a = allocate_sizes(&sizes, 2, Allocation::LargestFirst);
        assert_eq!(a.per_worker, vec![vec![0, 3], vec![1, 2]]);
        assert_eq!(a.loads(&sizes), vec![10, 10]);
    }

    #[test]
    fn more_workers_than_jobs() {
        let a = allocate_sizes(&[3, 2], 4, Allocation::RoundRobin);
        assert_eq!(a.per_worker, vec![vec![0], vec![1], vec![], vec![]]);
    }

    #[test]
    fn allocation_policy_parsing() {
        assert_eq!("largest_first".parse::<Allocation>().unwrap(), Allocation::LargestFirst);
        assert_eq!("round-robin".parse::<Allocation>().unwrap(), Allocation::RoundRobin);
        assert!("random".parse::<Allocation>().is_err());
        assert!(PoolConfig::new(0, Allocation::RoundRobin).is_err());
    }

    fn model(class_id: ClassId, seed: u64) -> ClassModel {
        let t = Topology::new(vec![4, 3, 1]).unwrap();
        ClassModel::new(class_id, init_weights(&t, seed), None).unwrap()
    }

    #[test]
    fn file_layout() {
        let text = String::from_utf8(encode_class_model(&model(3, 1))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "OCONW1 3");
        assert_eq!(lines[1], "4 3 1");
        assert_eq!(lines[2].split(' ').count(), 12);
        assert_eq!(lines[3], "0.0000000000000000e0 0.0000000000000000e0 0.0000000000000000e0");
        assert_eq!(lines.len(), 7);
        let crc_line = lines[6];
        assert!(crc_line.starts_with("CRC32 ") && crc_line.len() == 14);
        let body_len = text.len() - crc_line.len() - 1;
        assert_eq!(
            format!("CRC32 {:08x}", crc32fast::hash(&text.as_bytes()[..body_len])),
            crc_line
        );
    }

    #[test]
    fn decode_detects_tampering() {
        let mut bytes = encode_class_model(&model(2, 5));
        let p = Path::new("x.wts");
        assert_eq!(decode_class_model(&bytes, p).unwrap(), model(2, 5));
        let idx = bytes.iter().position(|&b| b == b'e').unwrap() - 1;
        bytes[idx] = if bytes[idx] == b'1' { b'2' } else { b'1' };
        assert!(matches!(decode_class_model(&bytes, p), Err(Error::ChecksumMismatch { .. })));
        assert!(matches!(decode_class_model(b"OCONW1 2\n", p), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn acon_file_round_trip() {
        let t = Topology::new(vec![5, 4, 3]).unwrap();
        let m = AconModel::new(vec![2, 4, 8], init_weights(&t, 3), None).unwrap();
        let bytes = encode_acon_model(&m);
        assert!(bytes.starts_with(b"ACONW1 3\n2 4 8\n5 4 3\n"));
        assert_eq!(decode_acon_model(&bytes, Path::new("a")).unwrap(), m);
    }

    #[test]
    fn store_needs_a_root() {
        assert!(WeightStore::new(Vec::<PathBuf>::new()).is_err());
    }
}
