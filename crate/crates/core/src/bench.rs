//! Single-image throughput and latency measurement.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::event_frames::EventFrame;
use crate::models::{frame_tensor, ParameterSet, Plan};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Something that can run one inference pass.
pub trait BenchTarget {
    fn kind(&self) -> String;
    fn width_mult(&self) -> f64;
    /// One pass; `Ok(false)` means the output was not finite.
    fn run_once(&mut self) -> Result<bool>;
}

/// Forward pass of a model on a fixed single-image input. Autoencoders
/// reconstruct; classifiers run encoder and head.
pub struct ModelTarget<'a, T: Scalar> {
    params: &'a ParameterSet<T>,
    plan: Plan,
    input: Tensor<T>,
}

impl<'a, T: Scalar> ModelTarget<'a, T> {
    pub fn new(params: &'a ParameterSet<T>, frame: &EventFrame) -> Result<Self> {
        let plan = Plan::for_params(params)?;
        let input = frame_tensor(frame, params.config().input_size);
        Ok(ModelTarget { params, plan, input })
    }
}

impl<T: Scalar> BenchTarget for ModelTarget<'_, T> {
    fn kind(&self) -> String {
        self.params.kind().as_str().to_string()
    }

    fn width_mult(&self) -> f64 {
        self.params.config().width_mult
    }

    fn run_once(&mut self) -> Result<bool> {
        let out = self.plan.forward(self.params, self.input.clone(), self.plan.all(), false)?.0;
        Ok(out.all_finite())
    }
}

/// Sleeps for a fixed time per pass; used to validate the harness itself.
pub struct SleepTarget(pub Duration);

impl BenchTarget for SleepTarget {
    fn kind(&self) -> String {
        "sleep".into()
    }
    fn width_mult(&self) -> f64 {
        1.0
    }
    fn run_once(&mut self) -> Result<bool> {
        std::thread::sleep(self.0);
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub warmup: usize,
    pub iters: usize,
    /// Independent measured runs; the one with the median fps is reported.
    pub repeats: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { warmup: 20, iters: 200, repeats: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub kind: String,
    pub width_mult: f64,
    pub fps: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub warmup: usize,
    pub iters: usize,
    pub host: String,
    pub latencies_ms: Vec<f64>,
}

impl BenchReport {
    fn from_latencies(kind: String, width_mult: f64, warmup: usize, latencies_ms: Vec<f64>) -> Self {
        let iters = latencies_ms.len();
        let total: f64 = latencies_ms.iter().sum();
        let mut sorted = latencies_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if iters % 2 == 1 {
            sorted[iters / 2]
        } else {
            (sorted[iters / 2 - 1] + sorted[iters / 2]) / 2.0
        };
        // Nearest-rank percentile.
        let p95 = sorted[((0.95 * iters as f64).ceil() as usize).clamp(1, iters) - 1];
        BenchReport {
            kind,
            width_mult,
            fps: iters as f64 / (total / 1000.0),
            mean_ms: total / iters as f64,
            median_ms: median,
            p95_ms: p95,
            warmup,
            iters,
            host: host_descriptor(),
            latencies_ms,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "kind={} width={} fps={:.2} mean_ms={:.3} median_ms={:.3} p95_ms={:.3} warmup={} iters={} host={}",
            self.kind, self.width_mult, self.fps, self.mean_ms, self.median_ms, self.p95_ms, self.warmup, self.iters, self.host
        )
    }

    pub fn latency_csv(&self) -> String {
        let mut out = String::from("iteration,latency_ms\n");
        for (i, l) in self.latencies_ms.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

/// `os-arch-Ncpu-hostname`.
pub fn host_descriptor() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let name = std::fs::read_to_string("/etc/hostname")
        .ok()
        .or_else(|| std::env::var("HOSTNAME").ok())
        .or_else(|| std::env::var("COMPUTERNAME").ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into());
    format!("{}-{}-{cpus}cpu-{name}", std::env::consts::OS, std::env::consts::ARCH)
}

fn measure<B: BenchTarget + ?Sized>(target: &mut B, opts: &BenchOptions) -> Result<BenchReport> {
    for i in 0..opts.warmup {
        if !target.run_once()? {
            return Err(Error::NonFiniteOutput(i));
        }
    }
    let mut lat = Vec::with_capacity(opts.iters);
    for i in 0..opts.iters {
        let t = Instant::now();
        let ok = target.run_once()?;
        lat.push(t.elapsed().as_secs_f64() * 1000.0);
        if !ok {
            return Err(Error::NonFiniteOutput(opts.warmup + i));
        }
    }
    Ok(BenchReport::from_latencies(target.kind(), target.width_mult(), opts.warmup, lat))
}

pub fn run_bench<B: BenchTarget + ?Sized>(target: &mut B, opts: &BenchOptions) -> Result<BenchReport> {
    if opts.iters < 10 {
        return Err(Error::InvalidArgument(format!("iters must be at least 10, got {}", opts.iters)));
    }
    let mut runs = (0..opts.repeats.max(1)).map(|_| measure(target, opts)).collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.fps.total_cmp(&b.fps));
    let mid = runs.len() / 2;
    Ok(runs.swap_remove(mid))
}

pub fn bench_model<T: Scalar>(params: &ParameterSet<T>, frame: &EventFrame, opts: &BenchOptions) -> Result<BenchReport> {
    run_bench(&mut ModelTarget::new(params, frame)?, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// fps of the first report over fps of the second.
    pub speedup: f64,
    pub host_a: String,
    pub host_b: String,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "speedup={:.3} host_a={} host_b={}", self.speedup, self.host_a, self.host_b)
    }
}

pub fn compare(a: &BenchReport, b: &BenchReport, allow_cross_host: bool) -> Result<Comparison> {
    if a.host != b.host && !allow_cross_host {
        return Err(Error::InvalidArgument(format!(
            "reports come from different hosts ({} vs {})",
            a.host, b.host
        )));
    }
    Ok(Comparison { speedup: a.fps / b.fps, host_a: a.host.clone(), host_b: b.host.clone() })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_frames::{EventMode, Threshold};
    use crate::models::{build_autoencoder, build_classifier, ModelConfig};

    #[test]
    fn known_delay_stub() {
        let opts = BenchOptions { warmup: 2, iters: 30, repeats: 1 };
        let r10 = run_bench(&mut SleepTarget(Duration::from_millis(10)), &opts).unwrap();
        assert!((90.0..=110.0).contains(&r10.fps), "{}", r10.line());
        let r20 = run_bench(&mut SleepTarget(Duration::from_millis(20)), &opts).unwrap();
        let c = compare(&r10, &r20, false).unwrap();
        assert!((1.8..=2.2).contains(&c.speedup), "{c}");
        assert_eq!(compare(&r10, &r10, false).unwrap().speedup, 1.0);
    }

    #[test]
    fn fps_matches_latencies() {
        let opts = BenchOptions { warmup: 0, iters: 10, repeats: 3 };
        let r = run_bench(&mut SleepTarget(Duration::from_millis(1)), &opts).unwrap();
        let total: f64 = r.latencies_ms.iter().sum();
        assert!((r.iters as f64 / (total / 1000.0) / r.fps - 1.0).abs() < 0.01);
        assert!(r.latencies_ms.iter().all(|&l| l > 0.0));
        assert!(r.median_ms <= r.p95_ms);
        assert_eq!(r.latency_csv().lines().count(), 11);
        assert!(r.line().starts_with("kind=sleep width=1 fps="));
    }

    #[test]
    fn option_and_host_checks() {
        let opts = BenchOptions { warmup: 0, iters: 9, repeats: 1 };
        assert!(run_bench(&mut SleepTarget(Duration::ZERO), &opts).is_err());
        let r = run_bench(&mut SleepTarget(Duration::ZERO), &BenchOptions { iters: 10, ..opts }).unwrap();
        let mut other = r.clone();
        other.host = "elsewhere".into();
        assert!(compare(&r, &other, false).is_err());
        assert!(compare(&r, &other, true).is_ok());
    }

    #[test]
    fn minimal_model_runs() {
        let cfg = ModelConfig { input_size: 16, base_channels: vec![2, 2, 2], fc_hidden: 4, ..ModelConfig::default() };
        let ae = build_autoencoder::<f32>(&cfg).unwrap();
        let clf = build_classifier(&ae, &cfg).unwrap();
        let frame = EventFrame::new(16, 16, vec![true; 256], Threshold::new(8).unwrap(), EventMode::Successive).unwrap();
        let opts = BenchOptions { warmup: 1, iters: 10, repeats: 1 };
        for (p, kind) in [(&ae, "autoencoder"), (&clf, "classifier")] {
            let r = bench_model(p, &frame, &opts).unwrap();
            assert_eq!(r.kind, kind);
            assert_eq!(r.iters, 10);
            assert!(r.fps > 0.0);
        }
        let mut broken = ae.clone();
        broken.params_mut().last_mut().unwrap().value.data_mut()[0] = f32::NAN;
        assert!(matches!(bench_model(&broken, &frame, &opts), Err(Error::NonFiniteOutput(0))));
    }
}
