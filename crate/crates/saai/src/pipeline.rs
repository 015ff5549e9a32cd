//! Three-stage streaming pipeline: frame selection, per-frame detection,
//! sliding-window integration. Stages run on their own threads joined by
//! bounded queues; a full queue blocks its producer, so no frame is ever
//! dropped.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use saai_core::geometry::CameraIntrinsics;
use saai_core::rx::percentile;
use saai_core::window::{detect_frame, DetectedFrame, FrameSelector, SlidingWindow, VisualParams, WindowOutput};
use saai_core::Frame;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    /// One thread per stage.
    #[default]
    Parallel,
    /// All stages in sequence on the calling thread.
    Serial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Minimum horizontal flight distance between selected frames, meters.
    pub sampling_distance: f64,
    /// Frames per integral.
    pub window_size: usize,
    pub params: VisualParams,
    /// Capacity of each of the two queues.
    pub queue_capacity: usize,
    pub execution: Execution,
    /// Source rate in frames per second; `None` pulls frames as fast as the
    /// pipeline accepts them.
    pub cadence_hz: Option<f64>,
}

impl PipelineConfig {
    pub fn new(params: VisualParams) -> Self {
        PipelineConfig {
            sampling_distance: 0.5,
            window_size: 30,
            params,
            queue_capacity: 8,
            execution: Execution::Parallel,
            cadence_hz: None,
        }
    }

    /// Synthetic aperture size covered by a full window.
    pub fn aperture(&self) -> f64 {
        self.sampling_distance * self.window_size as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        FrameSelector::new(self.sampling_distance)?;
        if self.window_size == 0 {
            return Err(Error::Invalid("window_size must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::Invalid("queue_capacity must be at least 1".into()));
        }
        if let Some(hz) = self.cadence_hz {
            if !(hz > 0.0 && hz.is_finite()) {
                return Err(Error::Invalid("cadence_hz must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    version: u64,
    params: VisualParams,
    window_size: usize,
}

/// Single-writer parameter mailbox; the integration stage picks up the
/// latest posting between two outputs.
#[derive(Debug, Clone)]
pub struct ParamMailbox {
    slot: Arc<Mutex<Slot>>,
}

impl ParamMailbox {
    pub fn new(params: VisualParams, window_size: usize) -> Self {
        ParamMailbox {
            slot: Arc::new(Mutex::new(Slot {
                version: 0,
                params,
                window_size,
            })),
        }
    }

    pub fn post(&self, params: VisualParams, window_size: usize) {
        let mut s = self.slot.lock().expect("mailbox lock");
        s.version += 1;
        s.params = params;
        s.window_size = window_size;
    }

    pub fn current(&self) -> (VisualParams, usize) {
        let s = self.slot.lock().expect("mailbox lock");
        (s.params, s.window_size)
    }

    fn newer_than(&self, seen: u64) -> Option<Slot> {
        let s = *self.slot.lock().expect("mailbox lock");
        (s.version > seen).then_some(s)
    }
}

/// Output of the integration stage for one selected frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Index of the frame that triggered this output.
    pub frame_index: u64,
    pub window: WindowOutput,
    /// From the source starting to deliver the frame to this output.
    pub latency: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySummary {
    pub samples: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn of(samples_ms: &[f64]) -> Self {
        if samples_ms.is_empty() {
            return LatencySummary::default();
        }
        let mut v = samples_ms.to_vec();
        LatencySummary {
            samples: v.len(),
            p50_ms: percentile(&mut v, 50.0),
            p95_ms: percentile(&mut v, 95.0),
            mean_ms: samples_ms.iter().sum::<f64>() / samples_ms.len() as f64,
            max_ms: samples_ms.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Run statistics. Serialized with these field names.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineStats {
    pub execution: Execution,
    pub frames_in: usize,
    pub frames_selected: usize,
    /// Always 0: full queues block instead of dropping.
    pub frames_dropped: usize,
    pub outputs: usize,
    pub window_size: usize,
    pub select: LatencySummary,
    pub detect: LatencySummary,
    pub integrate: LatencySummary,
    pub end_to_end: LatencySummary,
    pub wall_ms: f64,
}

struct Selected {
    frame: Frame,
    start: Instant,
}

struct Detected {
    frame: DetectedFrame,
    start: Instant,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Waits for the next frame slot of a fixed-rate source, like a camera.
struct Clock {
    period: Option<Duration>,
    next: Instant,
}

impl Clock {
    fn new(cadence_hz: Option<f64>) -> Self {
        Clock {
            period: cadence_hz.map(|hz| Duration::from_secs_f64(1.0 / hz)),
            next: Instant::now(),
        }
    }

    fn wait(&mut self) {
        let Some(period) = self.period else { return };
        let now = Instant::now();
        if self.next > now {
            thread::sleep(self.next - now);
        }
        self.next = self.next.max(now) + period;
    }
}

struct Integrator<'a, S> {
    window: SlidingWindow,
    mailbox: Option<&'a ParamMailbox>,
    seen: u64,
    sink: S,
    integrate_ms: Vec<f64>,
    end_to_end_ms: Vec<f64>,
}

impl<S: FnMut(&PipelineOutput)> Integrator<'_, S> {
    fn accept(&mut self, d: Detected) -> Result<()> {
        let t = Instant::now();
        if let Some(slot) = self.mailbox.and_then(|m| m.newer_than(self.seen)) {
            self.seen = slot.version;
            self.window.set_capacity(slot.window_size)?;
            self.window.set_params(slot.params)?;
        }
        let index = d.frame.frame.index;
        self.window.push(d.frame)?;
        let window = self.window.render()?;
        self.integrate_ms.push(ms(t.elapsed()));
        let latency = d.start.elapsed();
        self.end_to_end_ms.push(ms(latency));
        (self.sink)(&PipelineOutput {
            frame_index: index,
            window,
            latency,
        });
        Ok(())
    }
}

/// Runs `source` through selection, detection and integration, calling
/// `sink` once per selected frame. Parameter postings to `mailbox` apply
/// retroactively to the whole window.
pub fn run_pipeline<I, S>(
    source: I,
    intrinsics: &CameraIntrinsics,
    config: &PipelineConfig,
    mailbox: Option<&ParamMailbox>,
    sink: S,
) -> Result<PipelineStats>
where
    I: IntoIterator<Item = Result<Frame>>,
    I::IntoIter: Send,
    S: FnMut(&PipelineOutput),
{
    config.validate()?;
    let (params, window_size) = match mailbox {
        Some(m) => m.current(),
        None => (config.params, config.window_size),
    };
    let current = move || mailbox.map_or(params, |m| m.current().0);
    let mut integrator = Integrator {
        window: SlidingWindow::new(*intrinsics, window_size, params)?,
        mailbox,
        seen: 0,
        sink,
        integrate_ms: Vec::new(),
        end_to_end_ms: Vec::new(),
    };
    let wall = Instant::now();
    let (frames_in, select_ms, detect_ms) = match config.execution {
        Execution::Serial => {
            let mut selector = FrameSelector::new(config.sampling_distance)?;
            let (mut n, mut sel, mut det) = (0, Vec::new(), Vec::new());
            let mut it = source.into_iter();
            let mut clock = Clock::new(config.cadence_hz);
            loop {
                clock.wait();
                let start = Instant::now();
                let Some(frame) = it.next() else { break };
                let frame = frame?;
                n += 1;
                let keep = selector.offer(&frame)?;
                sel.push(ms(start.elapsed()));
                if !keep {
                    continue;
                }
                let t = Instant::now();
                let frame = detect_frame(frame, &current())?;
                det.push(ms(t.elapsed()));
                integrator.accept(Detected { frame, start })?;
            }
            (n, sel, det)
        }
        Execution::Parallel => run_parallel(source, config, &current, &mut integrator)?,
    };
    Ok(PipelineStats {
        execution: config.execution,
        frames_in,
        frames_selected: detect_ms.len(),
        frames_dropped: 0,
        outputs: integrator.end_to_end_ms.len(),
        window_size: integrator.window.capacity(),
        select: LatencySummary::of(&select_ms),
        detect: LatencySummary::of(&detect_ms),
        integrate: LatencySummary::of(&integrator.integrate_ms),
        end_to_end: LatencySummary::of(&integrator.end_to_end_ms),
        wall_ms: ms(wall.elapsed()),
    })
}

fn run_parallel<I, S>(
    source: I,
    config: &PipelineConfig,
    current: &(dyn Fn() -> VisualParams + Sync),
    integrator: &mut Integrator<'_, S>,
) -> Result<(usize, Vec<f64>, Vec<f64>)>
where
    I: IntoIterator<Item = Result<Frame>>,
    I::IntoIter: Send,
    S: FnMut(&PipelineOutput),
{
    let (to_detect, selected): (SyncSender<Result<Selected>>, Receiver<Result<Selected>>) =
        sync_channel(config.queue_capacity);
    let (to_integrate, detected): (SyncSender<Result<Detected>>, Receiver<Result<Detected>>) =
        sync_channel(config.queue_capacity);
    let sampling = config.sampling_distance;
    let mut clock = Clock::new(config.cadence_hz);
    let it = source.into_iter();
    thread::scope(|scope| {
        let select = scope.spawn(move || {
            let mut selector = FrameSelector::new(sampling).expect("validated");
            let (mut n, mut times) = (0usize, Vec::new());
            let mut it = it;
            loop {
                clock.wait();
                let start = Instant::now();
                let Some(frame) = it.next() else { break };
                n += 1;
                let msg = frame.and_then(|f| Ok(selector.offer(&f)?.then_some(f)));
                times.push(ms(start.elapsed()));
                let msg = match msg {
                    Ok(None) => continue,
                    Ok(Some(frame)) => Ok(Selected { frame, start }),
                    Err(e) => Err(e),
                };
                let failed = msg.is_err();
                if to_detect.send(msg).is_err() || failed {
                    break;
                }
            }
            (n, times)
        });
        let detect = scope.spawn(move || {
            let mut times = Vec::new();
            for msg in selected {
                let msg = msg.and_then(|s| {
                    let t = Instant::now();
                    let frame = detect_frame(s.frame, &current())?;
                    times.push(ms(t.elapsed()));
                    Ok(Detected { frame, start: s.start })
                });
                let failed = msg.is_err();
                if to_integrate.send(msg).is_err() || failed {
                    break;
                }
            }
            times
        });
        let mut result = Ok(());
        for msg in detected {
            if let Err(e) = msg.and_then(|d| integrator.accept(d)) {
                result = Err(e);
                break;
            }
        }
        let detect_times = detect.join().map_err(|_| Error::StageFailed("detect"));
        let select_out = select.join().map_err(|_| Error::StageFailed("select"));
        result?;
        let (n, select_times) = select_out?;
        Ok((n, select_times, detect_times?))
    })
}
