use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sim::{SensorSample, StreamKind};

/// Globally time-ordered sensor events. Equal timestamps follow the fixed
/// kind priority IMU, baro, mag, GPS, camera.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorTimeline {
    events: Vec<SensorSample>,
}

impl SensorTimeline {
    /// Splits `samples` by stream kind and merges them; fails if any single
    /// stream is out of order.
    pub fn from_samples(samples: Vec<SensorSample>) -> Result<Self> {
        let mut streams: Vec<Vec<SensorSample>> = vec![Vec::new(); StreamKind::ALL.len()];
        for s in samples {
            streams[s.stream() as usize].push(s);
        }
        merge_streams(streams)
    }

    pub fn events(&self) -> &[SensorSample] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<SensorSample> {
        self.events
    }

    /// Copy with every event of `kind` removed.
    pub fn without(&self, kind: StreamKind) -> Self {
        Self {
            events: self
                .events
                .iter()
                .filter(|s| s.stream() != kind)
                .cloned()
                .collect(),
        }
    }
}

/// Total order used by the merge: time, then kind priority.
fn event_order(a: &SensorSample, b: &SensorSample) -> Ordering {
    a.t().total_cmp(&b.t()).then(a.stream().cmp(&b.stream()))
}

struct Head {
    sample: SensorSample,
    stream: usize,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head {}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Head {
    // reversed for a min-heap; input index breaks remaining ties so the
    // merge is stable
    fn cmp(&self, other: &Self) -> Ordering {
        event_order(&other.sample, &self.sample).then(other.stream.cmp(&self.stream))
    }
}

fn stream_label(stream: &[SensorSample], index: usize) -> String {
    match stream.first() {
        Some(s) => format!("stream {index} ({})", s.stream()),
        None => format!("stream {index}"),
    }
}

/// K-way merge of individually time-ordered streams.
pub fn merge_streams(streams: Vec<Vec<SensorSample>>) -> Result<SensorTimeline> {
    for (i, s) in streams.iter().enumerate() {
        if let Some(bad) = s.iter().position(|x| !x.t().is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: sample {bad} has a non-finite timestamp",
                stream_label(s, i)
            )));
        }
        if let Some(k) = s.windows(2).position(|w| w[1].t() < w[0].t()) {
            return Err(Error::InvalidInput(format!(
                "{}: sample {} at t = {} precedes sample {} at t = {}",
                stream_label(s, i),
                k + 1,
                s[k + 1].t(),
                k,
                s[k].t()
            )));
        }
    }
    let total = streams.iter().map(Vec::len).sum();
    let mut iters: Vec<_> = streams.into_iter().map(Vec::into_iter).collect();
    let mut heap = BinaryHeap::with_capacity(iters.len());
    for (stream, it) in iters.iter_mut().enumerate() {
        if let Some(sample) = it.next() {
            heap.push(Head { sample, stream });
        }
    }
    let mut events = Vec::with_capacity(total);
    while let Some(Head { sample, stream }) = heap.pop() {
        events.push(sample);
        if let Some(next) = iters[stream].next() {
            heap.push(Head {
                sample: next,
                stream,
            });
        }
    }
    Ok(SensorTimeline { events })
}
