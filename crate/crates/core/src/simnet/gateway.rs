//! Request gateway: per-model pending queues flushed into batches when they
//! reach capacity or when no new task has arrived for the flush timeout.
//! Time is integer simulation ticks.

use crate::economy::InferenceTask;
use crate::inference::ModelId;
use std::collections::BTreeMap;

#[derive(Debug, Default)]
struct ModelQueue {
    pending: Vec<InferenceTask>,
    last_enqueue: u64,
}

/// A flushed group of tasks for one model, not yet assigned to a worker.
#[derive(Debug, Clone)]
pub struct FlushedBatch {
    pub model_id: ModelId,
    pub tasks: Vec<InferenceTask>,
}

#[derive(Debug)]
pub struct Gateway {
    queues: BTreeMap<ModelId, ModelQueue>,
    capacity: usize,
    timeout_ticks: u64,
    now: u64,
}

impl Gateway {
    pub fn new(capacity: u32, timeout_ticks: u64) -> Self {
        Self {
            queues: BTreeMap::new(),
            capacity: capacity as usize,
            timeout_ticks,
            now: 0,
        }
    }

    pub fn pending_count(&self, model: &ModelId) -> usize {
        self.queues.get(model).map(|q| q.pending.len()).unwrap_or(0)
    }

    /// Advance simulated time, flushing queues that have been idle for the
    /// timeout. Batches come out in model-id order.
    pub fn advance(&mut self, to_tick: u64) -> Vec<FlushedBatch> {
        debug_assert!(to_tick >= self.now);
        self.now = to_tick;
        let mut flushed = Vec::new();
        for (model_id, queue) in self.queues.iter_mut() {
            let timed_out =
                !queue.pending.is_empty() && self.now - queue.last_enqueue >= self.timeout_ticks;
            if timed_out {
                flushed.push(FlushedBatch {
                    model_id: model_id.clone(),
                    tasks: std::mem::take(&mut queue.pending),
                });
            }
        }
        flushed
    }

    /// Enqueue a priced task; returns the flushed batch when the queue
    /// reaches capacity.
    pub fn submit(&mut self, task: InferenceTask) -> Option<FlushedBatch> {
        let model_id = task.model_id.clone();
        let queue = self.queues.entry(model_id.clone()).or_default();
        queue.pending.push(task);
        queue.last_enqueue = self.now;
        if queue.pending.len() >= self.capacity {
            Some(FlushedBatch {
                model_id,
                tasks: std::mem::take(&mut queue.pending),
            })
        } else {
            None
        }
    }

    /// Flush every remaining task regardless of age (end of epoch).
    pub fn flush_all(&mut self) -> Vec<FlushedBatch> {
        let mut flushed = Vec::new();
        for (model_id, queue) in self.queues.iter_mut() {
            if queue.pending.is_empty() {
                continue;
            }
            flushed.push(FlushedBatch {
                model_id: model_id.clone(),
                tasks: std::mem::take(&mut queue.pending),
            });
        }
        flushed
    }
}
