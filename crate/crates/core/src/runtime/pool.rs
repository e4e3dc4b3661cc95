//! Worker pools: task/result queues and the two worker loops.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use crossbeam_channel::{unbounded, Receiver, Sender};
use thiserror::Error;

use crate::env::{ActionId, EnvError, Environment, StepOutcome};
use crate::policy::{rollout, rollout_rng, PolicyConfig};
use crate::tree::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskFailure {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("worker panicked: {0}")]
    Panicked(String),
}

/// Step `state` by `action`; the child hangs under `node`.
#[derive(Clone, Debug)]
pub struct ExpansionTask<S> {
    pub task: u64,
    pub node: NodeId,
    pub action: ActionId,
    pub state: S,
}

#[derive(Clone, Debug)]
pub struct ExpansionResult<S> {
    pub task: u64,
    pub node: NodeId,
    pub action: ActionId,
    pub outcome: Result<StepOutcome<S>, TaskFailure>,
    pub started: Instant,
    pub finished: Instant,
}

/// Roll out from `state` with the generator seeded by `seed`.
#[derive(Clone, Debug)]
pub struct SimulationTask<S> {
    pub task: u64,
    pub state: S,
    pub seed: u64,
    pub policy: PolicyConfig,
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub task: u64,
    pub outcome: Result<f64, TaskFailure>,
    pub started: Instant,
    pub finished: Instant,
}

fn guarded<T>(f: impl FnOnce() -> Result<T, EnvError>) -> Result<T, TaskFailure> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r.map_err(TaskFailure::Env),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(TaskFailure::Panicked(msg))
        }
    }
}

/// Serves expansion tasks until the task queue closes or the result queue
/// has no receiver.
pub fn expansion_worker_loop<E: Environment>(
    env: &E,
    tasks: Receiver<ExpansionTask<E::State>>,
    results: Sender<ExpansionResult<E::State>>,
) {
    for t in tasks.iter() {
        let started = Instant::now();
        let outcome = guarded(|| env.step(&t.state, t.action));
        let r = ExpansionResult { task: t.task, node: t.node, action: t.action, outcome, started, finished: Instant::now() };
        if results.send(r).is_err() {
            break;
        }
    }
}

/// Serves simulation tasks until the task queue closes or the result queue
/// has no receiver.
pub fn simulation_worker_loop<E: Environment>(
    env: &E,
    tasks: Receiver<SimulationTask<E::State>>,
    results: Sender<SimulationResult>,
) {
    for t in tasks.iter() {
        let started = Instant::now();
        let outcome = guarded(|| rollout(env, &t.state, &t.policy, &mut rollout_rng(t.seed)));
        let r = SimulationResult { task: t.task, outcome, started, finished: Instant::now() };
        if results.send(r).is_err() {
            break;
        }
    }
}

/// Fixed set of threads sharing one task queue and one result queue.
/// Dropping the pool closes the task queue and joins the workers.
pub struct WorkerPool<T, R> {
    tasks: Option<Sender<T>>,
    results: Receiver<R>,
    handles: Vec<JoinHandle<()>>,
}

impl<T: Send + 'static, R: Send + 'static> WorkerPool<T, R> {
    pub fn spawn<F>(size: usize, name: &str, work: F) -> Self
    where
        F: Fn(Receiver<T>, Sender<R>) + Send + Sync + 'static,
    {
        let (task_tx, task_rx) = unbounded();
        let (result_tx, result_rx) = unbounded();
        let work = Arc::new(work);
        let handles = (0..size)
            .map(|i| {
                let (rx, tx, work) = (task_rx.clone(), result_tx.clone(), Arc::clone(&work));
                std::thread::Builder::new()
                    .name(format!("{name}-{i}"))
                    .spawn(move || work(rx, tx))
                    .expect("spawn worker thread")
            })
            .collect();
        Self { tasks: Some(task_tx), results: result_rx, handles }
    }

    pub fn size(&self) -> usize {
        self.handles.len()
    }

    /// Queues a task; fails once every worker is gone.
    pub fn send(&self, task: T) -> Result<(), String> {
        self.tasks.as_ref().expect("pool is open").send(task).map_err(|_| "task queue closed".to_string())
    }

    pub fn results(&self) -> &Receiver<R> {
        &self.results
    }
}

impl<T, R> Drop for WorkerPool<T, R> {
    fn drop(&mut self) {
        self.tasks.take();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

pub type ExpansionPool<S> = WorkerPool<ExpansionTask<S>, ExpansionResult<S>>;
pub type SimulationPool<S> = WorkerPool<SimulationTask<S>, SimulationResult>;

pub fn expansion_pool<E: Environment>(env: Arc<E>, size: usize) -> ExpansionPool<E::State> {
    WorkerPool::spawn(size, "expand", move |rx, tx| expansion_worker_loop(env.as_ref(), rx, tx))
}

pub fn simulation_pool<E: Environment>(env: Arc<E>, size: usize) -> SimulationPool<E::State> {
    WorkerPool::spawn(size, "simulate", move |rx, tx| simulation_worker_loop(env.as_ref(), rx, tx))
}
