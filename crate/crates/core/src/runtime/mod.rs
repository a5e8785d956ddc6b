//! Simulated message-passing runtime: one OS thread per rank, FIFO
//! mailboxes per `(source, destination, tag)`, deterministic collectives and
//! deadlock detection by quiescence.

mod assign;
mod comm;

use std::any::Any;
use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use assign::{assign_ranks, check_assignment, contiguous_owners, AssignError, Assignment, ShapeNode};
pub use comm::{Communicator, Reducible};

pub type Tag = u64;

/// How reductions combine contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionMode {
    /// Gather to the root, then fold in member order: bitwise reproducible
    /// for any number of ranks.
    #[default]
    Ordered,
    /// Pairwise fold along the tree; result depends on the rank layout.
    Tree,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuntimeConfig {
    /// Ranks allowed to run at the same time; 0 means one per rank.
    pub workers: usize,
    pub reduction: ReductionMode,
    /// Seed for randomized scheduling perturbations.
    pub fuzz_seed: Option<u64>,
}

/// Errors seen by a rank while communicating.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommError {
    #[error("deadlock: ranks {blocked:?} are all waiting on receives")]
    Deadlock { blocked: Vec<usize> },
    #[error("aborted because another rank failed")]
    Aborted,
    #[error("rank {0} is outside the communicator")]
    BadRank(usize),
    #[error("message from rank {src} with tag {tag} has an unexpected type")]
    TypeMismatch { src: usize, tag: Tag },
    #[error("reduction shape mismatch: {0}")]
    Shape(String),
}

/// Failure of a whole `spawn`.
#[derive(Debug, Error)]
pub enum SpawnError<E> {
    #[error("rank {rank} failed: {error}")]
    Program { rank: usize, error: E },
    #[error("deadlock: ranks {blocked:?} are all waiting on receives")]
    Deadlock { blocked: Vec<usize> },
    #[error("rank {rank} panicked: {message}")]
    Panic { rank: usize, message: String },
    #[error("invalid rank count {0}")]
    NoRanks(usize),
}

type Payload = Box<dyn Any + Send>;

#[derive(Debug, Clone)]
enum Failure {
    Program(usize),
    Panic(usize, String),
    Deadlock(Vec<usize>),
}

struct State {
    mailboxes: HashMap<(usize, usize, Tag), VecDeque<Payload>>,
    waiting: Vec<Option<(usize, Tag)>>,
    finished: Vec<bool>,
    tokens: usize,
    failure: Option<Failure>,
    messages_sent: u64,
}

struct Shared {
    state: Mutex<State>,
    cv: Condvar,
    config: RuntimeConfig,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn fail(&self, st: &mut State, f: Failure) {
        if st.failure.is_none() {
            st.failure = Some(f);
        }
        self.cv.notify_all();
    }

    /// Flags a deadlock when every live rank waits on an empty mailbox.
    fn check_quiescence(&self, st: &mut State) {
        if st.failure.is_some() {
            return;
        }
        let mut blocked = Vec::new();
        for (r, w) in st.waiting.iter().enumerate() {
            if st.finished[r] {
                continue;
            }
            match w {
                Some((src, tag)) if st.mailboxes.get(&(*src, r, *tag)).is_none_or(VecDeque::is_empty) => blocked.push(r),
                _ => return,
            }
        }
        if !blocked.is_empty() {
            self.fail(st, Failure::Deadlock(blocked));
        }
    }
}

/// Handle given to each rank's program.
pub struct Rank<'a> {
    id: usize,
    size: usize,
    shared: &'a Shared,
    fuzz: RefCell<Option<ChaCha8Rng>>,
}

impl<'a> Rank<'a> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn reduction_mode(&self) -> ReductionMode {
        self.shared.config.reduction
    }

    pub fn world(&self) -> Communicator {
        Communicator::new(0, (0..self.size).collect())
    }

    fn perturb(&self) {
        if let Some(rng) = self.fuzz.borrow_mut().as_mut() {
            match rng.gen_range(0..4) {
                0 => std::thread::yield_now(),
                1 => std::thread::sleep(Duration::from_micros(rng.gen_range(1..200))),
                _ => {}
            }
        }
    }

    pub fn send<T: Send + 'static>(&self, dst: usize, tag: Tag, value: T) -> Result<(), CommError> {
        if dst >= self.size {
            return Err(CommError::BadRank(dst));
        }
        self.perturb();
        let mut st = self.shared.lock();
        if st.failure.is_some() {
            return Err(CommError::Aborted);
        }
        st.mailboxes.entry((self.id, dst, tag)).or_default().push_back(Box::new(value));
        st.messages_sent += 1;
        self.shared.cv.notify_all();
        Ok(())
    }

    pub fn recv<T: 'static>(&self, src: usize, tag: Tag) -> Result<T, CommError> {
        if src >= self.size {
            return Err(CommError::BadRank(src));
        }
        self.perturb();
        let mut st = self.shared.lock();
        let mut released = false;
        let result = loop {
            if let Some(f) = &st.failure {
                break Err(match f {
                    Failure::Deadlock(b) => CommError::Deadlock { blocked: b.clone() },
                    _ => CommError::Aborted,
                });
            }
            if let Some(msg) = st.mailboxes.get_mut(&(src, self.id, tag)).and_then(VecDeque::pop_front) {
                break msg.downcast::<T>().map(|b| *b).map_err(|_| CommError::TypeMismatch { src, tag });
            }
            if !released {
                // give the worker slot to a runnable rank while we wait
                st.tokens += 1;
                released = true;
            }
            st.waiting[self.id] = Some((src, tag));
            self.shared.check_quiescence(&mut st);
            self.shared.cv.notify_all();
            if st.failure.is_none() {
                st = self.shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
            }
            st.waiting[self.id] = None;
        };
        st.waiting[self.id] = None;
        if released {
            st = self.acquire(st);
        }
        drop(st);
        result
    }

    fn acquire<'g>(&self, mut st: MutexGuard<'g, State>) -> MutexGuard<'g, State> {
        while st.tokens == 0 && st.failure.is_none() {
            st = self.shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        if st.tokens > 0 {
            st.tokens -= 1;
        }
        st
    }
}

fn panic_message(p: &(dyn Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

/// Runs `program` on `num_ranks` ranks and returns their results in rank order.
///
/// The first failing rank determines the error; the others are woken with
/// [`CommError::Aborted`]. A state where every unfinished rank waits on an
/// empty mailbox is reported as [`SpawnError::Deadlock`].
pub fn spawn<T, E, F>(num_ranks: usize, config: &RuntimeConfig, program: F) -> Result<Vec<T>, SpawnError<E>>
where
    T: Send,
    E: Send + From<CommError>,
    F: Fn(&Rank) -> Result<T, E> + Sync,
{
    if num_ranks == 0 {
        return Err(SpawnError::NoRanks(0));
    }
    let workers = if config.workers == 0 { num_ranks } else { config.workers.min(num_ranks) };
    let shared = Shared {
        state: Mutex::new(State {
            mailboxes: HashMap::new(),
            waiting: vec![None; num_ranks],
            finished: vec![false; num_ranks],
            tokens: workers,
            failure: None,
            messages_sent: 0,
        }),
        cv: Condvar::new(),
        config: config.clone(),
    };
    let outcomes: Vec<Result<Result<T, E>, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..num_ranks)
            .map(|id| {
                let shared = &shared;
                let program = &program;
                std::thread::Builder::new()
                    .name(format!("rank-{id}"))
                    .stack_size(16 << 20)
                    .spawn_scoped(scope, move || {
                        let rank = Rank {
                            id,
                            size: num_ranks,
                            shared,
                            fuzz: RefCell::new(shared.config.fuzz_seed.map(|s| ChaCha8Rng::seed_from_u64(s ^ (id as u64).wrapping_mul(0x9E37_79B9)))),
                        };
                        drop(rank.acquire(shared.lock()));
                        let out = catch_unwind(AssertUnwindSafe(|| program(&rank)));
                        let mut st = shared.lock();
                        st.finished[id] = true;
                        st.tokens += 1;
                        let out = match out {
                            Ok(Ok(v)) => Ok(Ok(v)),
                            Ok(Err(e)) => {
                                shared.fail(&mut st, Failure::Program(id));
                                Ok(Err(e))
                            }
                            Err(p) => {
                                let msg = panic_message(p.as_ref());
                                shared.fail(&mut st, Failure::Panic(id, msg.clone()));
                                Err(msg)
                            }
                        };
                        shared.check_quiescence(&mut st);
                        shared.cv.notify_all();
                        out
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|p| Err(panic_message(p.as_ref())))).collect()
    });
    let failure = shared.lock().failure.clone();
    match failure {
        None => Ok(outcomes
            .into_iter()
            .map(|o| match o {
                Ok(Ok(v)) => v,
                _ => unreachable!("a failed rank always records a failure"),
            })
            .collect()),
        Some(Failure::Deadlock(blocked)) => Err(SpawnError::Deadlock { blocked }),
        Some(Failure::Panic(rank, message)) => Err(SpawnError::Panic { rank, message }),
        Some(Failure::Program(rank)) => {
            let error = outcomes.into_iter().nth(rank).and_then(|o| o.ok()).and_then(Result::err).expect("failing rank result");
            Err(SpawnError::Program { rank, error })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn ring_passes_tokens() {
        let out = spawn(5, &RuntimeConfig::default(), |r| {
            let next = (r.id() + 1) % r.size();
            let prev = (r.id() + r.size() - 1) % r.size();
            r.send(next, 1, r.id())?;
            r.recv::<usize>(prev, 1)
        })
        .unwrap();
        assert_eq!(out, vec![4, 0, 1, 2, 3]);
    }

    #[test]
    fn single_worker_still_progresses() {
        let cfg = RuntimeConfig { workers: 1, ..Default::default() };
        let out = spawn(4, &cfg, |r| {
            if r.id() == 0 {
                let mut s = 0;
                for src in 1..r.size() {
                    s += r.recv::<usize>(src, 3)?;
                }
                Ok::<_, CommError>(s)
            } else {
                r.send(0, 3, r.id())?;
                Ok(0)
            }
        })
        .unwrap();
        assert_eq!(out[0], 6);
    }

    #[test]
    fn deadlock_detected_quickly() {
        let start = Instant::now();
        let err = spawn(3, &RuntimeConfig::default(), |r| r.recv::<u8>((r.id() + 1) % 3, 9)).unwrap_err();
        assert!(matches!(err, SpawnError::Deadlock { ref blocked } if blocked == &vec![0, 1, 2]));
        assert!(start.elapsed() < Duration::from_secs(1));
    }

    #[test]
    fn partial_deadlock_after_exit() {
        // rank 1 returns without sending; rank 0 waits forever
        let err = spawn(2, &RuntimeConfig::default(), |r| if r.id() == 0 { r.recv::<u8>(1, 0).map(|_| ()) } else { Ok(()) })
            .unwrap_err();
        assert!(matches!(err, SpawnError::Deadlock { ref blocked } if blocked == &vec![0]));
    }

    #[test]
    fn panic_is_attributed() {
        let err = spawn(3, &RuntimeConfig::default(), |r| {
            if r.id() == 2 {
                panic!("boom");
            }
            r.recv::<u8>(2, 0).map(|_| ())
        })
        .unwrap_err();
        match err {
            SpawnError::Panic { rank, message } => {
                assert_eq!(rank, 2);
                assert!(message.contains("boom"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn program_error_is_attributed() {
        let err = spawn(2, &RuntimeConfig::default(), |r| {
            if r.id() == 1 {
                Err(CommError::Shape("bad".into()))
            } else {
                r.recv::<u8>(1, 0).map(|_| ())
            }
        })
        .unwrap_err();
        assert!(matches!(err, SpawnError::Program { rank: 1, .. }));
    }

    #[test]
    fn type_mismatch_reported() {
        let err = spawn(2, &RuntimeConfig::default(), |r| {
            if r.id() == 0 {
                r.send(1, 0, 1u32)
            } else {
                r.recv::<String>(0, 0).map(|_| ())
            }
        })
        .unwrap_err();
        assert!(matches!(err, SpawnError::Program { rank: 1, error: CommError::TypeMismatch { .. } }));
    }
}
