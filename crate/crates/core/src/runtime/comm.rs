use std::collections::BTreeMap;

use super::{CommError, Rank, ReductionMode, Tag};

/// Tags at or above this value are reserved for collectives.
const COLLECTIVE_TAG: Tag = 1 << 48;

/// Values that can be summed by a reduction.
pub trait Reducible: Send + 'static {
    fn combine(&mut self, other: &Self) -> Result<(), CommError>;
}

impl Reducible for f64 {
    fn combine(&mut self, other: &Self) -> Result<(), CommError> {
        *self += other;
        Ok(())
    }
}

impl Reducible for Vec<f64> {
    fn combine(&mut self, other: &Self) -> Result<(), CommError> {
        if self.len() != other.len() {
            return Err(CommError::Shape(format!("vector lengths {} and {}", self.len(), other.len())));
        }
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
        Ok(())
    }
}

/// An ordered group of ranks. Collectives run over a binary tree rooted at
/// the chosen member; every member must call them in the same sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Communicator {
    id: u64,
    members: Vec<usize>,
}

impl Communicator {
    pub fn new(id: u64, members: Vec<usize>) -> Self {
        assert!(!members.is_empty(), "communicator needs at least one member");
        Self { id, members }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// First member; roots node-level reductions.
    pub fn lead(&self) -> usize {
        self.members[0]
    }

    pub fn local_rank(&self, global: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == global)
    }

    pub fn contains(&self, global: usize) -> bool {
        self.local_rank(global).is_some()
    }

    fn tag(&self) -> Tag {
        COLLECTIVE_TAG + self.id
    }

    fn me(&self, rank: &Rank) -> Result<usize, CommError> {
        self.local_rank(rank.id()).ok_or(CommError::BadRank(rank.id()))
    }

    /// Position in the tree rotated so that `root` sits at 0.
    fn position(&self, local: usize, root: usize) -> usize {
        (local + self.size() - root) % self.size()
    }

    fn member_at(&self, pos: usize, root: usize) -> usize {
        self.members[(pos + root) % self.size()]
    }

    fn children(&self, pos: usize) -> impl Iterator<Item = usize> {
        let n = self.size();
        [2 * pos + 1, 2 * pos + 2].into_iter().filter(move |&c| c < n)
    }

    /// Collects one value per member at `root` (local index), in member order.
    pub fn gather<T: Send + 'static>(&self, rank: &Rank, root: usize, value: T) -> Result<Option<Vec<T>>, CommError> {
        let me = self.me(rank)?;
        let pos = self.position(me, root);
        let mut acc: Vec<(usize, T)> = vec![(me, value)];
        for c in self.children(pos) {
            let part: Vec<(usize, T)> = rank.recv(self.member_at(c, root), self.tag())?;
            acc.extend(part);
        }
        if pos == 0 {
            acc.sort_by_key(|(local, _)| *local);
            Ok(Some(acc.into_iter().map(|(_, v)| v).collect()))
        } else {
            rank.send(self.member_at((pos - 1) / 2, root), self.tag(), acc)?;
            Ok(None)
        }
    }

    /// Sums contributions at `root`. In ordered mode the fold runs in member
    /// order, so the result equals a sequential left fold bit for bit.
    pub fn reduce<T: Reducible>(&self, rank: &Rank, root: usize, value: T) -> Result<Option<T>, CommError> {
        match rank.reduction_mode() {
            ReductionMode::Ordered => {
                let Some(all) = self.gather(rank, root, value)? else { return Ok(None) };
                let mut it = all.into_iter();
                let mut acc = it.next().expect("non-empty communicator");
                for v in it {
                    acc.combine(&v)?;
                }
                Ok(Some(acc))
            }
            ReductionMode::Tree => {
                let me = self.me(rank)?;
                let pos = self.position(me, root);
                let mut acc = value;
                for c in self.children(pos) {
                    let part: T = rank.recv(self.member_at(c, root), self.tag())?;
                    acc.combine(&part)?;
                }
                if pos == 0 {
                    Ok(Some(acc))
                } else {
                    rank.send(self.member_at((pos - 1) / 2, root), self.tag(), acc)?;
                    Ok(None)
                }
            }
        }
    }

    /// Sums keyed contributions at `root`; equal keys fold in member order.
    pub fn reduce_keyed<K, T>(&self, rank: &Rank, root: usize, items: Vec<(K, T)>) -> Result<Option<BTreeMap<K, T>>, CommError>
    where
        K: Ord + Send + 'static,
        T: Reducible,
    {
        let Some(all) = self.gather(rank, root, items)? else { return Ok(None) };
        let mut out: BTreeMap<K, T> = BTreeMap::new();
        for (k, v) in all.into_iter().flatten() {
            match out.get_mut(&k) {
                Some(acc) => acc.combine(&v)?,
                None => {
                    out.insert(k, v);
                }
            }
        }
        Ok(Some(out))
    }

    /// Distributes `value` (present at `root`) to all members.
    pub fn broadcast<T: Clone + Send + 'static>(&self, rank: &Rank, root: usize, value: Option<T>) -> Result<T, CommError> {
        let me = self.me(rank)?;
        let pos = self.position(me, root);
        let v = if pos == 0 {
            value.ok_or_else(|| CommError::Shape("broadcast root has no value".into()))?
        } else {
            rank.recv(self.member_at((pos - 1) / 2, root), self.tag())?
        };
        for c in self.children(pos) {
            rank.send(self.member_at(c, root), self.tag(), v.clone())?;
        }
        Ok(v)
    }

    pub fn allreduce<T: Reducible + Clone>(&self, rank: &Rank, value: T) -> Result<T, CommError> {
        let r = self.reduce(rank, 0, value)?;
        self.broadcast(rank, 0, r)
    }

    /// Sends `values[k]` from `root` to the `k`-th member.
    pub fn scatter<T: Send + 'static>(&self, rank: &Rank, root: usize, values: Option<Vec<T>>) -> Result<T, CommError> {
        let me = self.me(rank)?;
        if me == root {
            let values = values.ok_or_else(|| CommError::Shape("scatter root has no values".into()))?;
            if values.len() != self.size() {
                return Err(CommError::Shape(format!("scatter of {} values over {} members", values.len(), self.size())));
            }
            let mut mine = None;
            for (k, v) in values.into_iter().enumerate() {
                if k == root {
                    mine = Some(v);
                } else {
                    rank.send(self.members[k], self.tag(), v)?;
                }
            }
            Ok(mine.expect("root value"))
        } else {
            rank.recv(self.members[root], self.tag())
        }
    }

    pub fn barrier(&self, rank: &Rank) -> Result<(), CommError> {
        let done = self.gather(rank, 0, ())?;
        self.broadcast(rank, 0, done.map(|_| ()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{spawn, RuntimeConfig, SpawnError};

    #[test]
    fn gather_orders_by_member() {
        for root in 0..5 {
            let out = spawn(5, &RuntimeConfig::default(), |r| r.world().gather(r, root, r.id() * 10)).unwrap();
            assert_eq!(out[root], Some(vec![0, 10, 20, 30, 40]));
        }
    }

    #[test]
    fn ordered_reduce_matches_sequential_fold() {
        let vals: Vec<f64> = (0..7).map(|k| 0.1 * (k as f64 + 1.0).powi(3) / 3.0).collect();
        let mut seq = vals[0];
        for v in &vals[1..] {
            seq += v;
        }
        for root in [0, 3, 6] {
            let out = spawn(7, &RuntimeConfig::default(), |r| r.world().reduce(r, root, vals[r.id()])).unwrap();
            assert_eq!(out[root].unwrap().to_bits(), seq.to_bits());
        }
    }

    #[test]
    fn tree_reduce_sums() {
        let cfg = RuntimeConfig { reduction: ReductionMode::Tree, ..Default::default() };
        let out = spawn(6, &cfg, |r| r.world().allreduce(r, vec![r.id() as f64, 1.0])).unwrap();
        assert!(out.iter().all(|v| v == &vec![15.0, 6.0]));
    }

    #[test]
    fn keyed_reduce_and_scatter() {
        let out = spawn(3, &RuntimeConfig::default(), |r| {
            let comm = Communicator::new(4, vec![2, 0, 1]);
            let items = vec![(r.id() % 2, 1.0), (7, r.id() as f64)];
            let m = comm.reduce_keyed(r, 0, items)?;
            let values = m.map(|m| vec![m[&0], m[&1], m[&7]]);
            comm.scatter(r, 0, values)
        })
        .unwrap();
        // members [2, 0, 1]: keys 0 <- ranks 0,2 ; 1 <- rank 1 ; 7 <- sum of ids
        assert_eq!(out, vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_fails() {
        let err = spawn(2, &RuntimeConfig::default(), |r| r.world().reduce(r, 0, vec![0.0; r.id() + 1])).unwrap_err();
        assert!(matches!(err, SpawnError::Program { rank: 0, error: CommError::Shape(_) }));
    }

    #[test]
    fn subcommunicators_are_independent() {
        let out = spawn(4, &RuntimeConfig::default(), |r| {
            let comm = if r.id() < 2 { Communicator::new(1, vec![0, 1]) } else { Communicator::new(2, vec![2, 3]) };
            comm.allreduce(r, r.id() as f64)
        })
        .unwrap();
        assert_eq!(out, vec![1.0, 1.0, 5.0, 5.0]);
    }
}
