use super::{ArrowheadProblem, Block, ProblemError, SparseBlock};

/// Merges consecutive groups of `factor` blocks into single blocks.
///
/// Produces `ceil(N / factor)` blocks; the last group holds the remainder.
/// A linking row whose support spans at least two old blocks, all inside one
/// group, becomes a block row of that group; every other linking row stays.
pub fn merge_blocks(p: &ArrowheadProblem, factor: usize) -> Result<ArrowheadProblem, ProblemError> {
    if factor == 0 {
        return Err(ProblemError::MergeFactor);
    }
    let report = p.validate();
    if !report.is_ok() {
        return Err(ProblemError::Invalid(report));
    }
    if factor == 1 {
        return Ok(p.clone());
    }
    let n = p.num_blocks();
    let groups = n.div_ceil(factor);
    let group_of = |i: usize| (i - 1) / factor + 1;
    let members = |g: usize| ((g - 1) * factor + 1)..=(g * factor).min(n);
    // column offset of old block i within its group
    let mut col_off = vec![0; n + 1];
    for g in 1..=groups {
        let mut off = 0;
        for i in members(g) {
            col_off[i] = off;
            off += p.blocks[i].nvar();
        }
    }

    // which linking rows get absorbed, and by which group
    let absorb = |rows: usize, mat: fn(&Block) -> &SparseBlock| -> Vec<Option<usize>> {
        let mut support: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for i in 1..=n {
            for &(r, _, _) in &mat(&p.blocks[i]).entries {
                if support[r].last() != Some(&i) {
                    support[r].push(i);
                }
            }
        }
        support
            .iter()
            .map(|s| {
                let g = group_of(*s.first()?);
                (s.len() >= 2 && s.iter().all(|&i| group_of(i) == g)).then_some(g)
            })
            .collect()
    };
    let f_abs = absorb(p.link_meq(), |b| &b.f);
    let g_abs = absorb(p.link_mineq(), |b| &b.g);
    // new indices of kept linking rows
    let keep = |abs: &[Option<usize>]| -> (Vec<Option<usize>>, usize) {
        let mut k = 0;
        let map = abs
            .iter()
            .map(|a| {
                a.is_none().then(|| {
                    k += 1;
                    k - 1
                })
            })
            .collect();
        (map, k)
    };
    let (f_keep, new_lme) = keep(&f_abs);
    let (g_keep, new_lmi) = keep(&g_abs);

    let n0 = p.n0();
    let mut out = ArrowheadProblem {
        blocks: Vec::with_capacity(groups + 1),
        link_rhs_eq: p.link_rhs_eq.iter().zip(&f_keep).filter(|(_, k)| k.is_some()).map(|(v, _)| *v).collect(),
        link_lower: p.link_lower.iter().zip(&g_keep).filter(|(_, k)| k.is_some()).map(|(v, _)| *v).collect(),
        link_upper: p.link_upper.iter().zip(&g_keep).filter(|(_, k)| k.is_some()).map(|(v, _)| *v).collect(),
    };

    // block 0 keeps its rows; its linking entries follow the kept rows,
    // absorbed rows move its F_0/G_0 entries into the group's A/C
    let b0 = &p.blocks[0];
    let mut root = b0.clone();
    root.f = remap_link(&b0.f, &f_keep, new_lme, n0, 0);
    root.g = remap_link(&b0.g, &g_keep, new_lmi, n0, 0);
    out.blocks.push(root);

    for g in 1..=groups {
        let ids: Vec<usize> = members(g).collect();
        let nvar: usize = ids.iter().map(|&i| p.blocks[i].nvar()).sum();
        let absorbed_f: Vec<usize> = (0..p.link_meq()).filter(|&r| f_abs[r] == Some(g)).collect();
        let absorbed_g: Vec<usize> = (0..p.link_mineq()).filter(|&r| g_abs[r] == Some(g)).collect();
        let meq: usize = ids.iter().map(|&i| p.blocks[i].meq()).sum::<usize>() + absorbed_f.len();
        let mineq: usize = ids.iter().map(|&i| p.blocks[i].mineq()).sum::<usize>() + absorbed_g.len();
        let mut blk = Block::empty(g, nvar, meq, mineq, n0, new_lme, new_lmi);
        blk.obj.clear();
        blk.lower.clear();
        blk.upper.clear();
        blk.rhs_eq.clear();
        blk.ineq_lower.clear();
        blk.ineq_upper.clear();
        let (mut a, mut b, mut c, mut d, mut f, mut gg) = (vec![], vec![], vec![], vec![], vec![], vec![]);
        let (mut re, mut ri) = (0, 0);
        for &i in &ids {
            let old = &p.blocks[i];
            let o = col_off[i];
            blk.obj.extend_from_slice(&old.obj);
            blk.lower.extend_from_slice(&old.lower);
            blk.upper.extend_from_slice(&old.upper);
            blk.rhs_eq.extend_from_slice(&old.rhs_eq);
            blk.ineq_lower.extend_from_slice(&old.ineq_lower);
            blk.ineq_upper.extend_from_slice(&old.ineq_upper);
            a.extend(old.a.entries.iter().map(|&(r, cc, v)| (re + r, cc, v)));
            b.extend(old.b.entries.iter().map(|&(r, cc, v)| (re + r, o + cc, v)));
            c.extend(old.c.entries.iter().map(|&(r, cc, v)| (ri + r, cc, v)));
            d.extend(old.d.entries.iter().map(|&(r, cc, v)| (ri + r, o + cc, v)));
            for &(r, cc, v) in &old.f.entries {
                if let Some(k) = f_keep[r] {
                    f.push((k, o + cc, v));
                }
            }
            for &(r, cc, v) in &old.g.entries {
                if let Some(k) = g_keep[r] {
                    gg.push((k, o + cc, v));
                }
            }
            re += old.meq();
            ri += old.mineq();
        }
        for (k, &r) in absorbed_f.iter().enumerate() {
            let row = re + k;
            blk.rhs_eq.push(p.link_rhs_eq[r]);
            a.extend(b0.f.entries.iter().filter(|e| e.0 == r).map(|&(_, cc, v)| (row, cc, v)));
            for &i in &ids {
                let o = col_off[i];
                b.extend(p.blocks[i].f.entries.iter().filter(|e| e.0 == r).map(|&(_, cc, v)| (row, o + cc, v)));
            }
        }
        for (k, &r) in absorbed_g.iter().enumerate() {
            let row = ri + k;
            blk.ineq_lower.push(p.link_lower[r]);
            blk.ineq_upper.push(p.link_upper[r]);
            c.extend(b0.g.entries.iter().filter(|e| e.0 == r).map(|&(_, cc, v)| (row, cc, v)));
            for &i in &ids {
                let o = col_off[i];
                d.extend(p.blocks[i].g.entries.iter().filter(|e| e.0 == r).map(|&(_, cc, v)| (row, o + cc, v)));
            }
        }
        blk.a = SparseBlock::from_entries(meq, n0, a);
        blk.b = SparseBlock::from_entries(meq, nvar, b);
        blk.c = SparseBlock::from_entries(mineq, n0, c);
        blk.d = SparseBlock::from_entries(mineq, nvar, d);
        blk.f = SparseBlock::from_entries(new_lme, nvar, f);
        blk.g = SparseBlock::from_entries(new_lmi, nvar, gg);
        out.blocks.push(blk);
    }
    Ok(out)
}

fn remap_link(m: &SparseBlock, keep: &[Option<usize>], rows: usize, cols: usize, _block: usize) -> SparseBlock {
    let entries = m.entries.iter().filter_map(|&(r, c, v)| keep[r].map(|k| (k, c, v))).collect();
    SparseBlock::from_entries(rows, cols, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{classify_problem, generate, GeneratorParams};

    fn instance(n: usize) -> ArrowheadProblem {
        let mut p = GeneratorParams::new(n, 2, 6).with_uniform_local_links(1);
        p.linking_vars = 3;
        p.global_links = 1;
        p.inequality_fraction = 0.3;
        p.seed = 11;
        generate(&p).unwrap().problem
    }

    #[test]
    fn factor_one_is_identity() {
        let p = instance(5);
        assert_eq!(merge_blocks(&p, 1).unwrap(), p);
    }

    #[test]
    fn factor_zero_rejected() {
        assert!(matches!(merge_blocks(&instance(3), 0), Err(ProblemError::MergeFactor)));
    }

    #[test]
    fn merged_shape_and_links() {
        let p = instance(5);
        let m = merge_blocks(&p, 2).unwrap();
        assert!(m.validate().is_ok());
        assert_eq!(m.num_blocks(), 3);
        assert_eq!(m.total_vars(), p.total_vars());
        // pairs (1,2) and (3,4) are absorbed, (2,3) and (4,5) stay local
        let c = classify_problem(&m);
        assert_eq!(c.local_counts, vec![1, 1]);
        assert_eq!(c.global_count, 1);
    }

    #[test]
    fn objective_and_activity_preserved() {
        let p = instance(4);
        let m = merge_blocks(&p, 3).unwrap();
        let x: Vec<Vec<f64>> = p.blocks.iter().map(|b| (0..b.nvar()).map(|j| j as f64 * 0.5 - 1.0).collect()).collect();
        let merged_x = vec![x[0].clone(), [x[1].clone(), x[2].clone(), x[3].clone()].concat(), x[4].clone()];
        assert!((p.objective(&x) - m.objective(&merged_x)).abs() < 1e-12);
        let total = |(rows, link): (Vec<Vec<f64>>, Vec<f64>)| rows.into_iter().flatten().chain(link).map(f64::abs).sum::<f64>();
        assert!((total(p.eq_activity(&x)) - total(m.eq_activity(&merged_x))).abs() < 1e-10);
    }
}
