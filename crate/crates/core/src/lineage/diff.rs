// SPDX-License-Identifier: Apache-2.0

//! Diffing two versions into a replayable change log.

use std::collections::{HashMap, HashSet};

use super::{fit_affine, shared_key_among, LineageError};
use crate::change::{affine_image, affine_restore_list, apply_log, row_identities, ChangeLog, ChangeOp, KeyColumns};
use crate::table::{CellValue, ColType, Table};

/// Minimum value containment for pairing two differently named columns.
pub const RENAME_CONTAINMENT: f64 = 0.8;
pub const AFFINE_MIN_R2: f64 = 0.999;
pub const AFFINE_TOLERANCE: f64 = 1e-9;

fn containment(a: &Table, i: usize, b: &Table, j: usize) -> f64 {
    let left: HashSet<&CellValue> = a.column(i).filter(|c| !c.is_null()).collect();
    let right: HashSet<&CellValue> = b.column(j).filter(|c| !c.is_null()).collect();
    let small = left.len().min(right.len());
    if small == 0 {
        return 0.0;
    }
    left.intersection(&right).count() as f64 / small as f64
}

/// Mask of the elements kept by one longest strictly increasing subsequence.
/// Ties between equally long subsequences resolve to the earliest ending.
fn lis_mask(seq: &[usize]) -> Vec<bool> {
    let mut tails: Vec<usize> = Vec::new(); // indices into seq
    let mut prev = vec![usize::MAX; seq.len()];
    for (i, &v) in seq.iter().enumerate() {
        let pos = tails.partition_point(|&t| seq[t] < v);
        if pos > 0 {
            prev[i] = tails[pos - 1];
        }
        if pos == tails.len() {
            tails.push(i);
        } else {
            tails[pos] = i;
        }
    }
    let mut keep = vec![false; seq.len()];
    let mut cur = tails.last().copied();
    while let Some(i) = cur {
        keep[i] = true;
        cur = (prev[i] != usize::MAX).then(|| prev[i]);
    }
    keep
}

/// Column pairs `(old, new)` that survive in place.
fn match_columns(older: &Table, newer: &Table) -> Vec<(usize, usize)> {
    let mut pairs: Vec<Option<usize>> = vec![None; older.arity()];
    let mut used_new = vec![false; newer.arity()];
    for (i, h) in older.headers().iter().enumerate() {
        if let Some(j) = newer.column_index(h) {
            if older.col_types()[i] == newer.col_types()[j] {
                pairs[i] = Some(j);
                used_new[j] = true;
            }
        }
    }
    let mut candidates = Vec::new();
    for i in (0..older.arity()).filter(|&i| pairs[i].is_none()) {
        for j in (0..newer.arity()).filter(|&j| !used_new[j]) {
            if older.col_types()[i] != newer.col_types()[j] || older.column_index(&newer.headers()[j]).is_some() {
                continue;
            }
            let c = containment(older, i, newer, j);
            if c >= RENAME_CONTAINMENT {
                candidates.push((c, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (_, i, j) in candidates {
        if pairs[i].is_none() && !used_new[j] {
            pairs[i] = Some(j);
            used_new[j] = true;
        }
    }
    let matched: Vec<(usize, usize)> = pairs.iter().enumerate().filter_map(|(i, j)| Some((i, (*j)?))).collect();
    let keep = lis_mask(&matched.iter().map(|p| p.1).collect::<Vec<_>>());
    matched
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

fn snapped(v: f64, grid: f64) -> f64 {
    (v * grid).round() / grid
}

/// Coefficients of an affine map that carries every surviving cell of the
/// column from `pre` to `post`, if one exists.
fn find_affine(ty: ColType, cells: &[(&CellValue, &CellValue)]) -> Option<(f64, f64)> {
    let mut points = Vec::with_capacity(cells.len());
    for (x, y) in cells {
        match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => points.push((x, y)),
            (None, None) if x.is_null() && y.is_null() => {}
            _ => return None,
        }
    }
    let fit = fit_affine(&points).ok()?;
    if fit.r2 < AFFINE_MIN_R2 {
        return None;
    }
    let candidates = match ty {
        ColType::Integer => vec![(fit.a.round(), fit.b.round())],
        _ => vec![(snapped(fit.a, 1e6), snapped(fit.b, 1e6)), (fit.a, fit.b)],
    };
    candidates.into_iter().find(|&(a, b)| {
        a != 0.0
            && a.is_finite()
            && b.is_finite()
            && cells.iter().all(|(x, y)| match (affine_image(x, ty, a, b), ty) {
                (Some(img), ColType::Integer) => &img == *y,
                (Some(img), _) => match (img.as_f64(), y.as_f64()) {
                    (Some(p), Some(q)) => (p - q).abs() <= AFFINE_TOLERANCE,
                    _ => img.is_null() && y.is_null(),
                },
                (None, _) => false,
            })
    })
}

/// Diffs `older` into a log that `apply_log` turns into `newer` exactly.
///
/// Columns pair by name, then by value containment (renames). Rows pair by a
/// shared entity key, or by full-row content when no key exists. Columns and
/// rows that changed relative order are dropped and re-added. The result is
/// replayed before it is returned.
pub fn synthesize_changelog(
    older: &Table,
    newer: &Table,
    family_id: &str,
    from_ordinal: u32,
) -> Result<ChangeLog, LineageError> {
    let fail = |reason: String| LineageError::Synthesis {
        older: older.table_id.clone(),
        newer: newer.table_id.clone(),
        reason,
    };
    let kept = match_columns(older, newer);
    let key = shared_key_among(older, newer, kept.iter().copied());
    let same_schema = older.headers() == newer.headers() && older.col_types() == newer.col_types();

    let (old_ids, new_ids) = match key {
        Some((ki, kj)) => (
            older.column(ki).cloned().collect::<Vec<_>>(),
            newer.column(kj).cloned().collect::<Vec<_>>(),
        ),
        None => (
            row_identities(older, None).map_err(|e| fail(e.to_string()))?,
            row_identities(newer, None).map_err(|e| fail(e.to_string()))?,
        ),
    };
    // Without a key, rows can only be carried over when their content (and
    // thus their identity) is unchanged.
    let rows_carry = key.is_some() || same_schema;
    let new_pos: HashMap<&CellValue, usize> = new_ids.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let matched: Vec<(usize, usize)> = if rows_carry {
        old_ids
            .iter()
            .enumerate()
            .filter_map(|(oi, k)| Some((oi, *new_pos.get(k)?)))
            .collect()
    } else {
        Vec::new()
    };
    let keep = lis_mask(&matched.iter().map(|m| m.1).collect::<Vec<_>>());
    let survivors: Vec<(usize, usize)> = matched
        .into_iter()
        .zip(keep)
        .filter_map(|(m, k)| k.then_some(m))
        .collect();
    let surviving_old: HashSet<usize> = survivors.iter().map(|s| s.0).collect();
    let surviving_new: HashSet<usize> = survivors.iter().map(|s| s.1).collect();

    let mut ops = Vec::new();
    let kept_old: HashSet<usize> = kept.iter().map(|p| p.0).collect();
    let kept_new: HashSet<usize> = kept.iter().map(|p| p.1).collect();

    for &(i, j) in &kept {
        if older.headers()[i] != newer.headers()[j] {
            ops.push(ChangeOp::RenameColumn {
                old_name: older.headers()[i].clone(),
                new_name: newer.headers()[j].clone(),
            });
        }
    }
    for i in (0..older.arity()).filter(|i| !kept_old.contains(i)) {
        ops.push(ChangeOp::DropColumn {
            name: older.headers()[i].clone(),
            position: i,
            col_type: older.col_types()[i],
            saved: older
                .rows()
                .iter()
                .zip(&old_ids)
                .filter(|(r, _)| !r[i].is_null())
                .map(|(r, k)| (k.clone(), r[i].clone()))
                .collect(),
        });
    }
    for j in (0..newer.arity()).filter(|j| !kept_new.contains(j)) {
        ops.push(ChangeOp::AddColumn {
            name: newer.headers()[j].clone(),
            position: j,
            col_type: newer.col_types()[j],
            values: survivors
                .iter()
                .filter(|&&(_, ni)| !newer.rows()[ni][j].is_null())
                .map(|&(oi, ni)| (old_ids[oi].clone(), newer.rows()[ni][j].clone()))
                .collect(),
        });
    }
    for &(i, j) in &kept {
        let cells: Vec<(&CellValue, &CellValue)> = survivors
            .iter()
            .map(|&(oi, ni)| (&older.rows()[oi][i], &newer.rows()[ni][j]))
            .collect();
        if cells.iter().all(|(x, y)| x == y) {
            continue;
        }
        let ty = older.col_types()[i];
        let affine = if ty.is_numeric() { find_affine(ty, &cells) } else { None };
        match affine {
            Some((a, b)) => {
                let pairs: Vec<_> = survivors
                    .iter()
                    .zip(&cells)
                    .map(|(&(oi, _), (x, y))| (old_ids[oi].clone(), (*x).clone(), (*y).clone()))
                    .collect();
                ops.push(ChangeOp::affine(
                    newer.headers()[j].clone(),
                    a,
                    b,
                    affine_restore_list(ty, a, b, &pairs),
                ));
            }
            None => {
                for (&(oi, _), (x, y)) in survivors.iter().zip(&cells) {
                    if x != y {
                        ops.push(ChangeOp::UpdateCell {
                            key: old_ids[oi].clone(),
                            column: newer.headers()[j].clone(),
                            old: (*x).clone(),
                            new: (*y).clone(),
                        });
                    }
                }
            }
        }
    }
    for (oi, row) in older.rows().iter().enumerate() {
        if !surviving_old.contains(&oi) {
            ops.push(ChangeOp::DeleteRow {
                key: old_ids[oi].clone(),
                position: oi,
                row: row.clone(),
            });
        }
    }
    for (ni, row) in newer.rows().iter().enumerate() {
        if !surviving_new.contains(&ni) {
            ops.push(ChangeOp::AddRow {
                key: new_ids[ni].clone(),
                position: ni,
                row: row.clone(),
            });
        }
    }

    let key_columns = key.map(|(ki, kj)| KeyColumns {
        from: older.headers()[ki].clone(),
        to: newer.headers()[kj].clone(),
    });
    let log = ChangeLog::new(family_id, from_ordinal, key_columns, ops);
    let replayed = apply_log(older, &log).map_err(|e| fail(e.to_string()))?;
    if !replayed.content_eq(newer) {
        return Err(fail("replay differs from the newer version".into()));
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(id: &str, src: &str) -> Table {
        Table::from_csv(id, src.as_bytes()).unwrap()
    }

    #[test]
    fn lis() {
        assert_eq!(lis_mask(&[0, 1, 2]), [true, true, true]);
        assert_eq!(lis_mask(&[2, 0, 1]), [false, true, true]);
        assert_eq!(lis_mask(&[]), Vec::<bool>::new());
    }

    #[test]
    fn identical_is_empty() {
        let a = t("a", "p,v\nx,1\ny,2\n");
        assert!(synthesize_changelog(&a, &a, "f", 0).unwrap().ops.is_empty());
    }

    #[test]
    fn doubled_column_is_one_transform() {
        let a = t("a", "p,points\nx,1.5\ny,2.25\nz,-4.0\n");
        let b = t("b", "p,points\nx,3.0\ny,4.5\nz,-8.0\n");
        let log = synthesize_changelog(&a, &b, "f", 0).unwrap();
        assert_eq!(log.ops, [ChangeOp::affine("points", 2.0, 0.0, vec![])]);
    }

    #[test]
    fn rename_move_and_rows() {
        let a = t(
            "a",
            "player,team,age,pts\nA,X,30,1.5\nB,Y,25,2.0\nC,Z,20,3.0\nD,X,21,4.0\n",
        );
        let b = t(
            "b",
            "player,points,squad,age\nD,4.0,X,22\nB,2.0,Y,27\nC,3.0,Z,20\nE,1.0,Y,19\n",
        );
        let log = synthesize_changelog(&a, &b, "f", 3).unwrap();
        assert_eq!(log.to_ordinal, 4);
        assert!(log.ops.contains(&ChangeOp::RenameColumn {
            old_name: "team".into(),
            new_name: "squad".into()
        }));
    }

    #[test]
    fn keyless_tables() {
        let a = t("a", "p,v\nx,1\nx,1\ny,2\n");
        let b = t("b", "p,v\nx,1\nz,3\nx,1\n");
        let log = synthesize_changelog(&a, &b, "f", 0).unwrap();
        assert!(log.key.is_none());
        let c = t("c", "p,w,v\nx,5,1\n");
        assert!(synthesize_changelog(&a, &c, "f", 0).is_ok());
        assert!(synthesize_changelog(&c, &a, "f", 0).is_ok());
    }
}
