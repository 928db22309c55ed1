//! Activity-based bound tightening on integer rows.

use std::collections::VecDeque;

use crate::ilp::{IlpModel, Sense};

#[derive(Debug, Clone)]
pub struct Propagator {
    col_rows: Vec<Vec<usize>>,
}

impl Propagator {
    pub fn new(model: &IlpModel) -> Self {
        let mut col_rows = vec![Vec::new(); model.num_vars()];
        for (r, c) in model.constraints().iter().enumerate() {
            for &(j, _) in &c.terms {
                col_rows[j].push(r);
            }
        }
        Propagator { col_rows }
    }

    /// Tightens `lower`/`upper` to a fixed point. Returns false when some row
    /// cannot be satisfied within the bounds. Never removes an integer point
    /// that satisfies every row.
    pub fn propagate(&self, model: &IlpModel, lower: &mut [i64], upper: &mut [i64]) -> bool {
        let rows = model.constraints();
        let mut queued = vec![true; rows.len()];
        let mut queue: VecDeque<usize> = (0..rows.len()).collect();
        while let Some(r) = queue.pop_front() {
            queued[r] = false;
            let row = &rows[r];
            let mut min_act: i128 = 0;
            let mut max_act: i128 = 0;
            for &(j, a) in &row.terms {
                let (a, l, u) = (i128::from(a), i128::from(lower[j]), i128::from(upper[j]));
                if a > 0 {
                    min_act += a * l;
                    max_act += a * u;
                } else {
                    min_act += a * u;
                    max_act += a * l;
                }
            }
            let rhs = i128::from(row.rhs);
            let le = matches!(row.sense, Sense::Le | Sense::Eq);
            let ge = matches!(row.sense, Sense::Ge | Sense::Eq);
            if (le && min_act > rhs) || (ge && max_act < rhs) {
                return false;
            }
            for &(j, a) in &row.terms {
                let a128 = i128::from(a);
                let mut new_l = i128::from(lower[j]);
                let mut new_u = i128::from(upper[j]);
                if le {
                    let slack = rhs - min_act;
                    if a > 0 {
                        new_u = new_u.min(i128::from(lower[j]) + slack / a128);
                    } else {
                        new_l = new_l.max(i128::from(upper[j]) - slack / -a128);
                    }
                }
                if ge {
                    let slack = max_act - rhs;
                    if a > 0 {
                        new_l = new_l.max(i128::from(upper[j]) - slack / a128);
                    } else {
                        new_u = new_u.min(i128::from(lower[j]) + slack / -a128);
                    }
                }
                if new_l > new_u {
                    return false;
                }
                if new_l != i128::from(lower[j]) || new_u != i128::from(upper[j]) {
                    lower[j] = new_l as i64;
                    upper[j] = new_u as i64;
                    for &other in &self.col_rows[j] {
                        if !queued[other] {
                            queued[other] = true;
                            queue.push_back(other);
                        }
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::VarKind;

    #[test]
    fn fixes_forced_binaries() {
        let mut model = IlpModel::new("t");
        let a = model.add_var(None, "a", VarKind::Binary, 0, 1);
        let b = model.add_var(None, "b", VarKind::Binary, 0, 1);
        let c = model.add_var(None, "c", VarKind::Integer, 0, 10);
        model.add_constraint("r1", vec![(a, 1), (b, 1)], Sense::Ge, 2);
        model.add_constraint("r2", vec![(c, 1), (a, -3)], Sense::Ge, 0);
        let p = Propagator::new(&model);
        let (mut l, mut u) = (vec![0, 0, 0], vec![1, 1, 10]);
        assert!(p.propagate(&model, &mut l, &mut u));
        assert_eq!(l, vec![1, 1, 3]);
        assert_eq!(u, vec![1, 1, 10]);
    }

    #[test]
    fn detects_conflict() {
        let mut model = IlpModel::new("t");
        let a = model.add_var(None, "a", VarKind::Binary, 0, 1);
        let b = model.add_var(None, "b", VarKind::Binary, 0, 1);
        model.add_constraint("r1", vec![(a, 1), (b, 1)], Sense::Le, 1);
        model.add_constraint("r2", vec![(a, 1), (b, 1)], Sense::Ge, 2);
        let p = Propagator::new(&model);
        let (mut l, mut u) = (vec![0, 0], vec![1, 1]);
        assert!(!p.propagate(&model, &mut l, &mut u));
    }
}
