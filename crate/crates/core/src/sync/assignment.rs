//! Linear assignment: maximize `trace(Rᵀ·S)` over permutation matrices `R`.

use crate::blockmat::Mat;
use crate::models::Permutation;

/// A square score matrix for the assignment `max_R trace(Rᵀ·score)`.
#[derive(Clone, Debug)]
pub struct AssignmentProblem {
    pub score: Mat,
}

impl AssignmentProblem {
    pub fn new(score: Mat) -> Self {
        assert_eq!(score.rows(), score.cols(), "assignment scores must be square");
        Self { score }
    }

    pub fn value(&self, p: &Permutation) -> f64 {
        p.word().iter().enumerate().map(|(r, &c)| self.score[(r, c)]).sum()
    }

    pub fn solve(&self) -> Permutation {
        hungarian(&self.score)
    }
}

/// Maximizer of `trace(Rᵀ·score) = Σ_r score[r, σ(r)]`.
///
/// Among (numerically) tied maximizers the lexicographically smallest word is
/// returned: rows are fixed in order, each to the smallest column that still
/// admits an optimal completion.
pub fn hungarian(score: &Mat) -> Permutation {
    let d = score.rows();
    assert_eq!(d, score.cols(), "assignment scores must be square");
    if d == 0 {
        return Permutation::identity(0);
    }
    let scale = score.max_abs().max(1.0);
    let eps = 1e-12 * scale * d as f64;

    let rows: Vec<usize> = (0..d).collect();
    let cols: Vec<usize> = (0..d).collect();
    let (best, assignment) = solve_subproblem(score, &rows, &cols);
    if d <= 1 {
        return Permutation::from_word(assignment).expect("assignment is a bijection");
    }

    let mut word = Vec::with_capacity(d);
    let mut free_cols = cols;
    let mut fixed_value = 0.0;
    for r in 0..d {
        let rest_rows: Vec<usize> = ((r + 1)..d).collect();
        let mut chosen = None;
        for (pos, &c) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            let rest = if rest_rows.is_empty() { 0.0 } else { solve_subproblem(score, &rest_rows, &rest_cols).0 };
            if fixed_value + score[(r, c)] + rest >= best - eps {
                chosen = Some(pos);
                break;
            }
        }
        // The optimal column for this row always qualifies; the fallback only
        // guards against rounding in the comparison above.
        let pos = chosen.unwrap_or_else(|| free_cols.iter().position(|&c| c == assignment[r]).unwrap_or(0));
        let c = free_cols.remove(pos);
        fixed_value += score[(r, c)];
        word.push(c);
    }
    Permutation::from_word(word).expect("assignment is a bijection")
}

/// Maximum-weight perfect matching between `rows` and `cols` (equal length),
/// by the shortest-augmenting-path method with potentials. Returns the optimal
/// value and, for each position in `rows`, the matched column label.
fn solve_subproblem(score: &Mat, rows: &[usize], cols: &[usize]) -> (f64, Vec<usize>) {
    let m = rows.len();
    debug_assert_eq!(m, cols.len());
    // Minimize cost = −score, 1-indexed with a virtual column 0.
    let cost = |i: usize, j: usize| -score[(rows[i - 1], cols[j - 1])];
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut match_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        match_of_col[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = match_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < min_to[j] {
                    min_to[j] = cur;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[match_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if match_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_of_col[j0] = match_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; m];
    for j in 1..=m {
        assignment[match_of_col[j] - 1] = cols[j - 1];
    }
    let value = assignment.iter().enumerate().map(|(i, &c)| score[(rows[i], c)]).sum();
    (value, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_permutation_scores() {
        assert_eq!(hungarian(&Mat::identity(4)), Permutation::identity(4));
        let p = Permutation::from_word(vec![3, 0, 2, 1]).unwrap();
        assert_eq!(hungarian(&p.to_mat()), p);
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        assert_eq!(hungarian(&Mat::zeros(3, 3)).word(), &[0, 1, 2]);
        // [1, 0, 2] and [2, 0, 1] both score 3.
        let s = Mat::from_rows(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0]]);
        assert_eq!(hungarian(&s).word(), &[1, 0, 2]);
        let flat = Mat::from_fn(4, 4, |_, _| 2.5);
        assert_eq!(hungarian(&flat), Permutation::identity(4));
    }

    #[test]
    fn negative_scores() {
        let s = Mat::from_rows(&[&[-5.0, -1.0], &[-1.0, -5.0]]);
        assert_eq!(hungarian(&s).word(), &[1, 0]);
    }

    #[test]
    fn single_element() {
        assert_eq!(hungarian(&Mat::from_rows(&[&[-3.0]])).word(), &[0]);
    }
}
