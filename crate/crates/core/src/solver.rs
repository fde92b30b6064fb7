//! Minimax search over the probability simplex.
//!
//! The neutralization solves minimize `max_y g(y, P)` over forecasts `P`.
//! A coarse simplex grid is scanned first; if no grid point already meets the
//! tolerance, the best starts are refined with a Nelder-Mead simplex walk on
//! the projected (m-1)-dimensional coordinates.

use crate::error::{Error, Result};
use crate::kernel::Simplex;

/// Grid resolution per coordinate, chosen by class count so the candidate
/// set stays tractable as the simplex dimension grows.
pub fn grid_resolution(m: usize) -> usize {
    match m {
        0..=3 => 32,
        4..=6 => 8,
        _ => 4,
    }
}

/// Enumerates the simplex grid with the given resolution, in lexicographic
/// order of the weight vectors.
pub fn simplex_grid(m: usize, resolution: usize) -> Vec<Simplex> {
    let mut out = Vec::new();
    let mut current = vec![0usize; m];
    fill(&mut out, &mut current, 0, resolution, m, resolution);
    out
}

fn fill(
    out: &mut Vec<Simplex>,
    current: &mut Vec<usize>,
    slot: usize,
    remaining: usize,
    m: usize,
    resolution: usize,
) {
    if slot == m - 1 {
        current[slot] = remaining;
        let weights: Vec<f64> = current.iter().map(|&c| c as f64 / resolution as f64).collect();
        out.push(Simplex::new(weights).expect("grid point is a valid simplex"));
        return;
    }
    for c in 0..=remaining {
        current[slot] = c;
        fill(out, current, slot + 1, remaining - c, m, resolution);
    }
}

fn dist2_to_uniform(p: &Simplex) -> f64 {
    let u = 1.0 / p.m() as f64;
    p.weights().iter().map(|w| (w - u) * (w - u)).sum()
}

fn lex_less(a: &Simplex, b: &Simplex) -> bool {
    for (u, v) in a.weights().iter().zip(b.weights()) {
        if u < v {
            return true;
        }
        if u > v {
            return false;
        }
    }
    false
}

/// Lifts a free (m-1)-vector onto the simplex: negative coordinates clamp to
/// zero and the total is renormalized.
fn project(free: &[f64], m: usize) -> Simplex {
    let mut w = vec![0.0; m];
    let mut head = 0.0;
    for (i, &v) in free.iter().enumerate() {
        w[i] = v.max(0.0);
        head += w[i];
    }
    w[m - 1] = (1.0 - head).max(0.0);
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Simplex::uniform(m);
    }
    Simplex::new(w.iter().map(|v| v / sum).collect()).unwrap_or_else(|_| Simplex::uniform(m))
}

/// Minimizes `objective` (a max-gain functional) over the simplex.
///
/// Returns the first forecast meeting `tol`. Grid points that already meet
/// the tolerance are preferred, closest to uniform first and lexicographic
/// order breaking exact ties.
pub fn minimize_max_gain<F>(m: usize, tol: f64, mut objective: F) -> Result<Simplex>
where
    F: FnMut(&Simplex) -> Result<f64>,
{
    let resolution = grid_resolution(m);
    let mut candidates = simplex_grid(m, resolution);
    let uniform = Simplex::uniform(m);
    if !candidates.iter().any(|p| p == &uniform) {
        candidates.push(uniform.clone());
    }

    let mut best: Option<(f64, usize)> = None;
    let mut winner: Option<usize> = None;
    let mut values = Vec::with_capacity(candidates.len());
    for (i, cand) in candidates.iter().enumerate() {
        let v = objective(cand)?;
        values.push(v);
        if v <= tol {
            let replace = match winner {
                None => true,
                Some(w) => {
                    let (dw, dc) = (dist2_to_uniform(&candidates[w]), dist2_to_uniform(cand));
                    dc < dw || (dc == dw && lex_less(cand, &candidates[w]))
                }
            };
            if replace {
                winner = Some(i);
            }
        }
        let better = match best {
            None => true,
            Some((bv, bi)) => {
                v < bv
                    || (v == bv
                        && dist2_to_uniform(cand) < dist2_to_uniform(&candidates[bi]))
            }
        };
        if better {
            best = Some((v, i));
        }
    }

    if let Some(i) = winner {
        return Ok(candidates[i].clone());
    }

    // Refine from the best grid starts.
    let mut starts: Vec<usize> = (0..candidates.len()).collect();
    starts.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                dist2_to_uniform(&candidates[a])
                    .partial_cmp(&dist2_to_uniform(&candidates[b]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let step = 1.0 / (2.0 * resolution as f64);
    let mut fallback: Option<(f64, Simplex)> = best.map(|(v, i)| (v, candidates[i].clone()));
    for &s in starts.iter().take(3) {
        let (v, p) = nelder_mead(m, &candidates[s], step, tol, 400, &mut objective)?;
        if v <= tol {
            return Ok(p);
        }
        if fallback.as_ref().map(|(fv, _)| v < *fv).unwrap_or(true) {
            fallback = Some((v, p));
        }
    }

    let (v, _) = fallback.expect("at least one candidate was evaluated");
    Err(Error::SolverFailure(format!(
        "no forecast met the neutrality tolerance {tol:.3e}; best residual gain {v:.3e} \
         (is the kernel forecast-continuous?)"
    )))
}

/// Nelder-Mead on the free (m-1) coordinates, projecting each probe onto the
/// simplex. Deterministic for fixed inputs.
fn nelder_mead<F>(
    m: usize,
    start: &Simplex,
    step: f64,
    tol: f64,
    max_iters: usize,
    objective: &mut F,
) -> Result<(f64, Simplex)>
where
    F: FnMut(&Simplex) -> Result<f64>,
{
    let dim = m - 1;
    let mut eval = |free: &[f64]| -> Result<(f64, Simplex)> {
        let p = project(free, m);
        let v = objective(&p)?;
        Ok((v, p))
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    vertices.push(start.weights()[..dim].to_vec());
    for d in 0..dim {
        let mut v = vertices[0].clone();
        v[d] = (v[d] + step).min(1.0);
        vertices.push(v);
    }
    let mut scores: Vec<(f64, Simplex)> = Vec::with_capacity(dim + 1);
    for v in &vertices {
        scores.push(eval(v)?);
    }

    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&a, &b| {
            scores[a]
                .0
                .partial_cmp(&scores[b].0)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let best = order[0];
        let worst = order[order.len() - 1];
        let second_worst = order[order.len() - 2];
        if scores[best].0 <= tol {
            return Ok(scores[best].clone());
        }

        let mut centroid = vec![0.0; dim];
        for &i in &order[..order.len() - 1] {
            for d in 0..dim {
                centroid[d] += vertices[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= (vertices.len() - 1) as f64;
        }

        let diam: f64 = vertices
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&vertices[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diam < 1e-14 {
            return Ok(scores[best].clone());
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&vertices[worst])
            .map(|(c, w)| c + (c - w))
            .collect();
        let (fr, pr) = eval(&reflect)?;

        if fr < scores[best].0 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&vertices[worst])
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let (fe, pe) = eval(&expand)?;
            if fe < fr {
                vertices[worst] = expand;
                scores[worst] = (fe, pe);
            } else {
                vertices[worst] = reflect;
                scores[worst] = (fr, pr);
            }
        } else if fr < scores[second_worst].0 {
            vertices[worst] = reflect;
            scores[worst] = (fr, pr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&vertices[worst])
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let (fc, pc) = eval(&contract)?;
            if fc < scores[worst].0 {
                vertices[worst] = contract;
                scores[worst] = (fc, pc);
            } else {
                // Shrink toward the best vertex.
                let anchor = vertices[best].clone();
                for i in 0..vertices.len() {
                    if i == best {
                        continue;
                    }
                    for d in 0..dim {
                        vertices[i][d] = anchor[d] + 0.5 * (vertices[i][d] - anchor[d]);
                    }
                    scores[i] = eval(&vertices[i].clone())?;
                }
            }
        }
    }

    let best = scores
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty simplex");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_count_binary() {
        assert_eq!(simplex_grid(2, 32).len(), 33);
        assert_eq!(simplex_grid(3, 32).len(), 561);
    }

    #[test]
    fn grid_points_are_valid() {
        for p in simplex_grid(3, 8) {
            let sum: f64 = p.weights().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn trivial_objective_returns_uniform() {
        let p = minimize_max_gain(3, 1e-6, |_| Ok(0.0)).unwrap();
        assert_eq!(p.weights(), Simplex::uniform(3).weights());
    }

    #[test]
    fn finds_quadratic_minimum() {
        // max-gain surrogate with a unique neutral point at (0.25, 0.75).
        let target = [0.25, 0.75];
        let p = minimize_max_gain(2, 1e-9, |q| {
            let d: f64 = q
                .weights()
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(d.sqrt() - 1e-12)
        })
        .unwrap();
        assert!((p.weight(1) - 0.75).abs() < 1e-9, "got {:?}", p.weights());
    }

    #[test]
    fn reports_failure_when_unattainable() {
        let err = minimize_max_gain(2, 1e-9, |_| Ok(1.0)).unwrap_err();
        assert!(matches!(err, Error::SolverFailure(_)));
    }
}
