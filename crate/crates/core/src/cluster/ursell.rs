//! Ursell functions: signed sums over connected graphs weighted by `zeta`.
//!
//! For a symmetric integer matrix `z` on `k` labelled items,
//! `U = sum_{G connected} prod_{(i,j) in G} (-z_ij)`. The sum over all graphs on a
//! vertex set `S` factorizes as `tot(S) = prod_{i<j in S} (1 - z_ij)`, and splitting
//! off the component of the least vertex gives
//! `conn(S) = tot(S) - sum_{min S in T, T != S} conn(T) tot(S \ T)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::polymer::{interaction_zeta, Polymer, SurfaceProvider};

/// Largest item count accepted by default.
pub const DEFAULT_URSELL_LIMIT: usize = 8;

/// Hard ceiling: the subset recursion is `3^k`.
pub const MAX_URSELL_LIMIT: usize = 18;

/// `U` for a `k x k` symmetric interaction matrix, exactly.
pub fn ursell_matrix(z: &[Vec<i32>], limit: usize) -> Result<i128> {
    let k = z.len();
    if k == 0 {
        return Err(Error::Invalid("Ursell function of an empty cluster".into()));
    }
    if k > limit.min(MAX_URSELL_LIMIT) {
        return Err(Error::Resource(format!("Ursell function of {k} items exceeds the limit of {limit}")));
    }
    if z.iter().any(|row| row.len() != k) {
        return Err(Error::Invalid("interaction matrix is not square".into()));
    }
    Ok(connected_sum(k, |i, j| z[i][j]))
}

pub(crate) fn connected_sum(k: usize, z: impl Fn(usize, usize) -> i32) -> i128 {
    let full = (1usize << k) - 1;
    let mut tot = vec![0i128; full + 1];
    tot[0] = 1;
    for s in 1..=full {
        let h = usize::BITS as usize - 1 - s.leading_zeros() as usize;
        let rest = s & !(1 << h);
        let mut t = tot[rest];
        let mut r = rest;
        while t != 0 && r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            t *= 1 - z(h, j) as i128;
        }
        tot[s] = t;
    }
    let mut conn = vec![0i128; full + 1];
    for s in 1..=full {
        let low = s & s.wrapping_neg();
        let others = s & !low;
        let mut acc = tot[s];
        // Proper subsets T of s containing `low`: T = low | sub, sub a proper subset of `others`.
        let mut sub = (others.wrapping_sub(1)) & others;
        if others != 0 {
            loop {
                let t = low | sub;
                let c = conn[t];
                if c != 0 {
                    acc -= c * tot[s & !t];
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & others;
            }
        }
        conn[s] = acc;
    }
    conn[full]
}

/// `U(C)` for a list of polymers (with repetitions).
pub fn ursell(items: &[Polymer], surfaces: &dyn SurfaceProvider, limit: usize) -> Result<i128> {
    let k = items.len();
    let mut z = vec![vec![0i32; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = interaction_zeta(&items[i], &items[j], surfaces)?;
            z[i][j] = v;
            z[j][i] = v;
        }
    }
    ursell_matrix(&z, limit)
}

/// `U(C^1) (-2)^{|C^2|} prod_omega deg omega` for clusters whose vortices are
/// minimal, pairwise non-adjacent and of multiplicity one. `deg omega` counts the
/// paths of `C^1` (with multiplicity) that interact with `omega`.
pub fn ursell_minimal_factorization(items: &[Polymer], surfaces: &dyn SurfaceProvider, limit: usize) -> Result<i128> {
    let paths: Vec<Polymer> = items.iter().filter(|p| p.is_path()).cloned().collect();
    let vortices: Vec<&Polymer> = items.iter().filter(|p| !p.is_path()).collect();
    for (i, v) in vortices.iter().enumerate() {
        let Polymer::Vortex(w) = v else { unreachable!() };
        if !w.is_minimal() {
            return Err(Error::Precondition("factorization needs minimal vortices".into()));
        }
        for u in &vortices[i + 1..] {
            if interaction_zeta(v, u, surfaces)? != 0 {
                return Err(Error::Precondition(
                    "factorization needs pairwise non-adjacent vortices of multiplicity one".into(),
                ));
            }
        }
    }
    if paths.is_empty() {
        return Ok(if vortices.len() == 1 { 1 } else { 0 });
    }
    let mut u = ursell(&paths, surfaces, limit)?;
    for v in &vortices {
        let mut deg = 0i128;
        for p in &paths {
            if interaction_zeta(v, p, surfaces)? != 0 {
                deg += 1;
            }
        }
        u *= -2 * deg;
    }
    Ok(u)
}

/// Memo of Ursell values keyed by the upper triangle of the interaction matrix.
#[derive(Default)]
pub(crate) struct UrsellCache {
    map: HashMap<Vec<i8>, i128>,
}

impl UrsellCache {
    pub(crate) fn get(&mut self, k: usize, z: impl Fn(usize, usize) -> i32) -> i128 {
        let mut key = Vec::with_capacity(k * (k + 1) / 2 + 1);
        key.push(k as i8);
        for i in 0..k {
            for j in i + 1..k {
                key.push(z(i, j) as i8);
            }
        }
        if let Some(&u) = self.map.get(&key) {
            return u;
        }
        let u = connected_sum(k, z);
        self.map.insert(key, u);
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_graphs(z: &[Vec<i32>]) -> i128 {
        let k = z.len();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let mut total = 0i128;
        for mask in 0u64..1 << pairs.len() {
            let mut parent: Vec<usize> = (0..k).collect();
            fn find(p: &mut [usize], x: usize) -> usize {
                let mut r = x;
                while p[r] != r {
                    r = p[r];
                }
                p[x] = r;
                r
            }
            let mut w = 1i128;
            for (b, &(i, j)) in pairs.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    w *= -(z[i][j] as i128);
                    let (a, c) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = c;
                }
            }
            let r = find(&mut parent, 0);
            if (0..k).all(|v| find(&mut parent, v) == r) {
                total += w;
            }
        }
        total
    }

    #[test]
    fn small_values() {
        assert_eq!(ursell_matrix(&[vec![1]], 8).unwrap(), 1);
        assert_eq!(ursell_matrix(&[vec![1, 1], vec![1, 1]], 8).unwrap(), -1);
        assert_eq!(ursell_matrix(&[vec![1, 2], vec![2, 1]], 8).unwrap(), -2);
        assert_eq!(ursell_matrix(&vec![vec![1; 3]; 3], 8).unwrap(), 2);
        assert_eq!(ursell_matrix(&[vec![1, 0], vec![0, 1]], 8).unwrap(), 0);
    }

    #[test]
    fn complete_graph_values() {
        // All pairs interacting: U = (-1)^{k-1} (k-1)!.
        let mut f = 1i128;
        for k in 1..=8usize {
            if k > 1 {
                f *= (k - 1) as i128;
            }
            let z = vec![vec![1; k]; k];
            let sign = if k % 2 == 1 { 1 } else { -1 };
            assert_eq!(ursell_matrix(&z, 8).unwrap(), sign * f);
        }
    }

    #[test]
    fn matches_graph_enumeration() {
        let mut seed = 12345u64;
        for _ in 0..200 {
            let k = 1 + (seed % 6) as usize;
            let mut z = vec![vec![1i32; k]; k];
            #[allow(clippy::needless_range_loop)]
            for i in 0..k {
                for j in i + 1..k {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let v = (seed >> 33) as i32 % 3;
                    z[i][j] = v;
                    z[j][i] = v;
                }
            }
            assert_eq!(ursell_matrix(&z, 8).unwrap(), all_graphs(&z));
        }
    }

    #[test]
    fn limit_is_enforced() {
        let z = vec![vec![1; 9]; 9];
        assert!(matches!(ursell_matrix(&z, 8), Err(Error::Resource(_))));
        assert!(ursell_matrix(&z, 9).is_ok());
    }
}
