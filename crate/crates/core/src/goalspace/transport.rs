//! Exact min-cost transportation by successive shortest paths.
//!
//! Dense formulation for small problems: sources and sinks form a complete
//! bipartite graph with uncapacitated forward arcs; residual reverse arcs
//! exist where flow is positive. Dijkstra runs on reduced costs with node
//! potentials, so every reduced cost stays nonnegative.

use alloc::vec::Vec;

const MASS_EPS: f64 = 1e-15;

/// Minimal total cost to ship `supply` onto `demand`. Both lists are
/// `(node id, mass)`; `cost` is evaluated on node ids. Masses are assumed
/// to balance up to rounding.
pub(crate) fn min_cost<C>(supply: &[(usize, f64)], demand: &[(usize, f64)], cost: C) -> f64
where
    C: Fn(usize, usize) -> f64,
{
    let ns = supply.len();
    let nt = demand.len();
    let c: Vec<f64> = supply
        .iter()
        .flat_map(|(i, _)| demand.iter().map(|(j, _)| cost(*i, *j)).collect::<Vec<_>>())
        .collect();
    let mut flow = alloc::vec![0.0; ns * nt];
    let mut rem_s: Vec<f64> = supply.iter().map(|(_, m)| *m).collect();
    let mut rem_t: Vec<f64> = demand.iter().map(|(_, m)| *m).collect();

    // potentials: sources 0..ns, sinks ns..ns+nt, virtual super-source at n
    let n = ns + nt;
    let mut pot: Vec<f64> = alloc::vec![0.0; n + 1];
    let mut dist = alloc::vec![f64::INFINITY; n];
    let mut prev = alloc::vec![usize::MAX; n];
    let mut done = alloc::vec![false; n];

    loop {
        let left_s: f64 = rem_s.iter().sum();
        let left_t: f64 = rem_t.iter().sum();
        if left_s <= MASS_EPS || left_t <= MASS_EPS {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..ns {
            if rem_s[i] > MASS_EPS {
                dist[i] = (pot[n] - pot[i]).max(0.0);
            }
        }
        for _ in 0..n {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < ns {
                for j in 0..nt {
                    let v = ns + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (c[u * nt + j] + pot[u] - pot[v]).max(0.0);
                    if best + rc < dist[v] {
                        dist[v] = best + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - ns;
                for i in 0..ns {
                    if done[i] || flow[i * nt + j] <= MASS_EPS {
                        continue;
                    }
                    let rc = (-c[i * nt + j] + pot[u] - pot[i]).max(0.0);
                    if best + rc < dist[i] {
                        dist[i] = best + rc;
                        prev[i] = u;
                    }
                }
            }
        }

        // cheapest reachable sink with unmet demand (true distance = dist + pot)
        let mut target = usize::MAX;
        let mut best = f64::INFINITY;
        for (j, &rem) in rem_t.iter().enumerate().take(nt) {
            let v = ns + j;
            if rem > MASS_EPS && dist[v].is_finite() {
                let d = dist[v] + pot[v];
                if d < best {
                    best = d;
                    target = v;
                }
            }
        }
        if target == usize::MAX {
            break;
        }

        let mut delta = rem_t[target - ns];
        let mut v = target;
        let origin = loop {
            let u = prev[v];
            if u == usize::MAX {
                break v;
            }
            if u >= ns {
                // reverse arc sink u -> source v
                delta = delta.min(flow[v * nt + (u - ns)]);
            }
            v = u;
        };
        delta = delta.min(rem_s[origin]);

        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < ns {
                flow[u * nt + (v - ns)] += delta;
            } else {
                let f = &mut flow[v * nt + (u - ns)];
                *f -= delta;
                if *f < MASS_EPS {
                    *f = 0.0;
                }
            }
            v = u;
        }
        rem_s[origin] -= delta;
        rem_t[target - ns] -= delta;

        let max_d = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for (p, d) in pot.iter_mut().zip(&dist) {
            *p += if d.is_finite() { *d } else { max_d };
        }
        // super-source sits at distance 0 from itself
    }

    flow.iter().zip(&c).map(|(f, c)| f * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_2x2(s: [f64; 2], t: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
        // one free variable x = flow(0 -> 0); enumerate its feasible range finely
        let lo = (s[0] - t[1]).max(0.0);
        let hi = s[0].min(t[0]);
        let cost = |x: f64| {
            let f01 = s[0] - x;
            let f10 = t[0] - x;
            let f11 = s[1] - f10;
            x * c[0][0] + f01 * c[0][1] + f10 * c[1][0] + f11 * c[1][1]
        };
        // linear objective: optimum at an endpoint
        cost(lo).min(cost(hi))
    }

    #[test]
    fn matches_two_by_two_enumeration() {
        let cases = [
            ([0.3, 0.2], [0.1, 0.4], [[1.0, 2.0], [3.0, 0.5]]),
            ([0.5, 0.5], [0.5, 0.5], [[2.0, 1.0], [1.0, 2.0]]),
            ([0.9, 0.1], [0.25, 0.75], [[0.0, 4.0], [1.0, 1.0]]),
        ];
        for (s, t, c) in cases {
            let got = min_cost(&[(0, s[0]), (1, s[1])], &[(0, t[0]), (1, t[1])], |i, j| c[i][j]);
            let want = brute_force_2x2(s, t, c);
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn rerouting_through_reverse_arcs() {
        // greedy would ship source 0 to sink 0 first; optimum needs a reroute
        let c = [[1.0, 2.0], [1.0, 10.0]];
        let got = min_cost(&[(0, 1.0), (1, 1.0)], &[(0, 1.0), (1, 1.0)], |i, j| c[i][j]);
        assert!((got - 3.0).abs() < 1e-14);
    }
}
