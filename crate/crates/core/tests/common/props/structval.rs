use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::chem::parse_smiles;
use pwrules::structval::{
    fraction_within, locate_word_in, mann_whitney_exact, mann_whitney_normal, mann_whitney_u, pair_distance,
    ChainModel, LigandModel, Point, Residue,
};

use super::{check, ensure, PropOutcome, CASES};

const SUITE: &str = "structval";

/// One- and two-sided tails of U_a over every relabelling of the pooled
/// sample into groups of the original sizes, counting pairs directly.
pub fn brute_force_tails(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, na) = (pooled.len(), a.len());
    let u_of = |in_a: &[bool]| -> f64 {
        let mut u = 0.0;
        for i in 0..n {
            for j in 0..n {
                if in_a[i] && !in_a[j] {
                    u += if pooled[i] > pooled[j] {
                        1.0
                    } else if pooled[i] == pooled[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        u
    };
    let observed: Vec<bool> = (0..n).map(|i| i < na).collect();
    let u_obs = u_of(&observed);
    let (mut total, mut le, mut ge) = (0.0, 0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let in_a: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let u = u_of(&in_a);
        total += 1.0;
        if u <= u_obs {
            le += 1.0;
        }
        if u >= u_obs {
            ge += 1.0;
        }
    }
    let (less, greater) = (le / total, ge / total);
    (less, greater, (2.0 * less.min(greater)).min(1.0))
}

/// Values with frequent ties when `tied`.
pub fn sample(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tied {
                f64::from(rng.random_range(0..5))
            } else {
                rng.random_range(0.0..20.0)
            }
        })
        .collect()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    // unit quaternion from four normals
    let mut q = [0.0f64; 4];
    loop {
        for v in &mut q {
            *v = rng.random_range(-1.0..1.0);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn apply(r: &[[f64; 3]; 3], t: &Point, p: &Point) -> Point {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i];
    }
    out
}

fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> Point {
    [
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    ]
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(SUITE, "pair distance is invariant under rigid motion", CASES, |rng| {
            let seq: Vec<char> = "DTGADGKLMDTGAD".chars().collect();
            let chain = ChainModel {
                chain_id: 'A',
                residues: seq
                    .iter()
                    .enumerate()
                    .map(|(i, &code)| Residue {
                        number: i as i32 + 1,
                        insertion: None,
                        code,
                        ca: random_point(rng, 20.0),
                    })
                    .collect(),
            };
            let molecule = parse_smiles("c1ccccc1CCO").unwrap();
            let ligand = LigandModel {
                coords: (0..molecule.atom_count()).map(|_| random_point(rng, 20.0)).collect(),
                molecule,
            };
            let sites = locate_word_in("DTGAD", std::slice::from_ref(&chain));
            let frag = vec![vec![0, 1, 2, 3, 4, 5], vec![6, 7, 8]];
            let d0 = pair_distance(&sites, &frag, std::slice::from_ref(&chain), &ligand).map_err(|e| e.to_string())?;
            let (rot, t) = (random_rotation(rng), random_point(rng, 100.0));
            let mut moved_chain = chain.clone();
            moved_chain
                .residues
                .iter_mut()
                .for_each(|r| r.ca = apply(&rot, &t, &r.ca));
            let moved_ligand = LigandModel {
                coords: ligand.coords.iter().map(|p| apply(&rot, &t, p)).collect(),
                molecule: ligand.molecule.clone(),
            };
            let d1 = pair_distance(&sites, &frag, std::slice::from_ref(&moved_chain), &moved_ligand)
                .map_err(|e| e.to_string())?;
            ensure((d0 - d1).abs() <= 1e-6, || format!("{d0} vs {d1}"))
        }),
        check(SUITE, "U_a + U_b = n_a n_b", CASES, |rng| {
            let (na, nb) = (rng.random_range(1..=30), rng.random_range(1..=30));
            let tied = rng.random_bool(0.5);
            let (a, b) = (sample(rng, na, tied), sample(rng, nb, tied));
            for r in [mann_whitney_u(&a, &b), mann_whitney_normal(&a, &b)] {
                let r = r.map_err(|e| e.to_string())?;
                ensure((r.u_a + r.u_b - (na * nb) as f64).abs() <= 1e-9, || {
                    format!("{} + {} vs {}", r.u_a, r.u_b, na * nb)
                })?;
            }
            Ok(())
        }),
        check(
            SUITE,
            "fraction within a distance is monotone in the threshold",
            CASES,
            |rng| {
                let (n, tied) = (rng.random_range(1..=50), rng.random_bool(0.5));
                let v = sample(rng, n, tied);
                let t1 = rng.random_range(0.0..25.0);
                let t2 = t1 + rng.random_range(0.0..10.0);
                let (f1, f2) = (fraction_within(&v, t1).unwrap(), fraction_within(&v, t2).unwrap());
                ensure(f1 <= f2, || format!("{t1}: {f1} > {t2}: {f2}"))
            },
        ),
        check(SUITE, "exact and normal p-values agree at n = 8", CASES, |rng| {
            let (a, b) = (sample(rng, 8, false), sample(rng, 8, false));
            let e = mann_whitney_exact(&a, &b).map_err(|e| e.to_string())?;
            let n = mann_whitney_normal(&a, &b).map_err(|e| e.to_string())?;
            ensure((e.p_two_sided - n.p_two_sided).abs() <= 0.02, || {
                format!("exact {} vs normal {}", e.p_two_sided, n.p_two_sided)
            })
        }),
        check(SUITE, "exact p-values equal relabelling enumeration", CASES, |rng| {
            let (na, nb) = (rng.random_range(1..=7), rng.random_range(1..=7));
            let tied = rng.random_bool(0.5);
            let (a, b) = (sample(rng, na, tied), sample(rng, nb, tied));
            let (less, greater, two) = brute_force_tails(&a, &b);
            let r = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
            ensure(
                (r.p_less - less).abs() <= 1e-12
                    && (r.p_greater - greater).abs() <= 1e-12
                    && (r.p_two_sided - two).abs() <= 1e-12,
                || format!("{r:?} vs ({less}, {greater}, {two})"),
            )
        }),
    ]
}
