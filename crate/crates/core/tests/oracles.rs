use std::collections::BTreeSet;

use itertools::Itertools;
use num::{BigRational, One, Zero};
use proptest::prelude::*;
use treeflag::flag::{enumerate_flags, flag_density, q_sigma, sunflower_density, TypeSigma};
use treeflag::predicate::{predicate_to_tree, tree_to_predicate, validate_predicate, TriplePredicate};
use treeflag::product::glue_product;
use treeflag::tree::{canonicalize, enumerate_trees, RawTree, Tree};

fn wedderburn_etherington(n: usize) -> Vec<u64> {
    let mut w = vec![0u64; n + 1];
    w[1] = 1;
    for m in 2..=n {
        let mut s = 0;
        for i in 1..m.div_ceil(2) {
            s += w[i] * w[m - i];
        }
        if m % 2 == 0 {
            let h = w[m / 2];
            s += h * (h + 1) / 2;
        }
        w[m] = s;
    }
    w
}

#[test]
fn enumeration_counts() {
    let w = wedderburn_etherington(15);
    for n in 1..=15 {
        let trees = enumerate_trees(n);
        assert_eq!(trees.len() as u64, w[n], "n = {n}");
        let distinct: BTreeSet<_> = trees.iter().map(|t| t.code().to_string()).collect();
        assert_eq!(distinct.len(), trees.len());
        assert!(trees.iter().all(|t| t.leaf_count() == n && t.is_unlabeled()));
    }
    assert_eq!(enumerate_trees(12).len(), 451);
}

fn isomorphic(a: &RawTree, b: &RawTree) -> bool {
    match (a.children.as_slice(), b.children.as_slice()) {
        ([], []) => a.label == b.label,
        ([a0, a1], [b0, b1]) => (isomorphic(a0, b0) && isomorphic(a1, b1)) || (isomorphic(a0, b1) && isomorphic(a1, b0)),
        _ => false,
    }
}

fn swap_children(t: &RawTree, bits: &mut impl Iterator<Item = bool>) -> RawTree {
    let mut children: Vec<RawTree> = t.children.iter().map(|c| swap_children(c, bits)).collect();
    if bits.next().unwrap_or(false) {
        children.reverse();
    }
    RawTree { label: t.label, children }
}

/// Random binary shape on `n` leaves with the first `k` leaves (DFS) labeled 1..k.
fn raw_tree(n: usize) -> BoxedStrategy<RawTree> {
    if n == 1 {
        return Just(RawTree::leaf()).boxed();
    }
    (1..n)
        .prop_flat_map(move |l| (raw_tree(l), raw_tree(n - l)))
        .prop_map(|(a, b)| RawTree::pair(a, b))
        .boxed()
}

fn label_leaves(t: &RawTree, labels: &[Option<usize>], next: &mut usize) -> RawTree {
    if t.children.is_empty() {
        let l = labels[*next];
        *next += 1;
        return RawTree { label: l, children: vec![] };
    }
    RawTree {
        label: None,
        children: t.children.iter().map(|c| label_leaves(c, labels, next)).collect(),
    }
}

fn labeled_tree(max_n: usize, max_k: usize) -> impl Strategy<Value = RawTree> {
    (2..=max_n)
        .prop_flat_map(move |n| (raw_tree(n), Just(n), if max_k >= n { n..=n } else { 0..=max_k }))
        .prop_flat_map(|(t, n, k)| {
            let slots: Vec<usize> = (0..n).collect();
            (Just(t), Just(n), Just(k), Just(slots).prop_shuffle())
        })
        .prop_map(|(t, n, k, perm)| {
            let mut labels = vec![None; n];
            for (i, &p) in perm.iter().take(k).enumerate() {
                labels[p] = Some(i + 1);
            }
            label_leaves(&t, &labels, &mut 0)
        })
}

/// Leaf-set clusters of a tree whose leaves carry labels 1..n.
fn clusters(t: &RawTree, out: &mut BTreeSet<u64>) -> u64 {
    let m = match t.label {
        Some(l) => 1u64 << (l - 1),
        None => t.children.iter().map(|c| clusters(c, out)).fold(0, |a, b| a | b),
    };
    out.insert(m);
    m
}

fn fully_labeled(t: &Tree) -> RawTree {
    let raw = t.to_raw().unwrap();
    let n = t.leaf_count();
    let labels: Vec<Option<usize>> = (1..=n).map(Some).collect();
    label_leaves(&raw, &labels, &mut 0)
}

#[test]
fn automorphisms_by_brute_force() {
    for n in 1..=6 {
        for t in enumerate_trees(n) {
            let mut cl = BTreeSet::new();
            clusters(&fully_labeled(&t), &mut cl);
            let count = (0..n)
                .permutations(n)
                .filter(|p| {
                    cl.iter().all(|&m| {
                        let img = (0..n).filter(|i| m >> i & 1 == 1).fold(0u64, |a, i| a | 1 << p[i]);
                        cl.contains(&img)
                    })
                })
                .count();
            assert_eq!(t.automorphism_count(), count as u128, "{t}");
        }
    }
}

#[test]
fn predicate_round_trip_and_mutations() {
    for n in 3..=7 {
        for t in enumerate_trees(n) {
            let lt = canonicalize(&fully_labeled(&t)).unwrap();
            let p = tree_to_predicate(&lt).unwrap();
            assert!(validate_predicate(&p).is_ok(), "{lt}");
            assert_eq!(predicate_to_tree(&p).unwrap(), lt);
            let triples = p.triples();
            for drop in 0..triples.len().min(12) {
                let mut ts = triples.clone();
                let (i, j, k) = ts.remove(drop);
                ts.retain(|&(a, b, c)| !(a == i && ((b, c) == (k, j))));
                let q = TriplePredicate::from_triples(n, &ts).unwrap();
                assert!(validate_predicate(&q).is_err(), "{lt} without ({i};{j},{k})");
            }
            let mut extra = p.clone();
            let (i, j, k) = triples[0];
            extra.set(j, i, k);
            extra.set(j, k, i);
            assert!(validate_predicate(&extra).is_err());
        }
    }
}

fn sigma_and_tree() -> impl Strategy<Value = Tree> {
    labeled_tree(7, 3).prop_map(|r| canonicalize(&r).unwrap())
}

/// The σ-type of a flag: its labeled leaves, relabeled 1..k.
fn type_of(t: &Tree) -> TypeSigma {
    TypeSigma::of_flag(t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_form_ignores_child_order(r in labeled_tree(9, 4), bits in proptest::collection::vec(any::<bool>(), 32)) {
        let swapped = swap_children(&r, &mut bits.into_iter());
        prop_assert!(isomorphic(&r, &swapped));
        prop_assert_eq!(canonicalize(&r).unwrap(), canonicalize(&swapped).unwrap());
    }

    #[test]
    fn equal_codes_iff_isomorphic(a in labeled_tree(6, 2), b in labeled_tree(6, 2)) {
        let same = canonicalize(&a).unwrap() == canonicalize(&b).unwrap();
        prop_assert_eq!(same, isomorphic(&a, &b));
    }

    #[test]
    fn restriction_composes(r in labeled_tree(9, 9), outer in any::<u16>(), inner in any::<u16>()) {
        let t = canonicalize(&r).unwrap();
        let labels = t.labels();
        prop_assume!(labels.len() == t.leaf_count());
        let a: Vec<usize> = labels.iter().copied().filter(|l| outer >> l & 1 == 1).collect();
        let b: Vec<usize> = a.iter().copied().filter(|l| inner >> l & 1 == 1).collect();
        prop_assume!(!b.is_empty());
        let mid = t.induced_by_labels(&a).unwrap();
        prop_assert_eq!(mid.induced_by_labels(&b).unwrap(), t.induced_by_labels(&b).unwrap());
    }

    #[test]
    fn densities_normalize_and_chain(t in sigma_and_tree()) {
        let sigma = type_of(&t);
        let k = sigma.size();
        let n = t.leaf_count();
        for m in k..=n {
            let level: Vec<Tree> = enumerate_flags(&sigma, m - k);
            let total: BigRational = level.iter().map(|s| flag_density(s, &t).unwrap()).sum();
            prop_assert_eq!(total, BigRational::one());
            for small in k..=m {
                for s in enumerate_flags(&sigma, small - k) {
                    let chained: BigRational = level
                        .iter()
                        .map(|r| flag_density(&s, r).unwrap() * flag_density(r, &t).unwrap())
                        .sum();
                    prop_assert_eq!(chained, flag_density(&s, &t).unwrap());
                }
            }
        }
    }

    #[test]
    fn sunflower_pairs_are_complete(t in sigma_and_tree(), a in 0usize..3, b in 0usize..3) {
        let sigma = type_of(&t);
        let extra = t.leaf_count() - sigma.size();
        prop_assume!(a + b <= extra);
        let mut total = BigRational::zero();
        for s1 in enumerate_flags(&sigma, a) {
            for s2 in enumerate_flags(&sigma, b) {
                total += sunflower_density(&s1, &s2, &t).unwrap();
            }
        }
        prop_assert_eq!(total, BigRational::one());
    }

    #[test]
    fn glue_commutes(t in sigma_and_tree(), a in 0usize..3, b in 0usize..3) {
        let sigma = type_of(&t);
        let f1 = enumerate_flags(&sigma, a);
        let f2 = enumerate_flags(&sigma, b);
        let n = sigma.size() + a + b;
        for (x, y) in f1.iter().cartesian_product(&f2).take(6) {
            prop_assert_eq!(glue_product(x, y, n).unwrap(), glue_product(y, x, n).unwrap());
        }
    }
}

#[test]
fn normalizer_by_brute_force() {
    for n in 1..=6 {
        for base in enumerate_trees(n) {
            let shape = base.shape();
            for k in 0..=n.min(3) {
                let total: u64 = (n - k + 1..=n).map(|x| x as u64).product();
                let mut seen: BTreeSet<Tree> = BTreeSet::new();
                let mut hits = std::collections::BTreeMap::<Tree, u64>::new();
                for pos in (0..n).permutations(k) {
                    let mut labels = vec![None; n];
                    for (i, &p) in pos.iter().enumerate() {
                        labels[p] = Some(i + 1);
                    }
                    let f = shape.induced_relabeled(shape.full_mask(), &labels);
                    seen.insert(f.clone());
                    *hits.entry(f).or_default() += 1;
                }
                for f in seen {
                    let expect = BigRational::new(hits[&f].into(), total.into());
                    assert_eq!(q_sigma(&f), expect, "{f}");
                }
            }
        }
    }
}
