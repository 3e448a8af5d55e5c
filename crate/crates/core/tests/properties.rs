use liftlab::gadgets::{embed_ip_to_ind, eval_composed, index_bit};
use liftlab::gf2::{dot, perp_of, relative_complement, sample_odd_weight, sample_subspace};
use liftlab::protocol::{execute, NaiveProtocol, Protocol};
use liftlab::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tuple_set(n: usize, p: usize) -> impl Strategy<Value = TupleSet> {
    proptest::collection::vec(any::<bool>(), 1usize << (n * p)).prop_map(move |keep| {
        let codes = keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(c, _)| c as u64);
        TupleSet::from_codes(n, p, codes).unwrap()
    })
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn complement_is_involution(n in 1usize..=12, d in 0usize..=12, seed in any::<u64>()) {
        let d = d.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = sample_subspace(n, d, &mut rng).unwrap();
        let perp = v.orthogonal_complement();
        prop_assert_eq!(v.dim() + perp.dim(), n);
        prop_assert_eq!(perp.orthogonal_complement(), v.clone());
        for x in v.basis() {
            for y in perp.basis() {
                prop_assert!(!dot(&x, &y).unwrap());
            }
        }
    }

    #[test]
    fn relative_complement_splits_a_perp(n in 2usize..=12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sample_odd_weight(n, &mut rng).unwrap();
        let perp = perp_of(&a);
        let d = (seed as usize) % n;
        let inner = sample_subspace(n - 1, d, &mut rng).unwrap();
        let images: Vec<u64> = perp.rows().iter().rev().copied().collect();
        let w = inner.map(&images, n);
        prop_assert!(w.is_subspace_of(&perp));
        let w2 = relative_complement(&w, &a).unwrap();
        prop_assert_eq!(w.dim() + w2.dim(), n - 1);
        prop_assert!(w2.is_subspace_of(&perp));
        for x in w.basis() {
            for y in w2.basis() {
                prop_assert!(!dot(&x, &y).unwrap());
            }
        }
    }

    #[test]
    fn restriction_keeps_thickness((n, p) in shape(), seed in any::<u64>(), tau_num in 1i128..=8, mask in any::<u64>()) {
        prop_assume!(p >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let codes: Vec<u64> = (0..1u64 << (n * p)).filter(|_| rng.gen_bool(0.7)).collect();
        let tau = Rational::new(tau_num, 8);
        let a = TupleSet::from_codes(n, p, codes).unwrap().prune_below(count_cutoff(&tau, 1 << n));
        prop_assume!(!a.is_empty());
        let i = (seed as usize) % p;
        let s = mask & ((1u64 << (1 << n)) - 1);
        let member = |v: u64| s >> v & 1 == 1;
        let r = a.restrict_by(i, member).unwrap();
        let rest = IndexSet::all(p).without(i);
        let proj = r.project(&rest).unwrap();
        prop_assert!(proj.is_thick(&tau));
        let column = a.project(&IndexSet::new([i])).unwrap();
        prop_assert_eq!(proj.is_empty(), !column.codes().iter().any(|&v| member(v)));
    }

    #[test]
    fn make_thick_contract((n, p) in shape(), a in (1usize..=3, 1usize..=3).prop_flat_map(|(n, p)| tuple_set(n, p)), phi_num in 1i128..=8) {
        let _ = (n, p);
        let phi = Rational::new(phi_num, 8);
        prop_assume!(!a.is_empty() && a.is_avg_thick(&phi));
        let delta = Rational::new(1, 2);
        let out = a.make_thick(&phi, &delta).unwrap();
        let target = delta * phi / Rational::from_integer(a.p() as i128);
        let cutoff = count_cutoff(&target, 1 << a.n());
        if !out.is_empty() {
            for i in 0..a.p() {
                prop_assert!(out.min_degree(i).unwrap() >= cutoff);
            }
        }
        prop_assert!(2 * out.len() >= a.len());
        prop_assert!(out.codes().iter().all(|&c| a.contains_code(c)));
    }

    #[test]
    fn naive_protocol_matches_composition(n in 2usize..=6, table in proptest::collection::vec(0i64..3, 8), seed in any::<u64>()) {
        use rand::Rng;
        let f = TruthTable::new(3, table.into_iter().map(Label::Int).collect()).unwrap();
        let g = Gadget::ip(n).unwrap();
        let proto = NaiveProtocol::optimal(&f, g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = PackedTuple::new(rng.gen_range(0..1u64 << (3 * n)), n, 3);
            let y = PackedTuple::new(rng.gen_range(0..1u64 << (3 * n)), n, 3);
            let (t, label) = execute(&proto, x, y);
            prop_assert!(t.len() <= proto.cost_bound());
            let expect = eval_composed(&f, &g, &x.to_bitvectors(), &y.to_bitvectors()).unwrap().unwrap();
            prop_assert_eq!(label, expect);
        }
    }

    #[test]
    fn ip_embeds_into_indexing(n in 1usize..=10, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = BitVector::new(rng.gen::<u64>() & ((1 << n) - 1), n).unwrap();
        let b = BitVector::new(rng.gen::<u64>() & ((1 << n) - 1), n).unwrap();
        let table = embed_ip_to_ind(std::slice::from_ref(&b)).unwrap();
        prop_assert_eq!(index_bit(&a, &table[0]).unwrap(), dot(&a, &b).unwrap());
    }
}
