use gbn::corpus::{split_tokens, train_size};
use gbn::{RngStream, SparseCountMatrix};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = SparseCountMatrix> {
    (1usize..15, 1usize..10).prop_flat_map(|(v, j)| {
        prop::collection::vec(prop::collection::vec((0..v, 1u32..9), 0..8), j).prop_map(move |docs| {
            let mut dedup: Vec<Vec<(usize, u32)>> = Vec::new();
            for d in docs {
                let mut d = d;
                d.sort();
                d.dedup_by_key(|x| x.0);
                dedup.push(d);
            }
            SparseCountMatrix::from_docs(v, &dedup).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn uci_round_trip(m in matrix()) {
        let mut buf = Vec::new();
        m.write_uci(&mut buf).unwrap();
        let back = SparseCountMatrix::read_uci(buf.as_slice()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn split_conserves_tokens(m in matrix(), fraction in 0.0f64..=1.0, seed: u64) {
        let mut rng = RngStream::new(seed);
        let split = split_tokens(&m, fraction, &mut rng).unwrap();
        for j in 0..m.n_docs() {
            prop_assert_eq!(split.train.doc_total(j), train_size(m.doc_total(j), fraction));
            for v in 0..m.n_terms() {
                prop_assert_eq!(split.train.get(v, j) + split.heldout.get(v, j), m.get(v, j));
            }
        }
    }

    #[test]
    fn binarize_is_idempotent(m in matrix()) {
        let b = m.binarize();
        prop_assert!(b.is_binary());
        prop_assert_eq!(b.binarize(), b.clone());
        prop_assert_eq!(b.nnz(), m.nnz());
    }
}

#[test]
fn malformed_uci_reports_line() {
    let text = "2\n3\n2\n1 1 4\n1 x 2\n";
    let err = SparseCountMatrix::read_uci(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 5"), "{err}");
}
