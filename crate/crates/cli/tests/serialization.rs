use proptest::prelude::*;
use serde::{de::DeserializeOwned, Serialize};

use qmarginal_cli::doc::{
    Bounds, ChannelBounds, ChannelDoc, ChannelInstanceDoc, ChannelReductionDoc, ConstraintDoc,
    InstanceDoc, Kind, KrausDoc, LocalChannelDoc, MatrixDoc, Settings, SolutionDoc, StateDoc,
    TraceRow,
};

fn roundtrip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(x: &T) -> Result<(), TestCaseError> {
    let text = serde_json::to_string_pretty(x).unwrap();
    let back: T = serde_json::from_str(&text).unwrap();
    prop_assert_eq!(&back, x);
    // the re-emitted text is identical, so floats survive bit for bit
    prop_assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    Ok(())
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1.0f64..1.0,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

fn matrix() -> impl Strategy<Value = MatrixDoc> {
    (1usize..4, 1usize..4).prop_flat_map(|(r, c)| {
        let rows = move || prop::collection::vec(prop::collection::vec(finite(), c), r);
        (rows(), rows()).prop_map(|(re, im)| MatrixDoc { re, im })
    })
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 0..4)
}

fn kind() -> impl Strategy<Value = Option<Kind>> {
    prop::option::of(prop_oneof![Just(Kind::Qudit), Just(Kind::Fermionic), Just(Kind::Bosonic)])
}

fn trace_rows() -> impl Strategy<Value = Vec<TraceRow>> {
    prop::collection::vec(
        (0usize..64, 0usize..64, finite()).prop_map(|(rank_before, rank_after, lambda)| TraceRow {
            rank_before,
            rank_after,
            lambda,
        }),
        0..4,
    )
}

fn settings() -> impl Strategy<Value = Settings> {
    (finite(), finite(), any::<usize>(), any::<u64>(), any::<bool>()).prop_map(
        |(tol, rank_tol, max_iters, seed, reduce)| Settings {
            tol,
            rank_tol,
            max_iters,
            seed,
            reduce,
        },
    )
}

fn channel() -> impl Strategy<Value = ChannelDoc> {
    (dims(), dims(), matrix()).prop_map(|(in_dims, out_dims, choi)| ChannelDoc {
        in_dims,
        out_dims,
        choi,
    })
}

fn kraus() -> impl Strategy<Value = KrausDoc> {
    (dims(), dims(), prop::collection::vec(matrix(), 0..3)).prop_map(|(in_dims, out_dims, operators)| KrausDoc {
        in_dims,
        out_dims,
        operators,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_roundtrip(m in matrix()) {
        roundtrip(&m)?;
    }

    #[test]
    fn instance_roundtrip(
        kind in kind(),
        dims in dims(),
        particles in prop::option::of(0usize..10),
        d in prop::option::of(0usize..10),
        k in prop::option::of(0usize..10),
        constraints in prop::collection::vec((dims(), matrix()), 0..3),
    ) {
        let doc = InstanceDoc {
            kind,
            dims,
            particles,
            d,
            k,
            constraints: constraints
                .into_iter()
                .map(|(subsystems, matrix)| ConstraintDoc { subsystems, matrix })
                .collect(),
        };
        roundtrip(&doc)?;
    }

    #[test]
    fn state_roundtrip(
        kind in kind(),
        dims in dims(),
        particles in prop::option::of(0usize..10),
        matrix in matrix(),
        rank in any::<usize>(),
        eigenvalues in prop::collection::vec(finite(), 0..5),
    ) {
        roundtrip(&StateDoc { kind, dims, particles, d: None, matrix, rank, eigenvalues })?;
    }

    #[test]
    fn solution_roundtrip(
        matrix in matrix(),
        rank in 0usize..100,
        eigenvalues in prop::collection::vec(finite(), 0..5),
        residuals in prop::collection::vec(finite(), 0..5),
        trace in trace_rows(),
        theorem1 in 0usize..100,
        barvinok in 0usize..100,
        settings in settings(),
    ) {
        let doc = SolutionDoc {
            matrix,
            rank,
            eigenvalues,
            residuals,
            trace,
            bounds: Bounds { theorem1, barvinok, achieved: rank },
            settings,
        };
        roundtrip(&doc)?;
    }

    #[test]
    fn channel_docs_roundtrip(
        ch in channel(),
        k in kraus(),
        locals in prop::collection::vec((dims(), dims(), matrix()), 0..3),
        residuals in prop::collection::vec(finite(), 0..3),
        tp_deviation in finite(),
        trace in trace_rows(),
        settings in settings(),
    ) {
        roundtrip(&ch)?;
        roundtrip(&k)?;
        let ci = ChannelInstanceDoc {
            in_dims: ch.in_dims.clone(),
            out_dims: ch.out_dims.clone(),
            locals: locals
                .into_iter()
                .map(|(in_subsystems, out_subsystems, choi)| LocalChannelDoc { in_subsystems, out_subsystems, choi })
                .collect(),
        };
        roundtrip(&ci)?;
        let red = ChannelReductionDoc {
            channel: ch,
            kraus_count: k.operators.len(),
            kraus: k,
            bounds: ChannelBounds { local: 5, tp_augmented: 6, achieved: 4 },
            sub_channel_residuals: residuals,
            tp_deviation,
            trace,
            settings,
        };
        roundtrip(&red)?;
    }
}
