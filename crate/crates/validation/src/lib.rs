//! Holds the `acceptance` test target: `cargo test -p jcbeat-validation --test acceptance [P1 P2 ...]`.
