//! Holds the `acceptance` test target only. Run it with
//! `cargo test -p rezone-acceptance --test acceptance`.
