//! Hosts the `acceptance` test target, which exercises every module of
//! `fekete-core` against the acceptance criteria and prints one line per
//! criterion. Run it with `cargo test -p fekete-validation --test acceptance`.
