//! End-to-end acceptance checks. Run with `cargo test -p jointshape-acceptance`;
//! each criterion prints one `PASS` or `FAIL` line.
