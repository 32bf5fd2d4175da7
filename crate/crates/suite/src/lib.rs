//! Holds the `acceptance` test target, which checks the solver end to end
//! against analytic values. Run it with `cargo test -p infwillmore-suite`.
