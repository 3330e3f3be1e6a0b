//! Holds the `acceptance` test target, which checks the headline
//! behaviour of `monfg` end to end. Kept in its own package so it runs
//! after the faster unit and integration tests.
