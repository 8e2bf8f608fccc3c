//! Holds the `acceptance` test target (see `tests/`). It is kept in its
//! own package so it runs after the unit and property suites.
