//! Holds the acceptance test target; the library is empty.
