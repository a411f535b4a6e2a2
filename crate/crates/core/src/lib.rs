//! Word equation satisfiability by local recompression.
//!
//! An equation `U = V` over letters and variables is solved by repeatedly
//! compressing pairs and blocks of letters on both sides at once, popping
//! letters out of variables whenever a pair or block crosses a variable
//! boundary. Each phase shortens a solution by a constant fraction, so a
//! satisfiable equation reaches a trivial one after logarithmically many
//! phases. All guesses are resolved by search; every answer is verified.

pub mod dioph;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod recompress;
pub mod solver;
