//! Text format for models and queries.
//!
//! ```text
//! domain E = {alice, bob}
//! range bool = {false, true}
//! prv Train(E) : bool
//! parfactor g (Train(E)) child Train(E) constraint {(bob)} {
//!   (false) = 0.4;
//!   (true) = 0.6;
//! }
//! ```
//!
//! Template domains such as `domain E = {e@1..@d}` expand per run with the
//! parameter bound in [`ParseOptions::params`].

mod lexer;
mod model;
mod query;
mod serialize;

pub use model::{parse_document, parse_model, parse_model_with, ModelDocument, ParseOptions};
pub use query::{parse_dsep_query, parse_query};
pub use serialize::{format_g, serialize_distribution, serialize_model, serialize_query};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::intervention::{mutilate, split_on_dos};

    #[test]
    fn fixture_round_trip_is_stable() {
        let m = parse_model(fixtures::EMPLOYEES_PCFG).unwrap();
        let once = serialize_model(&m);
        let twice = serialize_model(&parse_model(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn mutilated_models_keep_their_flag() {
        let m = fixtures::employee_model(4, 2);
        let q = parse_query(&m, "P(Rev | do(Train(bob,t1)=true))").unwrap();
        let (split, _) = split_on_dos(&m, &q.dos).unwrap();
        let mutilated = mutilate(&split, &q.dos).unwrap();
        let text = serialize_model(&mutilated);
        assert!(text.contains("@mutilated"));
        assert!(text.contains("constraint {(bob, t1)}"));
        let back = parse_model(&text).unwrap();
        assert_eq!(back.parfactors(), mutilated.parfactors());
        assert_eq!(serialize_model(&back), text);
    }
}
