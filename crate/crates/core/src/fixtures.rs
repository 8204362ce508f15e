//! Small reference models used by tests, examples and the benchmark.

use crate::model::{Model, ModelBuilder};

const EMPLOYEES: [&str; 4] = ["alice", "bob", "dave", "eve"];

fn employee_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match EMPLOYEES.get(i) {
            Some(name) => (*name).to_string(),
            None => format!("e{}", i + 1),
        })
        .collect()
}

/// Qual(T) -> Train(E,T) -> Comp(E) -> Rev with `employees` employees and
/// `programs` training programs. Every parfactor is row-normalised over its
/// child.
pub fn employee_model(employees: usize, programs: usize) -> Model {
    let mut b = ModelBuilder::new();
    b.domain("E", employee_names(employees)).unwrap();
    b.domain("T", (1..=programs).map(|i| format!("t{i}"))).unwrap();
    b.range("tri", ["low", "medium", "high"]).unwrap();
    b.range("bool", ["false", "true"]).unwrap();
    b.prv("Qual", &["T"], "tri").unwrap();
    b.prv("Train", &["E", "T"], "bool").unwrap();
    b.prv("Comp", &["E"], "tri").unwrap();
    b.prv("Rev", &[], "tri").unwrap();
    b.parfactor("g1", &["Qual"], Some("Qual"), None, vec![0.2, 0.5, 0.3])
        .unwrap();
    b.parfactor(
        "g2",
        &["Qual", "Train"],
        Some("Train"),
        None,
        vec![0.8, 0.2, 0.6, 0.4, 0.3, 0.7],
    )
    .unwrap();
    b.parfactor(
        "g3",
        &["Train", "Comp"],
        Some("Comp"),
        None,
        vec![0.5, 0.3, 0.2, 0.1, 0.4, 0.5],
    )
    .unwrap();
    b.parfactor(
        "g4",
        &["Comp", "Rev"],
        Some("Rev"),
        None,
        vec![0.6, 0.3, 0.1, 0.3, 0.4, 0.3, 0.1, 0.3, 0.6],
    )
    .unwrap();
    b.build().expect("employee model is valid")
}

/// Propositional chain A -> B -> C with hand-set tables.
pub fn chain3() -> Model {
    let mut b = ModelBuilder::new();
    b.range("bool", ["false", "true"]).unwrap();
    b.prv("A", &[], "bool").unwrap();
    b.prv("B", &[], "bool").unwrap();
    b.prv("C", &[], "bool").unwrap();
    b.parfactor("fa", &["A"], Some("A"), None, vec![3.0, 1.0]).unwrap();
    b.parfactor("fb", &["A", "B"], Some("B"), None, vec![2.0, 1.0, 1.0, 3.0])
        .unwrap();
    b.parfactor("fc", &["B", "C"], Some("C"), None, vec![1.0, 4.0, 2.0, 2.0])
        .unwrap();
    b.build().expect("chain model is valid")
}

/// Text of the employee model with four employees and two programs.
pub const EMPLOYEES_PCFG: &str = include_str!("../fixtures/employees.pcfg");

/// Benchmark template: one training program, `E` sized by the benchmark.
/// Every random variable has exactly one parent factor, so the grounding
/// converts to a Bayesian network without merging factors.
pub const SCALING_TEMPLATE: &str = include_str!("../fixtures/scaling.pcfg");

/// Default query for [`SCALING_TEMPLATE`].
pub const SCALING_QUERY: &str = "P(Comp(e1) | do(Train(e1,t1)=true))";
