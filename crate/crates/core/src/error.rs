use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not squarefree")]
    NonSquarefree(i64),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("the field has no units of infinite order")]
    NoUnits,
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("principality search exceeded its budget of {bound} candidates")]
    SearchBudgetExceeded { bound: u64 },
    #[error("residue field of size {size} exceeds the table budget {budget}")]
    TableBudgetExceeded { size: u64, budget: u64 },
    #[error("prime above {0} is ramified")]
    RamifiedPrime(u64),
    #[error("brute-force cost {cost} exceeds budget {budget}")]
    CostBudgetExceeded { cost: u64, budget: u64 },
    #[error("enumeration would exceed the cap of {cap} characters")]
    BudgetExceeded { cap: usize },
    #[error("ideal is not coprime to the excluded set")]
    NotCoprime,
    #[error("pole of the gamma factor at s = {0}")]
    PoleAt(String),
    #[error("character has degree 0 (trivial on the residue field)")]
    TrivialCharacter,
    #[error("ideal is not principal")]
    NotPrincipal,
    #[error("series does not converge: {0}")]
    NonConvergent(String),
    #[error("s = {0} lies outside the strip of definition")]
    StripViolation(String),
    #[error("contour at sigma = {sigma} is closer than {gap} to the pole line {pole}")]
    ContourTooClose { sigma: f64, pole: f64, gap: f64 },
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("truncation insufficient: certified tail {tail:e} exceeds budget {budget:e}")]
    TruncationInsufficient { tail: f64, budget: f64 },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
