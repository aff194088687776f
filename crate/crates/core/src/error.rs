use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("transition matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("transition matrix entry ({row},{col}) = {value} is not 0 or 1")]
    NotBinary { row: usize, col: usize, value: i64 },
    #[error("transition matrix is empty")]
    EmptyMatrix,
    #[error("symbol {symbol} has an empty {kind}")]
    EmptyRowOrColumn { symbol: usize, kind: &'static str },
    #[error("transition matrix is not primitive: {reason}")]
    NotPrimitive { reason: String },
    #[error("alphabet has {names} names but the matrix has {size} rows")]
    AlphabetMismatch { names: usize, size: usize },
    #[error("duplicate or empty symbol name {0:?}")]
    BadSymbolName(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("word {word} is not admissible")]
    InadmissibleWord { word: String },
    #[error("concatenation {word} is not admissible")]
    InadmissibleConcatenation { word: String },
    #[error("point representation is not admissible: {0}")]
    InadmissiblePoint(String),
    #[error("invalid point representation: {0}")]
    InvalidPoint(String),
    #[error("bracket undefined: x_0 = {x0} but y_0 = {y0}")]
    BracketUndefined { x0: usize, y0: usize },
    #[error("continuation has {got} symbols, need at least {need}")]
    ContinuationTooShort { got: usize, need: usize },
    #[error("word has length {got}, need at least {need}")]
    WordTooShort { got: usize, need: usize },
    #[error("potential memory must be positive")]
    ZeroMemory,
    #[error("potential memory {memory} exceeds block length {block}")]
    MemoryTooLarge { memory: usize, block: usize },
    #[error("potential table has no entry for admissible word {word}")]
    IncompleteTable { word: String },
    #[error("potential value {value} for word {word} is not finite or exceeds 700 in magnitude")]
    BadPotentialValue { word: String, value: f64 },
    #[error("potential table is too large ({0} entries)")]
    TableTooLarge(u128),
    #[error("potentials live on different alphabets")]
    AlphabetSizeMismatch,
    #[error("power iteration did not converge in {max_iter} iterations (residual {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },
    #[error("transition matrix is not stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("measure charges the forbidden transition {from} -> {to}")]
    IncompatibleSupport { from: usize, to: usize },
    #[error("Markov chain has no unique stationary distribution")]
    NoUniqueStationary,
    #[error("chain does not match the system: {0}")]
    ChainMismatch(String),
    #[error("past word {word} is not admissible or too short")]
    InadmissiblePast { word: String },
    #[error("word does not start at the leaf state: {0}")]
    InconsistentStart(String),
    #[error("enumeration of {count} words exceeds the budget of {budget}")]
    EnumerationTooLarge { count: f64, budget: u64 },
    #[error("work estimate {work} exceeds the budget of {budget}")]
    BudgetExceeded { work: f64, budget: u64 },
    #[error("interval is empty: {0}")]
    EmptyInterval(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation error in {context}: {source}")]
    Validation {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::NotBinary { .. } => "NotBinary",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::EmptyRowOrColumn { .. } => "EmptyRowOrColumn",
            Error::NotPrimitive { .. } => "NotPrimitive",
            Error::AlphabetMismatch { .. } => "AlphabetMismatch",
            Error::BadSymbolName(_) => "BadSymbolName",
            Error::UnknownSymbol(_) => "UnknownSymbol",
            Error::InadmissibleWord { .. } => "InadmissibleWord",
            Error::InadmissibleConcatenation { .. } => "InadmissibleConcatenation",
            Error::InadmissiblePoint(_) => "InadmissiblePoint",
            Error::InvalidPoint(_) => "InvalidPoint",
            Error::BracketUndefined { .. } => "BracketUndefined",
            Error::ContinuationTooShort { .. } => "ContinuationTooShort",
            Error::WordTooShort { .. } => "WordTooShort",
            Error::ZeroMemory => "ZeroMemory",
            Error::MemoryTooLarge { .. } => "MemoryTooLarge",
            Error::IncompleteTable { .. } => "IncompleteTable",
            Error::BadPotentialValue { .. } => "BadPotentialValue",
            Error::TableTooLarge(_) => "TableTooLarge",
            Error::AlphabetSizeMismatch => "AlphabetSizeMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotStochastic { .. } => "NotStochastic",
            Error::IncompatibleSupport { .. } => "IncompatibleSupport",
            Error::NoUniqueStationary => "NoUniqueStationary",
            Error::ChainMismatch(_) => "ChainMismatch",
            Error::InadmissiblePast { .. } => "InadmissiblePast",
            Error::InconsistentStart(_) => "InconsistentStart",
            Error::EnumerationTooLarge { .. } => "EnumerationTooLarge",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::EmptyInterval(_) => "EmptyInterval",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Io(_) => "IoError",
        }
    }

    /// Innermost error of a `Validation` chain.
    pub fn root(&self) -> &Error {
        match self {
            Error::Validation { source, .. } => source.root(),
            other => other,
        }
    }
}
