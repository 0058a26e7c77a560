//! Chat-completions gateway: one `send` entry point over a remote or a
//! fixture-replay backend, with retry, admission control and usage totals.

pub mod admission;
pub mod config;
pub mod gateway;
pub mod ledger;
pub mod transport;
pub mod types;

pub use admission::{FifoSemaphore, Permit, TokenBudget};
pub use config::{Fallback, GatewayConfig, Price, RetryPolicy};
pub use gateway::{Gateway, GatewayError};
pub use ledger::{ModelReport, ModelTotals, UsageLedger};
pub use transport::{
    parse_wire_response, request_digest, wire_body, Completion, FixtureEntry, FixtureMock, FnTransport,
    RemoteTransport, Transport, TransportError,
};
pub use types::{Backend, ChatRequest, ChatResponse, Part, Usage};
