pub mod constants;
pub mod counts;
pub mod hp;
pub mod pipeline;
pub mod radix;
pub mod report;
pub mod stats;
pub mod stream;
