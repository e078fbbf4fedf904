pub mod barrier;
pub mod engine;
pub mod error;
pub mod laws;
pub mod rng;
pub mod run;
pub mod stable;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use rng::{Seeder, Stream};

#[cfg(doctest)]
mod booktest {
    macro_rules! booktest {
        ($i:ident) => {
            #[doc = include_str!(concat!("../../../book/src/", stringify!($i), ".md"))]
            mod $i {}
        };
    }
    booktest!(introduction);
    booktest!(laws);
    booktest!(engine);
    booktest!(stable);
    booktest!(barrier);
    booktest!(verify);
    booktest!(cli);
}
