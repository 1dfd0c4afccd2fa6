//! Postural-movement recognition from a single photoplethysmography (PPG) channel.
//!
//! The pipeline runs in stages that mirror how recordings are handled in practice:
//!
//! 1. [`wire`] streams raw sensor samples from a device (or its simulator) to a host.
//! 2. [`preprocess`] removes out-of-range samples, detrends and band-pass filters.
//! 3. [`segment`] finds pulse onsets against a moving-average baseline and slices pulses.
//! 4. [`poi`] locates onset, systolic, dicrotic, diastolic and end points on every pulse.
//! 5. [`features`] derives the 21 morphology features and ranks them by chi-squared.
//! 6. [`classify`] trains and evaluates the classifier families.
//!
//! [`synth`] generates recordings with known landmarks and is used as the test oracle
//! for everything downstream. [`pipeline`] and [`io`] glue the stages together for the CLI.

pub mod classify;
pub mod error;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod poi;
pub mod preprocess;
pub mod recording;
pub mod segment;
pub mod synth;
pub mod wire;

pub use error::{Error, Result};
pub use recording::{Activity, Recording, Sample};
