//! Tapped-delay-line channel synthesis.
//!
//! A [`TdlProfile`] gives normalized delays and powers; a [`FadingProcess`]
//! animates each tap with a Clarke-spectrum sum of sinusoids; and
//! [`freq_response`] turns tap gains into per-subcarrier coefficients.

mod fading;
mod profile;

pub use fading::{
    doppler_from_speed, freq_response, spawn_fading, FadingConfig, FadingProcess, TapGains, DEFAULT_SINUSOIDS,
    SPEED_OF_LIGHT,
};
pub use profile::{load_profile, parse_pdp, pdp_source, Tap, TdlModel, TdlProfile};
