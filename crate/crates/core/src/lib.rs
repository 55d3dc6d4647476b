//! Event-study toolkit for intraday volatility around a market-structure event.
//!
//! The pipeline turns one-minute OHLC bars into civil-day log-price grids
//! ([`market_data`]), measures daily volatility ([`vol`]) and intraday amplitude
//! spectra ([`spectral`]), compares periods against a baseline, estimates a
//! treatment/control difference-in-differences regression ([`event_study`]) and
//! fits a two-regime Markov-switching GJR-GARCH to daily returns ([`msgarch`]).
//! [`pipeline`] ties the stages together and writes the report files.

pub mod dual;
pub mod event_study;
pub mod market_data;
pub mod msgarch;
pub mod optim;
pub mod pipeline;
pub mod spectral;
pub mod stats;
pub mod synthetic;
pub mod vol;
