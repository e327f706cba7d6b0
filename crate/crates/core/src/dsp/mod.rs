//! Frequency-multiplexed PPG synthesis and the extraction chain that turns
//! raw detector waveforms back into fetal pulsation ratios:
//! demodulation, lower envelope (DC), lock-in (fetal AC), and a smoothed
//! EPR time series.

pub mod demod;
pub mod envelope;
pub mod fir;
pub mod lockin;
pub mod series;
pub mod synth;

pub use demod::{demodulate, DemodConfig};
pub use envelope::lower_envelope;
pub use lockin::{lock_in, LockIn, LockInOutput};
pub use series::{epr_series, extract_epr, EprSeries, Extracted};
pub use synth::{synthesize, ChannelAmplitudes, PhysioParams, PpgRecord, RateSeries, SynthConfig};

/// Raw sampling rate, samples per second.
pub const FS_RAW: f64 = 8000.0;
/// Rate after demodulation and decimation.
pub const FS_DEMOD: f64 = 80.0;
/// LED toggle frequencies of the two wavelengths, Hz.
pub const CARRIERS: [f64; 2] = [690.0, 940.0];
/// Fetal heart-rate band, Hz.
pub const FHR_BAND: (f64, f64) = (1.5, 3.5);
/// Maternal heart-rate band, Hz.
pub const MHR_BAND: (f64, f64) = (1.1, 2.0);
/// Maternal respiration band, Hz.
pub const MRR_BAND: (f64, f64) = (0.2, 0.33);
