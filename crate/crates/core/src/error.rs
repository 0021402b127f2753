use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("mirror tilt {0:.3e} rad exceeds the small-angle bound of {1:.3e} rad")]
    TiltTooLarge(f64, f64),

    #[error("Doppler frequency degenerate with recoil: |8*w_D - 16*w_r| = {0:.3e} rad/s below epsilon {1:.3e}")]
    DegenerateDoppler(f64, f64),

    #[error("frequency grid spans [{lo:.1}, {hi:.1}] Hz but the side peaks sit at +/-{need:.1} Hz")]
    GridTooNarrow { lo: f64, hi: f64, need: f64 },

    #[error("no side peak found above the noise floor")]
    PeakNotFound,

    #[error("{0} candidate side peaks found, expected exactly 2")]
    AmbiguousPeaks(usize),

    #[error("sample rate {0:.1} Hz below the minimum {1:.1} Hz for this spectrum")]
    RateTooLow(f64, f64),

    #[error("trace covers [{lo:.4}, {hi:.4}] s, need [{need_lo:.4}, {need_hi:.4}] s")]
    TraceTooShort {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("fringe lock lost: error signal out of linear range for {0} consecutive updates")]
    FringeLost(usize),

    #[error("fringe fit failed: {0}")]
    FitFailed(String),

    #[error("series of {0} samples too short for tau {1:.1} s at dt {2:.3} s")]
    SeriesTooShort(usize, f64, f64),

    #[error("atomic and classical Allan deviation curves do not cross")]
    NoCrossing,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
