//! Monotonic stopwatch. Without the `native` feature (e.g. in the browser
//! build) it reports zero elapsed time.

#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(feature = "native")]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(feature = "native")]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        #[cfg(feature = "native")]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(not(feature = "native"))]
        {
            0.0
        }
    }
}
