//! Named random streams split from a single root seed.
//!
//! Each noise source draws from its own ChaCha stream, so adding draws to one
//! source (say, a faster controller sampling more fades) leaves every other
//! source's realization untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Shadowing,
    Fading,
    PacketLoss,
    Latency,
    /// Fading seen by the packet engine at each connection event.
    EventFading,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Shadowing => 1,
            Stream::Fading => 2,
            Stream::PacketLoss => 3,
            Stream::Latency => 4,
            Stream::EventFading => 5,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
