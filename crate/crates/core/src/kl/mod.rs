//! KL alignment to `q ∝ p·exp(f(Ax))` for convex Lipschitz `f`.
//!
//! Supporting hyperplanes of `f` on an `h`-net of `B_k(R)` give a
//! log-sum-exp envelope `G` with `f ≤ G ≤ f + 1 + log m`. The tilt of the
//! base by `exp(G(Ax))` is a finite mixture of linear tilts, so it can be
//! sampled with the linear-tilt primitive and then corrected by rejection
//! with acceptance `exp(f − G) ≥ e^{−(1+log m)}`.

mod envelope;
mod net;
mod params;
mod proposal;
mod sampler;

pub use envelope::{build_envelope, Envelope, EnvelopeDump, EnvelopePiece};
pub use net::{build_net, Net, DEFAULT_NET_CAP};
pub use params::{compute_params, Alg1Params};
pub use proposal::{build_proposal, MixtureProposal};
pub use sampler::{sample_kl_aligned, KlAligner, KlConfig, KlDiagnostics, KlDraw};
