//! Shared fixtures for the benchmarks.

use conjlab_core::systems::SystemConfig;
use conjlab_core::SemilinearSystem;

/// A built-in system by name; panics on unknown names.
pub fn system(name: &str) -> SemilinearSystem {
    SystemConfig::builtin(name)
        .and_then(|c| c.build())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}
