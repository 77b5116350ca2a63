#pragma once

namespace polyfeti {

/// Selects the OpenMP kernel or its serial reference twin. Both produce
/// bit-identical results; the serial path is kept for testing and benchmarks.
enum class Execution { Serial, Parallel };

}  // namespace polyfeti
