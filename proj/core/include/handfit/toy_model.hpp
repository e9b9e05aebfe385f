#pragma once

#include <cstdint>

#include "handfit/assets.hpp"

namespace handfit {

// Procedurally builds a low fidelity articulated hand: a capped palm tube,
// five capped finger tubes and a few webbing triangles, totalling exactly 778
// vertices and 1538 faces. The seed jitters the proportions, so different
// seeds give different but equally valid assets. Deterministic per seed.
HandModelAssets gen_toy_model(std::uint64_t seed);

}  // namespace handfit
