#pragma once

#include "orthnewton/core.hpp"
#include "orthnewton/cost.hpp"
#include "orthnewton/ica.hpp"
#include "orthnewton/matvec.hpp"
#include "orthnewton/newton.hpp"
#include "orthnewton/optimizer.hpp"
#include "orthnewton/random.hpp"

namespace orthnewton {

inline constexpr const char *kVersion = "0.1.0";

} // namespace orthnewton
