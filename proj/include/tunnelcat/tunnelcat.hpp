#pragma once

// Umbrella header. io.hpp (fmt, nlohmann_json) is not included here.

#include "tunnelcat/catastrophe.hpp"
#include "tunnelcat/classical_paths.hpp"
#include "tunnelcat/elliptic.hpp"
#include "tunnelcat/errors.hpp"
#include "tunnelcat/oracle.hpp"
#include "tunnelcat/partition.hpp"
#include "tunnelcat/potential.hpp"
#include "tunnelcat/quadrature.hpp"
