#pragma once

// Widely-linear and polynomial-expansion precoding for downlink MU-MISO,
// with benchmark precoders, large-system analysis and a Monte-Carlo harness.

#include "wlp/errors.hpp"
#include "wlp/model.hpp"
#include "wlp/pe.hpp"
#include "wlp/precoding.hpp"
#include "wlp/asymptotic.hpp"
#include "wlp/sim.hpp"
#include "wlp/validation.hpp"
