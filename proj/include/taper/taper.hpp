// Umbrella header.
#pragma once

#include "taper/dynamics.hpp"
#include "taper/experiments.hpp"
#include "taper/hash.hpp"
#include "taper/io.hpp"
#include "taper/models.hpp"
#include "taper/oracles.hpp"
#include "taper/protocols.hpp"
#include "taper/session.hpp"
#include "taper/suites.hpp"
